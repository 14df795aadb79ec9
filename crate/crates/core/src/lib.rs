//! Marginally trapped codimension-two submanifolds of Robertson–Walker
//! spaces `Q^{n+1}_c ×_w I`.
//!
//! A hypersurface `φ` of the space form `Q^{n+1}_c` with unit normal `ν` and
//! a height `τ` give the immersion `(co(θ(τ))φ + si(θ(τ))ν, τ)`, where
//! `θ` is the conformal time of the warp `w`. It is marginally trapped
//! exactly when `τ` solves the pointwise height equation in [`mtsolve`].
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a <= b)` rejects NaN on purpose

pub mod desitter;
pub mod dual;
pub mod error;
pub mod expr;
pub mod fd;
pub mod hypersurface;
pub mod immersion;
pub mod linalg;
pub mod mtsolve;
pub mod quadrature;
pub mod real;
pub mod roots;
pub mod spaceforms;
pub mod warp;

pub use error::{Error, Result};
pub use hypersurface::{Cluster, Grid, HypersurfaceChart};
pub use immersion::{HeightMap, MTImmersion, Tolerances, VerificationReport, VerifyMode, VerifyOptions};
pub use mtsolve::{BracketSet, HeightField, MTEquation, RootBracket, Solution};
pub use real::Real;
pub use spaceforms::{Curvature, Family, SpaceForm};
pub use warp::WarpProfile;

pub type WarpProfile64 = WarpProfile<f64>;
pub type WarpProfile32 = WarpProfile<f32>;
pub type HypersurfaceChart64 = HypersurfaceChart<f64>;
pub type HypersurfaceChart32 = HypersurfaceChart<f32>;
pub type HeightField64 = HeightField<f64>;
pub type HeightField32 = HeightField<f32>;
pub type MTImmersion64 = MTImmersion<f64>;
pub type MTImmersion32 = MTImmersion<f32>;
pub type VerifyOptions64 = VerifyOptions<f64>;
pub type VerifyOptions32 = VerifyOptions<f32>;
