use crate::expr::ExprError;
use crate::quadrature::QuadError;
use crate::roots::RootError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("ct has a pole at t = {t} (c = {c})")]
    CtPole { c: i8, t: f64 },
    #[error("invalid geodesic data: {0}")]
    InvalidGeodesic(String),
    #[error("unknown hypersurface family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter for `{family}`: {message}")]
    InvalidParameter { family: String, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("t = {t} lies outside the interval ({lo}, {hi})")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },
    #[error("warp function not positive: w({t}) = {w}")]
    NonPositiveWarp { t: f64, w: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("s = {s} outside the range of theta, approximately ({lo}, {hi})")]
    ThetaOutOfRange { s: f64, lo: f64, hi: f64 },
    #[error("Omega is singular at t = {t} (denominator {denominator:e})")]
    SingularOmega { t: f64, denominator: f64 },
    #[error("all Omega samples were singular")]
    AllSamplesSingular,
    #[error("differential of the chart is rank deficient at u = {u:?} (singular value ratio {ratio:e})")]
    RankDeficient { u: Vec<f64>, ratio: f64 },
    #[error("shape operator not symmetric at u = {u:?} (defect {defect:e})")]
    AsymmetricShapeOperator { u: Vec<f64>, defect: f64 },
    #[error("displacement s = {s} hits a focal point: kappa = {kappa} at u = {u:?}")]
    FocalDistance { s: f64, kappa: f64, u: Vec<f64> },
    #[error("principal curvature multiplicities change across the chart: {expected:?} at the reference point, {found:?} at u = {u:?}")]
    ClusterPatternChanged {
        expected: Vec<usize>,
        found: Vec<usize>,
        u: Vec<f64>,
    },
    #[error("residual singular at t = {t}: {reason}")]
    SingularResidual { t: f64, reason: String },
    #[error("bracket {index} is not admissible: {reason}")]
    InadmissibleBracket { index: usize, reason: String },
    #[error("residual {residual:e} at tau = {t} exceeds the acceptance bound")]
    ResidualTooLarge { t: f64, residual: f64 },
    #[error("branch collision: neighbouring roots merge (bracket width {width:e})")]
    BranchCollision { width: f64 },
    #[error("boundary root at bracket {index}: construction degenerate (kappa^2 + c = 0)")]
    BoundaryRoot { index: usize },
    #[error("height outside universe interval: root lies outside theta(I) = ({lo}, {hi})")]
    HeightOutsideUniverse { lo: f64, hi: f64 },
    #[error("branch {branch} requested but only {available} admissible branches exist")]
    NoSuchBranch { branch: usize, available: usize },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("immersion not spacelike at u = {u:?} (smallest metric eigenvalue {min_eig:e})")]
    NotSpacelike { u: Vec<f64>, min_eig: f64 },
    #[error("curvature formula singular at tau = {tau} (denominator {denominator:e})")]
    CurveCusp { tau: f64, denominator: f64 },
    #[error("point outside the de Sitter chart (x_(n+2) + x_(n+3) = {sum})")]
    OutsideDeSitterChart { sum: f64 },
    #[error("tau_1 must be positive, found {value} at x = {x:?}")]
    NonPositiveTau { value: f64, x: Vec<f64> },
    #[error("step size underflow: h = {h:e}")]
    StepUnderflow { h: f64 },
    #[error("chart data: {0}")]
    ChartData(String),
    #[error("{0}")]
    InvalidInput(String),
}
