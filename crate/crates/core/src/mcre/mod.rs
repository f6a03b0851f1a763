//! Parametric kernels, drift checks, the split map T^R, coupled chains and
//! total-variation bounds.

pub mod coupling;
pub mod kernel;
pub mod split;
pub mod tv;

pub use coupling::{
    couple_chains, CouplingOptions, CouplingRecord, CouplingReport, CouplingSet, EnvPath, InitSampler, Start, TailCurve,
    TailFit,
};
pub use kernel::{
    contractivity_rate, drift_verify, iterated_drift_bound, AffineKernel, ContractivityReport, DriftData, DriftReport,
    IdentityKernel, RateMethod, ScalarFn, ScalarKernel,
};
pub use split::{LevelRule, PointMass, Regeneration, ResidualMethod, SplitSampler};
pub use tv::{histogram_tv, tv_bound_report, Binning, Histogram, TvReport};
