//! Riesz and logarithmic energies of point sets on the sphere 𝕊ᵈ ⊂ ℝ^{d+1}:
//! energy evaluation and minimization, spectral (spherical-harmonic) tools,
//! and discrepancy measures of the resulting configurations.
//!
//! Numerical types are generic over [`Scalar`]; the `*F64` aliases fix them to `f64`.

// Negated comparisons are how NaN arguments get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrepancy;
pub mod error;
pub mod kernels;
pub mod minimize;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod spectral;
pub mod sphere;

pub use discrepancy::{
    cap_discrepancy, discrepancy_report, mean_value_check, smoothing_defect, stolarsky_decomposition_check,
    CapDiscrepancyEstimate, DiscrepancyReport, IdentityReport, SmoothingDefect,
};
pub use error::{Error, Result};
pub use kernels::{continuous_energy, discrete_energy, energy_gap, energy_gradient, EnergyStats, RieszParams};
pub use minimize::{minimize_energy, minimize_energy_cached, Init, MinimizeOptions, MinimizeResult};
pub use scalar::Scalar;
pub use spectral::{pair_cap_energy, riesz_eigenvalue, sobolev_discrepancy, SobolevDiscrepancyResult, SpectralTable};
pub use sphere::{read_config, write_config, Cap, ConfigMeta, Configuration, Exponent, SpherePoint};

pub type SpherePointF64 = SpherePoint<f64>;
pub type ConfigurationF64 = Configuration<f64>;
pub type CapF64 = Cap<f64>;
pub type RieszParamsF64 = RieszParams<f64>;
pub type SpectralTableF64 = SpectralTable<f64>;
pub type PairCapKernelF64 = spectral::PairCapKernel<f64>;
pub type MinimizeResultF64 = MinimizeResult<f64>;
pub type CapDiscrepancyEstimateF64 = CapDiscrepancyEstimate<f64>;
