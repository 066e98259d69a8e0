//! Numerical cell formulas for stochastic homogenisation of free-discontinuity
//! functionals: random media, integrand families, rational rotation frames,
//! discrete volume and surface cell solvers, and the subadditive-process
//! estimation harness.

pub mod ergodic;
pub mod geometry;
pub mod integrand;
pub mod medium;
pub mod surface_cell;
pub mod volume_cell;

pub use ergodic::{
    check_center_independence, check_covariance, check_shift_invariance, check_subadditivity,
    estimate_fhom, estimate_ghom, mu_eval, ErgodicError, EstimateSeries, HomDensityTable,
    SubadditiveProcessSpec, VolumeProcessSpec,
};
pub use geometry::{
    make_frame, Frame, Interval1, JumpDatum, Normal, OrientedCube, Rational, RationalDirection,
};
pub use integrand::{SurfaceFamily, SurfaceIntegrand, VolumeIntegrand};
pub use medium::{sample_medium, CoefficientField, GeneratorKind};
pub use surface_cell::{CutOptions, Neighborhood, SurfaceCellResult};
pub use volume_cell::VolumeCellResult;
