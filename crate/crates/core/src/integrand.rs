//! Volume and surface integrand families of coefficient-times-shape form.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::medium::{CoefficientField, MediumError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrandError {
    #[error("jump amplitude must be nonzero")]
    ZeroJump,
    #[error("normal has length {0}, expected 1")]
    NonUnitNormal(f64),
    #[error("exponent p = {0} must exceed 1")]
    Exponent(f64),
    #[error("coefficients must be positive, got minimum {0}")]
    NonPositiveCoefficient(f64),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

/// `f(ω, x, ξ) = a(ω, ⌊x⌋) |ξ|^p` with declared bounds `c1 ≤ a ≤ c2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeIntegrand {
    pub field: CoefficientField,
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
}

impl VolumeIntegrand {
    /// Scaled-power integrand with `c1`, `c2` read off the field's value range.
    pub fn new(field: CoefficientField, p: f64) -> Result<Self, IntegrandError> {
        if p.is_nan() || p <= 1.0 {
            return Err(IntegrandError::Exponent(p));
        }
        let (lo, hi) = field.value_range();
        if lo.is_nan() || lo <= 0.0 {
            return Err(IntegrandError::NonPositiveCoefficient(lo));
        }
        Ok(VolumeIntegrand {
            field,
            p,
            c1: lo,
            c2: hi,
        })
    }

    pub fn with_bounds(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    /// `|ξ|^p` for the Frobenius norm.
    pub fn shape(&self, xi_norm2: f64) -> f64 {
        if self.p == 2.0 {
            xi_norm2
        } else {
            xi_norm2.powf(self.p / 2.0)
        }
    }
}

pub fn eval_volume(
    f: &VolumeIntegrand,
    x: &[f64],
    xi: ArrayView2<f64>,
) -> Result<f64, IntegrandError> {
    let a = f.field.coefficient_at_point(x)?;
    let norm2: f64 = xi.iter().map(|v| v * v).sum();
    Ok(a * f.shape(norm2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SurfaceFamily {
    /// `g = c(ω, ⌊x⌋)`, independent of the jump.
    Perimeter,
    /// `g = c(ω, ⌊x⌋) (1 + min(|ζ|, cap))`.
    Amplitude { cap: f64 },
}

impl SurfaceFamily {
    pub fn shape(&self, zeta_norm: f64) -> f64 {
        match self {
            SurfaceFamily::Perimeter => 1.0,
            SurfaceFamily::Amplitude { cap } => 1.0 + zeta_norm.min(*cap),
        }
    }

    /// Whether the two-label cut is an exact minimum (no dependence on `ζ`).
    pub fn is_jump_independent(&self) -> bool {
        matches!(self, SurfaceFamily::Perimeter)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIntegrand {
    pub field: CoefficientField,
    pub family: SurfaceFamily,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

impl SurfaceIntegrand {
    /// Constants derived from the field: `c4 = min c`, `c5 = max c`, and
    /// `c3 = 1` (perimeter) or `1 + cap` (amplitude).
    pub fn new(field: CoefficientField, family: SurfaceFamily) -> Result<Self, IntegrandError> {
        let (lo, hi) = field.value_range();
        if lo.is_nan() || lo <= 0.0 {
            return Err(IntegrandError::NonPositiveCoefficient(lo));
        }
        let c3 = match family {
            SurfaceFamily::Perimeter => 1.0,
            SurfaceFamily::Amplitude { cap } => 1.0 + cap,
        };
        Ok(SurfaceIntegrand {
            field,
            family,
            c3,
            c4: lo,
            c5: hi,
        })
    }

    pub fn with_constants(mut self, c3: f64, c4: f64, c5: f64) -> Self {
        self.c3 = c3;
        self.c4 = c4;
        self.c5 = c5;
        self
    }

    /// Evaluation without argument checks; `zeta_norm` is `|ζ|`.
    pub fn eval_unchecked(&self, x: &[f64], zeta_norm: f64) -> Result<f64, MediumError> {
        Ok(self.field.coefficient_at_point(x)? * self.family.shape(zeta_norm))
    }
}

pub fn eval_surface(
    g: &SurfaceIntegrand,
    x: &[f64],
    zeta: &[f64],
    nu: &[f64],
) -> Result<f64, IntegrandError> {
    let zn = norm(zeta);
    if zn == 0.0 {
        return Err(IntegrandError::ZeroJump);
    }
    let nn = norm(nu);
    if (nn - 1.0).abs() > 1e-12 {
        return Err(IntegrandError::NonUnitNormal(nn));
    }
    Ok(g.eval_unchecked(x, zn)?)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Worst sampled violation margin per axiom; `<= 0` means satisfied on every sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceAxiomReport {
    pub comparability: f64,
    pub monotonicity: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub symmetry: f64,
}

impl SurfaceAxiomReport {
    pub fn all_satisfied(&self) -> bool {
        [
            self.comparability,
            self.monotonicity,
            self.lower_bound,
            self.upper_bound,
            self.symmetry,
        ]
        .iter()
        .all(|m| *m <= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeAxiomReport {
    pub lower_growth: f64,
    pub upper_growth: f64,
}

impl VolumeAxiomReport {
    pub fn all_satisfied(&self) -> bool {
        self.lower_growth <= 0.0 && self.upper_growth <= 0.0
    }
}

const SAMPLE_BOX: f64 = 64.0;
const JUMP_DIM: usize = 2;

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.into_iter().map(|a| a / l).collect();
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.gen_range(-SAMPLE_BOX..SAMPLE_BOX))
        .collect()
}

/// Sample-based check of the growth, monotonicity and symmetry axioms of a
/// surface integrand (planar `x`, `ν`; two-component `ζ`).
pub fn validate_surface_axioms(
    g: &SurfaceIntegrand,
    n_samples: usize,
    rng_seed: u64,
) -> Result<SurfaceAxiomReport, IntegrandError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let max_amp = match g.family {
        SurfaceFamily::Perimeter => 8.0,
        SurfaceFamily::Amplitude { cap } => 2.0 * (cap + 1.0),
    };
    let mut rep = SurfaceAxiomReport {
        comparability: f64::NEG_INFINITY,
        monotonicity: f64::NEG_INFINITY,
        lower_bound: f64::NEG_INFINITY,
        upper_bound: f64::NEG_INFINITY,
        symmetry: f64::NEG_INFINITY,
    };
    for _ in 0..n_samples {
        let x = random_point(&mut rng, 2);
        let nu = random_unit(&mut rng, 2);
        let dir = random_unit(&mut rng, JUMP_DIM);
        let r1 = rng.gen_range(1e-6..max_amp);
        let r2 = rng.gen_range(r1..=max_amp.max(r1));
        let z1: Vec<f64> = dir.iter().map(|d| d * r1).collect();
        let dir2 = random_unit(&mut rng, JUMP_DIM);
        let z2: Vec<f64> = dir2.iter().map(|d| d * r2).collect();

        let v1 = eval_surface(g, &x, &z1, &nu)?;
        let v2 = eval_surface(g, &x, &z2, &nu)?;
        rep.lower_bound = rep.lower_bound.max(g.c4 - v1);
        rep.upper_bound = rep.upper_bound.max(v1 - g.c5 * (1.0 + norm(&z1)));
        rep.comparability = rep.comparability.max(v1 - g.c3 * v2);

        let r3 = g.c3 * r1 * rng.gen_range(1.0..2.0);
        let z3: Vec<f64> = dir2.iter().map(|d| d * r3).collect();
        let v3 = eval_surface(g, &x, &z3, &nu)?;
        rep.monotonicity = rep.monotonicity.max(v1 - v3);

        let neg_z: Vec<f64> = z1.iter().map(|a| -a).collect();
        let neg_nu: Vec<f64> = nu.iter().map(|a| -a).collect();
        let w = eval_surface(g, &x, &neg_z, &neg_nu)?;
        rep.symmetry = rep.symmetry.max((v1 - w).abs());
    }
    Ok(rep)
}

/// Sample-based check of `c1|ξ|^p ≤ f ≤ c2(1+|ξ|^p)` for planar scalar gradients.
pub fn validate_volume_axioms(
    f: &VolumeIntegrand,
    n_samples: usize,
    rng_seed: u64,
) -> Result<VolumeAxiomReport, IntegrandError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rep = VolumeAxiomReport {
        lower_growth: f64::NEG_INFINITY,
        upper_growth: f64::NEG_INFINITY,
    };
    for _ in 0..n_samples {
        let x = random_point(&mut rng, 2);
        let xi = ndarray::arr2(&[[rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]]);
        let v = eval_volume(f, &x, xi.view())?;
        let np = f.shape(xi.iter().map(|a| a * a).sum());
        rep.lower_growth = rep.lower_growth.max(f.c1 * np - v);
        rep.upper_growth = rep.upper_growth.max(v - f.c2 * (1.0 + np));
    }
    Ok(rep)
}
