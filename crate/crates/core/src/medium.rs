//! Stationary random coefficient fields on the integer lattice.
//!
//! A field is never materialised. Every cell value is a keyed hash of
//! `(seed, z + offset)`, so the lattice shift acts as an exact index shift and
//! arbitrary cells can be queried in any order from any thread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum supported lattice dimension.
pub const MAX_DIM: usize = 3;

/// Coordinates (after applying the shift offset) must satisfy `|z_i| < COORD_BOUND`.
pub const COORD_BOUND: i64 = 1 << 31;

const STREAM_CELL: u64 = 0x243F_6A88_85A3_08D3;
const STREAM_COIN: u64 = 0x1319_8A2E_0370_7344;
const STREAM_SUB_A: u64 = 0xA409_3822_299F_31D0;
const STREAM_SUB_B: u64 = 0x082E_FA98_EC4E_6C89;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("lattice coordinate {coord} on axis {axis} exceeds the supported bound 2^31")]
    CoordinateOverflow { axis: usize, coord: i64 },
    #[error("lattice point has {0} coordinates, at most {MAX_DIM} are supported")]
    Dimension(usize),
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
}

/// Generator family of a coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Independent cells: `values[0]` with probability `prob`, otherwise `values[1]`.
    IidCells {
        values: [f64; 2],
        prob: f64,
    },
    /// Periodic stripes orthogonal to `axis`. The residue `z_axis mod period`
    /// is split into `values.len()` equal stripes.
    Laminate {
        axis: usize,
        period: u32,
        values: Vec<f64>,
    },
    Constant {
        value: f64,
    },
    /// One global coin drawn from the seed picks `a` (probability `coin_prob`) or `b`
    /// for the whole lattice. Stationary, not ergodic.
    Mixture {
        a: Box<GeneratorKind>,
        b: Box<GeneratorKind>,
        coin_prob: f64,
    },
}

impl GeneratorKind {
    pub fn iid_cells(alpha: f64, beta: f64, prob: f64) -> Self {
        GeneratorKind::IidCells {
            values: [alpha, beta],
            prob,
        }
    }

    pub fn laminate(axis: usize, period: u32, values: Vec<f64>) -> Self {
        GeneratorKind::Laminate {
            axis,
            period,
            values,
        }
    }

    pub fn constant(value: f64) -> Self {
        GeneratorKind::Constant { value }
    }

    pub fn mixture(a: GeneratorKind, b: GeneratorKind, coin_prob: f64) -> Self {
        GeneratorKind::Mixture {
            a: Box::new(a),
            b: Box::new(b),
            coin_prob,
        }
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(MediumError::InvalidParameters(format!(
                    "{what} must be finite, got {v}"
                )))
            }
        };
        let probability = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(MediumError::InvalidParameters(format!(
                    "{what} must lie in [0,1], got {p}"
                )))
            }
        };
        match self {
            GeneratorKind::IidCells { values, prob } => {
                finite(values[0], "iid value")?;
                finite(values[1], "iid value")?;
                probability(*prob, "iid probability")
            }
            GeneratorKind::Laminate {
                axis,
                period,
                values,
            } => {
                if *axis >= MAX_DIM {
                    return Err(MediumError::InvalidParameters(format!(
                        "laminate axis {axis} out of range"
                    )));
                }
                if *period == 0 {
                    return Err(MediumError::InvalidParameters(
                        "laminate period must be at least 1".into(),
                    ));
                }
                if values.is_empty() || values.len() > *period as usize {
                    return Err(MediumError::InvalidParameters(format!(
                        "laminate needs between 1 and {period} stripe values, got {}",
                        values.len()
                    )));
                }
                values.iter().try_for_each(|&v| finite(v, "laminate value"))
            }
            GeneratorKind::Constant { value } => finite(*value, "constant value"),
            GeneratorKind::Mixture { a, b, coin_prob } => {
                probability(*coin_prob, "mixture coin probability")?;
                a.validate()?;
                b.validate()
            }
        }
    }

    /// Smallest and largest value the family can produce.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            GeneratorKind::IidCells { values, prob } => {
                if *prob >= 1.0 {
                    (values[0], values[0])
                } else if *prob <= 0.0 {
                    (values[1], values[1])
                } else {
                    (values[0].min(values[1]), values[0].max(values[1]))
                }
            }
            GeneratorKind::Laminate { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            GeneratorKind::Constant { value } => (*value, *value),
            GeneratorKind::Mixture { a, b, .. } => {
                let (la, ha) = a.value_range();
                let (lb, hb) = b.value_range();
                (la.min(lb), ha.max(hb))
            }
        }
    }

    /// Expected value of a single cell coefficient.
    pub fn mean(&self) -> f64 {
        match self {
            GeneratorKind::IidCells { values, prob } => prob * values[0] + (1.0 - prob) * values[1],
            GeneratorKind::Laminate { period, values, .. } => {
                let p = *period as usize;
                (0..p).map(|r| values[r * values.len() / p]).sum::<f64>() / p as f64
            }
            GeneratorKind::Constant { value } => *value,
            GeneratorKind::Mixture { a, b, coin_prob } => {
                coin_prob * a.mean() + (1.0 - coin_prob) * b.mean()
            }
        }
    }
}

/// One realization `ω` of a stationary lattice medium together with its
/// current shift state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    seed: u64,
    kind: GeneratorKind,
    offset: [i64; MAX_DIM],
    scale: f64,
}

/// Draw a realization of `kind` from `seed`. The returned field has zero offset.
pub fn sample_medium(kind: GeneratorKind, seed: u64) -> Result<CoefficientField, MediumError> {
    kind.validate()?;
    Ok(CoefficientField {
        seed,
        kind,
        offset: [0; MAX_DIM],
        scale: 1.0,
    })
}

impl CoefficientField {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn offset(&self) -> &[i64; MAX_DIM] {
        &self.offset
    }

    /// Smallest and largest coefficient this realization can take.
    pub fn value_range(&self) -> (f64, f64) {
        let (lo, hi) = self.kind.value_range();
        let (a, b) = (lo * self.scale, hi * self.scale);
        (a.min(b), a.max(b))
    }

    /// Coefficient of the unit cell `z + [0,1)^n`.
    pub fn coefficient_at(&self, z: &[i64]) -> Result<f64, MediumError> {
        if z.len() > MAX_DIM {
            return Err(MediumError::Dimension(z.len()));
        }
        let mut abs = [0i64; MAX_DIM];
        for (axis, (slot, &off)) in abs.iter_mut().zip(&self.offset).enumerate() {
            let zi = z.get(axis).copied().unwrap_or(0);
            *slot = zi
                .checked_add(off)
                .filter(|c| c.abs() < COORD_BOUND)
                .ok_or(MediumError::CoordinateOverflow {
                    axis,
                    coord: zi.saturating_add(off),
                })?;
        }
        Ok(self.scale * raw_value(&self.kind, self.seed, &abs))
    }

    /// Coefficient of the cell containing the continuum point `x` (cell `⌊x⌋`).
    pub fn coefficient_at_point(&self, x: &[f64]) -> Result<f64, MediumError> {
        let mut z = [0i64; MAX_DIM];
        if x.len() > MAX_DIM {
            return Err(MediumError::Dimension(x.len()));
        }
        for (zi, xi) in z.iter_mut().zip(x) {
            let f = xi.floor();
            if f.is_nan() || f.abs() >= COORD_BOUND as f64 {
                return Err(MediumError::CoordinateOverflow {
                    axis: 0,
                    coord: f as i64,
                });
            }
            *zi = f as i64;
        }
        self.coefficient_at(&z[..x.len()])
    }

    /// The field `τ_z ω`: `shift(F, z).coefficient_at(y) == F.coefficient_at(y + z)`.
    pub fn shift(&self, z: &[i64]) -> CoefficientField {
        let mut out = self.clone();
        for (o, zi) in out.offset.iter_mut().zip(z) {
            *o = o.wrapping_add(*zi);
        }
        out
    }

    /// The same realization with every coefficient multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> CoefficientField {
        let mut out = self.clone();
        out.scale *= lambda;
        out
    }

    /// For mixture media, which sub-kind this realization uses (`true` = first).
    /// `None` for every other family.
    pub fn mixture_branch(&self) -> Option<bool> {
        match &self.kind {
            GeneratorKind::Mixture { coin_prob, .. } => Some(coin(self.seed, *coin_prob)),
            _ => None,
        }
    }
}

fn coin(seed: u64, prob: f64) -> bool {
    unit_interval(splitmix64(seed ^ STREAM_COIN)) < prob
}

fn raw_value(kind: &GeneratorKind, seed: u64, z: &[i64; MAX_DIM]) -> f64 {
    match kind {
        GeneratorKind::Constant { value } => *value,
        GeneratorKind::Laminate {
            axis,
            period,
            values,
        } => {
            let p = *period as i64;
            let r = z[*axis].rem_euclid(p) as usize;
            values[r * values.len() / p as usize]
        }
        GeneratorKind::IidCells { values, prob } => {
            if unit_interval(cell_hash(seed, z)) < *prob {
                values[0]
            } else {
                values[1]
            }
        }
        GeneratorKind::Mixture { a, b, coin_prob } => {
            if coin(seed, *coin_prob) {
                raw_value(a, splitmix64(seed ^ STREAM_SUB_A), z)
            } else {
                raw_value(b, splitmix64(seed ^ STREAM_SUB_B), z)
            }
        }
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn cell_hash(seed: u64, z: &[i64; MAX_DIM]) -> u64 {
    let mut h = splitmix64(seed ^ STREAM_CELL);
    for &c in z {
        h = splitmix64(h ^ c as u64);
    }
    h
}

#[inline]
fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
