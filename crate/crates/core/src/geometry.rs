//! Exact rational frames, oriented cubes, lifted intervals and jump data.
//!
//! Rotations and region boundaries are kept in exact rational arithmetic;
//! floating point only appears when a region is rasterised or an integrand is
//! evaluated. Lattice points are tested in "doubled" integer coordinates
//! (`y = P / 2`), which covers cell centers `z + 1/2` and the midpoints of
//! center-to-center edges without rounding.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// Default cap on the integer scale `M` of a frame.
pub const DEFAULT_M_CAP: i64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("direction {0} is not a unit vector")]
    NotUnit(String),
    #[error("direction must have at least two components and a positive denominator")]
    Malformed,
    #[error("frame scale M = {m} exceeds the cap {cap}")]
    ScaleCap { m: i64, cap: i64 },
    #[error("cannot parse direction {0:?}; expected `[a,b]/d` or `a,b/d`")]
    Parse(String),
    #[error("interval [{a}, {b}) is empty")]
    EmptyInterval { a: Rational, b: Rational },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("side length must be positive")]
    NonPositiveSide,
}

/// A unit vector with rational entries, stored as integer numerators over a
/// common positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalDirection {
    numerators: Vec<i64>,
    denominator: i64,
}

impl RationalDirection {
    pub fn new(numerators: Vec<i64>, denominator: i64) -> Result<Self, GeometryError> {
        if numerators.len() < 2 || denominator <= 0 {
            return Err(GeometryError::Malformed);
        }
        let norm2: i128 = numerators.iter().map(|&a| a as i128 * a as i128).sum();
        if norm2 != denominator as i128 * denominator as i128 {
            return Err(GeometryError::NotUnit(format!(
                "{}",
                RationalDirection {
                    numerators,
                    denominator
                }
            )));
        }
        Ok(RationalDirection {
            numerators,
            denominator,
        })
    }

    /// The `k`-th standard basis vector of `R^n`.
    pub fn axis(n: usize, k: usize) -> Self {
        let mut numerators = vec![0; n];
        numerators[k] = 1;
        RationalDirection {
            numerators,
            denominator: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn denominator(&self) -> i64 {
        self.denominator
    }

    pub fn components(&self) -> Vec<Rational> {
        self.numerators
            .iter()
            .map(|&a| Rational::new(a, self.denominator))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .map(|&a| a as f64 / self.denominator as f64)
            .collect()
    }

    pub fn negated(&self) -> Self {
        RationalDirection {
            numerators: self.numerators.iter().map(|a| -a).collect(),
            denominator: self.denominator,
        }
    }

    /// Whether the direction lies in the closed "upper" hemisphere: the last
    /// nonzero component is positive.
    pub fn is_upper(&self) -> bool {
        self.numerators
            .iter()
            .rev()
            .find(|&&a| a != 0)
            .is_some_and(|&a| a > 0)
    }

    /// The representative of `{ν, −ν}` in the upper hemisphere.
    pub fn upper_representative(&self) -> Self {
        if self.is_upper() {
            self.clone()
        } else {
            self.negated()
        }
    }
}

impl fmt::Display for RationalDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nums: Vec<String> = self.numerators.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]/{}", nums.join(","), self.denominator)
    }
}

impl FromStr for RationalDirection {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || GeometryError::Parse(s.to_string());
        let (nums, den) = s.trim().rsplit_once('/').ok_or_else(err)?;
        let nums = nums.trim();
        let nums = nums
            .strip_prefix('[')
            .and_then(|n| n.strip_suffix(']'))
            .unwrap_or(nums);
        let numerators = nums
            .split(',')
            .map(|a| a.trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err())?;
        let denominator = den.trim().parse::<i64>().map_err(|_| err())?;
        RationalDirection::new(numerators, denominator)
    }
}

/// Exact rational rotation `R_ν` with `R_ν e_n = ν`, plus the smallest
/// integer `M_ν` making `M_ν R_ν` an integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    nu: RationalDirection,
    /// Row-major `n × n`.
    rotation: Vec<Vec<Rational>>,
    scale: i64,
}

/// Build the frame of `nu`.
///
/// For `ν = e_n` the rotation is the identity. Otherwise `R = H D`, where `H`
/// is the reflection across the hyperplane orthogonal to `e_n − ν` and `D`
/// negates the first coordinate, so that `det R = +1`.
pub fn make_frame(nu: &RationalDirection, m_cap: i64) -> Result<Frame, GeometryError> {
    let n = nu.dim();
    let comps = nu.components();
    let one = Rational::from_integer(1);
    let zero = Rational::from_integer(0);
    let is_en = comps[..n - 1].iter().all(|c| *c == zero) && comps[n - 1] == one;
    let rotation = if is_en {
        identity(n)
    } else {
        let v: Vec<Rational> = (0..n)
            .map(|i| {
                if i == n - 1 {
                    one - comps[i]
                } else {
                    -comps[i]
                }
            })
            .collect();
        let vv: Rational = v.iter().map(|x| x * x).sum();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let delta = if i == j { one } else { zero };
                        let h = delta - Rational::from_integer(2) * v[i] * v[j] / vv;
                        if j == 0 {
                            -h
                        } else {
                            h
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let scale = rotation
        .iter()
        .flatten()
        .fold(1i64, |acc, x: &Rational| acc.lcm(x.denom()));
    if scale > m_cap {
        return Err(GeometryError::ScaleCap {
            m: scale,
            cap: m_cap,
        });
    }
    Ok(Frame {
        nu: nu.clone(),
        rotation,
        scale,
    })
}

fn identity(n: usize) -> Vec<Vec<Rational>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Rational::from_integer((i == j) as i64))
                .collect()
        })
        .collect()
}

impl Frame {
    pub fn identity(n: usize) -> Frame {
        Frame {
            nu: RationalDirection::axis(n, n - 1),
            rotation: identity(n),
            scale: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.len()
    }

    pub fn nu(&self) -> &RationalDirection {
        &self.nu
    }

    pub fn rotation(&self) -> &[Vec<Rational>] {
        &self.rotation
    }

    /// `M_ν`.
    pub fn scale(&self) -> i64 {
        self.scale
    }

    /// `R v`.
    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        self.rotation
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Rᵀ v`.
    pub fn apply_transpose(&self, v: &[Rational]) -> Vec<Rational> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| self.rotation[i][j] * v[i]).sum())
            .collect()
    }

    /// `M R` as an integer matrix.
    pub fn integer_matrix(&self) -> Vec<Vec<i64>> {
        self.rotation
            .iter()
            .map(|row| row.iter().map(|x| (x * self.scale).to_integer()).collect())
            .collect()
    }

    /// `z'_ν = M R (z', 0)`: an integer vector orthogonal to `ν`.
    pub fn lattice_shift(&self, z_tangent: &[i64]) -> Vec<i64> {
        let mr = self.integer_matrix();
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n - 1)
                    .map(|j| mr[i][j] * z_tangent.get(j).copied().unwrap_or(0))
                    .sum()
            })
            .collect()
    }

    pub fn rotation_f64(&self) -> Vec<Vec<f64>> {
        self.rotation
            .iter()
            .map(|row| row.iter().map(to_f64).collect())
            .collect()
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Half-open interval `[a, b)`, the one-dimensional case of `I_{n−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval1 {
    pub a: Rational,
    pub b: Rational,
}

impl Interval1 {
    pub fn new(a: Rational, b: Rational) -> Result<Self, GeometryError> {
        if b <= a {
            return Err(GeometryError::EmptyInterval { a, b });
        }
        Ok(Interval1 { a, b })
    }

    pub fn integers(a: i64, b: i64) -> Result<Self, GeometryError> {
        Interval1::new(Rational::from_integer(a), Rational::from_integer(b))
    }

    pub fn length(&self) -> Rational {
        self.b - self.a
    }

    pub fn translated(&self, z: i64) -> Interval1 {
        let z = Rational::from_integer(z);
        Interval1 {
            a: self.a + z,
            b: self.b + z,
        }
    }
}

impl fmt::Display for Interval1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.a, self.b)
    }
}

/// A half-open parallelepiped `{ origin + M R diag(lengths) s : s ∈ [0,1)^n }`.
///
/// Both oriented cubes (with `M = 1`) and lifted intervals are represented
/// this way. Membership of doubled-integer points is decided exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    frame: Frame,
    scale: i64,
    origin: Vec<Rational>,
    lengths: Vec<Rational>,
    test: ExactTest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ExactTest {
    /// Per local axis: `0 <= coeffs · P - offset < upper`.
    coeffs: Vec<Vec<i128>>,
    offset: Vec<i128>,
    upper: Vec<i128>,
}

impl Region {
    pub fn new(
        frame: Frame,
        scale: i64,
        origin: Vec<Rational>,
        lengths: Vec<Rational>,
    ) -> Result<Region, GeometryError> {
        let n = frame.dim();
        for got in [origin.len(), lengths.len()] {
            if got != n {
                return Err(GeometryError::Dimension { expected: n, got });
            }
        }
        if lengths.iter().any(|l| *l <= Rational::from_integer(0)) || scale <= 0 {
            return Err(GeometryError::NonPositiveSide);
        }
        let q = frame.scale() as i128;
        let rn = frame.integer_matrix();
        let od = origin.iter().fold(1i64, |acc, x| acc.lcm(x.denom())) as i128;
        let on: Vec<i128> = origin
            .iter()
            .map(|x| *x.numer() as i128 * (od / *x.denom() as i128))
            .collect();
        let mut coeffs = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for (i, len) in lengths.iter().enumerate() {
            let ld = *len.denom() as i128;
            let ln = *len.numer() as i128;
            coeffs.push((0..n).map(|j| rn[j][i] as i128 * od * ld).collect());
            offset.push(2 * ld * (0..n).map(|j| rn[j][i] as i128 * on[j]).sum::<i128>());
            upper.push(2 * q * od * scale as i128 * ln);
        }
        Ok(Region {
            frame,
            scale,
            origin,
            lengths,
            test: ExactTest {
                coeffs,
                offset,
                upper,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn origin(&self) -> &[Rational] {
        &self.origin
    }

    /// Edge vectors `M ℓ_i R e_i`, exact.
    pub fn edge_vectors(&self) -> Vec<Vec<Rational>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let factor = self.lengths[i] * self.scale;
                (0..n)
                    .map(|r| self.frame.rotation()[r][i] * factor)
                    .collect()
            })
            .collect()
    }

    pub fn center(&self) -> Vec<Rational> {
        let half = Rational::new(1, 2);
        let edges = self.edge_vectors();
        let mut c = self.origin.clone();
        for e in &edges {
            for (ci, ei) in c.iter_mut().zip(e) {
                *ci += *ei * half;
            }
        }
        c
    }

    /// All `2^n` vertices, exact.
    pub fn vertices(&self) -> Vec<Vec<Rational>> {
        let n = self.dim();
        let edges = self.edge_vectors();
        (0..1usize << n)
            .map(|mask| {
                let mut v = self.origin.clone();
                for (i, e) in edges.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        for (vi, ei) in v.iter_mut().zip(e) {
                            *vi += *ei;
                        }
                    }
                }
                v
            })
            .collect()
    }

    /// Lebesgue measure `M^n Π ℓ_i` (`|det R| = 1`).
    pub fn volume(&self) -> Rational {
        self.lengths
            .iter()
            .fold(Rational::from_integer(1), |acc, l| acc * l * self.scale)
    }

    /// Whether `P / 2` lies in the region.
    pub fn contains_doubled(&self, p: &[i64]) -> bool {
        let t = &self.test;
        t.coeffs.iter().enumerate().all(|(i, c)| {
            let x: i128 = c.iter().zip(p).map(|(a, b)| a * *b as i128).sum::<i128>() - t.offset[i];
            x >= 0 && x < t.upper[i]
        })
    }

    /// Floating-point membership, for points that are not half-integers.
    pub fn contains(&self, y: &[f64]) -> bool {
        let r = self.frame.rotation_f64();
        let n = self.dim();
        (0..n).all(|i| {
            let local: f64 = (0..n)
                .map(|j| r[j][i] * (y[j] - to_f64(&self.origin[j])))
                .sum::<f64>()
                / (self.scale as f64 * to_f64(&self.lengths[i]));
            (0.0..1.0).contains(&local)
        })
    }

    /// Integer box `[lo, hi]` (inclusive) containing every cell that meets the region.
    pub fn cell_bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let n = self.dim();
        let mut lo = vec![i64::MAX; n];
        let mut hi = vec![i64::MIN; n];
        for v in self.vertices() {
            for i in 0..n {
                let x = to_f64(&v[i]);
                lo[i] = lo[i].min(x.floor() as i64 - 1);
                hi[i] = hi[i].max(x.ceil() as i64 + 1);
            }
        }
        (lo, hi)
    }
}

/// `Q^ν_ρ(x) = R_ν [−ρ/2, ρ/2)^n + x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedCube {
    pub center: Vec<Rational>,
    pub side: Rational,
    pub frame: Frame,
}

impl OrientedCube {
    pub fn new(center: Vec<Rational>, side: Rational, frame: Frame) -> Result<Self, GeometryError> {
        if center.len() != frame.dim() {
            return Err(GeometryError::Dimension {
                expected: frame.dim(),
                got: center.len(),
            });
        }
        if side <= Rational::from_integer(0) {
            return Err(GeometryError::NonPositiveSide);
        }
        Ok(OrientedCube {
            center,
            side,
            frame,
        })
    }

    /// Cube oriented by the upper-hemisphere representative of `{ν, −ν}`, so
    /// that the cubes for `ν` and `−ν` are the same set.
    pub fn for_direction(
        center: Vec<Rational>,
        side: Rational,
        nu: &RationalDirection,
        m_cap: i64,
    ) -> Result<Self, GeometryError> {
        let frame = make_frame(&nu.upper_representative(), m_cap)?;
        OrientedCube::new(center, side, frame)
    }

    pub fn region(&self) -> Region {
        let n = self.frame.dim();
        let half = self.side / 2;
        let corner = self.frame.apply(&vec![-half; n]);
        let origin = self
            .center
            .iter()
            .zip(&corner)
            .map(|(c, o)| c + o)
            .collect();
        Region::new(self.frame.clone(), 1, origin, vec![self.side; n])
            .expect("validated cube parameters")
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        let r = self.frame.rotation_f64();
        let n = self.frame.dim();
        let half = to_f64(&self.side) / 2.0;
        (0..n).all(|i| {
            let local: f64 = (0..n)
                .map(|j| r[j][i] * (y[j] - to_f64(&self.center[j])))
                .sum();
            (-half..half).contains(&local)
        })
    }
}

/// `T_ν(A') = M_ν R_ν (A' × [−c, c))` with `c = (b − a)/2` (planar case).
pub fn lift_interval(interval: &Interval1, frame: &Frame) -> Region {
    let m = frame.scale();
    let len = interval.length();
    let c = len / 2;
    let base = frame.apply(&[interval.a, -c]);
    let origin = base.iter().map(|x| x * m).collect();
    Region::new(frame.clone(), m, origin, vec![len, c * 2])
        .expect("interval lifting of a planar frame")
}

/// Normal of a jump datum: exact when rational, otherwise floating point.
#[derive(Clone, Debug, PartialEq)]
pub enum Normal {
    Exact(RationalDirection),
    Float(Vec<f64>),
}

impl Normal {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Normal::Exact(d) => d.to_f64(),
            Normal::Float(v) => v.clone(),
        }
    }

    pub fn negated(&self) -> Normal {
        match self {
            Normal::Exact(d) => Normal::Exact(d.negated()),
            Normal::Float(v) => Normal::Float(v.iter().map(|a| -a).collect()),
        }
    }
}

/// The two-valued datum `u_{x,ζ,ν}`: `ζ` where `(y − x)·ν ≥ 0`, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpDatum {
    pub x: Vec<Rational>,
    pub zeta: Vec<f64>,
    pub nu: Normal,
}

impl JumpDatum {
    pub fn new(x: Vec<Rational>, zeta: Vec<f64>, nu: Normal) -> Self {
        JumpDatum { x, zeta, nu }
    }

    /// Whether `y` lies on the `ζ` side.
    pub fn upper_side(&self, y: &[f64]) -> bool {
        let nu = self.nu.to_f64();
        let s: f64 = y
            .iter()
            .zip(&self.x)
            .zip(&nu)
            .map(|((yi, xi), ni)| (yi - to_f64(xi)) * ni)
            .sum();
        s >= 0.0
    }

    /// Same as [`upper_side`](Self::upper_side) for `y = P / 2`, exact when the normal is rational.
    pub fn upper_side_doubled(&self, p: &[i64]) -> bool {
        match &self.nu {
            Normal::Exact(d) => {
                let s: Rational = p
                    .iter()
                    .zip(&self.x)
                    .zip(d.numerators())
                    .map(|((pi, xi), ni)| (Rational::new(*pi, 2) - xi) * *ni)
                    .sum();
                s >= Rational::from_integer(0)
            }
            Normal::Float(_) => {
                let y: Vec<f64> = p.iter().map(|&a| a as f64 / 2.0).collect();
                self.upper_side(&y)
            }
        }
    }
}

/// Value of `u_{x,ζ,ν}` at `y`.
pub fn jump_value(datum: &JumpDatum, y: &[f64]) -> Vec<f64> {
    if datum.upper_side(y) {
        datum.zeta.clone()
    } else {
        vec![0.0; datum.zeta.len()]
    }
}
