//! Discrete volume cell problem with affine boundary datum.
//!
//! The cube `Q_t(c)` (axis-aligned) is covered by `N = t/h` cells per side and
//! `N + 1` nodes per side. The outermost node layer is pinned to `ℓ_ξ(y) = ξ y`.
//! Each cell contributes `a(⌊x_cell⌋) |∇_h u|^p h^n`, with `x_cell` the lower
//! corner and `∇_h` the forward difference from that corner.

use ndarray::{Array2, ArrayView2};
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{to_f64, Frame, GeometryError, OrientedCube, Rational};
use crate::integrand::VolumeIntegrand;
use crate::medium::MediumError;

/// Largest accepted node count.
pub const MAX_NODES: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("side {t} is not an integer multiple of the spacing {h}")]
    NonCommensurate { t: Rational, h: Rational },
    #[error("side {t} must be at least two grid spacings ({h})")]
    TooCoarse { t: Rational, h: Rational },
    #[error("unsupported shape: n = {n}, m = {m} (need n in 2..=3, m in 1..=2)")]
    Shape { n: usize, m: usize },
    #[error("grid with {0} nodes exceeds the size limit")]
    TooLarge(usize),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

#[derive(Clone, Debug)]
pub struct DiscreteVolumeProblem {
    pub integrand: VolumeIntegrand,
    /// `m × n` affine slope.
    pub xi: Array2<f64>,
    pub cube: OrientedCube,
    pub h: Rational,
    /// Cells per side.
    pub cells_per_side: usize,
    /// Node values, one row per node (row-major over the first axis fastest).
    pub values: Array2<f64>,
    pub pinned: Vec<bool>,
    strides: Vec<usize>,
    cell_base: Vec<usize>,
    cell_coeff: Vec<f64>,
    hf: f64,
    hn: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeCellResult {
    pub value: f64,
    /// `value / t^n`.
    pub normalized: f64,
    pub iterations: usize,
    pub residual: f64,
    pub minimizer: Array2<f64>,
}

pub fn assemble_volume_problem(
    f: &VolumeIntegrand,
    xi: ArrayView2<f64>,
    center: &[Rational],
    t: Rational,
    h: Rational,
) -> Result<DiscreteVolumeProblem, VolumeError> {
    let (m, n) = xi.dim();
    if !(2..=3).contains(&n) || !(1..=2).contains(&m) || center.len() != n {
        return Err(VolumeError::Shape { n, m });
    }
    let ratio = t / h;
    if h <= Rational::from_integer(0) || !ratio.is_integer() {
        return Err(VolumeError::NonCommensurate { t, h });
    }
    let cells = *ratio.numer();
    if cells < 2 {
        return Err(VolumeError::TooCoarse { t, h });
    }
    let cells = cells as usize;
    let per_side = cells + 1;
    let node_count = per_side
        .checked_pow(n as u32)
        .filter(|&c| c <= MAX_NODES)
        .ok_or(VolumeError::TooLarge(usize::MAX))?;
    let cube = OrientedCube::new(center.to_vec(), t, Frame::identity(n))?;

    let strides: Vec<usize> = (0..n).map(|i| per_side.pow(i as u32)).collect();
    let origin: Vec<Rational> = center.iter().map(|c| c - t / 2).collect();
    let node_multi = |mut k: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let (q, r) = k.div_rem(&per_side);
                k = q;
                r
            })
            .collect()
    };

    let mut values = Array2::<f64>::zeros((node_count, m));
    let mut pinned = vec![false; node_count];
    for k in 0..node_count {
        let idx = node_multi(k);
        pinned[k] = idx.iter().any(|&i| i == 0 || i == cells);
        let y: Vec<f64> = idx
            .iter()
            .zip(&origin)
            .map(|(&i, o)| to_f64(&(o + h * i as i64)))
            .collect();
        for j in 0..m {
            values[[k, j]] = (0..n).map(|i| xi[[j, i]] * y[i]).sum();
        }
    }

    let cell_count = cells.pow(n as u32);
    let mut cell_base = Vec::with_capacity(cell_count);
    let mut cell_coeff = Vec::with_capacity(cell_count);
    for c in 0..cell_count {
        let mut rest = c;
        let mut base = 0;
        let mut z = Vec::with_capacity(n);
        for (i, o) in origin.iter().enumerate() {
            let (q, r) = rest.div_rem(&cells);
            rest = q;
            base += r * strides[i];
            z.push((o + h * r as i64).floor().to_integer());
        }
        cell_base.push(base);
        cell_coeff.push(f.field.coefficient_at(&z)?);
    }

    let hf = to_f64(&h);
    Ok(DiscreteVolumeProblem {
        integrand: f.clone(),
        xi: xi.to_owned(),
        cube,
        h,
        cells_per_side: cells,
        values,
        pinned,
        strides,
        cell_base,
        cell_coeff,
        hf,
        hn: hf.powi(n as i32),
    })
}

impl DiscreteVolumeProblem {
    pub fn dim(&self) -> usize {
        self.strides.len()
    }

    pub fn components(&self) -> usize {
        self.values.ncols()
    }

    pub fn node_count(&self) -> usize {
        self.pinned.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_base.len()
    }

    pub fn side(&self) -> f64 {
        to_f64(&self.cube.side)
    }

    /// Forward-difference gradient of cell `c` into `g` (row-major `m × n`).
    #[inline]
    fn cell_gradient(&self, u: &[f64], c: usize, g: &mut [f64; 6]) -> f64 {
        let (m, n) = (self.components(), self.dim());
        let base = self.cell_base[c];
        let mut norm2 = 0.0;
        for j in 0..m {
            let u0 = u[base * m + j];
            for i in 0..n {
                let d = (u[(base + self.strides[i]) * m + j] - u0) / self.hf;
                g[j * n + i] = d;
                norm2 += d * d;
            }
        }
        norm2
    }

    fn cell_energy(&self, u: &[f64], c: usize) -> f64 {
        let mut g = [0.0; 6];
        let norm2 = self.cell_gradient(u, c, &mut g);
        self.cell_coeff[c] * self.hn * self.integrand.shape(norm2)
    }

    /// Discrete energy of the node values `u` (flattened node-major).
    pub fn energy_of(&self, u: &[f64]) -> f64 {
        pairwise_sum_by(self.cell_count(), &|c| self.cell_energy(u, c))
    }

    /// Energy of the current node values.
    pub fn energy(&self) -> f64 {
        self.energy_of(self.values.as_slice().expect("standard layout"))
    }

    /// `Σ |∇_h u|^p h^n`, the energy with unit coefficient.
    pub fn unit_energy_of(&self, u: &[f64]) -> f64 {
        pairwise_sum_by(self.cell_count(), &|c| {
            let mut g = [0.0; 6];
            self.hn * self.integrand.shape(self.cell_gradient(u, c, &mut g))
        })
    }

    /// Full energy gradient with respect to every node value (pinned included).
    pub fn gradient_of(&self, u: &[f64], out: &mut [f64]) {
        let (m, n) = (self.components(), self.dim());
        out.iter_mut().for_each(|v| *v = 0.0);
        let p = self.integrand.p;
        let mut g = [0.0; 6];
        for c in 0..self.cell_count() {
            let norm2 = self.cell_gradient(u, c, &mut g);
            if norm2 == 0.0 {
                continue;
            }
            let dshape = if p == 2.0 {
                2.0
            } else {
                p * norm2.powf(p / 2.0 - 1.0)
            };
            let factor = self.cell_coeff[c] * self.hn * dshape / self.hf;
            let base = self.cell_base[c];
            for j in 0..m {
                for i in 0..n {
                    let v = factor * g[j * n + i];
                    out[(base + self.strides[i]) * m + j] += v;
                    out[base * m + j] -= v;
                }
            }
        }
    }

    fn zero_pinned(&self, v: &mut [f64]) {
        let m = self.components();
        for (k, &p) in self.pinned.iter().enumerate() {
            if p {
                v[k * m..(k + 1) * m].iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    /// Cells touching node `k`.
    fn cells_at_node(&self, k: usize) -> Vec<usize> {
        let n = self.dim();
        let per_side = self.cells_per_side + 1;
        let cells = self.cells_per_side;
        let idx: Vec<usize> = (0..n).map(|i| (k / self.strides[i]) % per_side).collect();
        let mut out = Vec::new();
        for corner in 0..(1usize << n) {
            let mut c = 0;
            let mut stride = 1;
            let mut ok = true;
            for (i, &v) in idx.iter().enumerate() {
                let shift = (corner >> i) & 1;
                if v < shift || v - shift >= cells {
                    ok = false;
                    break;
                }
                c += (v - shift) * stride;
                stride *= cells;
            }
            if ok {
                out.push(c);
            }
        }
        out
    }

    /// Energy of the cells touching node `k`.
    fn local_energy(&self, u: &[f64], k: usize) -> f64 {
        self.cells_at_node(k)
            .into_iter()
            .map(|c| self.cell_energy(u, c))
            .sum()
    }

    fn gradient_scale(&self) -> f64 {
        let xi_norm = self.xi.iter().map(|a| a * a).sum::<f64>().sqrt();
        self.integrand.c2
            * self.hn
            * (1.0 + xi_norm).powf(self.integrand.p - 1.0)
            * (self.node_count() as f64).sqrt()
            / self.hf
    }
}

/// Minimise the discrete energy over the free nodes.
///
/// `p = 2` uses conjugate gradients on the normal equations until the
/// residual falls below `tol` relative to the initial one; other exponents use
/// gradient descent with backtracking until the relative energy decrease per
/// step falls below `tol`.
pub fn solve_volume_cell(
    problem: &DiscreteVolumeProblem,
    tol: f64,
    max_iter: usize,
) -> Result<VolumeCellResult, VolumeError> {
    let mut u = problem.values.as_slice().expect("standard layout").to_vec();
    let (iterations, residual) = if problem.integrand.p == 2.0 {
        conjugate_gradient(problem, &mut u, tol, max_iter)?
    } else {
        gradient_descent(problem, &mut u, tol, max_iter)?
    };
    let value = problem.energy_of(&u);
    let t = problem.side();
    let minimizer = Array2::from_shape_vec((problem.node_count(), problem.components()), u)
        .expect("shape preserved");
    Ok(VolumeCellResult {
        value,
        normalized: value / t.powi(problem.dim() as i32),
        iterations,
        residual,
        minimizer,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(a.len(), &|i| a[i] * b[i])
}

fn conjugate_gradient(
    pb: &DiscreteVolumeProblem,
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64), VolumeError> {
    let len = u.len();
    let mut r = vec![0.0; len];
    pb.gradient_of(u, &mut r);
    r.iter_mut().for_each(|v| *v = -*v);
    pb.zero_pinned(&mut r);
    let b_norm = dot(&r, &r).sqrt();
    let floor = 1e-14 * pb.gradient_scale();
    if b_norm <= floor {
        return Ok((0, 0.0));
    }
    let mut d = r.clone();
    let mut q = vec![0.0; len];
    let mut rr = b_norm * b_norm;
    for it in 1..=max_iter {
        // The Hessian is constant; its action is the gradient of the
        // homogeneous problem (pinned values zero).
        pb.gradient_of(&d, &mut q);
        pb.zero_pinned(&mut q);
        let dq = dot(&d, &q);
        if dq <= 0.0 {
            return Err(VolumeError::NotConverged {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / dq;
        for i in 0..len {
            u[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        if rel <= tol || rr_new.sqrt() <= floor {
            return Ok((it, rel));
        }
        let beta = rr_new / rr;
        for i in 0..len {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
    }
    Err(VolumeError::NotConverged {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

fn gradient_descent(
    pb: &DiscreteVolumeProblem,
    u: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64), VolumeError> {
    let len = u.len();
    let mut g = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut energy = pb.energy_of(u);
    let mut step = pb.hf * pb.hf / (pb.integrand.c2 * pb.hn);
    for it in 1..=max_iter {
        pb.gradient_of(u, &mut g);
        pb.zero_pinned(&mut g);
        let gg = dot(&g, &g);
        if gg.sqrt() <= 1e-14 * pb.gradient_scale() {
            return Ok((it - 1, 0.0));
        }
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..len {
                trial[i] = u[i] - step * g[i];
            }
            let e = pb.energy_of(&trial);
            if e <= energy - 1e-4 * step * gg {
                accepted = Some(e);
                break;
            }
            step *= 0.5;
        }
        let Some(e) = accepted else {
            return Ok((it, 0.0));
        };
        u.copy_from_slice(&trial);
        let decrease = (energy - e) / energy.max(f64::MIN_POSITIVE);
        energy = e;
        step *= 2.0;
        if decrease < tol {
            return Ok((it, decrease));
        }
    }
    Err(VolumeError::NotConverged {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Worst relative error between the analytic gradient and central finite
/// differences (step `1e-5`) at `probe_count` random free node components.
/// The relative error uses `max(|analytic|, |numeric|, 1)` as denominator.
pub fn gradient_check(
    problem: &DiscreteVolumeProblem,
    u: ArrayView2<f64>,
    probe_count: usize,
) -> f64 {
    const STEP: f64 = 1e-5;
    let mut w = u.as_standard_layout().iter().copied().collect::<Vec<f64>>();
    let mut grad = vec![0.0; w.len()];
    problem.gradient_of(&w, &mut grad);
    let m = problem.components();
    let free: Vec<usize> = (0..problem.node_count())
        .filter(|&k| !problem.pinned[k])
        .collect();
    if free.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut worst: f64 = 0.0;
    for _ in 0..probe_count {
        let k = free[rng.gen_range(0..free.len())];
        let j = rng.gen_range(0..m);
        let slot = k * m + j;
        let orig = w[slot];
        w[slot] = orig + STEP;
        let plus = problem.local_energy(&w, k);
        w[slot] = orig - STEP;
        let minus = problem.local_energy(&w, k);
        w[slot] = orig;
        let numeric = (plus - minus) / (2.0 * STEP);
        let analytic = grad[slot];
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Pairwise summation of `f(0..len)` in a fixed order.
pub(crate) fn pairwise_sum_by(len: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        if hi - lo <= 16 {
            (lo..hi).map(f).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, len, f)
}
