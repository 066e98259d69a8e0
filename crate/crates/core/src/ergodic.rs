//! Subadditive process on lifted intervals and the finite-`t` estimation
//! harness for the homogenised densities.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    lift_interval, make_frame, Frame, GeometryError, Interval1, JumpDatum, Normal, OrientedCube,
    Rational, RationalDirection, DEFAULT_M_CAP,
};
use crate::integrand::{IntegrandError, SurfaceFamily, SurfaceIntegrand, VolumeIntegrand};
use crate::medium::{sample_medium, CoefficientField, GeneratorKind, MediumError};
use crate::surface_cell::{
    build_cut_graph, calibrate_metrication, solve_min_cut, surface_cell_value, CutOptions,
    SurfaceError,
};
use crate::volume_cell::{assemble_volume_problem, solve_volume_cell, VolumeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErgodicError {
    #[error("cut {cut} is not a multiple of 1/{m}")]
    MisalignedCut { cut: Rational, m: i64 },
    #[error("cut {cut} is not strictly inside {interval}")]
    CutOutside { cut: Rational, interval: Interval1 },
    #[error("interval {interval} is shorter than 2/{m}")]
    Degenerate { interval: Interval1, m: i64 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("budget of {budget} cells exhausted before the first schedule entry")]
    BudgetExceeded { budget: u64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integrand(#[from] IntegrandError),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

/// Default work budget, in lattice cells summed over all tasks of a series.
pub const DEFAULT_BUDGET: u64 = 1 << 32;

/// Everything needed to evaluate `μ_{ζ,ν}` and the surface cell problems for
/// a given seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditiveProcessSpec {
    pub zeta: Vec<f64>,
    pub frame: Frame,
    pub family: SurfaceFamily,
    pub medium: GeneratorKind,
    pub base_seed: u64,
    pub options: CutOptions,
    pub budget_cells: u64,
}

impl SubadditiveProcessSpec {
    pub fn new(
        zeta: Vec<f64>,
        nu: &RationalDirection,
        family: SurfaceFamily,
        medium: GeneratorKind,
        base_seed: u64,
        options: CutOptions,
    ) -> Result<Self, ErgodicError> {
        medium.validate()?;
        Ok(SubadditiveProcessSpec {
            zeta,
            frame: make_frame(nu, DEFAULT_M_CAP)?,
            family,
            medium,
            base_seed,
            options,
            budget_cells: DEFAULT_BUDGET,
        })
    }

    pub fn nu(&self) -> &RationalDirection {
        self.frame.nu()
    }

    pub fn field(&self, seed: u64) -> Result<CoefficientField, ErgodicError> {
        Ok(sample_medium(self.medium.clone(), seed)?)
    }

    pub fn integrand(&self, field: CoefficientField) -> Result<SurfaceIntegrand, ErgodicError> {
        Ok(SurfaceIntegrand::new(field, self.family)?)
    }

    /// The same process for `(−ζ, −ν)`.
    pub fn reflected(&self) -> Result<Self, ErgodicError> {
        let mut out = self.clone();
        out.zeta = self.zeta.iter().map(|a| -a).collect();
        out.frame = make_frame(&self.nu().negated(), DEFAULT_M_CAP)?;
        Ok(out)
    }

    fn datum_at(&self, x: Vec<Rational>) -> JumpDatum {
        JumpDatum::new(x, self.zeta.clone(), Normal::Exact(self.nu().clone()))
    }

    fn zeta_norm(&self) -> f64 {
        self.zeta.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// `μ` in integer weight units (before the `1/M` normalisation), for `g`
/// built on an explicit field.
fn mu_units_on(
    spec: &SubadditiveProcessSpec,
    field: CoefficientField,
    interval: &Interval1,
) -> Result<i64, ErgodicError> {
    let m = spec.frame.scale();
    if interval.length() * m < Rational::from_integer(2) {
        return Err(ErgodicError::Degenerate {
            interval: interval.clone(),
            m,
        });
    }
    let g = spec.integrand(field)?;
    let region = lift_interval(interval, &spec.frame);
    let datum = spec.datum_at(vec![Rational::from_integer(0); spec.frame.dim()]);
    let graph = build_cut_graph(&g, &datum, &region, &spec.options, true)?;
    Ok(solve_min_cut(&graph).units)
}

fn units_to_mu(spec: &SubadditiveProcessSpec, units: i64) -> f64 {
    units as f64 / spec.options.unit() / spec.frame.scale() as f64
}

/// `μ_{ζ,ν}(ω_seed, A') = m(u_{0,ζ,ν}, T_ν(A')) / M`.
pub fn mu_eval(
    spec: &SubadditiveProcessSpec,
    seed: u64,
    interval: &Interval1,
) -> Result<f64, ErgodicError> {
    let units = mu_units_on(spec, spec.field(seed)?, interval)?;
    Ok(units_to_mu(spec, units))
}

/// Upper bound `c5 (1 + |ζ|) κ(ν) |A'|` for `μ`.
pub fn mu_upper_bound(
    spec: &SubadditiveProcessSpec,
    interval: &Interval1,
) -> Result<f64, ErgodicError> {
    let (_, c5) = spec.medium.value_range();
    let kappa = calibrate_metrication(
        spec.options.neighborhood,
        spec.nu(),
        16,
        spec.options.precision_bits,
    )?;
    Ok(c5 * (1.0 + spec.zeta_norm()) * kappa * crate::geometry::to_f64(&interval.length()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub seed: u64,
    pub interval: Interval1,
    pub cuts: Vec<Rational>,
    pub whole_units: i64,
    pub parts_units: i64,
    /// `Σ μ(A'_i) − μ(A')`.
    pub slack: f64,
    pub pass: bool,
}

impl std::fmt::Display for SubadditivityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cuts: Vec<String> = self.cuts.iter().map(|c| c.to_string()).collect();
        write!(
            f,
            "subadditivity seed={} interval={} cuts=[{}] slack={:e}",
            self.seed,
            self.interval,
            cuts.join(","),
            self.slack
        )
    }
}

/// Compare `Σ μ(A'_i)` against `μ(A')` for the partition of `interval` at
/// `cuts`. Cuts must be multiples of `1/M`.
pub fn check_subadditivity(
    spec: &SubadditiveProcessSpec,
    seed: u64,
    interval: &Interval1,
    cuts: &[Rational],
) -> Result<SubadditivityReport, ErgodicError> {
    let m = spec.frame.scale();
    let mut points = vec![interval.a];
    for &c in cuts {
        if !(c * m).is_integer() {
            return Err(ErgodicError::MisalignedCut { cut: c, m });
        }
        if c <= *points.last().unwrap() || c >= interval.b {
            return Err(ErgodicError::CutOutside {
                cut: c,
                interval: interval.clone(),
            });
        }
        points.push(c);
    }
    points.push(interval.b);
    let field = spec.field(seed)?;
    let whole = mu_units_on(spec, field.clone(), interval)?;
    let mut parts = 0i64;
    for w in points.windows(2) {
        parts += mu_units_on(spec, field.clone(), &Interval1::new(w[0], w[1])?)?;
    }
    let slack = units_to_mu(spec, parts - whole);
    Ok(SubadditivityReport {
        seed,
        interval: interval.clone(),
        cuts: cuts.to_vec(),
        whole_units: whole,
        parts_units: parts,
        slack,
        pass: slack >= -1e-9,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub seed: u64,
    pub interval: Interval1,
    pub shift: i64,
    /// `μ(ω, A' + z')` in integer units.
    pub translated_units: i64,
    /// `μ(τ_{z'_ν} ω, A')` in integer units.
    pub shifted_units: i64,
    pub pass: bool,
}

impl std::fmt::Display for CovarianceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "covariance seed={} interval={} z={} translated={} shifted={}",
            self.seed, self.interval, self.shift, self.translated_units, self.shifted_units
        )
    }
}

/// `μ(ω, A' + z')` against `μ(τ_{M R (z', 0)} ω, A')`, compared bit for bit.
pub fn check_covariance(
    spec: &SubadditiveProcessSpec,
    seed: u64,
    interval: &Interval1,
    z: i64,
) -> Result<CovarianceReport, ErgodicError> {
    let field = spec.field(seed)?;
    let translated = mu_units_on(spec, field.clone(), &interval.translated(z))?;
    let shift = spec.frame.lattice_shift(&[z]);
    let shifted = mu_units_on(spec, field.shift(&shift), interval)?;
    Ok(CovarianceReport {
        seed,
        interval: interval.clone(),
        shift: z,
        translated_units: translated,
        shifted_units: shifted,
        pass: translated == shifted,
    })
}

/// A random interval `[a, b)` with endpoints and cuts on the `1/M` grid and
/// pieces at least `min_piece/M` long.
pub fn aligned_partition(
    rng: &mut impl Rng,
    m: i64,
    pieces: usize,
    min_piece: i64,
    max_piece: i64,
) -> (Interval1, Vec<Rational>) {
    let start = rng.gen_range(-3 * m..=3 * m);
    let mut points = vec![start];
    for _ in 0..pieces {
        let last = *points.last().unwrap();
        points.push(last + rng.gen_range(min_piece..=max_piece));
    }
    let q = |k: i64| Rational::new(k, m);
    let interval = Interval1::new(q(points[0]), q(*points.last().unwrap())).expect("increasing");
    let cuts = points[1..points.len() - 1].iter().map(|&k| q(k)).collect();
    (interval, cuts)
}

/// Summary statistics over seeds at one `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStats {
    pub t: u32,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub label: String,
    pub schedule: Vec<u32>,
    pub seeds: Vec<u64>,
    /// `values[k][i]`: raw cell value at `schedule[k]`, seed `seeds[i]`.
    pub values: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub stats: Vec<TStats>,
    /// Mean at the largest `t`.
    pub point_estimate: f64,
    /// Two standard errors at the largest `t`.
    pub error_bar: f64,
    pub point_median: f64,
    /// `mean(t_{k+1}) − mean(t_k)`.
    pub successive_differences: Vec<f64>,
    /// `std(t_last) / std(t_first)`; `None` when the first std vanishes.
    pub concentration_ratio: Option<f64>,
    /// Schedule entries dropped to stay within the budget.
    pub truncated: Vec<u32>,
}

impl EstimateSeries {
    fn from_values(
        label: String,
        schedule: Vec<u32>,
        seeds: Vec<u64>,
        values: Vec<Vec<f64>>,
        normalized: Vec<Vec<f64>>,
        truncated: Vec<u32>,
    ) -> Self {
        let stats: Vec<TStats> = schedule
            .iter()
            .zip(&normalized)
            .map(|(&t, xs)| t_stats(t, xs))
            .collect();
        let last = stats.last().expect("non-empty schedule");
        let successive_differences = stats.windows(2).map(|w| w[1].mean - w[0].mean).collect();
        let first_std = stats[0].std;
        let concentration_ratio = (first_std > 0.0).then(|| last.std / first_std);
        EstimateSeries {
            label,
            point_estimate: last.mean,
            error_bar: 2.0 * last.se,
            point_median: last.median,
            schedule,
            seeds,
            values,
            normalized,
            successive_differences,
            concentration_ratio,
            truncated,
            stats,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mean).collect()
    }

    pub fn stats_at(&self, t: u32) -> Option<&TStats> {
        self.stats.iter().find(|s| s.t == t)
    }

    pub fn normalized_at(&self, t: u32) -> Option<&[f64]> {
        self.schedule
            .iter()
            .position(|&s| s == t)
            .map(|k| self.normalized[k].as_slice())
    }
}

/// Sum in a fixed binary-tree order, independent of how the inputs were computed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub fn t_stats(t: u32, xs: &[f64]) -> TStats {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let std = if xs.len() > 1 {
        (pairwise_sum(&dev) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    TStats {
        t,
        mean,
        median,
        std,
        se: std / n.sqrt(),
        min: sorted[0],
        max: sorted[k - 1],
    }
}

fn validate_schedule(schedule: &[u32]) -> Result<(), ErgodicError> {
    if schedule.is_empty() {
        return Err(ErgodicError::Schedule("empty".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ErgodicError::Schedule("not strictly increasing".into()));
    }
    Ok(())
}

/// Keep the longest schedule prefix whose total work fits the budget.
fn apply_budget(
    schedule: &[u32],
    n_seeds: usize,
    dim: i32,
    cells_per_unit: f64,
    budget: u64,
) -> Result<(Vec<u32>, Vec<u32>), ErgodicError> {
    let mut used = 0f64;
    let mut kept = Vec::new();
    for (k, &t) in schedule.iter().enumerate() {
        used += n_seeds as f64 * (t as f64 * cells_per_unit).powi(dim);
        if used > budget as f64 {
            if kept.is_empty() {
                return Err(ErgodicError::BudgetExceeded { budget });
            }
            return Ok((kept, schedule[k..].to_vec()));
        }
        kept.push(t);
    }
    Ok((kept, Vec::new()))
}

fn seeds_from(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Evaluate `task(seed, t)` over the grid, in parallel, keeping the order.
fn run_grid<F>(
    schedule: &[u32],
    seeds: &[u64],
    task: F,
) -> Result<Vec<Vec<(f64, f64)>>, ErgodicError>
where
    F: Fn(u64, u32) -> Result<(f64, f64), ErgodicError> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..schedule.len())
        .flat_map(|k| (0..seeds.len()).map(move |i| (k, i)))
        .collect();
    let results: Result<Vec<(f64, f64)>, ErgodicError> = jobs
        .par_iter()
        .map(|&(k, i)| task(seeds[i], schedule[k]))
        .collect();
    let results = results?;
    Ok(results.chunks(seeds.len()).map(|c| c.to_vec()).collect())
}

fn split(grid: Vec<Vec<(f64, f64)>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let values = grid
        .iter()
        .map(|r| r.iter().map(|p| p.0).collect())
        .collect();
    let normalized = grid
        .iter()
        .map(|r| r.iter().map(|p| p.1).collect())
        .collect();
    (values, normalized)
}

fn centered_cube(
    spec: &SubadditiveProcessSpec,
    center: Vec<Rational>,
    t: u32,
) -> Result<OrientedCube, ErgodicError> {
    Ok(OrientedCube::for_direction(
        center,
        Rational::from_integer(t as i64),
        spec.nu(),
        DEFAULT_M_CAP,
    )?)
}

fn surface_value(
    spec: &SubadditiveProcessSpec,
    field: CoefficientField,
    center: Vec<Rational>,
    t: u32,
) -> Result<(f64, f64), ErgodicError> {
    let g = spec.integrand(field)?;
    let cube = centered_cube(spec, center.clone(), t)?;
    let res = surface_cell_value(&g, &spec.datum_at(center), &cube, &spec.options)?;
    Ok((res.value, res.normalized))
}

/// Finite-`t` surface cell values on `Q^ν_t(0)` for seeds `base_seed + i`.
pub fn estimate_ghom(
    spec: &SubadditiveProcessSpec,
    schedule: &[u32],
    n_seeds: usize,
) -> Result<EstimateSeries, ErgodicError> {
    validate_schedule(schedule)?;
    let (kept, dropped) = apply_budget(schedule, n_seeds, 2, 1.0, spec.budget_cells)?;
    let seeds = seeds_from(spec.base_seed, n_seeds);
    let origin = vec![Rational::from_integer(0); spec.frame.dim()];
    let grid = run_grid(&kept, &seeds, |seed, t| {
        surface_value(spec, spec.field(seed)?, origin.clone(), t)
    })?;
    let (values, normalized) = split(grid);
    Ok(EstimateSeries::from_values(
        format!("ghom zeta={:?} nu={}", spec.zeta, spec.nu()),
        kept,
        seeds,
        values,
        normalized,
        dropped,
    ))
}

/// Weight of the datum labelling (the flat-interface competitor) on
/// `Q^ν_t(0)`, divided by `t`.
pub fn flat_cut_normalized(
    spec: &SubadditiveProcessSpec,
    seed: u64,
    t: u32,
) -> Result<f64, ErgodicError> {
    let g = spec.integrand(spec.field(seed)?)?;
    let origin = vec![Rational::from_integer(0); spec.frame.dim()];
    let cube = centered_cube(spec, origin.clone(), t)?;
    let graph = build_cut_graph(
        &g,
        &spec.datum_at(origin),
        &cube.region(),
        &spec.options,
        false,
    )?;
    Ok(graph.to_value(graph.datum_units()) / t as f64)
}

/// Bracket `[c4 U/t, F/t]` for the normalised cell value at `(seed, t)`:
/// `U` is the minimum cut of the same cube with unit weights and `F` the
/// weight of the datum labelling.
pub fn competitor_bracket(
    spec: &SubadditiveProcessSpec,
    seed: u64,
    t: u32,
) -> Result<(f64, f64), ErgodicError> {
    let c4 = spec.integrand(spec.field(seed)?)?.c4;
    let mut unit = spec.clone();
    unit.medium = GeneratorKind::constant(1.0);
    unit.family = SurfaceFamily::Perimeter;
    let origin = vec![Rational::from_integer(0); spec.frame.dim()];
    let (_, u) = surface_value(&unit, unit.field(0)?, origin, t)?;
    Ok((c4 * u, flat_cut_normalized(spec, seed, t)?))
}

/// Volume analogue of [`SubadditiveProcessSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeProcessSpec {
    pub medium: GeneratorKind,
    pub p: f64,
    pub xi: Array2<f64>,
    pub h: Rational,
    pub base_seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub budget_cells: u64,
}

impl VolumeProcessSpec {
    pub fn new(
        medium: GeneratorKind,
        p: f64,
        xi: Array2<f64>,
        h: Rational,
        base_seed: u64,
    ) -> Self {
        VolumeProcessSpec {
            medium,
            p,
            xi,
            h,
            base_seed,
            tol: 1e-10,
            max_iter: 50_000,
            budget_cells: DEFAULT_BUDGET,
        }
    }

    pub fn integrand(&self, seed: u64) -> Result<VolumeIntegrand, ErgodicError> {
        Ok(VolumeIntegrand::new(
            sample_medium(self.medium.clone(), seed)?,
            self.p,
        )?)
    }

    fn dim(&self) -> usize {
        self.xi.ncols()
    }

    fn solve(
        &self,
        f: &VolumeIntegrand,
        center: &[Rational],
        t: Rational,
    ) -> Result<f64, ErgodicError> {
        let pb = assemble_volume_problem(f, self.xi.view(), center, t, self.h)?;
        Ok(solve_volume_cell(&pb, self.tol, self.max_iter)?.value)
    }
}

/// Finite-`t` volume cell values on `Q_t(0)`.
pub fn estimate_fhom(
    spec: &VolumeProcessSpec,
    schedule: &[u32],
    n_seeds: usize,
) -> Result<EstimateSeries, ErgodicError> {
    validate_schedule(schedule)?;
    let per_unit = 1.0 / crate::geometry::to_f64(&spec.h);
    let n = spec.dim();
    let (kept, dropped) = apply_budget(schedule, n_seeds, n as i32, per_unit, spec.budget_cells)?;
    let seeds = seeds_from(spec.base_seed, n_seeds);
    let origin = vec![Rational::from_integer(0); n];
    let grid = run_grid(&kept, &seeds, |seed, t| {
        let f = spec.integrand(seed)?;
        let v = spec.solve(&f, &origin, Rational::from_integer(t as i64))?;
        Ok((v, v / (t as f64).powi(n as i32)))
    })?;
    let (values, normalized) = split(grid);
    Ok(EstimateSeries::from_values(
        format!("fhom xi={:?}", spec.xi.iter().collect::<Vec<_>>()),
        kept,
        seeds,
        values,
        normalized,
        dropped,
    ))
}

fn relative_gap(a: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        (a - reference).abs()
    } else {
        (a - reference).abs() / reference.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftInvarianceReport {
    pub t: u32,
    pub shift: Vec<i64>,
    pub seeds: Vec<u64>,
    pub gaps: Vec<f64>,
    pub mean_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Per-seed relative gap between the cell value on `ω` and on `τ_z ω` at `t`.
pub fn check_shift_invariance(
    spec: &SubadditiveProcessSpec,
    n_seeds: usize,
    z: &[i64],
    t: u32,
    tolerance: f64,
) -> Result<ShiftInvarianceReport, ErgodicError> {
    let seeds = seeds_from(spec.base_seed, n_seeds);
    let origin = vec![Rational::from_integer(0); spec.frame.dim()];
    let gaps: Result<Vec<f64>, ErgodicError> = seeds
        .par_iter()
        .map(|&seed| {
            let field = spec.field(seed)?;
            let (_, base) = surface_value(spec, field.clone(), origin.clone(), t)?;
            let (_, moved) = surface_value(spec, field.shift(z), origin.clone(), t)?;
            Ok(relative_gap(moved, base))
        })
        .collect();
    let gaps = gaps?;
    let mean_gap = pairwise_sum(&gaps) / gaps.len() as f64;
    Ok(ShiftInvarianceReport {
        t,
        shift: z.to_vec(),
        seeds,
        gaps,
        mean_gap,
        tolerance,
        pass: mean_gap <= tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterIndependenceReport {
    pub x: Vec<Rational>,
    pub schedule: Vec<u32>,
    /// Mean over seeds of the per-seed relative gap, per `t`.
    pub mean_gaps: Vec<f64>,
    pub tolerance: f64,
    pub shrinking: bool,
    pub pass: bool,
}

/// Cell values on `Q^ν_t(t x)` with datum `u_{tx,ζ,ν}` against those at the
/// origin (`r(t) = t`).
pub fn check_center_independence(
    spec: &SubadditiveProcessSpec,
    n_seeds: usize,
    x: &[Rational],
    schedule: &[u32],
    tolerance: f64,
) -> Result<CenterIndependenceReport, ErgodicError> {
    validate_schedule(schedule)?;
    let seeds = seeds_from(spec.base_seed, n_seeds);
    let origin = vec![Rational::from_integer(0); spec.frame.dim()];
    let grid = run_grid(schedule, &seeds, |seed, t| {
        let field = spec.field(seed)?;
        let center: Vec<Rational> = x.iter().map(|c| c * t as i64).collect();
        let (_, moved) = surface_value(spec, field.clone(), center, t)?;
        let (_, base) = surface_value(spec, field, origin.clone(), t)?;
        Ok((relative_gap(moved, base), 0.0))
    })?;
    let mean_gaps: Vec<f64> = grid
        .iter()
        .map(|row| pairwise_sum(&row.iter().map(|p| p.0).collect::<Vec<_>>()) / row.len() as f64)
        .collect();
    let shrinking = mean_gaps.windows(2).all(|w| w[1] <= w[0]);
    let pass = shrinking && *mean_gaps.last().unwrap() <= tolerance;
    Ok(CenterIndependenceReport {
        x: x.to_vec(),
        schedule: schedule.to_vec(),
        mean_gaps,
        tolerance,
        shrinking,
        pass,
    })
}

/// Running averages `(1/k) Σ_{i=1..k} ψ(τ_{i z} ω)` for `k = 1..=k_max`.
pub fn birkhoff_average<F>(
    field: &CoefficientField,
    observable: F,
    z: &[i64],
    k_max: usize,
) -> Vec<f64>
where
    F: Fn(&CoefficientField) -> f64,
{
    let mut sum = 0.0;
    let mut shift = vec![0i64; z.len()];
    (1..=k_max)
        .map(|k| {
            shift.iter_mut().zip(z).for_each(|(s, d)| *s += d);
            sum += observable(&field.shift(&shift));
            sum / k as f64
        })
        .collect()
}

/// Seed-averaged normalised surface values per `t`.
pub fn ergodic_expectation_surface(
    spec: &SubadditiveProcessSpec,
    schedule: &[u32],
    n_seeds: usize,
) -> Result<Vec<f64>, ErgodicError> {
    Ok(estimate_ghom(spec, schedule, n_seeds)?.means())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeExpectation {
    pub schedule: Vec<u32>,
    /// Seed mean of the tiling average at each `t`.
    pub means: Vec<f64>,
    /// `means[k+1] ≤ means[k] + 1e-9` along the schedule.
    pub monotone: bool,
}

/// For each `t`, tile `Q_T(0)` (`T` the largest entry) by cubes of side `t`,
/// average the normalised values over tiles, then over seeds. Entries must
/// divide `T` with a power-of-two quotient.
pub fn ergodic_expectation_volume(
    spec: &VolumeProcessSpec,
    schedule: &[u32],
    n_seeds: usize,
) -> Result<VolumeExpectation, ErgodicError> {
    validate_schedule(schedule)?;
    let big = *schedule.last().unwrap();
    if schedule
        .iter()
        .any(|&t| !big.is_multiple_of(t) || !(big / t).is_power_of_two())
    {
        return Err(ErgodicError::Schedule(
            "entries must be dyadic divisors of the largest".into(),
        ));
    }
    let n = spec.dim();
    let seeds = seeds_from(spec.base_seed, n_seeds);
    let grid = run_grid(schedule, &seeds, |seed, t| {
        let f = spec.integrand(seed)?;
        let per_side = (big / t) as usize;
        let tiles = per_side.pow(n as u32);
        let mut parts = Vec::with_capacity(tiles);
        for tile in 0..tiles {
            let mut rest = tile;
            let center: Vec<Rational> = (0..n)
                .map(|_| {
                    let k = (rest % per_side) as i64;
                    rest /= per_side;
                    Rational::new(-(big as i64), 2) + Rational::new(t as i64, 2) + t as i64 * k
                })
                .collect();
            parts.push(spec.solve(&f, &center, Rational::from_integer(t as i64))?);
        }
        let v = pairwise_sum(&parts) / (big as f64).powi(n as i32);
        Ok((v, v))
    })?;
    let means: Vec<f64> = grid
        .iter()
        .map(|row| pairwise_sum(&row.iter().map(|p| p.0).collect::<Vec<_>>()) / row.len() as f64)
        .collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Ok(VolumeExpectation {
        schedule: schedule.to_vec(),
        means,
        monotone,
    })
}

/// One row of a density table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub query: String,
    pub estimate: f64,
    pub error_bar: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomDensityTable {
    pub kind: String,
    pub entries: Vec<TableEntry>,
    pub series: Vec<EstimateSeries>,
}

impl HomDensityTable {
    pub fn all_within(&self) -> bool {
        self.entries.iter().all(|e| e.within)
    }
}

/// Surface density table; each entry is checked against `[c4, c5 (1+|ζ|) κ(ν)]`.
pub fn surface_table(
    specs: &[SubadditiveProcessSpec],
    schedule: &[u32],
    n_seeds: usize,
) -> Result<HomDensityTable, ErgodicError> {
    let mut entries = Vec::new();
    let mut series = Vec::new();
    for spec in specs {
        let s = estimate_ghom(spec, schedule, n_seeds)?;
        let (c4, c5) = spec.medium.value_range();
        let kappa = calibrate_metrication(
            spec.options.neighborhood,
            spec.nu(),
            16,
            spec.options.precision_bits,
        )?;
        let upper = c5 * (1.0 + spec.zeta_norm()) * kappa;
        entries.push(TableEntry {
            query: format!("zeta={:?} nu={}", spec.zeta, spec.nu()),
            estimate: s.point_estimate,
            error_bar: s.error_bar,
            lower: c4,
            upper,
            within: c4 <= s.point_estimate && s.point_estimate <= upper,
        });
        series.push(s);
    }
    Ok(HomDensityTable {
        kind: "ghom".into(),
        entries,
        series,
    })
}

/// Volume density table; each entry is checked against `[c1 |ξ|^p, c2 (1+|ξ|^p)]`.
pub fn volume_table(
    specs: &[VolumeProcessSpec],
    schedule: &[u32],
    n_seeds: usize,
) -> Result<HomDensityTable, ErgodicError> {
    let mut entries = Vec::new();
    let mut series = Vec::new();
    for spec in specs {
        let s = estimate_fhom(spec, schedule, n_seeds)?;
        let (c1, c2) = spec.medium.value_range();
        let np = spec
            .xi
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .powf(spec.p / 2.0);
        let (lower, upper) = (c1 * np, c2 * (1.0 + np));
        entries.push(TableEntry {
            query: format!("xi={:?}", spec.xi.iter().collect::<Vec<_>>()),
            estimate: s.point_estimate,
            error_bar: s.error_bar,
            lower,
            upper,
            within: lower <= s.point_estimate && s.point_estimate <= upper,
        });
        series.push(s);
    }
    Ok(HomDensityTable {
        kind: "fhom".into(),
        entries,
        series,
    })
}

/// Deterministic RNG for randomized structural checks.
pub fn check_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::SurfaceFamily;
    use crate::surface_cell::Neighborhood;
    use ndarray::arr2;

    fn q(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    fn spec(kind: GeneratorKind, nu: RationalDirection) -> SubadditiveProcessSpec {
        SubadditiveProcessSpec::new(
            vec![1.0],
            &nu,
            SurfaceFamily::Perimeter,
            kind,
            100,
            CutOptions::default(),
        )
        .unwrap()
    }

    fn e2() -> RationalDirection {
        RationalDirection::axis(2, 1)
    }

    fn tilted() -> RationalDirection {
        RationalDirection::new(vec![3, 4], 5).unwrap()
    }

    #[test]
    fn mu_constant_flat() {
        let s = spec(GeneratorKind::constant(2.0), e2());
        for t in [4, 7, 12] {
            let v = mu_eval(&s, 0, &Interval1::integers(0, t).unwrap()).unwrap();
            assert_eq!(v, 2.0 * t as f64);
        }
    }

    #[test]
    fn mu_degenerate_and_bounds() {
        let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), tilted());
        let short = Interval1::new(q(0, 1), q(1, 5)).unwrap();
        assert!(matches!(
            mu_eval(&s, 1, &short),
            Err(ErgodicError::Degenerate { .. })
        ));
        for k in [2, 5, 9] {
            let a = Interval1::new(q(0, 1), q(k, 5)).unwrap();
            let v = mu_eval(&s, 1, &a).unwrap();
            assert!(v >= 0.0);
            assert!(v <= mu_upper_bound(&s, &a).unwrap(), "{v}");
        }
    }

    #[test]
    fn subadditivity_examples() {
        let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), e2());
        for seed in 0..100 {
            let r = check_subadditivity(&s, seed, &Interval1::integers(0, 8).unwrap(), &[q(4, 1)])
                .unwrap();
            assert!(r.parts_units >= r.whole_units, "{r}");
        }
        let c = spec(GeneratorKind::constant(1.0), e2());
        let r = check_subadditivity(
            &c,
            0,
            &Interval1::integers(0, 12).unwrap(),
            &[q(4, 1), q(9, 1)],
        )
        .unwrap();
        assert_eq!(r.slack, 0.0);
    }

    #[test]
    fn subadditivity_tilted() {
        let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), tilted());
        let mut rng = check_rng(9);
        for seed in 0..50 {
            let (a, cuts) = aligned_partition(&mut rng, 5, 3, 2, 12);
            let r = check_subadditivity(&s, seed, &a, &cuts).unwrap();
            assert!(r.pass && r.parts_units >= r.whole_units, "{r}");
        }
    }

    #[test]
    fn misaligned_cut_rejected() {
        let s = spec(GeneratorKind::constant(1.0), tilted());
        let a = Interval1::integers(0, 4).unwrap();
        assert!(matches!(
            check_subadditivity(&s, 0, &a, &[q(1, 3)]),
            Err(ErgodicError::MisalignedCut { .. })
        ));
        assert!(matches!(
            check_subadditivity(&s, 0, &a, &[q(5, 1)]),
            Err(ErgodicError::CutOutside { .. })
        ));
    }

    #[test]
    fn covariance_exact() {
        let mut rng = check_rng(3);
        for nu in [e2(), tilted()] {
            let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), nu);
            for seed in 0..25 {
                let (a, _) = aligned_partition(&mut rng, s.frame.scale(), 1, 4, 14);
                let z = rng.gen_range(-5..=5);
                let r = check_covariance(&s, seed, &a, z).unwrap();
                assert!(r.pass, "{r}");
            }
            let r0 = check_covariance(&s, 1, &Interval1::integers(0, 3).unwrap(), 0).unwrap();
            assert!(r0.pass);
        }
    }

    #[test]
    fn ghom_constant_and_mixture() {
        let s = spec(GeneratorKind::constant(2.0), e2());
        let est = estimate_ghom(&s, &[8, 16], 3).unwrap();
        assert!(est.normalized.iter().flatten().all(|&v| v == 2.0));
        assert_eq!(est.error_bar, 0.0);
        let mix = GeneratorKind::mixture(
            GeneratorKind::constant(1.0),
            GeneratorKind::constant(3.0),
            0.5,
        );
        let m = spec(mix, e2());
        let est = estimate_ghom(&m, &[8, 16], 12).unwrap();
        assert!(est
            .normalized
            .iter()
            .flatten()
            .all(|&v| v == 1.0 || v == 3.0));
        for i in 0..12 {
            assert_eq!(est.normalized[0][i], est.normalized[1][i]);
        }
    }

    #[test]
    fn ghom_checkerboard_below_flat_cut() {
        let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), e2());
        let est = estimate_ghom(&s, &[8, 16], 10).unwrap();
        for row in &est.normalized {
            for &v in row {
                assert!((1.0..=2.0 + 0.5).contains(&v), "{v}");
            }
        }
        assert!(est.point_estimate < 2.0);
        for (i, &seed) in est.seeds.iter().enumerate() {
            let flat = flat_cut_normalized(&s, seed, 16).unwrap();
            assert!(est.normalized[1][i] <= flat);
        }
        let c = spec(GeneratorKind::constant(1.0), e2());
        assert_eq!(flat_cut_normalized(&c, 0, 16).unwrap(), 1.0);
        let tilt = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), tilted());
        let tilted_est = estimate_ghom(&tilt, &[12], 4).unwrap();
        for (i, &seed) in tilted_est.seeds.iter().enumerate() {
            let (lo, hi) = competitor_bracket(&tilt, seed, 12).unwrap();
            let v = tilted_est.normalized[0][i];
            assert!(lo <= v && v <= hi, "{lo} {v} {hi}");
        }
        assert_eq!(est.schedule, vec![8, 16]);
        assert_eq!(est.stats.len(), 2);
    }

    #[test]
    fn budget_truncates_schedule() {
        let mut s = spec(GeneratorKind::constant(1.0), e2());
        s.budget_cells = 2 * (64 + 256);
        let est = estimate_ghom(&s, &[8, 16, 32], 2).unwrap();
        assert_eq!(est.schedule, vec![8, 16]);
        assert_eq!(est.truncated, vec![32]);
        s.budget_cells = 10;
        assert!(matches!(
            estimate_ghom(&s, &[8], 2),
            Err(ErgodicError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn fhom_constant() {
        let v = VolumeProcessSpec::new(
            GeneratorKind::constant(1.0),
            2.0,
            arr2(&[[1.0, 2.0]]),
            q(1, 2),
            0,
        );
        let est = estimate_fhom(&v, &[4, 8], 2).unwrap();
        for row in &est.normalized {
            for &x in row {
                assert!((x - 5.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fhom_voigt_reuss_bracket() {
        let v = VolumeProcessSpec::new(
            GeneratorKind::iid_cells(1.0, 4.0, 0.5),
            2.0,
            arr2(&[[1.0, 0.0]]),
            q(1, 4),
            7,
        );
        let est = estimate_fhom(&v, &[8], 6).unwrap();
        for &x in &est.normalized[0] {
            assert!((1.6 * 0.98..=2.5 * 1.02).contains(&x), "{x}");
        }
    }

    #[test]
    fn shift_and_center_constant_medium() {
        let s = spec(GeneratorKind::constant(1.5), tilted());
        let r = check_shift_invariance(&s, 2, &[3, 2], 8, 0.05).unwrap();
        assert_eq!(r.mean_gap, 0.0);
        let c = check_center_independence(&s, 2, &[q(1, 1), q(0, 1)], &[8, 16], 0.05).unwrap();
        assert!(c.mean_gaps.iter().all(|&g| g == 0.0) && c.pass);
        let zero = check_center_independence(
            &spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), e2()),
            3,
            &[q(0, 1), q(0, 1)],
            &[8],
            0.0,
        )
        .unwrap();
        assert_eq!(zero.mean_gaps, vec![0.0]);
    }

    #[test]
    fn shift_mixture_gap_zero() {
        let mix = GeneratorKind::mixture(
            GeneratorKind::constant(1.0),
            GeneratorKind::constant(3.0),
            0.5,
        );
        let r = check_shift_invariance(&spec(mix, e2()), 6, &[3, 2], 8, 0.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn birkhoff_examples() {
        let at_origin = |f: &CoefficientField| f.coefficient_at(&[0, 0]).unwrap();
        let iid = sample_medium(GeneratorKind::iid_cells(1.0, 4.0, 0.5), 1).unwrap();
        let run = birkhoff_average(&iid, at_origin, &[1, 0], 10_000);
        let se = 1.5 / (10_000f64).sqrt();
        assert!((run.last().unwrap() - 2.5).abs() <= 3.0 * se);
        let c = sample_medium(GeneratorKind::constant(2.0), 1).unwrap();
        assert!(birkhoff_average(&c, at_origin, &[1, 1], 50)
            .iter()
            .all(|&v| v == 2.0));
        for seed in 0..10 {
            let mix = sample_medium(
                GeneratorKind::mixture(
                    GeneratorKind::constant(1.0),
                    GeneratorKind::constant(3.0),
                    0.5,
                ),
                seed,
            )
            .unwrap();
            let last = *birkhoff_average(&mix, at_origin, &[2, 1], 100)
                .last()
                .unwrap();
            assert!(last == 1.0 || last == 3.0);
        }
    }

    #[test]
    fn volume_expectation_monotone() {
        let v = VolumeProcessSpec::new(
            GeneratorKind::iid_cells(1.0, 4.0, 0.5),
            2.0,
            arr2(&[[1.0, 0.0]]),
            q(1, 2),
            3,
        );
        let e = ergodic_expectation_volume(&v, &[4, 8, 16], 3).unwrap();
        assert!(e.monotone, "{:?}", e.means);
        assert!(ergodic_expectation_volume(&v, &[6, 16], 1).is_err());
    }

    #[test]
    fn reflected_estimates_identical() {
        let s = SubadditiveProcessSpec::new(
            vec![0.6, -0.8],
            &tilted(),
            SurfaceFamily::Amplitude { cap: 2.0 },
            GeneratorKind::iid_cells(1.0, 3.0, 0.5),
            5,
            CutOptions {
                neighborhood: Neighborhood::n8(),
                ..Default::default()
            },
        )
        .unwrap();
        let a = estimate_ghom(&s, &[8, 12], 4).unwrap();
        let b = estimate_ghom(&s.reflected().unwrap(), &[8, 12], 4).unwrap();
        assert_eq!(a.point_estimate.to_bits(), b.point_estimate.to_bits());
        assert_eq!(a.normalized, b.normalized);
    }

    #[test]
    fn tables_respect_brackets() {
        let s = spec(GeneratorKind::iid_cells(1.0, 3.0, 0.5), tilted());
        let t = surface_table(&[s.clone(), s.reflected().unwrap()], &[8, 16], 4).unwrap();
        assert!(t.all_within(), "{:?}", t.entries);
        assert_eq!(t.entries[0].estimate, t.entries[1].estimate);
        let v = VolumeProcessSpec::new(
            GeneratorKind::iid_cells(1.0, 4.0, 0.5),
            2.0,
            arr2(&[[0.5, 1.0]]),
            q(1, 2),
            0,
        );
        assert!(volume_table(&[v], &[4, 8], 3).unwrap().all_within());
    }

    #[test]
    fn stats_basics() {
        let s = t_stats(4, &[1.0, 3.0, 2.0, 6.0]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[0.5; 100]), 50.0);
    }
}
