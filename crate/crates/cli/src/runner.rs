//! Experiment execution.

use std::time::Instant;

use homlab::ergodic::{
    aligned_partition, check_center_independence, check_covariance, check_rng,
    check_shift_invariance, check_subadditivity, competitor_bracket, estimate_ghom, mu_eval,
    mu_upper_bound, surface_table, volume_table, ErgodicError, EstimateSeries, HomDensityTable,
    SubadditiveProcessSpec, VolumeProcessSpec,
};
use homlab::integrand::{validate_surface_axioms, validate_volume_axioms, IntegrandError};
use homlab::surface_cell::{
    brute_force_min_units, calibrate_metrication, random_instance, solve_min_cut, SurfaceError,
};
use homlab::{
    sample_medium, CutOptions, GeneratorKind, Neighborhood, RationalDirection, SurfaceIntegrand,
    VolumeIntegrand,
};
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};

/// Environment variable selecting the number of worker threads.
pub const THREADS_VAR: &str = "HOMLAB_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ergodic(#[from] ErgodicError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Integrand(#[from] IntegrandError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed run record: {0}")]
    Record(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub nu: String,
    pub neighborhood: String,
    pub strip_length: u32,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub digest: String,
    pub kind: String,
    /// Canonical configuration text.
    pub config: String,
    pub series: Vec<EstimateSeries>,
    pub tables: Vec<HomDensityTable>,
    pub calibrations: Vec<CalibrationEntry>,
    pub checks: Vec<CheckResult>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Worker count from [`THREADS_VAR`]; one when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Run on a dedicated pool with `threads` workers.
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<RunRecord, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| RunError::ThreadPool(e.to_string()))?;
    pool.install(|| run(config))
}

/// Execute the configured experiment on the current rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord, RunError> {
    config.validate()?;
    let start = Instant::now();
    let mut record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        digest: config.digest(),
        kind: config.kind.name().to_string(),
        config: config.serialize(),
        series: Vec::new(),
        tables: Vec::new(),
        calibrations: Vec::new(),
        checks: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    match config.kind {
        ExperimentKind::Fhom => run_fhom(config, &mut record)?,
        ExperimentKind::Ghom => run_ghom(config, &mut record)?,
        ExperimentKind::Table => {
            run_fhom(config, &mut record)?;
            run_ghom(config, &mut record)?;
            symmetry_checks(config, &mut record)?;
        }
        ExperimentKind::Calibrate => run_calibrate(config, &mut record)?,
        ExperimentKind::Verify => run_verify(config, &mut record)?,
    }
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn cut_options(config: &ExperimentConfig) -> CutOptions {
    CutOptions {
        neighborhood: config.solver.neighborhood,
        precision_bits: config.solver.precision_bits,
    }
}

pub fn surface_specs(config: &ExperimentConfig) -> Result<Vec<SubadditiveProcessSpec>, RunError> {
    config
        .zeta
        .iter()
        .zip(&config.nu)
        .map(|(zeta, nu)| {
            let mut s = SubadditiveProcessSpec::new(
                zeta.clone(),
                nu,
                config.family,
                config.medium.clone(),
                config.base_seed,
                cut_options(config),
            )?;
            s.budget_cells = config.solver.budget;
            Ok(s)
        })
        .collect()
}

pub fn volume_specs(config: &ExperimentConfig) -> Vec<VolumeProcessSpec> {
    config
        .xi
        .iter()
        .map(|rows| {
            let (m, n) = (rows.len(), rows[0].len());
            let xi = Array2::from_shape_vec((m, n), rows.concat()).expect("validated shape");
            let mut s = VolumeProcessSpec::new(
                config.medium.clone(),
                config.p,
                xi,
                config.solver.h,
                config.base_seed,
            );
            s.tol = config.solver.tol;
            s.max_iter = config.solver.max_iter;
            s.budget_cells = config.solver.budget;
            s
        })
        .collect()
}

fn record_table(record: &mut RunRecord, table: HomDensityTable, bracket: &str) {
    for (entry, series) in table.entries.iter().zip(&table.series) {
        record.checks.push(CheckResult::new(
            bracket,
            entry.within,
            format!(
                "{} estimate={} lower={} upper={}",
                entry.query, entry.estimate, entry.lower, entry.upper
            ),
        ));
        if !series.truncated.is_empty() {
            record.checks.push(CheckResult::new(
                "budget",
                false,
                format!("{} dropped t={:?}", series.label, series.truncated),
            ));
        }
    }
    record.series.extend(table.series.iter().cloned());
    record.tables.push(table);
}

fn run_fhom(config: &ExperimentConfig, record: &mut RunRecord) -> Result<(), RunError> {
    if config.xi.is_empty() {
        return Ok(());
    }
    let table = volume_table(&volume_specs(config), &config.schedule, config.seed_count)?;
    record_table(record, table, "fhom_bracket");
    Ok(())
}

fn run_ghom(config: &ExperimentConfig, record: &mut RunRecord) -> Result<(), RunError> {
    if config.zeta.is_empty() {
        return Ok(());
    }
    let table = surface_table(&surface_specs(config)?, &config.schedule, config.seed_count)?;
    record_table(record, table, "ghom_bracket");
    Ok(())
}

fn symmetry_checks(config: &ExperimentConfig, record: &mut RunRecord) -> Result<(), RunError> {
    for spec in surface_specs(config)? {
        let a = estimate_ghom(&spec, &config.schedule, config.seed_count)?;
        let b = estimate_ghom(&spec.reflected()?, &config.schedule, config.seed_count)?;
        let same = a.point_estimate.to_bits() == b.point_estimate.to_bits();
        record.checks.push(CheckResult::new(
            "symmetry",
            same,
            format!(
                "zeta={:?} nu={} estimate={} reflected={}",
                spec.zeta,
                spec.nu(),
                a.point_estimate,
                b.point_estimate
            ),
        ));
    }
    Ok(())
}

fn run_calibrate(config: &ExperimentConfig, record: &mut RunRecord) -> Result<(), RunError> {
    let strip = config.verify.strip_length;
    for nu in &config.nu {
        let kappa = calibrate_metrication(
            config.solver.neighborhood,
            nu,
            strip,
            config.solver.precision_bits,
        )?;
        record.calibrations.push(CalibrationEntry {
            nu: nu.to_string(),
            neighborhood: config.solver.neighborhood.name().to_string(),
            strip_length: strip,
            kappa,
        });
    }
    Ok(())
}

/// Summary check plus one FAIL entry per failing case.
fn aggregate(record: &mut RunRecord, name: &str, scope: &str, cases: Vec<(bool, String)>) {
    let passed = cases.iter().filter(|c| c.0).count();
    record.checks.push(CheckResult::new(
        name,
        passed == cases.len(),
        format!("{scope} {passed}/{} cases", cases.len()),
    ));
    for (ok, detail) in cases {
        if !ok {
            record.checks.push(CheckResult::new(name, false, detail));
        }
    }
}

fn run_verify(config: &ExperimentConfig, record: &mut RunRecord) -> Result<(), RunError> {
    let v = &config.verify;

    // Exact min-cut against exhaustive enumeration.
    let mut rng = check_rng(config.base_seed);
    let mut graphs = Vec::with_capacity(v.exactness_cases);
    for i in 0..v.exactness_cases {
        let nb = if i % 2 == 0 {
            Neighborhood::N4
        } else {
            Neighborhood::n8()
        };
        graphs.push((nb, random_instance(&mut rng, nb, i % 4 >= 2)?));
    }
    let cases: Result<Vec<(bool, String)>, SurfaceError> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, (nb, g))| {
            let flow = solve_min_cut(g).units;
            let brute = brute_force_min_units(g)?;
            Ok((
                flow == brute,
                format!(
                    "instance={i} neighborhood={} flow={flow} brute={brute}",
                    nb.name()
                ),
            ))
        })
        .collect();
    aggregate(record, "mincut_exactness", "random 4x4", cases?);

    // Covariance, subadditivity and bounds of the subadditive process.
    for (k, spec) in surface_specs(config)?.iter().enumerate() {
        let m = spec.frame.scale();
        let mut rng = check_rng(config.base_seed.wrapping_add(1 + k as u64));
        let mut jobs = Vec::with_capacity(v.cases);
        for i in 0..v.cases {
            let seed = config.base_seed.wrapping_add(i as u64);
            let pieces = rng.gen_range(2..=3);
            let (interval, cuts) = aligned_partition(&mut rng, m, pieces, 2, 10);
            let z = rng.gen_range(-5..=5);
            jobs.push((seed, interval, cuts, z));
        }
        type Outcome = ((bool, String), (bool, String), (bool, String));
        let results: Result<Vec<Outcome>, ErgodicError> = jobs
            .par_iter()
            .map(|(seed, interval, cuts, z)| {
                let cov = check_covariance(spec, *seed, interval, *z)?;
                let sub = check_subadditivity(spec, *seed, interval, cuts)?;
                let mu = mu_eval(spec, *seed, interval)?;
                let upper = mu_upper_bound(spec, interval)?;
                let bounded = (0.0..=upper).contains(&mu);
                Ok((
                    (cov.pass, cov.to_string()),
                    (sub.pass, sub.to_string()),
                    (
                        bounded,
                        format!("seed={seed} interval={interval} mu={mu} upper={upper}"),
                    ),
                ))
            })
            .collect();
        let results = results?;
        let scope = format!("zeta={:?} nu={}", spec.zeta, spec.nu());
        let (mut cov, mut sub, mut bnd) = (Vec::new(), Vec::new(), Vec::new());
        for (a, b, c) in results {
            cov.push(a);
            sub.push(b);
            bnd.push(c);
        }
        aggregate(record, "covariance", &scope, cov);
        aggregate(record, "subadditivity", &scope, sub);
        aggregate(record, "bounds", &scope, bnd);
    }

    // Class axioms of the configured integrands.
    let samples = if v.quick { 2_000 } else { 10_000 };
    let field = sample_medium(config.medium.clone(), config.base_seed)
        .map_err(|e| RunError::Integrand(e.into()))?;
    let g = SurfaceIntegrand::new(field.clone(), config.family)?;
    let rep = validate_surface_axioms(&g, samples, config.base_seed)?;
    record.checks.push(CheckResult::new(
        "surface_axioms",
        rep.all_satisfied(),
        format!(
            "margins comparability={} monotonicity={} lower_bound={} upper_bound={} symmetry={}",
            rep.comparability, rep.monotonicity, rep.lower_bound, rep.upper_bound, rep.symmetry
        ),
    ));
    let f = VolumeIntegrand::new(field, config.p)?;
    let rep = validate_volume_axioms(&f, samples, config.base_seed)?;
    record.checks.push(CheckResult::new(
        "volume_axioms",
        rep.all_satisfied(),
        format!(
            "margins lower_growth={} upper_growth={}",
            rep.lower_growth, rep.upper_growth
        ),
    ));

    // Constant-media fixed points.
    let mut constant = config.clone();
    constant.medium = GeneratorKind::constant(2.0);
    constant.p = 2.0;
    for spec in volume_specs(&constant) {
        let target = 2.0 * spec.xi.iter().map(|a| a * a).sum::<f64>();
        let s = homlab::ergodic::estimate_fhom(&spec, &[8], 1)?;
        let got = s.point_estimate;
        record.checks.push(CheckResult::new(
            "constant_volume",
            (got - target).abs() <= 1e-8,
            format!(
                "xi={:?} normalized={got} target={target}",
                spec.xi.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let axis = RationalDirection::axis(2, 1);
    let spec = SubadditiveProcessSpec::new(
        vec![1.0],
        &axis,
        homlab::SurfaceFamily::Perimeter,
        GeneratorKind::constant(2.0),
        config.base_seed,
        cut_options(config),
    )?;
    let s = estimate_ghom(&spec, &[8, 32], 1)?;
    let exact = s
        .normalized
        .iter()
        .flatten()
        .all(|&x| (x - 2.0).abs() <= 1e-12);
    record.checks.push(CheckResult::new(
        "constant_surface",
        exact,
        format!("nu={axis} normalized={:?}", s.normalized),
    ));

    // Metrication factors.
    let tilted = RationalDirection::new(vec![3, 4], 5).expect("unit");
    let bits = config.solver.precision_bits;
    let k_axis = calibrate_metrication(
        Neighborhood::N4,
        &RationalDirection::axis(2, 0),
        v.strip_length,
        bits,
    )?;
    let k4 = calibrate_metrication(Neighborhood::N4, &tilted, v.strip_length, bits)?;
    let k8 = calibrate_metrication(Neighborhood::n8(), &tilted, v.strip_length, bits)?;
    record.checks.push(CheckResult::new(
        "metrication",
        k_axis == 1.0 && (k4 - 1.4).abs() <= 0.014 && k8 < k4,
        format!("kappa_n4(e1)={k_axis} kappa_n4(3,4)={k4} kappa_n8(3,4)={k8}"),
    ));
    for (nu, nb, kappa) in [
        (RationalDirection::axis(2, 0), Neighborhood::N4, k_axis),
        (tilted.clone(), Neighborhood::N4, k4),
        (tilted, Neighborhood::n8(), k8),
    ] {
        record.calibrations.push(CalibrationEntry {
            nu: nu.to_string(),
            neighborhood: nb.name().to_string(),
            strip_length: v.strip_length,
            kappa,
        });
    }

    // Finite-t translation invariance and center independence (full mode).
    if !v.quick {
        let t_max = *v.invariance_schedule.last().expect("validated");
        for spec in surface_specs(config)? {
            let scope = format!("zeta={:?} nu={}", spec.zeta, spec.nu());
            let shift =
                check_shift_invariance(&spec, v.invariance_seeds, &v.shift, t_max, v.tolerance)?;
            record.checks.push(CheckResult::new(
                "shift_invariance",
                shift.pass,
                format!(
                    "{scope} t={t_max} shift={:?} mean_gap={} tolerance={}",
                    v.shift, shift.mean_gap, v.tolerance
                ),
            ));
            let center = check_center_independence(
                &spec,
                v.invariance_seeds,
                &v.center,
                &v.invariance_schedule,
                v.tolerance,
            )?;
            record.checks.push(CheckResult::new(
                "center_independence",
                center.pass,
                format!(
                    "{scope} t={:?} mean_gaps={:?} decreasing={} tolerance={}",
                    v.invariance_schedule, center.mean_gaps, center.shrinking, v.tolerance
                ),
            ));
        }
    }

    // Estimator series, competitor bounds and symmetry.
    for spec in surface_specs(config)? {
        let s = estimate_ghom(&spec, &config.schedule, config.seed_count)?;
        let mut cases = Vec::new();
        for (k, &t) in s.schedule.iter().enumerate() {
            for (i, &seed) in s.seeds.iter().enumerate() {
                let value = s.normalized[k][i];
                let (lower, flat) = competitor_bracket(&spec, seed, t)?;
                cases.push((
                    lower <= value && value <= flat,
                    format!("seed={seed} t={t} value={value} lower={lower} flat={flat}"),
                ));
            }
        }
        let scope = format!("zeta={:?} nu={}", spec.zeta, spec.nu());
        aggregate(record, "competitor_bracket", &scope, cases);
        let r = estimate_ghom(&spec.reflected()?, &config.schedule, config.seed_count)?;
        record.checks.push(CheckResult::new(
            "symmetry",
            r.point_estimate.to_bits() == s.point_estimate.to_bits(),
            format!(
                "{scope} estimate={} reflected={}",
                s.point_estimate, r.point_estimate
            ),
        ));
        record.series.push(s);
    }
    Ok(())
}
