//! Acceptance suite (`harness = false`). Runs every criterion, prints one
//! `PASS`/`FAIL` line per criterion and exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use homlab::ergodic::{
    aligned_partition, check_covariance, check_rng, check_subadditivity, flat_cut_normalized,
    surface_table, volume_table, SubadditiveProcessSpec, VolumeProcessSpec,
};
use homlab::surface_cell::{
    brute_force_min_units, calibrate_metrication, random_instance, solve_min_cut,
};
use homlab::{
    check_center_independence, check_shift_invariance, estimate_fhom, estimate_ghom, CutOptions,
    GeneratorKind, Neighborhood, Rational, RationalDirection, SurfaceFamily,
};
use ndarray::{arr2, Array2};
use rand::Rng;
use rayon::prelude::*;

const BASE_SEED: u64 = 1000;

fn verdict(
    id: u32,
    name: &str,
    pass: bool,
    elapsed: Duration,
    limit: Option<Duration>,
    detail: String,
) -> bool {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = pass && in_time;
    println!(
        "{} criterion {id} {name}: {detail} elapsed={:.2}s{}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit
            .map(|l| format!(" limit={}s", l.as_secs()))
            .unwrap_or_default()
    );
    ok
}

fn e1() -> RationalDirection {
    RationalDirection::axis(2, 0)
}

fn e2() -> RationalDirection {
    RationalDirection::axis(2, 1)
}

fn tilted() -> RationalDirection {
    RationalDirection::new(vec![3, 4], 5).unwrap()
}

fn quarter() -> Rational {
    Rational::new(1, 4)
}

fn surface(medium: GeneratorKind, nu: &RationalDirection) -> SubadditiveProcessSpec {
    SubadditiveProcessSpec::new(
        vec![1.0],
        nu,
        SurfaceFamily::Perimeter,
        medium,
        BASE_SEED,
        CutOptions::default(),
    )
    .unwrap()
}

fn checkerboard() -> GeneratorKind {
    GeneratorKind::iid_cells(1.0, 3.0, 0.5)
}

fn rel(a: f64, target: f64) -> f64 {
    (a - target).abs() / target.abs()
}

fn criterion_01_mincut_exactness() -> bool {
    let start = Instant::now();
    let mut rng = check_rng(BASE_SEED);
    let mut graphs = Vec::new();
    for i in 0..400 {
        let nb = if i % 2 == 0 {
            Neighborhood::N4
        } else {
            Neighborhood::n8()
        };
        graphs.push(random_instance(&mut rng, nb, i % 4 >= 2).unwrap());
    }
    let mismatches: Vec<usize> = graphs
        .par_iter()
        .enumerate()
        .filter(|(_, g)| solve_min_cut(g).units != brute_force_min_units(g).unwrap())
        .map(|(i, _)| i)
        .collect();
    verdict(
        1,
        "min-cut exactness",
        mismatches.is_empty(),
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!("instances={} mismatches={mismatches:?}", graphs.len()),
    )
}

fn criterion_02_constant_media() -> bool {
    let start = Instant::now();
    let xis: [Array2<f64>; 4] = [
        arr2(&[[1.0, 0.0]]),
        arr2(&[[0.0, 1.0]]),
        arr2(&[[1.0, 1.0]]),
        arr2(&[[0.3, -0.7]]),
    ];
    let mut worst_volume = 0.0f64;
    for xi in &xis {
        let target: f64 = xi.iter().map(|a| a * a).sum();
        let spec = VolumeProcessSpec::new(
            GeneratorKind::constant(1.0),
            2.0,
            xi.clone(),
            quarter(),
            BASE_SEED,
        );
        let s = estimate_fhom(&spec, &[8, 16, 32], 1).unwrap();
        for row in &s.normalized {
            worst_volume = worst_volume.max((row[0] - target).abs());
        }
    }
    let mut worst_surface = 0.0f64;
    for c in [1.0, 2.0] {
        for nu in [e1(), e2()] {
            let s = estimate_ghom(&surface(GeneratorKind::constant(c), &nu), &[8, 32], 1).unwrap();
            for row in &s.normalized {
                worst_surface = worst_surface.max((row[0] - c).abs());
            }
        }
    }
    verdict(
        2,
        "constant-media fixed points",
        worst_volume <= 1e-8 && worst_surface <= 1e-12,
        start.elapsed(),
        None,
        format!("max volume error={worst_volume:e} max surface error={worst_surface:e}"),
    )
}

fn criterion_03_volume_laminate() -> bool {
    let start = Instant::now();
    let laminate = GeneratorKind::laminate(0, 2, vec![1.0, 4.0]);
    let est = |xi: Array2<f64>| {
        let spec = VolumeProcessSpec::new(laminate.clone(), 2.0, xi, quarter(), BASE_SEED);
        estimate_fhom(&spec, &[32], 2).unwrap().point_estimate
    };
    let across = est(arr2(&[[1.0, 0.0]]));
    let along = est(arr2(&[[0.0, 1.0]]));
    verdict(
        3,
        "volume laminate duality",
        rel(across, 1.6) <= 0.05 && rel(along, 2.5) <= 0.05,
        start.elapsed(),
        Some(Duration::from_secs(300)),
        format!("xi=e1 estimate={across} (target 1.6) xi=e2 estimate={along} (target 2.5)"),
    )
}

fn criterion_04_surface_laminate() -> bool {
    let start = Instant::now();
    let laminate = GeneratorKind::laminate(0, 2, vec![1.0, 3.0]);
    let est = |nu: RationalDirection| {
        estimate_ghom(&surface(laminate.clone(), &nu), &[64], 2)
            .unwrap()
            .point_estimate
    };
    let n1 = est(e1());
    let n2 = est(e2());
    verdict(
        4,
        "surface laminate duality",
        rel(n1, 1.0) <= 0.05 && rel(n2, 2.0) <= 0.05,
        start.elapsed(),
        Some(Duration::from_secs(120)),
        format!("nu=e1 estimate={n1} (target 1) nu=e2 estimate={n2} (target 2)"),
    )
}

fn criterion_05_metrication() -> bool {
    let start = Instant::now();
    let bits = CutOptions::default().precision_bits;
    let k_axis = calibrate_metrication(Neighborhood::N4, &e1(), 32, bits).unwrap();
    let k4 = calibrate_metrication(Neighborhood::N4, &tilted(), 32, bits).unwrap();
    let k8 = calibrate_metrication(Neighborhood::n8(), &tilted(), 32, bits).unwrap();
    verdict(
        5,
        "metrication calibration",
        k_axis == 1.0 && rel(k4, 1.4) <= 0.01 && k8 < k4,
        start.elapsed(),
        None,
        format!("kappa_n4(e1)={k_axis} kappa_n4(3,4)={k4} kappa_n8(3,4)={k8}"),
    )
}

fn criterion_06_structural_identities() -> bool {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for (k, nu) in [e2(), tilted()].iter().enumerate() {
        let spec = surface(checkerboard(), nu);
        let m = spec.frame.scale();
        let mut rng = check_rng(BASE_SEED + 1 + k as u64);
        let jobs: Vec<_> = (0..100u64)
            .map(|i| {
                let pieces = rng.gen_range(2..=3);
                let (interval, cuts) = aligned_partition(&mut rng, m, pieces, 2, 10);
                (BASE_SEED + i, interval, cuts, rng.gen_range(-5..=5i64))
            })
            .collect();
        let results: Vec<(bool, bool, f64)> = jobs
            .par_iter()
            .map(|(seed, interval, cuts, z)| {
                let cov = check_covariance(&spec, *seed, interval, *z).unwrap();
                let sub = check_subadditivity(&spec, *seed, interval, cuts).unwrap();
                (cov.pass, sub.pass && sub.slack >= 0.0, sub.slack)
            })
            .collect();
        let cov_ok = results.iter().filter(|r| r.0).count();
        let sub_ok = results.iter().filter(|r| r.1).count();
        let min_slack = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        pass &= cov_ok == 100 && sub_ok == 100;
        details.push(format!(
            "nu={nu} covariance={cov_ok}/100 subadditivity={sub_ok}/100 min_slack={min_slack}"
        ));
    }
    verdict(
        6,
        "structural identities",
        pass,
        start.elapsed(),
        Some(Duration::from_secs(300)),
        details.join("; "),
    )
}

fn criterion_07_ergodic_concentration() -> bool {
    let start = Instant::now();
    let spec = surface(checkerboard(), &e2());
    let s = estimate_ghom(&spec, &[16, 32, 64], 50).unwrap();
    let ratio = s.concentration_ratio.unwrap();
    let c4 = spec.medium.value_range().0;
    let mut outside = Vec::new();
    for (k, &t) in s.schedule.iter().enumerate() {
        for (i, &seed) in s.seeds.iter().enumerate() {
            let v = s.normalized[k][i];
            let flat = flat_cut_normalized(&spec, seed, t).unwrap();
            if !(c4..=flat).contains(&v) {
                outside.push((seed, t, v, flat));
            }
        }
    }
    verdict(
        7,
        "ergodic concentration",
        ratio <= 0.6 && outside.is_empty(),
        start.elapsed(),
        None,
        format!(
            "std ratio={ratio} means={:?} outside bracket={outside:?}",
            s.means()
        ),
    )
}

fn criterion_08_non_ergodic_mixture() -> bool {
    let start = Instant::now();
    let mixture = GeneratorKind::mixture(
        GeneratorKind::constant(1.0),
        GeneratorKind::constant(3.0),
        0.5,
    );
    let spec = surface(mixture, &e2());
    let s = estimate_ghom(&spec, &[8, 16, 32], 100).unwrap();
    let mut off_mode = 0;
    let mut bimodal = true;
    for row in &s.normalized {
        let low = row.iter().filter(|&&v| rel(v, 1.0) <= 0.01).count();
        let high = row.iter().filter(|&&v| rel(v, 3.0) <= 0.01).count();
        off_mode += row.len() - low - high;
        bimodal &= low > 0 && high > 0;
    }
    let last = s.stats.last().unwrap();
    let within = (last.mean - 2.0).abs() <= 3.0 * last.se;
    verdict(
        8,
        "non-ergodic mixture",
        off_mode == 0 && bimodal && within,
        start.elapsed(),
        None,
        format!(
            "off-mode estimates={off_mode} bimodal={bimodal} mean={} se={}",
            last.mean, last.se
        ),
    )
}

fn criterion_09_voigt_reuss() -> bool {
    let start = Instant::now();
    let spec = VolumeProcessSpec::new(
        GeneratorKind::iid_cells(1.0, 4.0, 0.5),
        2.0,
        arr2(&[[1.0, 0.0]]),
        quarter(),
        BASE_SEED,
    );
    let s = estimate_fhom(&spec, &[16], 30).unwrap();
    let (lo, hi) = (1.6 * 0.98, 2.5 * 1.02);
    let row = &s.normalized[0];
    let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        9,
        "Voigt-Reuss bracketing",
        min >= lo && max <= hi,
        start.elapsed(),
        None,
        format!("estimates in [{min}, {max}] bracket [{lo}, {hi}]"),
    )
}

fn criterion_10_invariance() -> bool {
    let start = Instant::now();
    let spec = surface(checkerboard(), &e2());
    let shift = check_shift_invariance(&spec, 20, &[3, 2], 64, 0.05).unwrap();
    let one = Rational::from_integer(1);
    let zero = Rational::from_integer(0);
    let center = check_center_independence(&spec, 20, &[one, zero], &[16, 32, 64], 0.05).unwrap();
    verdict(
        10,
        "invariance and center independence",
        shift.pass && center.pass,
        start.elapsed(),
        None,
        format!(
            "shift mean gap={} center mean gaps={:?} decreasing={}",
            shift.mean_gap, center.mean_gaps, center.shrinking
        ),
    )
}

fn criterion_11_symmetry_and_brackets() -> bool {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for nu in [e2(), tilted()] {
        let spec = surface(checkerboard(), &nu);
        let a = estimate_ghom(&spec, &[8, 16, 32], 10)
            .unwrap()
            .point_estimate;
        let b = estimate_ghom(&spec.reflected().unwrap(), &[8, 16, 32], 10)
            .unwrap()
            .point_estimate;
        pass &= a.to_bits() == b.to_bits();
        details.push(format!("nu={nu} estimate={a} reflected={b}"));
    }
    let specs: Vec<_> = [e2(), tilted()]
        .iter()
        .map(|nu| surface(checkerboard(), nu))
        .collect();
    let gt = surface_table(&specs, &[8, 16, 32], 10).unwrap();
    let vspecs: Vec<_> = [[[1.0, 0.0]], [[1.0, 1.0]]]
        .iter()
        .map(|xi| {
            VolumeProcessSpec::new(
                GeneratorKind::iid_cells(1.0, 4.0, 0.5),
                2.0,
                arr2(xi),
                quarter(),
                BASE_SEED,
            )
        })
        .collect();
    let ft = volume_table(&vspecs, &[8, 16], 5).unwrap();
    pass &= gt.all_within() && ft.all_within();
    for e in gt.entries.iter().chain(&ft.entries) {
        details.push(format!(
            "{} in [{}, {}]={}",
            e.query, e.lower, e.upper, e.within
        ));
    }
    verdict(
        11,
        "symmetry and table brackets",
        pass,
        start.elapsed(),
        None,
        details.join("; "),
    )
}

fn run_verify(threads: &str, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_homlab"))
        .args(["verify", "--out"])
        .arg(out)
        .env("HOMLAB_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(
        status.success(),
        "verify with {threads} threads exited with {status}"
    );
}

fn criterion_12_determinism() -> bool {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("one"), dir.path().join("four"));
    run_verify("1", &a);
    run_verify("4", &b);
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != homlab_cli::report::RECORD_FILE)
        .collect();
    names.sort();
    let differing: Vec<_> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .cloned()
        .collect();
    verdict(
        12,
        "determinism across thread counts",
        !names.is_empty() && differing.is_empty(),
        start.elapsed(),
        None,
        format!("compared {names:?} differing={differing:?}"),
    )
}

type Criterion = fn() -> bool;

fn main() {
    let criteria: [(u32, Criterion); 12] = [
        (1, criterion_01_mincut_exactness),
        (2, criterion_02_constant_media),
        (3, criterion_03_volume_laminate),
        (4, criterion_04_surface_laminate),
        (5, criterion_05_metrication),
        (6, criterion_06_structural_identities),
        (7, criterion_07_ergodic_concentration),
        (8, criterion_08_non_ergodic_mixture),
        (9, criterion_09_voigt_reuss),
        (10, criterion_10_invariance),
        (11, criterion_11_symmetry_and_brackets),
        (12, criterion_12_determinism),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(true) => {}
            Ok(false) => failed.push(id),
            Err(_) => {
                println!("FAIL criterion {id}: panicked");
                failed.push(id);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
