//! Experiment configuration: a flat, line-oriented `key = value` format with
//! `[section]` headers.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = ghom
//!
//! [medium]
//! kind = iid_cells
//! values = [1, 3]
//! prob = 0.5
//!
//! [query]
//! zeta = [1]; [-1]
//! nu = [0,1]/1; [0,-1]/1
//!
//! [schedule]
//! t = 8, 16, 32, 64
//!
//! [seeds]
//! base = 1000
//! count = 50
//!
//! [output]
//! dir = runs/ghom
//! ```
//!
//! Sections: `experiment`, `medium`, `integrand`, `query`, `schedule`,
//! `seeds`, `solver`, `verify`, `output`. Omitted keys take their defaults.
//! Unknown sections or keys are errors. A mixture medium takes its
//! components as `a.kind`, `a.values`, ... and `b.kind`, ... with
//! `coin_prob`. Lists of vectors are separated by `;`.

use std::fmt::Write as _;
use std::path::PathBuf;

use homlab::geometry::RationalDirection;
use homlab::{GeneratorKind, Neighborhood, Rational, SurfaceFamily};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("missing field `{0}`")]
    Missing(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Fhom,
    Ghom,
    Verify,
    Calibrate,
    Table,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fhom => "fhom",
            ExperimentKind::Ghom => "ghom",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Table => "table",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fhom" => ExperimentKind::Fhom,
            "ghom" => ExperimentKind::Ghom,
            "verify" => ExperimentKind::Verify,
            "calibrate" => ExperimentKind::Calibrate,
            "table" => ExperimentKind::Table,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub h: Rational,
    pub tol: f64,
    pub max_iter: usize,
    pub neighborhood: Neighborhood,
    pub precision_bits: u32,
    pub budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            h: Rational::new(1, 4),
            tol: 1e-10,
            max_iter: 50_000,
            neighborhood: Neighborhood::N4,
            precision_bits: 20,
            budget: homlab::ergodic::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Randomized structural cases per direction.
    pub cases: usize,
    /// Random min-cut exactness instances.
    pub exactness_cases: usize,
    /// Relative tolerance of the finite-`t` invariance checks.
    pub tolerance: f64,
    pub shift: Vec<i64>,
    pub center: Vec<Rational>,
    /// Side lengths of the invariance checks; the last one is tested
    /// against `tolerance`.
    pub invariance_schedule: Vec<u32>,
    pub invariance_seeds: usize,
    pub strip_length: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            quick: false,
            cases: 100,
            exactness_cases: 200,
            tolerance: 0.05,
            shift: vec![3, 2],
            center: vec![Rational::from_integer(1), Rational::from_integer(0)],
            invariance_schedule: vec![16, 32, 64],
            invariance_seeds: 20,
            strip_length: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub medium: GeneratorKind,
    pub family: SurfaceFamily,
    /// Volume exponent.
    pub p: f64,
    /// Volume queries: `m × n` matrices, row-major.
    pub xi: Vec<Vec<Vec<f64>>>,
    /// Surface queries: jumps, paired with `nu`.
    pub zeta: Vec<Vec<f64>>,
    pub nu: Vec<RationalDirection>,
    pub schedule: Vec<u32>,
    pub base_seed: u64,
    pub seed_count: usize,
    pub solver: SolverOptions,
    pub verify: VerifyOptions,
    /// Not part of the digest.
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let e2 = RationalDirection::axis(2, 1);
        let tilted = RationalDirection::new(vec![3, 4], 5).expect("unit");
        let schedule = match kind {
            ExperimentKind::Fhom => vec![8, 16, 32],
            ExperimentKind::Verify => vec![8, 16],
            _ => vec![8, 16, 32, 64],
        };
        let seed_count = match kind {
            ExperimentKind::Verify => 8,
            _ => 50,
        };
        ExperimentConfig {
            kind,
            medium: GeneratorKind::iid_cells(1.0, 3.0, 0.5),
            family: SurfaceFamily::Perimeter,
            p: 2.0,
            xi: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            zeta: vec![vec![1.0], vec![1.0]],
            nu: vec![e2, tilted],
            schedule,
            base_seed: 1000,
            seed_count,
            solver: SolverOptions::default(),
            verify: VerifyOptions::default(),
            output: PathBuf::from(format!("homlab-{}", kind.name())),
        }
    }

    /// Defaults for `verify`, reduced when `quick`.
    pub fn verify_defaults(quick: bool) -> Self {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Verify);
        if quick {
            c.verify.quick = true;
            c.verify.cases = 20;
            c.verify.exactness_cases = 40;
            c.seed_count = 4;
        }
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.medium
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad("schedule must be non-empty and strictly increasing".into());
        }
        if self.seed_count == 0 {
            return bad("seed count must be positive".into());
        }
        if self.p.is_nan() || self.p <= 1.0 {
            return bad(format!("exponent p = {} must exceed 1", self.p));
        }
        if self.zeta.len() != self.nu.len() {
            return bad(format!(
                "{} jumps but {} normals; queries are paired",
                self.zeta.len(),
                self.nu.len()
            ));
        }
        if self.zeta.iter().any(|z| z.iter().all(|&a| a == 0.0)) {
            return bad("jump amplitudes must be nonzero".into());
        }
        if self.nu.iter().any(|n| n.dim() != 2) {
            return bad("surface normals must be planar".into());
        }
        for x in &self.xi {
            let cols = x.first().map_or(0, |r| r.len());
            if x.is_empty()
                || x.len() > 2
                || x.iter().any(|r| r.len() != cols)
                || !(2..=3).contains(&cols)
            {
                return bad("each xi must be an m × n matrix with m ≤ 2, n ∈ {2, 3}".into());
            }
        }
        if self.solver.h <= Rational::from_integer(0) {
            return bad("h must be positive".into());
        }
        if self.solver.precision_bits == 0 || self.solver.precision_bits > 40 {
            return bad("precision_bits must lie in 1..=40".into());
        }
        if let Neighborhood::N8 {
            lambda_axis,
            lambda_diag,
        } = self.solver.neighborhood
        {
            if lambda_axis.is_nan()
                || lambda_diag.is_nan()
                || lambda_axis <= 0.0
                || lambda_diag <= 0.0
            {
                return bad("neighborhood weights must be positive".into());
            }
        }
        let inv = &self.verify.invariance_schedule;
        if inv.is_empty()
            || inv.windows(2).any(|w| w[0] >= w[1])
            || self.verify.invariance_seeds == 0
        {
            return bad("invariance schedule must be increasing with a positive seed count".into());
        }
        if self.verify.shift.len() != 2 || self.verify.center.len() != 2 {
            return bad("verify shift and center must be planar".into());
        }
        if self.verify.strip_length < 16 {
            return bad("strip_length must be at least 16".into());
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = self.serialize_semantic();
        let _ = writeln!(s, "\n[output]\ndir = {}", self.output.display());
        s
    }

    fn serialize_semantic(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]\nkind = {}\n", self.kind.name());
        s.push_str("[medium]\n");
        write_medium(&mut s, "", &self.medium);
        s.push_str("\n[integrand]\n");
        match self.family {
            SurfaceFamily::Perimeter => s.push_str("family = perimeter\n"),
            SurfaceFamily::Amplitude { cap } => {
                let _ = writeln!(s, "family = amplitude\ncap = {}", fmt_f(cap));
            }
        }
        let _ = writeln!(s, "p = {}", fmt_f(self.p));
        s.push_str("\n[query]\n");
        let xi: Vec<String> = self.xi.iter().map(|m| fmt_matrix(m)).collect();
        let zeta: Vec<String> = self.zeta.iter().map(|z| fmt_vec(z)).collect();
        let nu: Vec<String> = self.nu.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "xi = {}", xi.join("; "));
        let _ = writeln!(s, "zeta = {}", zeta.join("; "));
        let _ = writeln!(s, "nu = {}", nu.join("; "));
        let sched: Vec<String> = self.schedule.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "\n[schedule]\nt = {}", sched.join(", "));
        let _ = writeln!(
            s,
            "\n[seeds]\nbase = {}\ncount = {}",
            self.base_seed, self.seed_count
        );
        let so = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nh = {}\ntol = {}\nmax_iter = {}\nneighborhood = {}",
            so.h,
            fmt_f(so.tol),
            so.max_iter,
            so.neighborhood.name()
        );
        if let Neighborhood::N8 {
            lambda_axis,
            lambda_diag,
        } = so.neighborhood
        {
            let _ = writeln!(
                s,
                "lambda_axis = {}\nlambda_diag = {}",
                fmt_f(lambda_axis),
                fmt_f(lambda_diag)
            );
        }
        let _ = writeln!(
            s,
            "precision_bits = {}\nbudget = {}",
            so.precision_bits, so.budget
        );
        let v = &self.verify;
        let center: Vec<String> = v.center.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            s,
            "\n[verify]\nquick = {}\ncases = {}\nexactness_cases = {}\ntolerance = {}\nshift = {}\ncenter = [{}]\ninvariance_t = {}\ninvariance_seeds = {}\nstrip_length = {}",
            v.quick,
            v.cases,
            v.exactness_cases,
            fmt_f(v.tolerance),
            fmt_ints(&v.shift),
            center.join(", "),
            v.invariance_schedule
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            v.invariance_seeds,
            v.strip_length
        );
        s
    }

    /// SHA-256 of the canonical form without the output directory.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.serialize_semantic().as_bytes()))
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_f(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_ints(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| r.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join(" | "))
}

fn write_medium(s: &mut String, prefix: &str, kind: &GeneratorKind) {
    match kind {
        GeneratorKind::IidCells { values, prob } => {
            let _ = writeln!(
                s,
                "{prefix}kind = iid_cells\n{prefix}values = {}\n{prefix}prob = {}",
                fmt_vec(values),
                fmt_f(*prob)
            );
        }
        GeneratorKind::Laminate {
            axis,
            period,
            values,
        } => {
            let _ = writeln!(
                s,
                "{prefix}kind = laminate\n{prefix}axis = {axis}\n{prefix}period = {period}\n{prefix}values = {}",
                fmt_vec(values)
            );
        }
        GeneratorKind::Constant { value } => {
            let _ = writeln!(
                s,
                "{prefix}kind = constant\n{prefix}value = {}",
                fmt_f(*value)
            );
        }
        GeneratorKind::Mixture { a, b, coin_prob } => {
            let _ = writeln!(
                s,
                "{prefix}kind = mixture\n{prefix}coin_prob = {}",
                fmt_f(*coin_prob)
            );
            write_medium(s, &format!("{prefix}a."), a);
            write_medium(s, &format!("{prefix}b."), b);
        }
    }
}

/// One `key = value` entry with its source line.
#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key: String,
    value: String,
    used: bool,
}

struct Section {
    name: String,
    entries: Vec<Entry>,
}

struct Document {
    sections: Vec<Section>,
}

const SECTIONS: [&str; 9] = [
    "experiment",
    "medium",
    "integrand",
    "query",
    "schedule",
    "seeds",
    "solver",
    "verify",
    "output",
];

impl Document {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("malformed section header `{content}`"),
                    });
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown section `{name}`"),
                    });
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("duplicate section `{name}`"),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let Some(section) = sections.last_mut() else {
                return Err(ConfigError::Syntax {
                    line,
                    message: "entry before the first section header".into(),
                });
            };
            let key = key.trim().to_string();
            if section.entries.iter().any(|e| e.key == key) {
                return Err(ConfigError::Field {
                    line,
                    field: format!("{}.{key}", section.name),
                    message: "duplicate key".into(),
                });
            }
            section.entries.push(Entry {
                line,
                key,
                value: value.trim().to_string(),
                used: false,
            });
        }
        Ok(Document { sections })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        let s = self.sections.iter_mut().find(|s| s.name == section)?;
        let e = s.entries.iter_mut().find(|e| e.key == key)?;
        e.used = true;
        Some(e.clone())
    }

    fn unused(&self) -> Option<(usize, String)> {
        self.sections.iter().find_map(|s| {
            s.entries
                .iter()
                .find(|e| !e.used)
                .map(|e| (e.line, format!("{}.{}", s.name, e.key)))
        })
    }
}

fn field_err(e: &Entry, section: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        line: e.line,
        field: format!("{section}.{}", e.key),
        message: message.into(),
    }
}

struct Reader {
    doc: Document,
}

impl Reader {
    fn get<T>(
        &mut self,
        section: &str,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.doc.take(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|m| field_err(&e, section, m)),
        }
    }

    fn require<T>(
        &mut self,
        section: &str,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, ConfigError> {
        self.get(section, key, parse)?
            .ok_or_else(|| ConfigError::Missing(format!("{section}.{key}")))
    }
}

fn p_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn p_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a valid integer"))
}

fn p_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{s}` is not `true` or `false`")),
    }
}

fn p_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    let r = match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i64, i64) = (p_int(a.trim())?, p_int(b.trim())?);
            if b == 0 {
                return Err("zero denominator".into());
            }
            Rational::new(a, b)
        }
        None => Rational::from_integer(p_int(s)?),
    };
    Ok(r)
}

fn bracketed(s: &str) -> Result<&str, String> {
    s.trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("`{s}` is not a bracketed list"))
}

fn p_vec(s: &str) -> Result<Vec<f64>, String> {
    let inner = bracketed(s)?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|x| p_f64(x.trim())).collect()
}

fn p_ints(s: &str) -> Result<Vec<i64>, String> {
    bracketed(s)?.split(',').map(|x| p_int(x.trim())).collect()
}

fn p_rationals(s: &str) -> Result<Vec<Rational>, String> {
    bracketed(s)?.split(',').map(p_rational).collect()
}

fn p_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    bracketed(s)?
        .split('|')
        .map(|row| row.split(',').map(|x| p_f64(x.trim())).collect())
        .collect()
}

fn p_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|x| item(x.trim())).collect()
}

fn p_direction(s: &str) -> Result<RationalDirection, String> {
    s.parse::<RationalDirection>().map_err(|e| e.to_string())
}

fn p_schedule(s: &str) -> Result<Vec<u32>, String> {
    let s = bracketed(s).unwrap_or(s);
    s.split(',').map(|x| p_int(x.trim())).collect()
}

fn read_medium(r: &mut Reader, prefix: &str) -> Result<GeneratorKind, ConfigError> {
    let key = |k: &str| format!("{prefix}{k}");
    let kind = r.require("medium", &key("kind"), |s| Ok(s.to_string()))?;
    let two = |v: Vec<f64>| -> Result<[f64; 2], String> {
        <[f64; 2]>::try_from(v).map_err(|_| "expected exactly two values".to_string())
    };
    Ok(match kind.as_str() {
        "iid_cells" => {
            let values = r.require("medium", &key("values"), |s| two(p_vec(s)?))?;
            let prob = r.require("medium", &key("prob"), p_f64)?;
            GeneratorKind::iid_cells(values[0], values[1], prob)
        }
        "laminate" => GeneratorKind::laminate(
            r.require("medium", &key("axis"), p_int)?,
            r.require("medium", &key("period"), p_int)?,
            r.require("medium", &key("values"), p_vec)?,
        ),
        "constant" => GeneratorKind::constant(r.require("medium", &key("value"), p_f64)?),
        "mixture" => {
            let coin = r.require("medium", &key("coin_prob"), p_f64)?;
            let a = read_medium(r, &format!("{prefix}a."))?;
            let b = read_medium(r, &format!("{prefix}b."))?;
            GeneratorKind::mixture(a, b, coin)
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown medium kind `{other}` for `medium.{prefix}kind`"
            )))
        }
    })
}

/// Parse a configuration; missing fields take the defaults of its kind.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut r = Reader {
        doc: Document::parse(text)?,
    };
    let kind = r.require("experiment", "kind", |s| {
        ExperimentKind::parse(s).ok_or_else(|| format!("unknown experiment kind `{s}`"))
    })?;
    let mut c = ExperimentConfig::defaults(kind);
    if let Some(dir) = r.get("experiment", "output", |s| Ok(PathBuf::from(s)))? {
        c.output = dir;
    }
    if let Some(dir) = r.get("output", "dir", |s| Ok(PathBuf::from(s)))? {
        c.output = dir;
    }
    if r.doc.sections.iter().any(|s| s.name == "medium") {
        c.medium = read_medium(&mut r, "")?;
    }
    if let Some(f) = r.get("integrand", "family", |s| match s {
        "perimeter" | "amplitude" => Ok(s.to_string()),
        _ => Err(format!("unknown family `{s}`")),
    })? {
        c.family = if f == "amplitude" {
            SurfaceFamily::Amplitude {
                cap: r.require("integrand", "cap", p_f64)?,
            }
        } else {
            SurfaceFamily::Perimeter
        };
    }
    if let Some(p) = r.get("integrand", "p", p_f64)? {
        c.p = p;
    }
    if let Some(v) = r.get("query", "xi", |s| p_list(s, p_matrix))? {
        c.xi = v;
    }
    if let Some(v) = r.get("query", "zeta", |s| p_list(s, p_vec))? {
        c.zeta = v;
    }
    if let Some(v) = r.get("query", "nu", |s| p_list(s, p_direction))? {
        c.nu = v;
    }
    if let Some(v) = r.get("schedule", "t", p_schedule)? {
        c.schedule = v;
    }
    if let Some(v) = r.get("seeds", "base", p_int)? {
        c.base_seed = v;
    }
    if let Some(v) = r.get("seeds", "count", p_int)? {
        c.seed_count = v;
    }
    let so = &mut c.solver;
    if let Some(v) = r.get("solver", "h", p_rational)? {
        so.h = v;
    }
    if let Some(v) = r.get("solver", "tol", p_f64)? {
        so.tol = v;
    }
    if let Some(v) = r.get("solver", "max_iter", p_int)? {
        so.max_iter = v;
    }
    if let Some(n) = r.get("solver", "neighborhood", |s| match s {
        "n4" | "n8" => Ok(s.to_string()),
        _ => Err(format!("unknown neighborhood `{s}` (expected n4 or n8)")),
    })? {
        so.neighborhood = if n == "n8" {
            let Neighborhood::N8 {
                lambda_axis,
                lambda_diag,
            } = Neighborhood::n8()
            else {
                unreachable!()
            };
            Neighborhood::N8 {
                lambda_axis: r
                    .get("solver", "lambda_axis", p_f64)?
                    .unwrap_or(lambda_axis),
                lambda_diag: r
                    .get("solver", "lambda_diag", p_f64)?
                    .unwrap_or(lambda_diag),
            }
        } else {
            Neighborhood::N4
        };
    }
    let so = &mut c.solver;
    if let Some(v) = r.get("solver", "precision_bits", p_int)? {
        so.precision_bits = v;
    }
    if let Some(v) = r.get("solver", "budget", p_int)? {
        so.budget = v;
    }
    let v = &mut c.verify;
    if let Some(x) = r.get("verify", "quick", p_bool)? {
        v.quick = x;
    }
    if let Some(x) = r.get("verify", "cases", p_int)? {
        v.cases = x;
    }
    if let Some(x) = r.get("verify", "exactness_cases", p_int)? {
        v.exactness_cases = x;
    }
    if let Some(x) = r.get("verify", "tolerance", p_f64)? {
        v.tolerance = x;
    }
    if let Some(x) = r.get("verify", "shift", p_ints)? {
        v.shift = x;
    }
    if let Some(x) = r.get("verify", "center", p_rationals)? {
        v.center = x;
    }
    if let Some(x) = r.get("verify", "invariance_t", p_schedule)? {
        v.invariance_schedule = x;
    }
    if let Some(x) = r.get("verify", "invariance_seeds", p_int)? {
        v.invariance_seeds = x;
    }
    if let Some(x) = r.get("verify", "strip_length", p_int)? {
        v.strip_length = x;
    }
    if let Some((line, field)) = r.doc.unused() {
        return Err(ConfigError::Field {
            line,
            field,
            message: "unknown key".into(),
        });
    }
    c.validate()?;
    Ok(c)
}
