//! Discrete surface cell problem as an exact binary min-cut.
//!
//! Unknowns live on unit lattice cells; an edge joins neighbouring cells and
//! pays `g(midpoint, ζ, ν_edge) λ_edge` when its endpoints carry different
//! labels. An edge belongs to a region when its midpoint does (half-open
//! convention), so edge sets of disjoint regions are disjoint. Cells of the
//! region within Chebyshev distance one of its complement, and every cell
//! outside it, are pinned to the jump datum.
//!
//! Labels are restricted to `{0, ζ}`. For jump-independent integrands this is
//! the exact discrete minimum; otherwise it is an upper bound.

pub mod maxflow;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::Rng;

use crate::geometry::{
    make_frame, GeometryError, JumpDatum, Normal, OrientedCube, Rational, RationalDirection,
    Region, DEFAULT_M_CAP,
};
use crate::integrand::{eval_surface, IntegrandError, SurfaceFamily, SurfaceIntegrand};
use crate::medium::{sample_medium, GeneratorKind, MediumError};
use maxflow::{FlowNetwork, FlowStats};

/// Default `log2` of the integer weight scale.
pub const DEFAULT_PRECISION_BITS: u32 = 20;

/// Largest free-cell count accepted by [`brute_force_min`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("region has no free cells")]
    EmptyFreeSet,
    #[error("{0} free cells exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooManyFreeCells(usize),
    #[error("cube side {0} is below the minimum of 4")]
    SideTooSmall(f64),
    #[error("strip length {0} is below the minimum of 16")]
    StripTooShort(u32),
    #[error("edge weight {0} is not a positive finite number")]
    BadWeight(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integrand(#[from] IntegrandError),
    #[error(transparent)]
    Medium(#[from] MediumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "neighborhood", rename_all = "snake_case")]
pub enum Neighborhood {
    N4,
    /// Axis and diagonal edges. The raw length weights are normalised by
    /// `lambda_axis + 2 lambda_diag`, so a flat axis-aligned interface costs one
    /// per unit length in a homogeneous unit medium.
    N8 {
        lambda_axis: f64,
        lambda_diag: f64,
    },
}

impl Neighborhood {
    pub fn n8() -> Self {
        Neighborhood::N8 {
            lambda_axis: 1.0,
            lambda_diag: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    /// Forward offsets and their length weights.
    pub fn offsets(&self) -> Vec<([i64; 2], f64)> {
        match *self {
            Neighborhood::N4 => vec![([1, 0], 1.0), ([0, 1], 1.0)],
            Neighborhood::N8 {
                lambda_axis,
                lambda_diag,
            } => {
                let norm = lambda_axis + 2.0 * lambda_diag;
                let (a, d) = (lambda_axis / norm, lambda_diag / norm);
                vec![([1, 0], a), ([0, 1], a), ([1, 1], d), ([1, -1], d)]
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Neighborhood::N4 => "n4",
            Neighborhood::N8 { .. } => "n8",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutOptions {
    pub neighborhood: Neighborhood,
    /// Weights are rounded to multiples of `2^-precision_bits` before solving.
    pub precision_bits: u32,
}

impl Default for CutOptions {
    fn default() -> Self {
        CutOptions {
            neighborhood: Neighborhood::N4,
            precision_bits: DEFAULT_PRECISION_BITS,
        }
    }
}

impl CutOptions {
    pub fn unit(&self) -> f64 {
        (1u64 << self.precision_bits) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Free(usize),
    /// Pinned to the datum; `true` is the `ζ` side.
    Pinned(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutEdge {
    pub a: Endpoint,
    pub b: Endpoint,
    pub units: i64,
}

/// Binary labelling problem: free cells, weighted edges with at least one
/// free endpoint, and a constant collecting pinned edges with opposite labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutGraph {
    pub free_cells: Vec<[i64; 2]>,
    /// Datum label of each free cell (the flat-interface competitor).
    pub datum_labels: Vec<bool>,
    /// Pinned member cells of the region and their labels.
    pub ring: Vec<([i64; 2], bool)>,
    pub edges: Vec<CutEdge>,
    /// Weights (integer units) of pinned edges whose labels differ.
    pub pinned_cut: Vec<i64>,
    /// Integer units per unit of energy.
    pub unit: f64,
}

impl CutGraph {
    pub fn free_count(&self) -> usize {
        self.free_cells.len()
    }

    pub fn constant_units(&self) -> i64 {
        self.pinned_cut.iter().sum()
    }

    /// Cut weight (integer units) of a labelling of the free cells.
    pub fn cut_units(&self, labels: &[bool]) -> i64 {
        let label = |e: Endpoint| match e {
            Endpoint::Free(i) => labels[i],
            Endpoint::Pinned(l) => l,
        };
        self.constant_units()
            + self
                .edges
                .iter()
                .filter(|e| label(e.a) != label(e.b))
                .map(|e| e.units)
                .sum::<i64>()
    }

    /// Weight of the datum labelling.
    pub fn datum_units(&self) -> i64 {
        self.cut_units(&self.datum_labels)
    }

    pub fn to_value(&self, units: i64) -> f64 {
        units as f64 / self.unit
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCellResult {
    /// Minimum cut weight.
    pub value: f64,
    /// The same value in integer units.
    pub units: i64,
    /// Value divided by the problem's normalising measure.
    pub normalized: f64,
    /// `true` marks free cells on the `ζ` side.
    pub labels: Vec<bool>,
    pub stats: FlowStats,
}

/// Rasterise `region`, pin the ring to `datum`, and build the cut graph.
pub fn assemble_cut_graph(
    g: &SurfaceIntegrand,
    datum: &JumpDatum,
    region: &Region,
    opts: &CutOptions,
) -> Result<CutGraph, SurfaceError> {
    build_cut_graph(g, datum, region, opts, false)
}

/// As [`assemble_cut_graph`], optionally accepting regions without free
/// cells (their value is the pinned constant).
pub(crate) fn build_cut_graph(
    g: &SurfaceIntegrand,
    datum: &JumpDatum,
    region: &Region,
    opts: &CutOptions,
    allow_empty: bool,
) -> Result<CutGraph, SurfaceError> {
    if region.dim() != 2 {
        return Err(GeometryError::Dimension {
            expected: 2,
            got: region.dim(),
        }
        .into());
    }
    let (lo, hi) = region.cell_bounding_box();
    let (w, h) = ((hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize);
    let idx = |x: i64, y: i64| -> Option<usize> {
        if x < lo[0] || x > hi[0] || y < lo[1] || y > hi[1] {
            None
        } else {
            Some((y - lo[1]) as usize * w + (x - lo[0]) as usize)
        }
    };
    let mut member = vec![false; w * h];
    for y in lo[1]..=hi[1] {
        for x in lo[0]..=hi[0] {
            member[idx(x, y).unwrap()] = region.contains_doubled(&[2 * x + 1, 2 * y + 1]);
        }
    }
    let is_member = |x: i64, y: i64| idx(x, y).is_some_and(|i| member[i]);

    let mut free_index = vec![usize::MAX; w * h];
    let mut free_cells = Vec::new();
    let mut datum_labels = Vec::new();
    let mut ring = Vec::new();
    for y in lo[1]..=hi[1] {
        for x in lo[0]..=hi[0] {
            if !is_member(x, y) {
                continue;
            }
            let label = datum.upper_side_doubled(&[2 * x + 1, 2 * y + 1]);
            let interior = (-1..=1).all(|dy| (-1..=1).all(|dx| is_member(x + dx, y + dy)));
            if interior {
                free_index[idx(x, y).unwrap()] = free_cells.len();
                free_cells.push([x, y]);
                datum_labels.push(label);
            } else {
                ring.push(([x, y], label));
            }
        }
    }
    if free_cells.is_empty() && !allow_empty {
        return Err(SurfaceError::EmptyFreeSet);
    }

    let unit = opts.unit();
    let endpoint = |x: i64, y: i64| -> Endpoint {
        match idx(x, y).map(|i| free_index[i]) {
            Some(f) if f != usize::MAX => Endpoint::Free(f),
            _ => Endpoint::Pinned(datum.upper_side_doubled(&[2 * x + 1, 2 * y + 1])),
        }
    };
    let mut edges = Vec::new();
    let mut pinned_cut = Vec::new();
    for ([dx, dy], lambda) in opts.neighborhood.offsets() {
        let len = ((dx * dx + dy * dy) as f64).sqrt();
        let nu_edge = [dx as f64 / len, dy as f64 / len];
        for y in lo[1] - 1..=hi[1] {
            for x in lo[0] - 1..=hi[0] {
                let mid = [2 * x + 1 + dx, 2 * y + 1 + dy];
                if !region.contains_doubled(&mid) {
                    continue;
                }
                let a = endpoint(x, y);
                let b = endpoint(x + dx, y + dy);
                if let (Endpoint::Pinned(la), Endpoint::Pinned(lb)) = (a, b) {
                    if la == lb {
                        continue;
                    }
                }
                let xm = [mid[0] as f64 / 2.0, mid[1] as f64 / 2.0];
                let weight = eval_surface(g, &xm, &datum.zeta, &nu_edge)? * lambda;
                if !(weight > 0.0 && weight.is_finite()) {
                    return Err(SurfaceError::BadWeight(weight));
                }
                let units = (weight * unit).round() as i64;
                match (a, b) {
                    (Endpoint::Pinned(_), Endpoint::Pinned(_)) => pinned_cut.push(units),
                    _ => edges.push(CutEdge { a, b, units }),
                }
            }
        }
    }
    Ok(CutGraph {
        free_cells,
        datum_labels,
        ring,
        edges,
        pinned_cut,
        unit,
    })
}

/// Exact minimum cut by max-flow. Among minimum cuts, the returned labelling
/// is the source-side-minimal one (cells reachable from the `ζ` terminal in
/// the residual graph).
pub fn solve_min_cut(graph: &CutGraph) -> SurfaceCellResult {
    let k = graph.free_count();
    let (s, t) = (k, k + 1);
    let mut net = FlowNetwork::new(k + 2);
    for e in &graph.edges {
        match (e.a, e.b) {
            (Endpoint::Free(u), Endpoint::Free(v)) => net.add_edge(u, v, e.units, e.units),
            (Endpoint::Free(u), Endpoint::Pinned(true))
            | (Endpoint::Pinned(true), Endpoint::Free(u)) => net.add_edge(s, u, e.units, 0),
            (Endpoint::Free(u), Endpoint::Pinned(false))
            | (Endpoint::Pinned(false), Endpoint::Free(u)) => net.add_edge(u, t, e.units, 0),
            (Endpoint::Pinned(_), Endpoint::Pinned(_)) => {}
        }
    }
    let flow = net.max_flow(s, t);
    let side = net.source_side(s);
    let units = graph.constant_units() + flow;
    let value = graph.to_value(units);
    SurfaceCellResult {
        value,
        units,
        normalized: value,
        labels: side[..k].to_vec(),
        stats: net.stats(),
    }
}

/// Minimum cut weight in integer units over all `2^k` labellings.
pub fn brute_force_min_units(graph: &CutGraph) -> Result<i64, SurfaceError> {
    let k = graph.free_count();
    if k > BRUTE_FORCE_LIMIT {
        return Err(SurfaceError::TooManyFreeCells(k));
    }
    // Gray-code walk: flipping one cell only touches its incident edges.
    let mut incident: Vec<Vec<(Endpoint, i64)>> = vec![Vec::new(); k];
    for e in &graph.edges {
        if let Endpoint::Free(u) = e.a {
            incident[u].push((e.b, e.units));
        }
        if let Endpoint::Free(v) = e.b {
            incident[v].push((e.a, e.units));
        }
    }
    let mut labels = vec![false; k];
    let mut current = graph.cut_units(&labels);
    let mut best = current;
    for step in 1u64..(1u64 << k) {
        let i = step.trailing_zeros() as usize;
        let before = labels[i];
        for &(other, units) in &incident[i] {
            let lo = match other {
                Endpoint::Free(j) => labels[j],
                Endpoint::Pinned(l) => l,
            };
            if lo != before {
                current -= units;
            } else {
                current += units;
            }
        }
        labels[i] = !before;
        best = best.min(current);
    }
    Ok(best)
}

pub fn brute_force_min(graph: &CutGraph) -> Result<f64, SurfaceError> {
    Ok(graph.to_value(brute_force_min_units(graph)?))
}

/// Normalised cell value on an oriented cube: min-cut weight over `side^{n-1}`.
pub fn surface_cell_value(
    g: &SurfaceIntegrand,
    datum: &JumpDatum,
    cube: &OrientedCube,
    opts: &CutOptions,
) -> Result<SurfaceCellResult, SurfaceError> {
    let side = crate::geometry::to_f64(&cube.side);
    if side < 4.0 {
        return Err(SurfaceError::SideTooSmall(side));
    }
    let graph = assemble_cut_graph(g, datum, &cube.region(), opts)?;
    let mut res = solve_min_cut(&graph);
    res.normalized = res.value / side.powi(cube.frame.dim() as i32 - 1);
    Ok(res)
}

/// Lattice metric factor `κ(ν)`: min-cut cost per unit length of an interface
/// with normal `ν` in a homogeneous unit medium.
///
/// Measured on a strip of half-width [`STRIP_HALF_WIDTH`] around the line
/// `y·ν = 0`, periodic along the lattice vector `k M_ν R_ν e_1`
/// (`k M_ν ≥ strip_length`), so there are no end effects.
pub fn calibrate_metrication(
    neighborhood: Neighborhood,
    nu: &RationalDirection,
    strip_length: u32,
    precision_bits: u32,
) -> Result<f64, SurfaceError> {
    if strip_length < 16 {
        return Err(SurfaceError::StripTooShort(strip_length));
    }
    if nu.dim() != 2 {
        return Err(GeometryError::Dimension {
            expected: 2,
            got: nu.dim(),
        }
        .into());
    }
    let frame = make_frame(nu, DEFAULT_M_CAP)?;
    let m = frame.scale();
    let periods = (strip_length as i64 + m - 1) / m;
    let tangent = frame.lattice_shift(&[1]);
    let modulus = periods * m * m;
    let nn = nu.numerators();
    let d = nu.denominator();
    // Normal coordinate of the cell center, times 2d.
    let normal2 = |x: i64, y: i64| (2 * x + 1) * nn[0] + (2 * y + 1) * nn[1];
    let half = 2 * d * STRIP_HALF_WIDTH;
    let member = |x: i64, y: i64| normal2(x, y).abs() < half;
    let key = |x: i64, y: i64| {
        (
            (x * tangent[0] + y * tangent[1]).rem_euclid(modulus),
            x * nn[0] + y * nn[1],
        )
    };

    let reach = periods * tangent[0].abs().max(tangent[1].abs()) + STRIP_HALF_WIDTH + 2;
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut free_cells = Vec::new();
    let mut datum_labels = Vec::new();
    let mut ring = Vec::new();
    let mut pinned_of: HashMap<(i64, i64), bool> = HashMap::new();
    for y in -reach..=reach {
        for x in -reach..=reach {
            let along = x * tangent[0] + y * tangent[1];
            if !(0..modulus).contains(&along) || !member(x, y) {
                continue;
            }
            let label = normal2(x, y) >= 0;
            let interior = (-1..=1).all(|dy| (-1..=1).all(|dx| member(x + dx, y + dy)));
            if interior {
                index.insert(key(x, y), free_cells.len());
                free_cells.push([x, y]);
                datum_labels.push(label);
            } else {
                pinned_of.insert(key(x, y), label);
                ring.push(([x, y], label));
            }
        }
    }
    let unit = (1u64 << precision_bits) as f64;
    let endpoint = |x: i64, y: i64| -> Option<Endpoint> {
        let k = key(x, y);
        index
            .get(&k)
            .map(|&i| Endpoint::Free(i))
            .or_else(|| pinned_of.get(&k).map(|&l| Endpoint::Pinned(l)))
    };
    let mut edges = Vec::new();
    let mut pinned_cut = Vec::new();
    let cells: Vec<[i64; 2]> = free_cells
        .iter()
        .copied()
        .chain(ring.iter().map(|(c, _)| *c))
        .collect();
    for ([dx, dy], lambda) in neighborhood.offsets() {
        let units = (lambda * unit).round() as i64;
        for &[x, y] in &cells {
            let (Some(a), Some(b)) = (endpoint(x, y), endpoint(x + dx, y + dy)) else {
                continue;
            };
            match (a, b) {
                (Endpoint::Pinned(la), Endpoint::Pinned(lb)) => {
                    if la != lb {
                        pinned_cut.push(units);
                    }
                }
                _ => edges.push(CutEdge { a, b, units }),
            }
        }
    }
    let graph = CutGraph {
        free_cells,
        datum_labels,
        ring,
        edges,
        pinned_cut,
        unit,
    };
    let res = solve_min_cut(&graph);
    Ok(res.value / (periods * m) as f64)
}

/// A random exactness instance: a `6 × 6` square (`4 × 4` free cells) over a
/// random two-valued medium with integer values in `[1, 5]`. With
/// `integer_weights`, every edge weight is then replaced by a random integer
/// in `[1, 5]` (in weight units).
pub fn random_instance(
    rng: &mut impl Rng,
    neighborhood: Neighborhood,
    integer_weights: bool,
) -> Result<CutGraph, SurfaceError> {
    let alpha = rng.gen_range(1..=5) as f64;
    let beta = rng.gen_range(1..=5) as f64;
    let field = sample_medium(GeneratorKind::iid_cells(alpha, beta, 0.5), rng.gen())?;
    let g = SurfaceIntegrand::new(field, SurfaceFamily::Perimeter)?;
    let frame = crate::geometry::Frame::identity(2);
    let zero = Rational::from_integer(0);
    let cube = OrientedCube::new(vec![zero, zero], Rational::from_integer(6), frame)?;
    let datum = JumpDatum::new(
        vec![zero, zero],
        vec![1.0],
        Normal::Exact(RationalDirection::axis(2, 1)),
    );
    let opts = CutOptions {
        neighborhood,
        ..Default::default()
    };
    let mut graph = assemble_cut_graph(&g, &datum, &cube.region(), &opts)?;
    if integer_weights {
        let unit = graph.unit as i64;
        for e in graph.edges.iter_mut() {
            e.units = rng.gen_range(1..=5) * unit;
        }
        for w in graph.pinned_cut.iter_mut() {
            *w = rng.gen_range(1..=5) * unit;
        }
    }
    Ok(graph)
}

/// Half-width (in cells) of the calibration strip.
pub const STRIP_HALF_WIDTH: i64 = 6;
