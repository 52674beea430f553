//! Polygonal approximations of smooth convex curves and their local
//! equilibrium structure.
//!
//! An equidistant partition of the parameter domain turns a curve into a
//! polygon. Distance from a reference point `o` is piecewise smooth on the
//! polygon; its strict local minima sit at perpendicular feet inside edges
//! (stable) and its strict local maxima at vertices (unstable). The module
//! enumerates both, groups them into flocks, and evaluates the limiting
//! per-equilibrium index formulas, including the expected stable count on
//! a randomly meshed arc which is checked here by direct simulation.

use crate::curve::{CurveError, PlaneCurve, SmoothCurve};
use crate::fit::Estimate;
use crate::geom::Vec2;
use crate::rng::stream;
use crate::tol;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Edge,
    Vertex,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Edge => write!(f, "edge"),
            Feature::Vertex => write!(f, "vertex"),
        }
    }
}

/// A classification landed inside the tie band around zero, so the
/// configuration cannot be resolved generically. Callers decide the
/// tie-break, typically by re-running with a perturbed offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("inner product or distance tie within the nongeneric band")]
pub struct TieBand;

#[derive(Debug, thiserror::Error)]
pub enum DiscretizeError {
    #[error("partition too coarse: got {n} vertices")]
    TooCoarse { n: usize },
    #[error("nongeneric configuration at {feature} {index}")]
    Nongeneric { feature: Feature, index: usize },
    #[error("reference point is not inside the polygon")]
    NotInterior,
    #[error("|1 + kappa rho| = {lambda:.3e}: reference point is on the caustic")]
    OnEvolute { lambda: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Equidistant polygonal sample of a curve.
///
/// Vertex `i` sits at parameter `lo + (i + offset) * delta`. A closed curve
/// yields a closed polygon with `n` edges; an open curve yields a chain with
/// `n - 1` edges.
#[derive(Debug, Clone)]
pub struct Polygonization {
    pub vertices: Vec<Vec2>,
    pub params: Vec<f64>,
    pub delta: f64,
    pub offset: f64,
    pub closed: bool,
    pub scale: f64,
}

impl Polygonization {
    /// Offset-adjusted index of vertex i; all indices are congruent mod 1.
    pub fn index(&self, i: usize) -> f64 {
        i as f64 + self.offset
    }

    pub fn edge_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }
}

/// Samples `curve` at the `n`-vertex equidistant partition shifted by
/// `offset` (a fraction of one step, in [0, 1)).
pub fn partition<C: PlaneCurve + ?Sized>(
    curve: &C,
    n: usize,
    offset: f64,
) -> Result<Polygonization, DiscretizeError> {
    if !(0.0..1.0).contains(&offset) {
        return Err(DiscretizeError::Parameter(format!(
            "offset {offset} outside [0, 1)"
        )));
    }
    let closed = curve.is_closed();
    if (closed && n < 3) || (!closed && n < 2) {
        return Err(DiscretizeError::TooCoarse { n });
    }
    let (lo, _) = curve.domain();
    let delta = curve.span() / n as f64;
    let mut params = Vec::with_capacity(n);
    let mut vertices = Vec::with_capacity(n);
    for i in 0..n {
        let tau = lo + (i as f64 + offset) * delta;
        params.push(tau);
        vertices.push(curve.point(tau));
    }
    Ok(Polygonization {
        vertices,
        params,
        delta,
        offset,
        closed,
        scale: curve.scale(),
    })
}

fn edge_test(o: Vec2, p: Vec2, q: Vec2, band: f64) -> Result<Option<Vec2>, TieBand> {
    let d = q - p;
    let a = (p - o).dot(d);
    let b = (q - o).dot(d);
    if a.abs() < band || b.abs() < band {
        return Err(TieBand);
    }
    if a < 0.0 && b > 0.0 {
        // b - a = |q - p|^2, so -a/(b - a) is the foot's edge parameter.
        Ok(Some(p + d * (-a / (b - a))))
    } else {
        Ok(None)
    }
}

fn vertex_test(o: Vec2, prev: Vec2, v: Vec2, next: Vec2, band: f64) -> Result<bool, TieBand> {
    let a = (v - o).dot(next - v);
    let b = (v - o).dot(prev - v);
    if a.abs() < band || b.abs() < band {
        return Err(TieBand);
    }
    Ok(a < 0.0 && b < 0.0)
}

/// Foot of the perpendicular from `o` onto segment `[p, q]`, if it falls
/// strictly inside the segment; such a foot is a stable equilibrium of the
/// distance from `o`. Ties within the nongeneric band are refused.
pub fn edge_equilibrium(o: Vec2, p: Vec2, q: Vec2) -> Result<Option<Vec2>, TieBand> {
    let scale = (p - o).norm().max((q - o).norm());
    edge_test(o, p, q, tol::EDGE_TIE_BAND * scale * scale)
}

/// True when the distance from `o` has a strict local maximum at `v`, i.e.
/// it decreases along both incident edges.
pub fn vertex_equilibrium(o: Vec2, prev: Vec2, v: Vec2, next: Vec2) -> Result<bool, TieBand> {
    let scale = (v - o).norm().max((prev - o).norm()).max((next - o).norm());
    vertex_test(o, prev, v, next, tol::EDGE_TIE_BAND * scale * scale)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EdgeEquilibrium {
    /// Edge (i, i+1) carrying the foot.
    pub edge: usize,
    pub foot: Vec2,
    pub dist: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VertexEquilibrium {
    pub vertex: usize,
    pub point: Vec2,
    pub dist: f64,
}

/// All local equilibria of the distance from a reference point on a polygon.
#[derive(Debug, Clone, Serialize)]
pub struct LocalEquilibriumSet {
    pub stable_edges: Vec<EdgeEquilibrium>,
    pub unstable_vertices: Vec<VertexEquilibrium>,
    /// Vertex count of the scanned polygon.
    pub n: usize,
    pub closed: bool,
}

impl LocalEquilibriumSet {
    pub fn stable(&self) -> usize {
        self.stable_edges.len()
    }

    pub fn unstable(&self) -> usize {
        self.unstable_vertices.len()
    }

    pub fn total(&self) -> usize {
        self.stable() + self.unstable()
    }

    /// Feature positions in index units: vertex i at i, edge i at i + 1/2.
    fn ordered(&self) -> Vec<(f64, bool, Vec2)> {
        let mut all: Vec<(f64, bool, Vec2)> = self
            .stable_edges
            .iter()
            .map(|e| (e.edge as f64 + 0.5, true, e.foot))
            .chain(
                self.unstable_vertices
                    .iter()
                    .map(|v| (v.vertex as f64, false, v.point)),
            )
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all
    }

    /// Stable and unstable equilibria strictly alternate along the polygon;
    /// on a closed polygon this forces equal counts.
    pub fn alternation_holds(&self) -> bool {
        let all = self.ordered();
        if self.closed && self.stable() != self.unstable() {
            return false;
        }
        let m = all.len();
        let pairs = if self.closed { m } else { m.saturating_sub(1) };
        for j in 0..pairs {
            if all[j].1 == all[(j + 1) % m].1 {
                return false;
            }
        }
        true
    }

    /// CSV rows in polygon order: feature_type,index,x,y,stability.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_type,index,x,y,stability\n");
        for (pos, stable, point) in self.ordered() {
            if stable {
                out.push_str(&format!(
                    "edge,{},{:.16e},{:.16e},S\n",
                    pos.floor() as usize,
                    point.x,
                    point.y
                ));
            } else {
                out.push_str(&format!(
                    "vertex,{},{:.16e},{:.16e},U\n",
                    pos as usize, point.x, point.y
                ));
            }
        }
        out
    }
}

fn point_in_polygon(pts: &[Vec2], o: Vec2) -> bool {
    // Even-odd ray crossing along +x.
    let mut inside = false;
    let n = pts.len();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        if (p.y > o.y) != (q.y > o.y) {
            let x = p.x + (o.y - p.y) / (q.y - p.y) * (q.x - p.x);
            if x > o.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Scans every edge and vertex of `poly` for local equilibria of the
/// distance from `o`.
pub fn count_local(poly: &Polygonization, o: Vec2) -> Result<LocalEquilibriumSet, DiscretizeError> {
    count_local_points(&poly.vertices, poly.closed, o, poly.scale)
}

/// Worker behind [`count_local`] for raw point lists (evolving polygons,
/// random chains). `scale` feeds the nongeneric tie bands: a classifying
/// inner product inside its band means a foot sits on a shared vertex and
/// the feature split is ambiguous, so that signals rather than guessing.
/// Exactly equidistant neighbors are fine on their own; their products are
/// large and decisive (a centered square classifies cleanly). Endpoints of
/// an open chain are never classified; their one-sided test is undefined.
pub fn count_local_points(
    points: &[Vec2],
    closed: bool,
    o: Vec2,
    scale: f64,
) -> Result<LocalEquilibriumSet, DiscretizeError> {
    let n = points.len();
    if n < if closed { 3 } else { 2 } {
        return Err(DiscretizeError::TooCoarse { n });
    }
    if closed && !point_in_polygon(points, o) {
        return Err(DiscretizeError::NotInterior);
    }
    let band = tol::EDGE_TIE_BAND * scale * scale;
    let nongeneric = |feature, index| DiscretizeError::Nongeneric { feature, index };

    let mut stable_edges = Vec::new();
    let mut unstable_vertices = Vec::new();
    let edges = if closed { n } else { n - 1 };
    for i in 0..edges {
        let p = points[i];
        let q = points[(i + 1) % n];
        match edge_test(o, p, q, band) {
            Ok(Some(foot)) => stable_edges.push(EdgeEquilibrium {
                edge: i,
                foot,
                dist: (foot - o).norm(),
            }),
            Ok(None) => {}
            Err(TieBand) => return Err(nongeneric(Feature::Edge, i)),
        }
    }
    let vertex_range = if closed { 0..n } else { 1..n - 1 };
    for i in vertex_range {
        let prev = points[(i + n - 1) % n];
        let v = points[i];
        let next = points[(i + 1) % n];
        match vertex_test(o, prev, v, next, band) {
            Ok(true) => unstable_vertices.push(VertexEquilibrium {
                vertex: i,
                point: v,
                dist: (v - o).norm(),
            }),
            Ok(false) => {}
            Err(TieBand) => return Err(nongeneric(Feature::Vertex, i)),
        }
    }
    Ok(LocalEquilibriumSet {
        stable_edges,
        unstable_vertices,
        n,
        closed,
    })
}

/// A maximal run of equilibria with no long gap, in index units
/// (vertex i at i, edge i at i + 1/2).
#[derive(Debug, Clone, Serialize)]
pub struct Flock {
    pub lo_index: f64,
    pub hi_index: f64,
    pub stable: usize,
    pub unstable: usize,
    pub count: usize,
    /// Mean of the member points.
    pub center: Vec2,
    /// Largest pairwise distance between member points.
    pub diameter: f64,
}

/// Groups the equilibria of `set` into flocks. Runs separated by a gap of
/// more than max(3, n/64) index units split; for fine enough partitions
/// each flock surrounds exactly one equilibrium of the smooth curve.
pub fn flocks(set: &LocalEquilibriumSet) -> Vec<Flock> {
    let all = set.ordered();
    if all.is_empty() {
        return Vec::new();
    }
    let gap_limit = 3.0_f64.max(set.n as f64 / 64.0);
    let mut groups: Vec<Vec<(f64, bool, Vec2)>> = vec![vec![all[0]]];
    for &item in &all[1..] {
        let last = groups.last().unwrap().last().unwrap().0;
        if item.0 - last > gap_limit {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(item);
    }
    // A closed polygon may wrap one flock across index 0.
    if set.closed && groups.len() > 1 {
        let wrap = all[0].0 + set.n as f64 - all.last().unwrap().0;
        if wrap <= gap_limit {
            let mut tail = groups.pop().unwrap();
            let n = set.n as f64;
            for item in &mut tail {
                item.0 -= n;
            }
            tail.extend(groups[0].drain(..));
            groups[0] = tail;
        }
    }
    groups
        .into_iter()
        .map(|members| {
            let stable = members.iter().filter(|m| m.1).count();
            let mut center = Vec2 { x: 0.0, y: 0.0 };
            for m in &members {
                center = center + m.2;
            }
            center = center / members.len() as f64;
            let mut diameter = 0.0_f64;
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    diameter = diameter.max((members[i].2 - members[j].2).norm());
                }
            }
            Flock {
                lo_index: members.first().unwrap().0,
                hi_index: members.last().unwrap().0,
                stable,
                unstable: members.len() - stable,
                count: members.len(),
                center,
                diameter,
            }
        })
        .collect()
}

/// Limiting per-equilibrium ("imaginary") multiplicities of a smooth
/// equilibrium under vanishing mesh size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImaginaryIndex2D {
    pub s0: f64,
    pub u0: f64,
    pub kappa_rho: f64,
    pub lambda: f64,
}

/// Evaluates S0 = 1/|1 + kappa rho| and U0 = |kappa rho|/|1 + kappa rho|
/// for a convex-curve equilibrium with curvature `kappa` (negative by the
/// outward-normal convention) at distance `rho` from the reference point.
pub fn imaginary_index(kappa: f64, rho: f64) -> Result<ImaginaryIndex2D, DiscretizeError> {
    if !(kappa < 0.0 && rho > 0.0) {
        return Err(DiscretizeError::Parameter(format!(
            "need kappa < 0 and rho > 0, got kappa = {kappa}, rho = {rho}"
        )));
    }
    let kappa_rho = kappa * rho;
    let lambda = (1.0 + kappa_rho).abs();
    if lambda < tol::DEGENERACY_BAND {
        return Err(DiscretizeError::OnEvolute { lambda });
    }
    Ok(ImaginaryIndex2D {
        s0: 1.0 / lambda,
        u0: kappa_rho.abs() / lambda,
        kappa_rho,
        lambda,
    })
}

/// Which exponent closes the expected-count formula. The derivation's final
/// step gives n - 1 segments for n sampled points, which is what the
/// simulation below confirms; the alternative with exponent n is kept for
/// side-by-side reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpectationVariant {
    SegmentCount,
    PointCount,
}

/// Expected number of stable equilibria on a chain of n points meshed
/// uniformly at random across one nondegenerate equilibrium, in the fine
/// limit: (1/lambda)(1 - (1 + lambda)^-(n-1)).
pub fn random_mesh_expectation(lambda: f64, n: usize) -> f64 {
    random_mesh_expectation_variant(lambda, n, ExpectationVariant::SegmentCount)
}

pub fn random_mesh_expectation_variant(
    lambda: f64,
    n: usize,
    variant: ExpectationVariant,
) -> f64 {
    assert!(lambda > 0.0 && n >= 2, "need lambda > 0 and n >= 2");
    let e = match variant {
        ExpectationVariant::SegmentCount => (n - 1) as f64,
        ExpectationVariant::PointCount => n as f64,
    };
    // (1 - (1+lambda)^-e)/lambda, stable for small lambda.
    -(-e * lambda.ln_1p()).exp_m1() / lambda
}

/// Outcome of [`monte_carlo_random_mesh`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RandomMeshTrials {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl RandomMeshTrials {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr,
        }
    }
}

/// Samples n parameters uniformly from [-delta, delta] per trial, chains
/// the curve points in sorted order and counts stable edge equilibria of
/// the distance from `o` with strict sign tests (ties have probability
/// zero). Trials use independent derived substreams of `seed`, so the
/// result does not depend on how they are distributed across threads.
pub fn monte_carlo_random_mesh(
    curve: &SmoothCurve,
    o: Vec2,
    n: usize,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<RandomMeshTrials, DiscretizeError> {
    if n < 2 {
        return Err(DiscretizeError::Parameter(format!(
            "need at least 2 points per chain, got {n}"
        )));
    }
    if trials == 0 {
        return Err(DiscretizeError::Parameter("need at least one trial".into()));
    }
    let (lo, hi) = curve.domain();
    let half_span = 0.5 * curve.span();
    let fits = if curve.is_closed() {
        delta > 0.0 && delta <= half_span
    } else {
        delta > 0.0 && -delta > lo && delta < hi
    };
    if !fits {
        return Err(DiscretizeError::Parameter(format!(
            "sampling half-width {delta} does not fit the parameter domain"
        )));
    }

    let (sum, sumsq) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream(seed, trial);
            let mut taus: Vec<f64> = (0..n)
                .map(|_| delta * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            taus.sort_unstable_by(f64::total_cmp);
            let mut count = 0u64;
            let mut p = curve.point(taus[0]);
            for &tau in &taus[1..] {
                let q = curve.point(tau);
                let d = q - p;
                if (p - o).dot(d) < 0.0 && (q - o).dot(d) > 0.0 {
                    count += 1;
                }
                p = q;
            }
            (count, count * count)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let t = trials as f64;
    let mean = sum as f64 / t;
    let stderr = if trials > 1 {
        let var = (sumsq as f64 - t * mean * mean) / (t - 1.0);
        (var.max(0.0) / t).sqrt()
    } else {
        0.0
    };
    Ok(RandomMeshTrials {
        mean,
        stderr,
        trials,
        seed,
    })
}

/// Counts strict local minima and maxima of an equidistantly sampled
/// function from its values alone; `closed` compares cyclically, otherwise
/// only interior samples are tested. Equal consecutive values defeat the
/// strict comparisons and signal as nongeneric.
pub fn grid_recover_1d(values: &[f64], closed: bool) -> Result<(usize, usize), DiscretizeError> {
    let n = values.len();
    let pairs = if closed { n } else { n.saturating_sub(1) };
    for i in 0..pairs {
        if values[i] == values[(i + 1) % n] {
            return Err(DiscretizeError::Nongeneric {
                feature: Feature::Edge,
                index: i,
            });
        }
    }
    let mut minima = 0;
    let mut maxima = 0;
    let range = if closed { 0..n } else { 1..n.saturating_sub(1) };
    for i in range {
        let prev = values[(i + n - 1) % n];
        let next = values[(i + 1) % n];
        let v = values[i];
        if v < prev.min(next) {
            minima += 1;
        } else if v > prev.max(next) {
            maxima += 1;
        }
    }
    Ok((minima, maxima))
}
