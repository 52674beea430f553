//! The caustic of a convex curve and what happens when the reference point
//! crosses it.
//!
//! The centers of curvature trace the evolute; the normal count N jumps by
//! two exactly when the reference point crosses it transversely at a general
//! point. This module samples the evolute with its cusps, classifies which
//! side of a local arc a query point lies on, detects and types crossings
//! along a trajectory, rebuilds N(t) from the event log, and builds the
//! oriented normal-line arrangement that plays the evolute's role for a
//! polygon.

use crate::curve::{
    classify_evolute_point, curvature_derivative, evolute_point, global_equilibria_with,
    CurveError, PlaneCurve, SmoothCurve,
};
use crate::geom::{v2, Vec2};
use crate::tol;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum EventError {
    #[error("parameter {tau} is within the cusp exclusion distance")]
    CuspPoint { tau: f64 },
    #[error("count jumped by {jump} at t = {t}: nontransverse or degenerate crossing")]
    NontransverseOrDegenerate { t: f64, jump: i64 },
    #[error("event log would drive the count below 2 at t = {t}")]
    InconsistentLog { t: f64 },
    #[error("curvature never varies: the evolute degenerates to a point")]
    ConstantCurvature,
    #[error("evolute is locally flat near parameter {tau}")]
    LocallyFlat { tau: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Sampled evolute of a curve together with its cusp parameters.
#[derive(Debug, Clone)]
pub struct EvoluteCurve {
    pub taus: Vec<f64>,
    pub points: Vec<Vec2>,
    pub cusps: Vec<f64>,
    pub closed: bool,
    pub scale: f64,
    span: f64,
    lo: f64,
}

/// Samples the evolute at `samples` parameters and locates the cusps, which
/// sit exactly where the curvature derivative changes sign.
pub fn build_evolute(curve: &SmoothCurve, samples: usize) -> Result<EvoluteCurve, EventError> {
    if samples < 16 {
        return Err(EventError::Parameter(format!(
            "need at least 16 evolute samples, got {samples}"
        )));
    }
    let (lo, _) = curve.domain();
    let span = curve.span();
    let closed = curve.is_closed();
    let scale = curve.scale();
    let m = samples;
    let tau_at = |i: usize| {
        if closed {
            lo + span * i as f64 / m as f64
        } else {
            lo + span * i as f64 / (m - 1) as f64
        }
    };
    let mut taus = Vec::with_capacity(m);
    let mut points = Vec::with_capacity(m);
    let mut kps = Vec::with_capacity(m);
    for i in 0..m {
        let tau = tau_at(i);
        taus.push(tau);
        points.push(evolute_point(curve, tau)?);
        kps.push(curvature_derivative(curve, tau)?);
    }
    let kp_peak = kps.iter().fold(0.0_f64, |a, k| a.max(k.abs()));
    if kp_peak * span * scale < 1e-9 {
        return Err(EventError::ConstantCurvature);
    }

    let mut cusps = Vec::new();
    let brackets = if closed { m } else { m - 1 };
    for i in 0..brackets {
        let (ka, kb) = (kps[i], kps[(i + 1) % m]);
        if ka == 0.0 {
            cusps.push(taus[i]);
            continue;
        }
        if ka.signum() == kb.signum() || kb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (taus[i], tau_at(i + 1), ka);
        while b - a > tol::EQ_PARAM_REL * span {
            let mid = 0.5 * (a + b);
            let fm = curvature_derivative(curve, mid)?;
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        let cusp = 0.5 * (a + b);
        classify_evolute_point(curve, cusp)?;
        cusps.push(cusp);
    }
    Ok(EvoluteCurve {
        taus,
        points,
        cusps,
        closed,
        scale,
        span,
        lo,
    })
}

impl EvoluteCurve {
    /// Cyclic parameter distance from tau to the nearest cusp.
    pub fn cusp_distance(&self, tau: f64) -> f64 {
        self.cusps
            .iter()
            .map(|&c| {
                let mut d = (tau - c).abs();
                if self.closed {
                    d = d.min(self.span - d);
                }
                d
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn nearest_sample(&self, tau: f64) -> usize {
        let m = self.taus.len();
        let steps = if self.closed { m } else { m - 1 };
        let raw = (tau - self.lo) / self.span * steps as f64;
        if self.closed {
            (raw.round() as i64).rem_euclid(m as i64) as usize
        } else {
            (raw.round().max(0.0) as usize).min(m - 1)
        }
    }

    fn window(&self, center: usize) -> [Vec2; 5] {
        let m = self.taus.len();
        let mut out = [v2(0.0, 0.0); 5];
        if self.closed {
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = self.points[(center + m + k - 2) % m];
            }
        } else {
            let start = center.saturating_sub(2).min(m - 5);
            for (k, slot) in out.iter_mut().enumerate() {
                *slot = self.points[start + k];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// The locally bounded, convex region: the side holding the arc's
    /// center of curvature. Two fewer normals pass through here.
    Convex,
    /// The outside of the local bowl; normals through a point here gain a
    /// pair when it crosses onto the other side.
    Concave,
    OnCurve,
}

/// Residual of `q` against the osculating parabola of the evolute arc near
/// `tau0`, fitted to a 5-sample window, plus the quadratic coefficient whose
/// sign points at the arc's center of curvature.
fn parabola_residual(ev: &EvoluteCurve, tau0: f64, q: Vec2) -> Result<(f64, f64), EventError> {
    if ev.cusp_distance(tau0) < tol::CUSP_PARAM_DIST {
        return Err(EventError::CuspPoint { tau: tau0 });
    }
    let i = ev.nearest_sample(tau0);
    let w = ev.window(i);
    let origin = w[2];
    let t = (w[3] - w[1]).normalized();
    let n = t.perp();
    // Least squares v = a u + b u^2 over the window.
    let (mut s20, mut s30, mut s40, mut s1v, mut s2v) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &w {
        let u = (*p - origin).dot(t);
        let v = (*p - origin).dot(n);
        s20 += u * u;
        s30 += u * u * u;
        s40 += u * u * u * u;
        s1v += u * v;
        s2v += u * u * v;
    }
    let det = s20 * s40 - s30 * s30;
    if det.abs() < 1e-30 {
        return Err(EventError::LocallyFlat { tau: tau0 });
    }
    let a = (s40 * s1v - s30 * s2v) / det;
    let b = (s20 * s2v - s30 * s1v) / det;
    let u_span = (w[4] - w[0]).dot(t).abs();
    if (b * u_span * u_span).abs() < 1e-12 * ev.scale {
        return Err(EventError::LocallyFlat { tau: tau0 });
    }
    let uq = (q - origin).dot(t);
    let vq = (q - origin).dot(n);
    Ok((vq - a * uq - b * uq * uq, b))
}

/// Classifies `q` against the evolute arc near parameter `tau0` by its
/// residual from the local osculating parabola fitted to a 5-sample window.
pub fn side_of_evolute(ev: &EvoluteCurve, tau0: f64, q: Vec2) -> Result<Side, EventError> {
    let (resid, b) = parabola_residual(ev, tau0, q)?;
    if resid.abs() < tol::EVOLUTE_ON_CURVE * ev.scale {
        Ok(Side::OnCurve)
    } else if resid.signum() == b.signum() {
        // Offset toward the center of curvature: inside the local bowl.
        Ok(Side::Convex)
    } else {
        Ok(Side::Concave)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// The count rises by two: the reference point left the convex side.
    Creation,
    /// The count drops by two.
    Annihilation,
    /// Jump localized within the cusp exclusion zone; excluded from
    /// creation/annihilation bookkeeping.
    Degenerate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingEvent {
    pub t_star: f64,
    /// Curve parameter whose evolute point the trajectory crossed.
    pub tau0: f64,
    pub kind: EventKind,
    pub side_before: Option<Side>,
    pub side_after: Option<Side>,
}

fn refine_jumps(
    count: &impl Fn(f64) -> Result<usize, EventError>,
    ta: f64,
    na: usize,
    tb: f64,
    nb: usize,
    tol_t: f64,
    out: &mut Vec<(f64, f64, i64)>,
) -> Result<(), EventError> {
    if tb - ta <= tol_t {
        out.push((ta, tb, nb as i64 - na as i64));
        return Ok(());
    }
    let tm = 0.5 * (ta + tb);
    let nm = count(tm)?;
    if nm != na {
        refine_jumps(count, ta, na, tm, nm, tol_t, out)?;
    }
    if nm != nb {
        refine_jumps(count, tm, nm, tb, nb, tol_t, out)?;
    }
    Ok(())
}

/// Nearest curve parameter whose evolute point is closest to `target`,
/// found by a sample scan plus golden-section refinement.
fn nearest_evolute_param(curve: &SmoothCurve, ev: &EvoluteCurve, target: Vec2) -> f64 {
    let m = ev.points.len();
    let best = (0..m)
        .min_by(|&i, &j| {
            (ev.points[i] - target)
                .norm2()
                .total_cmp(&(ev.points[j] - target).norm2())
        })
        .unwrap();
    let h = ev.span / if ev.closed { m as f64 } else { (m - 1) as f64 };
    let (mut a, mut b) = (ev.taus[best] - h, ev.taus[best] + h);
    if !ev.closed {
        a = a.max(ev.lo);
        b = b.min(ev.lo + ev.span);
    }
    let d = |tau: f64| {
        evolute_point(curve, tau)
            .map(|p| (p - target).norm2())
            .unwrap_or(f64::INFINITY)
    };
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (d(x1), d(x2));
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = d(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = d(x2);
        }
    }
    let tau = 0.5 * (a + b);
    if ev.closed {
        ev.lo + (tau - ev.lo).rem_euclid(ev.span)
    } else {
        tau
    }
}

/// Walks outward from the refined bracket, doubling the standoff until the
/// trajectory point classifies confidently off the arc. The bisected jump
/// time tracks where the count flips numerically, which sits a small shell
/// away from the true tangency, so verdicts inside SIDE_MIN_RESID of the
/// fitted parabola are not trusted.
fn side_at_standoff(
    ev: &EvoluteCurve,
    tau0: f64,
    o_at: &(impl Fn(f64) -> Vec2 + Sync),
    t_star: f64,
    width: f64,
    direction: f64,
    t_min: f64,
    t_max: f64,
) -> Option<Side> {
    let mut h = width.max(1e-15);
    for _ in 0..64 {
        let t = t_star + direction * h;
        if t < t_min || t > t_max {
            return None;
        }
        match parabola_residual(ev, tau0, o_at(t)) {
            Ok((resid, _)) if resid.abs() < tol::SIDE_MIN_RESID * ev.scale => h *= 2.0,
            Ok((resid, b)) => {
                return Some(if resid.signum() == b.signum() {
                    Side::Convex
                } else {
                    Side::Concave
                })
            }
            Err(_) => return None,
        }
    }
    None
}

/// Locates every parameter time where the equilibrium count of
/// `curve_at(t)` seen from `o_at(t)` jumps between consecutive grid times,
/// bisects each jump down to a relative time tolerance, types it by the
/// jump sign and cross-checks the types against the side classification
/// just before and after. Jumps landing within the cusp exclusion distance
/// come back as [`EventKind::Degenerate`] with no side information.
pub fn detect_crossings(
    curve_at: &(impl Fn(f64) -> SmoothCurve + Sync),
    o_at: &(impl Fn(f64) -> Vec2 + Sync),
    t_grid: &[f64],
) -> Result<Vec<CrossingEvent>, EventError> {
    if t_grid.len() < 2 {
        return Err(EventError::Parameter("need at least two grid times".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EventError::Parameter(
            "grid times must strictly increase".into(),
        ));
    }
    let count = |t: f64| -> Result<usize, EventError> {
        Ok(global_equilibria_with(&curve_at(t), o_at(t), tol::EVENT_SCAN_SAMPLES)?.len())
    };
    let t_lo = t_grid[0];
    let t_hi = *t_grid.last().unwrap();
    let tol_t = tol::EVENT_TIME_REL * (t_hi - t_lo);

    let counts: Vec<usize> = t_grid
        .par_iter()
        .map(|&t| count(t))
        .collect::<Result<_, _>>()?;
    let jumps: Vec<Vec<(f64, f64, i64)>> = (0..t_grid.len() - 1)
        .into_par_iter()
        .map(|i| {
            let mut cell = Vec::new();
            if counts[i] != counts[i + 1] {
                refine_jumps(
                    &count,
                    t_grid[i],
                    counts[i],
                    t_grid[i + 1],
                    counts[i + 1],
                    tol_t,
                    &mut cell,
                )?;
            }
            Ok(cell)
        })
        .collect::<Result<_, EventError>>()?;

    let mut events = Vec::new();
    for (ta, tb, jump) in jumps.into_iter().flatten() {
        let t_star = 0.5 * (ta + tb);
        let curve = curve_at(t_star);
        let ev = build_evolute(&curve, 2048)?;
        let tau0 = nearest_evolute_param(&curve, &ev, o_at(t_star));
        if ev.cusp_distance(tau0) < tol::CUSP_PARAM_DIST {
            events.push(CrossingEvent {
                t_star,
                tau0,
                kind: EventKind::Degenerate,
                side_before: None,
                side_after: None,
            });
            continue;
        }
        if jump.abs() != 2 {
            return Err(EventError::NontransverseOrDegenerate { t: t_star, jump });
        }
        let kind = if jump > 0 {
            EventKind::Creation
        } else {
            EventKind::Annihilation
        };
        let width = (tb - ta).max(tol_t);
        let side_before = side_at_standoff(&ev, tau0, o_at, t_star, width, -1.0, t_lo, t_hi);
        let side_after = side_at_standoff(&ev, tau0, o_at, t_star, width, 1.0, t_lo, t_hi);
        if let (Some(sb), Some(sa)) = (side_before, side_after) {
            let consistent = match kind {
                EventKind::Creation => sb == Side::Convex && sa == Side::Concave,
                EventKind::Annihilation => sb == Side::Concave && sa == Side::Convex,
                EventKind::Degenerate => true,
            };
            if !consistent {
                return Err(EventError::NontransverseOrDegenerate { t: t_star, jump });
            }
        }
        events.push(CrossingEvent {
            t_star,
            tau0,
            kind,
            side_before,
            side_after,
        });
    }
    events.sort_by(|a, b| a.t_star.total_cmp(&b.t_star));
    Ok(events)
}

/// Piecewise constant count over time: `initial` before the first step,
/// then the value attached to each step time.
#[derive(Debug, Clone, Serialize)]
pub struct StepFunction {
    pub initial: usize,
    pub steps: Vec<(f64, usize)>,
}

impl StepFunction {
    pub fn value_at(&self, t: f64) -> usize {
        self.steps
            .iter()
            .rev()
            .find(|(ts, _)| *ts <= t)
            .map(|(_, v)| *v)
            .unwrap_or(self.initial)
    }

    pub fn final_value(&self) -> usize {
        self.steps.last().map(|(_, v)| *v).unwrap_or(self.initial)
    }
}

/// Replays an event log: +2 per creation, -2 per annihilation, degenerate
/// entries skipped. A closed convex curve always retains a nearest and a
/// farthest point, so any drop below 2 flags the log as inconsistent.
pub fn reconstruct_n(n0: usize, events: &[CrossingEvent]) -> Result<StepFunction, EventError> {
    if n0 < 2 {
        return Err(EventError::Parameter(format!(
            "initial count {n0} is below 2"
        )));
    }
    if events.windows(2).any(|w| w[1].t_star < w[0].t_star) {
        return Err(EventError::Parameter("events are not sorted by time".into()));
    }
    let mut n = n0 as i64;
    let mut steps = Vec::new();
    for e in events {
        match e.kind {
            EventKind::Creation => n += 2,
            EventKind::Annihilation => n -= 2,
            EventKind::Degenerate => continue,
        }
        if n < 2 {
            return Err(EventError::InconsistentLog { t: e.t_star });
        }
        steps.push((e.t_star, n as usize));
    }
    Ok(StepFunction {
        initial: n0,
        steps,
    })
}

#[derive(Serialize)]
struct EventRecord {
    t: f64,
    tau: f64,
    kind: &'static str,
}

/// One JSON object per line: {"t": ..., "tau": ..., "kind": "C"|"A"|"degenerate"}.
pub fn event_log_jsonl(events: &[CrossingEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let record = EventRecord {
            t: e.t_star,
            tau: e.tau0,
            kind: match e.kind {
                EventKind::Creation => "C",
                EventKind::Annihilation => "A",
                EventKind::Degenerate => "degenerate",
            },
        };
        out.push_str(&serde_json::to_string(&record).expect("plain floats serialize"));
        out.push('\n');
    }
    out
}

/// One oriented perpendicular in the polygon's normal-line arrangement.
///
/// The line runs through `anchor` (a vertex) perpendicular to its `edge`.
/// Crossing it from right to left (relative to `dir`) activates the edge's
/// sign condition at that vertex: the edge equilibrium always toggles, and
/// the vertex equilibrium toggles too when the crossing point lies on the
/// half of the line with `<anchor - x, other_neighbor - anchor> < 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalLine {
    pub anchor: Vec2,
    pub dir: Vec2,
    pub edge: usize,
    pub vertex: usize,
    other_neighbor: Vec2,
}

/// The 2n-line arrangement that controls how the local equilibrium count of
/// a closed polygon changes as the reference point moves.
#[derive(Debug, Clone)]
pub struct PolygonEvolute {
    pub lines: Vec<NormalLine>,
}

pub fn polygon_evolute(points: &[Vec2]) -> Result<PolygonEvolute, EventError> {
    let n = points.len();
    if n < 3 {
        return Err(EventError::Parameter(format!(
            "need a closed polygon with at least 3 vertices, got {n}"
        )));
    }
    let mut lines = Vec::with_capacity(2 * n);
    for e in 0..n {
        let j = (e + 1) % n;
        for (vertex, other) in [(e, j), (j, e)] {
            let v = points[vertex];
            let w = points[other];
            let d = w - v;
            // Clockwise quarter turn puts the activating side on the left.
            let dir = v2(d.y, -d.x).normalized();
            let other_neighbor = if other == j {
                points[(vertex + n - 1) % n]
            } else {
                points[(vertex + 1) % n]
            };
            lines.push(NormalLine {
                anchor: v,
                dir,
                edge: e,
                vertex,
                other_neighbor,
            });
        }
    }
    Ok(PolygonEvolute { lines })
}

impl PolygonEvolute {
    /// Predicted change of the local equilibrium count when the reference
    /// point moves from `a` to `b`: summed over every line the segment
    /// crosses, +1 right-to-left and -1 left-to-right, doubled when the
    /// vertex condition toggles along with the edge condition.
    pub fn crossing_delta(&self, a: Vec2, b: Vec2) -> i64 {
        let mut total = 0i64;
        for line in &self.lines {
            let sa = line.dir.cross(a - line.anchor);
            let sb = line.dir.cross(b - line.anchor);
            if sa == 0.0 || sb == 0.0 || sa.signum() == sb.signum() {
                continue;
            }
            let x = a + (b - a) * (sa / (sa - sb));
            let vertex_toggles =
                (line.anchor - x).dot(line.other_neighbor - line.anchor) < 0.0;
            let magnitude = 1 + i64::from(vertex_toggles);
            let sign = if sa < 0.0 { 1 } else { -1 };
            total += sign * magnitude;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{contains, global_equilibria};
    use crate::discretize::{count_local, partition};
    use crate::rng::stream;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ellipse() -> SmoothCurve {
        SmoothCurve::ellipse(2.0, 1.5).unwrap()
    }

    #[test]
    fn evolute_arcs_between_cusps_turn_consistently() {
        let ev = build_evolute(&ellipse(), 2048).unwrap();
        assert_eq!(ev.cusps.len(), 4);
        let m = ev.points.len();
        let mut checked = 0;
        for i in 0..m {
            let tri = [ev.taus[i], ev.taus[(i + 1) % m], ev.taus[(i + 2) % m]];
            if tri.iter().any(|&t| ev.cusp_distance(t) < 2.0 * ev.span / m as f64) {
                continue;
            }
            let (p, q, r) = (ev.points[i], ev.points[(i + 1) % m], ev.points[(i + 2) % m]);
            let turn = (q - p).cross(r - q);
            // Same turning sense on every cusp-free arc of the astroid.
            assert!(turn > 0.0, "turn {turn} at sample {i}");
            checked += 1;
        }
        assert!(checked > 1500);
    }

    #[test]
    fn constant_curvature_has_no_evolute_curve() {
        let c = SmoothCurve::circle(1.0).unwrap();
        assert!(matches!(
            build_evolute(&c, 256),
            Err(EventError::ConstantCurvature)
        ));
    }

    #[test]
    fn curve_points_lie_on_the_concave_side() {
        let c = ellipse();
        let ev = build_evolute(&c, 2048).unwrap();
        let mut rng = stream(90, 0);
        let mut done = 0;
        while done < 20 {
            let tau0 = rng.gen::<f64>() * 2.0 * PI;
            if ev.cusp_distance(tau0) < 0.05 {
                continue;
            }
            let side = side_of_evolute(&ev, tau0, c.point(tau0)).unwrap();
            assert_eq!(side, Side::Concave, "tau0 = {tau0}");
            done += 1;
        }
    }

    #[test]
    fn evolute_point_classifies_on_curve() {
        let c = ellipse();
        let ev = build_evolute(&c, 2048).unwrap();
        let tau0 = 0.7;
        let q = evolute_point(&c, tau0).unwrap();
        assert_eq!(side_of_evolute(&ev, tau0, q).unwrap(), Side::OnCurve);
    }

    #[test]
    fn cusp_parameters_are_refused() {
        let ev = build_evolute(&ellipse(), 2048).unwrap();
        assert!(matches!(
            side_of_evolute(&ev, 1e-6, v2(0.5, 0.5)),
            Err(EventError::CuspPoint { .. })
        ));
    }

    #[test]
    fn side_matches_the_normal_count_oracle() {
        // Crossing a general evolute arc from its convex to its concave
        // side gains exactly one stable-unstable pair of normal feet.
        let c = ellipse();
        let ev = build_evolute(&c, 2048).unwrap();
        let mut rng = stream(91, 0);
        let mut done = 0;
        while done < 50 {
            let tau0 = rng.gen::<f64>() * 2.0 * PI;
            if ev.cusp_distance(tau0) < 0.05 {
                continue;
            }
            let e = evolute_point(&c, tau0).unwrap();
            let i = ev.nearest_sample(tau0);
            let t = (ev.points[(i + 1) % ev.points.len()]
                - ev.points[(i + ev.points.len() - 1) % ev.points.len()])
            .normalized();
            let n = t.perp();
            let (qa, qb) = (e + n * 1e-3, e - n * 1e-3);
            if !contains(&c, qa) || !contains(&c, qb) {
                continue;
            }
            let na = global_equilibria(&c, qa).unwrap().len();
            let nb = global_equilibria(&c, qb).unwrap().len();
            assert_eq!((na as i64 - nb as i64).abs(), 2, "tau0 = {tau0}");
            let (q_few, q_many) = if na < nb { (qa, qb) } else { (qb, qa) };
            assert_eq!(side_of_evolute(&ev, tau0, q_few).unwrap(), Side::Convex);
            assert_eq!(side_of_evolute(&ev, tau0, q_many).unwrap(), Side::Concave);
            done += 1;
        }
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn leaving_the_caustic_region_annihilates_a_pair() {
        let c = ellipse();
        let curve_at = |_t: f64| c.clone();
        let o_at = |t: f64| v2(1.75 * t, 0.01);
        let events = detect_crossings(&curve_at, &o_at, &linspace(0.0, 1.0, 41)).unwrap();
        assert_eq!(events.len(), 1);
        let e = events[0];
        assert_eq!(e.kind, EventKind::Annihilation);
        assert_eq!(e.side_before, Some(Side::Concave));
        assert_eq!(e.side_after, Some(Side::Convex));
        // The caustic meets the major axis at 0.875; the 0.01 sidestep moves
        // the crossing only slightly.
        assert!((e.t_star - 0.5).abs() < 0.05, "t_star {}", e.t_star);
        assert_eq!(global_equilibria(&c, o_at(0.0)).unwrap().len(), 4);
        let n = reconstruct_n(4, &events).unwrap();
        assert_eq!(n.final_value(), 2);
    }

    #[test]
    fn entering_the_caustic_region_creates_a_pair() {
        let c = ellipse();
        let curve_at = |_t: f64| c.clone();
        let o_at = |t: f64| v2(1.75 * (1.0 - t), 0.01);
        let events = detect_crossings(&curve_at, &o_at, &linspace(0.0, 1.0, 41)).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Creation);
        assert_eq!(events[0].side_before, Some(Side::Convex));
        assert_eq!(events[0].side_after, Some(Side::Concave));
    }

    #[test]
    fn quiet_trajectories_log_nothing() {
        let c = ellipse();
        let curve_at = |_t: f64| c.clone();
        let o_at = |t: f64| v2(0.2 * (2.0 * PI * t).cos(), 0.2 * (2.0 * PI * t).sin());
        let events = detect_crossings(&curve_at, &o_at, &linspace(0.0, 1.0, 21)).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn crossing_at_a_cusp_is_degenerate() {
        let c = ellipse();
        let curve_at = |_t: f64| c.clone();
        let o_at = |t: f64| v2(1.75 * t, 0.0);
        let events = detect_crossings(&curve_at, &o_at, &linspace(0.0, 1.0, 41)).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Degenerate);
        assert!(events[0].side_before.is_none());
        // Degenerate entries do not move the reconstructed count.
        let n = reconstruct_n(4, &events).unwrap();
        assert_eq!(n.final_value(), 4);
    }

    #[test]
    fn traversal_reproduces_the_brute_forced_count() {
        let c = ellipse();
        let curve_at = |_t: f64| c.clone();
        let o_at = |t: f64| v2(-1.2 + 2.4 * t, 0.25);
        let grid = linspace(0.0, 1.0, 81);
        let events = detect_crossings(&curve_at, &o_at, &grid).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].kind, EventKind::Creation);
        assert_eq!(events[1].kind, EventKind::Annihilation);
        let n0 = global_equilibria(&c, o_at(0.0)).unwrap().len();
        let step = reconstruct_n(n0, &events).unwrap();
        for &t in &linspace(0.0, 1.0, 200) {
            if events.iter().any(|e| (t - e.t_star).abs() < 1e-6) {
                continue;
            }
            let brute = global_equilibria(&c, o_at(t)).unwrap().len();
            assert_eq!(step.value_at(t), brute, "t = {t}");
        }
    }

    #[test]
    fn reconstruction_examples() {
        let ev = |t, kind| CrossingEvent {
            t_star: t,
            tau0: 0.0,
            kind,
            side_before: None,
            side_after: None,
        };
        let n = reconstruct_n(4, &[]).unwrap();
        assert_eq!(n.final_value(), 4);

        let five: Vec<CrossingEvent> = (0..5)
            .map(|k| ev(k as f64, EventKind::Annihilation))
            .collect();
        let n = reconstruct_n(14, &five).unwrap();
        assert_eq!(n.final_value(), 4);
        assert_eq!(n.value_at(2.5), 8);

        let pair = [ev(1.0, EventKind::Creation), ev(2.0, EventKind::Annihilation)];
        let n = reconstruct_n(2, &pair).unwrap();
        assert_eq!((n.value_at(0.5), n.value_at(1.5), n.value_at(2.5)), (2, 4, 2));

        assert!(matches!(
            reconstruct_n(2, &[ev(1.0, EventKind::Annihilation)]),
            Err(EventError::InconsistentLog { .. })
        ));
        assert!(reconstruct_n(
            4,
            &[ev(2.0, EventKind::Creation), ev(1.0, EventKind::Creation)]
        )
        .is_err());
    }

    #[test]
    fn event_log_serializes_one_record_per_line() {
        let events = [
            CrossingEvent {
                t_star: 0.5,
                tau0: 1.25,
                kind: EventKind::Annihilation,
                side_before: Some(Side::Concave),
                side_after: Some(Side::Convex),
            },
            CrossingEvent {
                t_star: 0.75,
                tau0: 0.0,
                kind: EventKind::Degenerate,
                side_before: None,
                side_after: None,
            },
        ];
        let log = event_log_jsonl(&events);
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["kind"], "A");
        assert_eq!(first["t"], 0.5);
        assert_eq!(first["tau"], 1.25);
        let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(second["kind"], "degenerate");
    }

    #[test]
    fn crossing_coincident_square_normal_lines_adds_three() {
        let square = [v2(1.0, 0.0), v2(0.0, 1.0), v2(-1.0, 0.0), v2(0.0, -1.0)];
        let arr = polygon_evolute(&square).unwrap();
        // The square's eight normal lines coincide in four pairs; the segment
        // crosses one geometric line (x - y = 1) carried by two (edge, vertex)
        // pairs. The pair anchored at (1,0) toggles its edge only (+1), the
        // pair at (0,-1) toggles edge and vertex (+2). Direct enumeration:
        // the count goes 1 -> 4 along this segment.
        assert_eq!(arr.crossing_delta(v2(1.3, 0.2), v2(1.0, 0.2)), 3);
        assert_eq!(arr.crossing_delta(v2(1.0, 0.2), v2(1.3, 0.2)), -3);
    }

    #[test]
    fn near_center_of_a_regular_polygon_every_feature_counts() {
        let c = SmoothCurve::circle(1.0).unwrap();
        let poly = partition(&c, 7, 0.0).unwrap();
        let o = v2(0.003, 0.002);
        let set = count_local(&poly, o).unwrap();
        assert_eq!((set.stable(), set.unstable()), (7, 7));
        let arr = polygon_evolute(&poly.vertices).unwrap();
        // Both points sit in the innermost cell: no line between them.
        assert_eq!(arr.crossing_delta(o, v2(-0.002, 0.004)), 0);
    }

    #[test]
    fn segment_crossings_predict_count_changes() {
        let poly = partition(&ellipse(), 24, 0.3).unwrap();
        let arr = polygon_evolute(&poly.vertices).unwrap();
        let mut rng = stream(92, 0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let q = v2(
                (rng.gen::<f64>() - 0.5) * 3.6,
                (rng.gen::<f64>() - 0.5) * 2.7,
            );
            if let Ok(set) = count_local(&poly, q) {
                return (q, set.total() as i64);
            }
        };
        for _ in 0..100 {
            let (a, na) = draw(&mut rng);
            let (b, nb) = draw(&mut rng);
            assert_eq!(
                nb - na,
                arr.crossing_delta(a, b),
                "a = {a:?}, b = {b:?}"
            );
        }
    }

}
