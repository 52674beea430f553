//! Quantitative study of critical flocks: how many polygonal equilibria
//! crowd a degenerate smooth equilibrium, how wide the crowd is as the mesh
//! refines, and how fast the smooth local count diverges as the reference
//! point moves through the caustic.

use crate::curve::{signed_curvature, CurveError, PlaneCurve, SmoothCurve};
use crate::discretize::{count_local_points, DiscretizeError};
use crate::fit::{fit_loglog, mean_stderr, LineFit};
use crate::geom::{v2, Vec2};
use crate::rng;
use crate::tol;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use crate::curve::degeneracy_order;

#[derive(Debug, Error)]
pub enum FlockError {
    #[error("bad parameter: {0}")]
    Parameter(String),
    #[error(
        "fitted slope {slope:.4} is farther than 0.1 from every admissible \
         exponent (-1/2, -2/3, -1)"
    )]
    Classification { slope: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// Count slope predicted for a degeneracy of order `k`: -(k-2)/(k-1).
pub fn expected_count_slope(k: usize) -> f64 {
    -((k - 2) as f64) / ((k - 1) as f64)
}

/// Flock-width slope predicted for a degeneracy of order `k`: 1/(k-1).
pub fn expected_diameter_slope(k: usize) -> f64 {
    1.0 / ((k - 1) as f64)
}

/// Geometric mesh ladder delta0 * 2^-j for j = 0..=7; spans two decades.
pub fn default_ladder(delta0: f64) -> Vec<f64> {
    (0..8).map(|j| delta0 / f64::powi(2.0, j)).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRung {
    pub delta: f64,
    pub mean_count: f64,
    pub count_stderr: f64,
    /// Mean parameter spread of the equilibrium-carrying features.
    pub mean_diameter: f64,
    pub diameter_stderr: f64,
}

/// Offset-averaged equilibrium counts and flock widths over a mesh ladder,
/// with log-log fits of both against the mesh step.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    /// Order of the first nonvanishing distance derivative at the center.
    pub k: usize,
    /// Parameter of the studied equilibrium.
    pub tau_m: f64,
    pub offsets_per_rung: usize,
    pub rungs: Vec<ScalingRung>,
    pub count_fit: LineFit,
    pub diameter_fit: LineFit,
    /// Set when the mean count fails to grow under refinement (beyond three
    /// combined standard errors) although the predicted exponent is negative.
    pub regime_warning: Option<String>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "delta,mean_count,count_stderr,mean_diameter,diameter_stderr\n",
        );
        for r in &self.rungs {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.delta, r.mean_count, r.count_stderr, r.mean_diameter, r.diameter_stderr
            ));
        }
        out
    }
}

/// First derivative of the squared distance from `o`, up to a factor 2.
fn radial_test<C: PlaneCurve + ?Sized>(curve: &C, o: Vec2, tau: f64) -> f64 {
    let d1 = curve
        .eval(tau, 1)
        .expect("first derivative is always available");
    (curve.point(tau) - o).dot(d1)
}

/// Finds the parameter of the distance-critical point inside `window` by a
/// scan plus ternary refinement of the squared radial test. Minimizing the
/// square keeps degenerate criticals findable: there the test touches zero
/// without a sign change, so root bracketing has nothing to bracket.
fn locate_equilibrium<C: PlaneCurve + ?Sized>(
    curve: &C,
    o: Vec2,
    window: (f64, f64),
) -> Result<f64, FlockError> {
    let (lo, hi) = window;
    let m = tol::EQ_SCAN_SAMPLES;
    let step = (hi - lo) / m as f64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=m {
        let tau = lo + i as f64 * step;
        let g = radial_test(curve, o, tau);
        if g * g < best.0 {
            best = (g * g, tau);
        }
    }
    let mut a = (best.1 - step).max(lo);
    let mut b = (best.1 + step).min(hi);
    for _ in 0..200 {
        let u = a + (b - a) / 3.0;
        let v = b - (b - a) / 3.0;
        let gu = radial_test(curve, o, u);
        let gv = radial_test(curve, o, v);
        if gu * gu <= gv * gv {
            b = v;
        } else {
            a = u;
        }
    }
    let mut tau = 0.5 * (a + b);
    let scale = curve.scale();
    let band = 1e-6 * scale * scale / curve.span();
    if radial_test(curve, o, tau).abs() > band {
        return Err(FlockError::Parameter(format!(
            "window [{lo}, {hi}] holds no equilibrium of the distance from ({}, {})",
            o.x, o.y
        )));
    }
    // The scan localizes a k-fold flat center only to (noise)^(1/k). The
    // derivative of order k-1 crosses zero simply there and is computed from
    // exact curve derivatives, so bisecting the highest sign-changing
    // distance derivative recovers the center to machine precision.
    let h = 1e-3 * curve.span();
    'orders: for j in (1..=3).rev() {
        let (wa, wb) = ((tau - h).max(lo), (tau + h).min(hi));
        let deriv = |t: f64| -> Option<f64> {
            crate::curve::distance_derivatives(curve, o, t, j.max(1))
                .ok()
                .map(|d| d[j])
        };
        let (Some(mut da), Some(db)) = (deriv(wa), deriv(wb)) else {
            continue;
        };
        if da == 0.0 || db == 0.0 || da.signum() == db.signum() {
            continue;
        }
        let (mut a, mut b) = (wa, wb);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let Some(dm) = deriv(mid) else {
                continue 'orders;
            };
            if dm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if dm.signum() == da.signum() {
                a = mid;
                da = dm;
            } else {
                b = mid;
            }
        }
        let candidate = 0.5 * (a + b);
        if radial_test(curve, o, candidate).abs() <= band {
            tau = candidate;
        }
        break;
    }
    Ok(tau)
}

/// Counts equilibria of the offset mesh restricted to `window` and returns
/// (count, parameter spread of the carrying features).
fn offset_trial<C: PlaneCurve + ?Sized>(
    curve: &C,
    o: Vec2,
    window: (f64, f64),
    delta: f64,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<(f64, f64), FlockError> {
    let (lo, hi) = window;
    for _ in 0..32 {
        let u: f64 = rng.gen();
        let count = ((hi - lo) / delta - u).floor() as usize + 1;
        let params: Vec<f64> = (0..count).map(|i| lo + (i as f64 + u) * delta).collect();
        let points: Vec<Vec2> = params.iter().map(|&t| curve.point(t)).collect();
        match count_local_points(&points, false, o, scale) {
            Ok(set) => {
                let mut taus: Vec<f64> = Vec::with_capacity(set.total());
                for e in &set.stable_edges {
                    taus.push(0.5 * (params[e.edge] + params[e.edge + 1]));
                }
                for v in &set.unstable_vertices {
                    taus.push(params[v.vertex]);
                }
                let spread = match taus.len() {
                    0 | 1 => 0.0,
                    _ => {
                        let max = taus.iter().cloned().fold(f64::MIN, f64::max);
                        let min = taus.iter().cloned().fold(f64::MAX, f64::min);
                        max - min
                    }
                };
                return Ok((set.total() as f64, spread));
            }
            // a tie at this offset; the next draw is generic almost surely
            Err(DiscretizeError::Nongeneric { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(FlockError::Parameter(
        "every offset draw hit a nongeneric tie".into(),
    ))
}

/// Measures how the local equilibrium count and the flock width scale with
/// the mesh step around the distance-critical point inside `window`.
///
/// Each rung of the strictly decreasing `ladder` averages over `offsets`
/// random mesh phases; the rung table and the two log-log fits land in the
/// returned report together with the detected degeneracy order k.
pub fn flock_scaling<C: PlaneCurve + Sync + ?Sized>(
    curve: &C,
    o: Vec2,
    window: (f64, f64),
    ladder: &[f64],
    offsets: usize,
    seed: u64,
) -> Result<ScalingReport, FlockError> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(FlockError::Parameter(format!(
            "window [{lo}, {hi}] is empty"
        )));
    }
    if ladder.len() < 6 {
        return Err(FlockError::Parameter(format!(
            "ladder has {} rungs; the fit needs at least 6",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) || ladder[0] <= 0.0 {
        return Err(FlockError::Parameter(
            "ladder must be positive and strictly decreasing".into(),
        ));
    }
    if (hi - lo) / ladder[0] < 8.0 {
        return Err(FlockError::Parameter(
            "coarsest rung leaves fewer than 8 mesh points in the window".into(),
        ));
    }
    if offsets == 0 {
        return Err(FlockError::Parameter("offsets must be positive".into()));
    }
    let tau_m = locate_equilibrium(curve, o, window)?;
    let k = degeneracy_order(curve, o, tau_m)?;
    let scale = curve.scale();

    let mut rungs = Vec::with_capacity(ladder.len());
    for (j, &delta) in ladder.iter().enumerate() {
        let trials: Vec<(f64, f64)> = (0..offsets)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, ((j as u64) << 32) | i as u64);
                offset_trial(curve, o, window, delta, scale, &mut r)
            })
            .collect::<Result<_, _>>()?;
        let counts: Vec<f64> = trials.iter().map(|t| t.0).collect();
        let diams: Vec<f64> = trials.iter().map(|t| t.1).collect();
        let ce = mean_stderr(&counts);
        let de = mean_stderr(&diams);
        rungs.push(ScalingRung {
            delta,
            mean_count: ce.mean,
            count_stderr: ce.stderr,
            mean_diameter: de.mean,
            diameter_stderr: de.stderr,
        });
    }

    let deltas: Vec<f64> = rungs.iter().map(|r| r.delta).collect();
    let count_fit = fit_loglog(&deltas, &rungs.iter().map(|r| r.mean_count).collect::<Vec<_>>());
    let diameter_fit = fit_loglog(
        &deltas,
        &rungs.iter().map(|r| r.mean_diameter).collect::<Vec<_>>(),
    );

    let mut regime_warning = None;
    if k >= 3 {
        for w in rungs.windows(2) {
            let noise = 3.0 * (w[0].count_stderr + w[1].count_stderr);
            if w[1].mean_count < w[0].mean_count - noise {
                regime_warning = Some(format!(
                    "mean count fell from {:.2} to {:.2} between rungs delta = {:.3e} and {:.3e}",
                    w[0].mean_count, w[1].mean_count, w[0].delta, w[1].delta
                ));
                break;
            }
        }
    }

    Ok(ScalingReport {
        k,
        tau_m,
        offsets_per_rung: offsets,
        rungs,
        count_fit,
        diameter_fit,
        regime_warning,
    })
}

/// Ready-made degenerate configurations: a graph window whose distance from
/// the origin first varies at order `k` (2: reference point off the caustic,
/// 3: on the caustic at a generic point, 4: at a cusp), with the study
/// window. The height profile is rho0 + (kappa/2)x^2 + a3 x^3 + a4 x^4; the
/// origin sits at the center of curvature exactly when kappa = -1/rho0.
pub fn degeneracy_setup(k: usize) -> Result<(SmoothCurve, Vec2, (f64, f64)), FlockError> {
    let curve = match k {
        // kappa well away from -1/rho0: the flock mean settles fast, so the
        // bounded-count plateau shows already on coarse rungs
        2 => SmoothCurve::graph_jet(1.0, -0.5, 0.1, 0.0, 0.6),
        3 => SmoothCurve::graph_jet(1.0, -1.0, 0.2, 0.0, 0.6),
        4 => SmoothCurve::graph_jet(1.0, -1.0, 0.0, 0.2, 0.6),
        _ => {
            return Err(FlockError::Parameter(format!(
                "no prepared configuration of order {k}"
            )))
        }
    }?;
    Ok((curve, v2(0.0, 0.0), (-0.6, 0.6)))
}

/// How the moving reference point meets the caustic: crossing it at a
/// generic point, running tangent to it there, or the same two approaches
/// at a cusp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrajectoryCase {
    TransverseConvexToConcave,
    TangentLocallyConvex,
    TransverseAtCusp,
    TangentAtCusp,
}

impl TrajectoryCase {
    /// Predicted log-log slope of the local-count sum in time.
    pub fn expected_exponent(self) -> f64 {
        match self {
            TrajectoryCase::TransverseConvexToConcave => -0.5,
            TrajectoryCase::TangentLocallyConvex => -1.0,
            TrajectoryCase::TransverseAtCusp => -2.0 / 3.0,
            TrajectoryCase::TangentAtCusp => -1.0,
        }
    }

    /// Degeneracy order of the touched caustic point.
    pub fn contact_order(self) -> usize {
        match self {
            TrajectoryCase::TransverseConvexToConcave | TrajectoryCase::TangentLocallyConvex => 3,
            TrajectoryCase::TransverseAtCusp | TrajectoryCase::TangentAtCusp => 4,
        }
    }

    pub const ADMISSIBLE_EXPONENTS: [f64; 3] = [-0.5, -2.0 / 3.0, -1.0];
}

/// Geometric time ladder t0 * 2^-j for j = 0..=7; spans two decades.
pub fn default_time_ladder(t0: f64) -> Vec<f64> {
    default_ladder(t0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateSample {
    pub t: f64,
    /// Sum of 2 / |1 + rho kappa| over the window's smooth equilibria.
    pub proxy: f64,
    pub equilibria: usize,
    /// True when a term hit the divergence cap; capped samples stay out of
    /// the fit.
    pub capped: bool,
}

/// Divergence profile of the local-count sum along a reference trajectory,
/// with the fitted exponent and the admissible exponent it matched.
#[derive(Debug, Clone, Serialize)]
pub struct RateProfile {
    pub trajectory: TrajectoryCase,
    pub samples: Vec<RateSample>,
    pub fit: LineFit,
    pub matched_exponent: f64,
    /// For the one-sided transverse crossing: largest proxy seen on the
    /// mirrored (bounded) side of the caustic.
    pub opposite_side_max: Option<f64>,
}

impl RateProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,proxy,equilibria,capped\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{}\n",
                s.t, s.proxy, s.equilibria, s.capped
            ));
        }
        out
    }
}

/// Sum of 2 / |1 + rho kappa| over the smooth equilibria with respect to `o`
/// within `half_width` of `tau_m`, located by a scan at `scan_step`
/// resolution plus bisection. Returns (sum, equilibria, capped); terms whose
/// divergence exceeds the proxy cap are clamped and flagged.
pub fn local_count_proxy<C: PlaneCurve + ?Sized>(
    curve: &C,
    o: Vec2,
    tau_m: f64,
    half_width: f64,
    scan_step: f64,
) -> Result<(f64, usize, bool), FlockError> {
    if !(half_width > 0.0 && scan_step > 0.0) {
        return Err(FlockError::Parameter(
            "half_width and scan_step must be positive".into(),
        ));
    }
    let span = curve.span();
    let (dlo, dhi) = curve.domain();
    let (lo, hi) = if curve.is_closed() {
        let w = half_width.min(0.5 * span);
        (tau_m - w, tau_m + w)
    } else {
        ((tau_m - half_width).max(dlo), (tau_m + half_width).min(dhi))
    };
    let m = (((hi - lo) / scan_step).ceil() as usize).clamp(64, 2_000_000);
    let step = (hi - lo) / m as f64;
    let bisect = |mut a: f64, b: f64, mut ga: f64| -> f64 {
        let mut b = b;
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            let gm = radial_test(curve, o, mid);
            if gm == 0.0 {
                return mid;
            }
            if ga.signum() == gm.signum() {
                a = mid;
                ga = gm;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let mut roots: Vec<f64> = Vec::new();
    let full_wrap = curve.is_closed() && (hi - lo) >= span - 1e-12 * span;
    if full_wrap {
        // The window closes on itself, so scan the m intervals cyclically;
        // a root sitting exactly on the seam then still separates two nodes
        // of opposite sign instead of hiding at both scan ends.
        let gs: Vec<f64> = (0..m)
            .map(|i| radial_test(curve, o, lo + i as f64 * step))
            .collect();
        for i in 0..m {
            let tau = lo + i as f64 * step;
            let ga = gs[i];
            let gb = gs[(i + 1) % m];
            if ga == 0.0 {
                roots.push(tau);
            } else if gb != 0.0 && ga.signum() != gb.signum() {
                roots.push(bisect(tau, tau + step, ga));
            }
        }
    } else {
        let mut prev = radial_test(curve, o, lo);
        if prev == 0.0 {
            roots.push(lo);
        }
        for i in 1..=m {
            let tau = lo + i as f64 * step;
            let g = radial_test(curve, o, tau);
            if g == 0.0 {
                roots.push(tau);
            } else if prev != 0.0 && prev.signum() != g.signum() {
                roots.push(bisect(tau - step, tau, prev));
            }
            prev = g;
        }
    }
    let mut sum = 0.0;
    let mut capped = false;
    for &x in &roots {
        let rho = (curve.point(x) - o).norm();
        let kappa = signed_curvature(curve, x)?;
        let denom = (1.0 + rho * kappa).abs();
        if denom * tol::RATE_PROXY_CAP < 1.0 {
            capped = true;
            sum += 2.0 * tol::RATE_PROXY_CAP;
        } else {
            sum += 2.0 / denom;
        }
    }
    Ok((sum, roots.len(), capped))
}

/// Tracks the local-count sum while the reference point runs along
/// o(t) = center + direction * t and fits its divergence exponent. The
/// studied window shrinks with t as 10 t^(1/(k-1)), isolating the flock
/// around the contact from the bounded rest of the curve.
pub fn rate_profile<C: PlaneCurve + ?Sized>(
    curve: &C,
    center: Vec2,
    tau_m: f64,
    direction: Vec2,
    trajectory: TrajectoryCase,
    t_ladder: &[f64],
    scan_step: f64,
) -> Result<RateProfile, FlockError> {
    if t_ladder.len() < 6 {
        return Err(FlockError::Parameter(format!(
            "time ladder has {} rungs; the fit needs at least 6",
            t_ladder.len()
        )));
    }
    if t_ladder.windows(2).any(|w| w[1] >= w[0]) || *t_ladder.last().unwrap() <= 0.0 {
        return Err(FlockError::Parameter(
            "time ladder must be positive and strictly decreasing".into(),
        ));
    }
    if direction.norm() == 0.0 {
        return Err(FlockError::Parameter("direction must be nonzero".into()));
    }
    let k = trajectory.contact_order();
    let width = |t: f64| 10.0 * t.powf(1.0 / (k - 1) as f64);

    let mut samples = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        let o = center + direction * t;
        let (proxy, equilibria, capped) = local_count_proxy(curve, o, tau_m, width(t), scan_step)?;
        samples.push(RateSample {
            t,
            proxy,
            equilibria,
            capped,
        });
    }

    let fit_ts: Vec<f64> = samples.iter().filter(|s| !s.capped).map(|s| s.t).collect();
    let fit_ps: Vec<f64> = samples
        .iter()
        .filter(|s| !s.capped)
        .map(|s| s.proxy)
        .collect();
    if fit_ps.iter().filter(|&&p| p > 0.0).count() < 3 {
        return Err(FlockError::Parameter(
            "fewer than 3 usable ladder points after cap filtering".into(),
        ));
    }
    let fit = fit_loglog(&fit_ts, &fit_ps);
    let matched = TrajectoryCase::ADMISSIBLE_EXPONENTS
        .iter()
        .cloned()
        .min_by(|a, b| {
            (a - fit.slope)
                .abs()
                .partial_cmp(&(b - fit.slope).abs())
                .unwrap()
        })
        .unwrap();
    if (matched - fit.slope).abs() > 0.1 {
        return Err(FlockError::Classification { slope: fit.slope });
    }

    let opposite_side_max = if trajectory == TrajectoryCase::TransverseConvexToConcave {
        let mut worst = 0.0_f64;
        for &t in t_ladder {
            let o = center - direction * t;
            let (proxy, _, _) = local_count_proxy(curve, o, tau_m, width(t), scan_step)?;
            worst = worst.max(proxy);
        }
        Some(worst)
    } else {
        None
    };

    Ok(RateProfile {
        trajectory,
        samples,
        fit,
        matched_exponent: matched,
        opposite_side_max,
    })
}

/// The prepared contact and direction for each trajectory case: the order-3
/// or order-4 window from [`degeneracy_setup`] with the caustic met at the
/// origin. Transverse cases lean the direction off the caustic's tangent;
/// tangent cases run straight along it (the window's y axis).
pub fn trajectory_setup(
    trajectory: TrajectoryCase,
) -> Result<(SmoothCurve, Vec2, f64, Vec2), FlockError> {
    let (curve, center, _) = degeneracy_setup(trajectory.contact_order())?;
    let direction = match trajectory {
        TrajectoryCase::TransverseConvexToConcave | TrajectoryCase::TransverseAtCusp => {
            v2(1.0, 0.3)
        }
        TrajectoryCase::TangentLocallyConvex | TrajectoryCase::TangentAtCusp => v2(0.0, 1.0),
    };
    Ok((curve, center, 0.0, direction))
}
