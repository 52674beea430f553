//! Smooth plane curves: evaluation, signed curvature, evolutes and the
//! critical points of the distance function from a reference point.
//!
//! Sign convention: curvature is measured against the outward normal (the
//! side away from the reference region), so convex curves have kappa < 0
//! everywhere and a critical point at parameter tau with distance rho is a
//! minimum of the distance function exactly when 1 + kappa*rho > 0.

use crate::geom::{v2, Vec2};
use crate::tol;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("derivative order {order} exceeds available smoothness {max}")]
    UnsupportedOrder { order: usize, max: usize },
    #[error("invalid curve: {0}")]
    Invalid(String),
    #[error("reference point is not strictly inside the curve")]
    NotInterior,
    #[error("curvature magnitude vanishes at parameter {tau}; evolute undefined")]
    CurvatureVanishes { tau: f64 },
    #[error("curvature derivative and second derivative both vanish at parameter {tau}; point class undefined")]
    DegenerateCusp { tau: f64 },
    #[error("distance derivatives vanish through order {max_checked}; degeneracy order not representable")]
    OrderTooHigh { max_checked: usize },
    #[error("bad curve json: {0}")]
    Json(String),
}

/// Differentiable plane curve over a closed parameter interval.
pub trait PlaneCurve {
    fn domain(&self) -> (f64, f64);
    fn is_closed(&self) -> bool;
    /// Highest derivative order `eval` accepts.
    fn max_order(&self) -> usize;
    /// True when the traversal keeps the interior (reference side) on the
    /// left. Fixed per kind: closed kinds are stored counterclockwise, graph
    /// windows keep the reference side below the graph.
    fn interior_on_left(&self) -> bool;
    /// Derivative of the given order; order 0 is the position.
    fn eval(&self, tau: f64, order: usize) -> Result<Vec2, CurveError>;

    fn span(&self) -> f64 {
        let (lo, hi) = self.domain();
        hi - lo
    }

    fn point(&self, tau: f64) -> Vec2 {
        self.eval(tau, 0).expect("order 0 is always available")
    }

    /// Diameter estimate from a coarse sample; the reference length for all
    /// relative tolerances.
    fn scale(&self) -> f64 {
        let (lo, _) = self.domain();
        let span = self.span();
        let mut min = v2(f64::INFINITY, f64::INFINITY);
        let mut max = v2(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..64 {
            let p = self.point(lo + span * i as f64 / 64.0);
            min = v2(min.x.min(p.x), min.y.min(p.y));
            max = v2(max.x.max(p.x), max.y.max(p.y));
        }
        (max - min).norm()
    }
}

fn orientation_sign(curve: &(impl PlaneCurve + ?Sized)) -> f64 {
    if curve.interior_on_left() {
        -1.0
    } else {
        1.0
    }
}

/// Signed curvature under the outward-normal convention (negative on convex
/// curves). Magnitude is cross(r', r'') / |r'|^3.
pub fn signed_curvature(curve: &(impl PlaneCurve + ?Sized), tau: f64) -> Result<f64, CurveError> {
    let d1 = curve.eval(tau, 1)?;
    let d2 = curve.eval(tau, 2)?;
    let s = d1.norm2();
    Ok(orientation_sign(curve) * d1.cross(d2) / (s * s.sqrt()))
}

/// d kappa / d tau.
pub fn curvature_derivative(
    curve: &(impl PlaneCurve + ?Sized),
    tau: f64,
) -> Result<f64, CurveError> {
    let d1 = curve.eval(tau, 1)?;
    let d2 = curve.eval(tau, 2)?;
    let d3 = curve.eval(tau, 3)?;
    let c = d1.cross(d2);
    let cp = d1.cross(d3);
    let s = d1.norm2();
    let sp = 2.0 * d1.dot(d2);
    Ok(orientation_sign(curve) * (cp * s - 1.5 * c * sp) / (s * s * s.sqrt()))
}

/// d^2 kappa / d tau^2.
pub fn curvature_second(
    curve: &(impl PlaneCurve + ?Sized),
    tau: f64,
) -> Result<f64, CurveError> {
    let d1 = curve.eval(tau, 1)?;
    let d2 = curve.eval(tau, 2)?;
    let d3 = curve.eval(tau, 3)?;
    let d4 = curve.eval(tau, 4)?;
    let c = d1.cross(d2);
    let cp = d1.cross(d3);
    let cpp = d1.cross(d4) + d2.cross(d3);
    let s = d1.norm2();
    let sp = 2.0 * d1.dot(d2);
    let spp = 2.0 * (d2.norm2() + d1.dot(d3));
    let s52 = s * s * s.sqrt();
    Ok(orientation_sign(curve)
        * (cpp / (s * s.sqrt()) - 3.0 * cp * sp / s52 - 1.5 * c * spp / s52
            + 3.75 * c * sp * sp / (s52 * s)))
}

/// Unit tangent and outward unit normal.
pub fn frame(curve: &(impl PlaneCurve + ?Sized), tau: f64) -> Result<(Vec2, Vec2), CurveError> {
    let t = curve.eval(tau, 1)?.normalized();
    let n_out = if curve.interior_on_left() {
        -t.perp()
    } else {
        t.perp()
    };
    Ok((t, n_out))
}

/// Center of the osculating circle.
pub fn evolute_point(curve: &(impl PlaneCurve + ?Sized), tau: f64) -> Result<Vec2, CurveError> {
    let kappa = signed_curvature(curve, tau)?;
    let scale = curve.scale();
    if kappa.abs() * scale < 1e-9 {
        return Err(CurveError::CurvatureVanishes { tau });
    }
    let (_, n_out) = frame(curve, tau)?;
    let p = curve.point(tau);
    // kappa < 0 on convex curves, so 1/kappa * n_out points inward by the
    // curvature radius: the center of the osculating circle.
    Ok(p + n_out * (1.0 / kappa))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EvolutePointClass {
    General,
    Cusp,
}

/// A point of the evolute is a cusp exactly when kappa'(tau) = 0. Constant
/// curvature (kappa' and kappa'' both ~ 0) has no well-defined class.
pub fn classify_evolute_point(
    curve: &(impl PlaneCurve + ?Sized),
    tau: f64,
) -> Result<EvolutePointClass, CurveError> {
    let scale = curve.scale();
    let span = curve.span();
    let kp = curvature_derivative(curve, tau)? * scale * span;
    if kp.abs() > tol::ORDER_DERIV_BAND {
        return Ok(EvolutePointClass::General);
    }
    let kpp = curvature_second(curve, tau)? * scale * span * span;
    if kpp.abs() > tol::ORDER_DERIV_BAND {
        Ok(EvolutePointClass::Cusp)
    } else {
        Err(CurveError::DegenerateCusp { tau })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Critical point of the distance function |r(tau) - o|.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmoothEquilibrium {
    pub tau: f64,
    pub position: Vec2,
    pub stability: Stability,
    pub rho: f64,
    pub kappa: f64,
    /// Smallest order with nonvanishing distance derivative; 2 when
    /// nondegenerate.
    pub order: usize,
}

fn g_of(curve: &(impl PlaneCurve + ?Sized), o: Vec2, tau: f64) -> f64 {
    let p = curve.point(tau);
    let d1 = curve.eval(tau, 1).expect("order 1 is always available");
    (p - o).dot(d1)
}

/// Roots of <r - o, r'> over the domain, located by a dense scan plus
/// bisection. Transversal roots only; tangential double roots (o exactly on
/// the evolute) fall below scan resolution by construction.
pub fn distance_critical_params(curve: &(impl PlaneCurve + ?Sized), o: Vec2) -> Vec<f64> {
    distance_critical_params_with(curve, o, tol::EQ_SCAN_SAMPLES)
}

/// [`distance_critical_params`] at a caller-chosen scan density. A root pair
/// closer than one scan cell is lost, so callers that bisect on the count
/// (crossing detection) pick the density that bounds how far the numerical
/// jump can sit from the true tangency.
pub fn distance_critical_params_with(
    curve: &(impl PlaneCurve + ?Sized),
    o: Vec2,
    n: usize,
) -> Vec<f64> {
    let (lo, _) = curve.domain();
    let span = curve.span();
    let closed = curve.is_closed();
    let samples = if closed { n } else { n + 1 };
    let step = span / n as f64;
    let gs: Vec<f64> = (0..samples)
        .map(|i| g_of(curve, o, lo + step * i as f64))
        .collect();
    let mut roots = Vec::new();
    let pairs = if closed { n } else { n };
    for i in 0..pairs {
        let (a_idx, b_idx) = (i, (i + 1) % samples);
        let ta = lo + step * a_idx as f64;
        let tb = lo + step * (i + 1) as f64;
        let (ga, gb) = (gs[a_idx], gs[b_idx]);
        if ga == 0.0 {
            // Sample exactly on a root: claim it here, skip the bracket.
            roots.push(ta);
            continue;
        }
        if ga.signum() == gb.signum() || gb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (ta, tb, ga);
        let tol_t = tol::EQ_PARAM_REL * span;
        while b - a > tol_t {
            let m = 0.5 * (a + b);
            let fm = g_of(curve, o, m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// Number of parameters where the normal line passes through q.
pub fn normal_count(curve: &(impl PlaneCurve + ?Sized), q: Vec2) -> usize {
    distance_critical_params(curve, q).len()
}

/// True when o is strictly inside a closed curve (dense polygon winding).
pub fn contains(curve: &(impl PlaneCurve + ?Sized), o: Vec2) -> bool {
    if !curve.is_closed() {
        return false;
    }
    let (lo, _) = curve.domain();
    let span = curve.span();
    let n = 1024;
    // Sample once and wrap by index so the polygon closes exactly; evaluating
    // point(lo + span) instead of reusing point(lo) can differ by float noise
    // and drop a seam crossing for points near that level.
    let pts: Vec<Vec2> = (0..n)
        .map(|i| curve.point(lo + span * i as f64 / n as f64) - o)
        .collect();
    let mut winding = 0i32;
    for i in 0..n {
        let prev = pts[i];
        let cur = pts[(i + 1) % n];
        if prev.y <= 0.0 && cur.y > 0.0 && prev.cross(cur) > 0.0 {
            winding += 1;
        } else if prev.y > 0.0 && cur.y <= 0.0 && prev.cross(cur) < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Derivatives of h(tau) = |r(tau) - o| up to the requested order (<= 4),
/// via the chain rule on u = h^2.
pub fn distance_derivatives(
    curve: &(impl PlaneCurve + ?Sized),
    o: Vec2,
    tau: f64,
    order: usize,
) -> Result<Vec<f64>, CurveError> {
    assert!((1..=4).contains(&order));
    let d0 = curve.point(tau) - o;
    let d1 = curve.eval(tau, 1)?;
    let h = d0.norm();
    let mut out = vec![h];
    let u1 = 2.0 * d0.dot(d1);
    let h1 = u1 / (2.0 * h);
    out.push(h1);
    if order >= 2 {
        let d2 = curve.eval(tau, 2)?;
        let u2 = 2.0 * (d1.norm2() + d0.dot(d2));
        let h2 = (u2 / 2.0 - h1 * h1) / h;
        out.push(h2);
        if order >= 3 {
            let d3 = curve.eval(tau, 3)?;
            let u3 = 2.0 * (3.0 * d1.dot(d2) + d0.dot(d3));
            let h3 = (u3 / 2.0 - 3.0 * h1 * h2) / h;
            out.push(h3);
            if order >= 4 {
                let d4 = curve.eval(tau, 4)?;
                let u4 = 2.0 * (3.0 * d2.norm2() + 4.0 * d1.dot(d3) + d0.dot(d4));
                let h4 = (u4 / 2.0 - 3.0 * h2 * h2 - 4.0 * h1 * h3) / h;
                out.push(h4);
            }
        }
    }
    Ok(out)
}

/// Smallest k >= 2 with a nonvanishing k-th distance derivative at tau_m.
/// Orders 2..=4 use exact curve derivatives; order 5 falls back to a
/// finite-difference stencil before giving up.
pub fn degeneracy_order(
    curve: &(impl PlaneCurve + ?Sized),
    o: Vec2,
    tau_m: f64,
) -> Result<usize, CurveError> {
    let scale = curve.scale();
    let span = curve.span();
    let max_analytic = curve.max_order().min(4);
    let ds = distance_derivatives(curve, o, tau_m, max_analytic)?;
    for (k, dk) in ds.iter().enumerate().take(max_analytic + 1).skip(2) {
        // normalize to a dimensionless magnitude: h^(k) * span^k / scale
        if (dk * span.powi(k as i32) / scale).abs() > tol::ORDER_DERIV_BAND {
            return Ok(k);
        }
    }
    // order-5 check by finite differences of h itself
    let h = 1e-3 * span / tol::EQ_SCAN_SAMPLES as f64 * 64.0;
    let f = |t: f64| (curve.point(t) - o).norm();
    let d5 = (-f(tau_m - 3.0 * h) + 4.0 * f(tau_m - 2.0 * h) - 5.0 * f(tau_m - h)
        + 5.0 * f(tau_m + h)
        - 4.0 * f(tau_m + 2.0 * h)
        + f(tau_m + 3.0 * h))
        / (2.0 * h.powi(5));
    if (d5 * span.powi(5) / scale).abs() > 1e3 * tol::ORDER_DERIV_BAND {
        Ok(5)
    } else {
        Err(CurveError::OrderTooHigh { max_checked: 5 })
    }
}

/// All critical points of the distance function from o, classified.
/// Requires o strictly inside closed curves.
pub fn global_equilibria(
    curve: &(impl PlaneCurve + ?Sized),
    o: Vec2,
) -> Result<Vec<SmoothEquilibrium>, CurveError> {
    global_equilibria_with(curve, o, tol::EQ_SCAN_SAMPLES)
}

/// [`global_equilibria`] at a caller-chosen scan density.
pub fn global_equilibria_with(
    curve: &(impl PlaneCurve + ?Sized),
    o: Vec2,
    samples: usize,
) -> Result<Vec<SmoothEquilibrium>, CurveError> {
    if curve.is_closed() && !contains(curve, o) {
        return Err(CurveError::NotInterior);
    }
    let mut out = Vec::new();
    for tau in distance_critical_params_with(curve, o, samples) {
        let position = curve.point(tau);
        let rho = (position - o).norm();
        let kappa = signed_curvature(curve, tau)?;
        let f = 1.0 + kappa * rho;
        let stability = if f > 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        let order = if f.abs() < tol::DEGENERACY_BAND {
            degeneracy_order(curve, o, tau).unwrap_or(2)
        } else {
            2
        };
        out.push(SmoothEquilibrium {
            tau,
            position,
            stability,
            rho,
            kappa,
            order,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// concrete curve kinds

/// Periodic uniform cubic spline through sample points, parameter in [0, 1].
#[derive(Clone, Debug, Default)]
pub struct PeriodicSpline {
    ys: Vec<Vec2>,
    /// Second derivatives at the knots (cyclic tridiagonal solve).
    m: Vec<Vec2>,
}

impl PeriodicSpline {
    fn build(samples: &[Vec2]) -> PeriodicSpline {
        let n = samples.len();
        let h = 1.0 / n as f64;
        let solve = |rhs: &[f64]| -> Vec<f64> {
            // cyclic tridiagonal with diag 4, off-diag 1 (Sherman-Morrison)
            let n = rhs.len();
            let gamma = -4.0;
            let mut diag = vec![4.0; n];
            diag[0] -= gamma;
            diag[n - 1] -= 1.0 / gamma;
            let tri = |d: &[f64], r: &[f64]| -> Vec<f64> {
                let mut c = vec![0.0; n];
                let mut x = vec![0.0; n];
                c[0] = 1.0 / d[0];
                x[0] = r[0] / d[0];
                for i in 1..n {
                    let m = d[i] - c[i - 1];
                    c[i] = 1.0 / m;
                    x[i] = (r[i] - x[i - 1]) / m;
                }
                for i in (0..n - 1).rev() {
                    let xi1 = x[i + 1];
                    x[i] -= c[i] * xi1;
                }
                x
            };
            let x = tri(&diag, rhs);
            let mut u = vec![0.0; n];
            u[0] = gamma;
            u[n - 1] = 1.0;
            let z = tri(&diag, &u);
            let fact = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
            (0..n).map(|i| x[i] - fact * z[i]).collect()
        };
        let rhs_of = |pick: fn(Vec2) -> f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let ym = pick(samples[(i + n - 1) % n]);
                    let y0 = pick(samples[i]);
                    let yp = pick(samples[(i + 1) % n]);
                    6.0 * (ym - 2.0 * y0 + yp) / (h * h)
                })
                .collect()
        };
        let mx = solve(&rhs_of(|p| p.x));
        let my = solve(&rhs_of(|p| p.y));
        PeriodicSpline {
            ys: samples.to_vec(),
            m: mx.into_iter().zip(my).map(|(x, y)| v2(x, y)).collect(),
        }
    }

    fn eval(&self, t: f64, order: usize) -> Vec2 {
        let n = self.ys.len();
        let h = 1.0 / n as f64;
        let tw = t.rem_euclid(1.0);
        let i = ((tw / h) as usize).min(n - 1);
        let s = (tw - i as f64 * h) / h;
        let (y0, y1) = (self.ys[i], self.ys[(i + 1) % n]);
        let (m0, m1) = (self.m[i], self.m[(i + 1) % n]);
        let a = 1.0 - s;
        match order {
            0 => {
                y0 * a + y1 * s
                    + (m0 * (a * a * a - a) + m1 * (s * s * s - s)) * (h * h / 6.0)
            }
            1 => {
                (y1 - y0) / h
                    + (m0 * (1.0 - 3.0 * a * a) + m1 * (3.0 * s * s - 1.0)) * (h / 6.0)
            }
            2 => m0 * a + m1 * s,
            3 => (m1 - m0) / h,
            _ => unreachable!(),
        }
    }
}

/// Curve descriptions; the JSON form is the on-disk contract.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothCurve {
    Ellipse {
        a: f64,
        b: f64,
    },
    /// rho(phi) = c0 + sum_k cos[k]*cos((k+1)phi) + sin[k]*sin((k+1)phi),
    /// traced as rho(phi) * (cos phi, sin phi).
    PolarFourier {
        c0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Open graph window y = rho0 + (kappa/2)x^2 + a3 x^3 + a4 x^4 over
    /// x in [-half_width, half_width], reference side below the graph.
    GraphJet {
        rho0: f64,
        kappa: f64,
        #[serde(default)]
        a3: f64,
        #[serde(default)]
        a4: f64,
        half_width: f64,
    },
    /// Closed periodic cubic spline through the samples, parameter in [0,1].
    PolylineSpline {
        samples: Vec<[f64; 2]>,
        #[serde(skip, default)]
        spline: OnceLock<PeriodicSpline>,
    },
}

impl SmoothCurve {
    pub fn ellipse(a: f64, b: f64) -> Result<SmoothCurve, CurveError> {
        SmoothCurve::Ellipse { a, b }.validated()
    }

    pub fn circle(r: f64) -> Result<SmoothCurve, CurveError> {
        SmoothCurve::ellipse(r, r)
    }

    pub fn polar_fourier(c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<SmoothCurve, CurveError> {
        SmoothCurve::PolarFourier { c0, cos, sin }.validated()
    }

    pub fn graph_jet(
        rho0: f64,
        kappa: f64,
        a3: f64,
        a4: f64,
        half_width: f64,
    ) -> Result<SmoothCurve, CurveError> {
        SmoothCurve::GraphJet {
            rho0,
            kappa,
            a3,
            a4,
            half_width,
        }
        .validated()
    }

    pub fn polyline_spline(samples: Vec<[f64; 2]>) -> Result<SmoothCurve, CurveError> {
        SmoothCurve::PolylineSpline {
            samples,
            spline: OnceLock::new(),
        }
        .validated()
    }

    pub fn from_json(text: &str) -> Result<SmoothCurve, CurveError> {
        let c: SmoothCurve =
            serde_json::from_str(text).map_err(|e| CurveError::Json(e.to_string()))?;
        c.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("curve serialization cannot fail")
    }

    /// Validates parameters, reorients closed inputs counterclockwise and
    /// checks convexity where the kind promises it.
    pub fn validated(self) -> Result<SmoothCurve, CurveError> {
        let ok = match self {
            SmoothCurve::Ellipse { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(CurveError::Invalid("ellipse needs a > 0, b > 0".into()));
                }
                SmoothCurve::Ellipse { a, b }
            }
            SmoothCurve::PolarFourier { c0, cos, sin } => {
                let c = SmoothCurve::PolarFourier { c0, cos, sin };
                for i in 0..512 {
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / 512.0;
                    let rho = c.polar_radius(phi, 0);
                    if rho <= 0.0 {
                        return Err(CurveError::Invalid(format!(
                            "polar radius not positive at phi = {phi}"
                        )));
                    }
                }
                c.check_convex()?;
                c
            }
            SmoothCurve::GraphJet {
                rho0,
                kappa,
                a3,
                a4,
                half_width,
            } => {
                if !(rho0 > 0.0 && half_width > 0.0 && kappa < 0.0) {
                    return Err(CurveError::Invalid(
                        "graph jet needs rho0 > 0, half_width > 0, kappa < 0".into(),
                    ));
                }
                let c = SmoothCurve::GraphJet {
                    rho0,
                    kappa,
                    a3,
                    a4,
                    half_width,
                };
                c.check_convex()?;
                c
            }
            SmoothCurve::PolylineSpline { mut samples, .. } => {
                if samples.len() < 4 {
                    return Err(CurveError::Invalid("spline needs at least 4 samples".into()));
                }
                let area2: f64 = samples
                    .iter()
                    .zip(samples.iter().cycle().skip(1))
                    .map(|(p, q)| p[0] * q[1] - q[0] * p[1])
                    .sum();
                if area2 == 0.0 {
                    return Err(CurveError::Invalid("spline samples are degenerate".into()));
                }
                if area2 < 0.0 {
                    samples.reverse();
                }
                let c = SmoothCurve::PolylineSpline {
                    samples,
                    spline: OnceLock::new(),
                };
                c.check_convex()?;
                c
            }
        };
        Ok(ok)
    }

    fn check_convex(&self) -> Result<(), CurveError> {
        let (lo, _) = self.domain();
        let span = self.span();
        for i in 0..512 {
            let tau = lo + span * (i as f64 + 0.5) / 512.0;
            let k = signed_curvature(self, tau)?;
            if k >= 0.0 {
                return Err(CurveError::Invalid(format!(
                    "curve is not convex near parameter {tau} (kappa = {k})"
                )));
            }
        }
        Ok(())
    }

    fn polar_radius(&self, phi: f64, order: usize) -> f64 {
        let SmoothCurve::PolarFourier { c0, cos, sin } = self else {
            unreachable!()
        };
        let mut acc = if order == 0 { *c0 } else { 0.0 };
        for (k, &ck) in cos.iter().enumerate() {
            let f = (k + 1) as f64;
            acc += ck * f.powi(order as i32) * (f * phi + order as f64 * std::f64::consts::FRAC_PI_2).cos();
        }
        for (k, &sk) in sin.iter().enumerate() {
            let f = (k + 1) as f64;
            acc += sk * f.powi(order as i32) * (f * phi + order as f64 * std::f64::consts::FRAC_PI_2).sin();
        }
        acc
    }

    fn graph_height(&self, x: f64, order: usize) -> f64 {
        let SmoothCurve::GraphJet {
            rho0,
            kappa,
            a3,
            a4,
            ..
        } = self
        else {
            unreachable!()
        };
        match order {
            0 => rho0 + 0.5 * kappa * x * x + a3 * x * x * x + a4 * x * x * x * x,
            1 => kappa * x + 3.0 * a3 * x * x + 4.0 * a4 * x * x * x,
            2 => kappa + 6.0 * a3 * x + 12.0 * a4 * x * x,
            3 => 6.0 * a3 + 24.0 * a4 * x,
            4 => 24.0 * a4,
            _ => unreachable!(),
        }
    }
}

impl PlaneCurve for SmoothCurve {
    fn domain(&self) -> (f64, f64) {
        match self {
            SmoothCurve::Ellipse { .. } | SmoothCurve::PolarFourier { .. } => {
                (0.0, 2.0 * std::f64::consts::PI)
            }
            SmoothCurve::GraphJet { half_width, .. } => (-half_width, *half_width),
            SmoothCurve::PolylineSpline { .. } => (0.0, 1.0),
        }
    }

    fn is_closed(&self) -> bool {
        !matches!(self, SmoothCurve::GraphJet { .. })
    }

    fn max_order(&self) -> usize {
        match self {
            SmoothCurve::PolylineSpline { .. } => 3,
            _ => 4,
        }
    }

    fn interior_on_left(&self) -> bool {
        // Closed kinds are counterclockwise; the graph window runs left to
        // right with the reference side below it.
        !matches!(self, SmoothCurve::GraphJet { .. })
    }

    fn eval(&self, tau: f64, order: usize) -> Result<Vec2, CurveError> {
        if order > self.max_order() {
            return Err(CurveError::UnsupportedOrder {
                order,
                max: self.max_order(),
            });
        }
        match self {
            SmoothCurve::Ellipse { a, b } => {
                let (s, c) = tau.sin_cos();
                Ok(match order % 4 {
                    0 => v2(a * c, b * s),
                    1 => v2(-a * s, b * c),
                    2 => v2(-a * c, -b * s),
                    _ => v2(a * s, -b * c),
                })
            }
            SmoothCurve::PolarFourier { .. } => {
                // r = rho(phi) u(phi); u derivatives cycle with period 4.
                let u = |m: usize| -> Vec2 {
                    let (s, c) = tau.sin_cos();
                    match m % 4 {
                        0 => v2(c, s),
                        1 => v2(-s, c),
                        2 => v2(-c, -s),
                        _ => v2(s, -c),
                    }
                };
                let binom = [
                    [1.0, 0.0, 0.0, 0.0, 0.0],
                    [1.0, 1.0, 0.0, 0.0, 0.0],
                    [1.0, 2.0, 1.0, 0.0, 0.0],
                    [1.0, 3.0, 3.0, 1.0, 0.0],
                    [1.0, 4.0, 6.0, 4.0, 1.0],
                ];
                let mut acc = v2(0.0, 0.0);
                for j in 0..=order {
                    acc += u(order - j) * (binom[order][j] * self.polar_radius(tau, j));
                }
                Ok(acc)
            }
            SmoothCurve::GraphJet { .. } => Ok(match order {
                0 => v2(tau, self.graph_height(tau, 0)),
                1 => v2(1.0, self.graph_height(tau, 1)),
                _ => v2(0.0, self.graph_height(tau, order)),
            }),
            SmoothCurve::PolylineSpline { samples, spline } => {
                let sp = spline.get_or_init(|| {
                    PeriodicSpline::build(
                        &samples.iter().map(|p| v2(p[0], p[1])).collect::<Vec<_>>(),
                    )
                });
                Ok(sp.eval(tau, order))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse() -> SmoothCurve {
        SmoothCurve::ellipse(2.0, 1.5).unwrap()
    }

    /// Five-point central-difference curvature from position evaluations
    /// only; shares nothing with the analytic derivative path.
    fn fd_curvature(curve: &SmoothCurve, tau: f64) -> f64 {
        let h = 1e-4;
        let p = |t: f64| curve.point(t);
        let d1 = (p(tau - 2.0 * h) - p(tau - h) * 8.0 + p(tau + h) * 8.0 - p(tau + 2.0 * h))
            / (12.0 * h);
        let d2 = (-p(tau - 2.0 * h) + p(tau - h) * 16.0 - p(tau) * 30.0 + p(tau + h) * 16.0
            - p(tau + 2.0 * h))
            / (12.0 * h * h);
        let s = d1.norm2();
        let sign = if curve.interior_on_left() { -1.0 } else { 1.0 };
        sign * d1.cross(d2) / (s * s.sqrt())
    }

    #[test]
    fn ellipse_vertex_curvatures_match_closed_form() {
        let c = ellipse();
        let k_major = signed_curvature(&c, 0.0).unwrap();
        let k_minor = signed_curvature(&c, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((k_major - (-2.0 / 2.25)).abs() < 1e-14);
        assert!((k_minor - (-1.5 / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn circle_curvature_is_minus_inverse_radius() {
        let c = SmoothCurve::circle(3.0).unwrap();
        for i in 0..16 {
            let tau = i as f64 * 0.4;
            assert!((signed_curvature(&c, tau).unwrap() + 1.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn curvature_agrees_with_finite_difference_oracle() {
        let curves = vec![
            ellipse(),
            SmoothCurve::polar_fourier(1.0, vec![0.0, 0.01], vec![0.0, 0.0, 0.008]).unwrap(),
            SmoothCurve::graph_jet(1.0, -1.0, 0.2, 0.1, 0.4).unwrap(),
        ];
        for c in &curves {
            let (lo, _) = c.domain();
            let span = c.span();
            for i in 0..37 {
                let tau = lo + span * (0.05 + 0.9 * i as f64 / 37.0);
                let exact = signed_curvature(c, tau).unwrap();
                let fd = fd_curvature(c, tau);
                assert!(
                    ((exact - fd) / exact).abs() < 1e-6,
                    "kappa mismatch at tau={tau}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn curvature_derivative_matches_finite_difference() {
        let c = ellipse();
        for i in 1..20 {
            let tau = i as f64 * 0.3;
            let h = 1e-5;
            let fd = (signed_curvature(&c, tau + h).unwrap()
                - signed_curvature(&c, tau - h).unwrap())
                / (2.0 * h);
            let exact = curvature_derivative(&c, tau).unwrap();
            assert!((exact - fd).abs() < 1e-6 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn curvature_second_matches_finite_difference() {
        let c = ellipse();
        for i in 1..20 {
            let tau = i as f64 * 0.3;
            let h = 1e-4;
            let fd = (signed_curvature(&c, tau + h).unwrap()
                - 2.0 * signed_curvature(&c, tau).unwrap()
                + signed_curvature(&c, tau - h).unwrap())
                / (h * h);
            let exact = curvature_second(&c, tau).unwrap();
            assert!((exact - fd).abs() < 1e-5 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn evolute_of_ellipse_hits_the_astroid_vertex() {
        let e = evolute_point(&ellipse(), 0.0).unwrap();
        assert!((e.x - 0.875).abs() < 1e-12, "evolute x = {}", e.x);
        assert!(e.y.abs() < 1e-12);
    }

    #[test]
    fn evolute_lies_on_the_normal_line() {
        let c = SmoothCurve::polar_fourier(1.0, vec![0.0, 0.015], vec![0.012]).unwrap();
        let scale = c.scale();
        for i in 0..100 {
            let tau = c.span() * i as f64 / 100.0;
            let e = evolute_point(&c, tau).unwrap();
            let p = c.point(tau);
            let t = c.eval(tau, 1).unwrap();
            // e - p must be parallel to the normal: zero tangential part
            assert!(
                (e - p).dot(t.normalized()).abs() < 1e-9 * scale,
                "normal line misses evolute at tau={tau}"
            );
        }
    }

    #[test]
    fn ellipse_evolute_cusps_sit_at_the_vertices() {
        let c = ellipse();
        use std::f64::consts::FRAC_PI_2;
        for i in 0..4 {
            let class = classify_evolute_point(&c, i as f64 * FRAC_PI_2).unwrap();
            assert_eq!(class, EvolutePointClass::Cusp);
        }
        assert_eq!(
            classify_evolute_point(&c, 0.7).unwrap(),
            EvolutePointClass::General
        );
    }

    #[test]
    fn circle_has_no_evolute_point_class() {
        let c = SmoothCurve::circle(1.0).unwrap();
        assert!(matches!(
            classify_evolute_point(&c, 1.0),
            Err(CurveError::DegenerateCusp { .. })
        ));
    }

    #[test]
    fn ellipse_center_equilibria_alternate_minor_stable() {
        let eqs = global_equilibria(&ellipse(), v2(0.0, 0.0)).unwrap();
        assert_eq!(eqs.len(), 4);
        let stable: Vec<_> = eqs
            .iter()
            .filter(|e| e.stability == Stability::Stable)
            .collect();
        let unstable: Vec<_> = eqs
            .iter()
            .filter(|e| e.stability == Stability::Unstable)
            .collect();
        assert_eq!(stable.len(), 2);
        assert_eq!(unstable.len(), 2);
        for e in stable {
            // minor-axis ends
            assert!(e.position.x.abs() < 1e-9);
            assert!((e.position.y.abs() - 1.5).abs() < 1e-9);
            assert!((e.rho - 1.5).abs() < 1e-9);
            assert_eq!(e.order, 2);
        }
        for e in unstable {
            assert!((e.position.x.abs() - 2.0).abs() < 1e-9);
            assert!(e.position.y.abs() < 1e-9);
        }
    }

    #[test]
    fn offset_circle_has_two_equilibria() {
        let c = SmoothCurve::circle(1.0).unwrap();
        let eqs = global_equilibria(&c, v2(0.3, 0.0)).unwrap();
        assert_eq!(eqs.len(), 2);
        let n_stable = eqs
            .iter()
            .filter(|e| e.stability == Stability::Stable)
            .count();
        assert_eq!(n_stable, 1);
    }

    #[test]
    fn exterior_reference_point_is_rejected() {
        assert!(matches!(
            global_equilibria(&ellipse(), v2(5.0, 0.0)),
            Err(CurveError::NotInterior)
        ));
    }

    #[test]
    fn classification_is_scale_invariant() {
        let small = ellipse();
        let big = SmoothCurve::ellipse(20.0, 15.0).unwrap();
        let a = global_equilibria(&small, v2(0.3, 0.2)).unwrap();
        let b = global_equilibria(&big, v2(3.0, 2.0)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.stability, y.stability);
            assert!((x.tau - y.tau).abs() < 1e-9);
            assert!((x.kappa * x.rho - y.kappa * y.rho).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_json_round_trips_with_contract_field_names() {
        let text = r#"{"kind":"ellipse","a":2.0,"b":1.5}"#;
        let c = SmoothCurve::from_json(text).unwrap();
        assert!(matches!(c, SmoothCurve::Ellipse { .. }));
        let back = c.to_json();
        assert!(back.contains("\"kind\":\"ellipse\""));
        assert!(back.contains("\"a\":2.0"));

        let text = r#"{"kind":"polar_fourier","cos":[0.0,0.01],"sin":[],"c0":1.0}"#;
        let c = SmoothCurve::from_json(text).unwrap();
        assert!((c.point(0.0).x - 1.01).abs() < 1e-12);
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(SmoothCurve::ellipse(-1.0, 1.0).is_err());
        assert!(SmoothCurve::from_json(r#"{"kind":"ellipse","a":0.0,"b":1.0}"#).is_err());
        // strongly rippled polar curve is not convex
        assert!(SmoothCurve::polar_fourier(1.0, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3], vec![]).is_err());
    }

    #[test]
    fn order_above_smoothness_errors() {
        let c = SmoothCurve::polyline_spline(
            (0..32)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / 32.0;
                    [2.0 * t.cos(), 1.5 * t.sin()]
                })
                .collect(),
        )
        .unwrap();
        assert!(c.eval(0.3, 3).is_ok());
        assert!(matches!(
            c.eval(0.3, 4),
            Err(CurveError::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn spline_through_ellipse_samples_tracks_ellipse_curvature() {
        let n = 256;
        let c = SmoothCurve::polyline_spline(
            (0..n)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    [2.0 * t.cos(), 1.5 * t.sin()]
                })
                .collect(),
        )
        .unwrap();
        let k = signed_curvature(&c, 0.0).unwrap();
        // spline parameter 0 sits at the major-axis vertex
        assert!(
            (k - (-2.0 / 2.25)).abs() < 1e-3,
            "spline curvature {k} too far from closed form"
        );
    }

    #[test]
    fn clockwise_spline_input_is_reoriented() {
        let n = 64;
        let cw: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = -2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let c = SmoothCurve::polyline_spline(cw).unwrap();
        assert!(signed_curvature(&c, 0.37).unwrap() < 0.0);
    }

    #[test]
    fn degeneracy_order_distinguishes_center_cusp_and_generic_point() {
        let c = ellipse();
        use std::f64::consts::FRAC_PI_2;
        // centroid: plain nondegenerate minimum at the minor vertex
        assert_eq!(degeneracy_order(&c, v2(0.0, 0.0), FRAC_PI_2).unwrap(), 2);
        // evolute cusp behind the major vertex: fourth order
        assert_eq!(degeneracy_order(&c, v2(0.875, 0.0), 0.0).unwrap(), 4);
        // generic evolute point: third order
        let tau = 0.9;
        let e = evolute_point(&c, tau).unwrap();
        assert_eq!(degeneracy_order(&c, e, tau).unwrap(), 3);
    }

    #[test]
    fn degeneracy_order_is_reparametrization_invariant() {
        // same ellipse, nonuniform parameter speed via a warped wrapper
        struct Warped(SmoothCurve);
        impl PlaneCurve for Warped {
            fn domain(&self) -> (f64, f64) {
                self.0.domain()
            }
            fn is_closed(&self) -> bool {
                true
            }
            fn max_order(&self) -> usize {
                4
            }
            fn interior_on_left(&self) -> bool {
                true
            }
            fn eval(&self, s: f64, order: usize) -> Result<Vec2, CurveError> {
                // tau(s) = s + 0.3 sin s, composed by Faa di Bruno
                let t0 = s + 0.3 * s.sin();
                let t1 = 1.0 + 0.3 * s.cos();
                let t2 = -0.3 * s.sin();
                let t3 = -0.3 * s.cos();
                let t4 = 0.3 * s.sin();
                let r1 = self.0.eval(t0, 1)?;
                if order == 0 {
                    return self.0.eval(t0, 0);
                }
                let r2 = self.0.eval(t0, 2)?;
                let r3 = self.0.eval(t0, 3)?;
                let r4 = self.0.eval(t0, 4)?;
                Ok(match order {
                    1 => r1 * t1,
                    2 => r2 * (t1 * t1) + r1 * t2,
                    3 => r3 * (t1 * t1 * t1) + r2 * (3.0 * t1 * t2) + r1 * t3,
                    4 => {
                        r4 * (t1 * t1 * t1 * t1)
                            + r3 * (6.0 * t1 * t1 * t2)
                            + r2 * (3.0 * t2 * t2 + 4.0 * t1 * t3)
                            + r1 * t4
                    }
                    _ => unreachable!(),
                })
            }
        }
        let base = ellipse();
        let warped = Warped(ellipse());
        // warped parameter s with tau(s) = 0: s = 0; tau(s) = pi/2 requires
        // solving s + 0.3 sin s = pi/2
        let mut s = std::f64::consts::FRAC_PI_2;
        for _ in 0..60 {
            s -= (s + 0.3 * s.sin() - std::f64::consts::FRAC_PI_2) / (1.0 + 0.3 * s.cos());
        }
        let o = v2(0.875, 0.0);
        assert_eq!(
            degeneracy_order(&base, o, 0.0).unwrap(),
            degeneracy_order(&warped, o, 0.0).unwrap()
        );
        let o2 = v2(0.0, 0.0);
        assert_eq!(
            degeneracy_order(&base, o2, std::f64::consts::FRAC_PI_2).unwrap(),
            degeneracy_order(&warped, o2, s).unwrap()
        );
    }
}
