//! Ordinary least-squares line fits for log-log exponent estimation.

use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    /// ~95% interval half-width (2 standard errors).
    pub slope_ci95: f64,
}

/// Least-squares fit of `y = intercept + slope * x`.
///
/// Requires at least 3 points; degenerate abscissae yield NaN fields.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert!(xs.len() == ys.len() && xs.len() >= 3, "need >= 3 points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let slope_stderr = (ss_res / dof / sxx).sqrt();
    LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        slope_ci95: 2.0 * slope_stderr,
    }
}

/// Fit on (ln x, ln y); pairs with non-positive coordinates are skipped.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> LineFit {
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 {
            lx.push(x.ln());
            ly.push(y.ln());
        }
    }
    fit_line(&lx, &ly)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> Estimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-9);
    }

    #[test]
    fn loglog_recovers_power_law() {
        let xs: Vec<f64> = (1..9).map(|i| 2f64.powi(-i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x.powf(-2.0 / 3.0)).collect();
        let f = fit_loglog(&xs, &ys);
        assert!((f.slope + 2.0 / 3.0).abs() < 1e-10);
        assert!(f.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn mean_stderr_matches_hand_computation() {
        let e = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.mean - 2.5).abs() < 1e-15);
        // sample variance 5/3, stderr = sqrt(5/12)
        assert!((e.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
