//! Small statistical helpers: moments, binomial bounds, least squares,
//! and an integrated-autocorrelation-time estimator via batch means.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of a Bernoulli frequency `p_hat` over `n` trials.
pub fn binomial_stderr(p_hat: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Wilson score upper confidence bound for a binomial proportion.
pub fn wilson_upper(successes: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let spread = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center + spread) / denom).min(1.0)
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LineFit { slope, intercept, r2 })
}

/// Integrated autocorrelation time estimate for an evenly spaced series.
#[derive(Debug, Clone, Copy)]
pub struct IatEstimate {
    /// Integrated autocorrelation time in the units of `dt`.
    pub tau: f64,
    /// Statistical inefficiency g = 2 tau / dt (spacing-free form).
    pub inefficiency: f64,
    /// Half-width of a ~1-sigma interval on tau.
    pub tau_stderr: f64,
    /// Batch size selected by the automatic window.
    pub batch_size: usize,
}

/// Batch-means estimator of the integrated autocorrelation time.
///
/// The series is split into batches of size b; the statistical
/// inefficiency is g(b) = b Var(batch means)/Var(x). b doubles until
/// g(b) stops growing by more than 10% or fewer than 16 batches remain,
/// the usual automatic-window rule. tau = dt * g / 2, so an i.i.d.
/// series sampled every dt has tau ~ dt/2 and an exponential
/// autocorrelation exp(-t) sampled finely has tau ~ 1.
pub fn iat_batch_means(series: &[f64], dt: f64) -> IatEstimate {
    let n = series.len();
    let var = variance(series);
    if n < 32 || var == 0.0 {
        return IatEstimate { tau: dt / 2.0, inefficiency: 1.0, tau_stderr: 0.0, batch_size: 1 };
    }
    let mut best_g = 1.0f64;
    let mut best_b = 1usize;
    let mut best_batches = n;
    let mut b = 1usize;
    while n / b >= 16 {
        let k = n / b;
        let means: Vec<f64> = (0..k)
            .map(|i| series[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
            .collect();
        let g = (b as f64 * variance(&means) / var).max(1.0);
        if g > best_g {
            // Stop once the growth between successive doublings falls
            // under 10%: the batch means are then effectively independent.
            let grew = g / best_g;
            best_g = g;
            best_b = b;
            best_batches = k;
            if b > 1 && grew < 1.10 {
                break;
            }
        } else if b > 1 {
            break;
        }
        b *= 2;
    }
    let tau = dt * best_g / 2.0;
    // Relative error of a batch-means variance with k batches is ~ sqrt(2/k).
    let rel = (2.0 / best_batches as f64).sqrt();
    IatEstimate { tau, inefficiency: best_g, tau_stderr: tau * rel, batch_size: best_b }
}

/// log(sum exp(xs)) guarded against overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_bound_dominates_frequency() {
        assert!(wilson_upper(0, 100, 3.0) > 0.0);
        assert!(wilson_upper(50, 100, 3.0) > 0.5);
        assert!(wilson_upper(100, 100, 3.0) <= 1.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 0.7 * x).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-12);
        assert!((fit.intercept - 2.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iat_of_iid_series_is_half_spacing() {
        let mut rng = crate::rng::replica_stream(11, crate::rng::StreamTag::Probe, 0);
        let series: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let est = iat_batch_means(&series, 1.0);
        assert!(est.tau < 0.75, "iid tau should be ~0.5, got {}", est.tau);
    }

    #[test]
    fn iat_detects_correlation() {
        // AR(1) with phi = 0.9 has g = (1+phi)/(1-phi) = 19.
        let mut rng = crate::rng::replica_stream(12, crate::rng::StreamTag::Probe, 0);
        let mut x = 0.0f64;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let est = iat_batch_means(&series, 1.0);
        assert!(est.inefficiency > 10.0, "expected g near 19, got {}", est.inefficiency);
        assert!(est.inefficiency < 30.0, "expected g near 19, got {}", est.inefficiency);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
