//! GLRT detector for `Σ = I` against a spiked alternative.
//!
//! The statistic is `D = tr R - log det R - P = Σ (λ_i - ln λ_i - 1)`. Under
//! both hypotheses it is asymptotically normal with variance
//! `-2 ln(1 - c) - 2c`; the means are
//!
//! ```text
//! μ0 = P (1 - (c - 1)/c · ln(1 - c)) - ln(1 - c)/2
//! μ1 = P (1 + L(Pσ² + 1)/P - L/P - L ln(Pσ² + 1)/P - (1 - 1/c) ln(1 - c)) + ln(1 - c)/2
//! ```
//!
//! Note the opposite signs of the trailing half-log terms: `μ1` at zero
//! signal differs from `μ0` by [`half_log_discrepancy`]. Both expressions are
//! kept exactly as stated; only `0 < c < 1` is supported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::{log_det_psd, EigenSpectrum};
use crate::matrix::ComplexMatrix;
use crate::models::Hypothesis;

/// Asymptotic normal parameters of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlrtAsymptotics {
    pub mean: f64,
    pub variance: f64,
    pub hypothesis: Hypothesis,
}

impl GlrtAsymptotics {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Normal density with these parameters.
    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std_dev();
        (-0.5 * z * z).exp() / (self.std_dev() * (2.0 * std::f64::consts::PI).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    SignalPresent,
    NoiseOnly,
}

/// Result of one run of the threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    /// Raw statistic `D`.
    #[serde(rename = "D")]
    pub statistic: f64,
    /// `(D - μ0)/σ - γ`.
    #[serde(rename = "G_prime")]
    pub g_prime: f64,
    #[serde(rename = "gamma")]
    pub threshold: f64,
    pub decision: Decision,
    pub p_fa: f64,
}

fn check_regime(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime { c })
    }
}

/// `Σ (λ - ln λ - 1)` over the spectrum.
pub fn glrt_statistic(eigs: &EigenSpectrum) -> Result<f64> {
    if eigs.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if let Some(min) = eigs.smallest() {
        if !(min > 0.0) {
            return Err(Error::SingularMatrix(format!("smallest eigenvalue {min:e}")));
        }
    }
    let terms: Vec<f64> = eigs.values().iter().map(|&l| l - l.ln() - 1.0).collect();
    Ok(crate::stats::pairwise_sum(&terms))
}

/// `tr R - log det R - P` without an eigen-decomposition.
pub fn glrt_statistic_from_matrix(r: &ComplexMatrix) -> Result<f64> {
    let log_det = log_det_psd(r)?;
    Ok(r.trace().re - log_det - r.rows() as f64)
}

/// Common variance `-2 ln(1 - c) - 2c`.
pub fn glrt_variance(c: f64) -> Result<f64> {
    check_regime(c)?;
    Ok(-2.0 * (-c).ln_1p() - 2.0 * c)
}

pub fn h0_asymptotics(antennas: usize, c: f64) -> Result<GlrtAsymptotics> {
    check_regime(c)?;
    let p = antennas as f64;
    let log1mc = (-c).ln_1p();
    Ok(GlrtAsymptotics {
        mean: p * (1.0 - (c - 1.0) / c * log1mc) - log1mc / 2.0,
        variance: glrt_variance(c)?,
        hypothesis: Hypothesis::H0,
    })
}

pub fn h1_asymptotics(antennas: usize, c: f64, taps: usize, channel_power: f64) -> Result<GlrtAsymptotics> {
    check_regime(c)?;
    if !(channel_power >= 0.0) {
        return Err(Error::invalid(format!(
            "channel power must be non-negative, got {channel_power}"
        )));
    }
    let p = antennas as f64;
    let l = taps as f64;
    let log1mc = (-c).ln_1p();
    let spike = p * channel_power + 1.0;
    let inner = 1.0 + l * spike / p - l / p - l * spike.ln() / p - (1.0 - 1.0 / c) * log1mc;
    Ok(GlrtAsymptotics {
        mean: p * inner + log1mc / 2.0,
        variance: glrt_variance(c)?,
        hypothesis: Hypothesis::H1,
    })
}

/// `μ1 - μ0` at zero signal, i.e. `ln(1 - c)`: the gap left by the opposite
/// signs of the half-log terms in the two mean expressions.
pub fn half_log_discrepancy(c: f64) -> Result<f64> {
    check_regime(c)?;
    Ok((-c).ln_1p())
}

/// Upper-tail probability of the standard normal distribution.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `γ = Q⁻¹(p_fa)`, by bisection followed by Newton polishing.
pub fn threshold(p_fa: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(Error::invalid(format!("false-alarm probability must lie in (0, 1), got {p_fa}")));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // Q is decreasing
        if q_function(mid) > p_fa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let density = standard_normal_pdf(x);
        if density == 0.0 {
            break;
        }
        let step = (q_function(x) - p_fa) / density;
        if !step.is_finite() {
            break;
        }
        x += step;
    }
    Ok(x)
}

/// Threshold test on a precomputed statistic.
pub fn decide(statistic: f64, p_fa: f64, antennas: usize, c: f64) -> Result<DetectionOutcome> {
    let h0 = h0_asymptotics(antennas, c)?;
    let gamma = threshold(p_fa)?;
    let g_prime = (statistic - h0.mean) / h0.std_dev() - gamma;
    Ok(DetectionOutcome {
        statistic,
        g_prime,
        threshold: gamma,
        decision: if g_prime > 0.0 {
            Decision::SignalPresent
        } else {
            Decision::NoiseOnly
        },
        p_fa,
    })
}

/// Full detector on a sample-covariance spectrum of `P` antennas at ratio `c`.
pub fn detect(eigs: &EigenSpectrum, p_fa: f64, antennas: usize, c: f64) -> Result<DetectionOutcome> {
    check_regime(c)?;
    if eigs.len() != antennas {
        return Err(Error::DimensionMismatch {
            op: "detect",
            detail: format!("{} eigenvalues for P = {antennas}", eigs.len()),
        });
    }
    decide(glrt_statistic(eigs)?, p_fa, antennas, c)
}

/// Detector on a sample covariance matrix, via trace and log-determinant.
pub fn detect_matrix(r: &ComplexMatrix, p_fa: f64, c: f64) -> Result<DetectionOutcome> {
    check_regime(c)?;
    decide(glrt_statistic_from_matrix(r)?, p_fa, r.rows(), c)
}

/// `Q((μ1 - μ0)/σ - γ)`.
pub fn theoretical_miss_probability(
    antennas: usize,
    c: f64,
    taps: usize,
    channel_power: f64,
    p_fa: f64,
) -> Result<f64> {
    let h0 = h0_asymptotics(antennas, c)?;
    let h1 = h1_asymptotics(antennas, c, taps, channel_power)?;
    let gamma = threshold(p_fa)?;
    Ok(q_function((h1.mean - h0.mean) / h0.std_dev() - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{hermitian_eigenvalues, scm};
    use crate::seed::StreamSeed;

    #[test]
    fn unit_spectrum_gives_zero() {
        assert_eq!(glrt_statistic(&EigenSpectrum::from_values(vec![1.0; 7])).unwrap(), 0.0);
        assert_eq!(glrt_statistic_from_matrix(&ComplexMatrix::identity(5)).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_statistics() {
        let d = glrt_statistic(&EigenSpectrum::from_values(vec![2.0, 0.5])).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let half = ComplexMatrix::from_real_diagonal(&[0.5; 4]);
        let d = glrt_statistic_from_matrix(&half).unwrap();
        assert!((d - 4.0 * (0.5 + 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((d - 0.772_589).abs() < 1e-6);
    }

    #[test]
    fn singular_spectra_rejected() {
        assert!(matches!(
            glrt_statistic(&EigenSpectrum::from_values(vec![1.0, 0.0])),
            Err(Error::SingularMatrix(_))
        ));
        assert!(glrt_statistic(&EigenSpectrum::from_values(vec![1.0, -0.1])).is_err());
    }

    #[test]
    fn matrix_path_matches_eigen_path() {
        let w = crate::models::sample_noise(16, 48, &mut StreamSeed::new(12).rng());
        let r = scm(&w).unwrap();
        let a = glrt_statistic(&hermitian_eigenvalues(&r).unwrap()).unwrap();
        let b = glrt_statistic_from_matrix(&r).unwrap();
        assert!((a - b).abs() <= 1e-8 * a.abs());
    }

    #[test]
    fn h0_reference_values() {
        let h0 = h0_asymptotics(256, 0.5).unwrap();
        assert!((h0.mean - 78.9009).abs() < 5e-5, "{}", h0.mean);
        assert!((h0.variance - 0.386_294).abs() < 1e-6);
    }

    #[test]
    fn h0_small_ratio_series() {
        // μ0 ≈ P c / 2 for small c
        let p = 256;
        let c = 1e-3;
        let mu = h0_asymptotics(p, c).unwrap().mean;
        let approx = p as f64 * c / 2.0;
        assert!((mu - approx).abs() <= 0.05 * approx, "{mu} vs {approx}");
    }

    #[test]
    fn regime_checks() {
        for c in [0.0, 1.0, 1.5, -0.2] {
            assert!(matches!(h0_asymptotics(256, c), Err(Error::UnsupportedRegime { .. })));
            assert!(h1_asymptotics(256, c, 1, 0.1).is_err());
        }
    }

    #[test]
    fn h1_reference_value() {
        let sigma2 = crate::models::channel_power_from_snr_db(-15.5, 10);
        let h1 = h1_asymptotics(256, 0.5, 10, sigma2).unwrap();
        assert!((h1.mean - 79.991).abs() < 5e-4, "{}", h1.mean);
        assert_eq!(h1.variance, h0_asymptotics(256, 0.5).unwrap().variance);
    }

    #[test]
    fn h1_without_signal_differs_by_half_log_terms() {
        for c in [0.1, 0.5, 0.8] {
            let h0 = h0_asymptotics(128, c).unwrap();
            let no_taps = h1_asymptotics(128, c, 0, 0.3).unwrap();
            let silent = h1_asymptotics(128, c, 4, 0.0).unwrap();
            let gap = (-c as f64).ln_1p();
            assert!(((no_taps.mean - h0.mean).abs() - gap.abs()).abs() < 1e-10);
            assert!((silent.mean - no_taps.mean).abs() < 1e-10);
            assert!((half_log_discrepancy(c).unwrap() - (no_taps.mean - h0.mean)).abs() < 1e-10);
        }
    }

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.64485) - 0.05).abs() < 1e-5);
        for x in [0.3, 1.0, 2.5, 6.0] {
            assert!((q_function(-x) - (1.0 - q_function(x))).abs() < 1e-12);
        }
    }

    #[test]
    fn q_function_tail_accuracy() {
        // Simpson quadrature of the normal density over [x, x + 12]
        for x in [0.5f64, 2.0, 5.0, 8.0] {
            let n = 200_000;
            let h = 12.0 / n as f64;
            let mut s = standard_normal_pdf(x) + standard_normal_pdf(x + 12.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * standard_normal_pdf(x + h * i as f64);
            }
            let oracle = s * h / 3.0;
            assert!(((q_function(x) - oracle) / oracle).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn threshold_values() {
        assert!(threshold(0.5).unwrap().abs() < 1e-12);
        assert!((threshold(0.05).unwrap() - 1.64485).abs() < 1e-4);
        for p in [1e-4, 0.01, 0.3] {
            assert!((q_function(threshold(p).unwrap()) - p).abs() < 1e-9);
        }
        assert!(threshold(0.0).is_err());
        assert!(threshold(1.0).is_err());
    }

    #[test]
    fn degenerate_spectrum_is_noise() {
        let out = detect(&EigenSpectrum::from_values(vec![1.0; 256]), 0.05, 256, 0.5).unwrap();
        assert_eq!(out.decision, Decision::NoiseOnly);
        assert!(out.g_prime < 0.0);
        assert!(detect(&EigenSpectrum::from_values(vec![1.0; 4]), 0.05, 5, 0.5).is_err());
    }

    #[test]
    fn decision_matches_sign_of_g_prime() {
        let h0 = h0_asymptotics(64, 0.25).unwrap();
        for z in [-3.0, 0.0, 1.0, 1.7, 4.0] {
            let d = h0.mean + z * h0.std_dev();
            let out = decide(d, 0.05, 64, 0.25).unwrap();
            let expected = (d - h0.mean) / h0.std_dev() > out.threshold;
            assert_eq!(out.decision == Decision::SignalPresent, expected);
            assert_eq!(out.decision == Decision::SignalPresent, out.g_prime > 0.0);
        }
    }

    #[test]
    fn miss_probability_limits() {
        let p_fa = 0.05;
        // no signal: (μ1 - μ0)/σ is the half-log offset only
        let pla = theoretical_miss_probability(256, 0.5, 10, 0.0, p_fa).unwrap();
        let sigma = glrt_variance(0.5).unwrap().sqrt();
        let expected = q_function(0.5f64.ln() / sigma - threshold(p_fa).unwrap());
        assert!((pla - expected).abs() < 1e-12);
        assert!(pla > 1.0 - p_fa);

        let fig3 = theoretical_miss_probability(256, 0.5, 10, 0.0028183829312644535, p_fa).unwrap();
        assert!((fig3 - 0.456).abs() < 1e-3, "{fig3}");

        let mut prev = 1.0;
        for snr in [-20.0, -15.0, -10.0, -5.0, 0.0] {
            let s2 = crate::models::channel_power_from_snr_db(snr, 10);
            let v = theoretical_miss_probability(256, 0.5, 10, s2, p_fa).unwrap();
            assert!(v < prev || (v == 0.0 && prev == 0.0), "{v} after {prev}");
            prev = v;
        }
        assert!(prev < 1e-12);
    }
}
