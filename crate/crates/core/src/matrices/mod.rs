//! Sample covariance matrix and the ESD-equivalent constructions used to
//! analyse it under H1, plus the Hermitian spectral primitives.
//!
//! Every construction is formed as a `P x P` Gram product and symmetrized,
//! so eigen-decompositions never run at `N x N`.

mod cholesky;
mod eigen;

use rand::Rng;

pub use cholesky::{log_det_psd, Cholesky};
pub use eigen::{hermitian_eigenvalues, EigenSpectrum, HERMITIAN_TOLERANCE};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Op};
use crate::models::sample_noise;

/// Relative tolerance for spectral identities.
pub const SPECTRAL_TOLERANCE: f64 = 1e-8;
/// Tolerance for algebraic (entrywise) identities.
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-12;

/// `X X* / N`, symmetrized.
pub fn scm(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if x.cols() == 0 {
        return Err(Error::DimensionMismatch {
            op: "scm",
            detail: "data matrix has no samples".into(),
        });
    }
    let mut r = x.product(Op::Plain, x, Op::Adjoint)?;
    r.scale(1.0 / x.cols() as f64);
    r.symmetrize();
    Ok(r)
}

/// Diagonal population covariance with `taps` leading spikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikedCovarianceSpec {
    pub dim: usize,
    pub taps: usize,
    pub spike_value: f64,
}

impl SpikedCovarianceSpec {
    /// `Σ_N`: spike `Nσ² + 1` on the sample side.
    pub fn sample_side(samples: usize, taps: usize, channel_power: f64) -> Self {
        SpikedCovarianceSpec {
            dim: samples,
            taps,
            spike_value: samples as f64 * channel_power + 1.0,
        }
    }

    /// `Σ_P`: spike `Pσ² + 1` on the antenna side.
    pub fn antenna_side(antennas: usize, taps: usize, channel_power: f64) -> Self {
        SpikedCovarianceSpec {
            dim: antennas,
            taps,
            spike_value: antennas as f64 * channel_power + 1.0,
        }
    }

    pub fn bulk_value(&self) -> f64 {
        1.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| if i < self.taps { self.spike_value } else { 1.0 })
            .collect()
    }
}

/// Signal-free factors `(Ĥ, Ŵ)` of the surrogate matrix: `Ĥ` carries
/// `sqrt(N) H` in its first `L` columns and zeros elsewhere; `Ŵ` carries `Q*`
/// in its first `L` columns followed by the last `N - L` columns of `W`.
pub fn surrogate_factors(
    channel: &ComplexMatrix,
    cross: &ComplexMatrix,
    noise: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = noise.rows();
    let n = noise.cols();
    let l = channel.cols();
    if channel.rows() != p || cross.rows() != l || cross.cols() != p || l > n {
        return Err(Error::DimensionMismatch {
            op: "build_surrogate",
            detail: format!(
                "H {}x{}, Q {}x{}, W {}x{}",
                channel.rows(),
                channel.cols(),
                cross.rows(),
                cross.cols(),
                p,
                n
            ),
        });
    }
    let sqrt_n = (n as f64).sqrt();
    let mut hat_h = ComplexMatrix::zeros(p, n);
    let mut hat_w = ComplexMatrix::zeros(p, n);
    for i in 0..p {
        for j in 0..l {
            hat_h[(i, j)] = channel[(i, j)] * sqrt_n;
            hat_w[(i, j)] = cross[(j, i)].conj();
        }
        hat_w.row_mut(i)[l..].copy_from_slice(&noise.row(i)[l..]);
    }
    Ok((hat_h, hat_w))
}

/// Surrogate `(Ĥ + Ŵ)(Ĥ + Ŵ)* / N` built from the channel `H` (`P x L`), the
/// cross term `Q = S_L W* / sqrt(N)` (`L x P`) and the noise `W` (`P x N`).
pub fn build_surrogate(
    channel: &ComplexMatrix,
    cross: &ComplexMatrix,
    noise: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let (mut hat, hat_w) = surrogate_factors(channel, cross, noise)?;
    hat.add_assign_scaled(&hat_w, 1.0)?;
    scm(&hat)
}

/// Signal part `H H* + (H Q + Q* H*) / sqrt(N)` shared by the received and
/// surrogate covariance matrices.
pub fn signal_part(channel: &ComplexMatrix, cross: &ComplexMatrix, samples: usize) -> Result<ComplexMatrix> {
    let mut t = channel.product(Op::Plain, channel, Op::Adjoint)?;
    let hq = channel.matmul(cross)?;
    let inv_sqrt_n = 1.0 / (samples as f64).sqrt();
    t.add_assign_scaled(&hq, inv_sqrt_n)?;
    t.add_assign_scaled(&hq.adjoint(), inv_sqrt_n)?;
    Ok(t)
}

/// `Z Σ_N Z* / N` with `Z` a `P x N` matrix of i.i.d. `CN(0, 1)` entries.
pub fn build_spiked_wishart<R: Rng + ?Sized>(
    antennas: usize,
    samples: usize,
    taps: usize,
    channel_power: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    check_spiked_args(antennas, samples, taps, samples, channel_power)?;
    let spec = SpikedCovarianceSpec::sample_side(samples, taps, channel_power);
    let mut z = sample_noise(antennas, samples, rng);
    let root = spec.spike_value.sqrt();
    for j in 0..taps {
        z.scale_col(j, root);
    }
    scm(&z)
}

/// `Σ_P^{1/2} Z Z* Σ_P^{1/2} / N` with `Z` a `P x N` matrix of i.i.d.
/// `CN(0, 1)` entries.
pub fn build_population_spiked<R: Rng + ?Sized>(
    antennas: usize,
    samples: usize,
    taps: usize,
    channel_power: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    check_spiked_args(antennas, samples, taps, antennas, channel_power)?;
    let spec = SpikedCovarianceSpec::antenna_side(antennas, taps, channel_power);
    let mut z = sample_noise(antennas, samples, rng);
    let root = spec.spike_value.sqrt();
    for i in 0..taps {
        z.scale_row(i, root);
    }
    scm(&z)
}

fn check_spiked_args(p: usize, n: usize, taps: usize, limit: usize, channel_power: f64) -> Result<()> {
    if p == 0 || n == 0 {
        return Err(Error::invalid(format!("dimensions must be positive (P={p}, N={n})")));
    }
    if taps > limit {
        return Err(Error::invalid(format!("taps L={taps} exceed dimension {limit}")));
    }
    if !(channel_power >= 0.0) {
        return Err(Error::invalid(format!(
            "channel power must be non-negative, got {channel_power}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_components, Scenario};
    use crate::seed::StreamSeed;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scm_of_identity() {
        let r = scm(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(r, ComplexMatrix::from_real_diagonal(&[0.5, 0.5]));
    }

    #[test]
    fn scm_of_single_row() {
        let x = ComplexMatrix::from_vec(1, 2, vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let r = scm(&x).unwrap();
        assert_eq!(r[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn scm_trace_is_mean_power() {
        let x = sample_noise(12, 30, &mut StreamSeed::new(1).rng());
        let r = scm(&x).unwrap();
        let expected = x.frobenius_sq() / 30.0;
        assert!((r.trace().re - expected).abs() <= 1e-12 * expected);
        assert_eq!(r.hermitian_defect(), 0.0);
    }

    #[test]
    fn scm_rejects_empty() {
        assert!(scm(&ComplexMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn h0_scm_stays_near_mp_support() {
        let x = sample_noise(256, 512, &mut StreamSeed::new(2).rng());
        let s = hermitian_eigenvalues(&scm(&x).unwrap()).unwrap();
        let b = (1.0 + 0.5f64.sqrt()).powi(2);
        let a = (1.0 - 0.5f64.sqrt()).powi(2);
        assert!(s.largest().unwrap() <= b + 0.15);
        assert!(s.smallest().unwrap() >= a - 0.15);
    }

    #[test]
    fn surrogate_with_zero_signal_is_trimmed_noise_wishart() {
        let (p, n, l) = (4, 8, 2);
        let w = sample_noise(p, n, &mut StreamSeed::new(3).rng());
        let h = ComplexMatrix::zeros(p, l);
        let q = ComplexMatrix::zeros(l, p);
        let r = build_surrogate(&h, &q, &w).unwrap();
        let mut padded = w.clone();
        for i in 0..p {
            for j in 0..l {
                padded[(i, j)] = c(0.0, 0.0);
            }
        }
        let expected = scm(&padded).unwrap();
        assert!(r.sub(&expected).unwrap().max_abs() < ALGEBRAIC_TOLERANCE);
    }

    /// Direct expansion: Ĥ Ĥ*/N + (Ĥ Ŵ* + Ŵ Ĥ*)/N must equal H H* + (HQ + Q*H*)/sqrt(N).
    #[test]
    fn surrogate_signal_part_matches_expansion() {
        let (p, n, l) = (4, 8, 1);
        let sc = Scenario::h1(p, n, l, 0.7, 11);
        let comp = generate_components(&sc).unwrap();
        let q = comp.cross_term().unwrap();
        let (hat_h, hat_w) = surrogate_factors(&comp.channel, &q, &comp.noise).unwrap();
        let nf = n as f64;
        let mut t_hat = hat_h.product(Op::Plain, &hat_h, Op::Adjoint).unwrap().scaled(1.0 / nf);
        let cross = hat_h.product(Op::Plain, &hat_w, Op::Adjoint).unwrap();
        t_hat.add_assign_scaled(&cross, 1.0 / nf).unwrap();
        t_hat.add_assign_scaled(&cross.adjoint(), 1.0 / nf).unwrap();

        let t = signal_part(&comp.channel, &q, n).unwrap();
        assert!(t_hat.sub(&t).unwrap().max_abs() < ALGEBRAIC_TOLERANCE);
    }

    #[test]
    fn surrogate_rejects_mismatched_dims() {
        let w = ComplexMatrix::zeros(4, 8);
        assert!(build_surrogate(&ComplexMatrix::zeros(3, 1), &ComplexMatrix::zeros(1, 4), &w).is_err());
        assert!(build_surrogate(&ComplexMatrix::zeros(4, 1), &ComplexMatrix::zeros(2, 4), &w).is_err());
    }

    #[test]
    fn spiked_covariance_diagonals() {
        let s = SpikedCovarianceSpec::sample_side(100, 2, 0.01);
        assert_eq!(s.diagonal()[..3], [2.0, 2.0, 1.0]);
        let s = SpikedCovarianceSpec::antenna_side(256, 10, 0.01);
        assert!((s.spike_value - 3.56).abs() < 1e-12);
    }

    #[test]
    fn spiked_wishart_without_signal_is_central() {
        let seed = StreamSeed::new(4);
        let r = build_spiked_wishart(6, 10, 3, 0.0, &mut seed.rng()).unwrap();
        let z = sample_noise(6, 10, &mut seed.rng());
        assert!(r.sub(&scm(&z).unwrap()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn wide_spiked_wishart_is_rank_deficient() {
        let r = build_spiked_wishart(16, 8, 2, 0.1, &mut StreamSeed::new(5).rng()).unwrap();
        let s = hermitian_eigenvalues(&r).unwrap();
        let tol = 1e-10 * s.largest().unwrap();
        let zeros = s.values().iter().filter(|v| v.abs() <= tol).count();
        assert_eq!(zeros, 8);
    }

    #[test]
    fn population_spiked_with_full_rank_spike_scales_wishart() {
        let seed = StreamSeed::new(6);
        let (p, n, sigma2) = (8, 20, 0.05);
        let r = build_population_spiked(p, n, p, sigma2, &mut seed.rng()).unwrap();
        let base = scm(&sample_noise(p, n, &mut seed.rng())).unwrap();
        let k = p as f64 * sigma2 + 1.0;
        let a = hermitian_eigenvalues(&r).unwrap();
        let b = hermitian_eigenvalues(&base).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - k * y).abs() < 1e-12 * k * y.max(1.0));
        }
    }

    #[test]
    fn constructions_are_psd() {
        let sc = Scenario::h1(24, 48, 3, 0.05, 21);
        let comp = generate_components(&sc).unwrap();
        let q = comp.cross_term().unwrap();
        let mats = [
            scm(&comp.received().unwrap()).unwrap(),
            build_surrogate(&comp.channel, &q, &comp.noise).unwrap(),
            build_spiked_wishart(24, 48, 3, 0.05, &mut StreamSeed::new(1).rng()).unwrap(),
            build_population_spiked(24, 48, 3, 0.05, &mut StreamSeed::new(2).rng()).unwrap(),
        ];
        for m in &mats {
            let s = hermitian_eigenvalues(m).unwrap();
            assert!(s.smallest().unwrap() >= -SPECTRAL_TOLERANCE * s.largest().unwrap());
        }
    }

    #[test]
    fn spiked_builders_validate() {
        let mut rng = StreamSeed::new(0).rng();
        assert!(build_spiked_wishart(4, 4, 5, 0.1, &mut rng).is_err());
        assert!(build_population_spiked(4, 8, 5, 0.1, &mut rng).is_err());
        assert!(build_spiked_wishart(4, 8, 1, -0.1, &mut rng).is_err());
    }
}
