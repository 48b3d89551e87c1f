//! Stochastic system model: transmit signal, tap-delay lags, Rayleigh channel,
//! white noise, and the received array matrix under either hypothesis.
//!
//! Under H1 the received matrix is `X = H S_L + W` where `H` is the `P x L`
//! channel, `S_L` stacks the `L` delayed copies of the transmit signal and `W`
//! is unit-power circular complex Gaussian noise. Under H0 it is `W` alone.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::seed::StreamSeed;

/// Distribution of the transmitted symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalLaw {
    /// Equiprobable ±1.
    Binary,
    /// Standard normal.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// One experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Antenna count `P`.
    pub antennas: usize,
    /// Sample count `N`.
    pub samples: usize,
    /// Channel taps `L`.
    pub taps: usize,
    /// Per-tap channel power `σ²`.
    pub channel_power: f64,
    pub signal_law: SignalLaw,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

/// Converts an SNR in dB to the per-tap channel power `σ²`, with
/// `SNR_dB = 10 log10(L σ²)`.
pub fn channel_power_from_snr_db(snr_db: f64, taps: usize) -> f64 {
    if taps == 0 {
        return 0.0;
    }
    10f64.powf(snr_db / 10.0) / taps as f64
}

/// Inverse of [`channel_power_from_snr_db`].
pub fn snr_db_from_channel_power(channel_power: f64, taps: usize) -> f64 {
    10.0 * (channel_power * taps as f64).log10()
}

impl Scenario {
    pub fn h0(antennas: usize, samples: usize, seed: u64) -> Self {
        Scenario {
            antennas,
            samples,
            taps: 0,
            channel_power: 0.0,
            signal_law: SignalLaw::Binary,
            hypothesis: Hypothesis::H0,
            seed,
        }
    }

    pub fn h1(antennas: usize, samples: usize, taps: usize, channel_power: f64, seed: u64) -> Self {
        Scenario {
            antennas,
            samples,
            taps,
            channel_power,
            signal_law: SignalLaw::Binary,
            hypothesis: Hypothesis::H1,
            seed,
        }
    }

    /// H1 scenario parameterized by SNR in dB.
    pub fn h1_snr_db(antennas: usize, samples: usize, taps: usize, snr_db: f64, seed: u64) -> Self {
        Self::h1(antennas, samples, taps, channel_power_from_snr_db(snr_db, taps), seed)
    }

    /// Aspect ratio `c = P/N`.
    pub fn aspect_ratio(&self) -> f64 {
        self.antennas as f64 / self.samples as f64
    }

    pub fn snr_db(&self) -> f64 {
        snr_db_from_channel_power(self.channel_power, self.taps)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Scenario {
            seed,
            ..self.clone()
        }
    }

    pub fn with_hypothesis(&self, hypothesis: Hypothesis) -> Self {
        Scenario {
            hypothesis,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.samples == 0 {
            return Err(Error::invalid(format!(
                "antennas and samples must be positive (P={}, N={})",
                self.antennas, self.samples
            )));
        }
        if self.taps > self.samples {
            return Err(Error::invalid(format!(
                "taps L={} exceed samples N={}",
                self.taps, self.samples
            )));
        }
        if !(self.channel_power >= 0.0) || !self.channel_power.is_finite() {
            return Err(Error::invalid(format!(
                "channel power must be finite and non-negative, got {}",
                self.channel_power
            )));
        }
        Ok(())
    }
}

/// Transmit signal `s(n)` for `n = -(L-1) .. N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSequence {
    values: Vec<f64>,
    /// Number of samples with negative index.
    preroll: usize,
}

impl SignalSequence {
    /// Wraps `values` so that `values[0]` is `s(-preroll)`.
    pub fn new(values: Vec<f64>, preroll: usize) -> Result<Self> {
        if preroll > values.len() {
            return Err(Error::invalid("preroll longer than sequence"));
        }
        Ok(SignalSequence { values, preroll })
    }

    /// Re-indexes so that the first stored value is `s(-preroll)`.
    pub fn with_preroll(self, preroll: usize) -> Result<Self> {
        Self::new(self.values, preroll)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn preroll(&self) -> usize {
        self.preroll
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `s(n)`, or `None` outside the stored range.
    pub fn at(&self, n: isize) -> Option<f64> {
        let idx = n + self.preroll as isize;
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R, std_per_part: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std_per_part, im * std_per_part)
}

/// Draws `length` i.i.d. symbols starting at index 0. Use
/// [`SignalSequence::with_preroll`] or [`sample_lagged_signal`] to shift it.
pub fn sample_signal<R: Rng + ?Sized>(length: usize, law: SignalLaw, rng: &mut R) -> Result<SignalSequence> {
    if length == 0 {
        return Err(Error::invalid("signal length must be at least 1"));
    }
    let values = match law {
        SignalLaw::Binary => (0..length)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
        SignalLaw::Gaussian => (0..length).map(|_| rng.sample(StandardNormal)).collect(),
    };
    Ok(SignalSequence { values, preroll: 0 })
}

/// Draws `N + L - 1` symbols indexed from `-(L-1)`, enough for `L` linear lags.
pub fn sample_lagged_signal<R: Rng + ?Sized>(
    samples: usize,
    taps: usize,
    law: SignalLaw,
    rng: &mut R,
) -> Result<SignalSequence> {
    let preroll = taps.saturating_sub(1);
    sample_signal(samples + preroll, law, rng)?.with_preroll(preroll)
}

/// `L x N` matrix whose row `l`, column `n` is `s(n - l)`.
pub fn lagged_signal_matrix(s: &SignalSequence, samples: usize, taps: usize) -> Result<ComplexMatrix> {
    let needed_preroll = taps.saturating_sub(1);
    if s.preroll < needed_preroll || s.values.len() < s.preroll + samples {
        return Err(Error::invalid(format!(
            "signal holds indices {}..{} but N={samples}, L={taps} needs {}..{}",
            -(s.preroll as isize),
            s.values.len() as isize - s.preroll as isize - 1,
            -(needed_preroll as isize),
            samples as isize - 1
        )));
    }
    let mut m = ComplexMatrix::zeros(taps, samples);
    for l in 0..taps {
        let start = s.preroll - l;
        for (z, &v) in m.row_mut(l).iter_mut().zip(&s.values[start..start + samples]) {
            *z = Complex64::new(v, 0.0);
        }
    }
    Ok(m)
}

/// `P x L` channel with i.i.d. `CN(0, σ²)` taps.
pub fn sample_channel<R: Rng + ?Sized>(
    antennas: usize,
    taps: usize,
    channel_power: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if !(channel_power >= 0.0) {
        return Err(Error::invalid(format!(
            "channel power must be non-negative, got {channel_power}"
        )));
    }
    let std = (channel_power / 2.0).sqrt();
    Ok(ComplexMatrix::from_fn(antennas, taps, |_, _| standard_complex(rng, std)))
}

/// `P x N` matrix of i.i.d. `CN(0, 1)` entries.
pub fn sample_noise<R: Rng + ?Sized>(antennas: usize, samples: usize, rng: &mut R) -> ComplexMatrix {
    let std = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(antennas, samples, |_, _| standard_complex(rng, std))
}

/// Independently drawn pieces of one received block.
#[derive(Debug, Clone)]
pub struct ReceivedComponents {
    /// `P x L` channel `H` (empty under H0).
    pub channel: ComplexMatrix,
    /// `L x N` lag matrix `S_L` (empty under H0).
    pub lagged_signal: ComplexMatrix,
    /// `P x N` noise `W`.
    pub noise: ComplexMatrix,
}

impl ReceivedComponents {
    /// `H S_L + W`.
    pub fn received(&self) -> Result<ComplexMatrix> {
        let mut x = self.noise.clone();
        if self.channel.cols() > 0 {
            let signal = self.channel.matmul(&self.lagged_signal)?;
            x.add_assign_scaled(&signal, 1.0)?;
        }
        Ok(x)
    }

    /// `Q = S_L W* / sqrt(N)`, an `L x P` matrix.
    pub fn cross_term(&self) -> Result<ComplexMatrix> {
        let n = self.noise.cols() as f64;
        let mut q = self
            .lagged_signal
            .product(crate::matrix::Op::Plain, &self.noise, crate::matrix::Op::Adjoint)?;
        q.scale(1.0 / n.sqrt());
        Ok(q)
    }
}

pub(crate) const NOISE_TAG: &str = "noise";
pub(crate) const CHANNEL_TAG: &str = "channel";
pub(crate) const SIGNAL_TAG: &str = "signal";

/// Draws `H`, `S_L` and `W` from sub-streams of `scenario.seed`.
pub fn generate_components(scenario: &Scenario) -> Result<ReceivedComponents> {
    scenario.validate()?;
    let root = StreamSeed::new(scenario.seed);
    let noise = sample_noise(
        scenario.antennas,
        scenario.samples,
        &mut root.derive(NOISE_TAG, 0).rng(),
    );
    let taps = match scenario.hypothesis {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => scenario.taps,
    };
    let channel = sample_channel(
        scenario.antennas,
        taps,
        scenario.channel_power,
        &mut root.derive(CHANNEL_TAG, 0).rng(),
    )?;
    let lagged_signal = if taps == 0 {
        ComplexMatrix::zeros(0, scenario.samples)
    } else {
        let s = sample_lagged_signal(
            scenario.samples,
            taps,
            scenario.signal_law,
            &mut root.derive(SIGNAL_TAG, 0).rng(),
        )?;
        lagged_signal_matrix(&s, scenario.samples, taps)?
    };
    Ok(ReceivedComponents {
        channel,
        lagged_signal,
        noise,
    })
}

/// Received `P x N` matrix: `W` under H0, `H S_L + W` under H1.
pub fn generate_received(scenario: &Scenario) -> Result<ComplexMatrix> {
    generate_components(scenario)?.received()
}
