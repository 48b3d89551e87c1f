//! Closed-form random-matrix laws: the Marchenko–Pastur density, support and
//! CDF, empirical spectral histograms, and the outlier-eigenvalue limits of
//! spiked covariance models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrices::EigenSpectrum;
use crate::models::{Hypothesis, Scenario};

/// Marchenko–Pastur law for aspect ratio `c = P/N` and unit noise power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    pub c: f64,
    /// Lower edge `(1 - sqrt c)²`.
    pub a: f64,
    /// Upper edge `(1 + sqrt c)²`.
    pub b: f64,
    /// Point mass at zero, `max(0, 1 - 1/c)`.
    pub mass_at_zero: f64,
}

/// Absolute error target of the CDF quadrature.
const CDF_TOLERANCE: f64 = 1e-12;

impl MpLaw {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("aspect ratio must be positive, got {c}")));
        }
        let root = c.sqrt();
        Ok(MpLaw {
            c,
            a: (1.0 - root).powi(2),
            b: (1.0 + root).powi(2),
            mass_at_zero: (1.0 - 1.0 / c).max(0.0),
        })
    }

    /// Density of the continuous part; zero outside `(a, b)`.
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b || x <= 0.0 {
            return 0.0;
        }
        ((self.b - x) * (x - self.a)).sqrt() / (2.0 * PI * x * self.c)
    }

    /// `P(λ <= x)`, including the atom at zero when `c > 1`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x <= self.a {
            return self.mass_at_zero;
        }
        if x >= self.b {
            return 1.0;
        }
        let theta = ((x - self.a) / (self.b - self.a)).sqrt().asin();
        let continuous = self.continuous_mass_to(theta);
        (self.mass_at_zero + continuous).min(1.0)
    }

    /// Mass of the continuous part below `a + (b - a) sin²θ`.
    ///
    /// With `x = a + (b - a) sin²θ` the integrand becomes
    /// `(b - a)² sin²θ cos²θ / (π c x)`, which is smooth on `[0, π/2]`.
    fn continuous_mass_to(&self, theta: f64) -> f64 {
        let w = self.b - self.a;
        let integrand = |t: f64| {
            let (s, co) = t.sin_cos();
            let x = self.a + w * s * s;
            if x <= 0.0 {
                // only reachable at t = 0 when a = 0 (c = 1): limit is w cos²t / (π c)
                return w * co * co / (PI * self.c);
            }
            w * w * s * s * co * co / (PI * self.c * x)
        };
        adaptive_gauss_kronrod(&integrand, 0.0, theta, CDF_TOLERANCE)
    }

    /// Smallest `x` with `cdf(x) >= p`, found by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= self.mass_at_zero {
            return 0.0;
        }
        if p >= 1.0 {
            return self.b;
        }
        let (mut lo, mut hi) = (self.a, self.b);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Marchenko–Pastur density at `x`.
pub fn mp_density(x: f64, c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.density(x))
}

/// `(a, b, mass_at_zero)` for aspect ratio `c`.
pub fn mp_support(c: f64) -> Result<(f64, f64, f64)> {
    let law = MpLaw::new(c)?;
    Ok((law.a, law.b, law.mass_at_zero))
}

pub fn mp_cdf(x: f64, c: f64) -> Result<f64> {
    Ok(MpLaw::new(c)?.cdf(x))
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let sum = f(center - dx) + f(center + dx);
        kronrod += wk * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive_gauss_kronrod(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn recurse(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, depth: usize) -> f64 {
        let (value, err) = gauss_kronrod_15(f, lo, hi);
        if err <= tol || depth == 0 {
            return value;
        }
        let mid = 0.5 * (lo + hi);
        recurse(f, lo, mid, 0.5 * tol, depth - 1) + recurse(f, mid, hi, 0.5 * tol, depth - 1)
    }
    if hi <= lo {
        return 0.0;
    }
    recurse(f, lo, hi, tol, 40)
}

/// Binned empirical spectral distribution.
///
/// `counts` covers the in-range eigenvalues; values below the first edge or
/// above the last edge land in `underflow` / `overflow`, so
/// `sum(counts) + underflow + overflow == total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsdHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub total: u64,
}

impl EsdHistogram {
    /// Empty histogram with `bins` equal-width bins over `[lo, hi]`.
    pub fn with_range(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bin count must be at least 1"));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        bin_edges[bins] = hi;
        Ok(EsdHistogram {
            bin_edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
            total: 0,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, value: f64) {
        self.total += 1;
        let lo = self.bin_edges[0];
        let hi = self.bin_edges[self.bins()];
        if value < lo {
            self.underflow += 1;
        } else if value > hi {
            self.overflow += 1;
        } else {
            let width = (hi - lo) / self.bins() as f64;
            let idx = (((value - lo) / width) as usize).min(self.bins() - 1);
            self.counts[idx] += 1;
        }
    }

    /// Adds the counts of another histogram with identical edges.
    pub fn merge(&mut self, other: &EsdHistogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::invalid("cannot merge histograms with different edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.total += other.total;
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Counts normalized by `total * width`: a sub-probability density.
    pub fn density(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&n, w)| n as f64 / (total * (w[1] - w[0])))
            .collect()
    }
}

/// Freedman–Diaconis bin count for `values`, at least one bin.
pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    let n = values.len();
    if n < 2 {
        return 1;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if i + 1 < n {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[i]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let span = sorted[n - 1] - sorted[0];
    if iqr <= 0.0 || span <= 0.0 {
        return ((n as f64).sqrt().ceil() as usize).max(1);
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    ((span / width).ceil() as usize).clamp(1, 10_000)
}

/// Histogram of `eigs`. Without `bins` the Freedman–Diaconis rule is used;
/// without `range` the bins span `[min, max]` of the spectrum.
pub fn esd_histogram(eigs: &EigenSpectrum, bins: Option<usize>, range: Option<(f64, f64)>) -> Result<EsdHistogram> {
    let values = eigs.values();
    if values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let bins = match bins {
        Some(0) => return Err(Error::invalid("bin count must be at least 1")),
        Some(b) => b,
        None => freedman_diaconis_bins(values),
    };
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let lo = values[values.len() - 1];
            let hi = values[0];
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        }
    };
    let mut hist = EsdHistogram::with_range(bins, lo, hi)?;
    for &v in values {
        hist.add(v);
    }
    Ok(hist)
}

/// Outlier limit of one population spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpikeLimit {
    /// Spike above `1 + sqrt c`: the sample eigenvalue separates from the bulk.
    Emerged(f64),
    /// Spike at or below the phase transition: absorbed into the bulk.
    Absorbed,
}

impl SpikeLimit {
    pub fn value(self) -> Option<f64> {
        match self {
            SpikeLimit::Emerged(v) => Some(v),
            SpikeLimit::Absorbed => None,
        }
    }

    pub fn emerged(self) -> bool {
        matches!(self, SpikeLimit::Emerged(_))
    }
}

/// `λ + cλ/(λ - 1)` for a population spike `λ > 1 + sqrt c`.
pub fn spike_limit(lambda_pop: f64, c: f64) -> Result<SpikeLimit> {
    if !(lambda_pop > 0.0) {
        return Err(Error::invalid(format!("population eigenvalue must be positive, got {lambda_pop}")));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("aspect ratio must be positive, got {c}")));
    }
    if lambda_pop <= 1.0 + c.sqrt() {
        return Ok(SpikeLimit::Absorbed);
    }
    Ok(SpikeLimit::Emerged(lambda_pop + c * lambda_pop / (lambda_pop - 1.0)))
}

/// Outlier limit written in terms of the sample-side spike
/// `λ_N = Nσ² + 1`: `c λ_N + λ_N/(λ_N - 1)`.
pub fn spike_limit_data_side(lambda_pop_n: f64, c: f64) -> Result<f64> {
    if !(lambda_pop_n > 1.0) {
        return Err(Error::invalid(format!(
            "sample-side spike must exceed 1, got {lambda_pop_n}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("aspect ratio must be positive, got {c}")));
    }
    Ok(lambda_pop_n * c + lambda_pop_n / (lambda_pop_n - 1.0))
}

/// Predicted outliers of the H1 sample covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikePrediction {
    /// One entry per channel tap.
    pub taps: Vec<SpikeLimit>,
    /// `1 + sqrt c`.
    pub phase_transition_edge: f64,
    /// Population spike `Pσ² + 1`.
    pub population_spike: f64,
}

impl SpikePrediction {
    pub fn emerged(&self) -> Vec<bool> {
        self.taps.iter().map(|t| t.emerged()).collect()
    }

    pub fn emerged_values(&self) -> Vec<f64> {
        self.taps.iter().filter_map(|t| t.value()).collect()
    }
}

pub fn predicted_spikes(scenario: &Scenario) -> Result<SpikePrediction> {
    scenario.validate()?;
    if scenario.hypothesis != Hypothesis::H1 {
        return Err(Error::invalid("spike prediction needs an H1 scenario"));
    }
    let c = scenario.aspect_ratio();
    let lambda = scenario.antennas as f64 * scenario.channel_power + 1.0;
    let limit = spike_limit(lambda, c)?;
    Ok(SpikePrediction {
        taps: vec![limit; scenario.taps],
        phase_transition_edge: 1.0 + c.sqrt(),
        population_spike: lambda,
    })
}

/// Kolmogorov–Smirnov distance between the ESD of `eigs` and `law`.
pub fn ks_distance(eigs: &EigenSpectrum, law: &MpLaw) -> f64 {
    let n = eigs.len();
    if n == 0 {
        return f64::NAN;
    }
    let nf = n as f64;
    // values are stored descending
    eigs.values()
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max)
}
