//! Monte Carlo harness. Each runner turns a [`TrialPlan`] into an
//! [`ExperimentResult`]: a table of equal-length named columns, a map of
//! summary vectors, and metadata that is enough to rerun the plan.
//!
//! Trials run as an ordered parallel map; every reduction happens afterwards
//! on the ordered trial outputs, so results do not depend on the thread count.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{self, Decision};
use crate::error::{Error, Result};
use crate::matrices::{build_spiked_wishart, build_surrogate, hermitian_eigenvalues, scm, Cholesky, EigenSpectrum};
use crate::matrix::{ComplexMatrix, Op};
use crate::models::{channel_power_from_snr_db, generate_components, Hypothesis, Scenario};
use crate::rmt::{ks_distance, predicted_spikes, spike_limit, EsdHistogram, MpLaw};
use crate::seed::StreamSeed;
use crate::stats;

/// SNR grid used by the miss-probability sweep when none is given.
pub const DEFAULT_SNR_GRID: (f64, f64, f64) = (-22.0, -10.0, 0.5);
/// Number of log-spaced false-alarm points on a default ROC grid.
pub const DEFAULT_ROC_POINTS: usize = 50;
pub const DEFAULT_ROC_RANGE: (f64, f64) = (1e-3, 0.5);

const WISHART_TAG: &str = "wishart";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Sample count `N`.
    Samples,
    SnrDb,
    PFa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    /// Base configuration. Its `seed` is ignored; trial seeds come from
    /// `master_seed`.
    pub base: Scenario,
    pub n_trials: usize,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    pub master_seed: u64,
    /// False-alarm target for the detection experiments.
    pub p_fa: f64,
    /// Histogram bin count; Freedman–Diaconis when absent.
    #[serde(default)]
    pub bins: Option<usize>,
}

impl TrialPlan {
    pub fn new(base: Scenario, n_trials: usize, master_seed: u64) -> Self {
        TrialPlan {
            base,
            n_trials,
            sweep: Vec::new(),
            master_seed,
            p_fa: 0.05,
            bins: None,
        }
    }

    pub fn with_sweep(mut self, param: SweepParam, values: Vec<f64>) -> Self {
        self.sweep.retain(|a| a.param != param);
        self.sweep.push(SweepAxis { param, values });
        self
    }

    pub fn with_p_fa(mut self, p_fa: f64) -> Self {
        self.p_fa = p_fa;
        self
    }

    pub fn with_bins(mut self, bins: Option<usize>) -> Self {
        self.bins = bins;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::invalid(format!("p_fa must lie in (0, 1), got {}", self.p_fa)));
        }
        if self.bins == Some(0) {
            return Err(Error::invalid("bin count must be at least 1"));
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            if self.sweep[..i].iter().any(|a| a.param == axis.param) {
                return Err(Error::invalid(format!("sweep axis {:?} given twice", axis.param)));
            }
            if axis.values.is_empty() {
                return Err(Error::invalid(format!("sweep axis {:?} has no values", axis.param)));
            }
            for &v in &axis.values {
                let ok = match axis.param {
                    SweepParam::Samples => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
                    SweepParam::SnrDb => v.is_finite(),
                    SweepParam::PFa => v > 0.0 && v < 1.0,
                };
                if !ok {
                    return Err(Error::invalid(format!("invalid {:?} sweep value {v}", axis.param)));
                }
            }
        }
        Ok(())
    }

    pub fn axis(&self, param: SweepParam) -> Option<&[f64]> {
        self.sweep.iter().find(|a| a.param == param).map(|a| a.values.as_slice())
    }

    /// Seed of trial `t` at sweep point `sweep_index`.
    pub fn trial_seed(&self, sweep_index: usize, t: usize) -> u64 {
        StreamSeed::new(self.master_seed).trial(sweep_index as u64, t as u64).0
    }

    fn only_axes(&self, allowed: &[SweepParam], what: &str) -> Result<()> {
        match self.sweep.iter().find(|a| !allowed.contains(&a.param)) {
            Some(a) => Err(Error::invalid(format!("{what} does not support a {:?} sweep", a.param))),
            None => Ok(()),
        }
    }

    fn require_taps(&self, what: &str) -> Result<()> {
        if self.base.taps == 0 {
            return Err(Error::invalid(format!("{what} needs at least one channel tap")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EsdOverlay,
    EigComparison,
    GlrtDistribution,
    MissProbSweep,
    Roc,
}

impl ExperimentKind {
    /// Trial count used when a plan does not say.
    pub fn default_trials(self) -> usize {
        match self {
            ExperimentKind::EsdOverlay | ExperimentKind::EigComparison => 200,
            _ => 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: ExperimentKind,
    pub plan: TrialPlan,
    pub package: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub columns: Vec<Column>,
    /// Scalars and short vectors that do not fit the row layout.
    pub summary: BTreeMap<String, Vec<f64>>,
    pub metadata: Metadata,
}

impl ExperimentResult {
    pub fn new(kind: ExperimentKind, plan: &TrialPlan) -> Self {
        ExperimentResult {
            kind,
            columns: Vec::new(),
            summary: BTreeMap::new(),
            metadata: Metadata {
                kind,
                plan: plan.clone(),
                package: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    /// Appends a column; its length must match the existing ones.
    pub fn push_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if first.values.len() != values.len() {
                return Err(Error::DimensionMismatch {
                    op: "push_column",
                    detail: format!(
                        "column {name} has {} rows, table has {}",
                        values.len(),
                        first.values.len()
                    ),
                });
            }
        }
        if self.column(name).is_some() {
            return Err(Error::invalid(format!("duplicate column {name}")));
        }
        self.columns.push(Column {
            name: name.to_string(),
            values,
        });
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn summary(&self, name: &str) -> Option<&[f64]> {
        self.summary.get(name).map(|v| v.as_slice())
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary(name).and_then(|v| v.first().copied())
    }

    fn put(&mut self, name: &str, values: Vec<f64>) {
        self.summary.insert(name.to_string(), values);
    }
}

/// Thread pool for the trial map. `threads == 0` picks the rayon default.
pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
        Ok(Executor { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0..n)` in parallel, returned in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Runs the experiment named by `kind`.
pub fn run(kind: ExperimentKind, plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    match kind {
        ExperimentKind::EsdOverlay => run_esd_overlay(plan, exec),
        ExperimentKind::EigComparison => run_eig_comparison(plan, exec),
        ExperimentKind::GlrtDistribution => run_glrt_distribution(plan, exec),
        ExperimentKind::MissProbSweep => run_miss_prob_sweep(plan, exec),
        ExperimentKind::Roc => run_roc(plan, exec),
    }
}

/// Reruns the plan recorded in a result's metadata.
pub fn rerun(metadata: &Metadata, exec: &Executor) -> Result<ExperimentResult> {
    run(metadata.kind, &metadata.plan, exec)
}

fn spectrum(r: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigenvalues(r)?.into_values())
}

/// Mean of the `k`-th largest eigenvalue across trials, for each rank.
fn rank_means(spectra: &[Vec<f64>], ranks: usize) -> Vec<f64> {
    (0..ranks)
        .map(|k| {
            let v: Vec<f64> = spectra.iter().map(|s| s[k]).collect();
            stats::mean(&v)
        })
        .collect()
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.min(b)
}

/// Pooled eigenvalue histogram against the MP density, with bulk KS distances.
pub fn run_esd_overlay(plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    plan.validate()?;
    plan.only_axes(&[], "esd overlay")?;
    let base = &plan.base;
    let law = MpLaw::new(base.aspect_ratio())?;
    let spectra = exec.map(plan.n_trials, |t| {
        let x = generate_components(&base.with_seed(plan.trial_seed(0, t)))?.received()?;
        spectrum(&scm(&x)?)
    })?;

    let outliers = match base.hypothesis {
        Hypothesis::H0 => 0,
        Hypothesis::H1 => base.taps.min(base.antennas),
    };
    let mut pooled = Vec::with_capacity(spectra.len() * base.antennas);
    let mut bulk = Vec::with_capacity(pooled.capacity());
    let mut trial_ks = Vec::with_capacity(spectra.len());
    for s in &spectra {
        pooled.extend_from_slice(s);
        bulk.extend_from_slice(&s[outliers..]);
        trial_ks.push(ks_distance(&EigenSpectrum::from_values(s[outliers..].to_vec()), &law));
    }
    let pooled = EigenSpectrum::from_values(pooled);
    let bulk = EigenSpectrum::from_values(bulk);
    let hist = crate::rmt::esd_histogram(&pooled, plan.bins, None)?;
    let centers = hist.centers();
    let theory: Vec<f64> = centers.iter().map(|&x| law.density(x)).collect();

    let means = rank_means(&spectra, base.antennas);
    let mut result = ExperimentResult::new(ExperimentKind::EsdOverlay, plan);
    result.push_column("bin_center", centers)?;
    result.push_column("empirical_density", hist.density())?;
    result.push_column("mp_density", theory)?;
    result.put("ks_bulk_pooled", vec![ks_distance(&bulk, &law)]);
    result.put("ks_bulk_mean", vec![stats::mean(&trial_ks)]);
    result.put("mp_edges", vec![law.a, law.b]);
    result.put("mass_at_zero", vec![law.mass_at_zero]);
    result.put(
        "spectrum_range",
        vec![pooled.smallest().unwrap_or(f64::NAN), pooled.largest().unwrap_or(f64::NAN)],
    );
    result.put(
        "bulk_range",
        vec![bulk.smallest().unwrap_or(f64::NAN), bulk.largest().unwrap_or(f64::NAN)],
    );
    result.put(
        "count_above_edge",
        vec![means.iter().filter(|&&m| m > law.b).count() as f64],
    );
    let shown = (outliers + 5).min(base.antennas);
    result.put("rank_mean_top", means[..shown].to_vec());
    if outliers > 0 {
        result.put("mean_of_outliers", vec![stats::mean(&means[..outliers])]);
        let prediction = predicted_spikes(base)?;
        result.put(
            "predicted_spikes",
            prediction.taps.iter().map(|l| l.value().unwrap_or(f64::NAN)).collect(),
        );
    }
    Ok(result)
}

/// Top eigenvalues of the received SCM, the surrogate built from the same
/// draw, and an independent spiked Wishart matrix.
pub fn run_eig_comparison(plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    plan.validate()?;
    plan.only_axes(&[], "eigenvalue comparison")?;
    let base = &plan.base;
    if base.hypothesis != Hypothesis::H1 {
        return Err(Error::invalid("eigenvalue comparison needs an H1 scenario"));
    }
    let keep = (base.taps + 5).min(base.antennas);
    let per_trial = exec.map(plan.n_trials, |t| {
        let seed = plan.trial_seed(0, t);
        let parts = generate_components(&base.with_seed(seed))?;
        let received = spectrum(&scm(&parts.received()?)?)?;
        let surrogate = spectrum(&build_surrogate(&parts.channel, &parts.cross_term()?, &parts.noise)?)?;
        let mut rng = StreamSeed::new(seed).derive(WISHART_TAG, 0).rng();
        let wishart = build_spiked_wishart(base.antennas, base.samples, base.taps, base.channel_power, &mut rng)?;
        let wishart = spectrum(&wishart)?;
        Ok([received[..keep].to_vec(), surrogate[..keep].to_vec(), wishart[..keep].to_vec()])
    })?;

    let mut cols: [Vec<f64>; 5] = Default::default();
    for (t, tops) in per_trial.iter().enumerate() {
        for k in 0..keep {
            cols[0].push(t as f64);
            cols[1].push((k + 1) as f64);
            for (j, top) in tops.iter().enumerate() {
                cols[2 + j].push(top[k]);
            }
        }
    }
    let names = ["received", "surrogate", "spiked_wishart"];
    let means: Vec<Vec<f64>> = (0..3)
        .map(|j| {
            let s: Vec<Vec<f64>> = per_trial.iter().map(|p| p[j].clone()).collect();
            rank_means(&s, keep)
        })
        .collect();

    let mut result = ExperimentResult::new(ExperimentKind::EigComparison, plan);
    let [trial, rank, rx, rs, rw] = cols;
    result.push_column("trial", trial)?;
    result.push_column("rank", rank)?;
    result.push_column("received", rx)?;
    result.push_column("surrogate", rs)?;
    result.push_column("spiked_wishart", rw)?;
    for (name, m) in names.iter().zip(&means) {
        result.put(&format!("mean_top_{name}"), m.clone());
    }
    if keep > 0 {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            result.put(
                &format!("gap_{}_{}", names[i], names[j]),
                vec![relative_gap(means[i][0], means[j][0])],
            );
        }
    }
    let c = base.aspect_ratio();
    result.put("mp_upper_edge", vec![MpLaw::new(c)?.b]);
    let lambda = base.antennas as f64 * base.channel_power + 1.0;
    result.put("predicted_limit", vec![spike_limit(lambda, c)?.value().unwrap_or(f64::NAN)]);
    Ok(result)
}

/// `D` under both hypotheses from paired draws that share the noise.
pub fn run_glrt_distribution(plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    plan.validate()?;
    plan.only_axes(&[], "GLRT distribution")?;
    let base = plan.base.with_hypothesis(Hypothesis::H1);
    let pairs = exec.map(plan.n_trials, |t| {
        let parts = generate_components(&base.with_seed(plan.trial_seed(0, t)))?;
        let d0 = detector::glrt_statistic_from_matrix(&scm(&parts.noise)?)?;
        let d1 = detector::glrt_statistic_from_matrix(&scm(&parts.received()?)?)?;
        Ok((d0, d1))
    })?;
    let (d0, d1): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

    let p = base.antennas;
    let c = base.aspect_ratio();
    let h0 = detector::h0_asymptotics(p, c)?;
    let h1 = detector::h1_asymptotics(p, c, base.taps, base.channel_power)?;
    let positive = |d: &[f64]| -> Result<f64> {
        let mut hits = 0usize;
        for &x in d {
            if detector::decide(x, plan.p_fa, p, c)?.decision == Decision::SignalPresent {
                hits += 1;
            }
        }
        Ok(hits as f64 / d.len() as f64)
    };

    let lo = d0.iter().chain(&d1).copied().fold(f64::INFINITY, f64::min);
    let hi = d0.iter().chain(&d1).copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = match plan.bins {
        Some(b) => b,
        None => {
            let all: Vec<f64> = d0.iter().chain(&d1).copied().collect();
            crate::rmt::freedman_diaconis_bins(&all)
        }
    };
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let mut hist0 = EsdHistogram::with_range(bins, lo, hi)?;
    let mut hist1 = hist0.clone();
    d0.iter().for_each(|&x| hist0.add(x));
    d1.iter().for_each(|&x| hist1.add(x));
    let centers = hist0.centers();

    let mut result = ExperimentResult::new(ExperimentKind::GlrtDistribution, plan);
    result.push_column("bin_center", centers.clone())?;
    result.push_column("density_h0", hist0.density())?;
    result.push_column("density_h1", hist1.density())?;
    result.push_column("theory_pdf_h0", centers.iter().map(|&x| h0.pdf(x)).collect())?;
    result.push_column("theory_pdf_h1", centers.iter().map(|&x| h1.pdf(x)).collect())?;
    result.put("mean_h0", vec![stats::mean(&d0)]);
    result.put("variance_h0", vec![stats::variance(&d0)]);
    result.put("std_error_h0", vec![stats::standard_error(&d0)]);
    result.put("mean_h1", vec![stats::mean(&d1)]);
    result.put("variance_h1", vec![stats::variance(&d1)]);
    result.put("std_error_h1", vec![stats::standard_error(&d1)]);
    result.put("theory_mean_h0", vec![h0.mean]);
    result.put("theory_mean_h1", vec![h1.mean]);
    result.put("theory_variance", vec![h0.variance]);
    result.put("half_log_offset", vec![detector::half_log_discrepancy(c)?]);
    result.put("threshold", vec![h0.mean + h0.std_dev() * detector::threshold(plan.p_fa)?]);
    result.put("false_alarm_rate", vec![positive(&d0)?]);
    result.put("detection_rate", vec![positive(&d1)?]);
    result.put("d_h0", d0);
    result.put("d_h1", d1);
    Ok(result)
}

/// Statistic of one trial as a function of channel power, with the noise,
/// unit-power channel and signal held fixed.
///
/// With `X = σ H S + W`, `R = σ² H T H* + σ (H K* + K H*) + C` where
/// `T = S S*/N`, `K = W S*/N` and `C = W W*/N`. Writing `U = [H K]`, the
/// signal part is `U M U*` with `M = [[σ² T, σ I], [σ I, 0]]`, so
/// `log det R = log det C + log det(I + M U* C⁻¹ U)` and only a `2L x 2L`
/// determinant depends on `σ`.
pub(crate) struct SnrFamily {
    antennas: usize,
    trace_c: f64,
    log_det_c: f64,
    trace_a: f64,
    trace_b: f64,
    signal_gram: ComplexMatrix,
    gram: ComplexMatrix,
}

impl SnrFamily {
    /// Draws the trial behind `scenario`; its channel power is ignored.
    pub(crate) fn draw(scenario: &Scenario) -> Result<Self> {
        let unit = Scenario {
            channel_power: 1.0,
            hypothesis: Hypothesis::H1,
            ..scenario.clone()
        };
        let parts = generate_components(&unit)?;
        let (h, s, w) = (&parts.channel, &parts.lagged_signal, &parts.noise);
        let p = w.rows();
        let l = h.cols();
        let inv_n = 1.0 / w.cols() as f64;

        let c = scm(w)?;
        let chol = Cholesky::factor(&c)?;
        let t = s.product(Op::Plain, s, Op::Adjoint)?.scaled(inv_n);
        let k = w.product(Op::Plain, s, Op::Adjoint)?.scaled(inv_n);
        let hh = h.product(Op::Adjoint, h, Op::Plain)?;
        let mut trace_a = 0.0;
        for i in 0..l {
            for j in 0..l {
                trace_a += (t[(i, j)] * hh[(j, i)]).re;
            }
        }
        let mut trace_b = 0.0;
        for i in 0..p {
            for j in 0..l {
                trace_b += (h[(i, j)] * k[(i, j)].conj()).re;
            }
        }
        let u = ComplexMatrix::from_fn(p, 2 * l, |i, j| if j < l { h[(i, j)] } else { k[(i, j - l)] });
        let y = chol.solve_lower(&u)?;
        let gram = y.product(Op::Adjoint, &y, Op::Plain)?;
        Ok(SnrFamily {
            antennas: p,
            trace_c: c.trace().re,
            log_det_c: chol.log_det(),
            trace_a,
            trace_b,
            signal_gram: t,
            gram,
        })
    }

    /// `D` of the noise-only matrix `C`.
    pub(crate) fn noise_statistic(&self) -> f64 {
        self.trace_c - self.log_det_c - self.antennas as f64
    }

    pub(crate) fn statistic(&self, channel_power: f64) -> Result<f64> {
        let sigma = channel_power.sqrt();
        let l = self.signal_gram.rows();
        let m = ComplexMatrix::from_fn(2 * l, 2 * l, |i, j| match (i < l, j < l) {
            (true, true) => self.signal_gram[(i, j)] * channel_power,
            (true, false) | (false, true) if i % l == j % l => Complex64::new(sigma, 0.0),
            _ => Complex64::new(0.0, 0.0),
        });
        let mut a = m.matmul(&self.gram)?;
        for i in 0..2 * l {
            a.as_mut_slice()[i * 2 * l + i] += 1.0;
        }
        let trace = channel_power * self.trace_a + 2.0 * sigma * self.trace_b + self.trace_c;
        Ok(trace - self.log_det_c - log_abs_det(a)? - self.antennas as f64)
    }
}

/// `ln |det A|` by LU with partial pivoting.
fn log_abs_det(a: ComplexMatrix) -> Result<f64> {
    let n = a.rows();
    let mut m = a.into_vec();
    let mut acc = 0.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))
            .unwrap_or(col);
        let pivot = m[pivot_row * n + col];
        if pivot.norm() == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularMatrix(format!("zero LU pivot in column {col}")));
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(pivot_row * n + j, col * n + j);
            }
        }
        acc += pivot.norm().ln();
        for i in col + 1..n {
            let f = m[i * n + col] / pivot;
            for j in col..n {
                let v = m[col * n + j];
                m[i * n + j] -= f * v;
            }
        }
    }
    Ok(acc)
}

fn default_snr_grid() -> Vec<f64> {
    let (start, stop, step) = DEFAULT_SNR_GRID;
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// First `x` where the piecewise-linear curve through `(xs, ys)` reaches
/// `level`, scanning in increasing `x`. NaN when it never does.
pub fn crossing(xs: &[f64], ys: &[f64], level: f64) -> f64 {
    let mut order: Vec<usize> = (0..xs.len().min(ys.len())).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    for w in order.windows(2) {
        let (x0, y0, x1, y1) = (xs[w[0]], ys[w[0]], xs[w[1]], ys[w[1]]);
        if y0 == level {
            return x0;
        }
        if (y0 - level) * (y1 - level) < 0.0 {
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0);
        }
    }
    match order.last() {
        Some(&i) if ys[i] == level => xs[i],
        _ => f64::NAN,
    }
}

/// Statistics of one trial: `D` under H0 and at every channel power.
fn snr_trial(scenario: &Scenario, powers: &[f64]) -> Result<(f64, Vec<f64>)> {
    let family = SnrFamily::draw(scenario)?;
    let d1 = powers.iter().map(|&s2| family.statistic(s2)).collect::<Result<Vec<_>>>()?;
    Ok((family.noise_statistic(), d1))
}

fn detection_rate(stats_: &[f64], p_fa: f64, antennas: usize, c: f64) -> Result<f64> {
    let mut hits = 0usize;
    for &d in stats_ {
        if detector::decide(d, p_fa, antennas, c)?.decision == Decision::SignalPresent {
            hits += 1;
        }
    }
    Ok(hits as f64 / stats_.len() as f64)
}

/// Theoretical and empirical miss probability over an SNR grid, for one or
/// more sample counts. All SNR points of a trial share its noise, channel
/// direction and signal.
pub fn run_miss_prob_sweep(plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    plan.validate()?;
    plan.only_axes(&[SweepParam::Samples, SweepParam::SnrDb], "miss-probability sweep")?;
    plan.require_taps("miss-probability sweep")?;
    let base = &plan.base;
    let samples: Vec<usize> = match plan.axis(SweepParam::Samples) {
        Some(v) => v.iter().map(|&n| n as usize).collect(),
        None => vec![base.samples],
    };
    let snrs = plan.axis(SweepParam::SnrDb).map_or_else(default_snr_grid, |v| v.to_vec());
    let powers: Vec<f64> = snrs.iter().map(|&s| channel_power_from_snr_db(s, base.taps)).collect();

    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut crossings = (Vec::new(), Vec::new());
    for (ni, &n) in samples.iter().enumerate() {
        let scenario = Scenario {
            samples: n,
            ..base.clone()
        };
        scenario.validate()?;
        let c = scenario.aspect_ratio();
        let trials = exec.map(plan.n_trials, |t| snr_trial(&scenario.with_seed(plan.trial_seed(ni, t)), &powers))?;
        let d0: Vec<f64> = trials.iter().map(|t| t.0).collect();
        let fa = detection_rate(&d0, plan.p_fa, base.antennas, c)?;
        let mut theory = Vec::with_capacity(snrs.len());
        let mut empirical = Vec::with_capacity(snrs.len());
        for (k, (&snr, &s2)) in snrs.iter().zip(&powers).enumerate() {
            let d1: Vec<f64> = trials.iter().map(|t| t.1[k]).collect();
            let miss = 1.0 - detection_rate(&d1, plan.p_fa, base.antennas, c)?;
            let th = detector::theoretical_miss_probability(base.antennas, c, base.taps, s2, plan.p_fa)?;
            cols[0].push(n as f64);
            cols[1].push(snr);
            cols[2].push(s2);
            cols[3].push(th);
            cols[4].push(miss);
            cols[5].push(fa);
            theory.push(th);
            empirical.push(miss);
        }
        crossings.0.push(crossing(&snrs, &theory, 0.5));
        crossings.1.push(crossing(&snrs, &empirical, 0.5));
    }

    let mut result = ExperimentResult::new(ExperimentKind::MissProbSweep, plan);
    let [n_col, snr_col, power_col, th_col, emp_col, fa_col] = cols;
    result.push_column("samples", n_col)?;
    result.push_column("snr_db", snr_col)?;
    result.push_column("channel_power", power_col)?;
    result.push_column("theory_miss", th_col)?;
    result.push_column("empirical_miss", emp_col)?;
    result.push_column("false_alarm_rate", fa_col)?;
    let (theory, empirical) = crossings;
    let gaps = theory.iter().zip(&empirical).map(|(t, e)| e - t).collect();
    let per_doubling = |v: &[f64]| -> Vec<f64> {
        (1..samples.len())
            .map(|i| (v[i - 1] - v[i]) / (samples[i] as f64 / samples[i - 1] as f64).log2())
            .collect()
    };
    result.put("samples", samples.iter().map(|&n| n as f64).collect());
    result.put("shift_per_doubling_theory_db", per_doubling(&theory));
    result.put("shift_per_doubling_empirical_db", per_doubling(&empirical));
    result.put("crossing_theory_db", theory);
    result.put("crossing_empirical_db", empirical);
    result.put("horizontal_gap_db", gaps);
    Ok(result)
}

/// ROC curves from shared statistic pools: one H0 pool and one H1 pool per
/// SNR, thresholded at every false-alarm target.
pub fn run_roc(plan: &TrialPlan, exec: &Executor) -> Result<ExperimentResult> {
    plan.validate()?;
    plan.only_axes(&[SweepParam::SnrDb, SweepParam::PFa], "ROC")?;
    plan.require_taps("ROC")?;
    let base = &plan.base;
    let snrs = plan.axis(SweepParam::SnrDb).map_or_else(|| vec![base.snr_db()], |v| v.to_vec());
    let grid = plan.axis(SweepParam::PFa).map_or_else(
        || log_spaced(DEFAULT_ROC_RANGE.0, DEFAULT_ROC_RANGE.1, DEFAULT_ROC_POINTS),
        |v| v.to_vec(),
    );
    let powers: Vec<f64> = snrs.iter().map(|&s| channel_power_from_snr_db(s, base.taps)).collect();
    let (p, c) = (base.antennas, base.aspect_ratio());
    let trials = exec.map(plan.n_trials, |t| snr_trial(&base.with_seed(plan.trial_seed(0, t)), &powers))?;
    let d0: Vec<f64> = trials.iter().map(|t| t.0).collect();
    let pfa_emp = grid
        .iter()
        .map(|&a| detection_rate(&d0, a, p, c))
        .collect::<Result<Vec<_>>>()?;

    let mut cols: [Vec<f64>; 5] = Default::default();
    let mut max_gap = Vec::new();
    let mut min_gap = Vec::new();
    for (k, (&snr, &s2)) in snrs.iter().zip(&powers).enumerate() {
        let d1: Vec<f64> = trials.iter().map(|t| t.1[k]).collect();
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for (&a, &fa) in grid.iter().zip(&pfa_emp) {
            let th = 1.0 - detector::theoretical_miss_probability(p, c, base.taps, s2, a)?;
            let emp = detection_rate(&d1, a, p, c)?;
            hi = hi.max(th - emp);
            lo = lo.min(th - emp);
            cols[0].push(snr);
            cols[1].push(a);
            cols[2].push(th);
            cols[3].push(emp);
            cols[4].push(fa);
        }
        max_gap.push(hi);
        min_gap.push(lo);
    }
    let mut result = ExperimentResult::new(ExperimentKind::Roc, plan);
    let [snr_col, pfa_col, th_col, emp_col, fa_col] = cols;
    result.push_column("snr_db", snr_col)?;
    result.push_column("p_fa", pfa_col)?;
    result.push_column("theory_pd", th_col)?;
    result.push_column("empirical_pd", emp_col)?;
    result.push_column("empirical_pfa", fa_col)?;
    result.put("snr_db", snrs);
    result.put("max_vertical_gap", max_gap);
    result.put("min_vertical_gap", min_gap);
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    /// Format implied by a file extension, if any.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

/// 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
    w.write_record(result.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
    for row in 0..result.rows() {
        w.write_record(result.columns.iter().map(|c| format_number(c.values[row])))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))?;
    Ok(())
}

pub fn write_json<W: Write>(result: &ExperimentResult, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, result)?;
    writeln!(out).map_err(|e| Error::invalid(format!("JSON write failed: {e}")))?;
    Ok(())
}

pub fn write_result(result: &ExperimentResult, path: &Path, format: OutputFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(result, &mut buf)?,
        OutputFormat::Json => write_json(result, &mut buf)?,
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads the columns of a CSV written by [`write_result`].
pub fn read_result_csv(path: &Path) -> Result<Vec<Column>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let mut columns: Vec<Column> = headers
        .iter()
        .map(|h| Column {
            name: h.to_string(),
            values: Vec::new(),
        })
        .collect();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns.len() {
            return Err(parse_err(
                line,
                format!("{} fields, header has {}", record.len(), columns.len()),
            ));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            col.values.push(v);
        }
    }
    Ok(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::generate_received;

    #[test]
    fn snr_family_matches_direct_statistic() {
        let base = Scenario::h1(24, 60, 3, 0.0, 11);
        let family = SnrFamily::draw(&base).unwrap();
        let direct0 = detector::glrt_statistic_from_matrix(&scm(&generate_received(&Scenario::h0(24, 60, 11)).unwrap()).unwrap()).unwrap();
        assert!((family.noise_statistic() - direct0).abs() < 1e-12 * direct0.abs().max(1.0));
        assert!((family.statistic(0.0).unwrap() - direct0).abs() < 1e-10);
        for s2 in [0.003, 0.05, 0.7, 4.0] {
            let x = generate_received(&Scenario::h1(24, 60, 3, s2, 11)).unwrap();
            let direct = detector::glrt_statistic_from_matrix(&scm(&x).unwrap()).unwrap();
            let fast = family.statistic(s2).unwrap();
            assert!((fast - direct).abs() < 1e-9 * direct.abs().max(1.0), "{s2}: {fast} vs {direct}");
        }
    }

    #[test]
    fn log_abs_det_small() {
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 3.0),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        // det = -6i
        assert!((log_abs_det(a).unwrap() - 6f64.ln()).abs() < 1e-15);
        assert!(log_abs_det(ComplexMatrix::zeros(2, 2)).is_err());
        assert_eq!(log_abs_det(ComplexMatrix::zeros(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn crossing_interpolates() {
        let xs = [-3.0, -2.0, -1.0, 0.0];
        let ys = [1.0, 0.8, 0.4, 0.0];
        assert!((crossing(&xs, &ys, 0.5) - -1.25).abs() < 1e-15);
        assert_eq!(crossing(&xs, &ys, 0.8), -2.0);
        assert!(crossing(&xs, &ys, 2.0).is_nan());
        // order of the input does not matter
        assert!((crossing(&[0.0, -2.0, -3.0, -1.0], &[0.0, 0.8, 1.0, 0.4], 0.5) - -1.25).abs() < 1e-15);
    }

    #[test]
    fn log_spaced_endpoints() {
        let v = log_spaced(1e-3, 0.5, 50);
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[49], 0.5);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[1] / v[0] - (500f64).powf(1.0 / 49.0)).abs() < 1e-12);
    }

    #[test]
    fn default_grid_spacing() {
        let g = default_snr_grid();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], -22.0);
        assert_eq!(g[24], -10.0);
    }

    #[test]
    fn plan_validation() {
        let base = Scenario::h1(8, 16, 2, 0.1, 0);
        assert!(TrialPlan::new(base.clone(), 0, 1).validate().is_err());
        assert!(TrialPlan::new(base.clone(), 1, 1).with_p_fa(1.0).validate().is_err());
        let bad = TrialPlan::new(base.clone(), 1, 1).with_sweep(SweepParam::Samples, vec![3.5]);
        assert!(bad.validate().is_err());
        let empty = TrialPlan::new(base.clone(), 1, 1).with_sweep(SweepParam::SnrDb, vec![]);
        assert!(empty.validate().is_err());
        let ok = TrialPlan::new(base, 1, 1).with_sweep(SweepParam::PFa, vec![0.1, 0.2]);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.axis(SweepParam::PFa), Some(&[0.1, 0.2][..]));
    }

    #[test]
    fn unsupported_sweeps_rejected() {
        let exec = Executor::new(1).unwrap();
        let plan = TrialPlan::new(Scenario::h0(8, 16, 0), 2, 1).with_sweep(SweepParam::SnrDb, vec![-5.0]);
        assert!(run_esd_overlay(&plan, &exec).is_err());
        assert!(run_glrt_distribution(&plan, &exec).is_err());
        // miss sweep needs taps
        let plan = TrialPlan::new(Scenario::h0(8, 16, 0), 2, 1);
        assert!(run_miss_prob_sweep(&plan, &exec).is_err());
    }

    #[test]
    fn push_column_checks_length() {
        let plan = TrialPlan::new(Scenario::h0(4, 8, 0), 1, 0);
        let mut r = ExperimentResult::new(ExperimentKind::Roc, &plan);
        r.push_column("a", vec![1.0, 2.0]).unwrap();
        assert!(r.push_column("b", vec![1.0]).is_err());
        assert!(r.push_column("a", vec![1.0, 2.0]).is_err());
        assert_eq!(r.rows(), 2);
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 2.0f64.sqrt()] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn small_runs_have_expected_shape() {
        let exec = Executor::new(2).unwrap();
        let h1 = Scenario::h1(16, 32, 2, 0.5, 0);
        let esd = run_esd_overlay(&TrialPlan::new(h1.clone(), 4, 3).with_bins(Some(10)), &exec).unwrap();
        assert_eq!(esd.rows(), 10);
        assert_eq!(esd.summary("predicted_spikes").unwrap().len(), 2);

        let eig = run_eig_comparison(&TrialPlan::new(h1.clone(), 3, 3), &exec).unwrap();
        assert_eq!(eig.rows(), 3 * 7);

        let glrt = run_glrt_distribution(&TrialPlan::new(h1.clone(), 20, 3), &exec).unwrap();
        assert_eq!(glrt.summary("d_h0").unwrap().len(), 20);
        assert!(glrt.summary("d_h0").unwrap().iter().all(|&d| d >= 0.0));

        let plan = TrialPlan::new(h1.clone(), 10, 3)
            .with_sweep(SweepParam::Samples, vec![32.0, 64.0])
            .with_sweep(SweepParam::SnrDb, vec![-20.0, -10.0, 0.0, 10.0]);
        let miss = run_miss_prob_sweep(&plan, &exec).unwrap();
        assert_eq!(miss.rows(), 8);
        // saturated detection at the top of the grid
        assert_eq!(miss.column("empirical_miss").unwrap()[3], 0.0);

        let roc = run_roc(&TrialPlan::new(h1, 30, 3), &exec).unwrap();
        assert_eq!(roc.rows(), DEFAULT_ROC_POINTS);
        let pd = roc.column("empirical_pd").unwrap();
        assert!(pd.windows(2).all(|w| w[1] >= w[0]));
    }
}
