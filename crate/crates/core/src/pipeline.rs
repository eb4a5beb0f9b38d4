// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end detection, evaluation metrics and the replicate harness.

use crate::error::{Result, VarsegError};
use crate::model::{default_schedule, effective_n, matrix_to_rows, TimeSeries, TuningSchedule};
use crate::sim::{make_scenario, simulate, ScenarioPreset};
use crate::stage1::{
    bcd_solve, build_stage1, extract_candidates, BcdOptions, CandidateSet, Stage1Report, ThetaEstimate,
};
use crate::stage2::{select_breaks, ScreeningReport, ScreeningResult, Strategy, DEFAULT_EXHAUSTIVE_CAP};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Default constant `C` in `lambda_n = 2C sqrt(...)`, for unit-RMS data.
pub const DEFAULT_LAMBDA_C: f64 = 0.5;
/// Default exponent `v` in `omega_n = (ln n ln p)^(1+v)`.
pub const DEFAULT_OMEGA_V: f64 = 0.5;
/// Default multiplier in `eta_n = C_eta * gamma_n`.
pub const DEFAULT_ETA_C: f64 = 1.0;
/// Half-width of the "correctly detected" window, as a fraction of `T`.
pub const DEFAULT_SELECTION_WINDOW: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct DetectOptions {
    pub bcd: BcdOptions,
    pub zero_tol: Option<f64>,
    pub strategy: Strategy,
    pub exhaustive_cap: usize,
    /// Divide the series by its overall RMS before fitting. A single global
    /// factor leaves every VAR coefficient unchanged and puts the penalties
    /// on a unit scale.
    pub normalize: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            bcd: BcdOptions::default(),
            zero_tol: None,
            strategy: Strategy::Backward,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            normalize: true,
        }
    }
}

/// Schedule from the default rates for a series of `len` points.
pub fn schedule_for(len: usize, p: usize, d: usize, lambda_c: f64, omega_v: f64, eta_c: f64) -> Result<TuningSchedule> {
    let n = effective_n(len, d) as f64;
    Ok(default_schedule(n, p, d, lambda_c, omega_v)?.with_eta_constant(eta_c))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub stage1: Duration,
    pub stage2: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub d: usize,
    pub n: usize,
    /// Factor the data were multiplied by before fitting.
    pub scale: f64,
    pub schedule: TuningSchedule,
    pub estimate: ThetaEstimate,
    pub stage1: CandidateSet,
    pub stage2: ScreeningResult,
    pub final_breaks: Vec<usize>,
    /// `p x pd` coefficient estimate per final segment.
    pub final_models: Vec<DMatrix<f64>>,
    pub timings: StageTimings,
}

/// JSON form of a detection run. Timings are left out so that repeated
/// runs serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub d: usize,
    pub n: usize,
    pub scale: f64,
    pub schedule: TuningSchedule,
    pub stage1: Stage1Report,
    pub stage2: ScreeningReport,
    pub final_breaks: Vec<usize>,
    pub final_models: Vec<Vec<Vec<f64>>>,
}

impl From<&DetectionResult> for DetectionReport {
    fn from(r: &DetectionResult) -> Self {
        Self {
            d: r.d,
            n: r.n,
            scale: r.scale,
            schedule: r.schedule.clone(),
            stage1: Stage1Report::new(&r.estimate, &r.stage1),
            stage2: ScreeningReport::from(&r.stage2),
            final_breaks: r.final_breaks.clone(),
            final_models: r.final_models.iter().map(matrix_to_rows).collect(),
        }
    }
}

/// Runs both stages on one series.
pub fn detect(data: &TimeSeries, d: usize, schedule: &TuningSchedule, options: &DetectOptions) -> Result<DetectionResult> {
    if d == 0 || data.len() <= 3 * d {
        return Err(VarsegError::invalid(format!(
            "series of length {} is too short for lag order {d} (need more than {})",
            data.len(),
            3 * d
        ))
        .in_stage("detect"));
    }
    schedule.validate().map_err(|e| e.in_stage("detect"))?;

    let scale = if options.normalize {
        let rms = data.rms();
        if rms > 0.0 {
            1.0 / rms
        } else {
            1.0
        }
    } else {
        1.0
    };
    let scaled;
    let work = if scale != 1.0 {
        scaled = data.scaled(scale);
        &scaled
    } else {
        data
    };

    let started = Instant::now();
    let problem = build_stage1(work, d).map_err(|e| e.in_stage("stage 1"))?;
    let estimate = bcd_solve(&problem, schedule.lambda_n, &options.bcd, None).map_err(|e| e.in_stage("stage 1"))?;
    let candidates = extract_candidates(&estimate, options.zero_tol, d);
    let stage1_time = started.elapsed();

    let started = Instant::now();
    let screening = select_breaks(work, &candidates, d, schedule, options.strategy, options.exhaustive_cap)
        .map_err(|e| e.in_stage("stage 2"))?;
    let stage2_time = started.elapsed();

    log::info!(
        "detect: {} candidates ({} after merging), {} final breaks; stage 1 {:?} ({} sweeps), stage 2 {:?}",
        candidates.m_hat,
        screening.screened_candidates.len(),
        screening.m_final,
        stage1_time,
        estimate.iterations,
        stage2_time
    );

    Ok(DetectionResult {
        d,
        n: problem.n,
        scale,
        schedule: schedule.clone(),
        final_breaks: screening.chosen_breaks.clone(),
        final_models: screening.fits.iter().map(|f| f.theta.clone()).collect(),
        estimate,
        stage1: candidates,
        stage2: screening,
        timings: StageTimings {
            stage1: stage1_time,
            stage2: stage2_time,
        },
    })
}

/// One-sided Hausdorff distance `max_{b in estimate} min_{a in reference} |b - a|`.
///
/// Zero when `estimate` is empty; infinite when only `reference` is empty.
pub fn hausdorff(reference: &[usize], estimate: &[usize]) -> f64 {
    if estimate.is_empty() {
        return 0.0;
    }
    if reference.is_empty() {
        return f64::INFINITY;
    }
    estimate
        .iter()
        .map(|&b| reference.iter().map(|&a| a.abs_diff(b)).min().unwrap_or(usize::MAX))
        .max()
        .unwrap_or(0) as f64
}

/// At least as many candidates as true breaks, and every true break has a
/// candidate within `radius`.
pub fn stage1_coverage_check(candidates: &[usize], truth: &[usize], radius: usize) -> bool {
    candidates.len() >= truth.len() && hausdorff(candidates, truth) <= radius as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateConfig {
    pub schedule: TuningSchedule,
    pub options: DetectOptions,
    pub window_frac: f64,
    /// Coverage radius for the stage-1 check; `ceil(n gamma_n)` when `None`.
    pub coverage_radius: Option<usize>,
}

impl ReplicateConfig {
    pub fn for_preset(preset: &ScenarioPreset) -> Result<Self> {
        Ok(Self {
            schedule: schedule_for(preset.len, preset.p, preset.d, DEFAULT_LAMBDA_C, DEFAULT_OMEGA_V, DEFAULT_ETA_C)?,
            options: DetectOptions::default(),
            window_frac: DEFAULT_SELECTION_WINDOW,
            coverage_radius: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    /// `None` when detection failed; the message is kept in `error`.
    pub final_breaks: Option<Vec<usize>>,
    pub candidates: Vec<usize>,
    pub screened_candidates: Vec<usize>,
    pub stage1_converged: bool,
    pub coverage_ok: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakStats {
    pub break_index: usize,
    pub truth: usize,
    pub truth_rel: f64,
    pub mean_rel: Option<f64>,
    pub std_rel: Option<f64>,
    pub selection_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mean: Option<f64>,
    pub max: Option<f64>,
    /// Replicates where the distance was infinite (nothing to match).
    pub unmatched: usize,
}

impl DistanceStats {
    fn from_values(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        Self {
            mean: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            max: finite.iter().copied().reduce(f64::max),
            unmatched: values.len() - finite.len(),
        }
    }
}

/// Aggregate statistics over seeded replicates of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub scenario: ScenarioPreset,
    pub replicates: usize,
    pub failures: usize,
    pub window: f64,
    pub coverage_radius: usize,
    pub per_break: Vec<BreakStats>,
    pub exact_count_rate: f64,
    /// Fraction with `|A_n| >= m0` and every true break covered.
    pub coverage_rate: f64,
    /// Fraction where stage 1 proposed more breaks than stage 2 kept and
    /// stage 2 kept exactly `m0`.
    pub prune_rate: f64,
    pub mean_candidates: f64,
    pub hausdorff_stage1: DistanceStats,
    pub hausdorff_final: DistanceStats,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ReplicateSummary {
    /// Table rows `break_index,truth_rel,mean_rel,std_rel,selection_rate`.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let mut out = String::from("break_index,truth_rel,mean_rel,std_rel,selection_rate\n");
        for b in &self.per_break {
            out.push_str(&format!(
                "{},{:.6},{},{},{:.6}\n",
                b.break_index,
                b.truth_rel,
                fmt(b.mean_rel),
                fmt(b.std_rel),
                b.selection_rate
            ));
        }
        out
    }
}

fn run_one(preset: &ScenarioPreset, replicate: usize, seed: u64, config: &ReplicateConfig, radius: usize) -> ReplicateOutcome {
    let attempt = || -> Result<DetectionResult> {
        let sim = make_scenario(preset, seed);
        let data = simulate(&sim)?;
        detect(&data, preset.d, &config.schedule, &config.options)
    };
    match attempt() {
        Ok(res) => ReplicateOutcome {
            replicate,
            seed,
            coverage_ok: stage1_coverage_check(&res.stage1.times, &preset.breaks, radius),
            final_breaks: Some(res.final_breaks),
            candidates: res.stage1.times,
            screened_candidates: res.stage2.screened_candidates,
            stage1_converged: res.estimate.converged,
            error: None,
        },
        Err(e) => ReplicateOutcome {
            replicate,
            seed,
            final_breaks: None,
            candidates: vec![],
            screened_candidates: vec![],
            stage1_converged: false,
            coverage_ok: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `r` replicates of a scenario; replicate `k` uses seed `base_seed + k`.
///
/// Replicates run in parallel on the current rayon pool and are folded in
/// index order, so the summary does not depend on scheduling.
pub fn run_replicates(preset: &ScenarioPreset, r: usize, base_seed: u64, config: &ReplicateConfig) -> Result<ReplicateSummary> {
    if r == 0 {
        return Err(VarsegError::invalid("need at least one replicate"));
    }
    let n = effective_n(preset.len, preset.d);
    let radius = config
        .coverage_radius
        .unwrap_or_else(|| config.schedule.coverage_radius(n));
    let outcomes: Vec<ReplicateOutcome> = (0..r)
        .into_par_iter()
        .map(|k| run_one(preset, k, base_seed.wrapping_add(k as u64), config, radius))
        .collect();
    Ok(summarize(preset, config.window_frac, radius, outcomes))
}

/// Folds replicate outcomes (in the given order) into a summary.
pub fn summarize(preset: &ScenarioPreset, window_frac: f64, radius: usize, outcomes: Vec<ReplicateOutcome>) -> ReplicateSummary {
    let len = preset.len as f64;
    let window = window_frac * len;
    let total = outcomes.len() as f64;
    let ok: Vec<(&ReplicateOutcome, &Vec<usize>)> = outcomes
        .iter()
        .filter_map(|o| o.final_breaks.as_ref().map(|b| (o, b)))
        .collect();

    let per_break = preset
        .breaks
        .iter()
        .enumerate()
        .map(|(idx, &truth)| {
            let hits: Vec<f64> = ok
                .iter()
                .filter_map(|(_, fb)| {
                    fb.iter()
                        .min_by_key(|&&b| (b.abs_diff(truth), b))
                        .filter(|&&b| b.abs_diff(truth) as f64 <= window)
                        .map(|&b| b as f64 / len)
                })
                .collect();
            let (mean_rel, std_rel) = mean_std(&hits);
            BreakStats {
                break_index: idx + 1,
                truth,
                truth_rel: truth as f64 / len,
                mean_rel,
                std_rel,
                selection_rate: hits.len() as f64 / total,
            }
        })
        .collect();

    let m0 = preset.breaks.len();
    let exact = ok.iter().filter(|(_, fb)| fb.len() == m0).count() as f64;
    let pruned = ok
        .iter()
        .filter(|(o, fb)| fb.len() == m0 && o.candidates.len() > m0)
        .count() as f64;
    let covered = outcomes.iter().filter(|o| o.coverage_ok).count() as f64;
    let mean_candidates = if ok.is_empty() {
        0.0
    } else {
        ok.iter().map(|(o, _)| o.candidates.len() as f64).sum::<f64>() / ok.len() as f64
    };
    let h1: Vec<f64> = ok.iter().map(|(o, _)| hausdorff(&o.candidates, &preset.breaks)).collect();
    let h2: Vec<f64> = ok.iter().map(|(_, fb)| hausdorff(fb, &preset.breaks)).collect();

    ReplicateSummary {
        scenario: preset.clone(),
        replicates: outcomes.len(),
        failures: outcomes.len() - ok.len(),
        window,
        coverage_radius: radius,
        per_break,
        exact_count_rate: exact / total,
        coverage_rate: covered / total,
        prune_rate: pruned / total,
        mean_candidates,
        hausdorff_stage1: DistanceStats::from_values(&h1),
        hausdorff_final: DistanceStats::from_values(&h2),
        outcomes,
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioId;

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff(&[100, 200], &[101, 198]), 2.0);
        assert_eq!(hausdorff(&[100, 200], &[100, 200]), 0.0);
        assert_eq!(hausdorff(&[100], &[100, 250]), 150.0);
        assert_eq!(hausdorff(&[5], &[]), 0.0);
        assert_eq!(hausdorff(&[], &[3]), f64::INFINITY);
    }

    #[test]
    fn coverage_examples() {
        assert!(stage1_coverage_check(&[100, 150, 200], &[100, 200], 0));
        assert!(stage1_coverage_check(&[102, 150, 199], &[100, 200], 5));
        assert!(!stage1_coverage_check(&[102], &[100, 200], 1000));
        assert!(!stage1_coverage_check(&[110, 200], &[100, 200], 5));
    }

    #[test]
    fn short_series_is_rejected_with_stage_label() {
        let data = TimeSeries::zeros(6, 2);
        let schedule = schedule_for(6, 2, 2, 1.0, 0.5, 1.0).unwrap();
        let err = detect(&data, 2, &schedule, &DetectOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("detect:"), "{err}");
    }

    #[test]
    fn single_replicate_has_zero_spread() {
        let preset = ScenarioPreset::new(ScenarioId::S1Center);
        let outcome = ReplicateOutcome {
            replicate: 0,
            seed: 0,
            final_breaks: Some(vec![99, 201]),
            candidates: vec![95, 99, 150, 201],
            screened_candidates: vec![95, 99, 150, 201],
            stage1_converged: true,
            coverage_ok: true,
            error: None,
        };
        let s = summarize(&preset, 0.02, 18, vec![outcome]);
        assert_eq!(s.per_break[0].std_rel, Some(0.0));
        assert_eq!(s.per_break[0].mean_rel, Some(99.0 / 300.0));
        assert_eq!(s.per_break[1].selection_rate, 1.0);
        assert_eq!(s.exact_count_rate, 1.0);
        assert_eq!(s.prune_rate, 1.0);
        assert_eq!(s.hausdorff_final.max, Some(1.0));
    }

    #[test]
    fn summary_is_order_independent() {
        let preset = ScenarioPreset::new(ScenarioId::S1Center);
        let mk = |k: usize, fb: Vec<usize>| ReplicateOutcome {
            replicate: k,
            seed: k as u64,
            final_breaks: Some(fb.clone()),
            candidates: fb.clone(),
            screened_candidates: fb,
            stage1_converged: true,
            coverage_ok: true,
            error: None,
        };
        let a = vec![mk(0, vec![100, 200]), mk(1, vec![97, 203]), mk(2, vec![150])];
        let mut b = a.clone();
        b.reverse();
        let sa = summarize(&preset, 0.02, 18, a);
        let sb = summarize(&preset, 0.02, 18, b);
        assert_eq!(sa.per_break, sb.per_break);
        assert_eq!(sa.exact_count_rate, sb.exact_count_rate);
    }
}
