// SPDX-License-Identifier: MIT OR Apache-2.0

//! Second stage: screen the first-stage candidates with an information
//! criterion built from segment-wise lasso refits.
//!
//! For breaks `s_1 < ... < s_m` the targets `t = d+1..T` are split into
//! half-open ranges `[d+1, s_1), [s_1, s_2), ..., [s_m, T+1)`. Each range gets
//! its own lasso VAR fit with penalty `n * eta_n * |theta|_1` (global `n`), and
//!
//! ```text
//! L_n = sum(range SSE) + n * eta_n * sum(|theta|_1)
//! IC  = L_n + m * omega_n
//! ```

use crate::error::{Result, VarsegError};
use crate::linalg::{gram_lasso, l1, outer_acc};
use crate::model::{effective_n, TimeSeries, TuningSchedule};
use crate::stage1::CandidateSet;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 12;
pub const SEGMENT_TOL: f64 = 1e-7;
pub const SEGMENT_MAX_PASSES: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Backward,
    Exhaustive,
}

impl std::str::FromStr for Strategy {
    type Err = VarsegError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward" => Ok(Self::Backward),
            "exhaustive" => Ok(Self::Exhaustive),
            other => Err(VarsegError::invalid(format!("unknown strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Backward => "backward",
            Self::Exhaustive => "exhaustive",
        })
    }
}

/// Lasso refit on one range of targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentFit {
    /// One-based first target time.
    pub start: usize,
    /// One past the last target time.
    pub end: usize,
    /// `p x pd`.
    pub theta: DMatrix<f64>,
    pub sse: f64,
    pub l1_norm: f64,
}

impl SegmentFit {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Fits `y_t = Phi Y_{t-1} + e_t` for targets `t` in `[start, end)` by cyclic
/// coordinate descent on each response separately, penalty `n * eta`.
pub fn fit_segment(data: &TimeSeries, range: (usize, usize), d: usize, eta: f64) -> Result<SegmentFit> {
    fit_segment_with(data, range, d, eta, SEGMENT_TOL)
}

pub fn fit_segment_with(
    data: &TimeSeries,
    (start, end): (usize, usize),
    d: usize,
    eta: f64,
    tol: f64,
) -> Result<SegmentFit> {
    let len = data.len();
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(VarsegError::invalid(format!("eta must be nonnegative, got {eta}")));
    }
    if d == 0 || start < d + 1 || end > len + 1 || end <= start || end - start <= d {
        return Err(VarsegError::InfeasibleSubset(format!(
            "segment [{start}, {end}) is empty, too short, or outside [{}, {}] for d={d}",
            d + 1,
            len + 1
        )));
    }
    let p = data.dim();
    let k = p * d;
    let n = effective_n(len, d) as f64;

    let mut lag = vec![0.0; k];
    let mut gram = vec![0.0; k * k];
    let mut cross = vec![0.0; k * p];
    for t in start..end {
        fill_lag(data, t, d, &mut lag);
        outer_acc(&mut gram, 1.0, &lag, &lag);
        outer_acc(&mut cross, 1.0, &lag, data.row(t - 1));
    }

    let mut coef = vec![0.0; k * p];
    let threshold = n * eta / 2.0;
    gram_lasso(&gram, &cross, 0.0, threshold, &mut coef, k, p, tol, SEGMENT_MAX_PASSES)
        .map_err(|a| VarsegError::SingularBlock { block: a + 1 })?;

    let mut sse = 0.0;
    for t in start..end {
        fill_lag(data, t, d, &mut lag);
        for (c, y) in data.row(t - 1).iter().enumerate() {
            let fitted: f64 = lag.iter().enumerate().map(|(a, x)| x * coef[a * p + c]).sum();
            sse += (y - fitted) * (y - fitted);
        }
    }

    Ok(SegmentFit {
        start,
        end,
        theta: DMatrix::from_row_slice(k, p, &coef).transpose(),
        sse,
        l1_norm: l1(&coef),
    })
}

fn fill_lag(data: &TimeSeries, t: usize, d: usize, out: &mut [f64]) {
    let p = data.dim();
    for lag in 1..=d {
        out[(lag - 1) * p..lag * p].copy_from_slice(data.row(t - lag - 1));
    }
}

/// Range boundaries `[d+1, s_1, ..., s_m, T+1]` for a break vector.
pub fn segment_bounds(breaks: &[usize], d: usize, len: usize) -> Result<Vec<usize>> {
    let mut bounds = Vec::with_capacity(breaks.len() + 2);
    bounds.push(d + 1);
    bounds.extend_from_slice(breaks);
    bounds.push(len + 1);
    for w in bounds.windows(2) {
        if w[1] <= w[0] || w[1] - w[0] <= d {
            return Err(VarsegError::InfeasibleSubset(format!(
                "breaks {breaks:?} leave a segment [{}, {}) of length <= d={d}",
                w[0], w[1]
            )));
        }
    }
    Ok(bounds)
}

/// Evaluates `L_n` for break subsets, caching fits by range.
pub struct SegmentEvaluator<'a> {
    data: &'a TimeSeries,
    d: usize,
    eta: f64,
    n: f64,
    cache: HashMap<(usize, usize), SegmentFit>,
}

impl<'a> SegmentEvaluator<'a> {
    pub fn new(data: &'a TimeSeries, d: usize, eta: f64) -> Self {
        Self {
            data,
            d,
            eta,
            n: effective_n(data.len(), d) as f64,
            cache: HashMap::new(),
        }
    }

    fn fit(&mut self, range: (usize, usize)) -> Result<&SegmentFit> {
        if !self.cache.contains_key(&range) {
            let fit = fit_segment(self.data, range, self.d, self.eta)?;
            self.cache.insert(range, fit);
        }
        Ok(&self.cache[&range])
    }

    /// `(L_n, fits)` for one break vector.
    pub fn evaluate(&mut self, breaks: &[usize]) -> Result<(f64, Vec<SegmentFit>)> {
        let bounds = segment_bounds(breaks, self.d, self.data.len())?;
        let mut fits = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            fits.push(self.fit((w[0], w[1]))?.clone());
        }
        Ok((self.objective(&fits), fits))
    }

    pub fn objective(&self, fits: &[SegmentFit]) -> f64 {
        let sse: f64 = fits.iter().map(|f| f.sse).sum();
        let l1: f64 = fits.iter().map(|f| f.l1_norm).sum();
        sse + self.n * self.eta * l1
    }

    pub fn cached_segments(&self) -> usize {
        self.cache.len()
    }
}

/// `L_n` and per-segment fits for a sorted break vector.
pub fn evaluate_subset(
    data: &TimeSeries,
    breaks: &[usize],
    d: usize,
    schedule: &TuningSchedule,
) -> Result<(f64, Vec<SegmentFit>)> {
    SegmentEvaluator::new(data, d, schedule.eta_n).evaluate(breaks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub subset: Vec<usize>,
    pub ic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningResult {
    pub chosen_breaks: Vec<usize>,
    pub m_final: usize,
    pub l_n: f64,
    pub ic: f64,
    pub omega_n: f64,
    pub eta_n: f64,
    pub fits: Vec<SegmentFit>,
    pub search_trace: Vec<TraceEntry>,
    /// Strategy actually run (exhaustive falls back to backward above the cap).
    pub strategy: Strategy,
    /// Candidate times after cluster merging.
    pub screened_candidates: Vec<usize>,
    /// Backward elimination only: the starting set and each accepted removal.
    pub removal_path: Vec<TraceEntry>,
}

/// JSON form of a screening run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub breaks: Vec<usize>,
    pub ic: f64,
    #[serde(rename = "L_n")]
    pub l_n: f64,
    pub omega_n: f64,
    pub eta_n: f64,
    pub strategy: Strategy,
    pub trace: Vec<TraceEntry>,
}

impl From<&ScreeningResult> for ScreeningReport {
    fn from(r: &ScreeningResult) -> Self {
        Self {
            breaks: r.chosen_breaks.clone(),
            ic: r.ic,
            l_n: r.l_n,
            omega_n: r.omega_n,
            eta_n: r.eta_n,
            strategy: r.strategy,
            trace: r.search_trace.clone(),
        }
    }
}

/// Keeps candidates in order of decreasing increment, skipping any closer
/// than `d + 1` to one already kept, then drops any that would leave an edge segment
/// of `d` or fewer targets.
pub fn merge_candidates(times: &[usize], magnitudes: &[f64], d: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| {
        magnitudes[b]
            .partial_cmp(&magnitudes[a])
            .unwrap_or(Ordering::Equal)
            .then(times[a].cmp(&times[b]))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if kept.iter().all(|&k| times[i].abs_diff(k) >= d + 1) {
            kept.push(times[i]);
        }
    }
    kept.sort_unstable();
    kept.retain(|&b| b >= 2 * d + 2 && b + d <= len);
    kept
}

/// `true` when `(ic_a, a)` should be preferred over `(ic_b, b)`: lower IC,
/// then fewer breaks, then the lexicographically smaller vector.
fn prefer(ic_a: f64, a: &[usize], ic_b: f64, b: &[usize]) -> bool {
    match ic_a.partial_cmp(&ic_b) {
        Some(Ordering::Less) => true,
        Some(Ordering::Greater) => false,
        _ => (a.len(), a) < (b.len(), b),
    }
}

/// Picks the IC-minimizing subset of the candidate breaks.
pub fn select_breaks(
    data: &TimeSeries,
    candidates: &CandidateSet,
    d: usize,
    schedule: &TuningSchedule,
    strategy: Strategy,
    exhaustive_cap: usize,
) -> Result<ScreeningResult> {
    let merged = merge_candidates(&candidates.times, &candidates.magnitudes, d, data.len());
    select_from(data, &merged, d, schedule, strategy, exhaustive_cap)
}

/// Same as [`select_breaks`] on an already feasible candidate vector.
pub fn select_from(
    data: &TimeSeries,
    candidates: &[usize],
    d: usize,
    schedule: &TuningSchedule,
    strategy: Strategy,
    exhaustive_cap: usize,
) -> Result<ScreeningResult> {
    let mut eval = SegmentEvaluator::new(data, d, schedule.eta_n);
    let omega = schedule.omega_n;
    let mut trace = Vec::new();
    let score = |eval: &mut SegmentEvaluator, subset: &[usize], trace: &mut Vec<TraceEntry>| -> Result<f64> {
        let (l_n, _) = eval.evaluate(subset)?;
        let ic = l_n + subset.len() as f64 * omega;
        trace.push(TraceEntry {
            subset: subset.to_vec(),
            ic,
        });
        Ok(ic)
    };

    let used = if strategy == Strategy::Exhaustive && candidates.len() > exhaustive_cap {
        log::warn!(
            "{} candidates exceed the exhaustive cap {exhaustive_cap}; using backward elimination",
            candidates.len()
        );
        Strategy::Backward
    } else {
        strategy
    };

    let mut removal_path = Vec::new();
    let (best, best_ic) = match used {
        Strategy::Exhaustive => {
            let m = candidates.len();
            let mut best: Vec<usize> = Vec::new();
            let mut best_ic = f64::INFINITY;
            for mask in 0u64..(1u64 << m) {
                let subset: Vec<usize> = (0..m)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| candidates[b])
                    .collect();
                let ic = score(&mut eval, &subset, &mut trace)?;
                if prefer(ic, &subset, best_ic, &best) {
                    best = subset;
                    best_ic = ic;
                }
            }
            (best, best_ic)
        }
        Strategy::Backward => {
            let mut current = candidates.to_vec();
            let mut current_ic = score(&mut eval, &current, &mut trace)?;
            removal_path.push(TraceEntry {
                subset: current.clone(),
                ic: current_ic,
            });
            while !current.is_empty() {
                let mut round_best: Option<(f64, Vec<usize>)> = None;
                for drop in 0..current.len() {
                    let mut subset = current.clone();
                    subset.remove(drop);
                    let ic = score(&mut eval, &subset, &mut trace)?;
                    let better = round_best
                        .as_ref()
                        .is_none_or(|(bic, bset)| prefer(ic, &subset, *bic, bset));
                    if better {
                        round_best = Some((ic, subset));
                    }
                }
                match round_best {
                    Some((ic, subset)) if ic < current_ic => {
                        removal_path.push(TraceEntry {
                            subset: subset.clone(),
                            ic,
                        });
                        current = subset;
                        current_ic = ic;
                    }
                    _ => break,
                }
            }
            if !current.is_empty() {
                let empty_ic = score(&mut eval, &[], &mut trace)?;
                if prefer(empty_ic, &[], current_ic, &current) {
                    current.clear();
                    current_ic = empty_ic;
                }
            }
            (current, current_ic)
        }
    };

    let (l_n, fits) = eval.evaluate(&best)?;
    Ok(ScreeningResult {
        m_final: best.len(),
        chosen_breaks: best,
        l_n,
        ic: best_ic,
        omega_n: omega,
        eta_n: schedule.eta_n,
        fits,
        search_trace: trace,
        strategy: used,
        screened_candidates: candidates.to_vec(),
        removal_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_schedule, SegmentedVarModel};
    use crate::sim::{make_scenario, simulate, ScenarioId, ScenarioPreset, SimulationConfig};

    fn ar1_series(phi: f64, len: usize, seed: u64) -> TimeSeries {
        let model = SegmentedVarModel {
            p: 1,
            d: 1,
            len,
            breaks: vec![],
            segments: vec![DMatrix::from_element(1, 1, phi)],
            noise_cov: DMatrix::from_element(1, 1, 0.01),
        };
        simulate(&SimulationConfig::new(model, seed)).unwrap()
    }

    fn small_var(seed: u64) -> TimeSeries {
        let model = SegmentedVarModel {
            p: 3,
            d: 2,
            len: 120,
            breaks: vec![],
            segments: vec![DMatrix::from_row_slice(
                3,
                6,
                &[
                    0.4, 0.1, 0.0, 0.1, 0.0, 0.0, //
                    0.0, -0.3, 0.2, 0.0, 0.1, 0.0, //
                    0.1, 0.0, 0.5, 0.0, 0.0, -0.2,
                ],
            )],
            noise_cov: DMatrix::identity(3, 3),
        };
        simulate(&SimulationConfig::new(model, seed)).unwrap()
    }

    #[test]
    fn unpenalized_fit_solves_normal_equations() {
        let data = small_var(1);
        let d = 2;
        let fit = fit_segment_with(&data, (3, 121), d, 0.0, 1e-14).unwrap();
        // X'e for every lag coordinate and response.
        let p = 3;
        let mut xte = vec![0.0; 6 * 3];
        let mut scale = 0.0_f64;
        for t in 3..121 {
            let mut lag = vec![0.0; 6];
            fill_lag(&data, t, d, &mut lag);
            for c in 0..p {
                let fitted: f64 = (0..6).map(|a| fit.theta[(c, a)] * lag[a]).sum();
                let e = data.get(t - 1, c) - fitted;
                for a in 0..6 {
                    xte[a * p + c] += lag[a] * e;
                }
            }
            scale = scale.max(lag.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let worst = xte.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-8, "max |X'e| = {worst}");
    }

    #[test]
    fn default_tolerance_is_near_least_squares() {
        let data = small_var(2);
        let tight = fit_segment_with(&data, (3, 121), 2, 0.0, 1e-14).unwrap();
        let default = fit_segment(&data, (3, 121), 2, 0.0).unwrap();
        assert!((default.theta.clone() - tight.theta.clone()).amax() < 1e-5);
        assert!((default.sse - tight.sse).abs() <= 1e-8 * tight.sse);
    }

    #[test]
    fn huge_eta_gives_zero_fit() {
        let data = small_var(3);
        let fit = fit_segment(&data, (10, 60), 2, 1e6).unwrap();
        assert!(fit.theta.iter().all(|v| *v == 0.0));
        let energy: f64 = (10..60).flat_map(|t| data.row(t - 1).to_vec()).map(|v| v * v).sum();
        assert!((fit.sse - energy).abs() < 1e-12 * energy);
        assert_eq!(fit.l1_norm, 0.0);
    }

    #[test]
    fn univariate_fit_matches_closed_form() {
        let data = ar1_series(0.5, 4000, 17);
        let eta = 1e-4;
        let fit = fit_segment(&data, (2, 4001), 1, eta).unwrap();
        // Scalar lasso: S(sum x y, n eta / 2) / sum x^2.
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for t in 2..=4000 {
            let x = data.get(t - 2, 0);
            sxy += x * data.get(t - 1, 0);
            sxx += x * x;
        }
        let n = 4000.0;
        let oracle = crate::linalg::soft(sxy, n * eta / 2.0) / sxx;
        assert!((fit.theta[(0, 0)] - oracle).abs() < 1e-12);
        assert!((fit.theta[(0, 0)] - 0.5).abs() < 0.05);
    }

    #[test]
    fn short_segments_are_errors() {
        let data = small_var(4);
        assert!(fit_segment(&data, (3, 5), 2, 0.1).is_err());
        assert!(fit_segment(&data, (2, 50), 2, 0.1).is_err());
        assert!(fit_segment(&data, (100, 122), 2, 0.1).is_err());
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        assert!(matches!(
            evaluate_subset(&data, &[50, 51], 2, &schedule),
            Err(VarsegError::InfeasibleSubset(_))
        ));
    }

    #[test]
    fn subset_objective_is_additive() {
        let data = small_var(5);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let (whole, fits) = evaluate_subset(&data, &[], 2, &schedule).unwrap();
        assert_eq!(fits.len(), 1);
        let direct = fit_segment(&data, (3, 121), 2, schedule.eta_n).unwrap();
        let n = 119.0;
        assert_eq!(whole, direct.sse + n * schedule.eta_n * direct.l1_norm);

        let (split, _) = evaluate_subset(&data, &[60], 2, &schedule).unwrap();
        let left = fit_segment(&data, (3, 60), 2, schedule.eta_n).unwrap();
        let right = fit_segment(&data, (60, 121), 2, schedule.eta_n).unwrap();
        let parts = (left.sse + right.sse) + n * schedule.eta_n * (left.l1_norm + right.l1_norm);
        assert_eq!(split, parts);
    }

    #[test]
    fn cached_and_fresh_evaluations_agree_bitwise() {
        let data = small_var(6);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let mut eval = SegmentEvaluator::new(&data, 2, schedule.eta_n);
        for subset in [vec![40, 80], vec![40], vec![80], vec![40, 80]] {
            let (cached, _) = eval.evaluate(&subset).unwrap();
            let (fresh, _) = evaluate_subset(&data, &subset, 2, &schedule).unwrap();
            assert_eq!(cached.to_bits(), fresh.to_bits());
        }
        assert_eq!(eval.cached_segments(), 5);
    }

    #[test]
    fn merge_keeps_strongest_member_and_feasible_edges() {
        let times = [3, 50, 51, 52, 80, 82, 119];
        let mags = [1.0, 0.1, 0.9, 0.2, 0.3, 0.4, 1.0];
        // d = 1: clusters {50,51,52} -> 51; 80 and 82 are 2 apart -> kept.
        assert_eq!(merge_candidates(&times, &mags, 1, 120), vec![51, 80, 82, 119]);
        // d = 2: 80/82 merge to 82; edges need b >= 6 and b <= 118.
        assert_eq!(merge_candidates(&times, &mags, 2, 120), vec![51, 82]);
    }

    fn cands(times: Vec<usize>) -> CandidateSet {
        CandidateSet {
            indices: times.clone(),
            magnitudes: vec![1.0; times.len()],
            m_hat: times.len(),
            times,
            segment_coefficients: vec![],
            zero_tol: 0.0,
        }
    }

    #[test]
    fn empty_candidates_select_nothing() {
        let data = small_var(7);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let res = select_breaks(&data, &cands(vec![]), 2, &schedule, Strategy::Backward, 12).unwrap();
        assert_eq!(res.m_final, 0);
        let (l_n, _) = evaluate_subset(&data, &[], 2, &schedule).unwrap();
        assert_eq!(res.ic, l_n);
        assert_eq!(res.l_n, l_n);
    }

    #[test]
    fn overwhelming_break_penalty_selects_nothing() {
        let preset = ScenarioPreset::new(ScenarioId::S1Center);
        let data = simulate(&make_scenario(&preset, 1)).unwrap();
        let schedule = default_schedule(300.0, 20, 1, 1.0, 0.5).unwrap().with_omega(1e12);
        for strategy in [Strategy::Backward, Strategy::Exhaustive] {
            let res = select_breaks(&data, &cands(vec![60, 100, 150, 200]), 1, &schedule, strategy, 12).unwrap();
            assert_eq!(res.m_final, 0);
        }
    }

    #[test]
    fn ic_identity_holds_on_every_trace_entry() {
        let data = small_var(8);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let res = select_breaks(&data, &cands(vec![30, 60, 90]), 2, &schedule, Strategy::Exhaustive, 12).unwrap();
        assert_eq!(res.search_trace.len(), 8);
        for entry in &res.search_trace {
            let (l_n, _) = evaluate_subset(&data, &entry.subset, 2, &schedule).unwrap();
            assert_eq!(entry.ic, l_n + entry.subset.len() as f64 * schedule.omega_n);
        }
        assert_eq!(res.ic, res.l_n + res.m_final as f64 * schedule.omega_n);
        let min = res.search_trace.iter().map(|e| e.ic).fold(f64::INFINITY, f64::min);
        assert_eq!(res.ic, min);
    }

    #[test]
    fn backward_removals_strictly_decrease_ic() {
        let data = small_var(9);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let start = vec![20, 40, 60, 80, 100];
        let res = select_breaks(&data, &cands(start.clone()), 2, &schedule, Strategy::Backward, 12).unwrap();
        let accepted = &res.removal_path;
        assert_eq!(accepted[0].subset, start);
        for w in accepted.windows(2) {
            assert_eq!(w[1].subset.len() + 1, w[0].subset.len());
            assert!(w[1].ic < w[0].ic);
        }
        assert!(accepted.len() <= start.len() + 1);
        assert!(res.search_trace.iter().any(|e| e.subset.is_empty()) || res.chosen_breaks.is_empty());
    }

    #[test]
    fn zero_penalties_reduce_to_sse_minimization() {
        let data = small_var(10);
        let schedule = TuningSchedule {
            lambda_constant: 1.0,
            lambda_n: 1.0,
            eta_n: 0.0,
            omega_n: 0.0,
            gamma_n: 1.0,
            v_exponent: 0.5,
        };
        let subsets = [vec![], vec![40], vec![80], vec![40, 80]];
        let res = select_breaks(&data, &cands(vec![40, 80]), 2, &schedule, Strategy::Exhaustive, 12).unwrap();
        let best_sse = subsets
            .iter()
            .map(|s| evaluate_subset(&data, s, 2, &schedule).unwrap().1.iter().map(|f| f.sse).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let chosen_sse: f64 = res.fits.iter().map(|f| f.sse).sum();
        assert_eq!(chosen_sse, best_sse);
    }

    #[test]
    fn true_breaks_lower_the_objective() {
        let preset = ScenarioPreset::new(ScenarioId::S1Center);
        let data = simulate(&make_scenario(&preset, 2)).unwrap();
        let data = data.scaled(1.0 / data.rms());
        let schedule = default_schedule(300.0, 20, 1, 1.0, 0.5).unwrap();
        let (none, _) = evaluate_subset(&data, &[], 1, &schedule).unwrap();
        let (truth, _) = evaluate_subset(&data, &[100, 200], 1, &schedule).unwrap();
        assert!(truth < none, "L_n(truth) = {truth}, L_n(empty) = {none}");
    }

    #[test]
    fn exhaustive_over_cap_falls_back() {
        let data = small_var(11);
        let schedule = default_schedule(119.0, 3, 2, 1.0, 0.5).unwrap();
        let res = select_breaks(&data, &cands(vec![20, 40, 60, 80]), 2, &schedule, Strategy::Exhaustive, 3).unwrap();
        assert_eq!(res.strategy, Strategy::Backward);
    }
}
