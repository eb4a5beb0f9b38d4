// SPDX-License-Identifier: MIT OR Apache-2.0

//! First stage: total-variation lasso over coefficient increments.
//!
//! The series is rewritten as one regression in which block `theta_i`
//! (`i = 1..n`) acts on every equation `l >= i`. `theta_1` is the base
//! coefficient matrix and a nonzero `theta_i`, `i >= 2`, marks a coefficient
//! change at equation `i`. Equation `l` predicts time point `t = l + d - 1`
//! from `Y_{l-1} = (y_{t-1}', ..., y_{t-d}')'`. The first equation has no
//! observed lags and is left empty.
//!
//! The objective `(1/n)|Y - Z Theta|^2 + lambda * sum_i |theta_i|_1` is
//! minimized by Gauss-Seidel block coordinate descent on suffix Gram
//! matrices `G_i = sum_{l>=i} Y_{l-1} Y_{l-1}'` and cross products
//! `c_i = sum_{l>=i} Y_{l-1} y_l'`, so no sweep touches raw data rows.

use crate::error::{Result, VarsegError};
use crate::linalg::{gemm_acc, gram_lasso, l1, max_abs, outer_acc, soft};
use crate::model::{effective_n, SegmentedVarModel, TimeSeries};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_SWEEPS: usize = 5000;
pub const DEFAULT_TOL: f64 = 1e-3;
/// KKT tolerance that must hold, on top of the step criterion, to stop.
pub const DEFAULT_KKT_TOL: f64 = 1e-3;
/// Proximal weight relative to the mean diagonal of `G_1`.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;
/// Allowed per-sweep objective increase, relative to `max(1, |f|)`.
pub const MONOTONE_SLACK: f64 = 1e-10;

const INNER_TOL: f64 = 1e-13;
const INNER_MAX_PASSES: usize = 10_000;
const MAX_EXTRAPOLATION_DOUBLINGS: usize = 20;

/// Lagged design statistics of the first-stage regression.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Problem {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// `n x pd`, row `l-1` holds `Y_{l-1}` (row 0 is zero).
    lagged: Vec<f64>,
    /// `n x p`, row `l-1` holds the target of equation `l` (row 0 is zero).
    targets: Vec<f64>,
    /// `n` blocks of `pd x pd`.
    suffix_gram: Vec<f64>,
    /// `n` blocks of `pd x p`.
    suffix_cross: Vec<f64>,
}

impl Stage1Problem {
    pub fn k(&self) -> usize {
        self.p * self.d
    }

    /// Lag vector `Y_{l-1}` of one-based equation `l`.
    pub fn lagged_row(&self, l: usize) -> &[f64] {
        let k = self.k();
        &self.lagged[(l - 1) * k..l * k]
    }

    pub fn target_row(&self, l: usize) -> &[f64] {
        &self.targets[(l - 1) * self.p..l * self.p]
    }

    /// `G_i` for one-based block `i`, row-major `pd x pd`.
    pub fn gram(&self, i: usize) -> &[f64] {
        let kk = self.k() * self.k();
        &self.suffix_gram[(i - 1) * kk..i * kk]
    }

    /// `c_i` for one-based block `i`, row-major `pd x p`.
    pub fn cross(&self, i: usize) -> &[f64] {
        let kp = self.k() * self.p;
        &self.suffix_cross[(i - 1) * kp..i * kp]
    }

    pub fn gram_matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k(), self.k(), self.gram(i))
    }

    /// Time point (one-based, original axis) predicted by equation `l`.
    pub fn time_of(&self, l: usize) -> usize {
        l + self.d - 1
    }

    /// Sum of squared targets.
    pub fn target_energy(&self) -> f64 {
        self.targets.iter().map(|v| v * v).sum()
    }
}

/// Builds the suffix statistics in one backward pass.
pub fn build_stage1(data: &TimeSeries, d: usize) -> Result<Stage1Problem> {
    let len = data.len();
    if d == 0 {
        return Err(VarsegError::invalid("lag order d must be positive"));
    }
    if len <= d {
        return Err(VarsegError::invalid(format!(
            "series length {len} must exceed lag order {d}"
        )));
    }
    let p = data.dim();
    let k = p * d;
    let n = effective_n(len, d);

    let mut lagged = vec![0.0; n * k];
    let mut targets = vec![0.0; n * p];
    for l in 2..=n {
        let t = l + d - 1; // one-based time of the target
        targets[(l - 1) * p..l * p].copy_from_slice(data.row(t - 1));
        for lag in 1..=d {
            let dst = (l - 1) * k + (lag - 1) * p;
            lagged[dst..dst + p].copy_from_slice(data.row(t - lag - 1));
        }
    }

    let kk = k * k;
    let kp = k * p;
    let mut suffix_gram = vec![0.0; n * kk];
    let mut suffix_cross = vec![0.0; n * kp];
    let mut gram_acc = vec![0.0; kk];
    let mut cross_acc = vec![0.0; kp];
    for l in (1..=n).rev() {
        let x = &lagged[(l - 1) * k..l * k];
        let y = &targets[(l - 1) * p..l * p];
        outer_acc(&mut gram_acc, 1.0, x, x);
        outer_acc(&mut cross_acc, 1.0, x, y);
        suffix_gram[(l - 1) * kk..l * kk].copy_from_slice(&gram_acc);
        suffix_cross[(l - 1) * kp..l * kp].copy_from_slice(&cross_acc);
    }

    Ok(Stage1Problem {
        n,
        p,
        d,
        lagged,
        targets,
        suffix_gram,
        suffix_cross,
    })
}

/// Element-wise soft-thresholding `sign(x) max(|x| - lambda, 0)`.
pub fn soft_threshold(x: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(VarsegError::invalid(format!(
            "threshold must be nonnegative, got {lambda}"
        )));
    }
    Ok(x.map(|v| soft(v, lambda)))
}

/// Solution of the first-stage problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaEstimate {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// `n` blocks stored transposed (`pd x p`, row-major).
    theta: Vec<f64>,
    pub lambda_used: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

impl ThetaEstimate {
    pub fn zeros(n: usize, p: usize, d: usize) -> Self {
        Self {
            n,
            p,
            d,
            theta: vec![0.0; n * p * p * d],
            lambda_used: 0.0,
            iterations: 0,
            converged: false,
            objective_trace: Vec::new(),
        }
    }

    fn kp(&self) -> usize {
        self.p * self.p * self.d
    }

    /// Transposed block `theta_i'` (`pd x p`, row-major).
    pub fn block_t(&self, i: usize) -> &[f64] {
        let kp = self.kp();
        &self.theta[(i - 1) * kp..i * kp]
    }

    pub fn block_t_mut(&mut self, i: usize) -> &mut [f64] {
        let kp = self.kp();
        &mut self.theta[(i - 1) * kp..i * kp]
    }

    /// Block `theta_i` as a `p x pd` matrix.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let k = self.p * self.d;
        DMatrix::from_row_slice(k, self.p, self.block_t(i)).transpose()
    }

    pub fn block_norm_inf(&self, i: usize) -> f64 {
        max_abs(self.block_t(i))
    }

    pub fn l1_norm(&self) -> f64 {
        l1(&self.theta)
    }

    /// Cumulative coefficient matrix `sum_{j<=i} theta_j` as `p x pd`.
    pub fn cumulative(&self, i: usize) -> DMatrix<f64> {
        let k = self.p * self.d;
        let mut acc = vec![0.0; self.kp()];
        for j in 1..=i {
            for (a, v) in acc.iter_mut().zip(self.block_t(j)) {
                *a += v;
            }
        }
        DMatrix::from_row_slice(k, self.p, &acc).transpose()
    }

    /// Final objective value, if any sweep ran.
    pub fn objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }

    /// Indices of sweeps whose objective rose by more than the allowed slack.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        self.objective_trace
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] > MONOTONE_SLACK * w[0].abs().max(1.0))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcdOptions {
    pub max_sweeps: usize,
    /// Stop when the largest coefficient change in a sweep falls below this.
    pub tol: f64,
    /// Proximal weight as a fraction of `trace(G_1) / pd`; zero disables it.
    pub ridge_scale: f64,
    /// When set, a small step only counts as convergence if [`kkt_check`]
    /// also passes at this tolerance.
    pub kkt_tol: Option<f64>,
    /// After each sweep, try moving further along the sweep's direction
    /// (doubling the step while the objective keeps falling).
    pub extrapolate: bool,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tol: DEFAULT_TOL,
            ridge_scale: DEFAULT_RIDGE_SCALE,
            kkt_tol: Some(DEFAULT_KKT_TOL),
            extrapolate: true,
        }
    }
}

/// `(1/n)|Y - Z Theta|^2 + lambda sum |theta_i|_1`, evaluated from raw rows.
pub fn objective(problem: &Stage1Problem, estimate: &ThetaEstimate, lambda: f64) -> f64 {
    residual_sum_squares(problem, estimate) / problem.n as f64 + lambda * estimate.l1_norm()
}

fn residual_sum_squares(problem: &Stage1Problem, estimate: &ThetaEstimate) -> f64 {
    let (k, p) = (problem.k(), problem.p);
    let mut phi_t = vec![0.0; k * p];
    let mut fitted = vec![0.0; p];
    let mut rss = 0.0;
    for l in 1..=problem.n {
        for (a, v) in phi_t.iter_mut().zip(estimate.block_t(l)) {
            *a += v;
        }
        fitted.iter_mut().for_each(|v| *v = 0.0);
        gemm_acc(&mut fitted, 1.0, problem.lagged_row(l), &phi_t, 1, k, p);
        rss += problem
            .target_row(l)
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum::<f64>();
    }
    rss
}

/// Block coordinate descent on the first-stage objective.
///
/// Blocks are visited in order `1..n`. Each visit minimizes the objective
/// over `theta_i` with every other block fixed: with
/// `r_i = c_i - G_i sum_{j<i} theta_j' - sum_{j>i} G_j theta_j'` the block
/// problem is the lasso `min (1/2) B'G_i B - B'r_i + (n lambda / 2)|B|_1`,
/// solved by an inner coordinate descent warm-started at the current block.
/// A small proximal term `(rho/2)|B - B_old|^2` keeps the tail blocks
/// (whose Grams are rank deficient) well posed without moving the fixed
/// point. When `G_i` is diagonal one inner pass gives the closed form
/// `G_i^{-1} S(r_i; n lambda / 2)`.
pub fn bcd_solve(
    problem: &Stage1Problem,
    lambda: f64,
    options: &BcdOptions,
    init: Option<&ThetaEstimate>,
) -> Result<ThetaEstimate> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(VarsegError::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(options.tol > 0.0) || !(options.ridge_scale >= 0.0) {
        return Err(VarsegError::invalid("tol must be positive and ridge_scale nonnegative"));
    }
    let (n, p, d) = (problem.n, problem.p, problem.d);
    let k = problem.k();
    let kp = k * p;

    let mut est = match init {
        Some(start) => {
            if (start.n, start.p, start.d) != (n, p, d) {
                return Err(VarsegError::dimension(format!(
                    "warm start is (n={}, p={}, d={}), problem is (n={n}, p={p}, d={d})",
                    start.n, start.p, start.d
                )));
            }
            let mut e = start.clone();
            e.objective_trace.clear();
            e
        }
        None => ThetaEstimate::zeros(n, p, d),
    };
    est.lambda_used = lambda;
    est.iterations = 0;
    est.converged = false;

    let g1 = problem.gram(1);
    let mean_diag = (0..k).map(|a| g1[a * k + a]).sum::<f64>() / k as f64;
    let rho = options.ridge_scale * mean_diag;
    let threshold = n as f64 * lambda / 2.0;

    let mut after = vec![0.0; kp]; // sum_{j>i} G_j theta_j'
    let mut prefix = vec![0.0; kp]; // sum_{j<i} theta_j'
    let mut rhs = vec![0.0; kp];
    let mut block = vec![0.0; kp];

    let mut sweep_start = Vec::new();
    let mut probe = ThetaEstimate::zeros(n, p, d);
    let mut prev_objective = objective(problem, &est, lambda);
    for sweep in 1..=options.max_sweeps {
        if options.extrapolate {
            sweep_start.clone_from(&est.theta);
        }
        after.iter_mut().for_each(|v| *v = 0.0);
        for j in 1..=n {
            let bj = est.block_t(j);
            if bj.iter().any(|v| *v != 0.0) {
                gemm_acc(&mut after, 1.0, problem.gram(j), bj, k, k, p);
            }
        }
        prefix.iter_mut().for_each(|v| *v = 0.0);
        let mut prefix_nonzero = false;
        let mut max_change: f64 = 0.0;

        for i in 1..=n {
            let gram = problem.gram(i);
            let old = est.block_t(i);
            let old_nonzero = old.iter().any(|v| *v != 0.0);
            if old_nonzero {
                gemm_acc(&mut after, -1.0, gram, old, k, k, p);
            }

            rhs.copy_from_slice(problem.cross(i));
            for (r, a) in rhs.iter_mut().zip(&after) {
                *r -= a;
            }
            if prefix_nonzero {
                gemm_acc(&mut rhs, -1.0, gram, &prefix, k, k, p);
            }

            if !old_nonzero && max_abs(&rhs) <= threshold {
                // Zero stays optimal for this block.
                continue;
            }

            block.copy_from_slice(old);
            for (r, b) in rhs.iter_mut().zip(old) {
                *r += rho * b;
            }
            gram_lasso(gram, &rhs, rho, threshold, &mut block, k, p, INNER_TOL, INNER_MAX_PASSES)
                .map_err(|_| VarsegError::SingularBlock { block: i })?;

            let change = block
                .iter()
                .zip(old)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            max_change = max_change.max(change);
            est.block_t_mut(i).copy_from_slice(&block);
            if block.iter().any(|v| *v != 0.0) {
                for (a, b) in prefix.iter_mut().zip(&block) {
                    *a += b;
                }
                prefix_nonzero = true;
            }
        }

        let mut obj = objective(problem, &est, lambda);
        if options.extrapolate && max_change > 0.0 {
            obj = extrapolate(problem, lambda, &mut est, &sweep_start, &mut probe, obj);
        }
        if est.objective_trace.is_empty() {
            est.objective_trace.push(prev_objective);
        }
        est.objective_trace.push(obj);
        prev_objective = obj;
        est.iterations = sweep;
        if max_change < options.tol
            && options
                .kkt_tol
                .is_none_or(|t| kkt_check(problem, &est, lambda, t).pass)
        {
            est.converged = true;
            break;
        }
    }
    log::debug!(
        "bcd: lambda={lambda:.4e} sweeps={} converged={} objective={prev_objective:.6e}",
        est.iterations,
        est.converged
    );
    Ok(est)
}

/// Moves `est` to `est + t (est - start)` for the best `t` in `1, 2, 4, ...`
/// that lowers the objective, if any. Returns the resulting objective.
fn extrapolate(
    problem: &Stage1Problem,
    lambda: f64,
    est: &mut ThetaEstimate,
    start: &[f64],
    probe: &mut ThetaEstimate,
    current: f64,
) -> f64 {
    let mut best = current;
    let mut best_t = 0.0;
    let mut t = 1.0;
    for _ in 0..MAX_EXTRAPOLATION_DOUBLINGS {
        for ((q, a), b) in probe.theta.iter_mut().zip(&est.theta).zip(start) {
            *q = a + t * (a - b);
        }
        let f = objective(problem, probe, lambda);
        if !(f < best) {
            break;
        }
        best = f;
        best_t = t;
        t *= 2.0;
    }
    if best_t > 0.0 {
        for (a, b) in est.theta.iter_mut().zip(start) {
            *a += best_t * (*a - b);
        }
        // Keep the stored value consistent with what the estimate evaluates to.
        best = objective(problem, est, lambda);
    }
    best
}

/// First-order optimality certificate for a first-stage estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `(block, residual)` for every block with a nonzero entry: the largest
    /// `|g - (n lambda / 2) sign(theta)|` over its nonzero entries, relative
    /// to the threshold `n lambda / 2`.
    pub active_residuals: Vec<(usize, f64)>,
    /// Largest `|g|` over zero entries (absolute).
    pub inactive_max: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Blocks that break either condition.
    pub violating_blocks: Vec<usize>,
}

/// Checks the stationarity conditions of the first-stage lasso.
///
/// For each block `j` the gradient-side quantity
/// `g_j = sum_{l>=j} Y_{l-1}(y_l' - Y_{l-1}' sum_{i<=l} theta_i')` is formed
/// from raw rows. Nonzero entries must satisfy `g = (n lambda/2) sign(theta)`
/// within `tol_kkt` (relative); zero entries need `|g| <= n lambda/2 (1 + tol_kkt)`.
pub fn kkt_check(problem: &Stage1Problem, estimate: &ThetaEstimate, lambda: f64, tol_kkt: f64) -> KktReport {
    let (n, p) = (problem.n, problem.p);
    let k = problem.k();
    let kp = k * p;
    let threshold = n as f64 * lambda / 2.0;

    // Residual of every equation.
    let mut residuals = vec![0.0; n * p];
    let mut phi_t = vec![0.0; kp];
    for l in 1..=n {
        for (a, v) in phi_t.iter_mut().zip(estimate.block_t(l)) {
            *a += v;
        }
        let res = &mut residuals[(l - 1) * p..l * p];
        res.copy_from_slice(problem.target_row(l));
        gemm_acc(res, -1.0, problem.lagged_row(l), &phi_t, 1, k, p);
    }

    let mut active_residuals = Vec::new();
    let mut inactive_max: f64 = 0.0;
    let mut violating_blocks = Vec::new();
    let mut grad = vec![0.0; kp];
    let mut per_block: Vec<(f64, f64)> = vec![(0.0, 0.0); n];
    for j in (1..=n).rev() {
        outer_acc(&mut grad, 1.0, problem.lagged_row(j), &residuals[(j - 1) * p..j * p]);
        let theta = estimate.block_t(j);
        let mut active: f64 = 0.0;
        let mut inactive: f64 = 0.0;
        for (g, th) in grad.iter().zip(theta) {
            if *th != 0.0 {
                let target = threshold * th.signum();
                active = active.max((g - target).abs() / threshold);
            } else {
                inactive = inactive.max(g.abs());
            }
        }
        per_block[j - 1] = (active, inactive);
    }
    for j in 1..=n {
        let (active, inactive) = per_block[j - 1];
        let has_active = estimate.block_t(j).iter().any(|v| *v != 0.0);
        if has_active {
            active_residuals.push((j, active));
        }
        inactive_max = inactive_max.max(inactive);
        if (has_active && active > tol_kkt) || inactive > threshold * (1.0 + tol_kkt) {
            violating_blocks.push(j);
        }
    }
    KktReport {
        active_residuals,
        inactive_max,
        threshold,
        pass: violating_blocks.is_empty(),
        violating_blocks,
    }
}

/// Candidate break set `A_n` and the piecewise coefficients it implies.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    /// Block indices `i >= 2` with a nonzero increment.
    pub indices: Vec<usize>,
    /// The same candidates on the original time axis (`t = i + d - 1`).
    pub times: Vec<usize>,
    /// `|theta_i|_inf` of each candidate.
    pub magnitudes: Vec<f64>,
    pub m_hat: usize,
    /// `m_hat + 1` matrices `p x pd`: `theta_1`, then cumulative sums
    /// through each candidate.
    pub segment_coefficients: Vec<DMatrix<f64>>,
    pub zero_tol: f64,
}

/// Default zero threshold `1e-6 * max(1, |theta_1|_inf)`.
pub fn default_zero_tol(estimate: &ThetaEstimate) -> f64 {
    1e-6 * estimate.block_norm_inf(1).max(1.0)
}

pub fn extract_candidates(estimate: &ThetaEstimate, zero_tol: Option<f64>, d: usize) -> CandidateSet {
    let zero_tol = zero_tol.unwrap_or_else(|| default_zero_tol(estimate));
    let mut indices = Vec::new();
    let mut magnitudes = Vec::new();
    for i in 2..=estimate.n {
        let norm = estimate.block_norm_inf(i);
        if norm > zero_tol {
            indices.push(i);
            magnitudes.push(norm);
        }
    }

    let k = estimate.p * estimate.d;
    let mut acc = vec![0.0; k * estimate.p];
    let to_matrix = |acc: &[f64]| DMatrix::from_row_slice(k, estimate.p, acc).transpose();
    let mut segment_coefficients = Vec::with_capacity(indices.len() + 1);
    let mut next = 1;
    for &stop in std::iter::once(&1).chain(indices.iter()) {
        while next <= stop {
            for (a, v) in acc.iter_mut().zip(estimate.block_t(next)) {
                *a += v;
            }
            next += 1;
        }
        segment_coefficients.push(to_matrix(&acc));
    }

    CandidateSet {
        times: indices.iter().map(|i| i + d - 1).collect(),
        m_hat: indices.len(),
        indices,
        magnitudes,
        segment_coefficients,
        zero_tol,
    }
}

/// `(1/n)|Z(Theta_hat - Theta)|^2` against a known model, the left side of
/// the first-stage prediction-error bound.
pub fn prediction_error(problem: &Stage1Problem, estimate: &ThetaEstimate, truth: &SegmentedVarModel) -> f64 {
    let (k, p) = (problem.k(), problem.p);
    let mut phi_t = vec![0.0; k * p];
    let mut total = 0.0;
    for l in 1..=problem.n {
        for (a, v) in phi_t.iter_mut().zip(estimate.block_t(l)) {
            *a += v;
        }
        let t = problem.time_of(l);
        let true_phi = &truth.segments[truth.segment_at(t)];
        let x = problem.lagged_row(l);
        for r in 0..p {
            let mut diff = 0.0;
            for (a, xa) in x.iter().enumerate() {
                diff += xa * (phi_t[a * p + r] - true_phi[(r, a)]);
            }
            total += diff * diff;
        }
    }
    total / problem.n as f64
}

/// JSON form of a first-stage run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub candidates: Vec<usize>,
    pub segments: Vec<Vec<Vec<f64>>>,
}

impl Stage1Report {
    pub fn new(estimate: &ThetaEstimate, candidates: &CandidateSet) -> Self {
        Self {
            lambda: estimate.lambda_used,
            converged: estimate.converged,
            iterations: estimate.iterations,
            candidates: candidates.times.clone(),
            segments: candidates
                .segment_coefficients
                .iter()
                .map(crate::model::matrix_to_rows)
                .collect(),
        }
    }
}
