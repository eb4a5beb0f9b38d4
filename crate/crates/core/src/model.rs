// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared domain types: the observed series, the piecewise VAR model, and
//! the tuning schedule that sets every penalty in the two-stage detector.

use crate::error::{Result, VarsegError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Spectral radius at or above this bound counts as nonstationary.
pub const STATIONARITY_BOUND: f64 = 1.0 - 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// Observed multivariate series: `len` time points by `p` variables.
///
/// Storage is row-major (one row per time point); columns are variables.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    len: usize,
    p: usize,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(len: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(VarsegError::invalid("series must have at least one variable"));
        }
        if values.len() != len * p {
            return Err(VarsegError::dimension(format!(
                "expected {len}x{p} = {} values, got {}",
                len * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(VarsegError::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            )));
        }
        Ok(Self { len, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(VarsegError::dimension(format!(
                "row {} has {} columns, expected {p}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn zeros(len: usize, p: usize) -> Self {
        Self {
            len,
            p,
            values: vec![0.0; len * p],
        }
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.p
    }

    /// Row at zero-based position `t0` (time point `t0 + 1`).
    pub fn row(&self, t0: usize) -> &[f64] {
        &self.values[t0 * self.p..(t0 + 1) * self.p]
    }

    pub(crate) fn row_mut(&mut self, t0: usize) -> &mut [f64] {
        &mut self.values[t0 * self.p..(t0 + 1) * self.p]
    }

    pub fn get(&self, t0: usize, var: usize) -> f64 {
        self.values[t0 * self.p + var]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    /// Root mean square over all entries.
    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let ss: f64 = self.values.iter().map(|v| v * v).sum();
        (ss / self.values.len() as f64).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            len: self.len,
            p: self.p,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Keeps rows 1, 1+k, 1+2k, ...
    pub fn downsample(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(VarsegError::invalid("downsample factor must be >= 1"));
        }
        let rows: Vec<f64> = (0..self.len)
            .step_by(k)
            .flat_map(|t| self.row(t).iter().copied())
            .collect();
        Self::new(rows.len() / self.p, self.p, rows)
    }

    /// First-order differences `y_t - y_{t-1}`; one row shorter.
    pub fn difference(&self) -> Result<Self> {
        if self.len < 2 {
            return Err(VarsegError::invalid("differencing needs at least two rows"));
        }
        let mut out = Vec::with_capacity((self.len - 1) * self.p);
        for t in 1..self.len {
            out.extend(
                self.row(t)
                    .iter()
                    .zip(self.row(t - 1))
                    .map(|(now, before)| now - before),
            );
        }
        Self::new(self.len - 1, self.p, out)
    }

    /// Subtracts each column's mean.
    pub fn centered(&self) -> Self {
        let mut means = vec![0.0; self.p];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let len = self.len.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= len);
        let values = self
            .rows()
            .flat_map(|row| row.iter().zip(&means).map(|(v, m)| v - m))
            .collect();
        Self {
            len: self.len,
            p: self.p,
            values,
        }
    }
}

/// Ground-truth or estimated piecewise-stationary VAR(d) model.
///
/// Segment `j` covers time points `breaks[j-1] <= t < breaks[j]` (one-based,
/// with an implicit `0` before the first break and `T + 1` after the last);
/// each segment block is `p x (p*d)` laid out as `[Phi_1 ... Phi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct SegmentedVarModel {
    pub p: usize,
    pub d: usize,
    pub len: usize,
    pub breaks: Vec<usize>,
    pub segments: Vec<DMatrix<f64>>,
    pub noise_cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    p: usize,
    d: usize,
    #[serde(rename = "T")]
    len: usize,
    breaks: Vec<usize>,
    segments: Vec<Vec<Vec<f64>>>,
    noise_cov: Vec<Vec<f64>>,
}

impl From<SegmentedVarModel> for ModelDoc {
    fn from(m: SegmentedVarModel) -> Self {
        Self {
            p: m.p,
            d: m.d,
            len: m.len,
            breaks: m.breaks,
            segments: m.segments.iter().map(matrix_to_rows).collect(),
            noise_cov: matrix_to_rows(&m.noise_cov),
        }
    }
}

impl TryFrom<ModelDoc> for SegmentedVarModel {
    type Error = VarsegError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let segments = doc
            .segments
            .iter()
            .map(|rows| matrix_from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p: doc.p,
            d: doc.d,
            len: doc.len,
            breaks: doc.breaks,
            segments,
            noise_cov: matrix_from_rows(&doc.noise_cov)?,
        })
    }
}

/// Row-major nested vectors, the layout used in every JSON artifact.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(VarsegError::dimension("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl SegmentedVarModel {
    /// Index of the segment active at one-based time `t`.
    pub fn segment_at(&self, t: usize) -> usize {
        self.breaks.partition_point(|&b| b <= t)
    }

    /// Lag-`lag` coefficient matrix (one-based lag) of segment `j`.
    pub fn lag_block(&self, j: usize, lag: usize) -> DMatrix<f64> {
        self.segments[j]
            .columns((lag - 1) * self.p, self.p)
            .into_owned()
    }

    /// Nonzero count per segment, the total-sparsity figure used for reporting.
    pub fn sparsity(&self) -> Vec<usize> {
        self.segments
            .iter()
            .map(|s| s.iter().filter(|v| **v != 0.0).count())
            .collect()
    }
}

/// Outcome of [`validate_model`]; `ok` holds exactly when `issues` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub message: String,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        Self {
            ok: issues.is_empty(),
            issues,
        }
    }

    pub fn has(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn into_result(self) -> Result<()> {
        if self.ok {
            return Ok(());
        }
        let joined = self
            .issues
            .iter()
            .map(|i| i.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        Err(VarsegError::Validation(joined))
    }
}

fn issue(code: &str, message: impl Into<String>) -> Issue {
    Issue {
        code: code.to_string(),
        message: message.into(),
    }
}

/// Checks every structural invariant of a model and reports all violations.
pub fn validate_model(model: &SegmentedVarModel) -> ValidationReport {
    let mut issues = Vec::new();
    let (p, d) = (model.p, model.d);

    if p == 0 || d == 0 || model.len == 0 {
        issues.push(issue("dims", "p, d and T must all be positive"));
        return ValidationReport::from_issues(issues);
    }

    if model.breaks.windows(2).any(|w| w[0] >= w[1]) {
        issues.push(issue("breaks_order", "breaks not increasing"));
    }
    for &b in &model.breaks {
        if b <= d || b > model.len {
            issues.push(issue(
                "break_range",
                format!("break {b} outside ({d}, {}]", model.len),
            ));
        }
    }
    if model.segments.len() != model.breaks.len() + 1 {
        issues.push(issue(
            "segment_count",
            format!(
                "{} segments for {} breaks",
                model.segments.len(),
                model.breaks.len()
            ),
        ));
    }

    for (j, seg) in model.segments.iter().enumerate() {
        if seg.nrows() != p || seg.ncols() != p * d {
            issues.push(issue(
                "segment_shape",
                format!(
                    "segment {} is {}x{}, expected {p}x{}",
                    j + 1,
                    seg.nrows(),
                    seg.ncols(),
                    p * d
                ),
            ));
            continue;
        }
        if seg.iter().any(|v| !v.is_finite()) {
            issues.push(issue("nonfinite", format!("segment {} has non-finite entries", j + 1)));
            continue;
        }
        // Shape is checked above, so the radius cannot fail here.
        if let Ok(radius) = companion_spectral_radius(seg, p, d) {
            if radius >= STATIONARITY_BOUND {
                issues.push(issue(
                    "nonstationary",
                    format!("segment {} nonstationary (spectral radius {radius:.6})", j + 1),
                ));
            }
        }
    }

    let cov = &model.noise_cov;
    if cov.nrows() != p || cov.ncols() != p {
        issues.push(issue(
            "noise_cov_shape",
            format!("noise_cov is {}x{}, expected {p}x{p}", cov.nrows(), cov.ncols()),
        ));
    } else if cov.iter().any(|v| !v.is_finite()) {
        issues.push(issue("nonfinite", "noise_cov has non-finite entries"));
    } else {
        let asym = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| (cov[(i, j)] - cov[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym > SYMMETRY_TOL {
            issues.push(issue(
                "noise_cov_asymmetric",
                format!("noise_cov asymmetric by {asym:e}"),
            ));
        } else if cov.clone().cholesky().is_none() {
            issues.push(issue("noise_cov_not_pd", "noise_cov is not positive definite"));
        }
    }

    ValidationReport::from_issues(issues)
}

/// Builds the `pd x pd` companion matrix of a `p x pd` coefficient block.
pub fn companion_matrix(segment: &DMatrix<f64>, p: usize, d: usize) -> Result<DMatrix<f64>> {
    if p == 0 || d == 0 || segment.nrows() != p || segment.ncols() != p * d {
        return Err(VarsegError::dimension(format!(
            "segment is {}x{}, expected {p}x{}",
            segment.nrows(),
            segment.ncols(),
            p * d
        )));
    }
    let k = p * d;
    let mut comp = DMatrix::zeros(k, k);
    comp.rows_mut(0, p).copy_from(segment);
    for i in p..k {
        comp[(i, i - p)] = 1.0;
    }
    Ok(comp)
}

/// Spectral radius of the companion form of a VAR(d) coefficient block.
pub fn companion_spectral_radius(segment: &DMatrix<f64>, p: usize, d: usize) -> Result<f64> {
    let comp = companion_matrix(segment, p, d)?;
    Ok(comp
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Penalty levels for both stages plus the localization rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSchedule {
    pub lambda_constant: f64,
    pub lambda_n: f64,
    pub eta_n: f64,
    pub omega_n: f64,
    pub gamma_n: f64,
    pub v_exponent: f64,
}

impl TuningSchedule {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda_constant", self.lambda_constant),
            ("lambda_n", self.lambda_n),
            ("eta_n", self.eta_n),
            ("omega_n", self.omega_n),
            ("gamma_n", self.gamma_n),
            ("v_exponent", self.v_exponent),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(VarsegError::invalid(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Multiplies the stage-2 coefficient penalty by `c` (`eta_n = c * gamma_n`).
    pub fn with_eta_constant(mut self, c: f64) -> Self {
        self.eta_n = c * self.gamma_n;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega_n = omega;
        self
    }

    /// Localization radius `ceil(n * gamma_n)` used by the coverage check.
    pub fn coverage_radius(&self, n: usize) -> usize {
        (n as f64 * self.gamma_n).ceil() as usize
    }
}

/// Rate-based default schedule for effective sample size `n`.
///
/// `lambda_n = 2C sqrt((ln n + 2 ln p + ln d) / n)`,
/// `gamma_n = eta_n = ln n * ln p / n`, `omega_n = (ln n * ln p)^(1+v)`.
/// The `ln p` factor in the last three is floored at `ln 2` so that `p = 1`
/// still yields positive penalties.
pub fn default_schedule(n: f64, p: usize, d: usize, c: f64, v: f64) -> Result<TuningSchedule> {
    if p == 0 || d == 0 {
        return Err(VarsegError::invalid("p and d must be positive"));
    }
    if !(n.is_finite() && n > 2.0_f64.max(d as f64)) {
        return Err(VarsegError::invalid(format!(
            "effective sample size {n} must exceed max(2, d)"
        )));
    }
    if !(c.is_finite() && c > 0.0) || !(v.is_finite() && v > 0.0) {
        return Err(VarsegError::invalid("C and v must be positive"));
    }
    let ln_n = n.ln();
    let ln_p = (p as f64).ln();
    let ln_d = (d as f64).ln();
    let lambda_n = 2.0 * c * ((ln_n + 2.0 * ln_p + ln_d) / n).sqrt();
    let rate = ln_n * ln_p.max(std::f64::consts::LN_2);
    let gamma_n = rate / n;
    Ok(TuningSchedule {
        lambda_constant: c,
        lambda_n,
        eta_n: gamma_n,
        omega_n: rate.powf(1.0 + v),
        gamma_n,
        v_exponent: v,
    })
}

/// Effective sample size `T - d + 1`.
pub fn effective_n(len: usize, d: usize) -> usize {
    (len + 1).saturating_sub(d)
}
