// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference solver for the first-stage objective: accelerated proximal
//! gradient with adaptive restart on the explicit increment design, stopped
//! by a duality-gap certificate. Shares no code with the library.

#![allow(dead_code)]

/// Explicit form of the first-stage regression for a `T x p` series.
pub struct Design {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// `n` lag vectors of length `pd` (lag 1 first); the first is zero.
    pub x: Vec<Vec<f64>>,
    /// `n` targets of length `p`; the first is zero.
    pub y: Vec<Vec<f64>>,
}

impl Design {
    pub fn new(series: &[Vec<f64>], d: usize) -> Self {
        let len = series.len();
        let p = series[0].len();
        let n = len - d + 1;
        let mut x = vec![vec![0.0; p * d]; n];
        let mut y = vec![vec![0.0; p]; n];
        for l in 2..=n {
            let t = l + d - 1;
            y[l - 1] = series[t - 1].clone();
            for lag in 1..=d {
                x[l - 1][(lag - 1) * p..lag * p].copy_from_slice(&series[t - lag - 1]);
            }
        }
        Self { n, p, d, x, y }
    }

    fn k(&self) -> usize {
        self.p * self.d
    }

    /// Fitted values `(sum_{i<=l} B_i) x_l`, with `B_i` stored `p x pd`
    /// row-major at `b[i * p * pd ..]`.
    fn predict(&self, b: &[f64]) -> Vec<Vec<f64>> {
        let (k, p) = (self.k(), self.p);
        let mut phi = vec![0.0; p * k];
        let mut out = Vec::with_capacity(self.n);
        for l in 0..self.n {
            for (a, v) in phi.iter_mut().zip(&b[l * p * k..(l + 1) * p * k]) {
                *a += v;
            }
            out.push((0..p).map(|row| (0..k).map(|c| phi[row * k + c] * self.x[l][c]).sum()).collect());
        }
        out
    }

    pub fn residuals(&self, b: &[f64]) -> Vec<Vec<f64>> {
        self.predict(b)
            .into_iter()
            .zip(&self.y)
            .map(|(f, y)| y.iter().zip(f).map(|(a, b)| a - b).collect())
            .collect()
    }

    pub fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        let sse: f64 = self.residuals(b).iter().flatten().map(|v| v * v).sum();
        sse / self.n as f64 + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `Z' r` per block: `sum_{l >= i} r_l x_l'`, laid out like `b`.
    fn correlate(&self, r: &[Vec<f64>]) -> Vec<f64> {
        let (k, p) = (self.k(), self.p);
        let mut out = vec![0.0; self.n * p * k];
        let mut acc = vec![0.0; p * k];
        for l in (0..self.n).rev() {
            for row in 0..p {
                for c in 0..k {
                    acc[row * k + c] += r[l][row] * self.x[l][c];
                }
            }
            out[l * p * k..(l + 1) * p * k].copy_from_slice(&acc);
        }
        out
    }

    /// Largest eigenvalue of `Z'Z` by power iteration.
    fn spectral_bound(&self) -> f64 {
        let size = self.n * self.p * self.k();
        let mut v: Vec<f64> = (0..size).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut est = 0.0;
        for _ in 0..500 {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let zv = self.predict(&v);
            v = self.correlate(&zv);
            let next = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if (next - est).abs() <= 1e-12 * next {
                return next;
            }
            est = next;
        }
        est
    }

    /// Lower bound on the optimum from the dual point `s * r`, where `s`
    /// scales the residual into the dual feasible set.
    pub fn dual_bound(&self, b: &[f64], lambda: f64) -> f64 {
        let r = self.residuals(b);
        let g = self.correlate(&r);
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let limit = self.n as f64 * lambda / 2.0;
        let s = if gmax > limit { limit / gmax } else { 1.0 };
        let (mut yy, mut dist) = (0.0, 0.0);
        for (yl, rl) in self.y.iter().zip(&r) {
            for (a, b) in yl.iter().zip(rl) {
                yy += a * a;
                dist += (a - s * b) * (a - s * b);
            }
        }
        (yy - dist) / self.n as f64
    }
}

pub struct OracleSolution {
    /// `p x pd` blocks, row-major, concatenated over `i = 1..n`.
    pub blocks: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimizes the first-stage objective to a relative duality gap of
/// `rel_gap`. Rounds of accelerated proximal gradient alternate with a
/// polishing step that solves the stationarity equations exactly on the
/// current support and sign pattern.
pub fn solve(design: &Design, lambda: f64, rel_gap: f64, max_iter: usize) -> OracleSolution {
    let size = design.n * design.p * design.k();
    // Power iteration approaches the top eigenvalue from below.
    let mut step = design.n as f64 / (2.2 * design.spectral_bound().max(1e-300));
    let mut b = vec![0.0; size];
    let mut iterations = 0;
    let round = 2000;
    while iterations < max_iter {
        (b, step) = fista(design, lambda, step, b, round);
        iterations += round;
        if let Some(polished) = polish(design, lambda, &b) {
            if design.objective(&polished, lambda) <= design.objective(&b, lambda) {
                b = polished;
            }
        }
        let f = design.objective(&b, lambda);
        if f - design.dual_bound(&b, lambda) <= rel_gap * f.abs().max(1e-300) {
            break;
        }
    }
    let objective = design.objective(&b, lambda);
    let gap = objective - design.dual_bound(&b, lambda);
    OracleSolution {
        blocks: b,
        objective,
        gap,
        iterations,
    }
}

/// Runs `iters` accelerated steps; returns the iterate and the step size,
/// which is halved whenever a plain proximal step fails to descend.
fn fista(design: &Design, lambda: f64, mut step: f64, start: Vec<f64>, iters: usize) -> (Vec<f64>, f64) {
    let mut b = start;
    let mut z = b.clone();
    let mut t = 1.0_f64;
    let mut f_prev = design.objective(&b, lambda);
    for _ in 0..iters {
        let scale = step * 2.0 / design.n as f64;
        let g = design.correlate(&design.residuals(&z));
        let thr = lambda * step;
        let next: Vec<f64> = z
            .iter()
            .zip(&g)
            .map(|(zi, gi)| {
                let u = zi + scale * gi;
                u.signum() * (u.abs() - thr).max(0.0)
            })
            .collect();
        let f_next = design.objective(&next, lambda);
        // Rounding noise near the optimum is not an increase.
        if f_next > f_prev + 1e-14 * f_prev.abs() {
            if t == 1.0 {
                step /= 2.0;
            }
            t = 1.0;
            z = b.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&b).map(|(a, o)| a + (t - 1.0) / t_next * (a - o)).collect();
        b = next;
        t = t_next;
        f_prev = f_next;
    }
    (b, step)
}

/// Solves `Z_S' Z_S beta = Z_S' y - (n lambda / 2) sign` on the support of
/// `b`, output row by output row. `None` if the signs do not survive.
fn polish(design: &Design, lambda: f64, b: &[f64]) -> Option<Vec<f64>> {
    let (n, p, k) = (design.n, design.p, design.k());
    let half = n as f64 * lambda / 2.0;
    let mut out = vec![0.0; b.len()];
    for row in 0..p {
        // Variables (block i, column c) active in this output row.
        let support: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..k).map(move |c| (i, c)))
            .filter(|&(i, c)| b[i * p * k + row * k + c] != 0.0)
            .collect();
        let m = support.len();
        if m == 0 {
            continue;
        }
        let column = |(i, c): (usize, usize)| -> Vec<f64> {
            (0..n).map(|l| if l >= i { design.x[l][c] } else { 0.0 }).collect()
        };
        let cols: Vec<Vec<f64>> = support.iter().map(|&v| column(v)).collect();
        let mut a = vec![vec![0.0; m + 1]; m];
        for r in 0..m {
            for c in 0..m {
                a[r][c] = (0..n).map(|l| cols[r][l] * cols[c][l]).sum();
            }
            let (i, c) = support[r];
            let sign = b[i * p * k + row * k + c].signum();
            a[r][m] = (0..n).map(|l| cols[r][l] * design.y[l][row]).sum::<f64>() - half * sign;
        }
        let beta = gauss_solve(a)?;
        for (&(i, c), v) in support.iter().zip(beta) {
            let idx = i * p * k + row * k + c;
            if v.signum() != b[idx].signum() {
                return None;
            }
            out[idx] = v;
        }
    }
    Some(out)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a.iter().flat_map(|r| r[..m].iter()).fold(0.0_f64, |s, v| s.max(v.abs()));
    for col in 0..m {
        let pivot = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][m] - s) / a[r][r];
    }
    Some(x)
}
