// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense kernels on row-major slices used in the solver inner loops.

/// `out += alpha * a * b` with `a` of shape `m x k` and `b` of shape `k x n`.
pub(crate) fn gemm_acc(out: &mut [f64], alpha: f64, a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (j, &aij) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aij == 0.0 {
                continue;
            }
            let s = alpha * aij;
            for (o, &bv) in out_row.iter_mut().zip(&b[j * n..(j + 1) * n]) {
                *o += s * bv;
            }
        }
    }
}

/// `out += alpha * x * y^T` (rank-one update, `x` of length m, `y` of length n).
pub(crate) fn outer_acc(out: &mut [f64], alpha: f64, x: &[f64], y: &[f64]) {
    let n = y.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let s = alpha * xi;
        for (o, &yj) in out[i * n..(i + 1) * n].iter_mut().zip(y) {
            *o += s * yj;
        }
    }
}

pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub(crate) fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn l1(xs: &[f64]) -> f64 {
    xs.iter().map(|v| v.abs()).sum()
}

/// Lasso on a Gram matrix, one response column at a time:
/// minimizes `0.5 b'(G + shift I)b - b'rhs + t |b|_1` by cyclic coordinate
/// descent, warm-started from `coef`. `gram` is `k x k`, `rhs` and `coef`
/// are `k x p` row-major. Returns the number of passes of the slowest column,
/// or the offending coordinate when a zero-curvature direction has signal.
pub(crate) fn gram_lasso(
    gram: &[f64],
    rhs: &[f64],
    shift: f64,
    t: f64,
    coef: &mut [f64],
    k: usize,
    p: usize,
    tol: f64,
    max_passes: usize,
) -> Result<usize, usize> {
    let mut fitted = vec![0.0; k];
    let mut worst = 0;
    for c in 0..p {
        fitted.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..k {
            let bj = coef[j * p + c];
            if bj != 0.0 {
                for a in 0..k {
                    fitted[a] += gram[a * k + j] * bj;
                }
            }
        }
        let mut passes = 0;
        loop {
            passes += 1;
            let mut max_delta: f64 = 0.0;
            let mut max_coef: f64 = 0.0;
            for a in 0..k {
                let gaa = gram[a * k + a];
                let old = coef[a * p + c];
                let z = rhs[a * p + c] - (fitted[a] - gaa * old);
                let curv = gaa + shift;
                let new = if curv > 0.0 {
                    soft(z, t) / curv
                } else if z.abs() <= t {
                    0.0
                } else {
                    return Err(a);
                };
                let delta = new - old;
                if delta != 0.0 {
                    coef[a * p + c] = new;
                    for (f, g) in fitted.iter_mut().zip(gram[a * k..(a + 1) * k].iter()) {
                        // Gram is symmetric, so row a doubles as column a.
                        *f += delta * g;
                    }
                    max_delta = max_delta.max(delta.abs());
                }
                max_coef = max_coef.max(new.abs());
            }
            if max_delta <= tol * (1.0 + max_coef) || passes >= max_passes {
                break;
            }
        }
        worst = worst.max(passes);
    }
    Ok(worst)
}
