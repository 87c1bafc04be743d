//! Small numerical helpers shared across modules.

const PAIRWISE_BLOCK: usize = 16;

/// Sums `term(i)` for `i in 0..len` with a fixed pairwise reduction tree.
///
/// The tree depends only on `len`, so the result is bit-reproducible for a
/// given input regardless of thread count or call site.
pub fn pairwise_sum<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += term(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, len, &term)
}

/// Pairwise sum of a slice.
pub fn pairwise_slice(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i])
}

/// Solves the dense `dim × dim` system `a x = b` in place by Gaussian
/// elimination with partial pivoting. `a` is row-major. Returns `None` for a
/// numerically singular matrix.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], dim: usize) -> Option<()> {
    debug_assert_eq!(a.len(), dim * dim);
    debug_assert_eq!(b.len(), dim);
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&i, &j| a[i * dim + col].abs().total_cmp(&a[j * dim + col].abs()))?;
        if a[pivot * dim + col].abs() <= 1e-300_f64.max(scale * 1e-15) {
            return None;
        }
        if pivot != col {
            for k in 0..dim {
                a.swap(pivot * dim + k, col * dim + k);
            }
            b.swap(pivot, col);
        }
        let diag = a[col * dim + col];
        for row in col + 1..dim {
            let factor = a[row * dim + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                a[row * dim + k] -= factor * a[col * dim + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..dim).rev() {
        let mut acc = b[row];
        for k in row + 1..dim {
            acc -= a[row * dim + k] * b[k];
        }
        b[row] = acc / a[row * dim + row];
    }
    Some(())
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = pairwise_slice(xs) / nf;
    let my = pairwise_slice(ys) / nf;
    let sxx = pairwise_sum(n, |i| (xs[i] - mx) * (xs[i] - mx));
    let sxy = pairwise_sum(n, |i| (xs[i] - mx) * (ys[i] - my));
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot = pairwise_sum(n, |i| (ys[i] - my) * (ys[i] - my));
    let ss_res = pairwise_sum(n, |i| {
        let r = ys[i] - (intercept + slope * xs[i]);
        r * r
    });
    let r_squared = if ss_tot <= f64::EPSILON * f64::EPSILON * (my * my).max(1.0) * nf {
        // Constant data: the horizontal line is exact.
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}
