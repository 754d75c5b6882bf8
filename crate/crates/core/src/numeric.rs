//! Small numerical kernels: bracketing, bisection and a dense 3x3 solve.

/// Bisects `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// `f(lo)` and `f(hi)` must differ in sign (or one of them must be zero);
/// returns `None` otherwise.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if (f_lo < 0.0) == (f_hi < 0.0) || !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    // 200 halvings exhausts f64 resolution on any finite interval.
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Evaluates `f` on `points` uniform grid nodes over `[lo, hi]` and returns
/// every adjacent pair whose values change sign.
pub fn sign_change_brackets<F>(f: F, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    assert!(points >= 2);
    let step = (hi - lo) / (points - 1) as f64;
    let mut brackets = Vec::new();
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    for k in 1..points {
        let x = if k == points - 1 {
            hi
        } else {
            lo + step * k as f64
        };
        let fx = f(x);
        if fx == 0.0 {
            brackets.push((x, x));
        } else if prev_f != 0.0 && (prev_f < 0.0) != (fx < 0.0) {
            brackets.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    brackets
}

/// Result of a 3x3 solve, with the infinity-norm condition number of the
/// matrix.
#[derive(Debug, Clone, Copy)]
pub struct Solve3 {
    pub x: [f64; 3],
    pub condition: f64,
}

/// Solves `a * x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot vanishes. The condition estimate comes from
/// the explicit inverse, which is cheap at this size.
pub fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<Solve3> {
    let inverse = invert3(a)?;
    let mut x = [0.0; 3];
    for (i, row) in inverse.iter().enumerate() {
        x[i] = row.iter().zip(b.iter()).map(|(m, v)| m * v).sum();
    }
    let condition = norm_inf(&a) * norm_inf(&inverse);
    Some(Solve3 { x, condition })
}

fn norm_inf(m: &[[f64; 3]; 3]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn invert3(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    // Augmented [A | I], reduced to [I | A^-1].
    let mut m = [[0.0; 6]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3 + i] = 1.0;
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..3 {
            if row != col {
                let factor = m[row][col];
                if factor != 0.0 {
                    let pivot_row = m[col];
                    for (v, pv) in m[row].iter_mut().zip(pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        inv[i].copy_from_slice(&m[i][3..]);
    }
    Some(inv)
}
