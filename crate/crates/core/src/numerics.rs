//! Shared numeric helpers: stable log-space accumulation, binomial tables,
//! bisection, and adaptive Simpson quadrature.

/// log(e^a + e^b) without overflow; tolerates `-inf` inputs.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ e^{x_i} over a slice; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Binomial coefficients C(n, 0..=n), exact in f64 for n ≤ 50.
pub fn binomials(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// ln C(n, 0..=n).
pub fn ln_binomials(n: usize) -> Vec<f64> {
    binomials(n).iter().map(|c| c.ln()).collect()
}

/// Logistic function 1/(1+e^{-x}), computed from the stable branch.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary entropy H2(x) = -x ln x - (1-x) ln(1-x), with 0 ln 0 = 0.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy)]
pub struct BisectionResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on [lo, hi] assuming f(lo) ≥ 0 ≥ f(hi) (or the reverse).
/// Stops when |f(mid)| ≤ tol or the bracket shrinks to float resolution.
pub fn bisect<F: Fn(f64) -> f64>(
    mut lo: f64,
    mut hi: f64,
    f: F,
    tol: f64,
    max_iter: usize,
) -> BisectionResult {
    let mut flo = f(lo);
    let sign = if flo >= 0.0 { 1.0 } else { -1.0 };
    let mut best = BisectionResult {
        root: lo,
        residual: flo.abs(),
        iterations: 0,
    };
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() < best.residual {
            best = BisectionResult {
                root: mid,
                residual: fmid.abs(),
                iterations: it,
            };
        }
        if fmid.abs() <= tol || (hi - lo).abs() <= f64::EPSILON * (1.0 + mid.abs()) {
            return BisectionResult {
                root: mid,
                residual: fmid.abs(),
                iterations: it,
            };
        }
        if sign * fmid >= 0.0 {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    let _ = flo;
    best
}

/// Adaptive Simpson quadrature with an absolute tolerance.
/// Returns `None` when the recursion depth cap is exhausted.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let lv = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let rv = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(lv + rv)
}

/// Log-space elementary symmetric sums: given log-weights w_1..w_n, returns
/// log e_m for m = 0..=n where e_m = Σ_{|S|=m} Π_{i∈S} e^{w_i}.
pub fn log_elementary_symmetric(log_weights: &[f64]) -> Vec<f64> {
    let mut poly = vec![0.0f64]; // log of the constant polynomial 1
    for &w in log_weights {
        let mut next = vec![f64::NEG_INFINITY; poly.len() + 1];
        for (m, &c) in poly.iter().enumerate() {
            next[m] = logaddexp(next[m], c);
            next[m + 1] = logaddexp(next[m + 1], c + w);
        }
        poly = next;
    }
    poly
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logaddexp_matches_direct() {
        let v = logaddexp(1.0, 2.0);
        assert!((v - (1.0f64.exp() + 2.0f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(logaddexp(f64::NEG_INFINITY, 3.0), 3.0);
        assert_eq!(
            logaddexp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log_sum_exp_large_magnitudes() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn binomial_rows() {
        assert_eq!(binomials(4), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(binomials(0), vec![1.0]);
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(2.0, 0.0, |x| 2.0 - x * x, 1e-14, 200);
        assert!((r.root - 2.0f64.sqrt()).abs() < 1e-9, "root {}", r.root);
    }

    #[test]
    fn simpson_integrates_polynomial() {
        // ∫_0^1 (3x² + 1) dx = 2; Simpson is exact on cubics.
        let v = adaptive_simpson(&|x| 3.0 * x * x + 1.0, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_symmetric_small_case() {
        // weights e^0=1, e^ln2=2: e_0=1, e_1=3, e_2=2.
        let e = log_elementary_symmetric(&[0.0, 2.0f64.ln()]);
        assert!((e[0].exp() - 1.0).abs() < 1e-12);
        assert!((e[1].exp() - 3.0).abs() < 1e-12);
        assert!((e[2].exp() - 2.0).abs() < 1e-12);
    }
}
