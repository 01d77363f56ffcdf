//! Symmetric fixed-point analysis on the biregular infinite tree.
//!
//! A symmetric BP fixed point assigns one scalar t to every variable-to-factor
//! message. Such a point exists iff the consistency function
//!
//!   F(β,t) = -t + (d-1) [ log Σ_i C(k-1,i) e^{-β h_{i+1} + i t}
//!                        - log Σ_i C(k-1,i) e^{-β h_i + i t} ]
//!
//! vanishes. F(β,·) is odd, concave on t ≥ 0, and has a unique positive zero
//! 𝔤(β) exactly when ∂_t F(β,0) > 0, which happens above a critical β_c. This
//! module computes F, its slope at zero, β_c, 𝔤(β), the Bethe free energy
//! Φ(β,t) with its β-derivative along the fixed-point branch, the
//! interpolation integral recovering Φ from that derivative, the multivariate
//! message map, and the tilted local-energy functional.

use crate::numerics::{
    adaptive_simpson, binary_entropy, bisect, ln_binomials, log_elementary_symmetric, log_sum_exp,
    logistic,
};
use crate::potentials::{ModelParams, PotentialSequence};
use thiserror::Error;

/// Default search cap for the critical inverse temperature.
pub const DEFAULT_BETA_CAP: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum SymmetricError {
    /// The right bracket endpoint did not produce a sign change. Cannot
    /// happen for valid symmetric concave potentials (the message bound
    /// guarantees the zero lies below it); signals a broken invariant.
    #[error("failed to bracket the positive zero of the consistency function")]
    BracketFailure,
    /// `bethe_derivative` was called off the fixed-point set.
    #[error("t is not a fixed point: |F| = {residual:e} exceeds 1e-8")]
    NotAFixedPoint { residual: f64 },
    #[error("adaptive quadrature exhausted its depth budget")]
    QuadratureNonConvergence,
    #[error("arity {arity} exceeds the cap of {cap} for vector-message evaluation")]
    ArityTooLarge { arity: usize, cap: usize },
}

/// One solved point of the phase diagram.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint {
    pub beta: f64,
    /// 𝔤(β): the unique positive zero of F(β,·), or 0 at and below β_c.
    pub t_star: f64,
    /// Φ(β, 𝔤(β)).
    pub bethe: f64,
    /// ∂_β Φ along the fixed-point branch.
    pub dphi: f64,
    /// Initial bisection bracket (0,0 when t_star = 0).
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// |F(β, t_star)|.
    pub residual: f64,
}

/// Critical inverse temperature search result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaCritical {
    Finite(f64),
    /// ∂_t F(β,0) stayed ≤ 0 up to the cap; β_c may be +∞.
    AboveSearchCap,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalPoint {
    pub beta_c: BetaCritical,
    /// ∂_t F(·,0) at the located root, or at the cap when above it.
    pub slope_at_zero: f64,
}

/// F(β,t): the symmetric fixed-point consistency function.
pub fn fixed_point_residual(params: &ModelParams, t: f64) -> f64 {
    let k = params.arity();
    let h = params.potentials.values();
    let beta = params.beta;
    let lb = ln_binomials(k - 1);
    let s1: Vec<f64> = (0..k)
        .map(|i| lb[i] - beta * h[i + 1] + i as f64 * t)
        .collect();
    let s0: Vec<f64> = (0..k)
        .map(|i| lb[i] - beta * h[i] + i as f64 * t)
        .collect();
    -t + (params.d as f64 - 1.0) * (log_sum_exp(&s1) - log_sum_exp(&s0))
}

/// ∂_t F(β,0) in closed form:
/// -1 + (2(d-1)/k) Σ C(k,i) f(i) e^{-β h_i} / Σ C(k,i) e^{-β h_i}
/// with f(i) = 2(i - k/2)² - k/2.
pub fn residual_slope_at_zero(params: &ModelParams) -> f64 {
    let k = params.arity();
    let h = params.potentials.values();
    let beta = params.beta;
    let kf = k as f64;
    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let binom = crate::numerics::binomials(k);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &c) in binom.iter().enumerate() {
        let w = c * (-beta * (h[i] - h_min)).exp();
        let f = 2.0 * (i as f64 - kf / 2.0).powi(2) - kf / 2.0;
        num += w * f;
        den += w;
    }
    -1.0 + 2.0 * (params.d as f64 - 1.0) / kf * num / den
}

/// β_c = inf { β : ∂_t F(β,0) > 0 }, located by bisection on the monotone
/// slope map; `AboveSearchCap` when the slope is still ≤ 0 at `beta_cap`.
pub fn critical_beta(d: usize, potentials: &PotentialSequence, beta_cap: f64) -> CriticalPoint {
    assert!(beta_cap > 0.0);
    let slope = |beta: f64| {
        let p = ModelParams::new(d, potentials.clone(), beta).expect("valid params");
        residual_slope_at_zero(&p)
    };
    let at_cap = slope(beta_cap);
    if at_cap <= 0.0 {
        return CriticalPoint {
            beta_c: BetaCritical::AboveSearchCap,
            slope_at_zero: at_cap,
        };
    }
    // slope(0) = -1 < 0 <= slope(cap): bracket is valid with f(lo) < 0.
    let r = bisect(beta_cap, 0.0, slope, 1e-13, 200);
    CriticalPoint {
        beta_c: BetaCritical::Finite(r.root),
        slope_at_zero: slope(r.root),
    }
}

/// Solves for 𝔤(β) and evaluates the Bethe branch there.
///
/// Below (or at) β_c the only symmetric fixed point is t = 0 and 𝔤 extends
/// by zero. Above it, the zero is bracketed between a small positive seed
/// (where concavity forces F > 0) and the message bound + 1 (where F < 0),
/// then bisected to |F| ≤ tol.
pub fn phase_point(params: &ModelParams, tol: f64) -> Result<PhasePoint, SymmetricError> {
    assert!(tol > 0.0);
    let zero_point = |residual: f64| -> Result<PhasePoint, SymmetricError> {
        Ok(PhasePoint {
            beta: params.beta,
            t_star: 0.0,
            bethe: bethe_value(params, 0.0),
            dphi: bethe_derivative(params, 0.0)?,
            bracket: (0.0, 0.0),
            iterations: 0,
            residual,
        })
    };
    if residual_slope_at_zero(params) <= 0.0 {
        return zero_point(fixed_point_residual(params, 0.0).abs());
    }

    let f = |t: f64| fixed_point_residual(params, t);
    let cap = params.message_bound() + 1.0;
    let mut t_lo = 1e-8_f64;
    while f(t_lo) <= 0.0 {
        t_lo /= 16.0;
        if t_lo < 1e-60 {
            // The positive zero sits below float resolution; report 0.
            return zero_point(fixed_point_residual(params, 0.0).abs());
        }
    }
    let mut t_hi = (2.0 * t_lo).min(cap);
    while f(t_hi) > 0.0 {
        if t_hi >= cap {
            return Err(SymmetricError::BracketFailure);
        }
        t_lo = t_hi;
        t_hi = (2.0 * t_hi).min(cap);
    }
    let bracket = (t_lo, t_hi);
    let r = bisect(t_lo, t_hi, f, tol, 200);

    // Lemma-level sanity: F crosses downward through its positive zero. At
    // β barely above β_c the slope there is ~0 and float noise can flip the
    // difference, hence the tolerance.
    let eps = 1e-6 * (1.0 + r.root);
    debug_assert!(f(r.root + eps) - f(r.root - eps) < 1e-9);

    Ok(PhasePoint {
        beta: params.beta,
        t_star: r.root,
        bethe: bethe_value(params, r.root),
        dphi: bethe_derivative(params, r.root)?,
        bracket,
        iterations: r.iterations,
        residual: r.residual,
    })
}

/// t_v = σ(d t / (d-1)): the variable marginal P(x=1) induced by a symmetric
/// fixed point t.
pub fn variable_marginal(d: usize, t: f64) -> f64 {
    logistic(d as f64 / (d as f64 - 1.0) * t)
}

/// Φ(β,t) = -d t t_v + (d/k) log Σ C(k,i) e^{-β h_i + i t} - (d-1) H2(t_v).
pub fn bethe_value(params: &ModelParams, t: f64) -> f64 {
    let k = params.arity();
    let d = params.d as f64;
    let h = params.potentials.values();
    let lb = ln_binomials(k);
    let terms: Vec<f64> = (0..=k)
        .map(|i| lb[i] - params.beta * h[i] + i as f64 * t)
        .collect();
    let tv = variable_marginal(params.d, t);
    -d * t * tv + d / k as f64 * log_sum_exp(&terms) - (d - 1.0) * binary_entropy(tv)
}

/// ∂_β Φ(β, t(β)) along a fixed-point branch:
/// (d/k) Σ C(k,i)(-h_i) e^{-β h_i + i t} / Σ C(k,i) e^{-β h_i + i t}.
/// The envelope identity needs F(β,t) = 0; enforced with |F| ≤ 1e-8.
pub fn bethe_derivative(params: &ModelParams, t: f64) -> Result<f64, SymmetricError> {
    let residual = fixed_point_residual(params, t).abs();
    if residual > 1e-8 {
        return Err(SymmetricError::NotAFixedPoint { residual });
    }
    let k = params.arity();
    let h = params.potentials.values();
    let lb = ln_binomials(k);
    let logs: Vec<f64> = (0..=k)
        .map(|i| lb[i] - params.beta * h[i] + i as f64 * t)
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &l) in logs.iter().enumerate() {
        let w = (l - m).exp();
        num += w * -h[i];
        den += w;
    }
    Ok(params.d as f64 / k as f64 * num / den)
}

/// ∫_0^{β₁} ∂_β Φ(β, 𝔤(β)) dβ by adaptive Simpson, with the interval split
/// at β_c where 𝔤 kinks. β₁ is `params.beta`. Contract: the result equals
/// Φ(β₁, 𝔤(β₁)) - ln 2 up to quadrature tolerance.
pub fn interpolate_free_energy(params: &ModelParams, quad_tol: f64) -> Result<f64, SymmetricError> {
    let beta_1 = params.beta;
    if beta_1 == 0.0 {
        return Ok(0.0);
    }
    let integrand = |beta: f64| -> Result<f64, SymmetricError> {
        let p = params.with_beta(beta).expect("beta >= 0 on [0, beta_1]");
        let point = phase_point(&p, 1e-12)?;
        bethe_derivative(&p, point.t_star)
    };
    // Errors inside the integrand are rare (BracketFailure-class); surface
    // them through a cell rather than threading Result through Simpson.
    let failed = std::cell::Cell::new(false);
    let f = |beta: f64| match integrand(beta) {
        Ok(v) => v,
        Err(_) => {
            failed.set(true);
            f64::NAN
        }
    };
    let split = match critical_beta(params.d, &params.potentials, beta_1).beta_c {
        BetaCritical::Finite(bc) if bc < beta_1 => Some(bc),
        _ => None,
    };
    let total = match split {
        Some(bc) => {
            let a = adaptive_simpson(&f, 0.0, bc, quad_tol)
                .ok_or(SymmetricError::QuadratureNonConvergence)?;
            let b = adaptive_simpson(&f, bc, beta_1, quad_tol)
                .ok_or(SymmetricError::QuadratureNonConvergence)?;
            a + b
        }
        None => adaptive_simpson(&f, 0.0, beta_1, quad_tol)
            .ok_or(SymmetricError::QuadratureNonConvergence)?,
    };
    if failed.get() || total.is_nan() {
        return Err(SymmetricError::QuadratureNonConvergence);
    }
    Ok(total)
}

/// The message map m(t_1..t_{k-1}): the log-likelihood ratio a factor sends
/// onward given incoming variable messages t_i. With all t_i = t it satisfies
/// (d-1) m = t + F(β,t).
pub fn message_map(params: &ModelParams, incoming: &[f64]) -> f64 {
    let k = params.arity();
    assert_eq!(incoming.len(), k - 1, "message map takes k-1 incoming messages");
    let h = params.potentials.values();
    let log_e = log_elementary_symmetric(incoming);
    let s1: Vec<f64> = (0..k)
        .map(|m| log_e[m] - params.beta * h[m + 1])
        .collect();
    let s0: Vec<f64> = (0..k).map(|m| log_e[m] - params.beta * h[m]).collect();
    log_sum_exp(&s1) - log_sum_exp(&s0)
}

const ARITY_CAP: usize = 20;

/// a_β(t) for t ∈ ℝ^k: the expected value of -h(occupancy) at a factor whose
/// k incident messages tilt the Gibbs weight, E[-H] under
/// w(v) ∝ e^{-βH(v) + (v,t)}. Maximized over [-𝔤,𝔤]^k at t = (𝔤,...,𝔤).
pub fn local_energy(params: &ModelParams, messages: &[f64]) -> Result<f64, SymmetricError> {
    let k = params.arity();
    assert_eq!(messages.len(), k, "local energy takes k messages");
    if k > ARITY_CAP {
        return Err(SymmetricError::ArityTooLarge {
            arity: k,
            cap: ARITY_CAP,
        });
    }
    let h = params.potentials.values();
    let log_e = log_elementary_symmetric(messages);
    let logs: Vec<f64> = (0..=k)
        .map(|m| log_e[m] - params.beta * h[m])
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, &l) in logs.iter().enumerate() {
        let w = (l - top).exp();
        num += w * -h[m];
        den += w;
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(d: usize, h: &[f64], beta: f64) -> ModelParams {
        ModelParams::new(d, PotentialSequence::validate(h.to_vec()).unwrap(), beta).unwrap()
    }

    fn model33(beta: f64) -> ModelParams {
        params(3, &[0.0, 1.0, 1.0, 0.0], beta)
    }

    #[test]
    fn residual_vanishes_at_zero() {
        for beta in [0.0, 0.5, 1.0, 2.7, 10.0, 50.0] {
            assert!(fixed_point_residual(&model33(beta), 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_at_beta_zero_is_minus_t() {
        for t in [-3.0, -0.1, 0.0, 0.4, 2.0, 9.0] {
            let f = fixed_point_residual(&model33(0.0), t);
            assert!((f + t).abs() < 1e-12, "F(0,{t}) = {f}");
        }
    }

    #[test]
    fn residual_is_odd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let beta: f64 = rng.random_range(0.0..6.0);
            let t: f64 = rng.random_range(-8.0..8.0);
            let p = model33(beta);
            let a = fixed_point_residual(&p, t);
            let b = fixed_point_residual(&p, -t);
            assert!((a + b).abs() < 1e-12, "beta {beta} t {t}: {a} vs {b}");
        }
    }

    #[test]
    fn slope_closed_form_33() {
        // -1 + 8(1-x)/(2+6x) with x = e^{-β}.
        for beta in [0.0, 0.3, 0.8473, 2.0, 5.0] {
            let x = (-beta as f64).exp();
            let want = -1.0 + 8.0 * (1.0 - x) / (2.0 + 6.0 * x);
            let got = residual_slope_at_zero(&model33(beta));
            assert!((got - want).abs() < 1e-12, "beta {beta}: {got} vs {want}");
        }
        // β = 0 gives -1 for any model.
        assert!((residual_slope_at_zero(&params(2, &[0.0, 1.0, 0.0], 0.0)) + 1.0).abs() < 1e-12);
        assert!(
            (residual_slope_at_zero(&params(4, &[0.0, 1.0, 1.5, 1.0, 0.0], 0.0)) + 1.0).abs()
                < 1e-12
        );
        // Large β limit: (d-1)(k-1) - 1 = 3.
        assert!((residual_slope_at_zero(&model33(40.0)) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn slope_matches_finite_difference() {
        for (p, label) in [
            (model33(1.7), "33"),
            (params(3, &[0.0, 1.0, 0.0], 2.0), "32"),
            (params(2, &[-1.0, 0.5, 0.5, -1.0], 0.9), "23"),
        ] {
            let eps = 1e-5;
            let fd = (fixed_point_residual(&p, eps) - fixed_point_residual(&p, -eps)) / (2.0 * eps);
            let got = residual_slope_at_zero(&p);
            assert!((got - fd).abs() < 1e-6, "{label}: {got} vs {fd}");
        }
    }

    #[test]
    fn critical_beta_33_closed_form() {
        let p = model33(0.0);
        let cp = critical_beta(3, &p.potentials, 100.0);
        match cp.beta_c {
            BetaCritical::Finite(bc) => {
                assert!((bc - (7.0f64 / 3.0).ln()).abs() < 1e-10, "beta_c {bc}");
                assert!(cp.slope_at_zero.abs() < 1e-12);
            }
            _ => panic!("expected finite beta_c"),
        }
    }

    #[test]
    fn critical_beta_above_cap_cases() {
        // (2,2) strictly concave: slope limit is 0 from below, no finite root.
        let h = PotentialSequence::validate(vec![0.0, 1.0, 0.0]).unwrap();
        for cap in [1.0, 10.0, 100.0, 1000.0] {
            let cp = critical_beta(2, &h, cap);
            assert_eq!(cp.beta_c, BetaCritical::AboveSearchCap);
            assert!(cp.slope_at_zero <= 0.0);
        }
        // h ≡ 0: slope ≡ -1.
        let h0 = PotentialSequence::validate(vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let cp = critical_beta(3, &h0, 100.0);
        assert_eq!(cp.beta_c, BetaCritical::AboveSearchCap);
        assert!((cp.slope_at_zero + 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_point_below_critical() {
        for beta in [0.0, 0.3, 0.84] {
            let pp = phase_point(&model33(beta), 1e-12).unwrap();
            assert_eq!(pp.t_star, 0.0);
        }
    }

    #[test]
    fn phase_point_above_critical_vs_scan_oracle() {
        let p = model33(2.0);
        let pp = phase_point(&p, 1e-12).unwrap();
        assert!(pp.residual <= 1e-12);
        // Grid-scan + interval halving oracle, written against the raw sums.
        let f = |t: f64| {
            let b = 2.0f64;
            let num = (-b).exp() + 2.0 * ((-b) + t).exp() + (2.0 * t).exp();
            let den = 1.0 + 2.0 * ((-b) + t).exp() + ((-b) + 2.0 * t).exp();
            -t + 2.0 * (num / den).ln()
        };
        let mut lo = 1e-3;
        let mut hi = 12.0;
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!(
            (pp.t_star - oracle).abs() < 1e-9,
            "t* {} vs oracle {oracle}",
            pp.t_star
        );
        assert!((pp.t_star - 3.9288).abs() < 2e-3);
    }

    #[test]
    fn g_is_monotone_and_vanishes_at_critical() {
        let bc = (7.0f64 / 3.0).ln();
        let mut prev = 0.0;
        for j in (1..=6).rev() {
            let beta = bc + 10.0f64.powi(-j);
            let t = phase_point(&model33(beta), 1e-12).unwrap().t_star;
            assert!(t > prev, "g not increasing at j={j}: {t} <= {prev}");
            prev = t;
        }
        let near = phase_point(&model33(bc + 1e-6), 1e-12).unwrap().t_star;
        assert!(near < 1e-2 && near > 0.0, "g(beta_c + 1e-6) = {near}");
    }

    #[test]
    fn residual_concave_on_positive_axis() {
        for beta in [0.2, 0.8, 1.5, 3.0, 6.0] {
            let p = model33(beta);
            let t_max = p.message_bound() + 1.0;
            let n = 200;
            let vals: Vec<f64> = (0..n)
                .map(|i| fixed_point_residual(&p, t_max * i as f64 / (n - 1) as f64))
                .collect();
            for w in vals.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-8);
            }
        }
    }

    #[test]
    fn monotone_in_beta() {
        // ∂_t F(β,0) nondecreasing in β, and F(β,t) nondecreasing for fixed t > 0.
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.15).collect();
        let mut prev = f64::NEG_INFINITY;
        for &b in &grid {
            let s = residual_slope_at_zero(&model33(b));
            assert!(s >= prev - 1e-12);
            prev = s;
        }
        for t in [0.3, 1.0, 2.5] {
            let mut prev = f64::NEG_INFINITY;
            for &b in &grid {
                let f = fixed_point_residual(&model33(b), t);
                assert!(f >= prev - 1e-12, "t {t} beta {b}");
                prev = f;
            }
        }
    }

    #[test]
    fn unique_positive_zero_structure() {
        let p = model33(2.0);
        let t_star = phase_point(&p, 1e-12).unwrap().t_star;
        for i in 1..50 {
            let t = t_star * i as f64 / 50.0;
            assert!(fixed_point_residual(&p, t) >= -1e-12);
        }
        for i in 1..=50 {
            let t = t_star + i as f64 * 0.2;
            assert!(fixed_point_residual(&p, t) <= 1e-12);
        }
    }

    #[test]
    fn variable_marginal_values() {
        assert_eq!(variable_marginal(3, 0.0), 0.5);
        assert!(variable_marginal(3, 50.0) > 1.0 - 1e-12);
        let want = 1.0 / (1.0 + (-1.5f64 * 3.928).exp());
        assert!((variable_marginal(3, 3.928) - want).abs() < 1e-15);
        assert!((want - 0.99724).abs() < 1e-5);
        // Monotone.
        let mut prev = 0.0;
        for i in 0..20 {
            let v = variable_marginal(4, i as f64 * 0.5);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn bethe_value_anchors() {
        assert!((bethe_value(&model33(0.0), 0.0) - 2.0f64.ln()).abs() < 1e-14);
        assert!((bethe_value(&params(5, &[0.0, 2.0, 0.0], 0.0), 0.0) - 2.0f64.ln()).abs() < 1e-14);
        // d = k = 2, h = (0,1,0), t = 0: ln(1 + e^{-β}).
        for beta in [0.0, 0.7, 2.0, 9.0] {
            let v = bethe_value(&params(2, &[0.0, 1.0, 0.0], beta), 0.0);
            assert!((v - (1.0 + (-beta as f64).exp()).ln()).abs() < 1e-13);
        }
        // General t = 0 identity.
        let p = model33(1.3);
        let lse: f64 = (0..=3)
            .map(|i| {
                crate::numerics::binomials(3)[i] * (-1.3 * p.potentials.values()[i]).exp()
            })
            .sum::<f64>()
            .ln();
        let want = 3.0 / 3.0 * lse - 2.0 * 2.0f64.ln();
        assert!((bethe_value(&p, 0.0) - want).abs() < 1e-13);
    }

    #[test]
    fn bethe_derivative_values() {
        // β = 0, t = 0: -(d/k) 2^{-k} Σ C(k,i) h_i.
        let p = model33(0.0);
        let want = -(3.0 / 3.0) * (1.0 * 0.0 + 3.0 * 1.0 + 3.0 * 1.0 + 1.0 * 0.0) / 8.0;
        assert!((bethe_derivative(&p, 0.0).unwrap() - want).abs() < 1e-14);

        let p0 = params(3, &[0.0, 0.0, 0.0, 0.0], 2.0);
        assert!(bethe_derivative(&p0, 0.0).unwrap().abs() < 1e-14);

        assert!(matches!(
            bethe_derivative(&model33(2.0), 1.0),
            Err(SymmetricError::NotAFixedPoint { .. })
        ));
    }

    #[test]
    fn envelope_derivative_matches_finite_difference() {
        // d/dβ Φ(β, 𝔤(β)) via centered difference of the solved branch.
        let beta = 2.0;
        let step = 1e-4;
        let pp = phase_point(&model33(beta), 1e-12).unwrap();
        let hi = phase_point(&model33(beta + step), 1e-12).unwrap();
        let lo = phase_point(&model33(beta - step), 1e-12).unwrap();
        let fd = (hi.bethe - lo.bethe) / (2.0 * step);
        assert!((pp.dphi - fd).abs() < 1e-5, "{} vs {fd}", pp.dphi);
    }

    #[test]
    fn interpolation_identity() {
        // Empty integral.
        assert_eq!(
            interpolate_free_energy(&model33(0.0), 1e-8).unwrap(),
            0.0
        );
        // d = k = 2: 𝔤 ≡ 0 and the closed form is ln(1+e^{-β}) - ln 2.
        let p = params(2, &[0.0, 1.0, 0.0], 1.0);
        let v = interpolate_free_energy(&p, 1e-9).unwrap();
        let want = (1.0 + (-1.0f64).exp()).ln() - 2.0f64.ln();
        assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        assert!((want + 0.37989).abs() < 1e-5);
        // Self-consistency across the kink.
        let p = model33(2.0);
        let v = interpolate_free_energy(&p, 1e-9).unwrap();
        let want = phase_point(&p, 1e-12).unwrap().bethe - 2.0f64.ln();
        assert!((v - want).abs() < 1e-6, "{v} vs {want}");
    }

    #[test]
    fn message_map_identities() {
        let p = model33(0.0);
        assert!(message_map(&p, &[0.0, 0.0]).abs() < 1e-14);

        // (d-1) m(t,..,t) = t + F(β,t) for random (β,t).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let beta: f64 = rng.random_range(0.0..4.0);
            let t: f64 = rng.random_range(-5.0..5.0);
            let p = model33(beta);
            let lhs = 2.0 * message_map(&p, &[t, t]);
            let rhs = t + fixed_point_residual(&p, t);
            assert!((lhs - rhs).abs() < 1e-10);
        }

        // At t* = 𝔤(β): m = 𝔤/(d-1).
        let p = model33(2.0);
        let g = phase_point(&p, 1e-13).unwrap().t_star;
        assert!((message_map(&p, &[g, g]) - g / 2.0).abs() < 1e-10);

        // Monotone increasing in each argument.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let beta: f64 = rng.random_range(0.0..4.0);
            let p = model33(beta);
            let base: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m0 = message_map(&p, &base);
            let i = rng.random_range(0..2);
            let mut bumped = base.clone();
            bumped[i] += rng.random_range(0.01..1.0);
            assert!(message_map(&p, &bumped) >= m0 - 1e-12);
        }
    }

    #[test]
    fn local_energy_values() {
        let p = model33(0.0);
        let v = local_energy(&p, &[0.0; 3]).unwrap();
        assert!((v + 0.75).abs() < 1e-14);

        // a_β(t) = a_β(-t), all t, by complement symmetry of H.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let beta: f64 = rng.random_range(0.0..4.0);
            let p = model33(beta);
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            let neg: Vec<f64> = t.iter().map(|x| -x).collect();
            let a = local_energy(&p, &t).unwrap();
            let b = local_energy(&p, &neg).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn local_energy_against_direct_enumeration() {
        // Convolution path vs the direct 2^k sum.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = params(3, &[0.2, 1.0, 1.4, 1.4, 1.0, 0.2], 1.7);
        let k = 5;
        let h = p.potentials.values();
        for _ in 0..50 {
            let t: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut num = 0.0;
            let mut den = 0.0;
            for mask in 0u32..(1 << k) {
                let occ = mask.count_ones() as usize;
                let dot: f64 = (0..k).filter(|&i| mask >> i & 1 == 1).map(|i| t[i]).sum();
                let w = (-p.beta * h[occ] + dot).exp();
                num += w * -h[occ];
                den += w;
            }
            let direct = num / den;
            let got = local_energy(&p, &t).unwrap();
            assert!((got - direct).abs() < 1e-12, "{got} vs {direct}");
        }
    }

    #[test]
    fn local_energy_arity_cap() {
        let half: Vec<f64> = (0..=11).map(|i| i as f64).collect();
        let h = PotentialSequence::from_half(&half, 22).unwrap();
        let p = ModelParams::new(2, h, 1.0).unwrap();
        assert!(matches!(
            local_energy(&p, &vec![0.0; 22]),
            Err(SymmetricError::ArityTooLarge { arity: 22, cap: 20 })
        ));
    }

    #[test]
    fn corner_maximality_spot_check() {
        let p = model33(2.0);
        let g = phase_point(&p, 1e-13).unwrap().t_star;
        let corner = local_energy(&p, &[g, g, g]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(-g..g)).collect();
            assert!(local_energy(&p, &t).unwrap() <= corner + 1e-12);
        }
    }
}
