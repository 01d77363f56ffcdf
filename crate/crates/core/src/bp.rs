//! Sum-product belief propagation in log-likelihood parametrization, beliefs,
//! and the Bethe free energy over the local marginal polytope.
//!
//! Messages live on directed edge instances: u[e] flows from variable to
//! factor along edge e, û[e] back. A sweep recomputes every û from the
//! previous u (occupancy convolution per factor), then every u from the new û;
//! u is damped by λ. Parallel edges carry independent message slots.

use crate::graph::FactorGraph;
use crate::numerics::{binary_entropy, ln_binomials, log_sum_exp, logaddexp, logistic};
use crate::potentials::ModelParams;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BpError {
    #[error("message set has {got} edges, graph has {expected}")]
    IndexMismatch { got: usize, expected: usize },
    #[error("local marginals violate edge consistency by {residual:e} (factor {factor}, variable {var})")]
    InconsistentTau {
        factor: usize,
        var: usize,
        residual: f64,
    },
    #[error("graph is not ({d},{k})-biregular")]
    NotBiregular { d: usize, k: usize },
    #[error("distribution does not sum to 1 (defect {0:e})")]
    NotNormalized(f64),
}

/// Log-likelihood messages per edge instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    /// Variable-to-factor message per edge id.
    pub u: Vec<f64>,
    /// Factor-to-variable message per edge id.
    pub u_hat: Vec<f64>,
}

impl MessageSet {
    pub fn constant(graph: &FactorGraph, value: f64) -> Self {
        Self {
            u: vec![value; graph.n_edges()],
            u_hat: vec![0.0; graph.n_edges()],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.u.iter().chain(&self.u_hat).all(|x| x.is_finite())
    }
}

/// Initial condition for [`run_bp`].
#[derive(Debug, Clone)]
pub enum BpInit {
    /// All messages zero (uniform beliefs).
    Zero,
    /// u = +B with B the message bound (d-1)β(h_{k/2} - h_0).
    AllPlus,
    /// u = -B.
    AllMinus,
    Custom(MessageSet),
}

/// Convergence report; non-convergence is an outcome, not an error.
#[derive(Debug, Clone, Copy)]
pub struct BpReport {
    pub iterations: usize,
    /// Max-norm of the last undamped u-update.
    pub residual: f64,
    pub converged: bool,
}

/// û_{a→i}: log-likelihood ratio of x_i under the factor weight tilted by the
/// other incoming messages, via an occupancy convolution over the other slots.
fn factor_update(
    graph: &FactorGraph,
    params: &ModelParams,
    u: &[f64],
    factor: usize,
    out_edge: usize,
) -> f64 {
    let h = params.potentials.values();
    let beta = params.beta;
    // coeffs[m] = log Σ over subsets of the other slots with m ones.
    let mut coeffs = vec![0.0f64];
    for &e in graph.factor_edges(factor) {
        if e == out_edge {
            continue;
        }
        let w = u[e];
        let mut next = vec![f64::NEG_INFINITY; coeffs.len() + 1];
        for (m, &c) in coeffs.iter().enumerate() {
            next[m] = logaddexp(next[m], c);
            next[m + 1] = logaddexp(next[m + 1], c + w);
        }
        coeffs = next;
    }
    let s1: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(m, &c)| c - beta * h[m + 1])
        .collect();
    let s0: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(m, &c)| c - beta * h[m])
        .collect();
    log_sum_exp(&s1) - log_sum_exp(&s0)
}

/// One synchronous sweep: fresh û from the current u, fresh u from the new û,
/// u blended as (1-λ)·update + λ·old. Returns the messages and the max-norm
/// of the *undamped* u change.
pub fn bp_sweep(
    graph: &FactorGraph,
    params: &ModelParams,
    messages: &MessageSet,
    damping: f64,
) -> Result<(MessageSet, f64), BpError> {
    if messages.u.len() != graph.n_edges() {
        return Err(BpError::IndexMismatch {
            got: messages.u.len(),
            expected: graph.n_edges(),
        });
    }
    assert!((0.0..1.0).contains(&damping));
    let n_edges = graph.n_edges();
    let mut u_hat = vec![0.0; n_edges];
    for (e, uh) in u_hat.iter_mut().enumerate() {
        *uh = factor_update(graph, params, &messages.u, graph.edge_factor(e), e);
    }
    let mut u = vec![0.0; n_edges];
    let mut residual = 0.0f64;
    for (e, un) in u.iter_mut().enumerate() {
        let v = graph.edge_var(e);
        let update: f64 = graph
            .var_edges(v)
            .iter()
            .filter(|&&b| b != e)
            .map(|&b| u_hat[b])
            .sum();
        residual = residual.max((update - messages.u[e]).abs());
        *un = (1.0 - damping) * update + damping * messages.u[e];
    }
    Ok((MessageSet { u, u_hat }, residual))
}

/// Iterates sweeps until the undamped residual drops below `tol` or
/// `max_iters` is reached.
pub fn run_bp(
    graph: &FactorGraph,
    params: &ModelParams,
    init: BpInit,
    tol: f64,
    max_iters: usize,
    damping: f64,
) -> Result<(MessageSet, BpReport), BpError> {
    assert!(tol > 0.0);
    let bound = params.message_bound();
    let mut messages = match init {
        BpInit::Zero => MessageSet::constant(graph, 0.0),
        BpInit::AllPlus => MessageSet::constant(graph, bound),
        BpInit::AllMinus => MessageSet::constant(graph, -bound),
        BpInit::Custom(m) => m,
    };
    let mut report = BpReport {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    while report.iterations < max_iters {
        let (next, residual) = bp_sweep(graph, params, &messages, damping)?;
        messages = next;
        report.iterations += 1;
        report.residual = residual;
        if residual < tol {
            report.converged = true;
            break;
        }
    }
    Ok((messages, report))
}

/// Per-factor marginal: either exchangeable over occupancy classes (k+1
/// numbers, exact whenever the tilt is a single scalar) or a full table over
/// the factor's distinct variables.
#[derive(Debug, Clone)]
pub enum FactorMarginal {
    Occupancy {
        degree: usize,
        /// P(occupancy = m) for m = 0..=degree.
        probs: Vec<f64>,
    },
    Table {
        /// Distinct incident variables with edge multiplicities.
        vars: Vec<(usize, usize)>,
        /// P over {0,1}^vars, index bit j = value of vars[j].
        probs: Vec<f64>,
    },
}

impl FactorMarginal {
    pub fn total(&self) -> f64 {
        match self {
            Self::Occupancy { probs, .. } | Self::Table { probs, .. } => probs.iter().sum(),
        }
    }

    /// P(x_var = 1) induced on one incident variable.
    pub fn var_marginal(&self, var: usize) -> f64 {
        match self {
            Self::Occupancy { degree, probs } => probs
                .iter()
                .enumerate()
                .map(|(m, &q)| q * m as f64 / *degree as f64)
                .sum(),
            Self::Table { vars, probs } => {
                let j = vars
                    .iter()
                    .position(|&(v, _)| v == var)
                    .expect("variable incident to factor");
                probs
                    .iter()
                    .enumerate()
                    .filter(|(pat, _)| pat >> j & 1 == 1)
                    .map(|(_, &p)| p)
                    .sum()
            }
        }
    }

    /// E h(occupancy).
    pub fn expected_energy(&self, h: &[f64]) -> f64 {
        match self {
            Self::Occupancy { probs, .. } => {
                probs.iter().enumerate().map(|(m, &q)| q * h[m]).sum()
            }
            Self::Table { vars, probs } => probs
                .iter()
                .enumerate()
                .map(|(pat, &p)| {
                    let occ: usize = vars
                        .iter()
                        .enumerate()
                        .map(|(j, &(_, mult))| ((pat >> j) & 1) * mult)
                        .sum();
                    p * h[occ]
                })
                .sum(),
        }
    }

    /// Shannon entropy of the full pattern distribution (occupancy classes
    /// spread uniformly over their C(degree, m) patterns).
    pub fn entropy(&self) -> f64 {
        match self {
            Self::Occupancy { degree, probs } => {
                let lb = ln_binomials(*degree);
                probs
                    .iter()
                    .enumerate()
                    .map(|(m, &q)| if q > 0.0 { -q * (q.ln() - lb[m]) } else { 0.0 })
                    .sum()
            }
            Self::Table { probs, .. } => probs
                .iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum(),
        }
    }

    fn distinct_vars(&self, factor: usize, graph: &FactorGraph) -> Vec<usize> {
        match self {
            Self::Occupancy { .. } => graph
                .factor_vars_grouped(factor)
                .into_iter()
                .map(|(v, _)| v)
                .collect(),
            Self::Table { vars, .. } => vars.iter().map(|&(v, _)| v).collect(),
        }
    }
}

/// An element of the local marginal polytope.
#[derive(Debug, Clone)]
pub struct LocalMarginals {
    /// P(x_v = 1) per variable.
    pub var_one: Vec<f64>,
    /// Per-factor joint marginal.
    pub factors: Vec<FactorMarginal>,
}

pub const EDGE_CONSISTENCY_TOL: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-12;

impl LocalMarginals {
    /// Largest |factor marginal - variable marginal| over incident pairs.
    pub fn consistency_residual(&self, graph: &FactorGraph) -> f64 {
        let mut worst = 0.0f64;
        for (f, fm) in self.factors.iter().enumerate() {
            for v in fm.distinct_vars(f, graph) {
                worst = worst.max((fm.var_marginal(v) - self.var_one[v]).abs());
            }
        }
        worst
    }

    fn validate(&self, graph: &FactorGraph) -> Result<(), BpError> {
        for fm in &self.factors {
            let defect = (fm.total() - 1.0).abs();
            if defect > NORMALIZATION_TOL {
                return Err(BpError::NotNormalized(defect));
            }
        }
        for (f, fm) in self.factors.iter().enumerate() {
            for v in fm.distinct_vars(f, graph) {
                let residual = (fm.var_marginal(v) - self.var_one[v]).abs();
                if residual > EDGE_CONSISTENCY_TOL {
                    return Err(BpError::InconsistentTau {
                        factor: f,
                        var: v,
                        residual,
                    });
                }
            }
        }
        Ok(())
    }
}

/// BP beliefs: τ_i ∝ exp(x_i Σ_b û), τ_a ∝ ψ_a(x) exp(Σ_j x_j u), normalized
/// in log space.
pub fn beliefs(graph: &FactorGraph, params: &ModelParams, messages: &MessageSet) -> LocalMarginals {
    let h = params.potentials.values();
    let beta = params.beta;
    let var_one: Vec<f64> = (0..graph.n_vars())
        .map(|v| {
            let field: f64 = graph.var_edges(v).iter().map(|&e| messages.u_hat[e]).sum();
            logistic(field)
        })
        .collect();
    let factors = (0..graph.n_factors())
        .map(|f| {
            // Accumulate per distinct variable the sum of its slot messages.
            let grouped = graph.factor_vars_grouped(f);
            let mut tilt = vec![0.0f64; grouped.len()];
            for &e in graph.factor_edges(f) {
                let v = graph.edge_var(e);
                let j = grouped.iter().position(|&(w, _)| w == v).unwrap();
                tilt[j] += messages.u[e];
            }
            let width = grouped.len();
            assert!(width <= 20, "factor joint table too large");
            let mut logs = vec![0.0f64; 1 << width];
            for (pat, l) in logs.iter_mut().enumerate() {
                let mut occ = 0usize;
                let mut dot = 0.0;
                for (j, &(_, mult)) in grouped.iter().enumerate() {
                    if pat >> j & 1 == 1 {
                        occ += mult;
                        dot += tilt[j];
                    }
                }
                *l = -beta * h[occ] + dot;
            }
            let z = log_sum_exp(&logs);
            FactorMarginal::Table {
                vars: grouped,
                probs: logs.iter().map(|&l| (l - z).exp()).collect(),
            }
        })
        .collect();
    LocalMarginals { var_one, factors }
}

/// The symmetric polytope element built from a scalar message t:
/// τ_a(x) ∝ exp(-β h(|x|) + t|x|) and τ_i(1) equal to the factor-side slot
/// marginal σ((d t + F(β,t))/(d-1)), which reduces to t_v(t) on the
/// fixed-point set F(β,t) = 0. Edge-consistent for every t.
pub fn symmetric_tau(
    graph: &FactorGraph,
    params: &ModelParams,
    t: f64,
) -> Result<LocalMarginals, BpError> {
    let k = params.arity();
    let d = params.d;
    if graph.biregular() != Some((d, k)) {
        return Err(BpError::NotBiregular { d, k });
    }
    let h = params.potentials.values();
    let lb = ln_binomials(k);
    let logs: Vec<f64> = (0..=k)
        .map(|m| lb[m] - params.beta * h[m] + m as f64 * t)
        .collect();
    let z = log_sum_exp(&logs);
    let probs: Vec<f64> = logs.iter().map(|&l| (l - z).exp()).collect();
    let f = crate::symmetric::fixed_point_residual(params, t);
    let slot_marginal = logistic((d as f64 * t + f) / (d as f64 - 1.0));
    Ok(LocalMarginals {
        var_one: vec![slot_marginal; graph.n_vars()],
        factors: (0..graph.n_factors())
            .map(|_| FactorMarginal::Occupancy {
                degree: k,
                probs: probs.clone(),
            })
            .collect(),
    })
}

fn bethe_sum(graph: &FactorGraph, params: &ModelParams, tau: &LocalMarginals) -> f64 {
    let h = params.potentials.values();
    let beta = params.beta;
    let d = params.d as f64;
    let mut total = 0.0;
    for fm in &tau.factors {
        total += -beta * fm.expected_energy(h) + fm.entropy();
    }
    for &p in &tau.var_one {
        total -= (d - 1.0) * binary_entropy(p);
    }
    total / graph.n_vars() as f64
}

/// Bethe free energy density Φ_G(β,τ):
/// (1/|V|) [Σ_a (-β E_{τ_a} h + H(τ_a)) - (d-1) Σ_i H2(τ_i)].
/// Rejects τ outside the local marginal polytope (tolerance 1e-9).
pub fn bethe_functional(
    graph: &FactorGraph,
    params: &ModelParams,
    tau: &LocalMarginals,
) -> Result<f64, BpError> {
    tau.validate(graph)?;
    Ok(bethe_sum(graph, params, tau))
}

/// `bethe_functional` without the polytope validation; diagnostic use on
/// non-converged beliefs.
pub fn bethe_functional_unchecked(
    graph: &FactorGraph,
    params: &ModelParams,
    tau: &LocalMarginals,
) -> f64 {
    bethe_sum(graph, params, tau)
}
