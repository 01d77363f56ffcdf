//! Ground-truth engines: partition functions, free energy densities, Gibbs
//! marginals, and β-derivatives by exhaustive enumeration, tree elimination,
//! and 2x2 transfer matrices for the arity-2 cycle family.
//!
//! All accumulation is done in log space with a running maximum; raw Gibbs
//! weights are never exponentiated directly.

use crate::graph::FactorGraph;
use crate::numerics::logaddexp;
use crate::potentials::ModelParams;
use rayon::prelude::*;
use thiserror::Error;

/// Default enumeration cap (2^24 states).
pub const DEFAULT_ENUM_CAP: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("{n_vars} variables exceed the enumeration cap of {cap}")]
    TooManyVariables { n_vars: usize, cap: usize },
    #[error("graph contains a cycle; tree elimination requires a forest")]
    NotAForest,
    #[error("transfer matrix needs factor arity 2, potentials have arity {0}")]
    WrongArity(usize),
}

/// Exact log-partition data for one (graph, β).
#[derive(Debug, Clone, Copy)]
pub struct ExactResult {
    /// log Z_G(β).
    pub log_partition: f64,
    /// Φ_G(β) = log Z / n_vars.
    pub free_energy_density: f64,
    /// E h(occupancy) under the Gibbs measure and a uniform random factor.
    pub expected_factor_energy: f64,
}

/// Exact Gibbs marginals.
#[derive(Debug, Clone)]
pub struct GibbsMarginal {
    /// P(x_v = 1) per variable.
    pub var_one: Vec<f64>,
    /// Per factor, the distribution of its occupancy 0..=degree.
    pub factor_occupancy: Vec<Vec<f64>>,
}

struct SweepAcc {
    max_lw: f64,
    z: f64,
    energy: f64,
    var_one: Vec<f64>,
    occ_hist: Vec<Vec<f64>>,
}

impl SweepAcc {
    fn new(graph: &FactorGraph, marginals: bool) -> Self {
        let (var_one, occ_hist) = if marginals {
            (
                vec![0.0; graph.n_vars()],
                (0..graph.n_factors())
                    .map(|f| vec![0.0; graph.factor_degree(f) + 1])
                    .collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            max_lw: f64::NEG_INFINITY,
            z: 0.0,
            energy: 0.0,
            var_one,
            occ_hist,
        }
    }

    fn rescale(&mut self, factor: f64) {
        self.z *= factor;
        self.energy *= factor;
        for v in &mut self.var_one {
            *v *= factor;
        }
        for hist in &mut self.occ_hist {
            for c in hist {
                *c *= factor;
            }
        }
    }

    fn merge(mut self, mut other: SweepAcc) -> SweepAcc {
        let m = self.max_lw.max(other.max_lw);
        if m == f64::NEG_INFINITY {
            return self;
        }
        self.rescale((self.max_lw - m).exp());
        other.rescale((other.max_lw - m).exp());
        self.max_lw = m;
        self.z += other.z;
        self.energy += other.energy;
        for (a, b) in self.var_one.iter_mut().zip(&other.var_one) {
            *a += b;
        }
        for (a, b) in self.occ_hist.iter_mut().zip(&other.occ_hist) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

fn sweep_chunk(
    graph: &FactorGraph,
    params: &ModelParams,
    var_groups: &[Vec<(usize, usize)>],
    start: u64,
    end: u64,
    marginals: bool,
) -> SweepAcc {
    let h = params.potentials.values();
    let beta = params.beta;
    let mut acc = SweepAcc::new(graph, marginals);

    // Initialize occupancies and energy at the Gray code of `start`.
    let mut mask = start ^ (start >> 1);
    let mut occ = vec![0usize; graph.n_factors()];
    for f in 0..graph.n_factors() {
        occ[f] = graph.factor_vars(f).filter(|&v| mask >> v & 1 == 1).count();
    }
    let mut energy: f64 = occ.iter().map(|&c| h[c]).sum();

    let mut j = start;
    loop {
        let lw = -beta * energy;
        if lw > acc.max_lw {
            acc.rescale((acc.max_lw - lw).exp());
            acc.max_lw = lw;
        }
        let w = (lw - acc.max_lw).exp();
        acc.z += w;
        acc.energy += w * energy;
        if marginals {
            let mut bits = mask;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                acc.var_one[v] += w;
            }
            for f in 0..graph.n_factors() {
                acc.occ_hist[f][occ[f]] += w;
            }
        }

        j += 1;
        if j == end {
            break;
        }
        let flip = j.trailing_zeros() as usize;
        let turned_on = mask >> flip & 1 == 0;
        mask ^= 1 << flip;
        for &(f, mult) in &var_groups[flip] {
            let old = occ[f];
            let new = if turned_on { old + mult } else { old - mult };
            energy += h[new] - h[old];
            occ[f] = new;
        }
    }
    acc
}

fn enumerate(
    graph: &FactorGraph,
    params: &ModelParams,
    cap: usize,
    marginals: bool,
) -> Result<(ExactResult, Option<GibbsMarginal>), ExactError> {
    let n = graph.n_vars();
    if n > cap {
        return Err(ExactError::TooManyVariables { n_vars: n, cap });
    }
    assert!(n >= 1, "graph has no variables");
    let var_groups: Vec<Vec<(usize, usize)>> =
        (0..n).map(|v| graph.var_factors_grouped(v)).collect();

    let total: u64 = 1 << n;
    let chunk: u64 = 1 << n.min(14);
    let n_chunks = total.div_ceil(chunk);
    let acc = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = (start + chunk).min(total);
            sweep_chunk(graph, params, &var_groups, start, end, marginals)
        })
        .reduce(
            || SweepAcc::new(graph, marginals),
            |a, b| {
                if a.max_lw == f64::NEG_INFINITY {
                    b
                } else {
                    a.merge(b)
                }
            },
        );

    let log_partition = acc.max_lw + acc.z.ln();
    let mean_energy = acc.energy / acc.z;
    let result = ExactResult {
        log_partition,
        free_energy_density: log_partition / n as f64,
        expected_factor_energy: mean_energy / graph.n_factors().max(1) as f64,
    };
    let marg = marginals.then(|| GibbsMarginal {
        var_one: acc.var_one.iter().map(|a| a / acc.z).collect(),
        factor_occupancy: acc
            .occ_hist
            .iter()
            .map(|hist| hist.iter().map(|c| c / acc.z).collect())
            .collect(),
    });
    Ok((result, marg))
}

/// Exact log Z and Gibbs marginals by log-sum-exp over all 2^n assignments.
/// The sweep walks assignments in Gray-code order, updating factor
/// occupancies incrementally, and parallelizes over index ranges.
pub fn brute_force(
    graph: &FactorGraph,
    params: &ModelParams,
) -> Result<(ExactResult, GibbsMarginal), ExactError> {
    brute_force_with_cap(graph, params, DEFAULT_ENUM_CAP)
}

pub fn brute_force_with_cap(
    graph: &FactorGraph,
    params: &ModelParams,
    cap: usize,
) -> Result<(ExactResult, GibbsMarginal), ExactError> {
    let (res, marg) = enumerate(graph, params, cap, true)?;
    Ok((res, marg.unwrap()))
}

/// `brute_force` without the marginal accumulators (cheaper inner loop).
pub fn brute_force_log_z(
    graph: &FactorGraph,
    params: &ModelParams,
    cap: usize,
) -> Result<ExactResult, ExactError> {
    Ok(enumerate(graph, params, cap, false)?.0)
}

/// d Φ_G / dβ, exact: (1/n) E[-H_G(X)] with X Gibbs-distributed at β.
/// On a (d,k)-biregular graph this equals (d/k) E[-h(occupancy)] at a
/// uniform random factor.
pub fn exact_phi_derivative(graph: &FactorGraph, params: &ModelParams) -> Result<f64, ExactError> {
    let res = brute_force_log_z(graph, params, DEFAULT_ENUM_CAP)?;
    Ok(-res.expected_factor_energy * graph.n_factors() as f64 / graph.n_vars() as f64)
}

/// Log-space weight carrying its β-derivative: l = ln w, dl = d(ln w)/dβ.
#[derive(Debug, Clone, Copy)]
struct Ld {
    l: f64,
    dl: f64,
}

const LD_ZERO: Ld = Ld {
    l: f64::NEG_INFINITY,
    dl: 0.0,
};

impl Ld {
    fn mul(self, other: Ld) -> Ld {
        Ld {
            l: self.l + other.l,
            dl: self.dl + other.dl,
        }
    }

    fn add(self, other: Ld) -> Ld {
        if self.l == f64::NEG_INFINITY {
            return other;
        }
        if other.l == f64::NEG_INFINITY {
            return self;
        }
        let l = logaddexp(self.l, other.l);
        let wa = (self.l - l).exp();
        let wb = (other.l - l).exp();
        Ld {
            l,
            dl: wa * self.dl + wb * other.dl,
        }
    }
}

/// Result of the leaf-elimination pass: total log Z with its β-derivative,
/// plus the occupancy convolution at the requested root factor.
struct TreePass {
    log_z: Ld,
    root_coeffs: Option<Vec<Ld>>,
}

fn tree_messages(
    graph: &FactorGraph,
    params: &ModelParams,
    clamps: &[Option<bool>],
    root_factor: Option<usize>,
) -> Result<TreePass, ExactError> {
    if !graph.is_forest() {
        return Err(ExactError::NotAForest);
    }
    let n_vars = graph.n_vars();
    let n_nodes = n_vars + graph.n_factors();
    let h = params.potentials.values();
    let beta = params.beta;
    let wf = |occ: usize| Ld {
        l: -beta * h[occ],
        dl: -h[occ],
    };
    let clamp_msg = |v: usize| -> [Ld; 2] {
        match clamps.get(v).copied().flatten() {
            Some(false) => [Ld { l: 0.0, dl: 0.0 }, LD_ZERO],
            Some(true) => [LD_ZERO, Ld { l: 0.0, dl: 0.0 }],
            None => [Ld { l: 0.0, dl: 0.0 }, Ld { l: 0.0, dl: 0.0 }],
        }
    };

    let mut adj = vec![Vec::new(); n_nodes];
    for &(v, f) in graph.edges() {
        adj[v].push(n_vars + f);
        adj[n_vars + f].push(v);
    }

    let mut visited = vec![false; n_nodes];
    let mut up: Vec<[Ld; 2]> = vec![[LD_ZERO, LD_ZERO]; n_nodes];
    let mut total = Ld { l: 0.0, dl: 0.0 };
    let mut root_coeffs = None;

    let roots: Vec<usize> = match root_factor {
        Some(f) => std::iter::once(n_vars + f)
            .chain((0..n_nodes).filter(|&x| x != n_vars + f))
            .collect(),
        None => (0..n_nodes).collect(),
    };

    for root in roots {
        if visited[root] {
            continue;
        }
        // BFS order with parent pointers, then process in reverse.
        let mut order = vec![root];
        let mut parent = vec![usize::MAX; n_nodes];
        visited[root] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &w in &adj[u] {
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = u;
                    order.push(w);
                }
            }
        }
        for &u in order.iter().rev() {
            if u < n_vars {
                // Variable: product of child factor messages and the clamp.
                let mut msg = clamp_msg(u);
                for &b in &adj[u] {
                    if b != parent[u] {
                        msg[0] = msg[0].mul(up[b][0]);
                        msg[1] = msg[1].mul(up[b][1]);
                    }
                }
                up[u] = msg;
            } else {
                // Factor: occupancy convolution over child variables, then
                // attach the potential for each parent value.
                let mut coeffs = vec![Ld { l: 0.0, dl: 0.0 }];
                for &w in &adj[u] {
                    if w == parent[u] {
                        continue;
                    }
                    let mut next = vec![LD_ZERO; coeffs.len() + 1];
                    for (m, &c) in coeffs.iter().enumerate() {
                        next[m] = next[m].add(c.mul(up[w][0]));
                        next[m + 1] = next[m + 1].add(c.mul(up[w][1]));
                    }
                    coeffs = next;
                }
                if parent[u] == usize::MAX {
                    // Root factor of its component: close the component here.
                    if root_factor == Some(u - n_vars) {
                        root_coeffs = Some(coeffs.clone());
                    }
                    let mut z = LD_ZERO;
                    for (m, &c) in coeffs.iter().enumerate() {
                        z = z.add(c.mul(wf(m)));
                    }
                    total = total.mul(z);
                } else {
                    let mut msg = [LD_ZERO, LD_ZERO];
                    for (m, &c) in coeffs.iter().enumerate() {
                        msg[0] = msg[0].add(c.mul(wf(m)));
                        msg[1] = msg[1].add(c.mul(wf(m + 1)));
                    }
                    up[u] = msg;
                }
            }
        }
        // Close components rooted at a variable.
        if root < n_vars {
            let mut z = LD_ZERO;
            for x in 0..2 {
                z = z.add(up[root][x]);
            }
            total = total.mul(z);
        }
    }

    Ok(TreePass {
        log_z: total,
        root_coeffs,
    })
}

/// Exact log Z on a forest by leaf elimination (messages are log-space
/// 2-vectors; factor steps use an occupancy convolution).
pub fn tree_partition(graph: &FactorGraph, params: &ModelParams) -> Result<ExactResult, ExactError> {
    let clamps = vec![None; graph.n_vars()];
    let pass = tree_messages(graph, params, &clamps, None)?;
    Ok(ExactResult {
        log_partition: pass.log_z.l,
        free_energy_density: pass.log_z.l / graph.n_vars() as f64,
        expected_factor_energy: -pass.log_z.dl / graph.n_factors().max(1) as f64,
    })
}

/// Occupancy distribution of factor `root_factor` conditioned on clamping
/// every variable in `boundary` to `boundary_value`. Exact, via tree
/// elimination rooted at the factor.
pub fn boundary_conditioned_marginal(
    tree: &FactorGraph,
    params: &ModelParams,
    boundary: &[usize],
    boundary_value: bool,
    root_factor: usize,
) -> Result<Vec<f64>, ExactError> {
    let mut clamps = vec![None; tree.n_vars()];
    for &v in boundary {
        clamps[v] = Some(boundary_value);
    }
    let pass = tree_messages(tree, params, &clamps, Some(root_factor))?;
    let coeffs = pass.root_coeffs.expect("root factor visited first");
    let h = params.potentials.values();
    let logs: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| c.l - params.beta * h[m])
        .collect();
    let log_z = crate::numerics::log_sum_exp(&logs);
    Ok(logs.iter().map(|&l| (l - log_z).exp()).collect())
}

/// Exact log Z of the alternating cycle with n variables and n arity-2
/// factors: log trace(T^n) with T(x,y) = exp(-β h(x+y)), via eigenvalues.
pub fn transfer_matrix_cycle(n: usize, params: &ModelParams) -> Result<ExactResult, ExactError> {
    if params.arity() != 2 {
        return Err(ExactError::WrongArity(params.arity()));
    }
    assert!(n >= 1);
    let h = params.potentials.values();
    let beta = params.beta;
    // T = [[a, b], [b, a]] with a = e^{-βh_0}, b = e^{-βh_1} (h_2 = h_0):
    // eigenvalues a ± b. Concavity gives h_1 >= h_0, so both are >= 0.
    let log_lambda1 = logaddexp(-beta * h[0], -beta * h[1]);
    let delta = h[1] - h[0];
    let r = (beta * delta / 2.0).tanh();
    let nf = n as f64;
    let log_z = nf * log_lambda1 + r.powi(n as i32).ln_1p();

    // d log λ1 / dβ = -(h_0 + h_1 e^{-βΔ}) / (1 + e^{-βΔ}).
    let e = (-beta * delta).exp();
    let dlog_lambda1 = -(h[0] + h[1] * e) / (1.0 + e);
    let dr = 0.5 * delta * (1.0 - r * r);
    let rn = r.powi(n as i32);
    let d_tail = if n >= 1 {
        nf * r.powi(n as i32 - 1) * dr / (1.0 + rn)
    } else {
        0.0
    };
    let dlog_z = nf * dlog_lambda1 + d_tail;

    Ok(ExactResult {
        log_partition: log_z,
        free_energy_density: log_z / nf,
        expected_factor_energy: -dlog_z / nf,
    })
}
