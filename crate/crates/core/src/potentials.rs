//! Symmetric concave factor potentials and the Hamiltonian/weight primitives.
//!
//! A potential is a sequence h_0..h_k with h_i = h_{k-i} (checked exactly) and
//! 2h_i ≥ h_{i-1} + h_{i+1}. A factor touching occupancy i (number of 1s among
//! its neighbors, with multi-edges counted by multiplicity) contributes h_i to
//! the energy and exp(-β h_i) to the Gibbs weight.

use crate::graph::{Assignment, FactorGraph};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    /// Fewer than 3 values, i.e. arity k < 2.
    #[error("potential sequence needs at least 3 values (arity k >= 2)")]
    TooShort,
    /// h_i != h_{k-i} at the given index (compared exactly).
    #[error("symmetry violated at index {0}: h_i must equal h_(k-i) exactly")]
    SymmetryViolation(usize),
    /// 2h_i < h_{i-1} + h_{i+1} at the given index.
    #[error("concavity violated at index {0}: 2 h_i >= h_(i-1) + h_(i+1) required")]
    ConcavityViolation(usize),
    #[error("occupancy {occupancy} out of range 0..={arity}")]
    OccupancyOutOfRange { occupancy: usize, arity: usize },
    #[error("assignment has {got} bits, graph has {expected} variables")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("inverse temperature must be >= 0, got {0}")]
    NegativeBeta(f64),
    #[error("variable degree d must be >= 2, got {0}")]
    DegreeTooSmall(usize),
}

/// Validated symmetric concave sequence h_0..h_k.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSequence {
    values: Vec<f64>,
}

impl PotentialSequence {
    /// Validates symmetry (exact equality) and concavity of the sequence.
    ///
    /// Symmetry is checked bit-exactly: build inputs from the first half and
    /// mirror (see [`PotentialSequence::from_half`]) rather than recomputing
    /// the second half by arithmetic.
    pub fn validate(values: Vec<f64>) -> Result<Self, PotentialError> {
        if values.len() < 3 {
            return Err(PotentialError::TooShort);
        }
        let k = values.len() - 1;
        for i in 0..=k {
            if values[i].to_bits() != values[k - i].to_bits() {
                return Err(PotentialError::SymmetryViolation(i));
            }
        }
        for i in 1..k {
            if 2.0 * values[i] < values[i - 1] + values[i + 1] {
                return Err(PotentialError::ConcavityViolation(i));
            }
        }
        let seq = Self { values };
        // Implied by symmetry + concavity; kept as a hard check on the invariant.
        let min = seq.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = seq.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, seq.values[0].min(seq.values[k]));
        assert_eq!(max, seq.values[k / 2].max(seq.values[k.div_ceil(2)]));
        Ok(seq)
    }

    /// Builds the full sequence by mirroring `half`, which must hold
    /// h_0..h_{floor(k/2)}. Guarantees exact symmetry.
    pub fn from_half(half: &[f64], k: usize) -> Result<Self, PotentialError> {
        if half.len() != k / 2 + 1 {
            return Err(PotentialError::TooShort);
        }
        let mut values = vec![0.0; k + 1];
        for (i, &h) in half.iter().enumerate() {
            values[i] = h;
            values[k - i] = h;
        }
        Self::validate(values)
    }

    /// Arity k (a factor of full degree sees occupancies 0..=k).
    pub fn arity(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, occupancy: usize) -> Result<f64, PotentialError> {
        self.values
            .get(occupancy)
            .copied()
            .ok_or(PotentialError::OccupancyOutOfRange {
                occupancy,
                arity: self.arity(),
            })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// h_{floor(k/2)} - h_0, the largest potential spread. Scales the message
    /// bound (d-1) β (h_{k/2} - h_0) used to bracket fixed points.
    pub fn spread(&self) -> f64 {
        self.values[self.arity() / 2] - self.values[0]
    }
}

/// Model parameters: variable degree d, potentials (arity k), and β ≥ 0.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub d: usize,
    pub potentials: PotentialSequence,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(d: usize, potentials: PotentialSequence, beta: f64) -> Result<Self, PotentialError> {
        if d < 2 {
            return Err(PotentialError::DegreeTooSmall(d));
        }
        if !(beta >= 0.0) {
            return Err(PotentialError::NegativeBeta(beta));
        }
        Ok(Self {
            d,
            potentials,
            beta,
        })
    }

    pub fn arity(&self) -> usize {
        self.potentials.arity()
    }

    /// Same model at a different inverse temperature.
    pub fn with_beta(&self, beta: f64) -> Result<Self, PotentialError> {
        Self::new(self.d, self.potentials.clone(), beta)
    }

    /// (d-1) β (h_{floor(k/2)} - h_0): every variable-to-factor message of any
    /// BP fixed point lies in [-B, B].
    pub fn message_bound(&self) -> f64 {
        (self.d as f64 - 1.0) * self.beta * self.potentials.spread()
    }
}

/// exp(-β h_occupancy), the Gibbs weight of a single factor.
pub fn factor_weight(params: &ModelParams, occupancy: usize) -> Result<f64, PotentialError> {
    let h = params.potentials.value(occupancy)?;
    Ok((-params.beta * h).exp())
}

/// Total energy H_G(x) = Σ_f h(occupancy of f), multi-edges counted with
/// multiplicity.
pub fn hamiltonian(
    graph: &FactorGraph,
    params: &ModelParams,
    x: &Assignment,
) -> Result<f64, PotentialError> {
    if x.len() != graph.n_vars() {
        return Err(PotentialError::DimensionMismatch {
            got: x.len(),
            expected: graph.n_vars(),
        });
    }
    let mut total = 0.0;
    for f in 0..graph.n_factors() {
        let occ = graph
            .factor_vars(f)
            .filter(|&v| x.get(v))
            .count();
        total += params.potentials.value(occ)?;
    }
    Ok(total)
}
