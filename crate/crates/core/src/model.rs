//! Chain/probe parameters and symbolic operator term lists.
//!
//! The system is a spin-1/2 XXZ chain of `L` sites with open boundaries,
//!
//! ```text
//!     H_chain = J * sum_{i=1}^{L-1} [ (S+_i S-_{i+1} + S-_i S+_{i+1})/2
//!                                     + Delta * Sz_i Sz_{i+1} ]
//! ```
//!
//! probed by a qubit that couples to the `Sz` component of a single chain site
//! `M` (the middle site by default).  Because that coupling commutes with the
//! qubit's own Hamiltonian, each qubit basis state drags the chain along one of
//! two *branch* Hamiltonians `H_± = H_chain ± (g/2) Sz_M`, and every backend in
//! this crate ultimately evolves states under term lists built here.
//!
//! Operators are represented symbolically as sums of products of single-site
//! spin operators; the exact-diagonalization and tensor-network backends each
//! compile the same list into their own concrete representation.  Basis-state
//! bit convention used by all dense backends: bit `i-1` of a `u64` basis index
//! is `1` when site `i` (1-based) points up (`Sz = +1/2`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from parameter validation and term-list construction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("chain length must be at least 2, got L = {0}")]
    ChainTooShort(usize),
    #[error("chain length must be even so the probe site L/2 exists, got L = {0}")]
    OddChainLength(usize),
    #[error("probe site must satisfy 1 <= M <= L, got M = {m} with L = {l}")]
    ProbeSiteOutOfRange { m: usize, l: usize },
    #[error("exchange coupling must be positive and finite, got J = {0}")]
    InvalidExchange(f64),
    #[error("parameter {name} must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
    #[error("dense assembly limited to L <= {max}, got L = {l}")]
    DenseTooLarge { l: usize, max: usize },
}

/// Physical parameters of the probed chain.
///
/// Invariants (enforced by [`ModelParams::new`] and [`ModelParams::validate`]):
/// `j > 0`, all fields finite, `l >= 2` and even, `1 <= m <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Exchange coupling `J > 0`; sets the unit of energy (and inverse time).
    pub j: f64,
    /// Anisotropy `Delta` of the `Sz Sz` coupling.
    pub delta: f64,
    /// Number of chain sites (even).
    pub l: usize,
    /// Probe-chain coupling strength `g`.
    pub g: f64,
    /// Qubit level splitting `h_z`; contributes only a rigid phase.
    pub h_z: f64,
    /// Probed chain site (1-based); `L/2` unless overridden.
    pub m: usize,
}

impl ModelParams {
    /// Creates validated parameters with the probe attached to site `L/2`.
    pub fn new(j: f64, delta: f64, l: usize, g: f64, h_z: f64) -> Result<Self, ModelError> {
        let params = Self { j, delta, l, g, h_z, m: l / 2 };
        params.validate()?;
        Ok(params)
    }

    /// Returns a copy probing site `m` (1-based) instead of the middle site.
    pub fn with_probe_site(mut self, m: usize) -> Result<Self, ModelError> {
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    /// Checks all invariants; useful after deserializing from a config file.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(ModelError::InvalidExchange(self.j));
        }
        for (name, value) in [("delta", self.delta), ("g", self.g), ("h_z", self.h_z)] {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteParameter { name, value });
            }
        }
        if self.l < 2 {
            return Err(ModelError::ChainTooShort(self.l));
        }
        if self.l % 2 != 0 {
            return Err(ModelError::OddChainLength(self.l));
        }
        if self.m < 1 || self.m > self.l {
            return Err(ModelError::ProbeSiteOutOfRange { m: self.m, l: self.l });
        }
        Ok(())
    }
}

/// Which branch Hamiltonian `H_± = H_chain ± (g/2) Sz_M` a chain state follows.
///
/// `Plus` is the branch dragged by the qubit state with `sigma_z = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    /// `+1.0` for `Plus`, `-1.0` for `Minus`.
    pub fn signum(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }
}

/// Single-site spin-1/2 operator appearing as a factor in a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalOp {
    /// `Sz = diag(+1/2, -1/2)`.
    Sz,
    /// Raising operator `S+` (`S+|down> = |up>`).
    Sp,
    /// Lowering operator `S-` (`S-|up> = |down>`).
    Sm,
}

impl LocalOp {
    /// Dense 2x2 matrix in the basis `{|up>, |down>}` (row/column 0 = up).
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            LocalOp::Sz => [[0.5, 0.0], [0.0, -0.5]],
            LocalOp::Sp => [[0.0, 1.0], [0.0, 0.0]],
            LocalOp::Sm => [[0.0, 0.0], [1.0, 0.0]],
        }
    }

    /// Applies the operator to the basis state with occupation `up`.
    ///
    /// Returns `(new_up, amplitude)`, or `None` when the state is annihilated.
    pub(crate) fn apply(self, up: bool) -> Option<(bool, f64)> {
        match (self, up) {
            (LocalOp::Sz, true) => Some((true, 0.5)),
            (LocalOp::Sz, false) => Some((false, -0.5)),
            (LocalOp::Sp, false) => Some((true, 1.0)),
            (LocalOp::Sp, true) => None,
            (LocalOp::Sm, true) => Some((false, 1.0)),
            (LocalOp::Sm, false) => None,
        }
    }
}

/// One product term `coeff * Op_{site_1} Op_{site_2} ...` (sites 1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTerm {
    pub coeff: f64,
    /// Factors on distinct sites, listed left to right as written.
    pub factors: Vec<(usize, LocalOp)>,
}

/// A Hermitian operator on `l` sites, stored as a sum of product terms.
///
/// Invariant: every site index lies in `1..=l`, no term repeats a site, and
/// terms with vanishing coefficient are omitted.  Hermiticity is guaranteed by
/// construction: `Sz`-only terms are self-adjoint and the builders always emit
/// `Sp`/`Sm` terms in conjugate pairs with equal real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTermList {
    l: usize,
    terms: Vec<OperatorTerm>,
}

impl OperatorTermList {
    /// Creates an empty (zero) operator on `l` sites.
    pub fn zero(l: usize) -> Self {
        Self { l, terms: Vec::new() }
    }

    /// Number of sites the operator acts on.
    pub fn num_sites(&self) -> usize {
        self.l
    }

    /// The product terms making up the operator.
    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    /// Adds `coeff * prod Op_site`, dropping exact zeros.
    ///
    /// # Panics
    /// If a site index is out of range or repeated within the term.
    pub fn push_term(&mut self, coeff: f64, factors: &[(usize, LocalOp)]) {
        assert!(coeff.is_finite(), "term coefficient must be finite");
        for (idx, &(site, _)) in factors.iter().enumerate() {
            assert!(
                (1..=self.l).contains(&site),
                "site {site} out of range 1..={}",
                self.l
            );
            assert!(
                factors[..idx].iter().all(|&(s, _)| s != site),
                "site {site} repeated within a term"
            );
        }
        if coeff != 0.0 {
            self.terms.push(OperatorTerm { coeff, factors: factors.to_vec() });
        }
    }

    /// Applies one term to a basis state, returning `(new_state, amplitude)`.
    ///
    /// The basis convention is bit `site-1` set ⇔ site up.  Returns `None`
    /// when any raising/lowering factor annihilates the state.
    pub fn apply_term(term: &OperatorTerm, state: u64) -> Option<(u64, f64)> {
        let mut out = state;
        let mut amp = term.coeff;
        // Factors act on distinct sites, so application order is immaterial.
        for &(site, op) in term.factors.iter().rev() {
            let bit = 1u64 << (site - 1);
            let (new_up, factor) = op.apply(out & bit != 0)?;
            if new_up {
                out |= bit;
            } else {
                out &= !bit;
            }
            amp *= factor;
        }
        Some((out, amp))
    }

    /// Dense matrix in the full `2^l` basis (tests and small systems only).
    ///
    /// The result is real symmetric for the lists built in this module.
    pub fn to_dense(&self) -> Result<ndarray::Array2<f64>, ModelError> {
        const MAX_DENSE_SITES: usize = 14;
        if self.l > MAX_DENSE_SITES {
            return Err(ModelError::DenseTooLarge { l: self.l, max: MAX_DENSE_SITES });
        }
        let dim = 1usize << self.l;
        let mut h = ndarray::Array2::<f64>::zeros((dim, dim));
        for term in &self.terms {
            for col in 0..dim as u64 {
                if let Some((row, amp)) = Self::apply_term(term, col) {
                    h[(row as usize, col as usize)] += amp;
                }
            }
        }
        Ok(h)
    }
}

/// Builds the open-boundary XXZ chain Hamiltonian for arbitrary `l >= 2`.
///
/// Emits, for each bond `i = 1..l-1`: `(j/2) S+_i S-_{i+1}`, `(j/2) S-_i
/// S+_{i+1}`, and (when `delta != 0`) `j*delta Sz_i Sz_{i+1}`.
pub fn xxz_terms(j: f64, delta: f64, l: usize) -> Result<OperatorTermList, ModelError> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(ModelError::InvalidExchange(j));
    }
    if !delta.is_finite() {
        return Err(ModelError::NonFiniteParameter { name: "delta", value: delta });
    }
    if l < 2 {
        return Err(ModelError::ChainTooShort(l));
    }
    let mut list = OperatorTermList::zero(l);
    for i in 1..l {
        list.push_term(0.5 * j, &[(i, LocalOp::Sp), (i + 1, LocalOp::Sm)]);
        list.push_term(0.5 * j, &[(i, LocalOp::Sm), (i + 1, LocalOp::Sp)]);
        list.push_term(j * delta, &[(i, LocalOp::Sz), (i + 1, LocalOp::Sz)]);
    }
    Ok(list)
}

/// Chain Hamiltonian for validated parameters (probe coupling not included).
pub fn build_xxz_terms(params: &ModelParams) -> OperatorTermList {
    params.validate().expect("invalid ModelParams");
    xxz_terms(params.j, params.delta, params.l).expect("validated params must build")
}

/// Branch Hamiltonian `H_± = H_chain ± (g/2) Sz_M` seen by the chain when the
/// qubit is in the corresponding `sigma_z` eigenstate.
pub fn build_branch_terms(params: &ModelParams, branch: BranchSign) -> OperatorTermList {
    let mut list = build_xxz_terms(params);
    list.push_term(branch.signum() * 0.5 * params.g, &[(params.m, LocalOp::Sz)]);
    list
}

/// Full qubit+chain Hamiltonian on `l + 1` sites, with the qubit stored as
/// site `l + 1`:  `H = H_chain + h_z Sz_Q + g Sz_M Sz_Q`  (using
/// `sigma_z = 2 Sz_Q`).  Used by the brute-force dephasing oracle.
pub fn qubit_chain_terms(params: &ModelParams) -> OperatorTermList {
    params.validate().expect("invalid ModelParams");
    let q = params.l + 1;
    let mut list = OperatorTermList::zero(q);
    for term in build_xxz_terms(params).terms() {
        list.push_term(term.coeff, &term.factors);
    }
    list.push_term(params.h_z, &[(q, LocalOp::Sz)]);
    list.push_term(params.g, &[(params.m, LocalOp::Sz), (q, LocalOp::Sz)]);
    list
}
