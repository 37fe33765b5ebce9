//! Matrix-product-state backend: DMRG ground search and TDVP time evolution.
//!
//! This is the large-chain counterpart of [`crate::exact`]: the same operator
//! term lists are compiled into matrix-product operators (MPOs), ground states
//! are found with a two-site DMRG sweep, and the two branch evolutions behind
//! the qubit coherence are integrated with the time-dependent variational
//! principle (TDVP).  Conventions shared with the dense backend:
//!
//! * sites are 1-based in public signatures, physical index `1` means spin up
//!   (matching bit `site-1` of the dense basis index),
//! * coherence traces carry the factorized-out qubit phase `e^{-i h_z t}` and
//!   start from `rho01(0) = 1/2`,
//! * entropies are von Neumann entropies in nats.
//!
//! An [`MpsState`] always satisfies the mixed-canonical invariant: every site
//! left of `center` is a left isometry, every site right of it is a right
//! isometry, and the center tensor carries the norm.  All public constructors
//! and methods preserve this.

use crate::exact::{DenseState, InitialState};
use crate::krylov::{self, KrylovError};
use crate::model::{
    build_branch_terms, build_xxz_terms, BranchSign, LocalOp, ModelError, ModelParams,
    OperatorTermList,
};
use crate::trace::{CoherenceTrace, CorrelationTrace, TimeGrid, TraceMeta};
use crate::C64;
use ndarray::{s, Array1, Array2, Array3, Array4, Array5};
use ndarray_linalg::{Norm, QR, SVD};
use thiserror::Error;

/// Errors from MPS/MPO construction, ground search, and time evolution.
#[derive(Debug, Error)]
pub enum MpsError {
    #[error("state pattern length {got} does not match chain length {expected}")]
    PatternLength { got: usize, expected: usize },
    #[error("chain lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bond index must lie in 1..={max}, got {bond}")]
    BadBond { bond: usize, max: usize },
    #[error("site index must lie in 1..={max}, got {site}")]
    BadSite { site: usize, max: usize },
    #[error("dense conversion limited to l <= {max}, got l = {l}")]
    DenseTooLarge { l: usize, max: usize },
    #[error("operator term spans non-adjacent sites {0} and {1}")]
    NonAdjacentTerm(usize, usize),
    #[error("operator term with {0} factors not supported (expected 1 or 2)")]
    UnsupportedTerm(usize),
    #[error("no total-Sz sector 2Sz = {two_sz} on {l} sites")]
    BadSector { two_sz: i32, l: usize },
    #[error("ground-state sweep did not converge: energy change {delta:e} after {sweeps} sweeps")]
    NotConverged { sweeps: usize, delta: f64 },
    #[error("time-evolution step {step}: {source}")]
    EvolveStep { step: usize, source: KrylovError },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<ndarray_linalg::error::LinalgError> for MpsError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        MpsError::Linalg(e.to_string())
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// 2x2 matrix of a single-site operator, indexed `[p_out][p_in]` with the
/// physical-index convention `1` = spin up (same as the dense bit basis).
fn local_matrix(op: LocalOp) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for p_in in 0..2 {
        if let Some((up, amp)) = op.apply(p_in == 1) {
            m[usize::from(up)][p_in] = amp;
        }
    }
    m
}

/// Conjugate transpose as an owned standard-layout matrix.
///
/// Built by explicit assignment into a fresh array: `mapv` on a transposed
/// view would return an F-order array, and `into_shape` silently regroups
/// F-order data column-major, which would corrupt every reshape downstream.
fn dagger(m: &Array2<C64>) -> Array2<C64> {
    let mt = m.t();
    let mut out = Array2::<C64>::zeros(mt.raw_dim());
    out.zip_mut_with(&mt, |o, z| *o = z.conj());
    out
}

/// Reshapes a site tensor into a matrix, checking the layout invariant.
fn view2(t: &Array3<C64>, rows: usize, cols: usize) -> ndarray::ArrayView2<'_, C64> {
    debug_assert!(t.is_standard_layout(), "site tensors must stay standard-layout");
    t.view().into_shape((rows, cols)).expect("standard-layout tensor")
}

/// LQ decomposition `m = L Q` with `Q Q^dag = I`, via QR of `m^dag`.
fn lq(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>), MpsError> {
    let (q2, r2) = dagger(m).qr()?;
    Ok((dagger(&r2), dagger(&q2)))
}

/// Splits `m` by SVD, keeping at most `chi_max` singular values and dropping
/// the smallest ones as long as the discarded weight (sum of squared singular
/// values over their total) stays below `cutoff`.
///
/// Returns `(u, s, vt, discarded_weight)`; the kept singular values are *not*
/// renormalized.
fn truncated_svd(
    m: &Array2<C64>,
    chi_max: usize,
    cutoff: f64,
) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>, f64), MpsError> {
    let (u, sv, vt) = m.svd(true, true)?;
    let u = u.expect("svd requested u");
    let vt = vt.expect("svd requested vt");
    let total: f64 = sv.iter().map(|x| x * x).sum();
    if total == 0.0 {
        // A zero matrix: keep a single (zero) channel to preserve shapes.
        return Ok((
            u.slice(s![.., ..1]).to_owned(),
            Array1::zeros(1),
            vt.slice(s![..1, ..]).to_owned(),
            0.0,
        ));
    }
    // Singular values arrive in descending order; absorb the tail.
    let mut keep = sv.len();
    let mut tail = 0.0;
    while keep > 1 {
        let grown = tail + sv[keep - 1] * sv[keep - 1];
        if grown > cutoff * total {
            break;
        }
        tail = grown;
        keep -= 1;
    }
    let keep = keep.min(chi_max.max(1));
    let discarded: f64 = sv.iter().skip(keep).map(|x| x * x).sum::<f64>() / total;
    Ok((
        u.slice(s![.., ..keep]).to_owned(),
        sv.slice(s![..keep]).to_owned(),
        vt.slice(s![..keep, ..]).to_owned(),
        discarded,
    ))
}

// ---------------------------------------------------------------------------
// MPS state
// ---------------------------------------------------------------------------

/// A matrix-product state in mixed-canonical form.
///
/// Site tensors have shape `(left_bond, 2, right_bond)` with the boundary
/// bonds of dimension one.  `center` names the orthogonality center; the state
/// norm is the Frobenius norm of that tensor.
#[derive(Debug, Clone)]
pub struct MpsState {
    tensors: Vec<Array3<C64>>,
    center: usize,
    truncation_log: Vec<f64>,
}

impl MpsState {
    /// Product state with `pattern[i] = true` meaning site `i+1` up.
    pub fn product_state(pattern: &[bool]) -> Self {
        assert!(!pattern.is_empty(), "chain must have at least one site");
        let tensors = pattern
            .iter()
            .map(|&up| {
                let mut t = Array3::zeros((1, 2, 1));
                t[(0, usize::from(up), 0)] = c(1.0);
                t
            })
            .collect();
        Self { tensors, center: 0, truncation_log: Vec::new() }
    }

    /// `(|up..up> + |down..down>)/sqrt(2)`, the ferromagnetic cat state.
    pub fn polarized_cat(l: usize) -> Self {
        let up = Self::product_state(&vec![true; l]);
        let down = Self::product_state(&vec![false; l]);
        let w = c(std::f64::consts::FRAC_1_SQRT_2);
        up.add(&down, w, w).expect("equal lengths")
    }

    pub fn num_sites(&self) -> usize {
        self.tensors.len()
    }

    /// Bond dimensions of the `l - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|t| t.dim().0).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Orthogonality-center site (0-based).
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensor(&self, i: usize) -> &Array3<C64> {
        &self.tensors[i]
    }

    /// State norm (Frobenius norm of the center tensor).
    pub fn norm(&self) -> f64 {
        self.tensors[self.center].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Scales the state to unit norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.tensors[self.center].mapv_inplace(|z| z / n);
        }
        n
    }

    /// Cumulative discarded weights of every truncation performed so far.
    pub fn truncation_log(&self) -> &[f64] {
        &self.truncation_log
    }

    /// Largest single discarded weight recorded so far.
    pub fn max_discarded_weight(&self) -> f64 {
        self.truncation_log.iter().copied().fold(0.0, f64::max)
    }

    /// Moves the center one site right via QR (exact, no truncation).
    fn move_right(&mut self) {
        let i = self.center;
        let (l, d, r) = self.tensors[i].dim();
        let m = view2(&self.tensors[i], l * d, r).to_owned();
        let (q, rm) = m.qr().expect("QR of a finite matrix");
        let k = q.dim().1;
        self.tensors[i] = q.into_shape((l, d, k)).expect("shape");
        let (l2, d2, r2) = self.tensors[i + 1].dim();
        let nb = rm.dot(&view2(&self.tensors[i + 1], l2, d2 * r2));
        self.tensors[i + 1] = nb.into_shape((k, d2, r2)).expect("shape");
        self.center = i + 1;
    }

    /// Moves the center one site left via LQ (exact, no truncation).
    fn move_left(&mut self) {
        let i = self.center;
        let (l, d, r) = self.tensors[i].dim();
        let m = view2(&self.tensors[i], l, d * r).to_owned();
        let (lm, q) = lq(&m).expect("LQ of a finite matrix");
        let k = q.dim().0;
        self.tensors[i] = q.into_shape((k, d, r)).expect("shape");
        let (l2, d2, r2) = self.tensors[i - 1].dim();
        let na = view2(&self.tensors[i - 1], l2 * d2, r2).dot(&lm);
        self.tensors[i - 1] = na.into_shape((l2, d2, k)).expect("shape");
        self.center = i - 1;
    }

    /// Moves the orthogonality center to `site` (0-based).
    pub fn move_center_to(&mut self, site: usize) {
        assert!(site < self.num_sites(), "center out of range");
        while self.center < site {
            self.move_right();
        }
        while self.center > site {
            self.move_left();
        }
    }

    /// Re-establishes the canonical invariant from arbitrary tensors
    /// (full QR sweep right, then LQ sweep back; center ends at site 0).
    fn canonicalize(&mut self) {
        self.center = 0;
        for _ in 0..self.num_sites().saturating_sub(1) {
            self.move_right();
        }
        for _ in 0..self.num_sites().saturating_sub(1) {
            self.move_left();
        }
    }

    /// `<self|other>` (conjugate-linear in `self`).
    pub fn overlap(&self, other: &Self) -> C64 {
        assert_eq!(self.num_sites(), other.num_sites(), "length mismatch");
        let mut e = Array2::<C64>::ones((1, 1));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let (la, d, ra) = a.dim();
            let (lb, db, rb) = b.dim();
            debug_assert_eq!(d, db);
            debug_assert_eq!(e.dim(), (la, lb));
            let bm = view2(b, lb, db * rb);
            let t = e.dot(&bm).into_shape((la * d, rb)).expect("shape");
            e = dagger(&view2(a, la * d, ra).to_owned()).dot(&t);
        }
        e[(0, 0)]
    }

    /// Applies a single-site operator at `site` (1-based), keeping the state
    /// canonical with the center at that site.  The state is generally no
    /// longer normalized afterwards.
    pub fn apply_site_op(&mut self, site: usize, op: LocalOp) -> Result<(), MpsError> {
        let l = self.num_sites();
        if site < 1 || site > l {
            return Err(MpsError::BadSite { site, max: l });
        }
        self.move_center_to(site - 1);
        let m = local_matrix(op);
        let t = &self.tensors[site - 1];
        let mut out = Array3::<C64>::zeros(t.dim());
        for p_out in 0..2 {
            for p_in in 0..2 {
                if m[p_out][p_in] != 0.0 {
                    out.slice_mut(s![.., p_out, ..])
                        .scaled_add(c(m[p_out][p_in]), &t.slice(s![.., p_in, ..]));
                }
            }
        }
        self.tensors[site - 1] = out;
        Ok(())
    }

    /// The state with every spin flipped (global product of `2 Sx`).
    pub fn spin_flipped(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            // `as_standard_layout` keeps later reshapes (which require
            // contiguous standard layout) valid on the reversed axis.
            .map(|t| t.slice(s![.., ..;-1, ..]).as_standard_layout().into_owned())
            .collect();
        Self { tensors, center: self.center, truncation_log: self.truncation_log.clone() }
    }

    /// `ca * self + cb * other` as a new canonical (unnormalized) state.
    ///
    /// Bond dimensions add; follow with [`MpsState::compress`] when the sum
    /// has redundant Schmidt channels.
    pub fn add(&self, other: &Self, ca: C64, cb: C64) -> Result<Self, MpsError> {
        let l = self.num_sites();
        if l != other.num_sites() {
            return Err(MpsError::LengthMismatch(l, other.num_sites()));
        }
        if l == 1 {
            let t = self.tensors[0].mapv(|z| ca * z) + other.tensors[0].mapv(|z| cb * z);
            return Ok(Self { tensors: vec![t], center: 0, truncation_log: Vec::new() });
        }
        let mut tensors = Vec::with_capacity(l);
        for i in 0..l {
            let a = &self.tensors[i];
            let b = &other.tensors[i];
            let (la, d, ra) = a.dim();
            let (lb, _, rb) = b.dim();
            let t = if i == 0 {
                // Coefficients enter through the first site's blocks.
                let mut t = Array3::<C64>::zeros((1, d, ra + rb));
                t.slice_mut(s![.., .., ..ra]).assign(&a.mapv(|z| ca * z));
                t.slice_mut(s![.., .., ra..]).assign(&b.mapv(|z| cb * z));
                t
            } else if i == l - 1 {
                let mut t = Array3::<C64>::zeros((la + lb, d, 1));
                t.slice_mut(s![..la, .., ..]).assign(a);
                t.slice_mut(s![la.., .., ..]).assign(b);
                t
            } else {
                let mut t = Array3::<C64>::zeros((la + lb, d, ra + rb));
                t.slice_mut(s![..la, .., ..ra]).assign(a);
                t.slice_mut(s![la.., .., ra..]).assign(b);
                t
            };
            tensors.push(t);
        }
        let mut out = Self { tensors, center: 0, truncation_log: Vec::new() };
        out.canonicalize();
        Ok(out)
    }

    /// Truncates every bond to at most `chi_max` channels with discarded
    /// weight at most `cutoff` per bond.  Returns the total discarded weight
    /// and leaves the center at the last site.
    pub fn compress(&mut self, chi_max: usize, cutoff: f64) -> Result<f64, MpsError> {
        self.move_center_to(0);
        let l = self.num_sites();
        let mut total = 0.0;
        for i in 0..l.saturating_sub(1) {
            let (ld, d, r) = self.tensors[i].dim();
            let m = view2(&self.tensors[i], ld * d, r).to_owned();
            let (u, sv, vt, discarded) = truncated_svd(&m, chi_max, cutoff)?;
            total += discarded;
            if discarded > 0.0 {
                self.truncation_log.push(discarded);
            }
            let k = sv.len();
            self.tensors[i] = u.into_shape((ld, d, k)).expect("shape");
            let mut carry = vt;
            for (mut row, s) in carry.outer_iter_mut().zip(sv.iter()) {
                row.mapv_inplace(|z| z * *s);
            }
            let (l2, d2, r2) = self.tensors[i + 1].dim();
            self.tensors[i + 1] = carry
                .dot(&view2(&self.tensors[i + 1], l2, d2 * r2))
                .into_shape((k, d2, r2))
                .expect("shape");
            self.center = i + 1;
        }
        Ok(total)
    }

    /// Von Neumann entanglement entropy (nats) across `bond` (cut between
    /// sites `bond` and `bond + 1`, 1-based).
    pub fn entanglement_entropy(&self, bond: usize) -> Result<f64, MpsError> {
        let l = self.num_sites();
        if bond < 1 || bond >= l {
            return Err(MpsError::BadBond { bond, max: l.saturating_sub(1) });
        }
        let mut st = self.clone();
        st.move_center_to(bond - 1);
        let (ld, d, r) = st.tensors[bond - 1].dim();
        let m = view2(&st.tensors[bond - 1], ld * d, r).to_owned();
        let (_, sv, _) = m.svd(false, false)?;
        let total: f64 = sv.iter().map(|x| x * x).sum();
        let mut entropy = 0.0;
        if total > 0.0 {
            for x in sv.iter() {
                let p = x * x / total;
                if p > 1e-16 {
                    entropy -= p * p.ln();
                }
            }
        }
        Ok(entropy)
    }

    /// Expands into a dense state vector (small chains only).
    pub fn to_dense(&self) -> Result<DenseState, MpsError> {
        const MAX_DENSE_SITES: usize = 16;
        let l = self.num_sites();
        if l > MAX_DENSE_SITES {
            return Err(MpsError::DenseTooLarge { l, max: MAX_DENSE_SITES });
        }
        // Accumulate (basis_states x bond) amplitudes site by site; site i
        // contributes bit i of the basis index.
        let mut v = Array2::<C64>::ones((1, 1));
        for t in &self.tensors {
            let (lb, d, rb) = t.dim();
            let n = v.dim().0;
            let tm = view2(t, lb, d * rb);
            let prod = v.dot(&tm).into_shape((n, d, rb)).expect("shape");
            // New index layout: state' = state + p * n  (site bit above old bits).
            let mut next = Array2::<C64>::zeros((2 * n, rb));
            for p in 0..d {
                next.slice_mut(s![p * n..(p + 1) * n, ..])
                    .assign(&prod.slice(s![.., p, ..]));
            }
            v = next;
        }
        let amps = v.column(0).to_vec();
        Ok(DenseState::new(l, amps).expect("length matches"))
    }

    /// Largest deviation from the canonical-form isometry conditions
    /// (diagnostic; exact zero is not expected, ~1e-14 is healthy).
    pub fn max_canonical_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, t) in self.tensors.iter().enumerate() {
            let (l, d, r) = t.dim();
            if i < self.center {
                let m = view2(t, l * d, r).to_owned();
                let g = dagger(&m).dot(&m) - Array2::<C64>::eye(r);
                worst = worst.max(g.norm_max());
            } else if i > self.center {
                let m = view2(t, l, d * r).to_owned();
                let g = m.dot(&dagger(&m)) - Array2::<C64>::eye(l);
                worst = worst.max(g.norm_max());
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// MPO
// ---------------------------------------------------------------------------

/// Matrix-product operator compiled from an [`OperatorTermList`].
///
/// Site tensors have shape `(w_left, 2, 2, w_right)` indexed
/// `(w_l, p_out, p_in, w_r)`; the uniform internal bond dimension is five
/// (idle, one carrier channel per operator type, done).
#[derive(Debug, Clone)]
pub struct Mpo {
    tensors: Vec<Array4<C64>>,
}

/// Finite-state-machine states of the MPO bond index.
const READY: usize = 0;
const DONE: usize = 4;

fn carrier_channel(op: LocalOp) -> usize {
    match op {
        LocalOp::Sp => 1,
        LocalOp::Sm => 2,
        LocalOp::Sz => 3,
    }
}

impl Mpo {
    /// Compiles a term list with single-site and adjacent two-site terms.
    pub fn from_terms(op: &OperatorTermList) -> Result<Self, MpsError> {
        let l = op.num_sites();
        assert!(l >= 1, "operator must act on at least one site");
        let w = 5usize;
        let mut tensors: Vec<Array4<C64>> = (0..l)
            .map(|i| {
                let wl = if i == 0 { 1 } else { w };
                let wr = if i == l - 1 { 1 } else { w };
                Array4::zeros((wl, 2, 2, wr))
            })
            .collect();

        // Map a logical FSM state to the stored bond index at each edge: the
        // left edge only exposes READY, the right edge only DONE.
        let row = |i: usize, state: usize| if i == 0 { 0 } else { state };
        let col = |i: usize, state: usize| if i == l - 1 { 0 } else { state };

        let mut add = |i: usize, from: usize, to: usize, m: [[f64; 2]; 2], coeff: f64| {
            let (r, cidx) = (row(i, from), col(i, to));
            for p_out in 0..2 {
                for p_in in 0..2 {
                    tensors[i][(r, p_out, p_in, cidx)] += c(coeff * m[p_out][p_in]);
                }
            }
        };

        let eye = [[1.0, 0.0], [0.0, 1.0]];
        for i in 0..l {
            if i < l - 1 {
                add(i, READY, READY, eye, 1.0);
            }
            if i > 0 && l > 1 {
                add(i, DONE, DONE, eye, 1.0);
            }
        }

        for term in op.terms() {
            let mut factors = term.factors.clone();
            factors.sort_by_key(|&(site, _)| site);
            match factors.as_slice() {
                &[(site, op1)] => {
                    add(site - 1, READY, DONE, local_matrix(op1), term.coeff);
                }
                &[(s1, op1), (s2, op2)] => {
                    if s2 != s1 + 1 {
                        return Err(MpsError::NonAdjacentTerm(s1, s2));
                    }
                    let ch = carrier_channel(op1);
                    add(s1 - 1, READY, ch, local_matrix(op1), 1.0);
                    add(s2 - 1, ch, DONE, local_matrix(op2), term.coeff);
                }
                other => return Err(MpsError::UnsupportedTerm(other.len())),
            }
        }
        Ok(Self { tensors })
    }

    /// `lambda * (Sz_total - target)^2` as a bond-dimension-3 operator.
    ///
    /// Expanding the square gives on-site pieces `Sz_i^2 - 2*target*Sz_i`
    /// (plus an even share of `target^2`) and cross pieces `2*Sz_i*Sz_j` for
    /// `i < j`, which a three-state machine (idle, one `Sz` placed, done)
    /// compiles exactly.  Adding this to a Hamiltonian makes the requested
    /// magnetization sector the energetic minimum, so a variational sweep
    /// cannot drift out of it.
    pub fn magnetization_penalty(l: usize, target: f64, lambda: f64) -> Self {
        assert!(l >= 1);
        let (idle, carry, done) = (0usize, 1usize, 2usize);
        let w = 3usize;
        let mut tensors: Vec<Array4<C64>> = (0..l)
            .map(|i| {
                let wl = if i == 0 { 1 } else { w };
                let wr = if i == l - 1 { 1 } else { w };
                Array4::zeros((wl, 2, 2, wr))
            })
            .collect();
        let row = |i: usize, state: usize| if i == 0 { 0 } else { state };
        let col = |i: usize, state: usize| if i == l - 1 { 0 } else { state };
        let mut add = |i: usize, from: usize, to: usize, m: [[f64; 2]; 2], coeff: f64| {
            let (r, cidx) = (row(i, from), col(i, to));
            for p_out in 0..2 {
                for p_in in 0..2 {
                    tensors[i][(r, p_out, p_in, cidx)] += c(coeff * m[p_out][p_in]);
                }
            }
        };
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        let sz = local_matrix(LocalOp::Sz);
        // Sz^2 = I/4 on spin-1/2.
        for i in 0..l {
            if i < l - 1 {
                add(i, idle, idle, eye, 1.0);
            }
            if i > 0 && l > 1 {
                add(i, done, done, eye, 1.0);
            }
            // On-site completion: lambda * (1/4 + target^2 / l) * I
            // - 2 * lambda * target * Sz.
            add(i, idle, done, eye, lambda * (0.25 + target * target / l as f64));
            add(i, idle, done, sz, -2.0 * lambda * target);
            if i < l - 1 {
                add(i, idle, carry, sz, 1.0);
            }
            if i > 0 && l > 1 {
                if i < l - 1 {
                    add(i, carry, carry, eye, 1.0);
                }
                add(i, carry, done, sz, 2.0 * lambda);
            }
        }
        Self { tensors }
    }

    /// Operator sum, realized as a direct sum of the internal bonds.
    pub fn add(&self, other: &Mpo) -> Result<Mpo, MpsError> {
        let l = self.num_sites();
        if l != other.num_sites() {
            return Err(MpsError::LengthMismatch(l, other.num_sites()));
        }
        let mut tensors = Vec::with_capacity(l);
        for i in 0..l {
            let a = &self.tensors[i];
            let b = &other.tensors[i];
            let (al, _, _, ar) = a.dim();
            let (bl, _, _, br) = b.dim();
            let t = if l == 1 {
                a + b
            } else if i == 0 {
                let mut t = Array4::<C64>::zeros((1, 2, 2, ar + br));
                t.slice_mut(s![.., .., .., ..ar]).assign(a);
                t.slice_mut(s![.., .., .., ar..]).assign(b);
                t
            } else if i == l - 1 {
                let mut t = Array4::<C64>::zeros((al + bl, 2, 2, 1));
                t.slice_mut(s![..al, .., .., ..]).assign(a);
                t.slice_mut(s![al.., .., .., ..]).assign(b);
                t
            } else {
                let mut t = Array4::<C64>::zeros((al + bl, 2, 2, ar + br));
                t.slice_mut(s![..al, .., .., ..ar]).assign(a);
                t.slice_mut(s![al.., .., .., ar..]).assign(b);
                t
            };
            tensors.push(t);
        }
        Ok(Mpo { tensors })
    }

    pub fn num_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensor(&self, i: usize) -> &Array4<C64> {
        &self.tensors[i]
    }

    /// Dense matrix in the full `2^l` basis (tests only).
    pub fn to_dense(&self) -> Result<Array2<C64>, MpsError> {
        const MAX_DENSE_SITES: usize = 10;
        let l = self.num_sites();
        if l > MAX_DENSE_SITES {
            return Err(MpsError::DenseTooLarge { l, max: MAX_DENSE_SITES });
        }
        let mut t = Array3::<C64>::ones((1, 1, 1));
        for (i, w) in self.tensors.iter().enumerate() {
            let (wl, _, _, wr) = w.dim();
            let n = 1usize << i;
            let mut next = Array3::<C64>::zeros((2 * n, 2 * n, wr));
            for wo in 0..wr {
                for p_out in 0..2 {
                    for p_in in 0..2 {
                        for wi in 0..wl {
                            let coeff = w[(wi, p_out, p_in, wo)];
                            if coeff != c(0.0) {
                                next.slice_mut(s![
                                    p_out * n..(p_out + 1) * n,
                                    p_in * n..(p_in + 1) * n,
                                    wo
                                ])
                                .scaled_add(coeff, &t.slice(s![.., .., wi]));
                            }
                        }
                    }
                }
            }
            t = next;
        }
        let dim = 1usize << l;
        Ok(t.index_axis(ndarray::Axis(2), 0)
            .to_owned()
            .into_shape((dim, dim))
            .expect("shape"))
    }
}

impl MpsState {
    /// `<self| mpo |self>` via the standard three-layer transfer contraction.
    pub fn expect_mpo(&self, mpo: &Mpo) -> C64 {
        assert_eq!(self.num_sites(), mpo.num_sites(), "length mismatch");
        let mut e = Array3::<C64>::ones((1, 1, 1));
        for (t, w) in self.tensors.iter().zip(&mpo.tensors) {
            e = env_step_left(&e, w, t, t);
        }
        e[(0, 0, 0)]
    }
}

// ---------------------------------------------------------------------------
// Environment contractions (shared by expectation values, DMRG, and TDVP)
// ---------------------------------------------------------------------------

/// Absorbs one site into a left environment.
///
/// `e` has shape `(bra_bond, w, ket_bond)` for the block left of the site;
/// the result covers the block including the site.
fn env_step_left(
    e: &Array3<C64>,
    w: &Array4<C64>,
    bra: &Array3<C64>,
    ket: &Array3<C64>,
) -> Array3<C64> {
    let (a, wl, b) = e.dim();
    let (bk, d, bp) = ket.dim();
    let (ab, db, ap) = bra.dim();
    let (wli, d_out, d_in, wr) = w.dim();
    debug_assert_eq!((a, b, wl), (ab, bk, wli));
    debug_assert_eq!((d, db), (d_in, d_out));

    // T[a, wl, si, b'] = sum_b E[a, wl, b] ket[b, si, b']
    debug_assert!(e.is_standard_layout());
    let em = e.view().into_shape((a * wl, b)).expect("standard-layout env");
    let t = em.dot(&view2(ket, b, d * bp)).into_shape((a, wl, d, bp)).expect("shape");

    // U[a, so, w', b'] = sum_{wl, si} W[wl, so, si, w'] T[a, wl, si, b']
    let mut u = Array4::<C64>::zeros((a, d_out, wr, bp));
    for wi in 0..wl {
        for so in 0..d_out {
            for si in 0..d_in {
                for wo in 0..wr {
                    let coeff = w[(wi, so, si, wo)];
                    if coeff != c(0.0) {
                        u.slice_mut(s![.., so, wo, ..])
                            .scaled_add(coeff, &t.slice(s![.., wi, si, ..]));
                    }
                }
            }
        }
    }

    // E'[a', w', b'] = sum_{a, so} conj(bra[a, so, a']) U[a, so, w', b']
    let um = u.into_shape((a * d_out, wr * bp)).expect("shape");
    dagger(&view2(bra, a * d_out, ap).to_owned())
        .dot(&um)
        .into_shape((ap, wr, bp))
        .expect("shape")
}

/// Absorbs one site into a right environment.
///
/// `e` has shape `(bra_bond, w, ket_bond)` for the block right of the site;
/// the result covers the block including the site.
fn env_step_right(
    e: &Array3<C64>,
    w: &Array4<C64>,
    bra: &Array3<C64>,
    ket: &Array3<C64>,
) -> Array3<C64> {
    let (ap, wrr, bp) = e.dim();
    let (bk, d, bkr) = ket.dim();
    let (ab, db, abr) = bra.dim();
    let (wl, d_out, d_in, wr) = w.dim();
    debug_assert_eq!((ap, bp, wrr), (abr, bkr, wr));
    debug_assert_eq!((d, db), (d_in, d_out));

    // T[b, si, a', w'] = sum_{b'} ket[b, si, b'] E[a', w', b']
    let km = view2(ket, bk * d, bkr);
    let ep = e
        .view()
        .permuted_axes([2, 0, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape((bp, ap * wrr))
        .expect("shape");
    let t = km.dot(&ep).into_shape((bk, d, ap, wrr)).expect("shape");

    // U[b, wl, so, a'] = sum_{si, w'} W[wl, so, si, w'] T[b, si, a', w']
    let mut u = Array4::<C64>::zeros((bk, wl, d_out, ap));
    for wi in 0..wl {
        for so in 0..d_out {
            for si in 0..d_in {
                for wo in 0..wr {
                    let coeff = w[(wi, so, si, wo)];
                    if coeff != c(0.0) {
                        u.slice_mut(s![.., wi, so, ..])
                            .scaled_add(coeff, &t.slice(s![.., si, .., wo]));
                    }
                }
            }
        }
    }

    // E'[a, wl, b] = sum_{so, a'} conj(bra[a, so, a']) U[b, wl, so, a']
    let up = u
        .permuted_axes([2, 3, 1, 0])
        .as_standard_layout()
        .into_owned()
        .into_shape((d_out * ap, wl * bk))
        .expect("shape");
    let bm = view2(bra, ab, db * abr);
    let mut bc = Array2::<C64>::zeros((ab, db * abr));
    bc.zip_mut_with(&bm, |o, z| *o = z.conj());
    bc.dot(&up).into_shape((ab, wl, bk)).expect("shape")
}

// ---------------------------------------------------------------------------
// Effective Hamiltonians
// ---------------------------------------------------------------------------

/// Two-site effective Hamiltonian `LE . W_i . W_{i+1} . RE` acting on the
/// flattened tensor of sites `(i, i+1)` with shape `(bl, 2, 2, br)`.
struct TwoSiteHeff<'a> {
    le: &'a Array3<C64>,
    w1: &'a Array4<C64>,
    w2: &'a Array4<C64>,
    re: &'a Array3<C64>,
}

impl<'a> TwoSiteHeff<'a> {
    fn dims(&self) -> (usize, usize, usize, usize) {
        let (_, _, bl) = self.le.dim();
        let (_, _, d1, _) = self.w1.dim();
        let (_, _, d2, _) = self.w2.dim();
        let (_, _, br) = self.re.dim();
        (bl, d1, d2, br)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (al, w0, bl) = self.le.dim();
        let (_, d1o, d1i, w1d) = self.w1.dim();
        let (_, d2o, d2i, w2d) = self.w2.dim();
        let (ar, _, br) = self.re.dim();
        debug_assert_eq!(x.len(), bl * d1i * d2i * br);

        // T1[a, w0, si1, si2, br] = sum_b LE[a, w0, b] x[b, si1, si2, br]
        let lem = self.le.view().into_shape((al * w0, bl)).expect("standard env");
        let xm = ndarray::ArrayView2::from_shape((bl, d1i * d2i * br), x).expect("x shape");
        let t1 = lem
            .dot(&xm)
            .into_shape((al, w0, d1i, d2i, br))
            .expect("shape");

        // T2[a, so1, w1, si2, br] = sum_{w0, si1} W1[w0, so1, si1, w1] T1
        let mut t2 = Array5::<C64>::zeros((al, d1o, w1d, d2i, br));
        for w in 0..w0 {
            for so in 0..d1o {
                for si in 0..d1i {
                    for wn in 0..w1d {
                        let coeff = self.w1[(w, so, si, wn)];
                        if coeff != c(0.0) {
                            t2.slice_mut(s![.., so, wn, .., ..])
                                .scaled_add(coeff, &t1.slice(s![.., w, si, .., ..]));
                        }
                    }
                }
            }
        }

        // T3[a, so1, so2, w2, br] = sum_{w1, si2} W2[w1, so2, si2, w2] T2
        let mut t3 = Array5::<C64>::zeros((al, d1o, d2o, w2d, br));
        for w in 0..w1d {
            for so in 0..d2o {
                for si in 0..d2i {
                    for wn in 0..w2d {
                        let coeff = self.w2[(w, so, si, wn)];
                        if coeff != c(0.0) {
                            t3.slice_mut(s![.., .., so, wn, ..])
                                .scaled_add(coeff, &t2.slice(s![.., .., w, si, ..]));
                        }
                    }
                }
            }
        }

        // y[a, so1, so2, ar] = sum_{w2, br} T3[a, so1, so2, w2, br] RE[ar, w2, br]
        let t3m = t3.into_shape((al * d1o * d2o, w2d * br)).expect("shape");
        let rem = self.re.view().into_shape((ar, w2d * br)).expect("standard env");
        let out = t3m.dot(&rem.t());
        y.copy_from_slice(out.as_slice().expect("standard result"));
    }
}

/// One-site effective Hamiltonian `LE . W_i . RE` on shape `(bl, 2, br)`.
struct OneSiteHeff<'a> {
    le: &'a Array3<C64>,
    w: &'a Array4<C64>,
    re: &'a Array3<C64>,
}

impl<'a> OneSiteHeff<'a> {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (al, w0, bl) = self.le.dim();
        let (_, d_out, d_in, w1d) = self.w.dim();
        let (ar, _, br) = self.re.dim();
        debug_assert_eq!(x.len(), bl * d_in * br);

        let lem = self.le.view().into_shape((al * w0, bl)).expect("standard env");
        let xm = ndarray::ArrayView2::from_shape((bl, d_in * br), x).expect("x shape");
        let t1 = lem.dot(&xm).into_shape((al, w0, d_in, br)).expect("shape");

        let mut t2 = Array4::<C64>::zeros((al, d_out, w1d, br));
        for w in 0..w0 {
            for so in 0..d_out {
                for si in 0..d_in {
                    for wn in 0..w1d {
                        let coeff = self.w[(w, so, si, wn)];
                        if coeff != c(0.0) {
                            t2.slice_mut(s![.., so, wn, ..])
                                .scaled_add(coeff, &t1.slice(s![.., w, si, ..]));
                        }
                    }
                }
            }
        }

        let t2m = t2.into_shape((al * d_out, w1d * br)).expect("shape");
        let rem = self.re.view().into_shape((ar, w1d * br)).expect("standard env");
        let out = t2m.dot(&rem.t());
        y.copy_from_slice(out.as_slice().expect("standard result"));
    }
}

/// Zero-site (bond) effective Hamiltonian `LE . RE` on shape `(bl, br)`.
struct BondHeff<'a> {
    le: &'a Array3<C64>,
    re: &'a Array3<C64>,
}

impl<'a> BondHeff<'a> {
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let (al, w0, bl) = self.le.dim();
        let (ar, _, br) = self.re.dim();
        debug_assert_eq!(x.len(), bl * br);
        let xm = ndarray::ArrayView2::from_shape((bl, br), x).expect("x shape");
        let mut out = Array2::<C64>::zeros((al, ar));
        for w in 0..w0 {
            let lw = self.le.index_axis(ndarray::Axis(1), w);
            let rw = self.re.index_axis(ndarray::Axis(1), w);
            out = out + lw.dot(&xm).dot(&rw.t());
        }
        y.copy_from_slice(out.as_slice().expect("standard result"));
    }
}

// ---------------------------------------------------------------------------
// DMRG ground search
// ---------------------------------------------------------------------------

/// Tuning knobs of the two-site DMRG ground search.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DmrgConfig {
    /// Largest bond dimension kept at any cut.
    pub chi_max: usize,
    /// Per-bond discarded-weight budget for truncations.
    pub cutoff: f64,
    /// Hard cap on full (right+left) sweeps.
    pub max_sweeps: usize,
    /// Convergence threshold on the relative energy change per sweep.
    pub energy_tol: f64,
    /// Residual tolerance of the local Lanczos solves.
    pub local_tol: f64,
    /// Krylov basis cap of the local Lanczos solves.
    pub local_max_basis: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            chi_max: 128,
            cutoff: 1e-10,
            max_sweeps: 40,
            energy_tol: 1e-10,
            local_tol: 1e-11,
            local_max_basis: 30,
        }
    }
}

/// Outcome of a DMRG ground search.
#[derive(Debug, Clone)]
pub struct DmrgResult {
    /// Normalized ground-state candidate, center at site 0.
    pub state: MpsState,
    /// Variational energy of the final sweep.
    pub energy: f64,
    /// Full sweeps performed.
    pub sweeps: usize,
    /// Energy after each full sweep.
    pub energy_history: Vec<f64>,
    /// Largest discarded weight of any truncation during the run.
    pub max_discarded_weight: f64,
}

/// Splits an optimized two-site tensor, truncating the shared bond.
///
/// Returns the two site tensors and the discarded weight; kept singular
/// values are renormalized so the state stays normalized.  For
/// `absorb_right = true` the singular values go into the right tensor
/// (center moves right), otherwise into the left one.
fn split_two_site(
    theta: &[C64],
    dims: (usize, usize, usize, usize),
    chi_max: usize,
    cutoff: f64,
    absorb_right: bool,
) -> Result<(Array3<C64>, Array3<C64>, f64), MpsError> {
    let (bl, d1, d2, br) = dims;
    let m = ndarray::ArrayView2::from_shape((bl * d1, d2 * br), theta)
        .expect("theta shape")
        .to_owned();
    let (u, mut sv, vt, discarded) = truncated_svd(&m, chi_max, cutoff)?;
    let k = sv.len();
    let snorm = sv.iter().map(|x| x * x).sum::<f64>().sqrt();
    if snorm > 0.0 {
        sv.mapv_inplace(|x| x / snorm);
    }
    let (mut left, mut right) = (u, vt);
    if absorb_right {
        for (mut row, s) in right.outer_iter_mut().zip(sv.iter()) {
            row.mapv_inplace(|z| z * *s);
        }
    } else {
        for (mut col, s) in left.axis_iter_mut(ndarray::Axis(1)).zip(sv.iter()) {
            col.mapv_inplace(|z| z * *s);
        }
    }
    Ok((
        left.into_shape((bl, d1, k)).expect("shape"),
        right.into_shape((k, d2, br)).expect("shape"),
        discarded,
    ))
}

/// Two-site DMRG ground search for `mpo`, warm-started from `init`.
///
/// The local eigenproblems start from the current tensors, so the search
/// stays in the total-`Sz` sector of the initial state whenever the MPO
/// conserves it.  Converges when the energy change over a full sweep drops
/// below `cfg.energy_tol` (relative); errors out at `cfg.max_sweeps`.
pub fn dmrg_ground_state(
    mpo: &Mpo,
    init: &MpsState,
    cfg: &DmrgConfig,
) -> Result<DmrgResult, MpsError> {
    let l = init.num_sites();
    assert_eq!(l, mpo.num_sites(), "state/operator length mismatch");
    assert!(l >= 2, "sweeping needs at least two sites");

    let mut st = init.clone();
    st.move_center_to(0);
    st.normalize();

    let ones = || Array3::<C64>::ones((1, 1, 1));
    // renv[i] covers sites > i; lenv[i] covers sites < i.
    let mut renv: Vec<Array3<C64>> = vec![ones(); l];
    for i in (0..l - 1).rev() {
        renv[i] = env_step_right(&renv[i + 1], mpo.tensor(i + 1), st.tensor(i + 1), st.tensor(i + 1));
    }
    let mut lenv: Vec<Array3<C64>> = vec![ones(); l];

    let mut history: Vec<f64> = Vec::new();
    let mut max_discarded = 0.0f64;

    for sweep in 1..=cfg.max_sweeps {
        // Left-to-right half sweep.
        for i in 0..l - 1 {
            let heff = TwoSiteHeff {
                le: &lenv[i],
                w1: mpo.tensor(i),
                w2: mpo.tensor(i + 1),
                re: &renv[i + 1],
            };
            let dims = heff.dims();
            let theta = two_site_tensor(&st, i);
            let solve = krylov::lowest_eigenpair_hermitian(
                |x, y| heff.apply(x, y),
                &theta,
                cfg.local_tol,
                cfg.local_max_basis,
            )?;
            let (a, b, discarded) =
                split_two_site(&solve.eigenvector, dims, cfg.chi_max, cfg.cutoff, true)?;
            max_discarded = max_discarded.max(discarded);
            st.tensors[i] = a;
            st.tensors[i + 1] = b;
            st.center = i + 1;
            lenv[i + 1] = env_step_left(&lenv[i], mpo.tensor(i), st.tensor(i), st.tensor(i));
        }

        // Right-to-left half sweep; the last solve (bond 0) provides the
        // sweep's variational energy.
        let mut sweep_energy = f64::NAN;
        for i in (0..l - 1).rev() {
            let heff = TwoSiteHeff {
                le: &lenv[i],
                w1: mpo.tensor(i),
                w2: mpo.tensor(i + 1),
                re: &renv[i + 1],
            };
            let dims = heff.dims();
            let theta = two_site_tensor(&st, i);
            let solve = krylov::lowest_eigenpair_hermitian(
                |x, y| heff.apply(x, y),
                &theta,
                cfg.local_tol,
                cfg.local_max_basis,
            )?;
            let (a, b, discarded) =
                split_two_site(&solve.eigenvector, dims, cfg.chi_max, cfg.cutoff, false)?;
            max_discarded = max_discarded.max(discarded);
            st.tensors[i] = a;
            st.tensors[i + 1] = b;
            st.center = i;
            renv[i] = env_step_right(&renv[i + 1], mpo.tensor(i + 1), st.tensor(i + 1), st.tensor(i + 1));
            sweep_energy = solve.eigenvalue;
        }
        history.push(sweep_energy);

        if sweep >= 2 {
            let prev = history[sweep - 2];
            if (prev - sweep_energy).abs() <= cfg.energy_tol * sweep_energy.abs().max(1.0) {
                st.truncation_log.push(max_discarded);
                return Ok(DmrgResult {
                    state: st,
                    energy: sweep_energy,
                    sweeps: sweep,
                    energy_history: history,
                    max_discarded_weight: max_discarded,
                });
            }
        }
    }
    let delta = match history.as_slice() {
        [.., a, b] => (a - b).abs(),
        _ => f64::NAN,
    };
    Err(MpsError::NotConverged { sweeps: cfg.max_sweeps, delta })
}

/// Contracts the tensors of sites `(i, i+1)` into a flat two-site vector.
fn two_site_tensor(st: &MpsState, i: usize) -> Vec<C64> {
    let (bl, d1, r) = st.tensors[i].dim();
    let (_, d2, br) = st.tensors[i + 1].dim();
    let a = view2(&st.tensors[i], bl * d1, r);
    let b = view2(&st.tensors[i + 1], r, d2 * br);
    a.dot(&b).into_raw_vec()
}

/// Product pattern with `n_up` up spins spread as evenly as possible.
fn balanced_pattern(l: usize, n_up: usize) -> Vec<bool> {
    assert!(n_up <= l);
    let mut pattern = vec![false; l];
    let mut acc = 0usize;
    for slot in pattern.iter_mut() {
        acc += n_up;
        if acc >= l {
            acc -= l;
            *slot = true;
        }
    }
    debug_assert_eq!(pattern.iter().filter(|&&u| u).count(), n_up);
    pattern
}

/// Product start state targeting a total-`Sz` sector.
///
/// `sector` is twice the total `Sz`; `None` picks the physically expected
/// sector: fully polarized for `delta <= -1` (ferromagnetic ground space),
/// balanced (`Sz = 0`) otherwise.
pub fn dmrg_initial_state(params: &ModelParams, sector: Option<i32>) -> Result<MpsState, MpsError> {
    params.validate()?;
    let l = params.l;
    let two_sz = match sector {
        Some(s) => s,
        None if params.delta <= -1.0 => l as i32,
        None => 0,
    };
    if two_sz.unsigned_abs() as usize > l || (two_sz + l as i32) % 2 != 0 {
        return Err(MpsError::BadSector { two_sz, l });
    }
    let n_up = ((l as i32 + two_sz) / 2) as usize;
    Ok(MpsState::product_state(&balanced_pattern(l, n_up)))
}

/// Projects a state onto its dominant global spin-flip parity component.
///
/// Degenerate ground spaces (strong Ising anisotropy) let a variational
/// search converge to a symmetry-broken mixture of the two flip-parity
/// eigenstates; the mixture has a spurious complex structure that a parity
/// eigenstate does not.  When `|<state|F state>| < 1 - 1e-6` the dominant
/// parity component `state ± F state` is projected out, compressed, and
/// normalized.  Returns `(state, flip_overlap_before, changed)`.
pub fn flip_symmetrize(
    state: &MpsState,
    chi_max: usize,
    cutoff: f64,
) -> Result<(MpsState, f64, bool), MpsError> {
    let flipped = state.spin_flipped();
    let f = state.overlap(&flipped);
    if f.norm() >= 1.0 - 1e-6 {
        return Ok((state.clone(), f.norm(), false));
    }
    let parity = if f.re >= 0.0 { 1.0 } else { -1.0 };
    let mut cand = state.add(&flipped, c(1.0), c(parity))?;
    cand.normalize();
    cand.compress(chi_max, cutoff)?;
    cand.normalize();
    cand.move_center_to(0);
    Ok((cand, f.norm(), true))
}

/// Ground state of the bare chain for `params`, found variationally.
#[derive(Debug, Clone)]
pub struct MpsGround {
    /// Normalized ground state, center at site 0.
    pub state: MpsState,
    /// Variational ground energy.
    pub energy: f64,
    /// Full DMRG sweeps used.
    pub sweeps: usize,
    /// Energy after each sweep.
    pub energy_history: Vec<f64>,
    /// Largest discarded weight seen during the search.
    pub max_discarded_weight: f64,
    /// `|<G|F G>|` of the raw DMRG state (`F` = global spin flip).
    pub flip_overlap: f64,
    /// Whether the state was projected onto a flip-parity eigenstate.
    pub flip_symmetrized: bool,
}

/// DMRG ground search for the chain Hamiltonian of `params`.
///
/// With `sector = Some(two_sz)` the search is restricted to that
/// magnetization sector: the sweep Hamiltonian gains a `(Sz_total - target)^2`
/// penalty strong enough that leaving the sector always raises the energy
/// (the reported energy is still that of the bare chain Hamiltonian).  With
/// `None` the physically expected sector seeds the sweep and the search is
/// free.  In the balanced sector the result is flip-symmetrized when the
/// search broke the degeneracy of a strongly anisotropic ground space.
pub fn ground_state_mps(
    params: &ModelParams,
    sector: Option<i32>,
    cfg: &DmrgConfig,
) -> Result<MpsGround, MpsError> {
    let mpo = Mpo::from_terms(&crate::model::build_xxz_terms(params))?;
    let init = dmrg_initial_state(params, sector)?;
    let target_two_sz = match sector {
        Some(s) => s,
        None if params.delta <= -1.0 => params.l as i32,
        None => 0,
    };
    let balanced = target_two_sz == 0;
    let sweep_mpo = match sector {
        Some(two_sz) => {
            // Outweigh any possible binding-energy gain from changing sector:
            // per-bond couplings are at most |J| (1 + |Delta|) / 2 in magnitude.
            let lambda =
                (params.j.abs() * (1.0 + params.delta.abs()) * params.l as f64).max(1.0);
            mpo.add(&Mpo::magnetization_penalty(params.l, f64::from(two_sz) / 2.0, lambda))?
        }
        None => mpo.clone(),
    };
    let run = dmrg_ground_state(&sweep_mpo, &init, cfg)?;
    let (state, flip_overlap, symmetrized) = if balanced {
        flip_symmetrize(&run.state, cfg.chi_max, cfg.cutoff)?
    } else {
        (run.state, f64::NAN, false)
    };
    let energy = if symmetrized || sector.is_some() {
        state.expect_mpo(&mpo).re
    } else {
        run.energy
    };
    Ok(MpsGround {
        state,
        energy,
        sweeps: run.sweeps,
        energy_history: run.energy_history,
        max_discarded_weight: run.max_discarded_weight,
        flip_overlap,
        flip_symmetrized: symmetrized,
    })
}

// ---------------------------------------------------------------------------
// TDVP time evolution
// ---------------------------------------------------------------------------

/// Tuning knobs of the TDVP integrator.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TdvpConfig {
    /// Largest bond dimension a truncation keeps.
    pub chi_max: usize,
    /// Per-bond discarded-weight budget for truncations.
    pub cutoff: f64,
    /// Time step of one full (left-right-left) sweep.
    pub dt: f64,
    /// Start with the bond-growing two-site integrator; once a full step no
    /// longer grows any bond the evolver switches permanently to the cheaper
    /// fixed-rank one-site integrator.  `false` forces one-site throughout.
    pub two_site: bool,
    /// Residual tolerance of the local Krylov propagators.
    pub krylov_tol: f64,
    /// Krylov basis cap of the local propagators.
    pub krylov_max_basis: usize,
}

impl Default for TdvpConfig {
    fn default() -> Self {
        Self {
            chi_max: 128,
            cutoff: 1e-10,
            dt: 0.05,
            two_site: true,
            krylov_tol: 1e-10,
            krylov_max_basis: 30,
        }
    }
}

/// Step-by-step TDVP integrator for `i d/dt |psi> = H |psi>`.
///
/// Both sweep variants are symmetric (left-to-right then right-to-left with
/// half time steps), giving a second-order integrator.  The state is
/// renormalized after each step; the largest drift and the largest truncation
/// are recorded.  Drive it manually via [`TdvpEvolver::step`] for long chains,
/// or let [`tdvp_evolve`] collect a snapshot trajectory for small ones.
pub struct TdvpEvolver {
    state: MpsState,
    mpo: Mpo,
    cfg: TdvpConfig,
    /// `lenv[i]` covers sites `< i`; entries `> center` are stale.
    lenv: Vec<Array3<C64>>,
    /// `renv[i]` covers sites `> i`; entries `< center` are stale.
    renv: Vec<Array3<C64>>,
    two_site: bool,
    switch_step: Option<usize>,
    steps_taken: usize,
    max_discarded: f64,
    norm_drift: f64,
}

impl TdvpEvolver {
    /// Prepares the evolver; `state` must be normalized.
    pub fn new(mut state: MpsState, mpo: Mpo, cfg: TdvpConfig) -> Result<Self, MpsError> {
        let l = state.num_sites();
        if l != mpo.num_sites() {
            return Err(MpsError::LengthMismatch(l, mpo.num_sites()));
        }
        assert!(l >= 2, "time evolution needs at least two sites");
        state.move_center_to(0);
        let ones = || Array3::<C64>::ones((1, 1, 1));
        let mut renv: Vec<Array3<C64>> = vec![ones(); l];
        for i in (0..l - 1).rev() {
            renv[i] =
                env_step_right(&renv[i + 1], mpo.tensor(i + 1), state.tensor(i + 1), state.tensor(i + 1));
        }
        let lenv: Vec<Array3<C64>> = vec![ones(); l];
        let two_site = cfg.two_site;
        Ok(Self {
            state,
            mpo,
            cfg,
            lenv,
            renv,
            two_site,
            switch_step: None,
            steps_taken: 0,
            max_discarded: 0.0,
            norm_drift: 0.0,
        })
    }

    pub fn state(&self) -> &MpsState {
        &self.state
    }

    /// Simulated time reached so far.
    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.cfg.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Largest single discarded weight of any truncation so far.
    pub fn max_discarded_weight(&self) -> f64 {
        self.max_discarded
    }

    /// Largest `|norm - 1|` observed before the per-step renormalization.
    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }

    /// Step index after which the integrator dropped to one-site sweeps.
    pub fn switch_step(&self) -> Option<usize> {
        self.switch_step
    }

    /// `<psi|H|psi>` from the cached environments (cheap).
    ///
    /// Valid when the center sits at site 0, i.e. right after construction or
    /// after any completed step.
    pub fn energy(&self) -> f64 {
        let i = self.state.center;
        let ct = &self.state.tensors[i];
        let v = ct.as_slice().expect("site tensors stay standard-layout");
        let mut out = vec![c(0.0); v.len()];
        OneSiteHeff { le: &self.lenv[i], w: self.mpo.tensor(i), re: &self.renv[i] }
            .apply(v, &mut out);
        v.iter().zip(&out).map(|(a, b)| a.conj() * b).sum::<C64>().re
    }

    fn expm<F>(&self, apply: F, v: &[C64], tau: C64) -> Result<Vec<C64>, MpsError>
    where
        F: FnMut(&[C64], &mut [C64]),
    {
        krylov::expm_multiply_hermitian(apply, v, tau, self.cfg.krylov_tol, self.cfg.krylov_max_basis)
            .map_err(|source| MpsError::EvolveStep { step: self.steps_taken + 1, source })
    }

    /// Advances the state by one time step `cfg.dt`.
    pub fn step(&mut self) -> Result<(), MpsError> {
        let bonds_before = self.state.bond_dims();
        if self.two_site {
            self.step_two_site()?;
        } else {
            self.step_one_site()?;
        }
        let n = self.state.normalize();
        self.norm_drift = self.norm_drift.max((n - 1.0).abs());
        self.steps_taken += 1;
        if self.two_site && self.state.bond_dims() == bonds_before {
            // Bond growth has saturated (either converged or capped); the
            // one-site integrator explores the same manifold from here on.
            self.two_site = false;
            self.switch_step = Some(self.steps_taken);
        }
        Ok(())
    }

    /// Symmetric two-site sweep: each window is evolved forward by `dt/2` in
    /// both half sweeps, and between windows the freshly split-off center
    /// tensor is evolved backward by `dt/2`.
    fn step_two_site(&mut self) -> Result<(), MpsError> {
        let l = self.state.num_sites();
        let fwd = C64::new(0.0, -0.5 * self.cfg.dt);
        let bwd = -fwd;

        for i in 0..l - 1 {
            debug_assert_eq!(self.state.center, i);
            self.evolve_window(i, fwd, true)?;
            self.lenv[i + 1] = env_step_left(
                &self.lenv[i],
                self.mpo.tensor(i),
                self.state.tensor(i),
                self.state.tensor(i),
            );
            if i + 1 < l - 1 {
                self.evolve_center(i + 1, bwd)?;
            }
        }
        for i in (0..l - 1).rev() {
            debug_assert_eq!(self.state.center, i + 1);
            self.evolve_window(i, fwd, false)?;
            self.renv[i] = env_step_right(
                &self.renv[i + 1],
                self.mpo.tensor(i + 1),
                self.state.tensor(i + 1),
                self.state.tensor(i + 1),
            );
            if i > 0 {
                self.evolve_center(i, bwd)?;
            }
        }
        Ok(())
    }

    /// Symmetric one-site sweep: fixed bond dimensions, no truncation at all;
    /// the back-evolved object between sites is the bond matrix itself.
    fn step_one_site(&mut self) -> Result<(), MpsError> {
        let l = self.state.num_sites();
        let fwd = C64::new(0.0, -0.5 * self.cfg.dt);
        let bwd = -fwd;

        for i in 0..l {
            debug_assert_eq!(self.state.center, i);
            self.evolve_center(i, fwd)?;
            if i < l - 1 {
                let (bl, d, br) = self.state.tensors[i].dim();
                let m = view2(&self.state.tensors[i], bl * d, br).to_owned();
                let (q, rm) = m.qr()?;
                let k = q.dim().1;
                self.state.tensors[i] = q.into_shape((bl, d, k)).expect("shape");
                self.lenv[i + 1] = env_step_left(
                    &self.lenv[i],
                    self.mpo.tensor(i),
                    self.state.tensor(i),
                    self.state.tensor(i),
                );
                let bond = self.evolve_bond(&rm, &self.lenv[i + 1], &self.renv[i], bwd)?;
                let (l2, d2, r2) = self.state.tensors[i + 1].dim();
                let nb = bond.dot(&view2(&self.state.tensors[i + 1], l2, d2 * r2));
                self.state.tensors[i + 1] = nb.into_shape((k, d2, r2)).expect("shape");
                self.state.center = i + 1;
            }
        }
        for i in (0..l).rev() {
            debug_assert_eq!(self.state.center, i);
            self.evolve_center(i, fwd)?;
            if i > 0 {
                let (bl, d, br) = self.state.tensors[i].dim();
                let m = view2(&self.state.tensors[i], bl, d * br).to_owned();
                let (lm, q) = lq(&m)?;
                let k = q.dim().0;
                self.state.tensors[i] = q.into_shape((k, d, br)).expect("shape");
                self.renv[i - 1] = env_step_right(
                    &self.renv[i],
                    self.mpo.tensor(i),
                    self.state.tensor(i),
                    self.state.tensor(i),
                );
                let bond = self.evolve_bond(&lm, &self.lenv[i], &self.renv[i - 1], bwd)?;
                let (l2, d2, r2) = self.state.tensors[i - 1].dim();
                let na = view2(&self.state.tensors[i - 1], l2 * d2, r2).dot(&bond);
                self.state.tensors[i - 1] = na.into_shape((l2, d2, k)).expect("shape");
                self.state.center = i - 1;
            }
        }
        Ok(())
    }

    /// Forward/backward evolution of the two-site window `(i, i+1)` followed
    /// by the truncated split; `absorb_right` picks the new center side.
    fn evolve_window(&mut self, i: usize, tau: C64, absorb_right: bool) -> Result<(), MpsError> {
        let dims;
        let theta_new = {
            let heff = TwoSiteHeff {
                le: &self.lenv[i],
                w1: self.mpo.tensor(i),
                w2: self.mpo.tensor(i + 1),
                re: &self.renv[i + 1],
            };
            dims = heff.dims();
            let theta = two_site_tensor(&self.state, i);
            self.expm(|x, y| heff.apply(x, y), &theta, tau)?
        };
        let (a, b, discarded) =
            split_two_site(&theta_new, dims, self.cfg.chi_max, self.cfg.cutoff, absorb_right)?;
        self.max_discarded = self.max_discarded.max(discarded);
        self.state.tensors[i] = a;
        self.state.tensors[i + 1] = b;
        self.state.center = if absorb_right { i + 1 } else { i };
        Ok(())
    }

    /// Evolves the center tensor at site `i` by `exp(tau * Heff)`.
    fn evolve_center(&mut self, i: usize, tau: C64) -> Result<(), MpsError> {
        let (bl, d, br) = self.state.tensors[i].dim();
        let out = {
            let heff =
                OneSiteHeff { le: &self.lenv[i], w: self.mpo.tensor(i), re: &self.renv[i] };
            let v = self.state.tensors[i].as_slice().expect("standard layout").to_vec();
            self.expm(|x, y| heff.apply(x, y), &v, tau)?
        };
        self.state.tensors[i] = Array3::from_shape_vec((bl, d, br), out).expect("shape");
        Ok(())
    }

    /// Evolves a bond matrix by `exp(tau * Heff)` with the zero-site operator.
    fn evolve_bond(
        &self,
        bond: &Array2<C64>,
        le: &Array3<C64>,
        re: &Array3<C64>,
        tau: C64,
    ) -> Result<Array2<C64>, MpsError> {
        let (r, k) = bond.dim();
        let heff = BondHeff { le, re };
        let v: Vec<C64> = bond.iter().copied().collect();
        let out = self.expm(|x, y| heff.apply(x, y), &v, tau)?;
        Ok(Array2::from_shape_vec((r, k), out).expect("shape"))
    }
}

/// Snapshot trajectory of a TDVP evolution (small chains; every step clones
/// the full state).
#[derive(Debug, Clone)]
pub struct TdvpTrajectory {
    /// `steps + 1` states, the first being the (re-canonicalized) input.
    pub states: Vec<MpsState>,
    /// `<psi|H|psi>` per snapshot, for drift monitoring.
    pub energies: Vec<f64>,
    /// Largest single discarded weight of the whole run.
    pub max_discarded_weight: f64,
    /// Largest per-step `|norm - 1|` before renormalization.
    pub norm_drift: f64,
    /// Step after which the integrator dropped to one-site sweeps.
    pub switch_step: Option<usize>,
}

/// Evolves `state` under `mpo` for `steps` steps of `cfg.dt`, collecting
/// snapshots.  Long chains should drive a [`TdvpEvolver`] directly instead of
/// materializing every intermediate state.
pub fn tdvp_evolve(
    state: &MpsState,
    mpo: &Mpo,
    cfg: &TdvpConfig,
    steps: usize,
) -> Result<TdvpTrajectory, MpsError> {
    let mut ev = TdvpEvolver::new(state.clone(), mpo.clone(), *cfg)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    states.push(ev.state().clone());
    energies.push(ev.energy());
    for _ in 0..steps {
        ev.step()?;
        states.push(ev.state().clone());
        energies.push(ev.energy());
    }
    Ok(TdvpTrajectory {
        states,
        energies,
        max_discarded_weight: ev.max_discarded_weight(),
        norm_drift: ev.norm_drift(),
        switch_step: ev.switch_step(),
    })
}

/// Builds the initial chain state for MPS evolutions.
///
/// Mirrors the dense backend's state preparation: `Auto` takes the polarized
/// superposition in the ferromagnetic regime (`delta <= -1`) and the
/// variational ground state otherwise.  Returns the state, its chain energy,
/// a short label, and bookkeeping notes for trace metadata.
pub fn prepare_initial_mps(
    params: &ModelParams,
    choice: InitialState,
    dmrg_cfg: &DmrgConfig,
) -> Result<(MpsState, f64, String, Vec<String>), MpsError> {
    params.validate()?;
    let mut notes = Vec::new();
    let ground = |notes: &mut Vec<String>| -> Result<(MpsState, f64, String), MpsError> {
        let g = ground_state_mps(params, None, dmrg_cfg)?;
        notes.push(format!(
            "dmrg: {} sweeps, max discarded {:.3e}{}",
            g.sweeps,
            g.max_discarded_weight,
            if g.flip_symmetrized { ", flip-symmetrized" } else { "" },
        ));
        let label = format!("ground state (E = {:.12})", g.energy);
        Ok((g.state, g.energy, label))
    };
    let chain_energy = |state: &MpsState| -> Result<f64, MpsError> {
        let mpo = Mpo::from_terms(&build_xxz_terms(params))?;
        Ok(state.expect_mpo(&mpo).re)
    };
    let (state, energy, label) = match choice {
        InitialState::Auto if params.delta <= -1.0 => {
            let state = MpsState::polarized_cat(params.l);
            let e = chain_energy(&state)?;
            (state, e, "polarized superposition (ferromagnetic regime)".to_string())
        }
        InitialState::Auto | InitialState::GroundState => ground(&mut notes)?,
        InitialState::PolarizedSuperposition => {
            let state = MpsState::polarized_cat(params.l);
            let e = chain_energy(&state)?;
            (state, e, "polarized superposition".to_string())
        }
        InitialState::PolarizedUp => {
            let state = MpsState::product_state(&vec![true; params.l]);
            let e = chain_energy(&state)?;
            (state, e, "single polarized state".to_string())
        }
    };
    Ok((state, energy, label, notes))
}

/// Qubit coherence via two TDVP branch evolutions.
///
/// `rho01(t) = 0.5 e^{-i h_z t} <psi_-(t)|psi_+(t)>` with
/// `|psi_{pm}(t)> = e^{-i H_{pm} t} |chain_0>`; the overlap is a full tensor
/// contraction at every sample.  The evolution step equals the grid step.
pub fn coherence_tdvp(
    params: &ModelParams,
    grid: &TimeGrid,
    initial: InitialState,
    dmrg_cfg: &DmrgConfig,
    tdvp_cfg: &TdvpConfig,
) -> Result<CoherenceTrace, MpsError> {
    params.validate()?;
    let (state0, _, label, mut notes) = prepare_initial_mps(params, initial, dmrg_cfg)?;
    notes.insert(0, format!("initial state: {label}"));
    coherence_tdvp_prepared(params, state0, grid, tdvp_cfg, notes)
}

/// Same as [`coherence_tdvp`] but starting from an already-built chain state;
/// `notes` are prepended to the trace metadata (preparation provenance).
pub fn coherence_tdvp_prepared(
    params: &ModelParams,
    state0: MpsState,
    grid: &TimeGrid,
    tdvp_cfg: &TdvpConfig,
    notes: Vec<String>,
) -> Result<CoherenceTrace, MpsError> {
    params.validate()?;
    let mut notes = notes;
    let rho0 = c(0.5);
    let cfg = TdvpConfig { dt: grid.dt(), ..*tdvp_cfg };
    let plus = Mpo::from_terms(&build_branch_terms(params, BranchSign::Plus))?;
    let minus = Mpo::from_terms(&build_branch_terms(params, BranchSign::Minus))?;
    let mut ev_plus = TdvpEvolver::new(state0.clone(), plus, cfg)?;
    let mut ev_minus = TdvpEvolver::new(state0, minus, cfg)?;

    let mut values = Vec::with_capacity(grid.len());
    values.push(rho0);
    for step in 1..=grid.n_steps() {
        // The branches are independent; run them side by side.
        let (rp, rm) = rayon::join(|| ev_plus.step(), || ev_minus.step());
        rp?;
        rm?;
        let t = step as f64 * grid.dt();
        let phase = C64::new(0.0, -params.h_z * t).exp();
        values.push(rho0 * phase * ev_minus.state().overlap(ev_plus.state()));
    }

    let mut meta = TraceMeta::new("tdvp", Some(*params));
    meta.notes.append(&mut notes);
    meta.notes.push(format!(
        "tdvp: max discarded {:.3e}, norm drift {:.3e}, final bond dim {}",
        ev_plus.max_discarded_weight().max(ev_minus.max_discarded_weight()),
        ev_plus.norm_drift().max(ev_minus.norm_drift()),
        ev_plus.state().max_bond_dim().max(ev_minus.state().max_bond_dim()),
    ));
    Ok(CoherenceTrace::from_grid(grid, values, meta))
}

/// Autocorrelation `C(t) = <Sz_M(t) Sz_M(0)>` in the prepared chain state,
/// evolved with TDVP under the bare chain Hamiltonian.
///
/// Same identity as the dense backend: `C(t) = e^{i E0 t} <v|e^{-iHt}|v>`
/// with `v = Sz_M |psi0>` and `E0` the chain energy of `psi0`.
pub fn correlation_tdvp(
    params: &ModelParams,
    grid: &TimeGrid,
    initial: InitialState,
    dmrg_cfg: &DmrgConfig,
    tdvp_cfg: &TdvpConfig,
) -> Result<CorrelationTrace, MpsError> {
    params.validate()?;
    let (state0, e0, label, mut notes) = prepare_initial_mps(params, initial, dmrg_cfg)?;
    notes.insert(0, format!("initial state: {label}"));
    correlation_tdvp_prepared(params, state0, e0, grid, tdvp_cfg, notes)
}

/// Same as [`correlation_tdvp`] but starting from an already-built chain
/// state with known energy `e0`; `notes` carry preparation provenance.
pub fn correlation_tdvp_prepared(
    params: &ModelParams,
    state0: MpsState,
    e0: f64,
    grid: &TimeGrid,
    tdvp_cfg: &TdvpConfig,
    notes: Vec<String>,
) -> Result<CorrelationTrace, MpsError> {
    params.validate()?;
    let mut notes = notes;
    let mut v = state0;
    v.apply_site_op(params.m, LocalOp::Sz)?;
    let n0 = v.normalize();
    let n0sq = n0 * n0;
    let v0 = v.clone();
    let chain = Mpo::from_terms(&build_xxz_terms(params))?;
    let cfg = TdvpConfig { dt: grid.dt(), ..*tdvp_cfg };
    let mut ev = TdvpEvolver::new(v, chain, cfg)?;

    let mut values = Vec::with_capacity(grid.len());
    values.push(c(n0sq));
    for step in 1..=grid.n_steps() {
        ev.step()?;
        let t = step as f64 * grid.dt();
        let phase = C64::new(0.0, e0 * t).exp();
        values.push(n0sq * phase * v0.overlap(ev.state()));
    }

    let mut meta = TraceMeta::new("tdvp-correlation", Some(*params));
    meta.notes.append(&mut notes);
    meta.notes.push(format!(
        "tdvp: max discarded {:.3e}, norm drift {:.3e}, final bond dim {}",
        ev.max_discarded_weight(),
        ev.norm_drift(),
        ev.state().max_bond_dim(),
    ));
    Ok(CorrelationTrace::from_grid(grid, values, meta))
}

// Re-export kept so downstream code can name the shared Krylov error type
// without importing the krylov module directly.
pub use krylov::LocalGround;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::expectation_value;
    use crate::model::{xxz_terms, LocalOp};
    use ndarray_linalg::Eigh;

    fn neel(l: usize) -> Vec<bool> {
        (0..l).map(|i| i % 2 == 0).collect()
    }

    #[test]
    fn product_states_expand_to_the_expected_basis_vectors() {
        let up = MpsState::product_state(&vec![true; 4]).to_dense().unwrap();
        let want = DenseState::polarized_up(4);
        assert!((up.overlap(&want).re - 1.0).abs() <= 1e-14);

        let staggered = MpsState::product_state(&neel(4)).to_dense().unwrap();
        // Sites 1 and 3 up -> bits 0 and 2 -> index 0b0101 = 5.
        let amps = staggered.amplitudes();
        assert!((amps[5] - c(1.0)).norm() <= 1e-14);
        assert!((staggered.norm() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn cat_state_matches_dense_superposition_and_has_ln2_entropy() {
        let cat = MpsState::polarized_cat(6);
        assert!(cat.bond_dims().iter().all(|&d| d <= 2));
        assert!((cat.norm() - 1.0).abs() <= 1e-13);

        let dense = cat.to_dense().unwrap();
        let want = DenseState::polarized_superposition(6);
        assert!((dense.overlap(&want).norm() - 1.0).abs() <= 1e-13);

        for bond in 1..6 {
            let s = cat.entanglement_entropy(bond).unwrap();
            assert!(
                (s - std::f64::consts::LN_2).abs() <= 1e-12,
                "cat entropy at bond {bond} was {s}"
            );
        }
        let product = MpsState::product_state(&neel(6));
        for bond in 1..6 {
            assert!(product.entanglement_entropy(bond).unwrap() <= 1e-14);
        }
        assert!(cat.entanglement_entropy(0).is_err());
        assert!(cat.entanglement_entropy(6).is_err());
    }

    #[test]
    fn center_moves_preserve_the_state_and_canonical_form() {
        let mut st = MpsState::polarized_cat(5);
        let before = st.to_dense().unwrap();
        for target in [4, 2, 0, 3, 1] {
            st.move_center_to(target);
            assert_eq!(st.center(), target);
            assert!(st.max_canonical_defect() <= 1e-13);
            let after = st.to_dense().unwrap();
            let diff: f64 = before
                .amplitudes()
                .iter()
                .zip(after.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-13, "center move changed the state by {diff}");
        }
    }

    #[test]
    fn overlap_matches_dense_contraction() {
        let a = MpsState::product_state(&neel(5));
        let b = MpsState::polarized_cat(5);
        let mixed = a.add(&b, c(0.8), C64::new(0.0, 0.6)).unwrap();
        let (da, dm) = (a.to_dense().unwrap(), mixed.to_dense().unwrap());
        let got = a.overlap(&mixed);
        let want = da.overlap(&dm);
        assert!((got - want).norm() <= 1e-13);
        // Conjugate-linearity in the bra.
        let back = mixed.overlap(&a);
        assert!((back - want.conj()).norm() <= 1e-13);
    }

    #[test]
    fn spin_flip_maps_staggered_to_anti_staggered_and_fixes_the_cat() {
        let st = MpsState::product_state(&neel(4));
        let flipped = st.spin_flipped().to_dense().unwrap();
        let anti: Vec<bool> = neel(4).iter().map(|u| !u).collect();
        let want = MpsState::product_state(&anti).to_dense().unwrap();
        assert!((flipped.overlap(&want).norm() - 1.0).abs() <= 1e-14);

        let cat = MpsState::polarized_cat(4);
        let f = cat.overlap(&cat.spin_flipped());
        assert!((f.re - 1.0).abs() <= 1e-13, "cat must be flip-even, got {f}");
    }

    #[test]
    fn site_operators_act_like_their_dense_counterparts() {
        let mut st = MpsState::polarized_cat(4);
        st.apply_site_op(2, LocalOp::Sz).unwrap();
        let got = st.to_dense().unwrap();
        let want = MpsState::polarized_cat(4).to_dense().unwrap().apply_sz(2);
        let diff: f64 = got
            .amplitudes()
            .iter()
            .zip(want.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-13);
        // Sz halves the norm on a cat state: both branches are eigenstates
        // with eigenvalue +-1/2.
        assert!((st.norm() - 0.5).abs() <= 1e-13);

        let mut up = MpsState::product_state(&vec![true; 3]);
        up.apply_site_op(1, LocalOp::Sp).unwrap();
        assert!(up.norm() <= 1e-15, "raising a raised spin must annihilate");
        assert!(up.apply_site_op(9, LocalOp::Sz).is_err());
    }

    #[test]
    fn compressing_a_cat_to_bond_one_discards_half_the_weight() {
        let mut cat = MpsState::polarized_cat(6);
        let discarded = cat.compress(1, 0.0).unwrap();
        // The first cut carries two equal Schmidt weights; one is dropped.
        assert!((discarded - 0.5).abs() <= 1e-12);
        assert_eq!(cat.max_bond_dim(), 1);
        // Lossless compression of a product state discards nothing.
        let mut p = MpsState::product_state(&neel(6));
        assert_eq!(p.compress(8, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn mpo_dense_form_matches_the_term_list() {
        for (delta, l) in [(0.0, 2), (0.7, 3), (-1.5, 5), (2.5, 6)] {
            let list = xxz_terms(1.0, delta, l).unwrap();
            let mpo = Mpo::from_terms(&list).unwrap();
            let got = mpo.to_dense().unwrap();
            let want = list.to_dense().unwrap();
            let diff = got
                .iter()
                .zip(want.iter())
                .map(|(g, w)| (g - c(*w)).norm())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-13, "MPO mismatch {diff} at delta={delta}, l={l}");
        }
    }

    #[test]
    fn mpo_handles_single_site_terms_and_zero_operators() {
        let mut list = OperatorTermList::zero(3);
        list.push_term(0.4, &[(1, LocalOp::Sz)]);
        list.push_term(-0.7, &[(3, LocalOp::Sz)]);
        let got = Mpo::from_terms(&list).unwrap().to_dense().unwrap();
        let want = list.to_dense().unwrap();
        let diff = got
            .iter()
            .zip(want.iter())
            .map(|(g, w)| (g - c(*w)).norm())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-14);

        let zero = Mpo::from_terms(&OperatorTermList::zero(4)).unwrap();
        let cat = MpsState::polarized_cat(4);
        assert!(cat.expect_mpo(&zero).norm() <= 1e-14);
    }

    #[test]
    fn mpo_rejects_unsupported_terms() {
        let mut gapped = OperatorTermList::zero(4);
        gapped.push_term(1.0, &[(1, LocalOp::Sz), (3, LocalOp::Sz)]);
        assert!(matches!(
            Mpo::from_terms(&gapped),
            Err(MpsError::NonAdjacentTerm(1, 3))
        ));

        let mut triple = OperatorTermList::zero(4);
        triple.push_term(1.0, &[(1, LocalOp::Sz), (2, LocalOp::Sz), (3, LocalOp::Sz)]);
        assert!(matches!(
            Mpo::from_terms(&triple),
            Err(MpsError::UnsupportedTerm(3))
        ));
    }

    #[test]
    fn mpo_expectation_matches_dense_quadratic_form() {
        let list = xxz_terms(1.0, 0.7, 6).unwrap();
        let mpo = Mpo::from_terms(&list).unwrap();
        for state in [
            MpsState::product_state(&neel(6)),
            MpsState::polarized_cat(6),
            MpsState::product_state(&neel(6))
                .add(&MpsState::polarized_cat(6), c(0.6), c(0.8))
                .unwrap(),
        ] {
            let got = state.expect_mpo(&mpo);
            let dense = state.to_dense().unwrap();
            let n2 = dense.amplitudes().iter().map(|z| z.norm_sqr()).sum::<f64>();
            let want = expectation_value(&list, &dense) * n2;
            assert!(
                (got.re - want).abs() <= 1e-12 && got.im.abs() <= 1e-13,
                "expectation {got} vs dense {want}"
            );
        }
    }

    #[test]
    fn right_environment_step_agrees_with_left_step() {
        // Contract <cat|H|cat> once from the left and once from the right;
        // both must give the same number.
        let list = xxz_terms(1.0, 1.3, 5).unwrap();
        let mpo = Mpo::from_terms(&list).unwrap();
        let st = MpsState::polarized_cat(5);
        let mut left = Array3::<C64>::ones((1, 1, 1));
        for i in 0..5 {
            left = env_step_left(&left, mpo.tensor(i), st.tensor(i), st.tensor(i));
        }
        let mut right = Array3::<C64>::ones((1, 1, 1));
        for i in (0..5).rev() {
            right = env_step_right(&right, mpo.tensor(i), st.tensor(i), st.tensor(i));
        }
        assert!((left[(0, 0, 0)] - right[(0, 0, 0)]).norm() <= 1e-13);
    }

    #[test]
    fn mpo_to_dense_is_hermitian_for_hamiltonian_lists() {
        let list = xxz_terms(1.0, -0.4, 4).unwrap();
        let h = Mpo::from_terms(&list).unwrap().to_dense().unwrap();
        let defect = (&h - &dagger(&h)).norm_max();
        assert!(defect <= 1e-14);
        // Sanity: its lowest eigenvalue matches the dense term-list matrix.
        let (ev_mpo, _) = h.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        let dense = list.to_dense().unwrap().mapv(c);
        let (ev_dense, _) = dense.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        assert!((ev_mpo[0] - ev_dense[0]).abs() <= 1e-12);
    }

    #[test]
    fn penalty_and_sum_mpos_match_dense_algebra() {
        let l = 5;
        let (target, lambda) = (0.5, 3.0);
        let pen = Mpo::magnetization_penalty(l, target, lambda).to_dense().unwrap();
        // Dense reference: lambda * (Sz_tot - target)^2.
        let mut sz_list = OperatorTermList::zero(l);
        for site in 1..=l {
            sz_list.push_term(1.0, &[(site, LocalOp::Sz)]);
        }
        let sz_tot = Mpo::from_terms(&sz_list).unwrap().to_dense().unwrap();
        let shifted = &sz_tot - &(Array2::<C64>::eye(1 << l) * c(target));
        let want = shifted.dot(&shifted) * c(lambda);
        assert!((&pen - &want).norm_max() <= 1e-12);

        let ham = Mpo::from_terms(&xxz_terms(1.0, 0.7, l).unwrap()).unwrap();
        let total = ham.add(&Mpo::magnetization_penalty(l, target, lambda)).unwrap();
        let want_sum = ham.to_dense().unwrap() + want;
        assert!((&total.to_dense().unwrap() - &want_sum).norm_max() <= 1e-12);

        let short = Mpo::magnetization_penalty(l - 1, target, lambda);
        assert!(matches!(ham.add(&short), Err(MpsError::LengthMismatch(..))));
    }

    // ---- DMRG ----

    use crate::exact::{ground_state_exact, ExactConfig};
    use crate::model::ModelParams;

    fn params(delta: f64, l: usize) -> ModelParams {
        ModelParams::new(1.0, delta, l, 0.25, 0.0).unwrap()
    }

    #[test]
    fn dmrg_matches_exact_ground_states_across_phases() {
        let cfg = DmrgConfig { chi_max: 64, ..DmrgConfig::default() };
        for delta in [0.0, 0.5, 1.0, 2.5, -0.5] {
            let p = params(delta, 8);
            let got = ground_state_mps(&p, None, &cfg).unwrap();
            let want = ground_state_exact(&p, None, &ExactConfig::default()).unwrap();
            assert!(
                (got.energy - want.energy).abs() <= 1e-9,
                "delta={delta}: E_dmrg={} vs E_exact={}",
                got.energy,
                want.energy
            );
            let ov = got.state.to_dense().unwrap().overlap(&want.state).norm();
            assert!(ov >= 1.0 - 1e-8, "delta={delta}: |<mps|exact>| = {ov}");
        }
    }

    #[test]
    fn ferromagnetic_ground_is_a_polarized_product_state() {
        let p = params(-2.0, 12);
        let got = ground_state_mps(&p, None, &DmrgConfig::default()).unwrap();
        // E = J * Delta * (L-1) / 4 for the fully polarized state.
        assert!((got.energy - (-2.0 * 11.0 / 4.0)).abs() <= 1e-12);
        assert_eq!(got.state.max_bond_dim(), 1);
        assert!(!got.flip_symmetrized);
        assert!(got.sweeps <= 3, "product ground should converge immediately");
    }

    #[test]
    fn sector_targeting_survives_the_sweeps() {
        let p = params(0.5, 8);
        let got = ground_state_mps(&p, Some(2), &DmrgConfig::default()).unwrap();
        let want = ground_state_exact(&p, Some(2), &ExactConfig::default()).unwrap();
        assert!(
            (got.energy - want.energy).abs() <= 1e-9,
            "E_dmrg={} vs E_exact={}",
            got.energy,
            want.energy
        );

        // Total Sz of the result must be +1 (2Sz = 2).
        let mut sz_total = OperatorTermList::zero(8);
        for site in 1..=8 {
            sz_total.push_term(1.0, &[(site, LocalOp::Sz)]);
        }
        let sz = got.state.expect_mpo(&Mpo::from_terms(&sz_total).unwrap());
        assert!((sz.re - 1.0).abs() <= 1e-9 && sz.im.abs() <= 1e-12);

        assert!(dmrg_initial_state(&p, Some(3)).is_err(), "odd 2Sz on even L");
        assert!(dmrg_initial_state(&p, Some(10)).is_err(), "sector beyond range");
    }

    #[test]
    fn dmrg_reaches_free_fermion_energy_beyond_the_dense_range() {
        // L = 16 exceeds the dense backend's cap; the exact reference comes
        // from the hopping-chain single-particle spectrum instead.
        let p = params(0.0, 16);
        let cfg = DmrgConfig { cutoff: 1e-13, ..DmrgConfig::default() };
        let got = ground_state_mps(&p, None, &cfg).unwrap();
        let want = crate::analytic::obc_free_fermion_ground_energy(16, 1.0).unwrap();
        assert!(
            (got.energy - want).abs() <= 1e-9,
            "E_dmrg={} vs free-fermion {}",
            got.energy,
            want
        );
        assert!(got.state.max_canonical_defect() <= 1e-12);
    }

    /// Minutes-scale regression; run with `cargo test -- --ignored`.
    #[test]
    #[ignore = "long-chain ground search takes a few minutes"]
    fn dmrg_reaches_the_free_fermion_sea_on_a_long_chain() {
        let p = params(0.0, 100);
        let got = ground_state_mps(&p, None, &DmrgConfig::default()).unwrap();
        let want = crate::analytic::obc_free_fermion_ground_energy(100, 1.0).unwrap();
        let rel = (got.energy - want).abs() / want.abs();
        assert!(rel <= 1e-8, "E_dmrg={} vs free-fermion {} (rel {rel:.2e})", got.energy, want);
    }

    #[test]
    fn flip_symmetrization_projects_onto_parity_eigenstates() {
        // A staggered product state is fully symmetry-broken (f = 0).
        let broken = MpsState::product_state(&neel(4));
        let (sym, f_before, changed) = flip_symmetrize(&broken, 8, 1e-12).unwrap();
        assert!(f_before <= 1e-12);
        assert!(changed);
        let f_after = sym.overlap(&sym.spin_flipped());
        assert!((f_after.re - 1.0).abs() <= 1e-10);
        // (|0101> + |1010>)/sqrt2 in the dense basis (indices 5 and 10).
        let amps = sym.to_dense().unwrap().amplitudes().to_vec();
        let w = std::f64::consts::FRAC_1_SQRT_2;
        assert!((amps[5].norm() - w).abs() <= 1e-12);
        assert!((amps[10].norm() - w).abs() <= 1e-12);

        // A parity eigenstate passes through untouched.
        let cat = MpsState::polarized_cat(4);
        let (_, f_cat, changed_cat) = flip_symmetrize(&cat, 8, 1e-12).unwrap();
        assert!(f_cat >= 1.0 - 1e-12);
        assert!(!changed_cat);
    }

    #[test]
    fn exhausted_sweep_budget_is_an_error() {
        let cfg = DmrgConfig {
            max_sweeps: 2,
            energy_tol: 1e-15,
            ..DmrgConfig::default()
        };
        let p = params(0.0, 12);
        assert!(matches!(
            ground_state_mps(&p, None, &cfg),
            Err(MpsError::NotConverged { sweeps: 2, .. })
        ));
    }

    // ---- TDVP ----

    use crate::exact::{coherence_exact, correlation_exact};
    use crate::trace::TimeGrid;

    #[test]
    fn zero_hamiltonian_evolves_nothing() {
        let l = 6;
        let zero = Mpo::from_terms(&OperatorTermList::zero(l)).unwrap();
        let state = MpsState::polarized_cat(l);
        let cfg = TdvpConfig { dt: 0.1, ..TdvpConfig::default() };
        let traj = tdvp_evolve(&state, &zero, &cfg, 10).unwrap();
        assert_eq!(traj.states.len(), 11);
        for snap in &traj.states {
            let ov = snap.overlap(&state).norm();
            assert!((ov - 1.0).abs() <= 1e-12, "|overlap| = {ov}");
        }
        for e in &traj.energies {
            assert!(e.abs() <= 1e-14);
        }
        assert!(traj.norm_drift <= 1e-12);
        assert_eq!(traj.switch_step, Some(1), "no bond growth, so one-site from step 1");
    }

    #[test]
    fn ground_state_is_stationary_under_its_own_hamiltonian() {
        let p = params(0.5, 8);
        let g = ground_state_mps(&p, None, &DmrgConfig::default()).unwrap();
        let mpo = Mpo::from_terms(&crate::model::build_xxz_terms(&p)).unwrap();
        let cfg = TdvpConfig { dt: 0.05, ..TdvpConfig::default() };
        let mut ev = TdvpEvolver::new(g.state.clone(), mpo, cfg).unwrap();
        let e0 = ev.energy();
        assert!((e0 - g.energy).abs() <= 1e-10);
        for _ in 0..400 {
            ev.step().unwrap();
        }
        // t = 20: still the same physical state, up to the dynamical phase.
        let ov = g.state.overlap(ev.state());
        assert!((ov.norm() - 1.0).abs() <= 1e-6, "|overlap| = {}", ov.norm());
        let expected_phase = C64::new(0.0, -e0 * ev.time()).exp();
        assert!((ov - expected_phase).norm() <= 1e-4, "phase error {}", (ov - expected_phase).norm());
        assert!((ev.energy() - e0).abs() <= 1e-8, "energy drift {}", (ev.energy() - e0).abs());
        assert_eq!(ev.switch_step(), Some(1));
    }

    #[test]
    fn branch_overlap_reproduces_the_dense_coherence() {
        let p = params(0.5, 10);
        let grid = TimeGrid::new(8.0, 0.05).unwrap();
        let got = coherence_tdvp(
            &p,
            &grid,
            InitialState::Auto,
            &DmrgConfig::default(),
            &TdvpConfig::default(),
        )
        .unwrap();
        let want = coherence_exact(&p, &grid).unwrap();
        assert_eq!(got.values()[0], c(0.5));
        let worst = got
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-4, "max deviation {worst:.2e}");
        let im_max =
            got.values().iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
        assert!(im_max <= 1e-5, "coherence should stay essentially real, Im <= {im_max:.2e}");
    }

    #[test]
    fn ferromagnetic_cat_coherence_matches_the_dense_backend() {
        let p = params(-1.5, 8);
        let grid = TimeGrid::new(10.0, 0.05).unwrap();
        let got = coherence_tdvp(
            &p,
            &grid,
            InitialState::Auto,
            &DmrgConfig::default(),
            &TdvpConfig::default(),
        )
        .unwrap();
        let want = coherence_exact(&p, &grid).unwrap();
        let worst = got
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-5, "max deviation {worst:.2e}");
        // The evolved state never needs more than the two cat components.
        assert!(got.meta.notes.iter().any(|n| n.contains("final bond dim 2")));
    }

    #[test]
    fn correlation_tdvp_matches_dense_and_starts_at_one_quarter() {
        let p = params(1.0, 10);
        let grid = TimeGrid::new(8.0, 0.05).unwrap();
        let got = correlation_tdvp(
            &p,
            &grid,
            InitialState::Auto,
            &DmrgConfig::default(),
            &TdvpConfig::default(),
        )
        .unwrap();
        assert!((got.values()[0] - c(0.25)).norm() <= 1e-12);
        let want = correlation_exact(&p, &grid).unwrap();
        let worst = got
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-4, "max deviation {worst:.2e}");
    }

    #[test]
    fn tight_bond_caps_report_their_discarded_weight() {
        let cfg = DmrgConfig { chi_max: 8, max_sweeps: 60, ..DmrgConfig::default() };
        let p = params(1.0, 12);
        let got = ground_state_mps(&p, None, &cfg).unwrap();
        assert!(got.max_discarded_weight > 0.0, "chi = 8 must truncate at L = 12");
        assert_eq!(got.state.max_bond_dim(), 8);
        let want = ground_state_exact(&p, None, &ExactConfig::default()).unwrap();
        // Variational: above the truth, but still close.
        assert!(got.energy >= want.energy - 1e-12);
        assert!((got.energy - want.energy).abs() <= 1e-3);
    }
}
