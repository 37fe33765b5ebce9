//! Exact-diagonalization backends for small chains (`L <= 14`).
//!
//! Total magnetization is conserved, so ground-state searches run inside fixed
//! `Sz_total` sectors: densely for short chains, via Lanczos ([`crate::krylov`])
//! above that.  Time evolution always works on full `2^L` amplitude vectors
//! with a Krylov propagator — at these sizes the full space is cheap and it
//! keeps superpositions across sectors (needed in the ferromagnetic regime)
//! uncomplicated.
//!
//! The qubit coherence is computed from the two-branch picture: the chain
//! state is evolved under `H_+` and `H_-` and the coherence is the overlap
//! `rho01(t) = rho01(0) e^{-i h_z t} <psi_-(t)|psi_+(t)>`.  A brute-force
//! oracle that evolves the full qubit⊗chain state lives here as well
//! ([`qubit_chain_coherence`]) so the factorized picture can be validated
//! end to end.

use crate::krylov::{self, KrylovError};
use crate::model::{
    build_branch_terms, qubit_chain_terms, BranchSign, LocalOp, ModelError, ModelParams,
    OperatorTermList,
};
use crate::trace::{CoherenceTrace, CorrelationTrace, GridError, TimeGrid, TraceMeta};
use crate::C64;
use ndarray::Array2;
use ndarray_linalg::{Eigh, SVDInto, UPLO};
use thiserror::Error;

/// Errors from the exact-diagonalization backends.
#[derive(Debug, Error)]
pub enum ExactError {
    #[error("exact backend limited to L <= {max}, got L = {l}")]
    ChainTooLarge { l: usize, max: usize },
    #[error("sector 2*Sz = {two_sz} does not exist for L = {l}")]
    InvalidSector { two_sz: i32, l: usize },
    #[error("state has {len} amplitudes, expected 2^{l}")]
    DimensionMismatch { len: usize, l: usize },
    #[error("bond index {bond} outside 1..={max}")]
    InvalidBond { bond: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Tuning knobs for the exact backends; the defaults fit every supported size.
#[derive(Debug, Clone, Copy)]
pub struct ExactConfig {
    /// Hard size cap; the full Hilbert space `2^L` must stay addressable.
    pub max_l: usize,
    /// Up to this length sector ground states use dense diagonalization.
    pub dense_max_l: usize,
    /// Per-step Krylov propagation tolerance (absolute, unit-norm states).
    pub krylov_tol: f64,
    /// Maximum Krylov basis per propagation step.
    pub krylov_max_basis: usize,
    /// Relative residual tolerance for Lanczos ground-state solves.
    pub eig_tol: f64,
    /// Maximum Lanczos basis for ground-state solves.
    pub eig_max_basis: usize,
    /// Seed for deterministic Lanczos start vectors.
    pub seed: u64,
    /// Eigenvalues closer than this count as degenerate (tie-breaking).
    pub degeneracy_gap: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            max_l: 14,
            dense_max_l: 10,
            krylov_tol: 1e-13,
            krylov_max_basis: 90,
            eig_tol: 1e-11,
            eig_max_basis: 600,
            seed: 0x5eed,
            degeneracy_gap: 1e-10,
        }
    }
}

/// Basis of one total-magnetization sector.
///
/// States are the `u64` bit patterns (bit `i-1` set ⇔ site `i` up) with
/// exactly `(L + 2*Sz)/2` bits set, stored ascending so membership tests are
/// binary searches.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    l: usize,
    two_sz: i32,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(l: usize, two_sz: i32) -> Result<Self, ExactError> {
        let span = l as i32;
        if two_sz.abs() > span || (two_sz + span) % 2 != 0 {
            return Err(ExactError::InvalidSector { two_sz, l });
        }
        let n_up = ((two_sz + span) / 2) as u32;
        let states: Vec<u64> =
            (0..1u64 << l).filter(|s| s.count_ones() == n_up).collect();
        Ok(Self { l, two_sz, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn two_sz(&self) -> i32 {
        self.two_sz
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }
}

/// A normalized (by convention) state vector over the full `2^L` basis.
#[derive(Debug, Clone)]
pub struct DenseState {
    l: usize,
    amps: Vec<C64>,
}

impl DenseState {
    pub fn new(l: usize, amps: Vec<C64>) -> Result<Self, ExactError> {
        if amps.len() != 1usize << l {
            return Err(ExactError::DimensionMismatch { len: amps.len(), l });
        }
        Ok(Self { l, amps })
    }

    /// All spins up.
    pub fn polarized_up(l: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        amps[(1usize << l) - 1] = C64::new(1.0, 0.0);
        Self { l, amps }
    }

    /// All spins down.
    pub fn polarized_down(l: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        amps[0] = C64::new(1.0, 0.0);
        Self { l, amps }
    }

    /// Equal superposition `(|up...up> + |down...down>)/sqrt(2)` used as the
    /// default initial state in the ferromagnetic regime.
    pub fn polarized_superposition(l: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << l];
        let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = w;
        amps[(1usize << l) - 1] = w;
        Self { l, amps }
    }

    /// Embeds a sector-restricted coefficient vector into the full basis.
    pub fn from_sector(basis: &SectorBasis, coeffs: &[f64]) -> Self {
        assert_eq!(coeffs.len(), basis.dim(), "coefficient/sector size mismatch");
        let mut amps = vec![C64::new(0.0, 0.0); 1 << basis.l];
        for (&s, &c) in basis.states.iter().zip(coeffs) {
            amps[s as usize] = C64::new(c, 0.0);
        }
        Self { l: basis.l, amps }
    }

    pub fn num_sites(&self) -> usize {
        self.l
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// `<self|other>` (conjugate-linear in `self`).
    pub fn overlap(&self, other: &Self) -> C64 {
        assert_eq!(self.l, other.l, "overlap of states on different chains");
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies `Sz` on `site` (1-based), returning the new state (not normalized).
    pub fn apply_sz(&self, site: usize) -> Self {
        assert!((1..=self.l).contains(&site), "site out of range");
        let bit = 1u64 << (site - 1);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(s, a)| if s as u64 & bit != 0 { 0.5 * a } else { -0.5 * a })
            .collect();
        Self { l: self.l, amps }
    }

    /// Applies the global spin flip (all `2 Sx`), an involution.
    pub fn spin_flip(&self) -> Self {
        let mask = (1u64 << self.l) - 1;
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (s, a) in self.amps.iter().enumerate() {
            amps[(s as u64 ^ mask) as usize] = *a;
        }
        Self { l: self.l, amps }
    }
}

/// Real expectation value `<psi|O|psi>` of a Hermitian term-list operator.
pub fn expectation_value(op: &OperatorTermList, state: &DenseState) -> f64 {
    let compiled = CompiledTerms::new(op);
    let mut out = vec![C64::new(0.0, 0.0); state.amps.len()];
    compiled.apply(&state.amps, &mut out);
    state
        .amps
        .iter()
        .zip(&out)
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// One product term compiled to bit masks for fast application.
#[derive(Debug, Clone)]
struct CompiledHop {
    /// Bits that must be set (sites being lowered).
    must_set: u64,
    /// Bits that must be clear (sites being raised).
    must_clear: u64,
    /// Bits toggled by the term.
    flip: u64,
    /// Sites contributing a `Sz` factor.
    sz_mask: u64,
    coeff: f64,
}

/// Term list compiled for fast matrix-vector products on the full basis.
pub struct CompiledTerms {
    dim: usize,
    /// Pre-accumulated diagonal (all pure-`Sz` terms).
    diag: Vec<f64>,
    hops: Vec<CompiledHop>,
}

impl CompiledTerms {
    pub fn new(op: &OperatorTermList) -> Self {
        let l = op.num_sites();
        assert!(l <= 26, "full-basis compilation limited to small chains");
        let dim = 1usize << l;
        let mut hops = Vec::new();
        let mut diag_terms: Vec<(u64, f64)> = Vec::new();
        for term in op.terms() {
            let (mut must_set, mut must_clear, mut flip, mut sz_mask) = (0u64, 0u64, 0u64, 0u64);
            for &(site, local) in &term.factors {
                let bit = 1u64 << (site - 1);
                match local {
                    LocalOp::Sz => sz_mask |= bit,
                    LocalOp::Sp => {
                        must_clear |= bit;
                        flip |= bit;
                    }
                    LocalOp::Sm => {
                        must_set |= bit;
                        flip |= bit;
                    }
                }
            }
            if flip == 0 {
                diag_terms.push((sz_mask, term.coeff));
            } else {
                hops.push(CompiledHop { must_set, must_clear, flip, sz_mask, coeff: term.coeff });
            }
        }
        let mut diag = vec![0.0; dim];
        for (sz_mask, coeff) in diag_terms {
            let n = sz_mask.count_ones();
            let base = coeff * 0.5f64.powi(n as i32);
            for (s, d) in diag.iter_mut().enumerate() {
                let down = n - (s as u64 & sz_mask).count_ones();
                *d += if down % 2 == 0 { base } else { -base };
            }
        }
        Self { dim, diag, hops }
    }

    /// `out = H v` on the full basis.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.dim);
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = *d * x;
        }
        for hop in &self.hops {
            debug_assert_eq!(hop.sz_mask, 0, "mixed Sz/hop terms are not emitted");
            for s in 0..self.dim as u64 {
                if s & hop.must_set == hop.must_set && s & hop.must_clear == 0 {
                    let t = (s ^ hop.flip) as usize;
                    out[t] += hop.coeff * v[s as usize];
                }
            }
        }
    }
}

/// Sparse sector-restricted matrix (real symmetric) with precomputed structure.
struct SectorMatrix {
    dim: usize,
    diag: Vec<f64>,
    /// Directed entries `(from, to, amplitude)`; conjugate partners appear as
    /// separate entries because the term lists carry both.
    entries: Vec<(u32, u32, f64)>,
}

impl SectorMatrix {
    fn new(op: &OperatorTermList, basis: &SectorBasis) -> Self {
        let compiled = CompiledTerms::new(op);
        let dim = basis.dim();
        let mut diag = vec![0.0; dim];
        for (i, &s) in basis.states.iter().enumerate() {
            diag[i] = compiled.diag[s as usize];
        }
        let mut entries = Vec::new();
        for hop in &compiled.hops {
            for (i, &s) in basis.states.iter().enumerate() {
                if s & hop.must_set == hop.must_set && s & hop.must_clear == 0 {
                    let target = s ^ hop.flip;
                    let j = basis
                        .index_of(target)
                        .expect("term list must conserve the sector");
                    entries.push((i as u32, j as u32, hop.coeff));
                }
            }
        }
        Self { dim, diag, entries }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, (d, x)) in out.iter_mut().zip(self.diag.iter().zip(v)) {
            *o = d * x;
        }
        for &(from, to, amp) in &self.entries {
            out[to as usize] += amp * v[from as usize];
        }
    }

    fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.dim, self.dim));
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for &(from, to, amp) in &self.entries {
            m[(to as usize, from as usize)] += amp;
        }
        m
    }
}

/// Ground state produced by [`ground_state_exact`], with solve diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: DenseState,
    pub energy: f64,
    /// Sector the returned state lives in (`2*Sz_total`).
    pub two_sz: i32,
    /// Gap to the next state within the winning sector, when resolved.
    pub gap_in_sector: Option<f64>,
    /// Whether a spin-flip-even projection was applied to break a degeneracy.
    pub flip_projected: bool,
}

/// Lowest eigenpair(s) within one sector.
fn sector_ground(
    op: &OperatorTermList,
    basis: &SectorBasis,
    cfg: &ExactConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ExactError> {
    let matrix = SectorMatrix::new(op, basis);
    let n_pairs = 2.min(basis.dim());
    if basis.l <= cfg.dense_max_l && basis.dim() > 32 {
        let (vals, vecs) = matrix
            .to_dense()
            .eigh(UPLO::Lower)
            .expect("dense sector diagonalization failed");
        let eigenvalues = vals.iter().take(n_pairs).copied().collect();
        let eigenvectors = (0..n_pairs).map(|k| vecs.column(k).to_vec()).collect();
        Ok((eigenvalues, eigenvectors))
    } else {
        let solve = krylov::lanczos_lowest(
            |v, out| matrix.apply(v, out),
            basis.dim(),
            n_pairs,
            cfg.eig_tol,
            cfg.eig_max_basis,
            cfg.seed,
        )?;
        Ok((solve.eigenvalues, solve.eigenvectors))
    }
}

/// Finds the chain ground state by scanning magnetization sectors.
///
/// With `sector = Some(two_sz)` only that sector is searched.  Tie-breaking is
/// deterministic: across sectors whose minima agree within the configured
/// degeneracy gap the higher-magnetization sector wins (so the ferromagnetic
/// regime returns a polarized product state), and inside the `Sz = 0` sector a
/// degenerate pair is resolved toward the spin-flip-even combination, which
/// keeps downstream coherences real.
pub fn ground_state_exact(
    params: &ModelParams,
    sector: Option<i32>,
    cfg: &ExactConfig,
) -> Result<GroundState, ExactError> {
    params.validate()?;
    if params.l > cfg.max_l {
        return Err(ExactError::ChainTooLarge { l: params.l, max: cfg.max_l });
    }
    let op = crate::model::build_xxz_terms(params);
    let span = params.l as i32;
    let sectors: Vec<i32> = match sector {
        Some(two_sz) => vec![two_sz],
        None => (-span..=span).step_by(2).collect(),
    };

    struct Best {
        energy: f64,
        two_sz: i32,
        basis: SectorBasis,
        pairs: (Vec<f64>, Vec<Vec<f64>>),
    }
    let mut best: Option<Best> = None;
    for two_sz in sectors {
        let basis = SectorBasis::new(params.l, two_sz)?;
        let pairs = sector_ground(&op, &basis, cfg)?;
        let energy = pairs.0[0];
        let better = match &best {
            None => true,
            Some(b) => {
                energy < b.energy - cfg.degeneracy_gap
                    || ((energy - b.energy).abs() <= cfg.degeneracy_gap && two_sz > b.two_sz)
            }
        };
        if better {
            best = Some(Best { energy, two_sz, basis, pairs });
        }
    }
    let best = best.expect("at least one sector is always scanned");

    let (vals, vecs) = &best.pairs;
    let gap_in_sector = (vals.len() > 1).then(|| vals[1] - vals[0]);
    let mut coeffs = vecs[0].clone();
    let mut flip_projected = false;
    if best.two_sz == 0 && gap_in_sector.is_some_and(|gap| gap < cfg.degeneracy_gap) {
        // Degenerate pair in a flip-invariant sector: project onto the even
        // combination v + F v (F maps the sector to itself).  If the first
        // vector happens to be flip-odd the projection vanishes; the partner
        // vector then carries the even component.
        let project_even = |v: &[f64]| -> Option<Vec<f64>> {
            let mut projected = v.to_vec();
            for (i, &s) in best.basis.states.iter().enumerate() {
                let flipped = s ^ ((1u64 << params.l) - 1);
                let j = best.basis.index_of(flipped).expect("flip preserves Sz = 0");
                projected[i] += v[j];
            }
            let norm = projected.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 1e-6).then(|| {
                projected.iter_mut().for_each(|x| *x /= norm);
                projected
            })
        };
        if let Some(even) = vecs.iter().find_map(|v| project_even(v)) {
            coeffs = even;
            flip_projected = true;
        }
    }
    let state = DenseState::from_sector(&best.basis, &coeffs);
    Ok(GroundState {
        state,
        energy: best.energy,
        two_sz: best.two_sz,
        gap_in_sector,
        flip_projected,
    })
}

/// Streaming Krylov propagator for one Hamiltonian.
pub struct KrylovPropagator {
    compiled: CompiledTerms,
    dt: f64,
    tol: f64,
    max_basis: usize,
}

impl KrylovPropagator {
    pub fn new(op: &OperatorTermList, dt: f64, cfg: &ExactConfig) -> Self {
        Self {
            compiled: CompiledTerms::new(op),
            dt,
            tol: cfg.krylov_tol,
            max_basis: cfg.krylov_max_basis,
        }
    }

    /// Advances the state by one step `exp(-i H dt)`.
    pub fn step(&self, state: &mut DenseState) -> Result<(), ExactError> {
        let tau = C64::new(0.0, -self.dt);
        let new = krylov::expm_multiply_hermitian(
            |v, out| self.compiled.apply(v, out),
            &state.amps,
            tau,
            self.tol,
            self.max_basis,
        )?;
        state.amps = new;
        Ok(())
    }
}

/// Evolves a state under a term-list Hamiltonian, returning the trajectory
/// `[psi(0), psi(dt), ..., psi(steps*dt)]`.  Use the streaming
/// [`KrylovPropagator`] when the trajectory itself is not needed.
pub fn propagate_krylov(
    op: &OperatorTermList,
    state: &DenseState,
    dt: f64,
    steps: usize,
    cfg: &ExactConfig,
) -> Result<Vec<DenseState>, ExactError> {
    let prop = KrylovPropagator::new(op, dt, cfg);
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(state.clone());
    let mut current = state.clone();
    for _ in 0..steps {
        prop.step(&mut current)?;
        trajectory.push(current.clone());
    }
    Ok(trajectory)
}

/// How the chain is prepared before the probe is switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// Ground state; in the ferromagnetic regime (`Delta <= -1`, degenerate
    /// polarized ground space) the equal superposition of the two polarized
    /// states is used instead so the coherence oscillates rather than just
    /// acquiring a phase.
    #[default]
    Auto,
    /// Force the sector-scan ground state even when it is a single polarized
    /// product state.
    GroundState,
    /// Force `(|up..up> + |down..down>)/sqrt(2)`.
    PolarizedSuperposition,
    /// Force `|up..up>`.
    PolarizedUp,
}

/// Builds the initial chain state and a descriptive label.
pub fn prepare_initial_state(
    params: &ModelParams,
    choice: InitialState,
    cfg: &ExactConfig,
) -> Result<(DenseState, f64, String), ExactError> {
    let build_ground = |cfg: &ExactConfig| -> Result<(DenseState, f64, String), ExactError> {
        let gs = ground_state_exact(params, None, cfg)?;
        let label = format!("ground state (2Sz = {}, E = {:.12})", gs.two_sz, gs.energy);
        Ok((gs.state, gs.energy, label))
    };
    let chain_energy = |state: &DenseState| {
        expectation_value(&crate::model::build_xxz_terms(params), state)
    };
    match choice {
        InitialState::Auto => {
            if params.delta <= -1.0 {
                let state = DenseState::polarized_superposition(params.l);
                let e = chain_energy(&state);
                Ok((state, e, "polarized superposition (ferromagnetic regime)".into()))
            } else {
                build_ground(cfg)
            }
        }
        InitialState::GroundState => build_ground(cfg),
        InitialState::PolarizedSuperposition => {
            let state = DenseState::polarized_superposition(params.l);
            let e = chain_energy(&state);
            Ok((state, e, "polarized superposition".into()))
        }
        InitialState::PolarizedUp => {
            let state = DenseState::polarized_up(params.l);
            let e = chain_energy(&state);
            Ok((state, e, "single polarized state".into()))
        }
    }
}

/// Qubit coherence via the two-branch overlap, exact to Krylov tolerance.
pub fn coherence_exact(params: &ModelParams, grid: &TimeGrid) -> Result<CoherenceTrace, ExactError> {
    coherence_exact_with(params, grid, InitialState::Auto, &ExactConfig::default())
}

/// [`coherence_exact`] with explicit initial-state choice and tuning.
pub fn coherence_exact_with(
    params: &ModelParams,
    grid: &TimeGrid,
    initial: InitialState,
    cfg: &ExactConfig,
) -> Result<CoherenceTrace, ExactError> {
    params.validate()?;
    if params.l > cfg.max_l {
        return Err(ExactError::ChainTooLarge { l: params.l, max: cfg.max_l });
    }
    let (state0, _, label) = prepare_initial_state(params, initial, cfg)?;
    let rho0 = C64::new(0.5, 0.0);

    let prop_plus = KrylovPropagator::new(&build_branch_terms(params, BranchSign::Plus), grid.dt(), cfg);
    let prop_minus =
        KrylovPropagator::new(&build_branch_terms(params, BranchSign::Minus), grid.dt(), cfg);
    let mut psi_plus = state0.clone();
    let mut psi_minus = state0;

    let mut values = Vec::with_capacity(grid.len());
    values.push(rho0);
    for step in 1..=grid.n_steps() {
        // The branches are independent; run them side by side.
        let (rp, rm) = rayon::join(
            || prop_plus.step(&mut psi_plus),
            || prop_minus.step(&mut psi_minus),
        );
        rp?;
        rm?;
        let t = step as f64 * grid.dt();
        let phase = C64::new(0.0, -params.h_z * t).exp();
        values.push(rho0 * phase * psi_minus.overlap(&psi_plus));
    }
    let mut meta = TraceMeta::new("exact", Some(*params));
    meta.notes.push(format!("initial state: {label}"));
    Ok(CoherenceTrace::from_grid(grid, values, meta))
}

/// Autocorrelation `C(t) = <Sz_M(t) Sz_M(0)>` in the prepared chain state.
///
/// Computed as `e^{i E0 t} <v|e^{-iHt}|v>` with `v = Sz_M |psi0>` and `E0` the
/// chain energy of `psi0`, which needs a single Krylov evolution.
pub fn correlation_exact(
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<CorrelationTrace, ExactError> {
    correlation_exact_with(params, grid, InitialState::Auto, &ExactConfig::default())
}

/// [`correlation_exact`] with explicit initial-state choice and tuning.
pub fn correlation_exact_with(
    params: &ModelParams,
    grid: &TimeGrid,
    initial: InitialState,
    cfg: &ExactConfig,
) -> Result<CorrelationTrace, ExactError> {
    params.validate()?;
    if params.l > cfg.max_l {
        return Err(ExactError::ChainTooLarge { l: params.l, max: cfg.max_l });
    }
    let (state0, energy, label) = prepare_initial_state(params, initial, cfg)?;
    let v0 = state0.apply_sz(params.m);
    let chain = crate::model::build_xxz_terms(params);
    let prop = KrylovPropagator::new(&chain, grid.dt(), cfg);

    let mut vt = v0.clone();
    let mut values = Vec::with_capacity(grid.len());
    values.push(v0.overlap(&v0));
    for step in 1..=grid.n_steps() {
        prop.step(&mut vt)?;
        let t = step as f64 * grid.dt();
        let phase = C64::new(0.0, energy * t).exp();
        values.push(phase * v0.overlap(&vt));
    }
    let mut meta = TraceMeta::new("exact-correlation", Some(*params));
    meta.notes.push(format!("initial state: {label}"));
    Ok(CorrelationTrace::from_grid(grid, values, meta))
}

/// Brute-force oracle: evolves the full qubit⊗chain state and reads off the
/// qubit coherence by tracing out the chain.  Exponentially larger than the
/// two-branch route, so it is capped at `L <= 12`.
pub fn qubit_chain_coherence(
    params: &ModelParams,
    chain_initial: &DenseState,
    grid: &TimeGrid,
    cfg: &ExactConfig,
) -> Result<CoherenceTrace, ExactError> {
    const MAX_ORACLE_L: usize = 12;
    params.validate()?;
    if params.l > MAX_ORACLE_L {
        return Err(ExactError::ChainTooLarge { l: params.l, max: MAX_ORACLE_L });
    }
    if chain_initial.l != params.l {
        return Err(ExactError::DimensionMismatch {
            len: chain_initial.amps.len(),
            l: params.l,
        });
    }
    let chain_dim = 1usize << params.l;
    let qubit_bit = 1u64 << params.l; // qubit stored as site L+1; up = |0>
    let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![C64::new(0.0, 0.0); chain_dim << 1];
    for (s, a) in chain_initial.amps.iter().enumerate() {
        amps[s] = w * a;
        amps[s | qubit_bit as usize] = w * a;
    }
    let mut full = DenseState::new(params.l + 1, amps)?;

    let op = qubit_chain_terms(params);
    let prop = KrylovPropagator::new(&op, grid.dt(), cfg);
    let read_rho01 = |state: &DenseState| -> C64 {
        (0..chain_dim)
            .map(|s| state.amps[s | qubit_bit as usize] * state.amps[s].conj())
            .sum()
    };

    let mut values = Vec::with_capacity(grid.len());
    values.push(read_rho01(&full));
    for _ in 1..=grid.n_steps() {
        prop.step(&mut full)?;
        values.push(read_rho01(&full));
    }
    let meta = TraceMeta::new("exact-full-oracle", Some(*params));
    Ok(CoherenceTrace::from_grid(grid, values, meta))
}

/// Von Neumann entanglement entropy across `bond` (cut between sites `bond`
/// and `bond + 1`, 1-based), in nats.
pub fn entanglement_entropy_dense(state: &DenseState, bond: usize) -> Result<f64, ExactError> {
    if bond < 1 || bond >= state.l {
        return Err(ExactError::InvalidBond { bond, max: state.l - 1 });
    }
    let left_dim = 1usize << bond;
    let right_dim = 1usize << (state.l - bond);
    let mut m = Array2::<C64>::zeros((left_dim, right_dim));
    let mask = (left_dim - 1) as u64;
    for (s, a) in state.amps.iter().enumerate() {
        let row = (s as u64 & mask) as usize;
        let col = s >> bond;
        m[(row, col)] = *a;
    }
    let (_, sv, _) = m.svd_into(false, false).expect("Schmidt decomposition failed");
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let mut entropy = 0.0;
    for s in sv.iter() {
        let p = s * s / total;
        if p > 1e-16 {
            entropy -= p * p.ln();
        }
    }
    Ok(entropy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_xxz_terms;

    fn params(delta: f64, l: usize) -> ModelParams {
        ModelParams::new(1.0, delta, l, 0.25, 0.0).unwrap()
    }

    fn cfg() -> ExactConfig {
        ExactConfig::default()
    }

    #[test]
    fn sector_basis_sizes_are_binomial() {
        let basis = SectorBasis::new(8, 0).unwrap();
        assert_eq!(basis.dim(), 70);
        let polarized = SectorBasis::new(8, 8).unwrap();
        assert_eq!(polarized.dim(), 1);
        assert!(SectorBasis::new(8, 7).is_err());
        assert!(SectorBasis::new(8, 10).is_err());
        for (i, &s) in basis.states().iter().enumerate() {
            assert_eq!(basis.index_of(s), Some(i));
        }
    }

    #[test]
    fn dimer_ground_state_is_the_singlet() {
        // L=2, Delta=0: E0 = -J/2 with state (|ud> - |du>)/sqrt(2).
        let gs = ground_state_exact(&params(0.0, 2), None, &cfg()).unwrap();
        assert!((gs.energy + 0.5).abs() <= 1e-12, "E = {}", gs.energy);
        assert_eq!(gs.two_sz, 0);
        let amps = gs.state.amplitudes();
        // Basis: bit0 = site1. |ud> means site1 up, site2 down -> index 0b01.
        let s = (amps[0b01] - amps[0b10]).norm() / std::f64::consts::SQRT_2;
        let a = (amps[0b01] + amps[0b10]).norm();
        assert!((s - 1.0).abs() <= 1e-10 || (s + 1.0).abs() <= 1e-10);
        assert!(a <= 1e-10, "symmetric component should vanish");

        // L=2, Delta=1: E0 = -3J/4.
        let heis = ground_state_exact(&params(1.0, 2), None, &cfg()).unwrap();
        assert!((heis.energy + 0.75).abs() <= 1e-12, "E = {}", heis.energy);
    }

    #[test]
    fn strong_ferromagnet_returns_a_polarized_product() {
        let gs = ground_state_exact(&params(-10.0, 4), None, &cfg()).unwrap();
        // E = J*Delta*(L-1)/4 for an aligned product state.
        assert!((gs.energy + 7.5).abs() <= 1e-10, "E = {}", gs.energy);
        assert_eq!(gs.two_sz, 4, "tie-break must pick the up-polarized sector");
        let up = DenseState::polarized_up(4);
        let fidelity = gs.state.overlap(&up).norm();
        assert!((fidelity - 1.0).abs() <= 1e-6);
        let entropy = entanglement_entropy_dense(&gs.state, 2).unwrap();
        assert!(entropy.abs() <= 1e-10, "product state entropy {entropy}");
    }

    #[test]
    fn sector_restriction_is_honored() {
        let gs = ground_state_exact(&params(-10.0, 4), Some(0), &cfg()).unwrap();
        assert_eq!(gs.two_sz, 0);
        assert!(gs.energy > -7.5, "Sz=0 sector must lie above the polarized states");
    }

    #[test]
    fn lanczos_and_dense_sector_paths_agree() {
        let p = params(0.5, 8);
        let dense = ground_state_exact(&p, Some(0), &cfg()).unwrap();
        let forced = ExactConfig { dense_max_l: 0, ..cfg() };
        let iterative = ground_state_exact(&p, Some(0), &forced).unwrap();
        assert!((dense.energy - iterative.energy).abs() <= 1e-9);
        let fid = dense.state.overlap(&iterative.state).norm();
        assert!((fid - 1.0).abs() <= 1e-8, "fidelity {fid}");
    }

    #[test]
    fn propagation_conserves_energy_and_norm() {
        let p = params(1.0, 10);
        let op = build_xxz_terms(&p);
        // A deliberately unbalanced product state far from equilibrium.
        let mut amps = vec![C64::new(0.0, 0.0); 1 << 10];
        amps[0b0000011111] = C64::new(1.0, 0.0);
        let mut state = DenseState::new(10, amps).unwrap();
        let e0 = expectation_value(&op, &state);
        let prop = KrylovPropagator::new(&op, 0.05, &cfg());
        for _ in 0..400 {
            prop.step(&mut state).unwrap();
        }
        let drift = (expectation_value(&op, &state) - e0).abs() / e0.abs().max(1.0);
        assert!(drift <= 1e-8, "relative energy drift {drift}");
        assert!((state.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn eigenstate_propagation_only_rotates_the_phase() {
        let p = params(0.5, 6);
        let gs = ground_state_exact(&p, None, &cfg()).unwrap();
        let op = build_xxz_terms(&p);
        let traj = propagate_krylov(&op, &gs.state, 0.1, 20, &cfg()).unwrap();
        for state in &traj {
            let fid = gs.state.overlap(state).norm();
            assert!((fid - 1.0).abs() <= 1e-11, "fidelity {fid}");
        }
    }

    #[test]
    fn dimer_coherence_matches_the_closed_form() {
        // L=2, Delta=0: |rho01(t)|/rho0 = 1 - g^2/(8 Omega^2) sin^2(Omega t),
        // Omega = sqrt(J^2/4 + g^2/16).
        let p = params(0.0, 2);
        let grid = TimeGrid::new(20.0, 0.05).unwrap();
        let trace = coherence_exact(&p, &grid).unwrap();
        let (j, g) = (p.j, p.g);
        let omega = (j * j / 4.0 + g * g / 16.0).sqrt();
        let amp = g * g / (8.0 * omega * omega);
        for (t, v) in grid.times().iter().zip(trace.values()) {
            let want = 0.5 * (1.0 - amp * (omega * t).sin().powi(2));
            assert!(
                (v.re - want).abs() <= 1e-10 && v.im.abs() <= 1e-10,
                "t = {t}: got {v}, want {want}"
            );
        }
    }

    #[test]
    fn decoupled_probe_keeps_full_coherence() {
        let p = ModelParams::new(1.0, 0.5, 6, 0.0, 0.0).unwrap();
        let grid = TimeGrid::new(5.0, 0.1).unwrap();
        let trace = coherence_exact(&p, &grid).unwrap();
        for v in trace.values() {
            assert!((v - C64::new(0.5, 0.0)).norm() <= 1e-10);
        }
    }

    #[test]
    fn level_splitting_only_adds_a_rigid_phase() {
        let with_hz = ModelParams::new(1.0, 0.5, 6, 0.25, 0.7).unwrap();
        let without = ModelParams::new(1.0, 0.5, 6, 0.25, 0.0).unwrap();
        let grid = TimeGrid::new(4.0, 0.1).unwrap();
        let a = coherence_exact(&with_hz, &grid).unwrap();
        let b = coherence_exact(&without, &grid).unwrap();
        for ((t, va), vb) in grid.times().iter().zip(a.values()).zip(b.values()) {
            let phase = C64::new(0.0, -0.7 * t).exp();
            assert!((va - phase * vb).norm() <= 1e-10);
        }
    }

    #[test]
    fn correlation_starts_at_one_quarter_and_is_stationary() {
        let p = params(0.5, 8);
        let grid = TimeGrid::new(5.0, 0.1).unwrap();
        let corr = correlation_exact(&p, &grid).unwrap();
        let c0 = corr.values()[0];
        assert!((c0.re - 0.25).abs() <= 1e-12 && c0.im.abs() <= 1e-14);

        // Reverse-time correlator must be the complex conjugate.
        let cfg = cfg();
        let gs = ground_state_exact(&p, None, &cfg).unwrap();
        let v0 = gs.state.apply_sz(p.m);
        let chain = build_xxz_terms(&p);
        let back = KrylovPropagator::new(&chain, -0.1, &cfg);
        let mut vt = v0.clone();
        for (step, forward) in corr.values().iter().enumerate().skip(1) {
            back.step(&mut vt).unwrap();
            let t = step as f64 * 0.1;
            let phase = C64::new(0.0, -gs.energy * t).exp();
            let reverse = phase * v0.overlap(&vt);
            assert!((reverse - forward.conj()).norm() <= 1e-10);
        }
    }

    #[test]
    fn correlation_phase_shortcut_matches_double_evolution() {
        // Same correlator through an independent route that also evolves the
        // ground state numerically instead of using its energy phase.
        let p = params(0.8, 8);
        let grid = TimeGrid::new(4.0, 0.1).unwrap();
        let corr = correlation_exact(&p, &grid).unwrap();

        let cfg = cfg();
        let gs = ground_state_exact(&p, None, &cfg).unwrap();
        let chain = build_xxz_terms(&p);
        let prop = KrylovPropagator::new(&chain, 0.1, &cfg);
        let mut g_t = gs.state.clone();
        let mut v_t = gs.state.apply_sz(p.m);
        for (step, shortcut) in corr.values().iter().enumerate().skip(1) {
            prop.step(&mut g_t).unwrap();
            prop.step(&mut v_t).unwrap();
            let _ = step;
            let direct = g_t.apply_sz(p.m).overlap(&v_t);
            assert!((direct - shortcut).norm() <= 1e-10);
        }
    }

    #[test]
    fn branch_overlap_agrees_with_full_qubit_chain_evolution() {
        let grid = TimeGrid::new(8.0, 0.1).unwrap();
        for (delta, h_z) in [(1.0, 0.0), (-1.5, 0.4)] {
            let p = ModelParams::new(1.0, delta, 6, 0.25, h_z).unwrap();
            let cfg = cfg();
            let branch = coherence_exact(&p, &grid).unwrap();
            let (chain0, _, _) = prepare_initial_state(&p, InitialState::Auto, &cfg).unwrap();
            let full = qubit_chain_coherence(&p, &chain0, &grid, &cfg).unwrap();
            let max_dev = branch
                .values()
                .iter()
                .zip(full.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(
                max_dev <= 1e-10,
                "Delta = {delta}, h_z = {h_z}: deviation {max_dev}"
            );
        }
    }

    #[test]
    fn ferromagnetic_coherence_oscillates_at_half_coupling() {
        // With the polarized superposition both branches only acquire phases:
        // rho01(t) = 0.5 cos(g t / 2) for every Delta <= -1.
        let p = params(-1.5, 6);
        let grid = TimeGrid::new(30.0, 0.1).unwrap();
        let trace = coherence_exact(&p, &grid).unwrap();
        for (t, v) in grid.times().iter().zip(trace.values()) {
            let want = 0.5 * (0.5 * p.g * t).cos();
            assert!((v.re - want).abs() <= 1e-9, "t = {t}");
            assert!(v.im.abs() <= 1e-9);
        }
    }

    #[test]
    fn entropy_of_known_states() {
        // Product state: zero entropy everywhere.
        let product = DenseState::polarized_up(6);
        for bond in 1..6 {
            assert!(entanglement_entropy_dense(&product, bond).unwrap() <= 1e-12);
        }
        // Polarized superposition: a two-state Schmidt split, ln 2 at every bond.
        let cat = DenseState::polarized_superposition(6);
        let s = entanglement_entropy_dense(&cat, 3).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() <= 1e-12);
        assert!(entanglement_entropy_dense(&cat, 0).is_err());
        assert!(entanglement_entropy_dense(&cat, 6).is_err());
    }

    #[test]
    fn oversized_chains_are_rejected() {
        let p = ModelParams::new(1.0, 0.5, 16, 0.25, 0.0).unwrap();
        assert!(matches!(
            ground_state_exact(&p, None, &cfg()),
            Err(ExactError::ChainTooLarge { .. })
        ));
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        assert!(matches!(
            coherence_exact(&p, &grid),
            Err(ExactError::ChainTooLarge { .. })
        ));
    }
}
