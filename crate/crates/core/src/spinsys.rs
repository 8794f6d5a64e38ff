//! Coupled electron–nuclear spin Hamiltonians, ESR transitions and clock
//! transitions.
//!
//! The static field is taken along z. The Hamiltonian, in angular-frequency
//! units, is
//!
//! ```text
//! H/ħ = γ_e B S_z − γ_n B I_z + 2πA (S_x I_x + S_y I_y + S_z I_z)
//! ```
//!
//! with γ_e = g_e μ_B/ħ and γ_n = g_n μ_N/ħ. Matrices are expressed in the
//! product basis |m_S, m_I⟩ with m_S outer and m_I inner, both running from
//! +j down to −j: basis index = (S − m_S)(2I + 1) + (I − m_I).
//!
//! Because the hyperfine coupling is isotropic and B ∥ z, the total
//! projection m_F = m_S + m_I is conserved. Levels are computed block by
//! block and carry a [`Branch`] label (m_F, rank inside the block) that
//! follows each level continuously across a field sweep, even where levels of
//! different m_F cross.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_MAGNETON, HBAR, NUCLEAR_MAGNETON};
use crate::error::{invalid, Error, Result};
use crate::linalg::{eigensystem, CMatrix, CVector};

/// |df/dB| below which a stationary point counts as a clock transition (Hz/T).
pub const CLOCK_TOLERANCE_HZ_PER_T: f64 = 1e3;
/// Bisection stops once the bracketing interval is this narrow (T).
pub const CLOCK_FIELD_RESOLUTION_T: f64 = 1e-12;
/// Level gaps below this are treated as degenerate (Hz).
pub const DEGENERACY_GAP_HZ: f64 = 1.0;
/// Transverse S_x matrix element above which a transition is ESR-allowed in
/// the high-field limit.
pub const ESR_ALLOWED_MATRIX_ELEMENT: f64 = 0.1;

const HALF_INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    /// Electron spin S.
    pub electron_spin: f64,
    /// Nuclear spin I (0 for no nucleus).
    pub nuclear_spin: f64,
    pub g_e: f64,
    pub g_n: f64,
    /// Isotropic hyperfine constant A (Hz).
    pub hyperfine_hz: f64,
    pub label: String,
}

fn twice(j: f64, what: &str) -> Result<usize> {
    let two_j = 2.0 * j;
    if !two_j.is_finite() || two_j < 0.0 || (two_j - two_j.round()).abs() > HALF_INTEGER_TOL {
        return Err(invalid(format!("{what} = {j} is not a non-negative half-integer")));
    }
    Ok(two_j.round() as usize)
}

impl SpinSystem {
    pub fn new(
        label: impl Into<String>,
        electron_spin: f64,
        nuclear_spin: f64,
        g_e: f64,
        g_n: f64,
        hyperfine_hz: f64,
    ) -> Result<Self> {
        let sys = Self {
            electron_spin,
            nuclear_spin,
            g_e,
            g_n,
            hyperfine_hz,
            label: label.into(),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let two_s = twice(self.electron_spin, "electron spin")?;
        twice(self.nuclear_spin, "nuclear spin")?;
        if two_s == 0 {
            return Err(invalid("electron spin must be at least 1/2"));
        }
        if !(self.g_e.is_finite() && self.g_e > 0.0) {
            return Err(invalid(format!("electron g-factor must be positive, got {}", self.g_e)));
        }
        if !self.g_n.is_finite() || !self.hyperfine_hz.is_finite() {
            return Err(invalid("nuclear g-factor and hyperfine constant must be finite"));
        }
        Ok(())
    }

    /// Free electron: S = 1/2, no nucleus.
    pub fn free_electron() -> Self {
        Self {
            electron_spin: 0.5,
            nuclear_spin: 0.0,
            g_e: crate::constants::G_FREE_ELECTRON,
            g_n: 0.0,
            hyperfine_hz: 0.0,
            label: "free-electron".into(),
        }
    }

    /// Phosphorus donor in silicon (³¹P, I = 1/2). Literature values.
    pub fn phosphorus_si_like() -> Self {
        Self {
            electron_spin: 0.5,
            nuclear_spin: 0.5,
            g_e: 1.9985,
            g_n: 2.2632,
            hyperfine_hz: 117.53e6,
            label: "P:Si-like".into(),
        }
    }

    /// Bismuth donor in silicon (²⁰⁹Bi, I = 9/2). Literature values.
    pub fn bismuth_si_like() -> Self {
        Self {
            electron_spin: 0.5,
            nuclear_spin: 4.5,
            g_e: 2.0003,
            g_n: 0.9135,
            hyperfine_hz: 1475.17e6,
            label: "Bi:Si-like".into(),
        }
    }

    pub const PRESET_NAMES: [&'static str; 3] = ["free-electron", "P:Si-like", "Bi:Si-like"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "free-electron" => Some(Self::free_electron()),
            "P:Si-like" => Some(Self::phosphorus_si_like()),
            "Bi:Si-like" => Some(Self::bismuth_si_like()),
            _ => None,
        }
    }

    pub fn electron_dim(&self) -> usize {
        (2.0 * self.electron_spin).round() as usize + 1
    }

    pub fn nuclear_dim(&self) -> usize {
        (2.0 * self.nuclear_spin).round() as usize + 1
    }

    /// Hilbert-space dimension (2S+1)(2I+1).
    pub fn dim(&self) -> usize {
        self.electron_dim() * self.nuclear_dim()
    }

    /// γ_e = g_e μ_B / ħ (rad s⁻¹ T⁻¹).
    pub fn gamma_e(&self) -> f64 {
        self.g_e * BOHR_MAGNETON / HBAR
    }

    /// γ_n = g_n μ_N / ħ (rad s⁻¹ T⁻¹).
    pub fn gamma_n(&self) -> f64 {
        self.g_n * NUCLEAR_MAGNETON / HBAR
    }

    /// Hyperfine constant in rad/s; ignored when I = 0.
    fn hyperfine_angular(&self) -> f64 {
        if self.nuclear_dim() == 1 {
            0.0
        } else {
            2.0 * PI * self.hyperfine_hz
        }
    }

    /// Electron and nuclear spin operators on the product space.
    pub fn operators(&self) -> SpinOperators {
        SpinOperators::new(self.electron_spin, self.nuclear_spin)
    }

    /// Twice the total projection 2(m_S + m_I) of each basis state.
    fn twice_m_f(&self) -> Vec<i32> {
        let (ds, di) = (self.electron_dim() as i32, self.nuclear_dim() as i32);
        let mut out = Vec::with_capacity((ds * di) as usize);
        for is in 0..ds {
            for ii in 0..di {
                out.push((ds - 1 - 2 * is) + (di - 1 - 2 * ii));
            }
        }
        out
    }

    /// Basis indices of each m_F block, keyed by 2 m_F.
    fn blocks(&self) -> BTreeMap<i32, Vec<usize>> {
        let mut blocks: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        for (k, m) in self.twice_m_f().into_iter().enumerate() {
            blocks.entry(m).or_default().push(k);
        }
        blocks
    }
}

/// Spin matrices of the electron and nucleus embedded in the product space.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub ix: CMatrix,
    pub iy: CMatrix,
    pub iz: CMatrix,
}

/// (J_z, J_+) for a single spin j in the descending-m basis.
fn single_spin(j: f64) -> (CMatrix, CMatrix) {
    let d = (2.0 * j).round() as usize + 1;
    let m = |k: usize| j - k as f64;
    let jz = CMatrix::from_fn(
        d,
        d,
        |r, c| if r == c { Complex64::from(m(r)) } else { Complex64::ZERO },
    );
    // ⟨m+1|J+|m⟩ = sqrt(j(j+1) − m(m+1)); row r holds m(r) = m(c) + 1
    let jp = CMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            let mc = m(c);
            Complex64::from((j * (j + 1.0) - mc * (mc + 1.0)).max(0.0).sqrt())
        } else {
            Complex64::ZERO
        }
    });
    (jz, jp)
}

impl SpinOperators {
    pub fn new(electron_spin: f64, nuclear_spin: f64) -> Self {
        let (sz, sp) = single_spin(electron_spin);
        let (iz, ip) = single_spin(nuclear_spin);
        let id_s = CMatrix::identity(sz.nrows(), sz.nrows());
        let id_i = CMatrix::identity(iz.nrows(), iz.nrows());
        let half = Complex64::from(0.5);
        let half_i = Complex64::new(0.0, 0.5);
        let sx1 = (&sp + sp.adjoint()) * half;
        let sy1 = (&sp - sp.adjoint()) * (-half_i);
        let ix1 = (&ip + ip.adjoint()) * half;
        let iy1 = (&ip - ip.adjoint()) * (-half_i);
        Self {
            sx: sx1.kronecker(&id_i),
            sy: sy1.kronecker(&id_i),
            sz: sz.kronecker(&id_i),
            ix: id_s.kronecker(&ix1),
            iy: id_s.kronecker(&iy1),
            iz: id_s.kronecker(&iz),
        }
    }

    /// S·I.
    pub fn s_dot_i(&self) -> CMatrix {
        &self.sx * &self.ix + &self.sy * &self.iy + &self.sz * &self.iz
    }
}

/// Field-independent and field-proportional parts: H(B) = H_hf + B·dH/dB.
fn hamiltonian_parts(sys: &SpinSystem, ops: &SpinOperators) -> (CMatrix, CMatrix) {
    let hf = ops.s_dot_i() * Complex64::from(sys.hyperfine_angular());
    let dh = &ops.sz * Complex64::from(sys.gamma_e()) - &ops.iz * Complex64::from(sys.gamma_n());
    (hf, dh)
}

/// Spin Hamiltonian in rad/s at field `b` (T) along z.
pub fn build_hamiltonian(sys: &SpinSystem, b: f64) -> Result<CMatrix> {
    sys.validate()?;
    check_field(b)?;
    let ops = sys.operators();
    let (hf, dh) = hamiltonian_parts(sys, &ops);
    Ok(hf + dh * Complex64::from(b))
}

/// Zeeman part only: B (γ_e S_z − γ_n I_z).
pub fn zeeman_hamiltonian(sys: &SpinSystem, b: f64) -> Result<CMatrix> {
    sys.validate()?;
    check_field(b)?;
    let ops = sys.operators();
    Ok(hamiltonian_parts(sys, &ops).1 * Complex64::from(b))
}

fn check_field(b: f64) -> Result<()> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(invalid(format!("field must be finite and non-negative, got {b} T")));
    }
    Ok(())
}

/// Adiabatic label of a level: the conserved 2m_F and its energy rank inside
/// the m_F block (0 = lowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub twice_m_f: i32,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct Level {
    /// Energy (rad/s).
    pub energy: f64,
    /// Hellmann–Feynman slope dE/dB (rad s⁻¹ T⁻¹).
    pub slope: f64,
    /// ⟨S_z⟩.
    pub sz: f64,
    pub branch: Branch,
    pub state: CVector,
}

/// Eigenlevels at one field, energy-ordered (ties by ascending ⟨S_z⟩).
#[derive(Debug, Clone)]
pub struct SpinLevels {
    pub field: f64,
    pub levels: Vec<Level>,
}

impl SpinLevels {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn index_of(&self, branch: Branch) -> Option<usize> {
        self.levels.iter().position(|l| l.branch == branch)
    }

    /// Index of the nearest other level and its gap (Hz).
    fn nearest(&self, k: usize) -> Option<(usize, f64)> {
        let e = self.levels[k].energy;
        self.levels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(j, l)| (j, (l.energy - e).abs() / (2.0 * PI)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn expectation(op: &CMatrix, v: &CVector) -> f64 {
    (v.adjoint() * op * v)[(0, 0)].re
}

fn matrix_element(op: &CMatrix, bra: &CVector, ket: &CVector) -> Complex64 {
    (bra.adjoint() * op * ket)[(0, 0)]
}

/// Diagonalize block by block and return all levels.
pub fn levels(sys: &SpinSystem, b: f64) -> Result<SpinLevels> {
    sys.validate()?;
    check_field(b)?;
    let ops = sys.operators();
    let (hf, dh) = hamiltonian_parts(sys, &ops);
    let h = &hf + &dh * Complex64::from(b);
    let d = sys.dim();

    let mut levels = Vec::with_capacity(d);
    for (twice_m_f, idx) in sys.blocks() {
        let n = idx.len();
        let block = CMatrix::from_fn(n, n, |r, c| h[(idx[r], idx[c])]);
        let es = eigensystem(&block)?;
        for rank in 0..n {
            let mut state = CVector::zeros(d);
            for (r, &i) in idx.iter().enumerate() {
                state[i] = es.states[(r, rank)];
            }
            levels.push(Level {
                energy: es.energies[rank],
                slope: expectation(&dh, &state),
                sz: expectation(&ops.sz, &state),
                branch: Branch { twice_m_f, rank },
                state,
            });
        }
    }
    order_levels(&mut levels);
    Ok(SpinLevels { field: b, levels })
}

fn order_levels(levels: &mut [Level]) {
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let tie = 2.0 * PI * DEGENERACY_GAP_HZ;
    let mut start = 0;
    while start < levels.len() {
        let mut end = start + 1;
        while end < levels.len() && levels[end].energy - levels[end - 1].energy < tie {
            end += 1;
        }
        levels[start..end].sort_by(|a, b| a.sz.total_cmp(&b.sz).then(a.branch.cmp(&b.branch)));
        start = end;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub level_lo: usize,
    pub level_hi: usize,
    pub branch_lo: Branch,
    pub branch_hi: Branch,
    /// Hz.
    pub frequency: f64,
    /// Hz/T.
    pub dfdb: f64,
    /// |⟨hi|S_x|lo⟩|.
    pub matrix_element: f64,
    /// T.
    pub field: f64,
}

fn transition_between(levels: &SpinLevels, ops: &SpinOperators, lo: usize, hi: usize) -> Transition {
    let (l, h) = (&levels.levels[lo], &levels.levels[hi]);
    Transition {
        level_lo: lo,
        level_hi: hi,
        branch_lo: l.branch,
        branch_hi: h.branch,
        frequency: ((h.energy - l.energy) / (2.0 * PI)).max(0.0),
        dfdb: (h.slope - l.slope) / (2.0 * PI),
        matrix_element: matrix_element(&ops.sx, &h.state, &l.state).norm(),
        field: levels.field,
    }
}

/// All level pairs whose transverse electron-spin matrix element is at least
/// `min_matrix_element`, sorted by frequency.
pub fn transitions(sys: &SpinSystem, b: f64, min_matrix_element: f64) -> Result<Vec<Transition>> {
    if min_matrix_element.is_nan() || min_matrix_element < 0.0 {
        return Err(invalid("matrix-element threshold must be non-negative"));
    }
    let lv = levels(sys, b)?;
    let ops = sys.operators();
    let n = lv.levels.len();
    let mut out = Vec::new();
    for lo in 0..n {
        for hi in lo + 1..n {
            let t = transition_between(&lv, &ops, lo, hi);
            if t.matrix_element >= min_matrix_element {
                out.push(t);
            }
        }
    }
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(out)
}

/// df/dB (Hz/T) of the transition's levels at field `b`, from the
/// Hellmann–Feynman theorem. Levels are identified by their energy-ordered
/// indices at `b`.
pub fn dfdb(sys: &SpinSystem, t: &Transition, b: f64) -> Result<f64> {
    let lv = levels(sys, b)?;
    let n = lv.levels.len();
    if t.level_lo >= t.level_hi || t.level_hi >= n {
        return Err(invalid(format!(
            "transition levels ({}, {}) invalid for a {n}-level system",
            t.level_lo, t.level_hi
        )));
    }
    for k in [t.level_lo, t.level_hi] {
        if let Some((other, gap_hz)) = lv.nearest(k) {
            if gap_hz < DEGENERACY_GAP_HZ {
                return Err(Error::DegenerateLevels {
                    level: k,
                    other,
                    gap_hz,
                });
            }
        }
    }
    Ok((lv.levels[t.level_hi].slope - lv.levels[t.level_lo].slope) / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockTransition {
    pub transition: Transition,
    /// T.
    pub field_star: f64,
    /// d²f/dB² at the turning point (Hz/T²).
    pub curvature: f64,
}

/// Level of one branch: (energy, slope, state) after diagonalizing only its
/// m_F block.
struct BranchSolver<'a> {
    sys: &'a SpinSystem,
    hf: CMatrix,
    dh: CMatrix,
    blocks: BTreeMap<i32, Vec<usize>>,
}

impl<'a> BranchSolver<'a> {
    fn new(sys: &'a SpinSystem) -> Self {
        let ops = sys.operators();
        let (hf, dh) = hamiltonian_parts(sys, &ops);
        Self {
            sys,
            hf,
            dh,
            blocks: sys.blocks(),
        }
    }

    fn solve(&self, branch: Branch, b: f64) -> Result<(f64, f64, CVector)> {
        let idx = &self.blocks[&branch.twice_m_f];
        let n = idx.len();
        let block = CMatrix::from_fn(n, n, |r, c| self.hf[(idx[r], idx[c])] + self.dh[(idx[r], idx[c])] * b);
        let es = eigensystem(&block)?;
        let mut state = CVector::zeros(self.sys.dim());
        for (r, &i) in idx.iter().enumerate() {
            state[i] = es.states[(r, branch.rank)];
        }
        let slope = expectation(&self.dh, &state);
        Ok((es.energies[branch.rank], slope, state))
    }

    /// Signed d(f_hi − f_lo)/dB in Hz/T.
    fn derivative(&self, lo: Branch, hi: Branch, b: f64) -> Result<f64> {
        let (_, s_lo, _) = self.solve(lo, b)?;
        let (_, s_hi, _) = self.solve(hi, b)?;
        Ok((s_hi - s_lo) / (2.0 * PI))
    }
}

/// Branch pairs that are ESR-allowed in the high-field limit, ordered
/// (lower, upper) by their high-field energies.
fn esr_branch_pairs(sys: &SpinSystem, b_max: f64) -> Result<Vec<(Branch, Branch)>> {
    let gamma_e_hz = sys.gamma_e() / (2.0 * PI);
    let hyperfine_scale = sys.hyperfine_hz.abs() * (sys.nuclear_spin + 0.5);
    let b_ref = (1e3 * hyperfine_scale / gamma_e_hz).max(b_max).max(1.0);
    let lv = levels(sys, b_ref)?;
    let ops = sys.operators();
    let n = lv.levels.len();
    let mut pairs = Vec::new();
    for lo in 0..n {
        for hi in lo + 1..n {
            let t = transition_between(&lv, &ops, lo, hi);
            if t.matrix_element >= ESR_ALLOWED_MATRIX_ELEMENT {
                pairs.push((t.branch_lo, t.branch_hi));
            }
        }
    }
    Ok(pairs)
}

/// Locate stationary points of the ESR-allowed transition frequencies over
/// `[b_lo, b_hi]`. A transition is ESR-allowed when its S_x matrix element
/// exceeds [`ESR_ALLOWED_MATRIX_ELEMENT`] in the high-field limit; each is
/// tracked by its branch labels, so level crossings elsewhere in the
/// spectrum do not break it up.
pub fn find_clock_transitions(sys: &SpinSystem, range: (f64, f64), grid: usize) -> Result<Vec<ClockTransition>> {
    sys.validate()?;
    let (b_lo, b_hi) = range;
    check_field(b_lo)?;
    check_field(b_hi)?;
    if b_hi <= b_lo {
        return Err(invalid(format!("field range [{b_lo}, {b_hi}] is empty")));
    }
    if grid < 100 {
        return Err(invalid(format!(
            "clock search grid must have at least 100 points, got {grid}"
        )));
    }

    let solver = BranchSolver::new(sys);
    let pairs = esr_branch_pairs(sys, b_hi)?;
    let fields: Vec<f64> = (0..grid)
        .map(|k| b_lo + (b_hi - b_lo) * k as f64 / (grid - 1) as f64)
        .collect();

    let mut found = Vec::new();
    for &(lo, hi) in &pairs {
        let mut prev: Option<(f64, f64)> = None;
        for &b in &fields {
            let d = solver.derivative(lo, hi, b)?;
            if let Some((b0, d0)) = prev {
                if d0 != 0.0 && d0.signum() != d.signum() {
                    if let Some(root) = bisect(&solver, lo, hi, (b0, d0), (b, d))? {
                        found.push((lo, hi, root));
                    }
                }
            } else if d == 0.0 {
                found.push((lo, hi, b));
            }
            prev = Some((b, d));
        }
    }

    let mut out = Vec::with_capacity(found.len());
    for (lo, hi, b_star) in found {
        out.push(describe_clock(sys, &solver, lo, hi, b_star, range)?);
    }
    out.sort_by(|a, b| a.field_star.total_cmp(&b.field_star));
    Ok(out)
}

fn bisect(
    solver: &BranchSolver,
    lo: Branch,
    hi: Branch,
    mut left: (f64, f64),
    mut right: (f64, f64),
) -> Result<Option<f64>> {
    while right.0 - left.0 > CLOCK_FIELD_RESOLUTION_T {
        let mid = 0.5 * (left.0 + right.0);
        if mid <= left.0 || mid >= right.0 {
            break;
        }
        let d = solver.derivative(lo, hi, mid)?;
        if d == 0.0 {
            return Ok(Some(mid));
        }
        if d.signum() == left.1.signum() {
            left = (mid, d);
        } else {
            right = (mid, d);
        }
    }
    let (b, d) = if left.1.abs() <= right.1.abs() { left } else { right };
    // a sign flip without a small derivative is a discontinuity, not a root
    Ok((d.abs() < CLOCK_TOLERANCE_HZ_PER_T).then_some(b))
}

fn describe_clock(
    sys: &SpinSystem,
    solver: &BranchSolver,
    lo: Branch,
    hi: Branch,
    b_star: f64,
    range: (f64, f64),
) -> Result<ClockTransition> {
    let lv = levels(sys, b_star)?;
    let ops = sys.operators();
    let (i_lo, i_hi) = match (lv.index_of(lo), lv.index_of(hi)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid("branch label lost while describing a clock transition")),
    };
    let (a, b) = if i_lo < i_hi { (i_lo, i_hi) } else { (i_hi, i_lo) };
    let mut transition = transition_between(&lv, &ops, a, b);
    let sign = if i_lo < i_hi { 1.0 } else { -1.0 };
    transition.dfdb = sign * solver.derivative(lo, hi, b_star)?;

    let h = 1e-6;
    let (b_minus, b_plus) = ((b_star - h).max(range.0.max(0.0)), b_star + h);
    let curvature =
        sign * (solver.derivative(lo, hi, b_plus)? - solver.derivative(lo, hi, b_minus)?) / (b_plus - b_minus);
    Ok(ClockTransition {
        transition,
        field_star: b_star,
        curvature,
    })
}

/// ħ g₀ = |⟨hi| g_e μ_B δB·S − g_n μ_N δB·I |lo⟩| for a field fluctuation
/// expressed in the spin frame (z ∥ B₀). Returns g₀ in rad/s.
pub fn transverse_coupling(
    sys: &SpinSystem,
    ops: &SpinOperators,
    lo: &DVector<Complex64>,
    hi: &DVector<Complex64>,
    delta_b_spin_frame: [f64; 3],
) -> f64 {
    let [bx, by, bz] = delta_b_spin_frame;
    let ge = Complex64::from(sys.gamma_e());
    let gn = Complex64::from(sys.gamma_n());
    let op = (&ops.sx * Complex64::from(bx) + &ops.sy * Complex64::from(by) + &ops.sz * Complex64::from(bz)) * ge
        - (&ops.ix * Complex64::from(bx) + &ops.iy * Complex64::from(by) + &ops.iz * Complex64::from(bz)) * gn;
    matrix_element(&op, hi, lo).norm()
}
