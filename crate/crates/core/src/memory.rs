//! Linear-regime simulation of a multi-mode spin-ensemble memory.
//!
//! In the single-excitation (or weak-drive) limit the cavity amplitude `a` and
//! the spin amplitudes `s_j` obey
//!
//! ```text
//! da/dt   = −iδ_c a − (κ/2) a − i Σ_j g_j s_j
//! ds_j/dt = −iδ_j s_j − (γ₂/2) s_j − i g_j a
//! ```
//!
//! which is integrated with a fixed-step classical Runge–Kutta scheme. A dense
//! matrix-exponential propagator is kept alongside for cross-checks on small
//! ensembles.
//!
//! A photon is written by loading it into the cavity and swapping it into the
//! bright mode u_j = g_j/g_ens. A gradient step then winds a phase pattern
//! across the spins, which moves the excitation into a dark mode and frees the
//! bright mode for the next photon. Retrieval undoes the steps in reverse and
//! swaps each excitation back out.
//!
//! The swap time is found numerically as the first maximum of the transferred
//! population. For identical resonant spins it is π/(2g_ens), the 2×2 Rabi
//! half-period; a full Rabi cycle, π/g_ens, returns the excitation to the
//! cavity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::SpinEnsemble;
use crate::error::{invalid, Error, Result};
use crate::linalg::{expm, inner, norm_sqr, CMatrix, CVector};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest ensemble accepted by the dense propagator.
pub const DENSE_MAX_SPINS: usize = 50;
/// Fraction of the fastest rate used as the default time step.
const DEFAULT_STEP_FRACTION: f64 = 0.01;
/// Upper bound of the swap-time search, in units of π/g_ens.
const SWAP_WINDOW_PERIODS: f64 = 10.0;
/// Continuous readout stops once this fraction of the stored norm remains.
const CONTINUOUS_RESIDUAL: f64 = 1e-6;
/// Most trace points kept per recorded run.
const MAX_TRACE_POINTS: usize = 2000;

/// How the stored excitation leaves the memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Swap back into the cavity and release its whole content through a
    /// switched output port at the swap-out time.
    #[default]
    SwapOut,
    /// Leave the output port open (rate κ) and collect the emitted flux until
    /// the memory is empty.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// g_j (rad/s).
    pub couplings: Vec<f64>,
    /// δ_j (rad/s).
    pub detunings: Vec<f64>,
    /// Cavity energy decay rate κ (rad/s).
    pub kappa: f64,
    /// Homogeneous spin decay rate γ₂ (s⁻¹).
    pub gamma2: f64,
    /// Cavity detuning δ_c (rad/s).
    pub cavity_detuning: f64,
    pub readout: Readout,
}

impl MemoryParams {
    pub fn new(couplings: Vec<f64>, detunings: Vec<f64>, kappa: f64, gamma2: f64) -> Result<Self> {
        let p = Self {
            couplings,
            detunings,
            kappa,
            gamma2,
            cavity_detuning: 0.0,
            readout: Readout::SwapOut,
        };
        p.validate()?;
        Ok(p)
    }

    /// Every member becomes one simulated spin; a subsampled ensemble has its
    /// couplings scaled so that g_ens is preserved.
    pub fn from_ensemble(e: &SpinEnsemble, kappa: f64, gamma2: f64) -> Result<Self> {
        e.validate()?;
        if e.is_empty() {
            return Err(invalid("memory needs at least one spin"));
        }
        let scale = (e.n_total / e.len() as f64).sqrt();
        Self::new(
            e.couplings().iter().map(|g| g * scale).collect(),
            e.detunings(),
            kappa,
            gamma2,
        )
    }

    /// `n` identical resonant spins of coupling `g0`.
    pub fn identical(n: usize, g0: f64, kappa: f64, gamma2: f64) -> Result<Self> {
        Self::new(vec![g0; n], vec![0.0; n], kappa, gamma2)
    }

    pub fn with_cavity_detuning(mut self, delta_c: f64) -> Self {
        self.cavity_detuning = delta_c;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.couplings.len() != self.detunings.len() {
            return Err(invalid(format!(
                "{} couplings but {} detunings",
                self.couplings.len(),
                self.detunings.len()
            )));
        }
        if self.couplings.iter().any(|g| !g.is_finite()) || self.detunings.iter().any(|d| !d.is_finite()) {
            return Err(invalid("couplings and detunings must be finite"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0 && self.gamma2.is_finite() && self.gamma2 >= 0.0) {
            return Err(invalid("κ and γ₂ must be finite and non-negative"));
        }
        if !self.cavity_detuning.is_finite() {
            return Err(invalid("cavity detuning must be finite"));
        }
        Ok(())
    }

    pub fn n_spins(&self) -> usize {
        self.couplings.len()
    }

    pub fn g_ens(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Generator with every frequency and coupling negated; running it
    /// forward undoes lossless evolution under `self`.
    pub fn time_reversed(&self) -> Self {
        Self {
            couplings: self.couplings.iter().map(|g| -g).collect(),
            detunings: self.detunings.iter().map(|d| -d).collect(),
            cavity_detuning: -self.cavity_detuning,
            ..self.clone()
        }
    }

    /// 1% of the shortest time scale among g_ens, κ, γ₂, |δ_j| and |δ_c|.
    pub fn default_dt(&self) -> f64 {
        let max_delta = self.detunings.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let fastest = [
            self.g_ens(),
            self.kappa,
            self.gamma2,
            max_delta,
            self.cavity_detuning.abs(),
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        if fastest > 0.0 {
            DEFAULT_STEP_FRACTION / fastest
        } else {
            1.0
        }
    }

    /// Dense generator M with dx/dt = M x for x = (a, s_1, …, s_N).
    pub fn dense_generator(&self) -> CMatrix {
        let n = self.n_spins();
        let mut m = CMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = Complex64::new(-self.kappa / 2.0, -self.cavity_detuning);
        for j in 0..n {
            m[(0, j + 1)] = -I * self.couplings[j];
            m[(j + 1, 0)] = -I * self.couplings[j];
            m[(j + 1, j + 1)] = Complex64::new(-self.gamma2 / 2.0, -self.detunings[j]);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    pub cavity: Complex64,
    pub spins: Vec<Complex64>,
    /// s.
    pub time: f64,
}

impl MemoryState {
    pub fn vacuum(n: usize) -> Self {
        Self {
            cavity: Complex64::ZERO,
            spins: vec![Complex64::ZERO; n],
            time: 0.0,
        }
    }

    /// Photon of amplitude `amplitude` in the cavity, spins empty.
    pub fn photon(amplitude: Complex64, n: usize) -> Self {
        Self {
            cavity: amplitude,
            ..Self::vacuum(n)
        }
    }

    /// Spins prepared in `mode`, cavity empty.
    pub fn in_mode(mode: &ModeVector) -> Self {
        Self {
            cavity: Complex64::ZERO,
            spins: mode.amplitudes.clone(),
            time: 0.0,
        }
    }

    /// |a|² + Σ|s_j|².
    pub fn norm_sqr(&self) -> f64 {
        self.cavity.norm_sqr() + self.stored_norm_sqr()
    }

    /// Σ|s_j|².
    pub fn stored_norm_sqr(&self) -> f64 {
        norm_sqr(&self.spins)
    }

    fn to_vector(&self) -> CVector {
        CVector::from_iterator(
            self.spins.len() + 1,
            std::iter::once(self.cavity).chain(self.spins.iter().copied()),
        )
    }

    fn from_vector(v: &CVector, time: f64) -> Self {
        Self {
            cavity: v[0],
            spins: v.iter().skip(1).copied().collect(),
            time,
        }
    }
}

/// Unit vector over the spins defining a collective mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub amplitudes: Vec<Complex64>,
    /// Number of gradient steps from the bright mode (0 = bright).
    pub k: i64,
}

impl ModeVector {
    /// u_j = g_j / g_ens.
    pub fn bright(params: &MemoryParams) -> Result<Self> {
        let g = params.g_ens();
        if g == 0.0 {
            return Err(invalid("bright mode undefined: all couplings vanish"));
        }
        Ok(Self {
            amplitudes: params.couplings.iter().map(|c| Complex64::from(c / g)).collect(),
            k: 0,
        })
    }

    /// Bright mode wound by the phase pattern φ_j: u_j = (g_j/g_ens) e^{−iφ_j}.
    pub fn with_phases(params: &MemoryParams, phases: &[f64], k: i64) -> Result<Self> {
        let bright = Self::bright(params)?;
        if phases.len() != bright.amplitudes.len() {
            return Err(invalid("phase pattern length does not match the ensemble"));
        }
        let amplitudes = bright
            .amplitudes
            .iter()
            .zip(phases)
            .map(|(u, p)| u * Complex64::cis(-p))
            .collect();
        Ok(Self { amplitudes, k })
    }

    /// ⟨u|s⟩.
    pub fn overlap(&self, state: &MemoryState) -> Complex64 {
        inner(&self.amplitudes, &state.spins)
    }
}

/// Orthonormalize modes in order (Gram–Schmidt). Modes that are linearly
/// dependent on earlier ones are dropped.
pub fn gram_schmidt(modes: &[ModeVector]) -> Vec<ModeVector> {
    let mut out: Vec<ModeVector> = Vec::with_capacity(modes.len());
    for m in modes {
        let mut v = m.amplitudes.clone();
        for q in &out {
            let c = inner(&q.amplitudes, &v);
            for (vi, qi) in v.iter_mut().zip(&q.amplitudes) {
                *vi -= c * qi;
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(ModeVector { amplitudes: v, k: m.k });
        }
    }
    out
}

/// One sample of a recorded run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// s.
    pub time: f64,
    pub cavity: Complex64,
    /// Σ|s_j|².
    pub stored_norm: f64,
    /// κ|a|² (photons/s).
    pub output_flux: f64,
}

/// Runge–Kutta integrator with reusable stage buffers.
struct Rk4<'a> {
    params: &'a MemoryParams,
    spin_rate: Vec<Complex64>,
    cavity_rate: Complex64,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl<'a> Rk4<'a> {
    fn new(params: &'a MemoryParams) -> Self {
        let n = params.n_spins();
        Self {
            params,
            spin_rate: params
                .detunings
                .iter()
                .map(|d| Complex64::new(-params.gamma2 / 2.0, -d))
                .collect(),
            cavity_rate: Complex64::new(-params.kappa / 2.0, -params.cavity_detuning),
            k: std::array::from_fn(|_| vec![Complex64::ZERO; n]),
            tmp: vec![Complex64::ZERO; n],
        }
    }

    /// Advance by `h`; returns the emitted energy ∫κ|a|² over the step.
    fn step(&mut self, a: &mut Complex64, s: &mut [Complex64], h: f64) -> f64 {
        let n = s.len();
        let mut ka = [Complex64::ZERO; 4];
        let mut stage_a = [*a; 4];
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;

        let (g, spin_rate, cavity_rate) = (&self.params.couplings, &self.spin_rate, self.cavity_rate);
        let rhs = |a: Complex64, s: &[Complex64], ds: &mut [Complex64]| {
            let mut drive = Complex64::ZERO;
            for j in 0..s.len() {
                drive += g[j] * s[j];
                ds[j] = spin_rate[j] * s[j] - I * (g[j] * a);
            }
            cavity_rate * a - I * drive
        };

        ka[0] = rhs(*a, s, k1);
        stage_a[1] = *a + ka[0] * (h / 2.0);
        for j in 0..n {
            tmp[j] = s[j] + k1[j] * (h / 2.0);
        }
        ka[1] = rhs(stage_a[1], tmp, k2);
        stage_a[2] = *a + ka[1] * (h / 2.0);
        for j in 0..n {
            tmp[j] = s[j] + k2[j] * (h / 2.0);
        }
        ka[2] = rhs(stage_a[2], tmp, k3);
        stage_a[3] = *a + ka[2] * h;
        for j in 0..n {
            tmp[j] = s[j] + k3[j] * h;
        }
        ka[3] = rhs(stage_a[3], tmp, k4);

        *a += (ka[0] + ka[1] * 2.0 + ka[2] * 2.0 + ka[3]) * (h / 6.0);
        for j in 0..n {
            s[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
        }
        let kappa = self.params.kappa;
        let flux = |z: Complex64| kappa * z.norm_sqr();
        (flux(stage_a[0]) + 2.0 * flux(stage_a[1]) + 2.0 * flux(stage_a[2]) + flux(stage_a[3])) * (h / 6.0)
    }
}

/// Result of integrating with output bookkeeping.
struct Run {
    state: MemoryState,
    emitted: f64,
    trace: Vec<TracePoint>,
}

fn check_step(dt: f64, duration: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(invalid(format!("duration must be non-negative, got {duration}")));
    }
    Ok(())
}

fn check_state(state: &MemoryState, params: &MemoryParams) -> Result<()> {
    if state.spins.len() != params.n_spins() {
        return Err(invalid(format!(
            "state has {} spins, parameters have {}",
            state.spins.len(),
            params.n_spins()
        )));
    }
    Ok(())
}

fn finite(state: &MemoryState) -> bool {
    state.cavity.is_finite() && state.spins.iter().all(|z| z.is_finite())
}

/// Integrate for `duration` with steps no longer than `dt`. With `record`,
/// a decimated trace is kept. `stop` ends the run early once it returns true.
fn integrate(
    state: &MemoryState,
    params: &MemoryParams,
    duration: f64,
    dt: f64,
    record: bool,
    mut stop: impl FnMut(&MemoryState) -> bool,
) -> Result<Run> {
    check_state(state, params)?;
    check_step(dt, duration)?;
    let steps = (duration / dt).ceil().max(if duration > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let stride = (steps / MAX_TRACE_POINTS).max(1);

    let mut rk = Rk4::new(params);
    let mut out = state.clone();
    let t0 = state.time;
    let mut emitted = 0.0;
    let mut trace = Vec::new();
    let sample = |s: &MemoryState| TracePoint {
        time: s.time,
        cavity: s.cavity,
        stored_norm: s.stored_norm_sqr(),
        output_flux: params.kappa * s.cavity.norm_sqr(),
    };
    if record {
        trace.push(sample(&out));
    }
    for k in 0..steps {
        emitted += rk.step(&mut out.cavity, &mut out.spins, h);
        out.time = t0 + (k + 1) as f64 * h;
        if !finite(&out) {
            return Err(Error::NumericalInstability { time_s: out.time });
        }
        let last = k + 1 == steps;
        let done = stop(&out);
        if record && ((k + 1) % stride == 0 || last || done) {
            trace.push(sample(&out));
        }
        if done {
            break;
        }
    }
    Ok(Run {
        state: out,
        emitted,
        trace,
    })
}

/// Advance `state` by `duration` with fixed steps of at most `dt`.
pub fn evolve(state: &MemoryState, params: &MemoryParams, duration: f64, dt: f64) -> Result<MemoryState> {
    params.validate()?;
    Ok(integrate(state, params, duration, dt, false, |_| false)?.state)
}

/// Same as [`evolve`], also returning a decimated trace.
pub fn evolve_recorded(
    state: &MemoryState,
    params: &MemoryParams,
    duration: f64,
    dt: f64,
) -> Result<(MemoryState, Vec<TracePoint>)> {
    params.validate()?;
    let run = integrate(state, params, duration, dt, true, |_| false)?;
    Ok((run.state, run.trace))
}

/// exp(M t) x with a dense propagator; limited to [`DENSE_MAX_SPINS`].
pub fn evolve_dense(state: &MemoryState, params: &MemoryParams, duration: f64) -> Result<MemoryState> {
    params.validate()?;
    check_state(state, params)?;
    if params.n_spins() > DENSE_MAX_SPINS {
        return Err(invalid(format!(
            "dense propagation is limited to {DENSE_MAX_SPINS} spins, got {}",
            params.n_spins()
        )));
    }
    let u = expm(&(params.dense_generator() * Complex64::from(duration)));
    let x = u * state.to_vector();
    Ok(MemoryState::from_vector(&x, state.time + duration))
}

/// Transfer times found by maximizing the moved population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapTimes {
    /// Cavity → bright mode (s).
    pub into_spins: f64,
    /// Bright mode → cavity (s).
    pub out_of_spins: f64,
}

/// Population whose first maximum defines a transfer time.
#[derive(Clone, Copy)]
enum Target {
    Spins,
    Cavity,
}

impl Target {
    /// d/dt of the population along the equations of motion.
    fn rate(self, params: &MemoryParams, s: &MemoryState) -> f64 {
        let a = s.cavity;
        match self {
            Target::Spins => s
                .spins
                .iter()
                .zip(&params.couplings)
                .zip(&params.detunings)
                .map(|((&sj, &g), &d)| {
                    let ds = Complex64::new(-params.gamma2 / 2.0, -d) * sj - I * (g * a);
                    2.0 * (sj.conj() * ds).re
                })
                .sum(),
            Target::Cavity => {
                let drive: Complex64 = s.spins.iter().zip(&params.couplings).map(|(sj, g)| sj * g).sum();
                let da = Complex64::new(-params.kappa / 2.0, -params.cavity_detuning) * a - I * drive;
                2.0 * (a.conj() * da).re
            }
        }
    }
}

/// Time of the first maximum of the target population along the trajectory
/// from `init`: the first downward zero crossing of its rate, bisected.
fn first_optimum(params: &MemoryParams, init: &MemoryState, target: Target) -> Result<f64> {
    let g = params.g_ens();
    if !(g > 0.0) {
        return Err(Error::NoTransfer {
            window_s: f64::INFINITY,
        });
    }
    let window = SWAP_WINDOW_PERIODS * PI / g;
    let dt = params.default_dt();
    let steps = (window / dt).ceil() as usize;
    let h = window / steps as f64;

    let mut rk = Rk4::new(params);
    let mut cur = init.clone();
    let mut rising = false;
    for k in 0..steps {
        let prev = cur.clone();
        rk.step(&mut cur.cavity, &mut cur.spins, h);
        cur.time = init.time + (k + 1) as f64 * h;
        if !finite(&cur) {
            return Err(Error::NumericalInstability { time_s: cur.time });
        }
        let r = target.rate(params, &cur);
        if r > 0.0 {
            rising = true;
        } else if rising {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let s = integrate(&prev, params, mid, mid, false, |_| false)?.state;
                if target.rate(params, &s) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(prev.time - init.time + 0.5 * (lo + hi));
        }
    }
    Err(Error::NoTransfer { window_s: window })
}

/// Numerically optimized swap times for the given parameters.
pub fn swap_times(params: &MemoryParams) -> Result<SwapTimes> {
    params.validate()?;
    let n = params.n_spins();
    let into_spins = first_optimum(params, &MemoryState::photon(Complex64::ONE, n), Target::Spins)?;
    let bright = ModeVector::bright(params)?;
    let out_of_spins = first_optimum(params, &MemoryState::in_mode(&bright), Target::Cavity)?;
    Ok(SwapTimes {
        into_spins,
        out_of_spins,
    })
}

/// Swap the cavity content into the spins over the optimized transfer time.
pub fn swap(state: &MemoryState, params: &MemoryParams) -> Result<MemoryState> {
    let t = swap_times(params)?.into_spins;
    evolve(state, params, t, params.default_dt())
}

/// s_j ← s_j e^{−iφ_j}.
pub fn apply_phases(state: &MemoryState, phases: &[f64]) -> Result<MemoryState> {
    if phases.len() != state.spins.len() {
        return Err(invalid(format!(
            "{} phases for {} spins",
            phases.len(),
            state.spins.len()
        )));
    }
    let spins = state
        .spins
        .iter()
        .zip(phases)
        .map(|(s, p)| s * Complex64::cis(-p))
        .collect();
    Ok(MemoryState { spins, ..state.clone() })
}

/// Linear field gradient: spin j is shifted by `slope · x_j` (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGradient {
    /// rad s⁻¹ m⁻¹.
    pub slope: f64,
    /// Spin coordinates along the gradient (m).
    pub positions: Vec<f64>,
}

impl LinearGradient {
    /// Phases φ_j = slope · x_j · τ.
    pub fn phases(&self, tau: f64) -> Vec<f64> {
        self.positions.iter().map(|x| self.slope * x * tau).collect()
    }

    /// Pulse length that winds exactly one full turn across the span of
    /// positions.
    pub fn one_turn_duration(&self) -> Option<f64> {
        let (lo, hi) = self
            .positions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let span = hi - lo;
        (span > 0.0 && self.slope != 0.0).then(|| 2.0 * PI / (self.slope.abs() * span))
    }
}

/// Apply a gradient pulse of length `tau`.
pub fn apply_gradient(state: &MemoryState, gradient: &LinearGradient, tau: f64) -> Result<MemoryState> {
    apply_phases(state, &gradient.phases(tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    /// Emitted energy over the stored norm, in [0, 1].
    pub efficiency: f64,
    /// Released cavity amplitude (swap-out readout only).
    pub output_amplitude: Option<Complex64>,
    /// s.
    pub duration: f64,
    pub trace: Vec<TracePoint>,
}

/// Undo `stored_phases`, then read the excitation out of the spins.
pub fn retrieve(state: &MemoryState, params: &MemoryParams, stored_phases: &[f64]) -> Result<Retrieval> {
    params.validate()?;
    check_state(state, params)?;
    let stored = state.stored_norm_sqr();
    let undo: Vec<f64> = stored_phases.iter().map(|p| -p).collect();
    let rephased = apply_phases(state, &undo)?;
    if stored == 0.0 {
        return Ok(Retrieval {
            efficiency: 0.0,
            output_amplitude: None,
            duration: 0.0,
            trace: vec![],
        });
    }
    let dt = params.default_dt();
    match params.readout {
        Readout::SwapOut => {
            let t = swap_times(params)?.out_of_spins;
            let run = integrate(&rephased, params, t, dt, true, |_| false)?;
            let a = run.state.cavity;
            Ok(Retrieval {
                efficiency: (a.norm_sqr() / stored).min(1.0),
                output_amplitude: Some(a),
                duration: t,
                trace: run.trace,
            })
        }
        Readout::Continuous => {
            if params.kappa <= 0.0 {
                return Err(invalid("continuous readout needs κ > 0"));
            }
            let g = params.g_ens();
            let window = SWAP_WINDOW_PERIODS * PI / g.max(f64::MIN_POSITIVE) + 40.0 / params.kappa;
            let floor = CONTINUOUS_RESIDUAL * stored;
            let run = integrate(&rephased, params, window, dt, true, |s| s.norm_sqr() < floor)?;
            Ok(Retrieval {
                efficiency: (run.emitted / stored).clamp(0.0, 1.0),
                output_amplitude: None,
                duration: run.state.time - state.time,
                trace: run.trace,
            })
        }
    }
}

/// Gradient step applied after each write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Phase pattern φ_j of one gradient step.
    pub step_phases: Vec<f64>,
}

impl Schedule {
    /// φ_j = 2π j / N: successive steps cycle through the discrete Fourier
    /// modes of an evenly spaced ensemble.
    pub fn fourier(n: usize) -> Self {
        Self {
            step_phases: (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect(),
        }
    }

    pub fn from_gradient(gradient: &LinearGradient, tau: f64) -> Self {
        Self {
            step_phases: gradient.phases(tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodeReport {
    /// Retrieved amplitude of each input, in write order.
    pub retrieved: Vec<Complex64>,
    /// T[k][l]: amplitude retrieved in slot k for unit input in slot l.
    pub transfer: Vec<Vec<Complex64>>,
    /// |T_kk|².
    pub fidelity: Vec<f64>,
    /// |T_kl|² off the diagonal, zero on it.
    pub crosstalk: Vec<Vec<f64>>,
    pub max_crosstalk: f64,
    pub mean_fidelity: f64,
    /// |⟨in|out⟩|² / (‖in‖² ‖out‖²) for the given inputs.
    pub state_fidelity: f64,
    /// Σ|out|² / Σ|in|².
    pub efficiency: f64,
    /// Gram matrix |⟨u_k|u_l⟩| of the stored mode patterns.
    pub mode_overlaps: Vec<Vec<f64>>,
    pub swap_times: SwapTimes,
}

fn run_protocol(
    params: &MemoryParams,
    inputs: &[Complex64],
    schedule: &Schedule,
    times: &SwapTimes,
    dt: f64,
) -> Result<Vec<Complex64>> {
    let m = inputs.len();
    let n = params.n_spins();
    let undo: Vec<f64> = schedule.step_phases.iter().map(|p| -p).collect();
    let mut state = MemoryState::vacuum(n);
    for &c in inputs {
        state.cavity += c;
        state = evolve(&state, params, times.into_spins, dt)?;
        state = apply_phases(&state, &schedule.step_phases)?;
    }
    let mut out = vec![Complex64::ZERO; m];
    for slot in (0..m).rev() {
        state = apply_phases(&state, &undo)?;
        state = evolve(&state, params, times.out_of_spins, dt)?;
        out[slot] = state.cavity;
        // released through the output port
        state.cavity = Complex64::ZERO;
    }
    Ok(out)
}

/// Write `inputs` one after another (swap in, one gradient step each), then
/// read them back in reverse order. The protocol is linear, so it is run once
/// per unit input to build the full transfer matrix.
pub fn multimode_store_retrieve(
    inputs: &[Complex64],
    params: &MemoryParams,
    schedule: &Schedule,
) -> Result<MultimodeReport> {
    params.validate()?;
    let m = inputs.len();
    let n = params.n_spins();
    if m == 0 {
        return Err(invalid("at least one input is required"));
    }
    if m > n {
        return Err(Error::Capacity { modes: m, spins: n });
    }
    if schedule.step_phases.len() != n {
        return Err(invalid("gradient step pattern length does not match the ensemble"));
    }
    let times = swap_times(params)?;
    let dt = params.default_dt();

    let mut transfer = vec![vec![Complex64::ZERO; m]; m];
    for l in 0..m {
        let mut unit = vec![Complex64::ZERO; m];
        unit[l] = Complex64::ONE;
        let out = run_protocol(params, &unit, schedule, &times, dt)?;
        for k in 0..m {
            transfer[k][l] = out[k];
        }
    }

    let retrieved: Vec<Complex64> = (0..m)
        .map(|k| (0..m).map(|l| transfer[k][l] * inputs[l]).sum())
        .collect();
    let fidelity: Vec<f64> = (0..m).map(|k| transfer[k][k].norm_sqr()).collect();
    let crosstalk: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| if k == l { 0.0 } else { transfer[k][l].norm_sqr() })
                .collect()
        })
        .collect();
    let max_crosstalk = crosstalk.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let in_norm = norm_sqr(inputs);
    let out_norm = norm_sqr(&retrieved);
    let state_fidelity = if in_norm > 0.0 && out_norm > 0.0 {
        inner(inputs, &retrieved).norm_sqr() / (in_norm * out_norm)
    } else {
        0.0
    };

    // input l sits M − l gradient steps from the bright mode once all are written
    let modes: Vec<ModeVector> = (0..m)
        .map(|l| {
            let k = (m - l) as i64;
            let phases: Vec<f64> = schedule.step_phases.iter().map(|p| p * k as f64).collect();
            ModeVector::with_phases(params, &phases, k)
        })
        .collect::<Result<_>>()?;
    let mode_overlaps = modes
        .iter()
        .map(|u| {
            modes
                .iter()
                .map(|v| inner(&u.amplitudes, &v.amplitudes).norm())
                .collect()
        })
        .collect();

    Ok(MultimodeReport {
        retrieved,
        mean_fidelity: fidelity.iter().sum::<f64>() / m as f64,
        fidelity,
        crosstalk,
        max_crosstalk,
        state_fidelity,
        efficiency: if in_norm > 0.0 { out_norm / in_norm } else { 0.0 },
        transfer,
        mode_overlaps,
        swap_times: times,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoPhotons {
    /// Integrated κ|a|² from the simulated echo.
    pub simulated: f64,
    /// N² · 4g₀²/(κγ₂*).
    pub analytic: f64,
}

/// Most representative spins used by the echo simulation.
pub const ECHO_MAX_SIM_SPINS: usize = 128;

/// Photons radiated by an in-phase ensemble of `n_spins` identical spins
/// (coupling `g0`, rad/s) that dephases at rate `gamma2_star` inside a cavity
/// of linewidth `kappa`.
///
/// The inhomogeneous line is Lorentzian with half-width γ₂*, sampled at
/// evenly spaced quantiles so the result is deterministic; each simulated spin
/// stands for N/N_sim physical spins.
pub fn echo_photon_count(g0: f64, kappa: f64, n_spins: f64, gamma2_star: f64) -> Result<EchoPhotons> {
    if !(kappa > 0.0 && gamma2_star > 0.0 && n_spins >= 1.0 && g0 >= 0.0) || !g0.is_finite() || !n_spins.is_finite() {
        return Err(invalid("echo model needs κ, γ2* > 0, N ≥ 1 and g0 ≥ 0"));
    }
    let analytic = n_spins * n_spins * 4.0 * g0 * g0 / (kappa * gamma2_star);
    if g0 == 0.0 {
        return Ok(EchoPhotons {
            simulated: 0.0,
            analytic,
        });
    }
    let n_sim = (n_spins.floor() as usize).clamp(1, ECHO_MAX_SIM_SPINS);
    let weight = n_spins / n_sim as f64;
    let detunings: Vec<f64> = (0..n_sim)
        .map(|j| gamma2_star * (PI * ((j as f64 + 0.5) / n_sim as f64 - 0.5)).tan())
        .collect();
    let params = MemoryParams::new(vec![g0 * weight.sqrt(); n_sim], detunings, kappa, 0.0)?;
    let state = MemoryState {
        cavity: Complex64::ZERO,
        spins: vec![Complex64::from(weight.sqrt()); n_sim],
        time: 0.0,
    };

    // the cavity rings down within a few 1/κ of the spins dephasing
    let duration = 10.0 / gamma2_star + 10.0 / kappa;
    let dt = 10.0 * params.default_dt();
    let run = integrate(&state, &params, duration, dt, false, |_| false)?;
    Ok(EchoPhotons {
        simulated: run.emitted,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn uncoupled_cavity_rotates() {
        let p = MemoryParams::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], 0.0, 0.0)
            .unwrap()
            .with_cavity_detuning(2.0);
        let mut s = MemoryState::photon(c(1.0, 0.0), 3);
        s.spins[1] = c(0.3, 0.0);
        let t = 1.7;
        let out = evolve(&s, &p, t, 1e-3).unwrap();
        assert!((out.cavity - Complex64::cis(-2.0 * t)).norm() < 1e-12);
        assert!((out.spins[1] - c(0.3, 0.0) * Complex64::cis(-2.0 * t)).norm() < 1e-12);
        assert_eq!(out.spins[0], Complex64::ZERO);
        assert!((out.time - t).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = MemoryParams::identical(2, 1.0, 0.0, 0.0).unwrap();
        let s = MemoryState::vacuum(2);
        assert!(evolve(&s, &p, 1.0, 0.0).is_err());
        assert!(evolve(&s, &p, -1.0, 0.1).is_err());
        assert!(evolve(&MemoryState::vacuum(3), &p, 1.0, 0.1).is_err());
        assert!(MemoryParams::new(vec![1.0], vec![], 0.0, 0.0).is_err());
        assert!(MemoryParams::new(vec![1.0], vec![0.0], -1.0, 0.0).is_err());
        assert_eq!(evolve(&s, &p, 0.0, 0.1).unwrap(), s);
    }

    #[test]
    fn instability_is_reported() {
        // RK4 is unstable for hκ/2 well beyond 2.8
        let p = MemoryParams::identical(1, 1.0, 1e3, 0.0).unwrap();
        let err = evolve(&MemoryState::photon(Complex64::ONE, 1), &p, 1e3, 1.0).unwrap_err();
        assert!(matches!(err, Error::NumericalInstability { .. }));
    }

    #[test]
    fn single_spin_rabi_swap() {
        let g = 2.0;
        let p = MemoryParams::identical(1, g, 0.0, 0.0).unwrap();
        let times = swap_times(&p).unwrap();
        assert!((times.into_spins - PI / (2.0 * g)).abs() < 1e-9, "{times:?}");
        let s = swap(&MemoryState::photon(Complex64::ONE, 1), &p).unwrap();
        assert!((s.spins[0].norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_transfer_without_coupling() {
        let p = MemoryParams::identical(2, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(swap_times(&p), Err(Error::NoTransfer { .. })));
    }

    #[test]
    fn phases_round_trip() {
        let p = MemoryParams::identical(4, 1.0, 0.0, 0.0).unwrap();
        let s = MemoryState::in_mode(&ModeVector::bright(&p).unwrap());
        let phases = [0.1, -2.0, 3.3, 0.7];
        assert_eq!(apply_phases(&s, &[0.0; 4]).unwrap(), s);
        let wound = apply_phases(&s, &phases).unwrap();
        assert!((wound.norm_sqr() - s.norm_sqr()).abs() < 1e-15);
        let back = apply_phases(&wound, &phases.map(|x| -x)).unwrap();
        for (a, b) in back.spins.iter().zip(&s.spins) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(apply_phases(&s, &[0.0; 3]).is_err());
    }

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let p = MemoryParams::new(vec![1.0, 2.0, 0.5, 1.5], vec![0.0; 4], 0.0, 0.0).unwrap();
        let modes: Vec<ModeVector> = (0..4)
            .map(|k| ModeVector::with_phases(&p, &[0.0, 0.4 * k as f64, 1.1 * k as f64, 2.0 * k as f64], k).unwrap())
            .collect();
        let q = gram_schmidt(&modes);
        assert_eq!(q.len(), 4);
        for (i, u) in q.iter().enumerate() {
            for (j, v) in q.iter().enumerate() {
                let o = inner(&u.amplitudes, &v.amplitudes).norm();
                assert!((o - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        // the first is still the bright mode
        assert!((inner(&q[0].amplitudes, &modes[0].amplitudes).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_one_turn() {
        let g = LinearGradient {
            slope: 3.0,
            positions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        };
        let tau = g.one_turn_duration().unwrap();
        let ph = g.phases(tau);
        assert!((ph[4] - ph[0] - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn capacity_error() {
        let p = MemoryParams::identical(2, 1.0, 0.0, 0.0).unwrap();
        let err = multimode_store_retrieve(&[Complex64::ONE; 3], &p, &Schedule::fourier(2)).unwrap_err();
        assert_eq!(err, Error::Capacity { modes: 3, spins: 2 });
    }

    #[test]
    fn echo_zero_coupling() {
        let e = echo_photon_count(0.0, 1e5, 100.0, 1e3).unwrap();
        assert_eq!(e.simulated, 0.0);
        assert_eq!(e.analytic, 0.0);
    }

    #[test]
    fn echo_analytic_branch() {
        // C0 = 4 g0² / (κ γ2*) = 1e-3 with N = 100 → 10 photons
        let (kappa, g2s) = (1e6, 1e4);
        let g0 = (1e-3 * kappa * g2s / 4.0f64).sqrt();
        let e = echo_photon_count(g0, kappa, 100.0, g2s).unwrap();
        assert!((e.analytic - 10.0).abs() < 1e-9);
    }
}
