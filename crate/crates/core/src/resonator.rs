//! Microwave resonators: zero-point current and field, single-spin coupling
//! and Purcell relaxation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, MU_0, SPEED_OF_LIGHT};
use crate::error::{invalid, Error, Result};
use crate::spinsys::{self, SpinSystem, Transition};

/// Infinite thin wire through `point` along `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wire {
    /// A point on the wire axis (m).
    pub point: [f64; 3],
    /// Axis direction; normalized on use.
    pub direction: [f64; 3],
}

impl Wire {
    /// Wire along z through the origin.
    pub fn along_z() -> Self {
        Self {
            point: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel {
    /// Angular resonance frequency (rad/s).
    pub omega_c: f64,
    /// Loaded quality factor.
    pub q: f64,
    /// Characteristic impedance (Ω).
    pub impedance: f64,
    pub wire: Option<Wire>,
    /// Mode volume (m³).
    pub mode_volume: Option<f64>,
    pub label: String,
}

impl ResonatorModel {
    pub fn new(label: impl Into<String>, frequency_hz: f64, q: f64, impedance: f64) -> Result<Self> {
        let r = Self {
            omega_c: 2.0 * PI * frequency_hz,
            q,
            impedance,
            wire: None,
            mode_volume: None,
            label: label.into(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_wire(mut self, wire: Wire) -> Self {
        self.wire = Some(wire);
        self
    }

    pub fn with_mode_volume(mut self, v: f64) -> Self {
        self.mode_volume = Some(v);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.omega_c) {
            return Err(invalid(format!(
                "resonator frequency must be positive, got {} rad/s",
                self.omega_c
            )));
        }
        if !positive(self.q) {
            return Err(invalid(format!("quality factor must be positive, got {}", self.q)));
        }
        if !positive(self.impedance) {
            return Err(invalid(format!("impedance must be positive, got {} Ω", self.impedance)));
        }
        if let Some(v) = self.mode_volume {
            if !positive(v) {
                return Err(invalid(format!("mode volume must be positive, got {v} m³")));
            }
        }
        if let Some(w) = &self.wire {
            if norm3(w.direction) == 0.0 || !w.direction.iter().chain(&w.point).all(|x| x.is_finite()) {
                return Err(invalid("wire needs a finite point and a non-zero direction"));
            }
        }
        Ok(())
    }

    pub fn frequency_hz(&self) -> f64 {
        self.omega_c / (2.0 * PI)
    }

    /// κ = ω_c / Q (rad/s).
    pub fn kappa(&self) -> f64 {
        self.omega_c / self.q
    }

    /// L = Z / ω_c (H).
    pub fn inductance(&self) -> f64 {
        self.impedance / self.omega_c
    }

    /// Free-space wavelength λ = 2πc/ω_c (m).
    pub fn wavelength(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.omega_c
    }
}

/// Current carried by the vacuum fluctuations, i_zpf = ω_c √(ħ / 2Z).
pub fn zero_point_current(r: &ResonatorModel) -> f64 {
    r.omega_c * (HBAR / (2.0 * r.impedance)).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Biot–Savart field (T) of the resonator wire carrying `current` (A),
/// evaluated at `point` (m).
pub fn field_at_point(r: &ResonatorModel, current: f64, point: [f64; 3]) -> Result<[f64; 3]> {
    let wire = r
        .wire
        .ok_or_else(|| invalid(format!("resonator '{}' has no wire geometry", r.label)))?;
    let u = scale3(wire.direction, 1.0 / norm3(wire.direction));
    let rel = sub3(point, wire.point);
    let perp = sub3(rel, scale3(u, dot3(rel, u)));
    let d = norm3(perp);
    if d == 0.0 || d <= 1e-15 * norm3(rel) {
        return Err(Error::SingularGeometry);
    }
    let magnitude = MU_0 * current / (2.0 * PI * d);
    Ok(scale3(cross3(u, perp), magnitude / d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    /// Single-spin coupling g₀ (rad/s).
    pub g0: f64,
    /// |δB| transverse to B₀ at the spin (T).
    pub zero_point_field: f64,
    pub level_lo: usize,
    pub level_hi: usize,
    /// Transition frequency (Hz).
    pub frequency: f64,
}

impl CouplingResult {
    pub fn g0_hz(&self) -> f64 {
        self.g0 / (2.0 * PI)
    }
}

/// Components of `delta_b` in a frame whose z axis is along `b0_direction`.
fn to_spin_frame(b0_direction: [f64; 3], delta_b: [f64; 3]) -> Result<[f64; 3]> {
    let n = norm3(b0_direction);
    if !(n.is_finite() && n > 0.0) {
        return Err(invalid("static field direction must be a non-zero vector"));
    }
    let z = scale3(b0_direction, 1.0 / n);
    let par = dot3(delta_b, z);
    let perp = norm3(sub3(delta_b, scale3(z, par)));
    Ok([perp, 0.0, par])
}

/// g₀ of a transition driven by the field fluctuation `delta_b` (T, lab
/// frame). The static field points along `b0_direction`.
pub fn single_spin_coupling(
    sys: &SpinSystem,
    t: &Transition,
    b0_direction: [f64; 3],
    delta_b: [f64; 3],
) -> Result<CouplingResult> {
    let local = to_spin_frame(b0_direction, delta_b)?;
    let lv = spinsys::levels(sys, t.field)?;
    let lo = lv.index_of(t.branch_lo).unwrap_or(t.level_lo);
    let hi = lv.index_of(t.branch_hi).unwrap_or(t.level_hi);
    if lo >= lv.levels.len() || hi >= lv.levels.len() {
        return Err(invalid("transition refers to levels outside the spin system"));
    }
    let ops = sys.operators();
    let g0 = spinsys::transverse_coupling(sys, &ops, &lv.levels[lo].state, &lv.levels[hi].state, local);
    Ok(CouplingResult {
        g0,
        zero_point_field: local[0],
        level_lo: lo,
        level_hi: hi,
        frequency: (lv.levels[hi].energy - lv.levels[lo].energy).abs() / (2.0 * PI),
    })
}

/// Cavity-filtered emission rate Γ(δ) = (4g₀²/κ) / (1 + (2δ/κ)²), all in rad/s.
pub fn purcell_rate(g0: f64, kappa: f64, delta: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!("cavity damping rate must be positive, got {kappa}")));
    }
    let x = 2.0 * delta / kappa;
    Ok(4.0 * g0 * g0 / kappa / (1.0 + x * x))
}

/// Purcell enhancement 3Qλ³ / (4π²V).
pub fn purcell_factor(q: f64, wavelength: f64, mode_volume: f64) -> Result<f64> {
    if !(q > 0.0 && wavelength > 0.0 && mode_volume > 0.0) {
        return Err(invalid("Purcell factor needs positive Q, wavelength and mode volume"));
    }
    Ok(3.0 * q * wavelength.powi(3) / (4.0 * PI * PI * mode_volume))
}

/// Free-space magnetic-dipole spontaneous emission rate
/// μ₀ω³μ² / (3πħc³) for a moment `magnetic_moment` (J/T) at `omega` (rad/s).
pub fn free_space_emission_rate(magnetic_moment: f64, omega: f64) -> Result<f64> {
    if !(magnetic_moment > 0.0 && omega > 0.0) {
        return Err(invalid("emission rate needs a positive moment and frequency"));
    }
    Ok(MU_0 * omega.powi(3) * magnetic_moment.powi(2) / (3.0 * PI * HBAR * SPEED_OF_LIGHT.powi(3)))
}

/// 1 / [`free_space_emission_rate`] (s).
pub fn free_space_t1(magnetic_moment: f64, omega: f64) -> Result<f64> {
    Ok(1.0 / free_space_emission_rate(magnetic_moment, omega)?)
}

/// Purcell rate of a spin with gyromagnetic ratio γ given the electron rate:
/// Γ scales as γ².
pub fn nuclear_purcell_scaling(electron_rate: f64, gyromagnetic_ratio: f64) -> Result<f64> {
    if !(gyromagnetic_ratio > 0.0) {
        return Err(invalid("gyromagnetic ratio must be positive"));
    }
    Ok(electron_rate * gyromagnetic_ratio * gyromagnetic_ratio)
}

/// Drive power for a π-pulse of length `t_p` given a reference pulse
/// (t_ref, P_ref); the Rabi frequency goes as √P, so P ∝ t_p⁻².
pub fn pi_pulse_power(t_p: f64, reference: (f64, f64)) -> Result<f64> {
    let (t_ref, p_ref) = reference;
    if !(t_p > 0.0 && t_ref > 0.0 && p_ref > 0.0) {
        return Err(invalid("pulse durations and reference power must be positive"));
    }
    Ok(p_ref * (t_ref / t_p).powi(2))
}
