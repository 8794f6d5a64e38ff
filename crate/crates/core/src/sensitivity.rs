//! Pulsed-ESR sensitivity: cooperativity, echo photon number, single-shot
//! SNR, minimum detectable spin number and sensitivity per √Hz with a
//! Purcell-limited repetition rate.
//!
//! All outputs are model estimates of order-of-magnitude relations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{invalid, Error, Result};
use crate::resonator::{purcell_rate, ResonatorModel};

/// Measured minimum detectable spin number of the reference planar-resonator
/// experiment.
pub const REFERENCE_MIN_SPINS: f64 = 260.0;
/// Measured repetition rate of the same experiment (Hz).
pub const REFERENCE_REPETITION_RATE_HZ: f64 = 16.0;
/// Sensitivity inferred from the two numbers above (spins/√Hz).
pub const REFERENCE_SPINS_PER_ROOT_HZ: f64 = 65.0;
/// Fraction of the Purcell rate used as repetition rate (a few T₁ to
/// repolarize).
pub const DEFAULT_DUTY_CYCLE_FACTOR: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// K.
    pub temperature: f64,
    /// rad/s.
    pub omega0: f64,
    /// Photons added by the amplifier chain (0 for a quantum-limited
    /// single-quadrature amplifier).
    pub amplifier_added_photons: f64,
}

impl NoiseModel {
    pub fn new(temperature: f64, omega0: f64, amplifier_added_photons: f64) -> Result<Self> {
        let n = Self {
            temperature,
            omega0,
            amplifier_added_photons,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(invalid(format!(
                "temperature must be positive, got {} K",
                self.temperature
            )));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(invalid("noise frequency must be positive"));
        }
        if !(self.amplifier_added_photons.is_finite() && self.amplifier_added_photons >= 0.0) {
            return Err(invalid("amplifier added photons must be ≥ 0"));
        }
        Ok(())
    }
}

/// n = ½ coth(ħω₀/2k_BT) + added photons.
pub fn thermal_noise_photons(noise: &NoiseModel) -> Result<f64> {
    noise.validate()?;
    let x = HBAR * noise.omega0 / (2.0 * BOLTZMANN * noise.temperature);
    Ok(0.5 / x.tanh() + noise.amplifier_added_photons)
}

/// Single-spin cooperativity C₀ = 4g₀²/(κγ₂*).
pub fn cooperativity(g0: f64, kappa: f64, gamma2_star: f64) -> Result<f64> {
    if !(kappa > 0.0 && gamma2_star > 0.0 && kappa.is_finite() && gamma2_star.is_finite()) {
        return Err(invalid("κ and γ2* must be positive"));
    }
    if !(g0.is_finite() && g0 >= 0.0) {
        return Err(invalid("g0 must be finite and ≥ 0"));
    }
    Ok(4.0 * g0 * g0 / (kappa * gamma2_star))
}

/// Photons radiated in one echo by N in-phase spins, N²C₀.
pub fn echo_photons(n_spins: f64, c0: f64) -> f64 {
    n_spins * n_spins * c0
}

/// SNR = pN√C₀/√n for a single echo.
pub fn echo_snr(n_spins: f64, polarization: f64, c0: f64, noise_photons: f64) -> Result<f64> {
    check_common(polarization, c0, noise_photons)?;
    if !(n_spins.is_finite() && n_spins >= 0.0) {
        return Err(invalid("spin number must be ≥ 0"));
    }
    Ok(polarization * n_spins * c0.sqrt() / noise_photons.sqrt())
}

/// N_min = √n/(p√C₀): the spin number giving unit single-shot SNR.
pub fn min_spins(polarization: f64, c0: f64, noise_photons: f64) -> Result<f64> {
    check_common(polarization, c0, noise_photons)?;
    if polarization == 0.0 {
        return Err(Error::Undetectable);
    }
    if c0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(noise_photons.sqrt() / (polarization * c0.sqrt()))
}

fn check_common(p: f64, c0: f64, n: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("polarization {p} outside [0, 1]")));
    }
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(invalid("cooperativity must be finite and ≥ 0"));
    }
    if !(n.is_finite() && n >= 0.5) {
        return Err(invalid(format!("noise photon number must be ≥ 1/2, got {n}")));
    }
    Ok(())
}

/// N_min/√rate (spins/√Hz).
pub fn sensitivity_per_root_hz(n_min: f64, repetition_rate: f64) -> Result<f64> {
    if !(repetition_rate.is_finite() && repetition_rate > 0.0) {
        return Err(invalid(format!(
            "repetition rate must be positive, got {repetition_rate} Hz"
        )));
    }
    if n_min.is_nan() || n_min < 0.0 {
        return Err(invalid("N_min must be ≥ 0"));
    }
    Ok(n_min / repetition_rate.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Input,
    Derived,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    /// `None` when the value is unbounded.
    pub value: Option<f64>,
    pub unit: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInputs {
    /// Single-spin coupling g₀ (rad/s).
    pub g0: f64,
    pub resonator: ResonatorModel,
    /// s⁻¹.
    pub gamma2_star: f64,
    /// Spins in the echo.
    pub n_spins: f64,
    pub polarization: f64,
    pub noise: NoiseModel,
    pub duty_cycle_factor: f64,
    /// Names of inputs that are assumptions rather than measured values.
    #[serde(default)]
    pub assumed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub c0: f64,
    pub n_photons: f64,
    pub snr: f64,
    pub noise_photons: f64,
    /// `None` when nothing couples (N_min unbounded).
    pub n_min: Option<f64>,
    /// N_min/√rate (spins/√Hz); `None` alongside `n_min`.
    pub n_min_per_rt_hz: Option<f64>,
    /// Purcell relaxation rate (s⁻¹).
    pub purcell_rate: f64,
    /// Hz.
    pub repetition_rate: f64,
    /// False when N_min is unbounded.
    pub detectable: bool,
    /// Reported sensitivity over the 65 spins/√Hz reference.
    pub reference_ratio: Option<f64>,
    pub quantities: Vec<Quantity>,
    pub inputs: SensitivityInputs,
}

/// Compose the model: C₀, noise, SNR for the given spin number, N_min,
/// Purcell-limited repetition rate and the per-√Hz sensitivity.
pub fn full_report(inputs: &SensitivityInputs) -> Result<SensitivityReport> {
    inputs.resonator.validate()?;
    if !(inputs.duty_cycle_factor.is_finite() && inputs.duty_cycle_factor > 0.0) {
        return Err(invalid("duty cycle factor must be positive"));
    }
    let kappa = inputs.resonator.kappa();
    let c0 = cooperativity(inputs.g0, kappa, inputs.gamma2_star)?;
    let n = thermal_noise_photons(&inputs.noise)?;
    let snr = echo_snr(inputs.n_spins, inputs.polarization, c0, n)?;
    let n_min = min_spins(inputs.polarization, c0, n)?;
    let gamma_p = purcell_rate(inputs.g0, kappa, 0.0)?;
    let rate = inputs.duty_cycle_factor * gamma_p;
    let detectable = n_min.is_finite() && rate > 0.0;
    let per_rt_hz = if detectable {
        Some(sensitivity_per_root_hz(n_min, rate)?)
    } else {
        None
    };

    let origin = |name: &str, default: Provenance| {
        if inputs.assumed.iter().any(|a| a == name) {
            Provenance::Assumed
        } else {
            default
        }
    };
    let q = |name: &str, value: Option<f64>, unit: &str, p: Provenance| Quantity {
        name: name.to_string(),
        value,
        unit: unit.to_string(),
        provenance: origin(name, p),
    };
    use Provenance::{Derived, Input};
    let quantities = vec![
        q("g0", Some(inputs.g0 / (2.0 * PI)), "Hz", Input),
        q(
            "resonator_frequency",
            Some(inputs.resonator.frequency_hz()),
            "Hz",
            Input,
        ),
        q("quality_factor", Some(inputs.resonator.q), "1", Input),
        q("kappa", Some(kappa / (2.0 * PI)), "Hz", Derived),
        q("gamma2_star", Some(inputs.gamma2_star), "1/s", Input),
        q("n_spins", Some(inputs.n_spins), "spins", Input),
        q("polarization", Some(inputs.polarization), "1", Input),
        q("temperature", Some(inputs.noise.temperature), "K", Input),
        q(
            "amplifier_added_photons",
            Some(inputs.noise.amplifier_added_photons),
            "photons",
            Input,
        ),
        q("duty_cycle_factor", Some(inputs.duty_cycle_factor), "1", Input),
        q("c0", Some(c0), "1", Derived),
        q("noise_photons", Some(n), "photons", Derived),
        q("n_photons", Some(echo_photons(inputs.n_spins, c0)), "photons", Derived),
        q("snr", Some(snr), "1", Derived),
        q("n_min", n_min.is_finite().then_some(n_min), "spins", Derived),
        q("purcell_rate", Some(gamma_p), "1/s", Derived),
        q("repetition_rate", Some(rate), "Hz", Derived),
        q("n_min_per_rt_hz", per_rt_hz, "spins/sqrt(Hz)", Derived),
    ];

    Ok(SensitivityReport {
        c0,
        n_photons: echo_photons(inputs.n_spins, c0),
        snr,
        noise_photons: n,
        n_min: n_min.is_finite().then_some(n_min),
        n_min_per_rt_hz: per_rt_hz,
        purcell_rate: gamma_p,
        repetition_rate: rate,
        detectable,
        reference_ratio: per_rt_hz.map(|s| s / REFERENCE_SPINS_PER_ROOT_HZ),
        quantities,
        inputs: inputs.clone(),
    })
}
