//! Spin ensembles: collective coupling, thermal polarization and coupling
//! regime classification.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{invalid, Error, Result};
use crate::resonator::{field_at_point, zero_point_current, ResonatorModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinMember {
    /// Coupling g_j (rad/s).
    pub coupling: f64,
    /// Detuning δ_j from the cavity (rad/s).
    pub detuning: f64,
    /// Position (m), when generated from a geometry.
    pub position: Option<[f64; 3]>,
}

impl SpinMember {
    pub fn new(coupling: f64, detuning: f64) -> Self {
        Self {
            coupling,
            detuning,
            position: None,
        }
    }
}

/// A list of (possibly representative) spins. When `members` is a subsample,
/// `n_total` is the number of physical spins it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsemble {
    pub members: Vec<SpinMember>,
    pub n_total: f64,
    pub polarization: f64,
}

impl SpinEnsemble {
    pub fn new(members: Vec<SpinMember>, n_total: f64, polarization: f64) -> Result<Self> {
        let e = Self {
            members,
            n_total,
            polarization,
        };
        e.validate()?;
        Ok(e)
    }

    /// Every member is a physical spin.
    pub fn from_members(members: Vec<SpinMember>) -> Result<Self> {
        let n = members.len() as f64;
        Self::new(members, n, 1.0)
    }

    /// `n_total` identical resonant spins with coupling `g0`, represented by
    /// a single member.
    pub fn uniform(n_total: f64, g0: f64) -> Result<Self> {
        Self::new(vec![SpinMember::new(g0, 0.0)], n_total, 1.0)
    }

    pub fn with_polarization(mut self, p: f64) -> Result<Self> {
        self.polarization = p;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, m) in self.members.iter().enumerate() {
            if !(m.coupling.is_finite() && m.coupling >= 0.0) || !m.detuning.is_finite() {
                return Err(invalid(format!(
                    "spin {j}: coupling must be finite and ≥ 0, detuning finite"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.polarization) {
            return Err(invalid(format!("polarization {} outside [0, 1]", self.polarization)));
        }
        if !(self.n_total.is_finite() && self.n_total >= self.members.len() as f64) {
            return Err(invalid(format!(
                "total spin count {} is smaller than the {} listed members",
                self.n_total,
                self.members.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.coupling).collect()
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.detuning).collect()
    }

    /// Union of two ensembles of physical spins.
    pub fn concat(&self, other: &SpinEnsemble) -> Result<SpinEnsemble> {
        // both must be exhaustive for a plain union to preserve the weights
        if self.n_total != self.len() as f64 || other.n_total != other.len() as f64 {
            return Err(invalid("only exhaustive ensembles can be concatenated"));
        }
        let members = self.members.iter().chain(&other.members).copied().collect();
        SpinEnsemble::from_members(members)
    }
}

/// g_ens = √(Σ g_j²), rescaled by √(N_total/N_listed) for subsamples.
/// Full polarization is assumed.
pub fn ensemble_coupling(e: &SpinEnsemble) -> f64 {
    if e.members.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = e.members.iter().map(|m| m.coupling * m.coupling).sum();
    (sum_sq * e.n_total / e.members.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DetuningDistribution {
    None,
    Gaussian { fwhm_hz: f64 },
    Lorentzian { fwhm_hz: f64 },
}

impl DetuningDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::None => Ok(()),
            Self::Gaussian { fwhm_hz } | Self::Lorentzian { fwhm_hz } => {
                if fwhm_hz.is_finite() && fwhm_hz > 0.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("detuning FWHM must be positive, got {fwhm_hz} Hz")))
                }
            }
        }
    }

    /// Draw one detuning in rad/s.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Gaussian { fwhm_hz } => {
                let sigma = 2.0 * PI * fwhm_hz / (2.0 * (2.0 * 2f64.ln()).sqrt());
                Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
            }
            Self::Lorentzian { fwhm_hz } => Cauchy::new(0.0, PI * fwhm_hz).expect("positive scale").sample(rng),
        }
    }
}

/// Axis-aligned box (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn volume(&self) -> f64 {
        (0..3).map(|k| self.max[k] - self.min[k]).product()
    }
}

/// Spins spread uniformly through a region near a wire resonator. Each spin
/// couples through the transverse part of the vacuum field of the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleGenerator {
    /// Spin density (m⁻³).
    pub density: f64,
    pub region: Region,
    pub resonator: ResonatorModel,
    /// Static field direction.
    pub b0_direction: [f64; 3],
    /// g₀ per tesla of transverse field (rad s⁻¹ T⁻¹); γ_e/2 for a free
    /// electron.
    pub coupling_per_tesla: f64,
    pub detuning: DetuningDistribution,
    pub samples: usize,
    pub seed: u64,
}

impl EnsembleGenerator {
    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(invalid(format!("spin density must be positive, got {}", self.density)));
        }
        if (0..3).any(|k| !(self.region.max[k] > self.region.min[k])) {
            return Err(invalid("region must have positive extent along every axis"));
        }
        if self.resonator.wire.is_none() {
            return Err(invalid("generator needs a resonator with wire geometry"));
        }
        self.resonator.validate()?;
        if !(self.coupling_per_tesla.is_finite() && self.coupling_per_tesla >= 0.0) {
            return Err(invalid("coupling per tesla must be finite and ≥ 0"));
        }
        if self.samples == 0 {
            return Err(invalid("generator needs at least one sample"));
        }
        let b0 = self.b0_direction;
        if (b0[0] * b0[0] + b0[1] * b0[1] + b0[2] * b0[2]) == 0.0 {
            return Err(invalid("static field direction must be non-zero"));
        }
        self.detuning.validate()
    }

    /// Physical spin count N = density × volume.
    pub fn n_total(&self) -> f64 {
        self.density * self.region.volume()
    }

    /// Draw min(samples, N) representative spins.
    pub fn sample(&self) -> Result<SpinEnsemble> {
        self.validate()?;
        let n_total = self.n_total();
        let n = (self.samples as f64).min(n_total.floor()).max(1.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let i_zpf = zero_point_current(&self.resonator);
        let b0 = self.b0_direction;
        let b0_norm = (b0[0] * b0[0] + b0[1] * b0[1] + b0[2] * b0[2]).sqrt();
        let z = [b0[0] / b0_norm, b0[1] / b0_norm, b0[2] / b0_norm];

        let mut members = Vec::with_capacity(n);
        for _ in 0..n {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = rng.random_range(self.region.min[k]..self.region.max[k]);
            }
            let b = field_at_point(&self.resonator, i_zpf, p)?;
            let par = b[0] * z[0] + b[1] * z[1] + b[2] * z[2];
            let perp = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2] - par * par).max(0.0).sqrt();
            members.push(SpinMember {
                coupling: self.coupling_per_tesla * perp,
                detuning: self.detuning.sample(&mut rng),
                position: Some(p),
            });
        }
        SpinEnsemble::new(members, n_total.max(n as f64), 1.0)
    }
}

/// Two-level thermal polarization tanh(ħω / 2k_BT).
pub fn thermal_polarization(temperature: f64, frequency_hz: f64) -> Result<f64> {
    if !(temperature > 0.0 && frequency_hz > 0.0) {
        return Err(invalid("temperature and frequency must be positive"));
    }
    Ok((HBAR * 2.0 * PI * frequency_hz / (2.0 * BOLTZMANN * temperature)).tanh())
}

/// Relaxation and dephasing rates (s⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinLifetimes {
    /// 1/T₂*.
    pub gamma2_star: f64,
    /// 1/T₂.
    pub gamma2: f64,
    /// 1/T₁.
    pub gamma1: f64,
}

impl SpinLifetimes {
    pub fn new(gamma2_star: f64, gamma2: f64, gamma1: f64) -> Result<Self> {
        let l = Self {
            gamma2_star,
            gamma2,
            gamma1,
        };
        l.validate()?;
        Ok(l)
    }

    /// From T₂*, T₂, T₁ in seconds; an infinite time gives a zero rate.
    pub fn from_times(t2_star: f64, t2: f64, t1: f64) -> Result<Self> {
        if !(t2_star > 0.0 && t2 > 0.0 && t1 > 0.0) {
            return Err(invalid("lifetimes must be positive"));
        }
        Self::new(1.0 / t2_star, 1.0 / t2, 1.0 / t1)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            gamma2_star,
            gamma2,
            gamma1,
        } = *self;
        if [gamma2_star, gamma2, gamma1]
            .iter()
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(invalid("rates must be finite and non-negative"));
        }
        if gamma2_star < gamma2 {
            return Err(invalid(format!(
                "T2* must not exceed T2 (1/T2* = {gamma2_star}, 1/T2 = {gamma2})"
            )));
        }
        if gamma2 < gamma1 / 2.0 {
            return Err(invalid(format!(
                "T2 must not exceed 2 T1 (1/T2 = {gamma2}, 1/T1 = {gamma1})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeMargins {
    /// g_ens / max(κ, γ₂*).
    pub strong_coupling_ensemble: f64,
    /// 4g_ens²/κ / γ₂*.
    pub high_cooperativity_ensemble: f64,
    /// 4g₀²/κ / γ₂.
    pub high_cooperativity_single: f64,
    /// 4g₀²/κ / γ₁.
    pub purcell_regime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub strong_coupling_ensemble: bool,
    pub high_cooperativity_ensemble: bool,
    pub high_cooperativity_single: bool,
    pub purcell_regime: bool,
    pub margins: RegimeMargins,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Evaluate the four coupling-regime inequalities. All rates in rad/s (or
/// s⁻¹ for the lifetimes).
pub fn classify_regime(g_ens: f64, g0: f64, kappa: f64, lifetimes: &SpinLifetimes) -> Result<RegimeReport> {
    if [g_ens, g0, kappa].iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid("couplings and κ must be finite and non-negative"));
    }
    lifetimes.validate()?;
    let ens_purcell = ratio(4.0 * g_ens * g_ens, kappa);
    let single_purcell = ratio(4.0 * g0 * g0, kappa);
    let margins = RegimeMargins {
        strong_coupling_ensemble: ratio(g_ens, kappa.max(lifetimes.gamma2_star)),
        high_cooperativity_ensemble: ratio(ens_purcell, lifetimes.gamma2_star),
        high_cooperativity_single: ratio(single_purcell, lifetimes.gamma2),
        purcell_regime: ratio(single_purcell, lifetimes.gamma1),
    };
    Ok(RegimeReport {
        strong_coupling_ensemble: margins.strong_coupling_ensemble > 1.0,
        high_cooperativity_ensemble: margins.high_cooperativity_ensemble > 1.0,
        high_cooperativity_single: margins.high_cooperativity_single > 1.0,
        purcell_regime: margins.purcell_regime > 1.0,
        margins,
    })
}

/// Smallest loaded Q that puts κ = ω_c/Q below g_ens.
pub fn min_q_for_strong_coupling(omega_c: f64, g_ens: f64, gamma2_star: f64) -> Result<f64> {
    if !(omega_c > 0.0 && g_ens >= 0.0 && gamma2_star >= 0.0) {
        return Err(invalid("ω_c must be positive and rates non-negative"));
    }
    if g_ens <= gamma2_star {
        return Err(Error::UnreachableRegime(format!(
            "g_ens = {g_ens:.4e} rad/s does not exceed the spin linewidth γ2* = {gamma2_star:.4e} s⁻¹"
        )));
    }
    Ok(omega_c / g_ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::to_angular;
    use crate::resonator::Wire;
    use approx::assert_relative_eq;

    #[test]
    fn xband_cavity_ensemble() {
        // 10¹⁵ cm⁻³ in 0.1 cm³
        let n = 1e15 * 1e6 * 0.1e-6;
        let e = SpinEnsemble::uniform(n, to_angular(50e-3)).unwrap();
        let g_ens = ensemble_coupling(&e);
        assert_relative_eq!(g_ens / to_angular(1.0), 0.5e6, max_relative = 1e-9);
        let q = min_q_for_strong_coupling(to_angular(10e9), g_ens, 0.0).unwrap();
        assert_relative_eq!(q, 20_000.0, max_relative = 1e-9);
        let q2 = min_q_for_strong_coupling(to_angular(10e9), 2.0 * g_ens, 0.0).unwrap();
        assert_relative_eq!(q2, q / 2.0, max_relative = 1e-14);
        let err = min_q_for_strong_coupling(to_angular(10e9), to_angular(1.0), to_angular(10.0));
        assert!(matches!(err, Err(Error::UnreachableRegime(_))));
    }

    #[test]
    fn single_and_empty() {
        let e = SpinEnsemble::from_members(vec![SpinMember::new(3.0, 0.0)]).unwrap();
        assert_eq!(ensemble_coupling(&e), 3.0);
        assert_eq!(ensemble_coupling(&SpinEnsemble::from_members(vec![]).unwrap()), 0.0);
    }

    #[test]
    fn invalid_ensembles() {
        assert!(SpinEnsemble::from_members(vec![SpinMember::new(-1.0, 0.0)]).is_err());
        assert!(SpinEnsemble::uniform(10.0, 1.0)
            .unwrap()
            .with_polarization(1.5)
            .is_err());
        assert!(SpinEnsemble::new(vec![SpinMember::new(1.0, 0.0); 3], 2.0, 1.0).is_err());
    }

    #[test]
    fn polarization() {
        assert!(thermal_polarization(1e-6, 7.3e9).unwrap() > 1.0 - 1e-12);
        let p = thermal_polarization(0.02, 7.3e9).unwrap();
        assert!(p > 0.9999, "{p}");
        assert_relative_eq!(p, 8.7578f64.tanh(), max_relative = 1e-4);
        let x = HBAR * to_angular(1e6) / (BOLTZMANN * 300.0);
        assert_relative_eq!(thermal_polarization(300.0, 1e6).unwrap(), x / 2.0, max_relative = 1e-9);
        assert!(thermal_polarization(0.0, 1e9).is_err());
    }

    #[test]
    fn lifetimes_ordering() {
        assert!(SpinLifetimes::from_times(5e-6, 1e-3, 1.0).is_ok());
        assert!(SpinLifetimes::from_times(1e-3, 5e-6, 1.0).is_err());
        // T2 > 2 T1
        assert!(SpinLifetimes::from_times(1e-3, 3.0, 1.0).is_err());
        assert!(SpinLifetimes::from_times(1e-3, 2.0, 1.0).is_ok());
    }

    #[test]
    fn strong_coupling_threshold() {
        let g_ens = to_angular(0.5e6);
        let l = SpinLifetimes::from_times(10e-6, 1e-3, 1.0).unwrap();
        let omega = to_angular(10e9);
        for (q, strong) in [(10_000.0, false), (19_000.0, false), (21_000.0, true), (40_000.0, true)] {
            let r = classify_regime(g_ens, 0.0, omega / q, &l).unwrap();
            assert_eq!(r.strong_coupling_ensemble, strong, "Q = {q}");
        }
    }

    #[test]
    fn degenerate_limits_and_constructed_margin() {
        let zero = SpinLifetimes::new(0.0, 0.0, 0.0).unwrap();
        let r = classify_regime(1.0, 1.0, 0.0, &zero).unwrap();
        assert!(r.strong_coupling_ensemble && r.high_cooperativity_ensemble);
        assert!(r.high_cooperativity_single && r.purcell_regime);

        let kappa = 1e5;
        let g1 = 10.0;
        let g0 = (2.0 * g1 * kappa / 4.0f64).sqrt();
        let l = SpinLifetimes::new(1e6, 1e5, g1).unwrap();
        let r = classify_regime(1e3, g0, kappa, &l).unwrap();
        assert!(r.purcell_regime);
        assert_relative_eq!(r.margins.purcell_regime, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn generator_rescales_subsample() {
        let resonator = ResonatorModel::new("lc", 7e9, 1e5, 50.0)
            .unwrap()
            .with_wire(Wire::along_z());
        let gen = EnsembleGenerator {
            density: 1e21,
            region: Region {
                min: [1e-6, -1e-6, 0.0],
                max: [3e-6, 1e-6, 1e-4],
            },
            resonator,
            b0_direction: [0.0, 0.0, 1.0],
            coupling_per_tesla: 0.5 * 1.76e11,
            detuning: DetuningDistribution::Gaussian { fwhm_hz: 1e6 },
            samples: 500,
            seed: 7,
        };
        let e = gen.sample().unwrap();
        assert_eq!(e.len(), 500);
        assert_relative_eq!(e.n_total, 1e21 * 2e-6 * 2e-6 * 1e-4, max_relative = 1e-12);
        assert_eq!(e, gen.sample().unwrap());
        let g_ens = ensemble_coupling(&e);
        let raw: f64 = e.couplings().iter().map(|g| g * g).sum::<f64>().sqrt();
        assert_relative_eq!(g_ens, raw * (e.n_total / 500.0).sqrt(), max_relative = 1e-12);
        // B0 along the wire: the whole azimuthal field is transverse
        assert!(e.members.iter().all(|m| m.coupling > 0.0));
    }
}
