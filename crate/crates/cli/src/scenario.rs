//! Scenario files: TOML with one section per model, boundary units Hz, T, K,
//! s and m.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use spinmem::constants::to_angular;
use spinmem::ensemble::{DetuningDistribution, EnsembleGenerator, Region, SpinEnsemble, SpinLifetimes, SpinMember};
use spinmem::memory::Readout;
use spinmem::resonator::{ResonatorModel, Wire};
use spinmem::sensitivity::NoiseModel;
use spinmem::spinsys::SpinSystem;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub description: Option<String>,
    /// Seeds every random draw; required whenever sampling occurs.
    pub seed: Option<u64>,
    pub spin: Option<SpinSpec>,
    pub field: Option<FieldSpec>,
    pub resonator: Option<ResonatorSpec>,
    pub ensemble: Option<EnsembleSpec>,
    pub lifetimes: Option<LifetimesSpec>,
    pub coupling: Option<CouplingSpec>,
    pub purcell: Option<PurcellSpec>,
    pub memory: Option<MemorySpec>,
    pub noise: Option<NoiseSpec>,
    pub sensitivity: Option<SensitivitySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepSpec>,
    /// Where each value comes from, keyed by dotted path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sources: BTreeMap<String, Source>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Quoted from the reference experiment.
    Reference,
    /// Taken from other literature.
    External,
    /// Chosen for the scenario; not fixed by any source.
    Assumed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSpec {
    pub preset: Option<String>,
    pub electron_spin: Option<f64>,
    pub nuclear_spin: Option<f64>,
    pub g_e: Option<f64>,
    pub g_n: Option<f64>,
    pub hyperfine_hz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// Operating field.
    pub b_t: Option<f64>,
    /// Scan range for spectra and clock searches.
    pub range_t: Option<[f64; 2]>,
    pub points: Option<usize>,
    /// Static field direction (lab frame).
    pub direction: Option<[f64; 3]>,
    /// Smallest |⟨hi|S_x|lo⟩| listed as a transition.
    pub min_matrix_element: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    pub label: Option<String>,
    pub frequency_hz: f64,
    pub q: f64,
    pub impedance_ohm: Option<f64>,
    pub mode_volume_m3: Option<f64>,
    pub wire: Option<WireSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireSpec {
    pub point_m: [f64; 3],
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub coupling_hz: f64,
    #[serde(default)]
    pub detuning_hz: f64,
}

/// Either `n_spins` identical spins of coupling `g0_hz`, an explicit member
/// list, or spins sampled at `density_m3` through a region near the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_spins: Option<f64>,
    pub g0_hz: Option<f64>,
    pub members: Option<Vec<MemberSpec>>,
    pub density_m3: Option<f64>,
    pub region_min_m: Option<[f64; 3]>,
    pub region_max_m: Option<[f64; 3]>,
    pub samples: Option<usize>,
    /// g₀ per tesla of transverse vacuum field; γ_e/2 of the spin system when
    /// absent.
    pub coupling_per_tesla_hz: Option<f64>,
    pub detuning: Option<DetuningDistribution>,
    pub polarization: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifetimesSpec {
    pub t2_star_s: Option<f64>,
    pub t2_s: Option<f64>,
    pub t1_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Spin position (m).
    pub point_m: [f64; 3],
    /// Index into the frequency-ordered transition list; all when absent.
    pub transition: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurcellSpec {
    pub g0_hz: f64,
    #[serde(default)]
    pub detuning_hz: Vec<f64>,
    /// γ of a second species relative to the electron, for Γ ∝ γ² scaling.
    pub gyromagnetic_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Steps through the discrete Fourier modes.
    Fourier,
    /// Explicit per-spin phases of one step (rad).
    Phases { step_phases_rad: Vec<f64> },
    /// Linear gradient over evenly spaced spins.
    Gradient {
        slope_hz_per_m: f64,
        length_m: f64,
        tau_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySpec {
    /// Simulated spins.
    pub n_spins: usize,
    pub g0_hz: f64,
    /// Cavity linewidth κ/2π; the resonator's when absent.
    pub kappa_hz: Option<f64>,
    /// Homogeneous spin decay rate γ₂ (s⁻¹); 1/T₂ from `lifetimes` when absent.
    pub gamma2_per_s: Option<f64>,
    #[serde(default)]
    pub cavity_detuning_hz: f64,
    /// Inhomogeneous detunings drawn with the scenario seed.
    pub detuning: Option<DetuningDistribution>,
    #[serde(default = "one")]
    pub modes: usize,
    #[serde(default)]
    pub readout: Readout,
    pub schedule: Option<ScheduleSpec>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub temperature_k: f64,
    #[serde(default)]
    pub amplifier_added_photons: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySpec {
    pub g0_hz: f64,
    pub n_spins: f64,
    /// Thermal polarization at the noise temperature when absent.
    pub polarization: Option<f64>,
    pub duty_cycle_factor: Option<f64>,
    /// Also run the echo simulation for the given spin number.
    #[serde(default)]
    pub simulate_echo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Subcommand evaluated at every point.
    pub command: String,
    /// Dotted path of the swept value, e.g. `resonator.q`.
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: SweepScale,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let x = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                match self.scale {
                    SweepScale::Linear => self.start + x * (self.stop - self.start),
                    SweepScale::Log => self.start * (self.stop / self.start).powf(x),
                }
            })
            .collect()
    }
}

pub const SWEEPABLE_COMMANDS: [&str; 6] = ["spectrum", "coupling", "purcell", "regime", "memory-sim", "sensitivity"];

/// A problem found in a scenario, anchored to a line of the source when
/// possible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

/// Parse TOML; syntax and schema errors come back as one diagnostic with the
/// offending line.
pub fn parse(source: &str) -> Result<Scenario, Diagnostic> {
    toml::from_str(source).map_err(|e| Diagnostic {
        path: "scenario".into(),
        line: e.span().map(|s| line_of(source, s.start)),
        message: e.message().trim().to_string(),
    })
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `path` (e.g. `lifetimes.t2_s`, `sweep[1].points`) in the source:
/// the key's line if found, else its table header.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let key = if parts.len() > 1 { parts.pop() } else { None };
    let (table, key) = match key {
        Some(k) => (parts.join("."), k),
        None => (String::new(), path),
    };
    let (table_name, index) = match table.split_once('[') {
        Some((t, rest)) => (t.to_string(), rest.trim_end_matches(']').parse::<usize>().ok()),
        None => (table, None),
    };

    let mut current = String::new();
    let mut occurrence: Option<usize> = None;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.split("]]").next()) {
            current = h.trim().to_string();
            let c = counts.entry(current.clone()).or_insert(0);
            occurrence = Some(*c);
            *c += 1;
        } else if let Some(h) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = h.trim().to_string();
            occurrence = None;
        } else if current == table_name && (index.is_none() || index == occurrence) {
            let k = line.split('=').next().unwrap_or("").trim();
            if k == key {
                return Some(i + 1);
            }
            continue;
        } else {
            continue;
        }
        if current == table_name && (index.is_none() || index == occurrence) && header_line.is_none() {
            header_line = Some(i + 1);
        }
    }
    if table_name.is_empty() {
        return None;
    }
    header_line
}

struct Collector<'a> {
    source: &'a str,
    out: Vec<Diagnostic>,
}

impl Collector<'_> {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: path.into(),
            line: locate(self.source, path),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, format!("must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.push(path, format!("must be finite and ≥ 0, got {v}"));
        }
    }
}

impl Scenario {
    /// Structural and physical checks without running any model. `source` is
    /// the original text, used to anchor diagnostics to lines.
    pub fn validate(&self, source: &str) -> Vec<Diagnostic> {
        let mut c = Collector {
            source,
            out: Vec::new(),
        };

        if let Some(spin) = &self.spin {
            if let Some(p) = &spin.preset {
                if SpinSystem::preset(p).is_none() {
                    c.push(
                        "spin.preset",
                        format!("unknown preset '{p}' (known: {})", SpinSystem::PRESET_NAMES.join(", ")),
                    );
                }
            }
            if let Err(e) = self.spin_system() {
                if spin.preset.as_deref().is_none_or(|p| SpinSystem::preset(p).is_some()) {
                    c.push("spin", e);
                }
            }
        }

        if let Some(f) = &self.field {
            if let Some(b) = f.b_t {
                c.non_negative("field.b_t", b);
            }
            if let Some([lo, hi]) = f.range_t {
                if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                    c.push("field.range_t", format!("needs 0 ≤ start < stop, got [{lo}, {hi}]"));
                }
            }
            if let Some(n) = f.points {
                if n < 2 {
                    c.push("field.points", "needs at least 2 points");
                }
            }
            if let Some(d) = f.direction {
                if d.iter().all(|x| *x == 0.0) || d.iter().any(|x| !x.is_finite()) {
                    c.push("field.direction", "must be a finite non-zero vector");
                }
            }
            if let Some(m) = f.min_matrix_element {
                c.non_negative("field.min_matrix_element", m);
            }
        }

        if let Some(r) = &self.resonator {
            c.positive("resonator.frequency_hz", r.frequency_hz);
            c.positive("resonator.q", r.q);
            if let Some(z) = r.impedance_ohm {
                c.positive("resonator.impedance_ohm", z);
            }
            if let Some(v) = r.mode_volume_m3 {
                c.positive("resonator.mode_volume_m3", v);
            }
            if let Some(w) = &r.wire {
                if w.direction.iter().all(|x| *x == 0.0) {
                    c.push("resonator.wire", "wire direction must be non-zero");
                }
            }
        }

        if let Some(l) = &self.lifetimes {
            for (name, v) in [("t2_star_s", l.t2_star_s), ("t2_s", l.t2_s), ("t1_s", l.t1_s)] {
                if let Some(v) = v {
                    c.positive(&format!("lifetimes.{name}"), v);
                }
            }
            if let (Some(t2), Some(t1)) = (l.t2_s, l.t1_s) {
                if t2 > 2.0 * t1 {
                    c.push(
                        "lifetimes.t2_s",
                        format!(
                            "T2 = {t2} s exceeds 2·T1 = {} s; lifetimes must satisfy T2 ≤ 2T1",
                            2.0 * t1
                        ),
                    );
                }
            }
            if let (Some(t2s), Some(t2)) = (l.t2_star_s, l.t2_s) {
                if t2s > t2 {
                    c.push(
                        "lifetimes.t2_star_s",
                        format!("T2* = {t2s} s exceeds T2 = {t2} s; need T2* ≤ T2"),
                    );
                }
            }
        }

        if let Some(e) = &self.ensemble {
            let kinds = [e.members.is_some(), e.density_m3.is_some(), e.g0_hz.is_some()];
            if kinds.iter().filter(|k| **k).count() != 1 {
                c.push(
                    "ensemble",
                    "declare exactly one of g0_hz (with n_spins), members, or density_m3",
                );
            }
            if e.g0_hz.is_some() && e.n_spins.is_none() {
                c.push("ensemble.n_spins", "uniform ensemble needs n_spins");
            }
            if let Some(g) = e.g0_hz {
                c.non_negative("ensemble.g0_hz", g);
            }
            if let Some(n) = e.n_spins {
                if !(n.is_finite() && n >= 1.0) {
                    c.push("ensemble.n_spins", format!("must be ≥ 1, got {n}"));
                }
            }
            if let Some(p) = e.polarization {
                if !(0.0..=1.0).contains(&p) {
                    c.push("ensemble.polarization", format!("must lie in [0, 1], got {p}"));
                }
            }
            if let Some(m) = &e.members {
                if m.iter()
                    .any(|m| !(m.coupling_hz >= 0.0 && m.coupling_hz.is_finite() && m.detuning_hz.is_finite()))
                {
                    c.push("ensemble.members", "couplings must be finite and ≥ 0, detunings finite");
                }
            }
            if let Some(d) = e.density_m3 {
                c.positive("ensemble.density_m3", d);
                if e.region_min_m.is_none() || e.region_max_m.is_none() {
                    c.push("ensemble", "sampled ensemble needs region_min_m and region_max_m");
                }
                if self.resonator.as_ref().and_then(|r| r.wire.as_ref()).is_none() {
                    c.push(
                        "ensemble.density_m3",
                        "sampled ensemble needs a resonator with wire geometry",
                    );
                }
                if self.seed.is_none() {
                    c.push("seed", "seed is required: the ensemble is sampled from a density");
                }
                if let Err(err) = self.ensemble_generator(0) {
                    c.push("ensemble", err);
                }
            } else if e.detuning.is_some() {
                c.push(
                    "ensemble.detuning",
                    "detuning distribution only applies to sampled ensembles",
                );
            }
        }

        if let Some(m) = &self.memory {
            if m.n_spins == 0 {
                c.push("memory.n_spins", "needs at least one spin");
            }
            c.non_negative("memory.g0_hz", m.g0_hz);
            if m.modes == 0 || m.modes > m.n_spins {
                c.push("memory.modes", format!("need 1 ≤ modes ≤ n_spins, got {}", m.modes));
            }
            if m.kappa_hz.is_none() && self.resonator.is_none() {
                c.push("memory.kappa_hz", "set kappa_hz or declare a resonator");
            }
            if let Some(k) = m.kappa_hz {
                c.non_negative("memory.kappa_hz", k);
            }
            if let Some(g) = m.gamma2_per_s {
                c.non_negative("memory.gamma2_per_s", g);
            }
            if let Some(d) = &m.detuning {
                if let Err(e) = d.validate() {
                    c.push("memory.detuning", e.to_string());
                }
                if *d != DetuningDistribution::None && self.seed.is_none() {
                    c.push("seed", "seed is required: memory detunings are sampled");
                }
            }
            if let Some(ScheduleSpec::Phases { step_phases_rad }) = &m.schedule {
                if step_phases_rad.len() != m.n_spins {
                    c.push("memory.schedule", "step_phases_rad needs one phase per spin");
                }
            }
        }

        if let Some(n) = &self.noise {
            c.positive("noise.temperature_k", n.temperature_k);
            c.non_negative("noise.amplifier_added_photons", n.amplifier_added_photons);
        }

        if let Some(p) = &self.purcell {
            c.non_negative("purcell.g0_hz", p.g0_hz);
            if let Some(r) = p.gyromagnetic_ratio {
                c.positive("purcell.gyromagnetic_ratio", r);
            }
        }

        if let Some(s) = &self.sensitivity {
            c.non_negative("sensitivity.g0_hz", s.g0_hz);
            c.non_negative("sensitivity.n_spins", s.n_spins);
            if let Some(p) = s.polarization {
                if !(0.0..=1.0).contains(&p) {
                    c.push("sensitivity.polarization", format!("must lie in [0, 1], got {p}"));
                }
            }
            if let Some(d) = s.duty_cycle_factor {
                c.positive("sensitivity.duty_cycle_factor", d);
            }
            if self.noise.is_none() {
                c.push("sensitivity", "needs a [noise] section");
            }
            if self.resonator.is_none() {
                c.push("sensitivity", "needs a [resonator] section");
            }
            if self.lifetimes.as_ref().and_then(|l| l.t2_star_s).is_none() {
                c.push("sensitivity", "needs lifetimes.t2_star_s");
            }
        }

        for (k, s) in self.sweep.iter().enumerate() {
            let at = |f: &str| format!("sweep[{k}].{f}");
            if !SWEEPABLE_COMMANDS.contains(&s.command.as_str()) {
                c.push(
                    &at("command"),
                    format!(
                        "'{}' cannot be swept (use one of {})",
                        s.command,
                        SWEEPABLE_COMMANDS.join(", ")
                    ),
                );
            }
            if s.points == 0 {
                c.push(&at("points"), "sweep must have at least one point");
            }
            if !(s.start.is_finite() && s.stop.is_finite()) {
                c.push(&at("start"), "sweep bounds must be finite");
            }
            if s.scale == SweepScale::Log && !(s.start > 0.0 && s.stop > 0.0) {
                c.push(&at("scale"), "log sweep needs positive bounds");
            }
            if let Err(e) = self.with_parameter(&s.parameter, s.start) {
                c.push(&at("parameter"), e);
            }
        }

        for key in self.sources.keys() {
            if !self.has_path(key) {
                c.push("sources", format!("'{key}' does not name a scenario value"));
            }
        }
        c.out
    }

    fn has_path(&self, path: &str) -> bool {
        let mut v = serde_json::to_value(self).expect("scenario serializes");
        for part in path.split('.') {
            match v.get(part) {
                Some(x) => v = x.clone(),
                None => return false,
            }
        }
        true
    }

    /// Copy with the numeric value at `path` replaced.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Scenario, String> {
        let mut v = serde_json::to_value(self).map_err(|e| e.to_string())?;
        let mut slot = &mut v;
        for part in path.split('.') {
            slot = match slot.get_mut(part) {
                Some(s) => s,
                None => return Err(format!("'{path}' does not name a value in this scenario")),
            };
        }
        if !slot.is_number() {
            return Err(format!("'{path}' is not a numeric value"));
        }
        *slot = if slot.is_u64() && value >= 0.0 && value.fract() == 0.0 {
            serde_json::Value::from(value as u64)
        } else {
            serde_json::Value::from(value)
        };
        serde_json::from_value(v).map_err(|e| format!("'{path}' = {value}: {e}"))
    }

    pub fn spin_system(&self) -> Result<SpinSystem, String> {
        let spec = self.spin.as_ref().ok_or("scenario has no [spin] section")?;
        let base = match &spec.preset {
            Some(p) => SpinSystem::preset(p).ok_or_else(|| format!("unknown spin preset '{p}'"))?,
            None => SpinSystem::free_electron(),
        };
        let sys = SpinSystem {
            electron_spin: spec.electron_spin.unwrap_or(base.electron_spin),
            nuclear_spin: spec.nuclear_spin.unwrap_or(base.nuclear_spin),
            g_e: spec.g_e.unwrap_or(base.g_e),
            g_n: spec.g_n.unwrap_or(base.g_n),
            hyperfine_hz: spec.hyperfine_hz.unwrap_or(base.hyperfine_hz),
            label: base.label,
        };
        sys.validate().map_err(|e| e.to_string())?;
        Ok(sys)
    }

    pub fn resonator_model(&self) -> Result<ResonatorModel, String> {
        let r = self.resonator.as_ref().ok_or("scenario has no [resonator] section")?;
        let mut m = ResonatorModel::new(
            r.label.clone().unwrap_or_else(|| "resonator".into()),
            r.frequency_hz,
            r.q,
            r.impedance_ohm.unwrap_or(50.0),
        )
        .map_err(|e| e.to_string())?;
        if let Some(v) = r.mode_volume_m3 {
            m = m.with_mode_volume(v);
        }
        if let Some(w) = &r.wire {
            m = m.with_wire(Wire {
                point: w.point_m,
                direction: w.direction,
            });
        }
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }

    pub fn b0_direction(&self) -> [f64; 3] {
        self.field.as_ref().and_then(|f| f.direction).unwrap_or([0.0, 0.0, 1.0])
    }

    pub fn lifetimes(&self) -> Result<SpinLifetimes, String> {
        let l = self.lifetimes.clone().unwrap_or_default();
        let rate = |t: Option<f64>| t.map_or(0.0, |t| 1.0 / t);
        SpinLifetimes::new(rate(l.t2_star_s), rate(l.t2_s), rate(l.t1_s)).map_err(|e| e.to_string())
    }

    fn ensemble_generator(&self, seed: u64) -> Result<EnsembleGenerator, String> {
        let e = self.ensemble.as_ref().ok_or("scenario has no [ensemble] section")?;
        let (Some(min), Some(max)) = (e.region_min_m, e.region_max_m) else {
            return Err("sampled ensemble needs region_min_m and region_max_m".into());
        };
        let per_tesla = match e.coupling_per_tesla_hz {
            Some(c) => to_angular(c),
            None => self
                .spin_system()
                .map(|s| s.gamma_e() / 2.0)
                .unwrap_or(SpinSystem::free_electron().gamma_e() / 2.0),
        };
        let g = EnsembleGenerator {
            density: e.density_m3.unwrap_or(0.0),
            region: Region { min, max },
            resonator: self.resonator_model()?,
            b0_direction: self.b0_direction(),
            coupling_per_tesla: per_tesla,
            detuning: e.detuning.unwrap_or(DetuningDistribution::None),
            samples: e.samples.unwrap_or(1000),
            seed,
        };
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    }

    /// Build the ensemble; sampling uses the scenario seed.
    pub fn spin_ensemble(&self) -> Result<SpinEnsemble, String> {
        let e = self.ensemble.as_ref().ok_or("scenario has no [ensemble] section")?;
        let p = e.polarization.unwrap_or(1.0);
        let ens = if let Some(g0) = e.g0_hz {
            let n = e.n_spins.ok_or("uniform ensemble needs n_spins")?;
            SpinEnsemble::uniform(n, to_angular(g0)).and_then(|x| x.with_polarization(p))
        } else if let Some(m) = &e.members {
            let members = m
                .iter()
                .map(|m| SpinMember::new(to_angular(m.coupling_hz), to_angular(m.detuning_hz)))
                .collect();
            let n = e.n_spins.unwrap_or(m.len() as f64);
            SpinEnsemble::new(members, n, p)
        } else {
            let seed = self
                .seed
                .ok_or("seed is required: the ensemble is sampled from a density")?;
            self.ensemble_generator(seed)?
                .sample()
                .and_then(|x| x.with_polarization(p))
        };
        ens.map_err(|e| e.to_string())
    }

    pub fn noise_model(&self) -> Result<NoiseModel, String> {
        let n = self.noise.as_ref().ok_or("scenario has no [noise] section")?;
        let r = self.resonator_model()?;
        NoiseModel::new(n.temperature_k, r.omega_c, n.amplifier_added_photons).map_err(|e| e.to_string())
    }

    /// Dotted paths of every value flagged as an assumption.
    pub fn assumptions(&self) -> Vec<String> {
        self.sources
            .iter()
            .filter(|(_, s)| **s == Source::Assumed)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "name = \"x\"\n\n[lifetimes]\nt2_star_s = 1e-6\nt2_s = 3.0\nt1_s = 1.0\n\n[[sweep]]\ncommand = \"regime\"\nparameter = \"resonator.q\"\nstart = 1.0\nstop = 2.0\npoints = 3\n\n[[sweep]]\ncommand = \"nope\"\nparameter = \"resonator.q\"\nstart = 1.0\nstop = 2.0\npoints = 0\n";

    #[test]
    fn locates_keys_and_headers() {
        assert_eq!(locate(SRC, "lifetimes.t2_s"), Some(5));
        assert_eq!(locate(SRC, "lifetimes.missing"), Some(3));
        assert_eq!(locate(SRC, "sweep[1].points"), Some(20));
        assert_eq!(locate(SRC, "sweep[0].command"), Some(9));
        assert_eq!(locate(SRC, "seed"), None);
    }

    #[test]
    fn lifetime_and_sweep_diagnostics() {
        let s = parse(SRC).unwrap();
        let d = s.validate(SRC);
        assert!(d
            .iter()
            .any(|d| d.path == "lifetimes.t2_s" && d.line == Some(5) && d.message.contains("T2 ≤ 2T1")));
        assert!(d.iter().any(|d| d.path == "sweep[1].points" && d.line == Some(20)));
        assert!(d.iter().any(|d| d.path == "sweep[1].command"));
        // resonator.q does not exist in this scenario
        assert!(d.iter().any(|d| d.path == "sweep[0].parameter"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse("name = \"x\"\n[resonator]\nfrequency_hz = \"ten\"\nq = 1.0\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        let err = parse("name = \"x\"\nbogus = 1\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn parameter_override() {
        let s = parse("[resonator]\nfrequency_hz = 1e9\nq = 100.0\n").unwrap();
        let t = s.with_parameter("resonator.q", 250.0).unwrap();
        assert_eq!(t.resonator.unwrap().q, 250.0);
        assert!(s.with_parameter("resonator.nothing", 1.0).is_err());
    }

    #[test]
    fn log_sweep_values() {
        let s = SweepSpec {
            command: "regime".into(),
            parameter: "x".into(),
            start: 1.0,
            stop: 100.0,
            points: 3,
            scale: SweepScale::Log,
        };
        let v = s.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[2] == 100.0);
    }
}
