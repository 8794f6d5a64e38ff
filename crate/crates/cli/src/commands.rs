//! One function per subcommand: scenario in, JSON results and CSV tables out.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use spinmem::constants::{to_angular, to_hz, BOHR_MAGNETON, SECONDS_PER_YEAR};
use spinmem::ensemble::{classify_regime, ensemble_coupling, min_q_for_strong_coupling, thermal_polarization};
use spinmem::memory::{
    evolve_recorded, multimode_store_retrieve, retrieve, swap_times, LinearGradient, MemoryParams, MemoryState,
    Schedule, TracePoint,
};
use spinmem::resonator::{
    field_at_point, free_space_t1, nuclear_purcell_scaling, purcell_factor, purcell_rate, single_spin_coupling,
    zero_point_current,
};
use spinmem::sensitivity::{
    full_report, SensitivityInputs, DEFAULT_DUTY_CYCLE_FACTOR, REFERENCE_MIN_SPINS, REFERENCE_REPETITION_RATE_HZ,
    REFERENCE_SPINS_PER_ROOT_HZ,
};
use spinmem::spinsys::{find_clock_transitions, levels, transitions};
use spinmem::Error;

use crate::scenario::{Scenario, ScheduleSpec};

#[derive(Debug)]
pub enum Failure {
    /// The scenario lacks something the command needs (exit 2).
    Invalid(String),
    /// A model raised an error while computing (exit 3).
    Numerical(Error),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Invalid(s)
    }
}

impl From<&str> for Failure {
    fn from(s: &str) -> Self {
        Failure::Invalid(s.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => Failure::Invalid(m),
            other => Failure::Numerical(other),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "invalid scenario: {m}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

/// A CSV table; every physical column name ends in its unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub results: Value,
    pub tables: Vec<Table>,
}

type Run = Result<Output, Failure>;

pub fn run(command: &str, s: &Scenario) -> Run {
    match command {
        "spectrum" => spectrum(s),
        "clock-find" => clock_find(s),
        "coupling" => coupling(s),
        "purcell" => purcell(s),
        "regime" => regime(s),
        "memory-sim" => memory_sim(s),
        "sensitivity" => sensitivity(s),
        "sweep" => sweep(s),
        other => Err(Failure::Invalid(format!("unknown command '{other}'"))),
    }
}

fn field_range(s: &Scenario) -> (f64, f64) {
    s.field
        .as_ref()
        .and_then(|f| f.range_t)
        .map_or((0.0, 1.0), |[a, b]| (a, b))
}

fn min_matrix_element(s: &Scenario) -> f64 {
    s.field.as_ref().and_then(|f| f.min_matrix_element).unwrap_or(0.1)
}

fn operating_field(s: &Scenario) -> Option<f64> {
    s.field.as_ref().and_then(|f| f.b_t)
}

fn spectrum(s: &Scenario) -> Run {
    let sys = s.spin_system()?;
    let (lo, hi) = field_range(s);
    let points = s.field.as_ref().and_then(|f| f.points).unwrap_or(201);
    let b_op = operating_field(s).unwrap_or(hi);
    let min_me = min_matrix_element(s);

    let mut headers = vec!["field_t".to_string()];
    headers.extend((0..sys.dim()).map(|k| format!("level_{k}_hz")));
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let b = lo + (hi - lo) * k as f64 / (points - 1).max(1) as f64;
        let mut row = vec![b];
        row.extend(levels(&sys, b)?.energies().iter().map(|e| to_hz(*e)));
        rows.push(row);
    }

    let ts = transitions(&sys, b_op, min_me)?;
    let list: Vec<Value> = ts
        .iter()
        .map(|t| {
            json!({
                "level_lo": t.level_lo,
                "level_hi": t.level_hi,
                "frequency_hz": t.frequency,
                "dfdb_hz_per_t": t.dfdb,
                "matrix_element": t.matrix_element,
            })
        })
        .collect();
    let trows = ts
        .iter()
        .map(|t| {
            vec![
                t.level_lo as f64,
                t.level_hi as f64,
                t.frequency,
                t.dfdb,
                t.matrix_element,
            ]
        })
        .collect();
    Ok(Output {
        results: json!({
            "spin_system": sys,
            "field_range_t": [lo, hi],
            "points": points,
            "operating_field_t": b_op,
            "min_matrix_element": min_me,
            "levels_at_operating_field_hz": levels(&sys, b_op)?.energies().iter().map(|e| to_hz(*e)).collect::<Vec<_>>(),
            "transitions": list,
        }),
        tables: vec![
            Table {
                name: "levels".into(),
                headers,
                rows,
            },
            Table {
                name: "transitions".into(),
                headers: [
                    "level_lo_index",
                    "level_hi_index",
                    "frequency_hz",
                    "dfdb_hz_per_t",
                    "matrix_element_dimensionless",
                ]
                .map(String::from)
                .to_vec(),
                rows: trows,
            },
        ],
    })
}

fn clock_find(s: &Scenario) -> Run {
    let sys = s.spin_system()?;
    let range = field_range(s);
    let grid = s.field.as_ref().and_then(|f| f.points).unwrap_or(1000);
    let found = find_clock_transitions(&sys, range, grid)?;
    let list: Vec<Value> = found
        .iter()
        .map(|c| {
            json!({
                "field_t": c.field_star,
                "frequency_hz": c.transition.frequency,
                "dfdb_hz_per_t": c.transition.dfdb,
                "curvature_hz_per_t2": c.curvature,
                "matrix_element": c.transition.matrix_element,
                "level_lo": c.transition.level_lo,
                "level_hi": c.transition.level_hi,
            })
        })
        .collect();
    let rows = found
        .iter()
        .map(|c| {
            vec![
                c.field_star,
                c.transition.frequency,
                c.transition.dfdb,
                c.curvature,
                c.transition.matrix_element,
            ]
        })
        .collect();
    Ok(Output {
        results: json!({
            "spin_system": sys,
            "field_range_t": [range.0, range.1],
            "grid_points": grid,
            "count": found.len(),
            "clock_transitions": list,
        }),
        tables: vec![Table {
            name: "clock_transitions".into(),
            headers: [
                "field_t",
                "frequency_hz",
                "dfdb_hz_per_t",
                "curvature_hz_per_t2",
                "matrix_element_dimensionless",
            ]
            .map(String::from)
            .to_vec(),
            rows,
        }],
    })
}

fn coupling(s: &Scenario) -> Run {
    let sys = s.spin_system()?;
    let r = s.resonator_model()?;
    let spec = s.coupling.as_ref().ok_or("scenario has no [coupling] section")?;
    let b = operating_field(s).ok_or("coupling needs field.b_t")?;
    let i_zpf = zero_point_current(&r);
    let db = field_at_point(&r, i_zpf, spec.point_m)?;
    let ts = transitions(&sys, b, min_matrix_element(s))?;
    let picked: Vec<_> = match spec.transition {
        Some(k) => vec![ts
            .get(k)
            .ok_or_else(|| format!("transition {k} does not exist ({} listed)", ts.len()))?
            .clone()],
        None => ts,
    };
    let mut list = Vec::new();
    let mut rows = Vec::new();
    for t in &picked {
        let c = single_spin_coupling(&sys, t, s.b0_direction(), db)?;
        list.push(json!({
            "level_lo": c.level_lo,
            "level_hi": c.level_hi,
            "frequency_hz": c.frequency,
            "g0_hz": c.g0_hz(),
            "transverse_field_t": c.zero_point_field,
        }));
        rows.push(vec![c.frequency, c.g0_hz(), c.zero_point_field]);
    }
    Ok(Output {
        results: json!({
            "operating_field_t": b,
            "zero_point_current_a": i_zpf,
            "zero_point_field_t": db,
            "point_m": spec.point_m,
            "couplings": list,
        }),
        tables: vec![Table {
            name: "coupling".into(),
            headers: ["frequency_hz", "g0_hz", "transverse_field_t"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

fn purcell(s: &Scenario) -> Run {
    let r = s.resonator_model()?;
    let spec = s.purcell.as_ref().ok_or("scenario has no [purcell] section")?;
    let g0 = to_angular(spec.g0_hz);
    let kappa = r.kappa();
    let on = purcell_rate(g0, kappa, 0.0)?;
    let mut rows = Vec::new();
    let mut detuned = Vec::new();
    for &d in &spec.detuning_hz {
        let rate = purcell_rate(g0, kappa, to_angular(d))?;
        let suppression = if rate > 0.0 { on / rate } else { f64::INFINITY };
        detuned.push(json!({"detuning_hz": d, "rate_per_s": rate, "t1_s": 1.0 / rate, "suppression": suppression}));
        rows.push(vec![d, rate, 1.0 / rate, suppression]);
    }
    let factor = match r.mode_volume {
        Some(v) => Some(purcell_factor(r.q, r.wavelength(), v)?),
        None => None,
    };
    let nuclear = match spec.gyromagnetic_ratio {
        Some(x) => Some(nuclear_purcell_scaling(on, x)?),
        None => None,
    };
    let free_space_years = match s.spin_system() {
        Ok(sys) => Some(free_space_t1(sys.g_e * BOHR_MAGNETON * sys.electron_spin, r.omega_c)? / SECONDS_PER_YEAR),
        Err(_) => None,
    };
    Ok(Output {
        results: json!({
            "g0_hz": spec.g0_hz,
            "kappa_hz": to_hz(kappa),
            "resonant_rate_per_s": on,
            "resonant_t1_s": 1.0 / on,
            "detuned": detuned,
            "purcell_factor": factor,
            "scaled_rate_per_s": nuclear,
            "free_space_t1_years": free_space_years,
        }),
        tables: vec![Table {
            name: "purcell".into(),
            headers: ["detuning_hz", "rate_per_s", "t1_s", "suppression_dimensionless"]
                .map(String::from)
                .to_vec(),
            rows,
        }],
    })
}

fn regime(s: &Scenario) -> Run {
    let r = s.resonator_model()?;
    let e = s.spin_ensemble()?;
    let lifetimes = s.lifetimes()?;
    let g_ens = ensemble_coupling(&e);
    let g0_rms = if e.n_total > 0.0 { g_ens / e.n_total.sqrt() } else { 0.0 };
    let report = classify_regime(g_ens, g0_rms, r.kappa(), &lifetimes)?;
    let (q_min, q_note) = match min_q_for_strong_coupling(r.omega_c, g_ens, lifetimes.gamma2_star) {
        Ok(q) => (Some(q), None),
        Err(Error::UnreachableRegime(m)) => (None, Some(m)),
        Err(e) => return Err(e.into()),
    };
    let m = &report.margins;
    Ok(Output {
        results: json!({
            "n_spins": e.n_total,
            "sampled_spins": e.len(),
            "g_ens_hz": to_hz(g_ens),
            "g0_rms_hz": to_hz(g0_rms),
            "kappa_hz": to_hz(r.kappa()),
            "regimes": report,
            "min_q_for_strong_coupling": q_min,
            "min_q_note": q_note,
        }),
        tables: vec![Table {
            name: "regime_margins".into(),
            headers: [
                "strong_coupling_ensemble_ratio",
                "high_cooperativity_ensemble_ratio",
                "high_cooperativity_single_ratio",
                "purcell_regime_ratio",
            ]
            .map(String::from)
            .to_vec(),
            rows: vec![vec![
                m.strong_coupling_ensemble,
                m.high_cooperativity_ensemble,
                m.high_cooperativity_single,
                m.purcell_regime,
            ]],
        }],
    })
}

fn trace_rows(trace: &[TracePoint], offset: f64, rows: &mut Vec<Vec<f64>>) {
    for p in trace {
        rows.push(vec![
            p.time + offset,
            p.cavity.re,
            p.cavity.im,
            p.stored_norm,
            p.output_flux,
        ]);
    }
}

fn memory_sim(s: &Scenario) -> Run {
    let spec = s.memory.as_ref().ok_or("scenario has no [memory] section")?;
    let n = spec.n_spins;
    let kappa = match spec.kappa_hz {
        Some(k) => to_angular(k),
        None => s.resonator_model()?.kappa(),
    };
    let gamma2 = spec.gamma2_per_s.unwrap_or(s.lifetimes()?.gamma2);
    let detunings = match &spec.detuning {
        Some(d) => {
            let seed = s.seed.ok_or("seed is required: memory detunings are sampled")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        None => vec![0.0; n],
    };
    let params = MemoryParams::new(vec![to_angular(spec.g0_hz); n], detunings, kappa, gamma2)?
        .with_cavity_detuning(to_angular(spec.cavity_detuning_hz))
        .with_readout(spec.readout);
    let schedule = match spec.schedule.clone().unwrap_or(ScheduleSpec::Fourier) {
        ScheduleSpec::Fourier => Schedule::fourier(n),
        ScheduleSpec::Phases { step_phases_rad } => Schedule {
            step_phases: step_phases_rad,
        },
        ScheduleSpec::Gradient {
            slope_hz_per_m,
            length_m,
            tau_s,
        } => {
            let positions = (0..n).map(|j| length_m * j as f64 / n as f64).collect();
            Schedule::from_gradient(
                &LinearGradient {
                    slope: to_angular(slope_hz_per_m),
                    positions,
                },
                tau_s,
            )
        }
    };

    let times = swap_times(&params)?;
    let dt = params.default_dt();
    let (stored, write) = evolve_recorded(&MemoryState::photon(Complex64::ONE, n), &params, times.into_spins, dt)?;
    let read = retrieve(&stored, &params, &vec![0.0; n])?;
    let mut rows = Vec::new();
    trace_rows(&write, 0.0, &mut rows);
    trace_rows(&read.trace, 0.0, &mut rows);

    let m = spec.modes;
    let inputs: Vec<Complex64> = (0..m)
        .map(|k| Complex64::cis(PI * k as f64 / m as f64) / (m as f64).sqrt())
        .collect();
    let report = multimode_store_retrieve(&inputs, &params, &schedule)?;
    let fid_rows = report
        .fidelity
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let worst = report.crosstalk[k].iter().copied().fold(0.0, f64::max);
            vec![k as f64, *f, worst]
        })
        .collect();
    Ok(Output {
        results: json!({
            "n_spins": n,
            "g_ens_hz": to_hz(params.g_ens()),
            "kappa_hz": to_hz(kappa),
            "gamma2_per_s": gamma2,
            "readout": spec.readout,
            "swap_into_spins_s": times.into_spins,
            "swap_out_of_spins_s": times.out_of_spins,
            "quarter_rabi_period_s": PI / (2.0 * params.g_ens()),
            "single_photon": {
                "stored_population": stored.stored_norm_sqr(),
                "retrieval_efficiency": read.efficiency,
            },
            "multimode": {
                "modes": m,
                "inputs": inputs,
                "retrieved": report.retrieved,
                "fidelity": report.fidelity,
                "mean_fidelity": report.mean_fidelity,
                "max_crosstalk": report.max_crosstalk,
                "state_fidelity": report.state_fidelity,
                "efficiency": report.efficiency,
            },
        }),
        tables: vec![
            Table {
                name: "trace".into(),
                headers: [
                    "time_s",
                    "cavity_re_sqrt_photons",
                    "cavity_im_sqrt_photons",
                    "stored_norm_photons",
                    "output_flux_photons_per_s",
                ]
                .map(String::from)
                .to_vec(),
                rows,
            },
            Table {
                name: "modes".into(),
                headers: ["mode_index", "fidelity_dimensionless", "max_crosstalk_dimensionless"]
                    .map(String::from)
                    .to_vec(),
                rows: fid_rows,
            },
        ],
    })
}

fn sensitivity(s: &Scenario) -> Run {
    let spec = s.sensitivity.as_ref().ok_or("scenario has no [sensitivity] section")?;
    let r = s.resonator_model()?;
    let noise = s.noise_model()?;
    let gamma2_star = s.lifetimes()?.gamma2_star;
    let (polarization, p_source) = match spec.polarization {
        Some(p) => (p, "input"),
        None => (thermal_polarization(noise.temperature, r.frequency_hz())?, "thermal"),
    };
    let mut assumed: Vec<String> = Vec::new();
    let map = [
        ("resonator.frequency_hz", "resonator_frequency"),
        ("resonator.q", "quality_factor"),
        ("sensitivity.g0_hz", "g0"),
        ("lifetimes.t2_star_s", "gamma2_star"),
        ("sensitivity.n_spins", "n_spins"),
        ("sensitivity.polarization", "polarization"),
        ("noise.temperature_k", "temperature"),
        ("noise.amplifier_added_photons", "amplifier_added_photons"),
        ("sensitivity.duty_cycle_factor", "duty_cycle_factor"),
    ];
    for a in s.assumptions() {
        if let Some((_, q)) = map.iter().find(|(path, _)| *path == a) {
            assumed.push(q.to_string());
        }
    }
    if spec.duty_cycle_factor.is_none() {
        assumed.push("duty_cycle_factor".into());
    }
    let inputs = SensitivityInputs {
        g0: to_angular(spec.g0_hz),
        resonator: r.clone(),
        gamma2_star,
        n_spins: spec.n_spins,
        polarization,
        noise,
        duty_cycle_factor: spec.duty_cycle_factor.unwrap_or(DEFAULT_DUTY_CYCLE_FACTOR),
        assumed,
    };
    let report = full_report(&inputs)?;
    let echo = if spec.simulate_echo && spec.n_spins >= 1.0 && spec.g0_hz > 0.0 {
        Some(spinmem::memory::echo_photon_count(
            inputs.g0,
            r.kappa(),
            spec.n_spins,
            gamma2_star,
        )?)
    } else {
        None
    };
    let rows = report
        .quantities
        .iter()
        .map(|q| vec![q.value.unwrap_or(f64::INFINITY)])
        .collect::<Vec<_>>();
    let headers = report
        .quantities
        .iter()
        .map(|q| format!("{}_{}", q.name, unit_suffix(&q.unit)))
        .collect::<Vec<_>>();
    // one row, one column per quantity
    let row: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Output {
        results: json!({
            "model_estimate": true,
            "polarization_source": p_source,
            "report": report,
            "reference": {
                "measured_min_spins": REFERENCE_MIN_SPINS,
                "measured_repetition_rate_hz": REFERENCE_REPETITION_RATE_HZ,
                "spins_per_rt_hz": REFERENCE_SPINS_PER_ROOT_HZ,
                "model_over_reference": report.reference_ratio,
            },
            "echo_simulation": echo,
        }),
        tables: vec![Table {
            name: "sensitivity".into(),
            headers,
            rows: vec![row],
        }],
    })
}

fn unit_suffix(unit: &str) -> String {
    match unit {
        "1" => "dimensionless".into(),
        "1/s" => "per_s".into(),
        "spins/sqrt(Hz)" => "spins_per_rt_hz".into(),
        u => u.to_lowercase(),
    }
}

/// Flatten numeric leaves of a JSON object into dotted keys.
fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, f64>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Number(n) => {
            out.insert(prefix.to_string(), n.as_f64().unwrap_or(f64::NAN));
        }
        Value::Bool(b) => {
            out.insert(prefix.to_string(), if *b { 1.0 } else { 0.0 });
        }
        _ => {}
    }
}

fn sweep(s: &Scenario) -> Run {
    if s.sweep.is_empty() {
        return Err("scenario declares no [[sweep]]".into());
    }
    let mut results = Vec::new();
    let mut tables = Vec::new();
    for (k, spec) in s.sweep.iter().enumerate() {
        let values = spec.values();
        let points: Vec<(usize, f64, Result<Value, Failure>)> = values
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                let r = s
                    .with_parameter(&spec.parameter, x)
                    .map_err(Failure::Invalid)
                    .and_then(|sc| run(&spec.command, &sc).map(|o| o.results));
                (i, x, r)
            })
            .collect();
        let mut ordered = points;
        ordered.sort_by_key(|p| p.0);

        let mut columns: Vec<String> = Vec::new();
        let mut flat_rows = Vec::new();
        let mut out_points = Vec::new();
        for (i, x, r) in ordered {
            let r = r?;
            let mut flat = BTreeMap::new();
            flatten("", &r, &mut flat);
            if columns.is_empty() {
                columns = flat.keys().cloned().collect();
            }
            flat_rows.push(
                std::iter::once(x)
                    .chain(columns.iter().map(|c| flat.get(c).copied().unwrap_or(f64::NAN)))
                    .collect(),
            );
            out_points.push(json!({"index": i, "value": x, "results": r}));
        }
        let mut headers = vec![spec.parameter.replace('.', "_")];
        headers.extend(columns.iter().map(|c| c.replace('.', "_")));
        tables.push(Table {
            name: format!("sweep{k}"),
            headers,
            rows: flat_rows,
        });
        results.push(json!({
            "command": spec.command,
            "parameter": spec.parameter,
            "points": out_points,
        }));
    }
    Ok(Output {
        results: json!({ "sweeps": results }),
        tables,
    })
}
