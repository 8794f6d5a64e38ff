//! Acceptance gate: one PASS/FAIL line per criterion at the pinned
//! tolerances. Exits non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinmem::constants::{
    electron_gyromagnetic_hz_per_t, to_angular, BOHR_MAGNETON, G_FREE_ELECTRON, PROTON_GYROMAGNETIC_HZ_PER_T,
    SECONDS_PER_YEAR,
};
use spinmem::ensemble::{ensemble_coupling, min_q_for_strong_coupling, SpinEnsemble};
use spinmem::memory::{
    echo_photon_count, evolve, evolve_dense, multimode_store_retrieve, swap, swap_times, MemoryParams, MemoryState,
    ModeVector, Schedule,
};
use spinmem::resonator::{
    free_space_t1, nuclear_purcell_scaling, pi_pulse_power, purcell_factor, purcell_rate, ResonatorModel,
};
use spinmem::sensitivity::{
    echo_snr, full_report, min_spins, sensitivity_per_root_hz, NoiseModel, SensitivityInputs, REFERENCE_MIN_SPINS,
    REFERENCE_REPETITION_RATE_HZ,
};
use spinmem::spinsys::{dfdb, find_clock_transitions, levels, transitions, SpinSystem};

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

struct Sub {
    lines: Vec<String>,
    pass: bool,
}

impl Sub {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.pass &= pass;
        self.lines.push(format!(
            "       {} {name}: {detail}",
            if pass { "ok  " } else { "FAIL" }
        ));
    }
}

fn ensemble_g() -> f64 {
    // 10¹⁵ cm⁻³ × 0.1 cm³
    let n = 1e15 * 1e6 * 0.1e-6;
    ensemble_coupling(&SpinEnsemble::uniform(n, to_angular(50e-3)).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn breit_rabi_error(sys: &SpinSystem, b: f64) -> f64 {
    let oracle = common::breit_rabi(sys, b);
    let got = levels(sys, b).unwrap().energies();
    let scale = oracle.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    got.iter()
        .zip(&oracle)
        .map(|(g, o)| (g - o).abs() / scale.max(o.abs()))
        .fold(0.0, f64::max)
}

fn property_suites() -> Sub {
    let mut sub = Sub {
        lines: vec![],
        pass: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut worst: f64 = 0.0;
    for (sys, b_max) in [
        (SpinSystem::phosphorus_si_like(), 1.0),
        (SpinSystem::bismuth_si_like(), 1.0),
    ] {
        for k in 0..=100 {
            worst = worst.max(breit_rabi_error(&sys, b_max * k as f64 / 100.0));
        }
    }
    for _ in 0..200 {
        let sys = SpinSystem::new(
            "random",
            0.5,
            0.5,
            rng.random_range(0.5..4.0),
            rng.random_range(-6.0..6.0),
            rng.random_range(-5e9..5e9),
        )
        .unwrap();
        worst = worst.max(breit_rabi_error(&sys, rng.random_range(0.0..3.0)));
    }
    sub.check(
        "Breit–Rabi oracle",
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} (≤ 1e-12)"),
    );

    let bi = SpinSystem::bismuth_si_like();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 200 {
        let b = rng.random_range(0.02..1.0);
        let ts = transitions(&bi, b, 0.05).unwrap();
        let t = &ts[rng.random_range(0..ts.len())];
        let hf = dfdb(&bi, t, b).unwrap();
        if hf.abs() <= 1e6 {
            continue;
        }
        let f = |x: f64| {
            let e = levels(&bi, x).unwrap().energies();
            (e[t.level_hi] - e[t.level_lo]) / (2.0 * PI)
        };
        let fd = (f(b + 1e-6) - f(b - 1e-6)) / 2e-6;
        worst = worst.max((hf - fd).abs() / hf.abs());
        checked += 1;
    }
    sub.check(
        "Hellmann–Feynman vs finite difference",
        worst <= 1e-6,
        format!("max relative {worst:.2e} (≤ 1e-6)"),
    );

    let g: Vec<f64> = (0..10).map(|j| 0.5 + 0.1 * j as f64).collect();
    let d: Vec<f64> = (0..10).map(|j| 0.2 * (j as f64 - 4.5)).collect();
    let p = MemoryParams::new(g, d, 0.0, 0.0).unwrap();
    let dt = p.default_dt();
    let out = evolve(&MemoryState::photon(Complex64::ONE, 10), &p, 1e4 * dt, dt).unwrap();
    let drift = (out.norm_sqr() - 1.0).abs();
    sub.check(
        "lossless norm over 10⁴ steps",
        drift < 1e-9,
        format!("drift {drift:.2e} (< 1e-9)"),
    );

    let mut worst: f64 = 0.0;
    let cases = [
        (vec![1.3], vec![0.0]),
        (vec![1.0, 0.6], vec![0.3, -0.8]),
        (vec![1.0, 0.6, 1.4], vec![0.3, -0.8, 0.1]),
    ];
    for (g, d) in cases {
        let n = g.len();
        let p = MemoryParams::new(g, d, 0.0, 0.0).unwrap().with_cavity_detuning(0.2);
        let init = MemoryState::photon(Complex64::new(0.8, 0.6), n);
        // one write–read cycle at the default step
        let t = PI / p.g_ens();
        let oracle = common::spectral_propagate(&p, &init, t);
        for s in [
            evolve(&init, &p, t, p.default_dt()).unwrap(),
            evolve_dense(&init, &p, t).unwrap(),
        ] {
            let mut e = (s.cavity - oracle.cavity).norm_sqr();
            for (x, y) in s.spins.iter().zip(&oracle.spins) {
                e += (x - y).norm_sqr();
            }
            worst = worst.max(e.sqrt());
        }
    }
    sub.check(
        "N ≤ 3 dynamics vs eigen-propagator",
        worst < 1e-9,
        format!("max amplitude error {worst:.2e} (< 1e-9)"),
    );

    let p = MemoryParams::identical(100, 0.1, 0.0, 0.0).unwrap();
    let stored = swap(&MemoryState::photon(Complex64::ONE, 100), &p).unwrap();
    let fid = ModeVector::bright(&p).unwrap().overlap(&stored).norm_sqr();
    let t = swap_times(&p).unwrap().into_spins;
    sub.check(
        "single-photon swap",
        fid > 0.999,
        format!(
            "fidelity {fid:.6} (> 0.999) at t_swap·2g_ens/π = {:.6}",
            t * 2.0 * p.g_ens() / PI
        ),
    );

    let p = MemoryParams::identical(100, 0.01, 0.0, 0.0).unwrap();
    let rep = multimode_store_retrieve(
        &[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)],
        &p,
        &Schedule::fourier(100),
    )
    .unwrap();
    let min_f = rep.fidelity.iter().copied().fold(f64::INFINITY, f64::min);
    sub.check(
        "two-mode store/retrieve",
        min_f > 0.98 && rep.max_crosstalk < 0.02,
        format!(
            "min fidelity {min_f:.6} (> 0.98), max crosstalk {:.2e} (< 0.02)",
            rep.max_crosstalk
        ),
    );

    let kappa = 1e6;
    let logspace = |lo: f64, hi: f64, k: usize| lo * (hi / lo).powf(k as f64 / 9.0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..10 {
        let c0 = logspace(1e-6, 1e-3, i);
        for j in 0..10 {
            let g2s = kappa * logspace(0.003, 0.1, j);
            let e = echo_photon_count((c0 * kappa * g2s / 4.0).sqrt(), kappa, 100.0, g2s).unwrap();
            let r = e.simulated / e.analytic;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    sub.check(
        "echo photons simulated/analytic",
        lo >= 1.0 / 3.0 && hi <= 3.0,
        format!("ratio range [{lo:.3}, {hi:.3}] over 10×10 grid (within ×3)"),
    );

    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p = rng.random_range(1e-3..=1.0);
        let c0 = 10f64.powf(rng.random_range(-12.0..0.0));
        let n = 0.5 + 10f64.powf(rng.random_range(-3.0..2.0));
        let snr = echo_snr(min_spins(p, c0, n).unwrap(), p, c0, n).unwrap();
        worst = worst.max((snr - 1.0).abs());
    }
    sub.check(
        "SNR(N_min) = 1",
        worst < 1e-12,
        format!("max |SNR − 1| {worst:.2e} over 10⁴ inputs"),
    );
    sub
}

fn main() -> ExitCode {
    let mut gate = Gate { failed: 0 };

    let g_ens = ensemble_g();
    let g_mhz = g_ens / to_angular(1e6);
    gate.report(
        1,
        "ensemble coupling",
        rel(g_mhz, 0.5) < 0.01,
        format!("g_ens/2π = {g_mhz:.6} MHz (0.5 ± 1%)"),
    );

    let q = min_q_for_strong_coupling(to_angular(10e9), g_ens, 0.0).unwrap();
    gate.report(
        2,
        "strong-coupling Q threshold",
        rel(q, 20_000.0) < 0.01,
        format!("Q_min = {q:.2} (20000 ± 1%)"),
    );

    let pf = purcell_factor(1e5, 0.03, 1e6 * 1e-18).unwrap();
    let formula = 3.0 * 1e5 * 0.03f64.powi(3) / (4.0 * PI * PI * 1e-12);
    gate.report(
        3,
        "Purcell factor",
        rel(pf, formula) < 0.01 && rel(pf, 2.05e11) < 0.01,
        format!("F = {pf:.4e} (formula {formula:.4e}, 2.05e11 ± 1%)"),
    );

    let omega = electron_gyromagnetic_hz_per_t(G_FREE_ELECTRON) * 2.0 * PI * 0.3;
    let years = free_space_t1(G_FREE_ELECTRON * BOHR_MAGNETON / 2.0, omega).unwrap() / SECONDS_PER_YEAR;
    gate.report(
        4,
        "free-electron spontaneous T1 at 0.3 T",
        (1e3..=1e5).contains(&years),
        format!("T1 = {years:.3e} years (10⁴ within one decade)"),
    );

    let (g0, kappa) = (to_angular(450.0), to_angular(126.5e3));
    let factor = purcell_rate(g0, kappa, 0.0).unwrap() / purcell_rate(g0, kappa, to_angular(2e6)).unwrap();
    gate.report(
        5,
        "detuning suppression",
        (500.0..=2000.0).contains(&factor),
        format!("T1 suppression ×{factor:.1} (in [500, 2000])"),
    );

    let s65 = sensitivity_per_root_hz(REFERENCE_MIN_SPINS, REFERENCE_REPETITION_RATE_HZ).unwrap();
    let ideal = [1e-2, 1e-3, 2.5e-4, 1e-6]
        .iter()
        .map(|&c0| rel(min_spins(1.0, c0, 0.5).unwrap(), 1.0 / (2.0 * c0).sqrt()))
        .fold(0.0, f64::max);
    let law = {
        let inputs = |g0: f64| SensitivityInputs {
            g0,
            resonator: ResonatorModel::new("lc", 7.3e9, 7.2e4, 50.0).unwrap(),
            gamma2_star: 2e5,
            n_spins: 230.0,
            polarization: 1.0,
            noise: NoiseModel::new(0.02, to_angular(7.3e9), 0.0).unwrap(),
            duty_cycle_factor: 1.0 / 3.0,
            assumed: vec![],
        };
        let value = |g0: f64| full_report(&inputs(g0)).unwrap().n_min_per_rt_hz.unwrap() * g0 * g0;
        let base = value(to_angular(450.0));
        (0..30)
            .map(|k| rel(value(to_angular(20.0 * 1.25f64.powi(k))), base))
            .fold(0.0, f64::max)
    };
    gate.report(
        6,
        "sensitivity chain",
        s65 == 65.0 && ideal <= 2.0 * f64::EPSILON && law <= 1e-12,
        format!("260 @ 16 Hz → {s65} spins/√Hz; 1/√(2C0) deviation {ideal:.1e}; g0² law deviation {law:.1e}"),
    );

    let ratio = PROTON_GYROMAGNETIC_HZ_PER_T / electron_gyromagnetic_hz_per_t(G_FREE_ELECTRON);
    let nuclear = nuclear_purcell_scaling(50.0, ratio).unwrap();
    gate.report(
        7,
        "nuclear Purcell scaling",
        (0.5e-4..=2e-4).contains(&nuclear),
        format!("Γ = {nuclear:.4e} s⁻¹ (in [0.5, 2]×10⁻⁴)"),
    );

    let p10 = pi_pulse_power(10e-9, (1e-6, 0.5e-12)).unwrap();
    gate.report(
        8,
        "π-pulse power",
        rel(p10, 5e-9) < 1e-12,
        format!("P(10 ns) = {p10:.6e} W (5 nW)"),
    );

    let bi = SpinSystem::bismuth_si_like();
    let coarse = find_clock_transitions(&bi, (0.0, 1.0), 1000).unwrap();
    let fine = find_clock_transitions(&bi, (0.0, 1.0), 10_000).unwrap();
    let electron = find_clock_transitions(&SpinSystem::free_electron(), (0.0, 1.0), 1000).unwrap();
    let fields: Vec<String> = coarse.iter().map(|c| format!("{:.4} T", c.field_star)).collect();
    gate.report(
        9,
        "clock transitions",
        coarse.len() == 4 && fine.len() == 4 && electron.is_empty(),
        format!(
            "Bi-like {} (grid 1000) / {} (grid 10000) at [{}]; S=1/2, I=0: {}",
            coarse.len(),
            fine.len(),
            fields.join(", "),
            electron.len()
        ),
    );

    let sub = property_suites();
    gate.report(10, "property suites", sub.pass, format!("{} suites", sub.lines.len()));
    for line in &sub.lines {
        println!("{line}");
    }

    if gate.failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 10 criteria FAIL", gate.failed);
        ExitCode::FAILURE
    }
}
