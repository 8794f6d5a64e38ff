//! Oracles shared by the integration test targets, written independently
//! of the library's own constructions.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use spinmem::constants::{BOHR_MAGNETON, HBAR, NUCLEAR_MAGNETON};
use spinmem::linalg::{eigensystem, CMatrix, CVector};
use spinmem::memory::{MemoryParams, MemoryState};
use spinmem::spinsys::SpinSystem;

/// Breit–Rabi levels (rad/s) of an S = 1/2 electron coupled to spin I,
/// written out independently of the matrix construction.
pub fn breit_rabi(sys: &SpinSystem, b: f64) -> Vec<f64> {
    let i = sys.nuclear_spin;
    let a = 2.0 * PI * sys.hyperfine_hz;
    let ge = sys.g_e * BOHR_MAGNETON / HBAR;
    let gn = sys.g_n * NUCLEAR_MAGNETON / HBAR;
    let mut out = Vec::new();
    let m_max = i + 0.5;
    let mut m = -m_max;
    while m <= m_max + 1e-9 {
        if (m.abs() - m_max).abs() < 1e-9 {
            // stretched state |±1/2, ±I⟩
            let s = m.signum();
            out.push(s * 0.5 * ge * b - s * i * gn * b + a * i / 2.0);
        } else {
            let centre = -a / 4.0 - gn * b * m;
            let half_gap =
                (((ge + gn) * b / 2.0 + a * m / 2.0).powi(2) + a * a / 4.0 * ((i + 0.5).powi(2) - m * m)).sqrt();
            out.push(centre - half_gap);
            out.push(centre + half_gap);
        }
        m += 1.0;
    }
    out.sort_by(f64::total_cmp);
    out
}

/// exp(−iHt)x through the eigenvectors of the lossless Hermitian
/// Hamiltonian H (rad/s) over (a, s_1, …, s_N).
pub fn spectral_propagate(p: &MemoryParams, x: &MemoryState, t: f64) -> MemoryState {
    assert!(p.kappa == 0.0 && p.gamma2 == 0.0);
    let n = p.n_spins();
    let mut h = CMatrix::zeros(n + 1, n + 1);
    h[(0, 0)] = Complex64::new(p.cavity_detuning, 0.0);
    for j in 0..n {
        h[(0, j + 1)] = Complex64::new(p.couplings[j], 0.0);
        h[(j + 1, 0)] = Complex64::new(p.couplings[j], 0.0);
        h[(j + 1, j + 1)] = Complex64::new(p.detunings[j], 0.0);
    }
    let es = eigensystem(&h).unwrap();
    let v0 = CVector::from_iterator(n + 1, std::iter::once(x.cavity).chain(x.spins.iter().copied()));
    let mut out = CVector::zeros(n + 1);
    for k in 0..=n {
        let u = es.state(k);
        let amp = u.dotc(&v0) * Complex64::cis(-es.energies[k] * t);
        out += u * amp;
    }
    MemoryState {
        cavity: out[0],
        spins: out.iter().skip(1).copied().collect(),
        time: x.time + t,
    }
}
