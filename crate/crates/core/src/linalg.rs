//! Dense Hermitian eigendecomposition and matrix exponentials.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance used to accept a matrix as Hermitian.
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as the columns of `states`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub energies: Vec<f64>,
    pub states: CMatrix,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn state(&self, k: usize) -> CVector {
        self.states.column(k).into_owned()
    }

    /// Σ E_k v_k v_k†.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (k, &e) in self.energies.iter().enumerate() {
            let v = self.states.column(k);
            out += (&v * v.adjoint()) * Complex64::from(e);
        }
        out
    }
}

/// Frobenius norm.
pub fn norm(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_hermitian(h: &CMatrix) -> bool {
    if !h.is_square() {
        return false;
    }
    let scale = norm(h).max(f64::MIN_POSITIVE);
    norm(&(h - h.adjoint())) <= HERMITIAN_TOL * scale
}

/// Diagonalize a Hermitian matrix. Energies come back sorted ascending.
pub fn eigensystem(h: &CMatrix) -> Result<Eigensystem> {
    if !h.is_square() {
        return Err(invalid(format!("matrix is {}x{}, not square", h.nrows(), h.ncols())));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    if !is_hermitian(h) {
        return Err(invalid("matrix is not Hermitian"));
    }
    let d = h.nrows();
    if d == 0 {
        return Ok(Eigensystem {
            energies: vec![],
            states: CMatrix::zeros(0, 0),
        });
    }
    // symmetrize so round-off in the input cannot leak into the solver
    let sym = (h + h.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut states = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        states.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigensystem { energies, states })
}

/// exp(M) for a general complex matrix (scaling and squaring with Padé).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// ⟨u|v⟩ with the conjugate on the left.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
