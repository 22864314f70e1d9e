use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `H(z) = ½ zᵀ A z` with `z = (p-block, q-block)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HamiltonianRepr", into = "HamiltonianRepr")]
pub struct QuadraticHamiltonian {
    dim: usize,
    coeffs: DMatrix<f64>,
    hbar: f64,
}

#[derive(Serialize, Deserialize)]
struct HamiltonianRepr {
    coeffs: Vec<Vec<f64>>,
    hbar: f64,
}

impl TryFrom<HamiltonianRepr> for QuadraticHamiltonian {
    type Error = Error;
    fn try_from(r: HamiltonianRepr) -> Result<Self> {
        let n = r.coeffs.len();
        if r.coeffs.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("coefficient matrix must be square".into()));
        }
        let flat: Vec<f64> = r.coeffs.into_iter().flatten().collect();
        QuadraticHamiltonian::new(DMatrix::from_row_slice(n, n, &flat), r.hbar)
    }
}

impl From<QuadraticHamiltonian> for HamiltonianRepr {
    fn from(h: QuadraticHamiltonian) -> Self {
        let n = h.coeffs.nrows();
        HamiltonianRepr {
            coeffs: (0..n).map(|i| (0..n).map(|j| h.coeffs[(i, j)]).collect()).collect(),
            hbar: h.hbar,
        }
    }
}

impl QuadraticHamiltonian {
    pub fn new(coeffs: DMatrix<f64>, hbar: f64) -> Result<Self> {
        let (r, c) = coeffs.shape();
        if r != c || r % 2 != 0 || r == 0 {
            return Err(Error::Dimension(format!(
                "coefficient matrix must be square of even size, got {r}x{c}"
            )));
        }
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Hamiltonian coefficient".into()));
        }
        if !(hbar >= 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be finite and >= 0, got {hbar}")));
        }
        let asym = linalg::max_abs(&(&coeffs - coeffs.transpose()));
        let scale = linalg::max_abs(&coeffs).max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { dim: r / 2, coeffs, hbar })
    }

    /// One canonical pair: `H = ½(h_pp p² + 2 h_pq pq + h_qq q²)`.
    pub fn one_dof(h_pp: f64, h_pq: f64, h_qq: f64, hbar: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[h_pp, h_pq, h_pq, h_qq]), hbar)
    }

    /// `H = p²/2m`.
    pub fn free(mass: f64, hbar: f64) -> Result<Self> {
        check_mass(mass)?;
        Self::one_dof(1.0 / mass, 0.0, 0.0, hbar)
    }

    /// `H = p²/2m + mω²q²/2`.
    pub fn harmonic(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        check_mass(mass)?;
        Self::one_dof(1.0 / mass, 0.0, mass * omega * omega, hbar)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn with_hbar(&self, hbar: f64) -> Self {
        Self { hbar, ..self.clone() }
    }

    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.coeffs * z))
    }

    /// Second derivatives `(∂²_p H, ∂_p∂_q H, ∂²_q H)` for one canonical pair.
    pub fn curvature(&self) -> Result<(f64, f64, f64)> {
        if self.dim != 1 {
            return Err(Error::Dimension("curvature is defined for one canonical pair".into()));
        }
        Ok((self.coeffs[(0, 0)], self.coeffs[(0, 1)], self.coeffs[(1, 1)]))
    }

    /// Linear generator `G` of Hamilton's equations, `ż = G z`.
    pub fn generator(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut g = DMatrix::zeros(2 * d, 2 * d);
        // ṗ = -∂_q H = -(A z)_q,  q̇ = ∂_p H = (A z)_p
        for j in 0..2 * d {
            for i in 0..d {
                g[(i, j)] = -self.coeffs[(d + i, j)];
                g[(d + i, j)] = self.coeffs[(i, j)];
            }
        }
        g
    }

    /// Whether the coefficient matrix is positive semidefinite.
    pub fn is_nonnegative(&self) -> bool {
        let eig = self.coeffs.clone().symmetric_eigen();
        let scale = linalg::max_abs(&self.coeffs).max(1.0);
        eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale)
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass > 0.0 && mass.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")))
    }
}

/// Jacobian of the Hamiltonian flow at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowJacobian {
    pub t: f64,
    pub matrix: DMatrix<f64>,
}

impl FlowJacobian {
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.matrix * z
    }

    /// The 2×2 matrix for a single canonical pair.
    pub fn as_matrix2(&self) -> Matrix2<f64> {
        linalg::to_matrix2(&self.matrix)
    }

    /// `‖JᵀΣJ − Σ‖_∞`.
    pub fn symplectic_defect(&self) -> f64 {
        let sigma = symplectic_form(self.matrix.nrows() / 2);
        linalg::max_abs(&(self.matrix.transpose() * &sigma * &self.matrix - sigma))
    }
}

/// `J_t = exp(t G)` where `G` is the Hamiltonian generator.
pub fn flow_jacobian(h: &QuadraticHamiltonian, t: f64) -> Result<FlowJacobian> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} is not finite")));
    }
    let matrix = linalg::expm(&(h.generator() * t));
    Ok(FlowJacobian { t, matrix })
}

/// Matrix of the form `(z, z') ↦ p·q' − q·p'`.
pub fn symplectic_form(dim: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * dim, 2 * dim);
    for i in 0..dim {
        s[(i, dim + i)] = 1.0;
        s[(dim + i, i)] = -1.0;
    }
    s
}

/// Adjoint of a 2×2 matrix with respect to the symplectic form.
pub fn symplectic_adjoint(j: &Matrix2<f64>) -> Matrix2<f64> {
    let left = Matrix2::new(0.0, -1.0, 1.0, 0.0);
    let right = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    left * j.transpose() * right
}
