//! Excitation sectors of the three-level (Dicke J = 1 or cascade) system.
//!
//! Sector `m` is spanned by `{|1, m-2>, |0, m-1>, |-1, m>}` (atomic Dicke
//! level, photon number). The interaction only couples states inside one
//! sector, so every transit reduces to a 3x3 problem.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

/// Label `m >= 2` of a three-dimensional excitation sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectorIndex(usize);

impl SectorIndex {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidSector(m));
        }
        Ok(Self(m))
    }

    /// Sector entered by a fully excited atomic system meeting `k` photons.
    pub fn for_photons(k: usize) -> Self {
        Self(k + 2)
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Interaction Hamiltonian of one sector, in units of `g`.
///
/// Diagonal `(-delta, 0, -delta)`, couplings `sqrt(2(m-1))` between the top
/// two basis states and `sqrt(2m)` between the bottom two.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorHamiltonian {
    pub m: SectorIndex,
    pub delta: f64,
    pub entries: Matrix3<f64>,
}

/// Eigenvalues and orthonormal eigenvectors (stored as columns).
///
/// No ordering is implied; consumers sum over all three pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vector3<f64>,
    pub vectors: Matrix3<f64>,
}

impl EigenSystem {
    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Matrix3<f64> {
        self.vectors * Matrix3::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

pub fn build_sector(m: SectorIndex, delta: f64) -> Result<SectorHamiltonian> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Config(format!(
            "detuning must be finite and non-negative, got {delta}"
        )));
    }
    let n = m.get() as f64;
    let upper = (2.0 * (n - 1.0)).sqrt();
    let lower = (2.0 * n).sqrt();
    #[rustfmt::skip]
    let entries = Matrix3::new(
        -delta, upper, 0.0,
        upper,  0.0,   lower,
        0.0,    lower, -delta,
    );
    Ok(SectorHamiltonian { m, delta, entries })
}

/// Closed-form dressed states on resonance.
///
/// Columns are ordered `(lambda_0, lambda_+, lambda_-)` with
/// `lambda_0 = 0`, `lambda_± = ±sqrt(2(2m-1))`.
pub fn eigensystem_resonant(m: SectorIndex) -> EigenSystem {
    let n = m.get() as f64;
    let lam = (2.0 * (2.0 * n - 1.0)).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let x1 = (n / (2.0 * n - 1.0)).sqrt();
    let z1 = -((n - 1.0) / (2.0 * n - 1.0)).sqrt();
    let x23 = -((n - 1.0) / (4.0 * n - 2.0)).sqrt();
    let z23 = -(n / (4.0 * n - 2.0)).sqrt();

    #[rustfmt::skip]
    let vectors = Matrix3::new(
        x1,  x23,   x23,
        0.0, -half, half,
        z1,  z23,   z23,
    );
    EigenSystem {
        values: Vector3::new(0.0, lam, -lam),
        vectors,
    }
}

/// Numerical eigendecomposition for any detuning.
pub fn eigensystem_general(h: &SectorHamiltonian) -> EigenSystem {
    let eig = SymmetricEigen::new(h.entries);
    EigenSystem {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    }
}
