//! Curves as basis-coefficient vectors, and keyed collections of them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::bspline::BasisSystem;
use crate::error::CoreError;
use crate::grid::Grid;
use crate::linalg::Mat;

/// A single smooth curve: a coefficient vector over a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    basis: Arc<BasisSystem>,
    coefs: Vec<f64>,
}

impl Curve {
    pub fn new(basis: Arc<BasisSystem>, coefs: Vec<f64>) -> Result<Self, CoreError> {
        if coefs.len() != basis.n_basis() {
            return Err(CoreError::shape(format!(
                "coefficient length {} != basis size {}",
                coefs.len(),
                basis.n_basis()
            )));
        }
        Ok(Curve { basis, coefs })
    }

    pub fn basis(&self) -> &Arc<BasisSystem> {
        &self.basis
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn eval(&self, t: f64) -> Result<f64, CoreError> {
        self.basis.eval(&self.coefs, t)
    }

    /// Values on every grid point.
    pub fn values_on(&self, grid: &Grid) -> Result<Vec<f64>, CoreError> {
        let b = self.basis.eval_matrix(grid)?;
        Ok(b.mul_vec(&self.coefs))
    }
}

/// A set of curves over one shared basis, keyed by unit name.
///
/// Units are unique and kept in insertion order; all joins against other
/// keyed data go through [`CurveSet::unit_index`].
#[derive(Debug, Clone)]
pub struct CurveSet {
    basis: Arc<BasisSystem>,
    units: Vec<String>,
    /// One row of coefficients per curve.
    coefs: Mat,
}

impl CurveSet {
    pub fn new(basis: Arc<BasisSystem>, units: Vec<String>, coefs: Mat) -> Result<Self, CoreError> {
        if coefs.nrows() != units.len() {
            return Err(CoreError::shape(format!(
                "coefficient rows {} != unit count {}",
                coefs.nrows(),
                units.len()
            )));
        }
        if coefs.ncols() != basis.n_basis() {
            return Err(CoreError::shape(format!(
                "coefficient columns {} != basis size {}",
                coefs.ncols(),
                basis.n_basis()
            )));
        }
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(u.clone()) {
                return Err(CoreError::input(format!("duplicate unit name {u:?}")));
            }
        }
        Ok(CurveSet {
            basis,
            units,
            coefs,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSystem> {
        &self.basis
    }

    pub fn n_curves(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.iter().position(|u| u == unit)
    }

    pub fn coefs(&self) -> &Mat {
        &self.coefs
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve {
            basis: self.basis.clone(),
            coefs: self.coefs.row(i).to_vec(),
        }
    }

    /// Evaluate all curves on a grid: one row of values per curve.
    pub fn values_on(&self, grid: &Grid) -> Result<Mat, CoreError> {
        let b = self.basis.eval_matrix(grid)?; // n_points x n_basis
        Ok(self.coefs.mul_mat(&b.transpose()))
    }
}
