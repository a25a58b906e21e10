//! Evaluation grids and trapezoid quadrature over them.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::CoreError;

/// A strictly increasing evaluation grid starting at 0.
///
/// All curves in a set share one grid, so the points are kept behind an `Arc`
/// and cloned cheaply.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<Vec<f64>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl Grid {
    /// Build from explicit points. Requires at least 4 points, strictly
    /// increasing, first point exactly 0.
    pub fn new(points: Vec<f64>) -> Result<Self, CoreError> {
        if points.len() < 4 {
            return Err(CoreError::input(format!(
                "grid needs at least 4 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(CoreError::input(format!(
                "grid must start at 0, got {}",
                points[0]
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::input("grid points must be strictly increasing"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(CoreError::input("grid points must be finite"));
        }
        Ok(Grid {
            points: Arc::new(points),
        })
    }

    /// Daily grid `0, 1, ..., n_days - 1`.
    pub fn daily(n_days: usize) -> Result<Self, CoreError> {
        Grid::new((0..n_days).map(|d| d as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires >= 4 points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Domain span `last - first`.
    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }

    /// Trapezoid quadrature weights for this grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let p = &self.points;
        let n = p.len();
        let mut w = alloc::vec![0.0; n];
        for i in 0..n - 1 {
            let h = p[i + 1] - p[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    /// Trapezoid integral of sampled values over the grid.
    pub fn integrate(&self, values: &[f64]) -> Result<f64, CoreError> {
        if values.len() != self.len() {
            return Err(CoreError::shape(format!(
                "values length {} != grid length {}",
                values.len(),
                self.len()
            )));
        }
        let p = &self.points;
        let mut acc = 0.0;
        for i in 0..p.len() - 1 {
            acc += 0.5 * (p[i + 1] - p[i]) * (values[i] + values[i + 1]);
        }
        Ok(acc)
    }

    /// Trapezoid approximation of the L2 inner product of two sampled series.
    pub fn l2_inner(&self, f: &[f64], g: &[f64]) -> Result<f64, CoreError> {
        if f.len() != self.len() || g.len() != self.len() {
            return Err(CoreError::shape(format!(
                "series lengths {}/{} != grid length {}",
                f.len(),
                g.len(),
                self.len()
            )));
        }
        let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.integrate(&prod)
    }

    /// Uniformly refined copy: each interval split into `refine` pieces.
    /// Used where plain trapezoid on the working grid is too coarse.
    pub fn refined(&self, refine: usize) -> Result<Grid, CoreError> {
        if refine == 0 {
            return Err(CoreError::input("refine factor must be at least 1"));
        }
        if refine == 1 {
            return Ok(self.clone());
        }
        let p = &self.points;
        let mut out = Vec::with_capacity((p.len() - 1) * refine + 1);
        for i in 0..p.len() - 1 {
            let a = p[i];
            let h = (p[i + 1] - p[i]) / refine as f64;
            for k in 0..refine {
                out.push(a + h * k as f64);
            }
        }
        out.push(*p.last().unwrap());
        out[0] = 0.0; // guard against -0.0 from arithmetic
        Grid::new(out)
    }
}
