//! Uniform grid description fixing wavenumber semantics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid: per-axis point count, physical domain length, and
/// periodicity flag. Integer mode k on axis j corresponds to the
/// physical wavenumber k * 2 pi / L_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    resolution: Vec<usize>,
    domain_length: Vec<f64>,
    periodic: Vec<bool>,
}

impl GridSpec {
    pub fn new(resolution: Vec<usize>, domain_length: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        if resolution.is_empty()
            || resolution.len() != domain_length.len()
            || resolution.len() != periodic.len()
        {
            return Err(Error::InvalidArg("grid spec rank mismatch".into()));
        }
        if resolution.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArg(format!(
                "grid needs at least 2 points per axis, got {resolution:?}"
            )));
        }
        if domain_length.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return Err(Error::InvalidArg(format!(
                "domain lengths must be positive, got {domain_length:?}"
            )));
        }
        Ok(GridSpec {
            resolution,
            domain_length,
            periodic,
        })
    }

    /// Periodic grid on [0, 2 pi)^d.
    pub fn periodic_unit(resolution: &[usize]) -> Self {
        GridSpec::new(
            resolution.to_vec(),
            vec![2.0 * std::f64::consts::PI; resolution.len()],
            vec![true; resolution.len()],
        )
        .expect("valid resolution")
    }

    pub fn ndim(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn domain_length(&self) -> &[f64] {
        &self.domain_length
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    pub fn require_periodic(&self, what: &str) -> Result<()> {
        if !self.is_fully_periodic() {
            return Err(Error::NonPeriodic(format!(
                "{what} needs a periodic grid; build a periodic extension first \
                 (see the periodic extension module)"
            )));
        }
        Ok(())
    }

    /// Grid spacing per axis (periodic convention: L / N).
    pub fn spacing(&self) -> Vec<f64> {
        self.resolution
            .iter()
            .zip(&self.domain_length)
            .map(|(&n, &l)| l / n as f64)
            .collect()
    }

    /// Node coordinates along one axis: x_j = j * L / N.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let n = self.resolution[axis];
        let h = self.domain_length[axis] / n as f64;
        (0..n).map(|j| j as f64 * h).collect()
    }

    /// Physical wavenumbers in natural spectrum order along one axis:
    /// k_j * 2 pi / L with signed integer modes.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.resolution[axis];
        let scale = 2.0 * std::f64::consts::PI / self.domain_length[axis];
        (0..n)
            .map(|j| crate::tensor::fft::signed_mode(j, n) as f64 * scale)
            .collect()
    }

    /// Uniform quadrature weight: prod_j L_j / N_j (rectangle rule,
    /// which coincides with the trapezoid rule on periodic grids).
    pub fn quadrature_weight(&self) -> f64 {
        self.resolution
            .iter()
            .zip(&self.domain_length)
            .map(|(&n, &l)| l / n as f64)
            .product()
    }

    /// Same grid with a different per-axis resolution.
    pub fn with_resolution(&self, resolution: &[usize]) -> Result<Self> {
        GridSpec::new(
            resolution.to_vec(),
            self.domain_length.clone(),
            self.periodic.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(vec![1], vec![1.0], vec![true]).is_err());
        assert!(GridSpec::new(vec![8], vec![0.0], vec![true]).is_err());
        assert!(GridSpec::new(vec![8, 8], vec![1.0], vec![true, true]).is_err());
    }

    #[test]
    fn wavenumber_convention() {
        let g = GridSpec::new(vec![8], vec![1.0], vec![true]).unwrap();
        let k = g.wavenumbers(0);
        let tau = 2.0 * std::f64::consts::PI;
        assert!((k[1] - tau).abs() < 1e-15);
        assert!((k[7] + tau).abs() < 1e-15);
        assert!((k[4] + 4.0 * tau).abs() < 1e-15);
    }

    #[test]
    fn quadrature_is_domain_measure_over_points() {
        let g = GridSpec::new(vec![10, 20], vec![2.0, 3.0], vec![true, true]).unwrap();
        let total = g.quadrature_weight() * 200.0;
        assert!((total - 6.0).abs() < 1e-12);
    }
}
