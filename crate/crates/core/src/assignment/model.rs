//! Shared-parameter LinUCB model over joint user×group features.

use nalgebra::{DMatrix, DVector};

use super::AssignmentError;

/// Ridge accumulators `A = ridge·I + Σ φφᵀ`, `b = Σ r·φ` and the derived
/// coefficients `θ = A⁻¹ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditModel {
    dim: usize,
    ridge: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
    theta: DVector<f64>,
    a_inv: DMatrix<f64>,
    n_updates: u64,
}

impl BanditModel {
    pub fn new(dim: usize, ridge: f64) -> Result<Self, AssignmentError> {
        if dim == 0 || !(ridge > 0.0) || !ridge.is_finite() {
            return Err(AssignmentError::Validation(
                "model needs dim > 0 and a positive finite ridge".into(),
            ));
        }
        Ok(Self {
            dim,
            ridge,
            a: DMatrix::identity(dim, dim) * ridge,
            b: DVector::zeros(dim),
            theta: DVector::zeros(dim),
            a_inv: DMatrix::identity(dim, dim) / ridge,
            n_updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    pub fn theta(&self) -> &[f64] {
        self.theta.as_slice()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    fn check_dim(&self, phi: &[f64]) -> Result<(), AssignmentError> {
        if phi.len() != self.dim {
            return Err(AssignmentError::DimensionMismatch {
                expected: self.dim,
                got: phi.len(),
            });
        }
        Ok(())
    }

    /// `(μ̂, σ)` with `μ̂ = θᵀφ` and `σ = sqrt(φᵀ A⁻¹ φ)`.
    pub fn estimate(&self, phi: &[f64]) -> Result<(f64, f64), AssignmentError> {
        self.check_dim(phi)?;
        let v = DVector::from_column_slice(phi);
        let mu = self.theta.dot(&v);
        let quad = v.dot(&(&self.a_inv * &v));
        Ok((mu, quad.max(0.0).sqrt()))
    }

    /// Rank-one update with one observed `(φ, r)` pair.
    pub fn update(&mut self, phi: &[f64], reward: f64) -> Result<(), AssignmentError> {
        self.check_dim(phi)?;
        if !reward.is_finite() || phi.iter().any(|x| !x.is_finite()) {
            return Err(AssignmentError::Validation("non-finite feature or reward".into()));
        }
        let v = DVector::from_column_slice(phi);
        self.a += &v * v.transpose();
        self.b += &v * reward;
        self.refresh()?;
        self.n_updates += 1;
        Ok(())
    }

    fn refresh(&mut self) -> Result<(), AssignmentError> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| AssignmentError::Internal("design matrix lost positive definiteness".into()))?;
        self.theta = chol.solve(&self.b);
        self.a_inv = chol.inverse();
        Ok(())
    }

    /// θ from an LU solve of the current accumulators, independent of the
    /// cached Cholesky factor.
    pub fn solve_direct(&self) -> Option<Vec<f64>> {
        self.a
            .clone()
            .lu()
            .solve(&self.b)
            .map(|t| t.as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn scalar_update() {
        let mut m = BanditModel::new(1, 1.0).unwrap();
        m.update(&[1.0], 1.0).unwrap();
        assert_eq!(m.design()[(0, 0)], 2.0);
        assert_eq!(m.response()[0], 1.0);
        assert!((m.theta()[0] - 0.5).abs() < 1e-15);
        let (mu, sigma) = m.estimate(&[1.0]).unwrap();
        assert!((mu - 0.5).abs() < 1e-15);
        assert!((sigma - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_update_leaves_model_unchanged() {
        let mut m = BanditModel::new(3, 1.0).unwrap();
        let before = m.clone();
        m.update(&[0.0; 3], 0.0).unwrap();
        assert_eq!(m.design(), before.design());
        assert_eq!(m.response(), before.response());
        assert_eq!(m.theta(), before.theta());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut m = BanditModel::new(2, 1.0).unwrap();
        assert!(matches!(
            m.update(&[1.0], 1.0),
            Err(AssignmentError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(m.update(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(m.update(&[1.0, 0.0], f64::INFINITY).is_err());
        assert!(BanditModel::new(2, 0.0).is_err());
    }

    #[test]
    fn incremental_theta_agrees_with_direct_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut m = BanditModel::new(6, 1.0).unwrap();
        for _ in 0..200 {
            let phi: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            m.update(&phi, rng.random_range(-1.0..1.0)).unwrap();
        }
        let direct = m.solve_direct().unwrap();
        for (a, b) in m.theta().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
