//! The two-mode squeezed vacuum that drives each dot.
//!
//! The state is characterised twice: in the photon-number basis, where it
//! has amplitudes `√(1−λ²) λ^m` on `|m,m⟩`, and by its phase-space covariance
//! matrix. The two pictures are cross-checked through the photon-number mean.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, usage, Result};
use crate::fock::{Frame, OccupationTuple, PhotonVector};

/// Absolute tolerance for the purity, physicality and standard-form checks.
pub const GAUSSIAN_TOL: f64 = 1e-10;

/// Squeeze weight of an EPR source. `λ = tanh r`, `m̄ = λ²/(1−λ²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EprParams {
    lambda: f64,
}

impl EprParams {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(domain(format!("squeeze weight λ = {lambda} must lie in [0, 1)")));
        }
        Ok(Self { lambda })
    }

    pub fn from_mean(m_bar: f64) -> Result<Self> {
        Self::from_lambda(lambda_from_mean(m_bar)?)
    }

    pub fn from_squeezing(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(domain(format!("squeezing parameter r = {r} must be finite and ≥ 0")));
        }
        Self::from_lambda(r.tanh())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn squeezing(&self) -> f64 {
        self.lambda.atanh()
    }

    pub fn m_bar(&self) -> f64 {
        mean_from_lambda(self.lambda)
    }
}

/// `λ = √(m̄/(m̄+1))`.
pub fn lambda_from_mean(m_bar: f64) -> Result<f64> {
    if !(m_bar >= 0.0 && m_bar.is_finite()) {
        return Err(domain(format!("mean photon number {m_bar} must be finite and ≥ 0")));
    }
    Ok((m_bar / (m_bar + 1.0)).sqrt())
}

/// `m̄ = λ²/(1−λ²)`.
pub fn mean_from_lambda(lambda: f64) -> f64 {
    let x = lambda * lambda;
    x / (1.0 - x)
}

/// EPR state on the two polarization modes of path `a`, truncated at `|n_max, n_max⟩`.
pub fn epr_state(p: EprParams, n_max: usize) -> PhotonVector {
    let norm = (1.0 - p.lambda * p.lambda).sqrt();
    let mut amp = norm;
    let mut s = PhotonVector::new(Frame::PathsAB);
    for m in 0..=n_max as u32 {
        if amp == 0.0 {
            break;
        }
        s.add(OccupationTuple::new(m, m, 0, 0), Complex64::new(amp, 0.0));
        amp *= p.lambda;
    }
    s
}

/// Per-mode photon-number mean and variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Analytic moments: mean `m̄`, variance `m̄² + m̄`.
pub fn photon_number_moments(p: EprParams) -> Moments {
    let m = p.m_bar();
    Moments {
        mean: m,
        variance: m * m + m,
    }
}

/// Moments of the σ− mode computed by summation over a truncated state.
pub fn photon_number_moments_truncated(state: &PhotonVector) -> Moments {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (k, a) in state.iter() {
        let w = a.norm_sqr();
        let n = k.m_minus() as f64;
        s1 += w * n;
        s2 += w * n * n;
    }
    Moments {
        mean: s1,
        variance: s2 - s1 * s1,
    }
}

/// Real symmetric 4×4 covariance matrix in `(q1, p1, q2, p2)` ordering, with `ħ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix(pub Matrix4<f64>);

impl CovarianceMatrix {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// Standard form `(1/2)[[ν,0,h,0],[0,ν,0,−h],[h,0,ν,0],[0,−h,0,ν]]`, `ν = cosh 2r`, `h = √(ν²−1)`.
pub fn standard_covariance(r: f64) -> Result<CovarianceMatrix> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(domain(format!("squeezing parameter r = {r} must be finite and ≥ 0")));
    }
    let nu = (2.0 * r).cosh();
    // sinh 2r is the exact value of √(ν²−1) without the cancellation.
    let h = (2.0 * r).sinh();
    #[rustfmt::skip]
    let m = Matrix4::new(
        nu, 0.0, h, 0.0,
        0.0, nu, 0.0, -h,
        h, 0.0, nu, 0.0,
        0.0, -h, 0.0, nu,
    ) * 0.5;
    Ok(CovarianceMatrix(m))
}

/// Outcome of [`validate_gaussian`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianReport {
    /// `det V = 1/16`.
    pub pure: bool,
    /// `V + (i/2)Ω ⪰ 0`.
    pub physical: bool,
    /// Equal diagonals, only `(q1,q2)` and `(p1,p2)` couplings, and `h− = −h+`.
    pub epr_form: bool,
}

fn symplectic_form() -> Matrix4<f64> {
    #[rustfmt::skip]
    let omega = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    omega
}

/// Purity, uncertainty-relation and standard-form checks on a covariance matrix.
pub fn validate_gaussian(v: &CovarianceMatrix) -> Result<GaussianReport> {
    let m = v.0;
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > GAUSSIAN_TOL * scale {
        return Err(usage("covariance matrix is not symmetric"));
    }
    let pure = (m.determinant() - 1.0 / 16.0).abs() <= GAUSSIAN_TOL * scale.powi(4);

    let omega = symplectic_form();
    let herm = m.map(|x| Complex64::new(x, 0.0)) + omega.map(|x| Complex64::new(0.0, 0.5 * x));
    let eig = SymmetricEigen::new(herm).eigenvalues;
    let physical = eig.iter().all(|&e| e >= -GAUSSIAN_TOL * scale);

    let s = m[(0, 0)];
    let h_minus = m[(0, 2)];
    let h_plus = m[(1, 3)];
    let close = |a: f64, b: f64| (a - b).abs() <= GAUSSIAN_TOL * scale;
    let diag_equal = (1..4).all(|i| close(m[(i, i)], s));
    let zero_elsewhere = [(0, 1), (0, 3), (1, 2), (2, 3)]
        .iter()
        .all(|&(i, j)| close(m[(i, j)], 0.0));
    let epr_form = diag_equal && zero_elsewhere && close(h_minus, -h_plus);

    Ok(GaussianReport {
        pure,
        physical,
        epr_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::truncation_tail_bound;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn epr_amplitudes() {
        let vac = epr_state(EprParams::from_lambda(0.0).unwrap(), 10);
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.amplitude(&OccupationTuple::VACUUM), Complex64::new(1.0, 0.0));

        let p = EprParams::from_lambda(0.6).unwrap();
        let s = epr_state(p, 40);
        assert_relative_eq!(
            s.amplitude(&OccupationTuple::new(2, 2, 0, 0)).re,
            0.288,
            epsilon = 1e-15
        );
        assert_relative_eq!(s.norm_sqr(), 1.0 - 0.36f64.powi(41), epsilon = 1e-15);
        assert!(s.keys().all(|k| k.m_minus() == k.m_plus() && k.total_per_path().1 == 0));
        assert!(EprParams::from_lambda(1.0).is_err());
    }

    #[test]
    fn mean_inversion() {
        assert_eq!(lambda_from_mean(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            lambda_from_mean(1.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_relative_eq!(lambda_from_mean(3.0).unwrap(), 0.75f64.sqrt(), epsilon = 1e-15);
        assert!(lambda_from_mean(-0.1).is_err());
    }

    #[test]
    fn moments() {
        let m = photon_number_moments(EprParams::from_lambda(0.0).unwrap());
        assert_eq!((m.mean, m.variance), (0.0, 0.0));
        assert_relative_eq!(
            photon_number_moments(EprParams::from_mean(1.0).unwrap()).variance,
            2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            photon_number_moments(EprParams::from_mean(5.0).unwrap()).variance,
            30.0,
            epsilon = 1e-11
        );

        let p = EprParams::from_mean(2.0).unwrap();
        let t = photon_number_moments_truncated(&epr_state(p, 200));
        assert_relative_eq!(t.mean, 2.0, epsilon = 1e-10);
        assert_relative_eq!(t.variance, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn covariance_examples() {
        let v0 = standard_covariance(0.0).unwrap();
        assert_eq!(v0.0, Matrix4::identity() * 0.5);
        assert_relative_eq!(
            standard_covariance(1.0).unwrap().0[(0, 0)] * 2.0,
            3.762195691083631,
            epsilon = 1e-14
        );
        let all = GaussianReport {
            pure: true,
            physical: true,
            epr_form: true,
        };
        assert_eq!(validate_gaussian(&standard_covariance(0.5).unwrap()).unwrap(), all);
        assert_eq!(validate_gaussian(&v0).unwrap(), all);

        let thermal = CovarianceMatrix(Matrix4::identity());
        assert_relative_eq!(thermal.determinant(), 1.0);
        assert!(!validate_gaussian(&thermal).unwrap().pure);
        assert!(standard_covariance(-1.0).is_err());

        let mut asym = Matrix4::identity();
        asym[(0, 1)] = 0.3;
        assert!(validate_gaussian(&CovarianceMatrix(asym)).is_err());
    }

    #[test]
    fn squeezed_below_vacuum_is_unphysical() {
        let v = CovarianceMatrix(Matrix4::from_diagonal(&nalgebra::Vector4::new(0.25, 0.25, 0.5, 0.5)));
        assert!(!validate_gaussian(&v).unwrap().physical);
    }

    proptest! {
        #[test]
        fn lambda_round_trip(lambda in 0.0..0.999f64) {
            let back = lambda_from_mean(mean_from_lambda(lambda)).unwrap();
            prop_assert!((back - lambda).abs() < 1e-12);
        }

        #[test]
        fn standard_form_is_valid(r in 0.0..3.0f64) {
            let v = standard_covariance(r).unwrap();
            let rep = validate_gaussian(&v).unwrap();
            prop_assert!(rep.pure && rep.physical && rep.epr_form);
            let s = v.0[(0, 0)];
            prop_assert!(s >= 0.5 && s >= v.0[(0, 2)].abs() && s >= v.0[(1, 3)].abs());
            prop_assert!((v.determinant() - 1.0 / 16.0).abs() < 1e-9 * s.powi(4).max(1.0));
        }

        #[test]
        fn number_and_phase_space_agree(r in 0.0..1.2f64) {
            let p = EprParams::from_squeezing(r).unwrap();
            let n = 400;
            let mean = photon_number_moments_truncated(&epr_state(p, n)).mean;
            let tail = truncation_tail_bound(p.lambda(), n).unwrap();
            // Covariance picture: ⟨n⟩ = (V_qq + V_pp − 1)/2 = sinh² r.
            let v = standard_covariance(r).unwrap().0;
            let from_cov = (v[(0, 0)] + v[(1, 1)] - 1.0) / 2.0;
            prop_assert!((from_cov - r.sinh().powi(2)).abs() < 1e-12 * (1.0 + from_cov));
            prop_assert!((mean - from_cov).abs() <= 1e-10 + tail * (n as f64 + 1.0) * 10.0);
        }
    }
}
