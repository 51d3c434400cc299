use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on `‖GᵀG − I‖_max` for the orthogonal factor.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A symmetric matrix `G Λ Gᵀ` together with the sampled spectrum `Λ`.
#[derive(Clone, Debug)]
pub struct SpectrumSample {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Symmetric matrix with eigenvalues drawn from `U[lo, hi]` and eigenvectors
/// from the QR factor of a standard normal matrix.
pub fn generate_spd_with_spectrum<R: Rng + ?Sized>(
    dim: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    sample_with_spectrum(dim, lo, hi, rng).map(|s| s.matrix)
}

pub fn sample_with_spectrum<R: Rng + ?Sized>(
    dim: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<SpectrumSample> {
    if dim == 0 {
        return Err(Error::invalid("dim", "dimension must be positive"));
    }
    if !(0.0 <= lo && lo <= hi) || !hi.is_finite() {
        return Err(Error::invalid(
            "lo",
            format!("spectrum interval [{lo}, {hi}] is not a nonnegative range"),
        ));
    }
    let eigenvalues: Vec<f64> = (0..dim)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();
    let gaussian = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g = gaussian.qr().q();

    let gram = g.transpose() * &g;
    let err = (gram - DMatrix::identity(dim, dim)).amax();
    if err > ORTHOGONALITY_TOL {
        return Err(Error::Numerical(format!(
            "QR factor is not orthogonal: max deviation {err:e}"
        )));
    }

    let lambda = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let m = &g * lambda * g.transpose();
    let matrix = (&m + m.transpose()) * 0.5;
    Ok(SpectrumSample {
        matrix,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = generate_spd_with_spectrum(1, 2.0, 5.0, &mut rng).unwrap();
        assert!(m[(0, 0)] >= 2.0 && m[(0, 0)] <= 5.0);
    }

    #[test]
    fn forced_spectrum_is_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = generate_spd_with_spectrum(6, 1.5, 1.5, &mut rng).unwrap();
        let err = (m - DMatrix::identity(6, 6) * 1.5).amax();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn spectrum_lands_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = generate_spd_with_spectrum(10, 1.0, 3.0, &mut rng).unwrap();
        assert!((&m - m.transpose()).amax() <= 1e-10);
        let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
        for e in eig.iter() {
            assert!(*e >= 1.0 - 1e-8 && *e <= 3.0 + 1e-8, "{e}");
        }
    }

    #[test]
    fn invalid_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(generate_spd_with_spectrum(0, 1.0, 2.0, &mut rng).is_err());
        assert!(generate_spd_with_spectrum(3, 2.0, 1.0, &mut rng).is_err());
        assert!(generate_spd_with_spectrum(3, -1.0, 1.0, &mut rng).is_err());
    }
}
