use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

type MappingFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Kind {
    Affine { matrix: DMatrix<f64>, offset: Vec<f64> },
    Function(Arc<MappingFn>),
}

/// The game mapping `F: Y → Rⁿ` with its strong monotonicity constant `μ`
/// and Lipschitz constant `L`.
#[derive(Clone)]
pub struct GameMapping {
    dim: usize,
    mu: f64,
    lipschitz: f64,
    kind: Kind,
}

fn check_constants(mu: f64, lipschitz: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", format!("{mu} is not positive")));
    }
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid("lipschitz", format!("{lipschitz} is not positive")));
    }
    if mu > lipschitz {
        return Err(Error::invalid(
            "mu",
            format!("strong monotonicity {mu} exceeds Lipschitz constant {lipschitz}"),
        ));
    }
    Ok(())
}

impl GameMapping {
    /// `F(x) = A x + r`.
    pub fn affine(matrix: DMatrix<f64>, offset: Vec<f64>, mu: f64, lipschitz: f64) -> Result<Self> {
        check_constants(mu, lipschitz)?;
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "affine mapping matrix columns",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if offset.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                what: "affine mapping offset",
                expected: matrix.nrows(),
                got: offset.len(),
            });
        }
        Ok(Self {
            dim: offset.len(),
            mu,
            lipschitz,
            kind: Kind::Affine { matrix, offset },
        })
    }

    /// A general mapping given by a closure writing `F(x)` into its second
    /// argument. The closure must be a pure function of `x`.
    pub fn from_fn<F>(dim: usize, mu: f64, lipschitz: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        check_constants(mu, lipschitz)?;
        Ok(Self {
            dim,
            mu,
            lipschitz,
            kind: Kind::Function(Arc::new(f)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `κ = L/μ`.
    pub fn condition_number(&self) -> f64 {
        self.lipschitz / self.mu
    }

    pub fn affine_parts(&self) -> Option<(&DMatrix<f64>, &[f64])> {
        match &self.kind {
            Kind::Affine { matrix, offset } => Some((matrix, offset)),
            Kind::Function(_) => None,
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "mapping input dimension");
        assert_eq!(out.len(), self.dim, "mapping output dimension");
        match &self.kind {
            Kind::Affine { matrix, offset } => {
                linalg::mat_vec_into(matrix, x, out);
                for (o, r) in out.iter_mut().zip(offset) {
                    *o += r;
                }
            }
            Kind::Function(f) => f(x, out),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }
}

impl fmt::Debug for GameMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Affine { .. } => "affine",
            Kind::Function(_) => "function",
        };
        f.debug_struct("GameMapping")
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .field("lipschitz", &self.lipschitz)
            .field("kind", &kind)
            .finish()
    }
}
