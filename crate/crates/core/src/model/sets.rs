use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// A closed convex set with an exact Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub enum SimpleSet {
    FullSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl SimpleSet {
    pub fn full_space(dim: usize) -> Self {
        SimpleSet::FullSpace { dim }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("lower", "box must have positive dimension"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::invalid(
                    "lower",
                    format!("coordinate {i}: lower {l} exceeds upper {u}"),
                ));
            }
        }
        Ok(SimpleSet::Box { lower, upper })
    }

    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("center", "ball must have positive dimension"));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", format!("{radius} is not a finite nonnegative radius")));
        }
        Ok(SimpleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            SimpleSet::FullSpace { dim } => *dim,
            SimpleSet::Box { lower, .. } => lower.len(),
            SimpleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            SimpleSet::FullSpace { .. } => false,
            SimpleSet::Box { lower, upper } => lower
                .iter()
                .chain(upper.iter())
                .all(|b| b.is_finite()),
            SimpleSet::Ball { .. } => true,
        }
    }

    /// `sup_{y ∈ set} ‖y‖`, infinite for unbounded sets.
    pub fn max_norm(&self) -> f64 {
        match self {
            SimpleSet::FullSpace { .. } => f64::INFINITY,
            SimpleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let m = l.abs().max(u.abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
            SimpleSet::Ball { center, radius } => linalg::norm(center) + radius,
        }
    }

    /// Euclidean diameter, infinite for unbounded sets.
    pub fn diameter(&self) -> f64 {
        match self {
            SimpleSet::FullSpace { .. } => f64::INFINITY,
            SimpleSet::Box { lower, upper } => linalg::dist_sq(lower, upper).sqrt(),
            SimpleSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn project_in_place(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        match self {
            SimpleSet::FullSpace { .. } => {}
            SimpleSet::Box { lower, upper } => {
                for ((x, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *x = x.max(*l).min(*u);
                }
            }
            SimpleSet::Ball { center, radius } => {
                let d2 = linalg::dist_sq(v, center);
                if d2 <= radius * radius {
                    return;
                }
                let d = d2.sqrt();
                let offsets: Vec<f64> = v.iter().zip(center).map(|(x, c)| x - c).collect();
                // Shrink the scale until the rounded result lies inside, so
                // a second projection is the identity.
                let mut scale = radius / d;
                loop {
                    for ((x, c), o) in v.iter_mut().zip(center).zip(&offsets) {
                        *x = c + scale * o;
                    }
                    if linalg::dist_sq(v, center) <= radius * radius || scale == 0.0 {
                        break;
                    }
                    scale = f64::from_bits(scale.to_bits() - 1);
                }
            }
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            SimpleSet::FullSpace { .. } => x.iter().all(|v| !v.is_nan()),
            SimpleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            SimpleSet::Ball { center, radius } => {
                linalg::dist_sq(x, center).sqrt() <= radius + tol
            }
        }
    }

    /// Uniform sample from a bounded set; `None` for unbounded sets.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        if !self.is_bounded() {
            return None;
        }
        match self {
            SimpleSet::FullSpace { .. } => None,
            SimpleSet::Box { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..*u) })
                    .collect(),
            ),
            SimpleSet::Ball { center, radius } => {
                let n = center.len();
                let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = linalg::norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                Some(
                    center
                        .iter()
                        .zip(&dir)
                        .map(|(c, d)| c + r * d / norm)
                        .collect(),
                )
            }
        }
    }
}
