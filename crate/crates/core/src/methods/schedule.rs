use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Projection,
    Korpelevich,
    Popov,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Projection, Method::Korpelevich, Method::Popov];

    pub fn name(self) -> &'static str {
        match self {
            Method::Projection => "projection",
            Method::Korpelevich => "korpelevich",
            Method::Popov => "popov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "projection" => Ok(Method::Projection),
            "korpelevich" | "extragradient" => Ok(Method::Korpelevich),
            "popov" => Ok(Method::Popov),
            _ => Err(Error::invalid(
                "method",
                format!("unknown method `{s}` (expected projection, korpelevich or popov)"),
            )),
        }
    }
}

/// `τ = 8L²(1 + √(1 + μ(4/L − μ/L²))) / (8L² − 2μL)`, always above 2.
pub fn popov_tau(mu: f64, lipschitz: f64) -> f64 {
    let l2 = lipschitz * lipschitz;
    let root = (1.0 + mu * (4.0 / lipschitz - mu / l2)).sqrt();
    8.0 * l2 * (1.0 + root) / (8.0 * l2 - 2.0 * mu * lipschitz)
}

pub fn popov_nu() -> f64 {
    2.0
}

/// Diminishing step sizes `α_k`, shared by all agents.
///
/// Iteration `k ≥ 1` uses `α_{k−1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSchedule {
    method: Method,
    mu: f64,
    lipschitz: f64,
    tau: f64,
    nu: f64,
    cap_override: Option<f64>,
}

impl StepSchedule {
    pub fn new(method: Method, mu: f64, lipschitz: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("{mu} is not positive")));
        }
        if !(lipschitz >= mu && lipschitz.is_finite()) {
            return Err(Error::invalid(
                "lipschitz",
                format!("{lipschitz} is below mu = {mu}"),
            ));
        }
        Ok(Self {
            method,
            mu,
            lipschitz,
            tau: popov_tau(mu, lipschitz),
            nu: popov_nu(),
            cap_override: None,
        })
    }

    pub fn with_popov_params(mut self, tau: f64, nu: f64) -> Result<Self> {
        if !(tau > 2.0 && tau.is_finite()) {
            return Err(Error::invalid("tau", format!("{tau} must exceed 2")));
        }
        if !(nu > 1.0 && nu.is_finite()) {
            return Err(Error::invalid("nu", format!("{nu} must exceed 1")));
        }
        self.tau = tau;
        self.nu = nu;
        Ok(self)
    }

    /// Replaces the constant cap. The resulting schedule is outside the
    /// rate guarantees.
    pub fn with_cap_override(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::invalid("cap_override", format!("{cap} is not positive")));
        }
        self.cap_override = Some(cap);
        Ok(self)
    }

    /// `1/(4(L+μ))`, the larger initial step used in the big-step scenario.
    pub fn bigstep_cap(mu: f64, lipschitz: f64) -> f64 {
        1.0 / (4.0 * (lipschitz + mu))
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn cap_override(&self) -> Option<f64> {
        self.cap_override
    }

    fn decay_numerator(&self) -> f64 {
        match self.method {
            Method::Projection | Method::Korpelevich => 2.0,
            Method::Popov => 4.0,
        }
    }

    /// Constant part of the rate theorem's step-size rule.
    pub fn theorem_cap(&self) -> f64 {
        let (mu, l, tau, nu) = (self.mu, self.lipschitz, self.tau, self.nu);
        match self.method {
            Method::Projection => mu / (2.0 * l * l),
            Method::Korpelevich => 1.0 / (4.0 * (l + mu)),
            Method::Popov => (mu / (4.0 * tau * l * l))
                .min((1.0 - 2.0 / tau) / (2.0 * l / tau + l * tau))
                .min((1.0 - 1.0 / nu) / (2.0 * mu + l * tau)),
        }
    }

    pub fn cap(&self) -> f64 {
        self.cap_override.unwrap_or_else(|| self.theorem_cap())
    }

    /// `α_k` for `k ≥ 0`.
    pub fn alpha(&self, k: usize) -> f64 {
        let decay = self.decay_numerator() / (self.mu * (k as f64 + 1.0));
        decay.min(self.cap())
    }

    /// Whether `alpha` respects the theorem's rule at index `k`.
    pub fn within_theorem(&self, k: usize, alpha: f64) -> bool {
        let decay = self.decay_numerator() / (self.mu * (k as f64 + 1.0));
        alpha > 0.0 && alpha <= decay.min(self.theorem_cap())
    }
}

/// Number of feasibility steps `N_{k,j}` per agent at iteration `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatchSchedule {
    Constant(usize),
    /// `max(1, ⌈log₁₀ k⌉)`.
    LogTen,
}

impl BatchSchedule {
    pub fn constant(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("batch", "constant batch size must be at least 1"));
        }
        Ok(BatchSchedule::Constant(n))
    }

    pub fn size(&self, k: usize) -> usize {
        match *self {
            BatchSchedule::Constant(n) => n,
            BatchSchedule::LogTen => {
                // Smallest d with 10^d ≥ k.
                let mut d = 0usize;
                let mut p = 1u128;
                while p < k as u128 {
                    p *= 10;
                    d += 1;
                }
                d.max(1)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            BatchSchedule::Constant(n) => format!("const{n}"),
            BatchSchedule::LogTen => "log10".to_string(),
        }
    }
}

impl FromStr for BatchSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "log10" || t == "logten" {
            return Ok(BatchSchedule::LogTen);
        }
        let digits = t.strip_prefix("const").unwrap_or(&t);
        match digits.parse::<usize>() {
            Ok(n) => BatchSchedule::constant(n),
            Err(_) => Err(Error::invalid(
                "batch",
                format!("`{s}` is neither `log10` nor a positive integer"),
            )),
        }
    }
}
