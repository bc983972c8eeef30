use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::log_n;

/// Which set of schedule constants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// The constants the algorithms are analyzed with (perceptron:
    /// `T = 200^2 eps^-2 ln n`, `eta = sqrt(ln n / T) / 100`).
    #[default]
    Paper,
    /// Smaller practical constants (perceptron: `T = 10 eps^-2 ln n`,
    /// `eta = sqrt(ln n / T) / 4`).
    Tuned,
}

impl std::str::FromStr for Profile {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "tuned" => Ok(Profile::Tuned),
            other => Err(invalid(format!(
                "unknown profile '{other}' (expected paper|tuned)"
            ))),
        }
    }
}

/// Leading constant of the MEB / QP iteration count `T = C eps^-2 ln n`.
pub const MEB_T_CONSTANT: f64 = 40.0;

/// Run parameters shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub profile: Profile,
    /// Overrides the iteration count `T`.
    pub iterations: Option<u64>,
    /// Overrides the learning rate `eta`.
    pub eta: Option<f64>,
    /// Overrides the MEB primal update probability `alpha`.
    pub alpha: Option<f64>,
    /// Overrides the leading constant in `T`.
    pub t_constant: Option<f64>,
    /// Perceptron: apply the primal update only with probability `1 / ln T`.
    pub skip_primal: bool,
    /// MEB / QP: reuse one coordinate sample for every iteration in which the
    /// primal point does not move, and apply the MW multiplier to the power
    /// of the epoch length.
    pub batch_epochs: bool,
    /// Record `(i_t, j_t)` for every iteration.
    pub retain_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            delta: 0.1,
            seed: 0,
            profile: Profile::Paper,
            iterations: None,
            eta: None,
            alpha: None,
            t_constant: None,
            skip_primal: false,
            batch_epochs: false,
            retain_trace: false,
        }
    }
}

/// Derived iteration count and rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub iterations: u64,
    pub eta: f64,
    /// Probability of a primal update; 1 when every iteration updates.
    pub alpha: f64,
}

impl SolverConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            seed,
            ..Self::default()
        }
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.retain_trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if let Some(t) = self.iterations {
            if t == 0 {
                return Err(invalid("iteration override must be at least 1"));
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("eta override must be positive, got {e}")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(invalid(format!(
                    "alpha override must lie in (0, 1], got {a}"
                )));
            }
        }
        if let Some(c) = self.t_constant {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("T constant must be positive, got {c}")));
            }
        }
        Ok(())
    }

    fn count(&self, constant: f64, ln_n: f64) -> u64 {
        self.iterations.unwrap_or_else(|| {
            let c = self.t_constant.unwrap_or(constant);
            ((c * ln_n / (self.eps * self.eps)).ceil() as u64).max(1)
        })
    }

    /// Perceptron (and kernel perceptron) schedule for `n` rows.
    pub fn perceptron_schedule(&self, n: usize) -> Result<Schedule> {
        self.validate()?;
        let ln_n = log_n(n);
        let (c, scale) = match self.profile {
            Profile::Paper => (200.0 * 200.0, 0.01),
            Profile::Tuned => (10.0, 0.25),
        };
        let t = self.count(c, ln_n);
        let eta = self.eta.unwrap_or(scale * (ln_n / t as f64).sqrt());
        Ok(Schedule {
            iterations: t,
            eta,
            alpha: 1.0,
        })
    }

    /// MEB / QP / margin-estimation schedule for `n` rows.
    pub fn meb_schedule(&self, n: usize) -> Result<Schedule> {
        self.validate()?;
        let ln_n = log_n(n);
        let t = self.count(MEB_T_CONSTANT, ln_n);
        let tf = t as f64;
        let eta = self.eta.unwrap_or((ln_n / tf).sqrt());
        let alpha = self
            .alpha
            .unwrap_or_else(|| (tf.max(2.0).ln() / (tf * ln_n).sqrt()).min(1.0));
        Ok(Schedule {
            iterations: t,
            eta,
            alpha,
        })
    }

    /// Generic primal-dual schedule: `T = max(T_eps(LRA), C ln n / eps^2)`.
    pub fn generic_schedule(&self, n: usize, learner_iterations: u64) -> Result<Schedule> {
        self.validate()?;
        let ln_n = log_n(n);
        let (c, scale) = match self.profile {
            Profile::Paper => (1.0, 0.01),
            Profile::Tuned => (10.0, 0.25),
        };
        let t = match self.iterations {
            Some(t) => t,
            None => self.count(c, ln_n).max(learner_iterations),
        };
        let eta = self.eta.unwrap_or(scale * (ln_n / t as f64).sqrt());
        Ok(Schedule {
            iterations: t,
            eta,
            alpha: 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_perceptron_schedule() {
        let cfg = SolverConfig::new(0.1, 0);
        let s = cfg.perceptron_schedule(200).unwrap();
        assert_eq!(s.iterations, (4e6 * 200f64.ln()).ceil() as u64);
        assert!((s.eta - 0.01 * (200f64.ln() / s.iterations as f64).sqrt()).abs() < 1e-18);
    }

    #[test]
    fn tuned_schedule_and_overrides() {
        let mut cfg = SolverConfig::new(0.1, 0).with_profile(Profile::Tuned);
        let s = cfg.perceptron_schedule(200).unwrap();
        assert_eq!(s.iterations, (1000.0 * 200f64.ln()).ceil() as u64);
        cfg.iterations = Some(7);
        cfg.eta = Some(0.3);
        let s = cfg.perceptron_schedule(200).unwrap();
        assert_eq!((s.iterations, s.eta), (7, 0.3));
    }

    #[test]
    fn meb_alpha_in_range() {
        for eps in [0.5, 0.1, 0.01] {
            let s = SolverConfig::new(eps, 0).meb_schedule(1000).unwrap();
            assert!(s.alpha > 0.0 && s.alpha <= 1.0);
        }
        let s = SolverConfig::new(0.1, 0).meb_schedule(1).unwrap();
        assert!(s.iterations >= 1 && s.eta > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SolverConfig::new(0.0, 0).validate().is_err());
        assert!(SolverConfig::new(1.0, 0).validate().is_err());
        let mut c = SolverConfig::new(0.1, 0);
        c.alpha = Some(1.5);
        assert!(c.validate().is_err());
    }
}
