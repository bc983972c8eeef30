use rand::Rng;

use crate::error::{contract, Result};
use crate::linalg::{dot, norm, project_ball, sq_dist, CompensatedSum};

/// Step schedule of an [`OgdState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OgdVariant {
    /// `x <- proj(x + g / sqrt(T))` for linear gains.
    Eager,
    /// `y <- y + g / sqrt(2T)`, `x = y / max(1, |y|)` for linear gains.
    Lazy,
    /// Follow-the-leader on `|x - a_t|^2`: `x` is the running mean of the points.
    StronglyConvex,
    /// `x <- proj(x - grad / (H t))` on H-strongly convex losses. Audit only.
    EagerStronglyConvex { h: f64 },
}

/// Ball-side learner.
#[derive(Debug, Clone)]
pub struct OgdState {
    variant: OgdVariant,
    horizon: u64,
    y: Vec<f64>,
    x: Vec<f64>,
    t: u64,
}

impl OgdState {
    pub fn new(dim: usize, horizon: u64, variant: OgdVariant) -> Result<Self> {
        if horizon == 0 {
            return Err(contract("OGD horizon must be positive"));
        }
        if let OgdVariant::EagerStronglyConvex { h } = variant {
            if !(h > 0.0) {
                return Err(contract("strong convexity modulus must be positive"));
            }
        }
        Ok(Self {
            variant,
            horizon,
            y: vec![0.0; dim],
            x: vec![0.0; dim],
            t: 0,
        })
    }

    pub fn variant(&self) -> OgdVariant {
        self.variant
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. `g` is a gain vector for the linear variants, the new
    /// point `a_t` for `StronglyConvex`, and a loss gradient at `x_t` for
    /// `EagerStronglyConvex`.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.x.len() {
            return Err(contract("gradient has the wrong dimension"));
        }
        self.t += 1;
        match self.variant {
            OgdVariant::Eager => {
                let s = 1.0 / (self.horizon as f64).sqrt();
                for ((y, x), gi) in self.y.iter_mut().zip(&self.x).zip(g) {
                    *y = x + s * gi;
                }
                self.x.copy_from_slice(&self.y);
                project_ball(&mut self.x);
            }
            OgdVariant::Lazy => {
                let s = 1.0 / (2.0 * self.horizon as f64).sqrt();
                for (y, gi) in self.y.iter_mut().zip(g) {
                    *y += s * gi;
                }
                let f = norm(&self.y).max(1.0);
                for (x, y) in self.x.iter_mut().zip(&self.y) {
                    *x = y / f;
                }
            }
            OgdVariant::StronglyConvex => {
                for (y, gi) in self.y.iter_mut().zip(g) {
                    *y += gi;
                }
                let t = self.t as f64;
                for (x, y) in self.x.iter_mut().zip(&self.y) {
                    *x = y / t;
                }
            }
            OgdVariant::EagerStronglyConvex { h } => {
                let s = 1.0 / (h * self.t as f64);
                for ((y, x), gi) in self.y.iter_mut().zip(&self.x).zip(g) {
                    *y = x - s * gi;
                }
                self.x.copy_from_slice(&self.y);
                project_ball(&mut self.x);
            }
        }
        Ok(())
    }
}

/// Learners over shifted-quadratic losses `|x - a_t|^2`.
pub trait PointLearner {
    fn x(&self) -> &[f64];
    fn observe(&mut self, point: &[f64]) -> Result<()>;
}

impl PointLearner for OgdState {
    fn x(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, point: &[f64]) -> Result<()> {
        match self.variant {
            OgdVariant::StronglyConvex => self.step(point),
            OgdVariant::EagerStronglyConvex { .. } => {
                let grad: Vec<f64> = self
                    .x
                    .iter()
                    .zip(point)
                    .map(|(x, a)| 2.0 * (x - a))
                    .collect();
                self.step(&grad)
            }
            _ => Err(contract("linear OGD variants do not take point losses")),
        }
    }
}

/// Applies each update of the inner learner only with probability `alpha`.
#[derive(Debug, Clone)]
pub struct SkipLearner<L> {
    inner: L,
    alpha: f64,
    applied: u64,
    offered: u64,
}

pub fn skip_wrapper<L: PointLearner>(inner: L, alpha: f64) -> Result<SkipLearner<L>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(contract(format!(
            "skip probability must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(SkipLearner {
        inner,
        alpha,
        applied: 0,
        offered: 0,
    })
}

impl<L: PointLearner> SkipLearner<L> {
    /// Offers one loss; returns whether it was applied. One coin is drawn
    /// per call even when `alpha = 1`, so the stream stays aligned.
    pub fn offer<R: Rng + ?Sized>(&mut self, point: &[f64], rng: &mut R) -> Result<bool> {
        self.offered += 1;
        let coin: f64 = rng.gen();
        if coin < self.alpha {
            self.inner.observe(point)?;
            self.applied += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn applied(&self) -> u64 {
        self.applied
    }

    pub fn offered(&self) -> u64 {
        self.offered
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn x(&self) -> &[f64] {
        self.inner.x()
    }
}

/// Loss-family bounds used by [`ogd_regret_audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    /// Gradient-norm bound.
    pub g: f64,
    /// Strong-convexity modulus.
    pub h: f64,
    pub form: LossForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossForm {
    /// Gains `q_t . x`, maximized.
    Linear,
    /// Losses `|x - a_t|^2`, minimized.
    ShiftedQuadratic,
}

impl LossSpec {
    pub fn linear(g: f64) -> Self {
        Self {
            g,
            h: 0.0,
            form: LossForm::Linear,
        }
    }

    /// `|x - a|^2` with `a` in the unit ball: gradients bounded by 4 on the
    /// ball, modulus 2. The iterates here stay inside the hull of the points,
    /// which tightens the gradient bound to 2.
    pub fn meb() -> Self {
        Self {
            g: 2.0,
            h: 2.0,
            form: LossForm::ShiftedQuadratic,
        }
    }
}

/// Iterates played and signals observed by an OGD run.
#[derive(Debug, Clone)]
pub struct OgdHistory {
    pub variant: OgdVariant,
    pub horizon: u64,
    /// `x_t` before the `t`-th signal.
    pub played: Vec<Vec<f64>>,
    /// Gains (linear) or points (shifted quadratic).
    pub signals: Vec<Vec<f64>>,
}

impl OgdHistory {
    /// Runs the learner over the signals and records the trajectory.
    pub fn run(dim: usize, variant: OgdVariant, signals: &[Vec<f64>]) -> Result<Self> {
        let horizon = signals.len().max(1) as u64;
        let mut s = OgdState::new(dim, horizon, variant)?;
        let mut played = Vec::with_capacity(signals.len());
        for g in signals {
            played.push(s.x().to_vec());
            match variant {
                OgdVariant::Eager | OgdVariant::Lazy => s.step(g)?,
                _ => s.observe(g)?,
            }
        }
        Ok(Self {
            variant,
            horizon,
            played,
            signals: signals.to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretAudit {
    pub regret: f64,
    pub bound: f64,
}

impl RegretAudit {
    pub fn holds(&self) -> bool {
        self.regret <= self.bound + 1e-7
    }
}

/// Realized regret against the best fixed point in hindsight, and the
/// variant's bound.
///
/// Linear gains: the best point is `Q / |Q|` with `Q = sum q_t`, worth `|Q|`.
/// Shifted quadratics: the best point is the mean of the `a_t`.
pub fn ogd_regret_audit(history: &OgdHistory, loss: &LossSpec) -> Result<RegretAudit> {
    let t = history.signals.len();
    if history.played.len() != t {
        return Err(contract("history has mismatched lengths"));
    }
    if t == 0 {
        return Ok(RegretAudit {
            regret: 0.0,
            bound: 0.0,
        });
    }
    let dim = history.signals[0].len();
    let tf = t as f64;
    let regret = match loss.form {
        LossForm::Linear => {
            let mut total = vec![CompensatedSum::new(); dim];
            let mut earned = CompensatedSum::new();
            for (x, q) in history.played.iter().zip(&history.signals) {
                for (s, v) in total.iter_mut().zip(q) {
                    s.add(*v);
                }
                earned.add(dot(x, q));
            }
            let q_sum: Vec<f64> = total.iter().map(CompensatedSum::value).collect();
            norm(&q_sum) - earned.value()
        }
        LossForm::ShiftedQuadratic => {
            let mut mean = vec![CompensatedSum::new(); dim];
            for a in &history.signals {
                for (s, v) in mean.iter_mut().zip(a) {
                    s.add(*v);
                }
            }
            let mean: Vec<f64> = mean.iter().map(|s| s.value() / tf).collect();
            let mut r = CompensatedSum::new();
            for (x, a) in history.played.iter().zip(&history.signals) {
                r.add(sq_dist(x, a));
                r.add(-sq_dist(&mean, a));
            }
            r.value()
        }
    };
    let horizon = history.horizon as f64;
    let bound = match (history.variant, loss.form) {
        (OgdVariant::Eager, LossForm::Linear) => 2.0 * loss.g.max(1.0) * horizon.sqrt(),
        (OgdVariant::Lazy, LossForm::Linear) => {
            if loss.g > 1.0 + 1e-12 {
                return Err(contract(
                    "the lazy-projection bound needs gains of norm at most 1",
                ));
            }
            2.0 * (2.0 * horizon).sqrt()
        }
        (OgdVariant::StronglyConvex, LossForm::ShiftedQuadratic) => {
            2.0 * loss.g * loss.g / loss.h * horizon.max(2.0).ln()
        }
        (OgdVariant::EagerStronglyConvex { .. }, LossForm::ShiftedQuadratic) => {
            loss.g * loss.g / loss.h * (1.0 + horizon.ln())
        }
        _ => return Err(contract("variant and loss form do not match")),
    };
    Ok(RegretAudit { regret, bound })
}
