use rand::Rng;

use crate::error::{contract, Result};
use crate::linalg::CompensatedSum;
use crate::sampling::sample_weighted;

/// The quadratic multiplicative-weights factor `1 - eta q + eta^2 q^2`.
///
/// Strictly positive for every real `q` (its discriminant is negative).
#[inline]
pub fn mw_multiplier(eta: f64, q: f64) -> f64 {
    let z = eta * q;
    1.0 - z + z * z
}

const RENORMALIZE_EVERY: u64 = 64;

/// Simplex-side learner: weights `w_t` over `n` experts, `p_t = w_t / |w_t|_1`.
///
/// The weights are rescaled from time to time to stay in floating range;
/// only their ratios are meaningful.
#[derive(Debug, Clone)]
pub struct MwState {
    w: Vec<f64>,
    total: f64,
    eta: f64,
    rounds: u64,
}

impl MwState {
    pub fn new(n: usize, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(contract("multiplicative weights over zero experts"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(contract(format!(
                "learning rate must be positive, got {eta}"
            )));
        }
        Ok(Self {
            w: vec![1.0; n],
            total: n as f64,
            eta,
            rounds: 0,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.w[i] / self.total
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.w.iter().map(|&x| x / self.total).collect()
    }

    /// Full update with the loss vector `q`; requires `|q(i)| <= 1/eta`.
    pub fn update(&mut self, q: &[f64]) -> Result<()> {
        if q.len() != self.w.len() {
            return Err(contract("loss vector has the wrong length"));
        }
        let cap = 1.0 / self.eta;
        if let Some((i, &v)) = q
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= cap * (1.0 + 1e-12)))
        {
            return Err(contract(format!(
                "loss q({i}) = {v} exceeds 1/eta = {cap}; clip before updating"
            )));
        }
        for (i, &v) in q.iter().enumerate() {
            self.apply(i, v);
        }
        self.end_round();
        if self.w.iter().any(|&x| !(x > 0.0)) {
            return Err(contract("a weight became nonpositive"));
        }
        Ok(())
    }

    /// Hot-path update of one weight with an already clipped loss.
    #[inline]
    pub fn apply(&mut self, i: usize, q: f64) {
        let old = self.w[i];
        let new = old * mw_multiplier(self.eta, q);
        debug_assert!(new > 0.0);
        self.w[i] = new;
        self.total += new - old;
    }

    /// Applies losses `clip(sign * vals[k] * scale, 1/eta)` to rows `rows[k]`;
    /// every other row has loss zero and keeps its weight.
    #[inline]
    pub fn apply_sparse(&mut self, rows: &[u32], vals: &[f64], scale: f64, sign: f64) {
        let cap = 1.0 / self.eta;
        let eta = self.eta;
        if rows.len() == self.w.len() {
            // dense column: rows are 0..n in order
            let mut delta = [0.0; 4];
            let mut ws = self.w.chunks_exact_mut(4);
            let mut vs = vals.chunks_exact(4);
            for (w4, a4) in (&mut ws).zip(&mut vs) {
                for l in 0..4 {
                    let z = eta * (sign * a4[l] * scale).clamp(-cap, cap);
                    let old = w4[l];
                    w4[l] = old * (1.0 - z + z * z);
                    delta[l] += w4[l] - old;
                }
            }
            for (w, &a) in ws.into_remainder().iter_mut().zip(vs.remainder()) {
                let z = eta * (sign * a * scale).clamp(-cap, cap);
                let old = *w;
                *w = old * (1.0 - z + z * z);
                delta[0] += *w - old;
            }
            self.total += (delta[0] + delta[1]) + (delta[2] + delta[3]);
            return;
        }
        let mut delta = 0.0;
        for (&i, &a) in rows.iter().zip(vals) {
            let z = eta * (sign * a * scale).clamp(-cap, cap);
            let w = &mut self.w[i as usize];
            let old = *w;
            *w = old * (1.0 - z + z * z);
            delta += *w - old;
        }
        self.total += delta;
    }

    /// Multiplies weight `i` by `factor` directly (batched updates).
    #[inline]
    pub fn scale(&mut self, i: usize, factor: f64) {
        let old = self.w[i];
        let new = old * factor;
        self.w[i] = new;
        self.total += new - old;
    }

    /// Closes a round: periodically recomputes the total exactly and keeps
    /// the weights in floating range.
    pub fn end_round(&mut self) {
        self.rounds += 1;
        if self.rounds.is_multiple_of(RENORMALIZE_EVERY)
            || !(self.total > 1e-100 && self.total < 1e100)
        {
            self.renormalize();
        }
    }

    pub fn renormalize(&mut self) {
        let s: f64 = self.w.iter().sum();
        let n = self.w.len() as f64;
        let f = n / s;
        self.w.iter_mut().for_each(|x| *x *= f);
        self.total = self.w.iter().sum();
        let min = self.w.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 1e-280 {
            // Experts this far behind have probability below 1e-280 relative
            // to the leaders; floor them so they stay strictly positive.
            self.w.iter_mut().for_each(|x| *x = x.max(1e-280));
            self.total = self.w.iter().sum();
        }
    }

    /// Draws an expert from `p_t`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_weighted(&self.w, self.total, rng)
    }
}

/// Recorded `(p_t, q_t)` pairs of an MW run.
#[derive(Debug, Clone, Default)]
pub struct MwHistory {
    pub rounds: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MwHistory {
    /// Runs MW from uniform weights on `losses`, recording each round.
    pub fn run(n: usize, eta: f64, losses: &[Vec<f64>]) -> Result<Self> {
        let mut s = MwState::new(n, eta)?;
        let mut h = MwHistory::default();
        for q in losses {
            let p = s.probabilities();
            s.update(q)?;
            h.rounds.push((p, q.clone()));
        }
        Ok(h)
    }
}

/// Both sides of the variance-aware MW regret inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwAudit {
    pub lhs: f64,
    pub rhs: f64,
}

impl MwAudit {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-7
    }
}

/// `lhs = sum_t p_t.q_t`,
/// `rhs = min_i sum_t max(q_t(i), -1/eta) + ln(n)/eta + eta sum_t p_t.q_t^2`.
pub fn mw_regret_audit(history: &MwHistory, eta: f64) -> MwAudit {
    let Some((p0, _)) = history.rounds.first() else {
        return MwAudit { lhs: 0.0, rhs: 0.0 };
    };
    let n = p0.len();
    let mut lhs = CompensatedSum::new();
    let mut second = CompensatedSum::new();
    let mut per_expert = vec![CompensatedSum::new(); n];
    for (p, q) in &history.rounds {
        for i in 0..n {
            lhs.add(p[i] * q[i]);
            second.add(p[i] * q[i] * q[i]);
            per_expert[i].add(q[i].max(-1.0 / eta));
        }
    }
    let best = per_expert
        .iter()
        .map(CompensatedSum::value)
        .fold(f64::INFINITY, f64::min);
    let mut rhs = CompensatedSum::new();
    rhs.add(best);
    rhs.add((n as f64).ln() / eta);
    rhs.add(eta * second.value());
    MwAudit {
        lhs: lhs.value(),
        rhs: rhs.value(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_loss_is_identity() {
        let mut s = MwState::new(3, 0.3).unwrap();
        let before = s.probabilities();
        s.update(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.probabilities(), before);
    }

    #[test]
    fn hand_evaluated_update() {
        let mut s = MwState::new(2, 0.5).unwrap();
        s.update(&[1.0, 0.0]).unwrap();
        assert!((s.weights()[0] - 0.75).abs() < 1e-15);
        assert!((s.weights()[1] - 1.0).abs() < 1e-15);
        let p = s.probabilities();
        assert!((p[0] - 0.75 / 1.75).abs() < 1e-15);
        assert!((p[0] - 0.4286).abs() < 1e-4);
        assert!((p[1] - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn uniform_saturating_loss_keeps_p() {
        let eta = 0.25;
        let mut s = MwState::new(4, eta).unwrap();
        s.update(&[0.3, -0.2, 0.0, 1.0]).unwrap();
        let before = s.probabilities();
        s.update(&[1.0 / eta; 4]).unwrap();
        let after = s.probabilities();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_loss_is_rejected() {
        let mut s = MwState::new(2, 0.5).unwrap();
        assert!(s.update(&[2.5, 0.0]).is_err());
        assert!(MwState::new(0, 0.5).is_err());
        assert!(MwState::new(2, 0.0).is_err());
    }

    #[test]
    fn multiplier_is_positive() {
        for k in -1000..=1000 {
            let z = k as f64 / 1000.0;
            assert!(mw_multiplier(1.0, z) >= 0.75);
        }
    }

    #[test]
    fn single_round_zero_loss_audit() {
        let h = MwHistory::run(5, 0.1, &[vec![0.0; 5]]).unwrap();
        let a = mw_regret_audit(&h, 0.1);
        assert_eq!(a.lhs, 0.0);
        assert!((a.rhs - 5f64.ln() / 0.1).abs() < 1e-12);
        assert!(a.holds());
    }

    #[test]
    fn renormalization_preserves_distribution() {
        let mut s = MwState::new(3, 0.5).unwrap();
        for _ in 0..500 {
            s.apply(0, -2.0);
            s.apply(1, 1.0);
            s.end_round();
        }
        let p = s.probabilities();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p[0] > p[2] && p[2] > p[1]);
        assert!(s.weights().iter().all(|&w| w > 0.0));
    }
}
