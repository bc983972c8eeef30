//! Regret-minimizing learners: variance-tolerant multiplicative weights on
//! the simplex and online gradient descent on the unit ball.

mod mw;
mod ogd;

pub use mw::{mw_multiplier, mw_regret_audit, MwAudit, MwHistory, MwState};
pub use ogd::{
    ogd_regret_audit, skip_wrapper, LossForm, LossSpec, OgdHistory, OgdState, OgdVariant,
    PointLearner, RegretAudit, SkipLearner,
};
