use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictor used to advance the continuation ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Fem,
    Rk4,
    /// Zero-order predictor: the previous eigenpair is handed straight to
    /// the corrector. Requires a corrector.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Corrector {
    Off,
    Newton { tol: f64, max_iter: usize },
}

impl Corrector {
    pub fn newton() -> Self {
        Corrector::Newton {
            tol: 1e-10,
            max_iter: 10,
        }
    }

    pub fn is_on(&self) -> bool {
        matches!(self, Corrector::Newton { .. })
    }
}

/// Step-size control: adaptation thresholds on `|ds|` and the bounds on `|dp|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub adaptive: bool,
    /// Step is doubled when `|ds|` falls below `lo`.
    pub lo: f64,
    /// Step is halved when `|ds|` exceeds `hi`.
    pub hi: f64,
    /// Smallest step magnitude; defaults to `|dp_init| / 1024`.
    pub dp_min: Option<f64>,
    /// Largest step magnitude; defaults to the sweep length.
    pub dp_max: Option<f64>,
    /// Steps with `|ds| > reject_factor * hi` are retried at half the step.
    /// `None` disables rejection.
    pub reject_factor: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            adaptive: false,
            lo: 0.04,
            hi: 0.08,
            dp_min: None,
            dp_max: None,
            reject_factor: Some(4.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchRule {
    /// The candidate whose eigenvector best matches the reference.
    Same,
    /// The runner-up, i.e. the other branch of a split pair.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "when", content = "branch")]
pub enum ReinitPolicy {
    Never,
    /// Reinitialize after a detected fold, and on failures near one.
    OnFold(BranchRule),
    /// Reinitialize on any unrecoverable step failure.
    OnFailure(BranchRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub p_init: f64,
    pub p_fin: f64,
    pub dp_init: f64,
    pub integrator: Integrator,
    pub corrector: Corrector,
    pub step: StepControl,
    /// Base magnitude of the imaginary perturbation applied to a real
    /// eigenvalue that cannot be continued; scaled by `max(1, |s|)`.
    /// `None` disables the perturbation.
    pub epsilon_imag: Option<f64>,
    /// Finite-difference step for `dE/dp`, `dA/dp`; defaults to `1e-6 max(1, |p|)`.
    pub h_p: Option<f64>,
    pub reinit_policy: ReinitPolicy,
    /// Mass-matrix condition estimate above which a fold is flagged.
    pub fold_cond_cap: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            p_init: 0.0,
            p_fin: 1.0,
            dp_init: 0.01,
            integrator: Integrator::Fem,
            corrector: Corrector::newton(),
            step: StepControl::default(),
            epsilon_imag: Some(1e-6),
            h_p: None,
            reinit_policy: ReinitPolicy::OnFold(BranchRule::Same),
            fold_cond_cap: 1e12,
        }
    }
}

impl TrackerConfig {
    pub fn sweep(p_init: f64, p_fin: f64, dp_init: f64) -> Self {
        Self {
            p_init,
            p_fin,
            dp_init,
            ..Self::default()
        }
    }

    /// Sweep direction, `+1` or `-1`; `+1` for an empty sweep.
    pub fn direction(&self) -> f64 {
        if self.p_fin < self.p_init {
            -1.0
        } else {
            1.0
        }
    }

    pub fn dp_min(&self) -> f64 {
        self.step.dp_min.unwrap_or(self.dp_init.abs() / 1024.0)
    }

    pub fn dp_max(&self) -> f64 {
        self.step
            .dp_max
            .unwrap_or_else(|| (self.p_fin - self.p_init).abs().max(self.dp_init.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.p_init.is_finite() && self.p_fin.is_finite() && self.dp_init.is_finite()) {
            return bad("sweep bounds and step must be finite".into());
        }
        if self.dp_init == 0.0 {
            return bad("dp_init must be nonzero".into());
        }
        if self.p_fin != self.p_init && self.dp_init.signum() != self.direction() {
            return bad(format!(
                "dp_init = {} points away from p_fin = {}",
                self.dp_init, self.p_fin
            ));
        }
        let st = &self.step;
        if !(st.lo > 0.0 && st.lo < st.hi) {
            return bad(format!("need 0 < lo < hi, got lo = {}, hi = {}", st.lo, st.hi));
        }
        if !(self.dp_min() > 0.0 && self.dp_min() <= self.dp_max()) {
            return bad("need 0 < dp_min <= dp_max".into());
        }
        if let Some(f) = st.reject_factor {
            if !(f > 1.0) {
                return bad("reject_factor must exceed 1".into());
            }
        }
        if let Corrector::Newton { tol, max_iter } = self.corrector {
            if !(tol > 0.0) || max_iter == 0 {
                return bad("corrector needs tol > 0 and max_iter >= 1".into());
            }
        }
        if self.integrator == Integrator::None && !self.corrector.is_on() {
            return bad("the zero-order predictor needs the corrector".into());
        }
        if let Some(e) = self.epsilon_imag {
            if !(e >= 0.0) {
                return bad("epsilon_imag must be non-negative".into());
            }
        }
        if let Some(h) = self.h_p {
            if !(h > 0.0) {
                return bad("h_p must be positive".into());
            }
        }
        Ok(())
    }
}

/// New step after a step of size `dp` produced an eigenvalue change `ds_abs`.
///
/// Doubles below `lo`, halves above `hi`, and clamps the magnitude to
/// `[dp_min, dp_max]` while keeping the sign of `dp`.
pub fn adapt_step(ds_abs: f64, dp: f64, cfg: &TrackerConfig) -> f64 {
    let next = if ds_abs < cfg.step.lo {
        2.0 * dp
    } else if ds_abs > cfg.step.hi {
        dp / 2.0
    } else {
        dp
    };
    next.abs().clamp(cfg.dp_min(), cfg.dp_max()) * dp.signum()
}
