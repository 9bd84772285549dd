use num_complex::Complex64;

use super::config::{adapt_step, BranchRule, Corrector, Integrator, ReinitPolicy, TrackerConfig};
use super::state::{init_from_eigenpair, perturb_epsilon, residual, TrackerState, INIT_RESIDUAL_MAX};
use super::system::{correct_newton_cached, fem_step, rk4_step};
use super::trajectory::{StepFlags, Trajectory, TrajectoryRecord};
use crate::dae::{Pencil, PencilProvider, PencilSample};
use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, OrderingCache};
use crate::spectrum::{full_spectrum, mac};

/// Tracking stopped early; `partial` holds every step accepted before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("tracking aborted at p = {p}: {cause}")]
pub struct TrackingAborted {
    pub partial: Trajectory,
    pub cause: Error,
    pub p: f64,
}

/// Reinitialization fails when no eigenvector matches the reference at least this well.
pub const REINIT_MAC_MIN: f64 = 0.3;

/// Iteration budget multiplier for the corrector right after an imaginary
/// perturbation: the real axis separates the Newton basins of a complex
/// pair, and a start `eps` away from it needs about `log2(1 / eps)` extra
/// iterations to leave it.
const PERTURBED_ITER_FACTOR: usize = 5;

/// Candidates whose MAC is within this margin of the best are ranked by
/// eigenvalue distance instead.
const REINIT_MAC_TIE: f64 = 1e-3;

/// Picks a fresh eigenpair at `p` from the dense spectrum by MAC against
/// `reference_phi`.
pub fn reinitialize<P: PencilProvider + ?Sized>(
    provider: &P,
    p: f64,
    reference_phi: &ComplexVector,
    s_prev: Complex64,
    rule: BranchRule,
    c: Complex64,
) -> Result<TrackerState> {
    let pencil = provider.pencil(p)?;
    let pairs = full_spectrum(provider, p, false, true)?;
    let mut ranked = Vec::with_capacity(pairs.len());
    for (k, pair) in pairs.iter().enumerate() {
        ranked.push((k, mac(reference_phi, &pair.right)?, (pair.s - s_prev).norm()));
    }
    let best_mac = ranked.iter().map(|r| r.1).fold(0.0, f64::max);
    ranked.sort_by(|a, b| {
        let a_top = a.1 >= best_mac - REINIT_MAC_TIE;
        let b_top = b.1 >= best_mac - REINIT_MAC_TIE;
        b_top
            .cmp(&a_top)
            .then_with(|| if a_top { a.2.total_cmp(&b.2) } else { b.1.total_cmp(&a.1) })
    });
    let pick = match rule {
        BranchRule::Same => ranked.first(),
        BranchRule::Other => ranked.get(1).or(ranked.first()),
    };
    let (k, m, _) = *pick.ok_or(Error::NoCandidate {
        best_mac: 0.0,
        threshold: REINIT_MAC_MIN,
    })?;
    if m < REINIT_MAC_MIN {
        return Err(Error::NoCandidate {
            best_mac: m,
            threshold: REINIT_MAC_MIN,
        });
    }
    init_from_eigenpair(&pencil.e, &pencil.a, p, pairs[k].s, &pairs[k].right, c)
}

/// Fold indicator between two consecutive states.
///
/// Flags a sign change of `Im(s)`, a collapse of `Im(s)` below `eps` from
/// above `100 eps`, the reverse emergence, or a mass-matrix condition
/// estimate above `cond_cap`.
pub fn detect_fold(prev: &TrackerState, next: &TrackerState, cond_estimate: f64, eps: f64, cond_cap: f64) -> bool {
    let (a, b) = (prev.s.im, next.s.im);
    let sign_change = a * b < 0.0 && a.abs().max(b.abs()) > eps;
    let collapse = b.abs() < eps && a.abs() > 100.0 * eps;
    let emergence = a.abs() < eps && b.abs() > 100.0 * eps;
    sign_change || collapse || emergence || cond_estimate > cond_cap
}

fn eps_for(base: f64, s: Complex64) -> f64 {
    base * s.norm().max(1.0)
}

struct Accepted {
    state: TrackerState,
    pencil: Pencil,
    iterations: usize,
    cond: f64,
    dp: f64,
    flags: StepFlags,
}

struct Tracker<'a, P: ?Sized> {
    provider: &'a P,
    cfg: &'a TrackerConfig,
    grid: Option<Vec<f64>>,
    state: TrackerState,
    pencil: Pencil,
    sample: Option<PencilSample>,
    dp: f64,
    iter_factor: usize,
    orderings: OrderingCache,
}

impl<'a, P: PencilProvider + ?Sized> Tracker<'a, P> {
    fn dir(&self) -> f64 {
        self.cfg.direction()
    }

    fn done(&self) -> bool {
        if (self.cfg.p_fin - self.state.p) * self.dir() <= 0.0 {
            return true;
        }
        self.grid.is_some() && self.next_grid_point().is_none()
    }

    fn next_grid_point(&self) -> Option<f64> {
        let grid = self.grid.as_ref()?;
        let dir = self.dir();
        let beyond = |q: f64| (q - self.state.p) * dir > 0.0 && (q - self.cfg.p_fin) * dir <= 0.0;
        if dir > 0.0 {
            grid.iter().copied().filter(|&q| beyond(q)).reduce(f64::min)
        } else {
            grid.iter().copied().filter(|&q| beyond(q)).reduce(f64::max)
        }
    }

    /// Target parameter for a step of nominal size `dp` from `p`.
    fn target(&self, p: f64, dp: f64) -> f64 {
        if self.grid.is_some() {
            return self.next_grid_point().unwrap_or(self.cfg.p_fin);
        }
        let q = p + dp;
        if (q - self.cfg.p_fin) * self.dir() >= -1e-9 * dp.abs() {
            self.cfg.p_fin
        } else {
            q
        }
    }

    fn sample(&mut self) -> Result<&PencilSample> {
        if self.sample.is_none() {
            let (edot, adot) = self.provider.derivatives(self.state.p, &self.pencil, self.cfg.h_p)?;
            self.sample = Some(PencilSample {
                e: self.pencil.e.clone(),
                a: self.pencil.a.clone(),
                edot,
                adot,
                p: self.state.p,
                n_states: self.pencil.n_states,
            });
        }
        Ok(self.sample.as_ref().expect("sample was just filled"))
    }

    fn reject_threshold(&self) -> f64 {
        self.cfg.step.reject_factor.map_or(f64::INFINITY, |f| f * self.cfg.step.hi)
    }

    fn attempt(&mut self, start: &TrackerState, dp: f64, integrator: Integrator) -> Result<Accepted> {
        let p_next = self.target(start.p, dp);
        let dp = p_next - start.p;
        let (predicted, cond) = match integrator {
            Integrator::Fem => {
                let sample = self.sample()?.clone();
                fem_step(&sample, start, dp, &self.orderings)?
            }
            Integrator::Rk4 => {
                let sample = self.sample()?.clone();
                rk4_step(self.provider, &sample, start, dp, self.cfg.h_p, &self.orderings)?
            }
            Integrator::None => (
                TrackerState {
                    p: p_next,
                    ..start.clone()
                },
                f64::NAN,
            ),
        };
        let mut predicted = predicted;
        predicted.p = p_next;
        let pencil = self.provider.pencil(p_next)?;
        let (state, iterations) = match self.cfg.corrector {
            Corrector::Off => {
                if predicted.to_vec().iter().any(|v| !v.is_finite()) {
                    return Err(Error::NoConvergence {
                        what: "predictor",
                        iterations: 0,
                    });
                }
                (predicted, 0)
            }
            Corrector::Newton { tol, max_iter } => {
                let budget = max_iter * self.iter_factor;
                let c = correct_newton_cached(&pencil.e, &pencil.a, &predicted, tol, budget, &self.orderings)?;
                (c.state, c.iterations)
            }
        };
        Ok(Accepted {
            state,
            pencil,
            iterations,
            cond,
            dp,
            flags: StepFlags::default(),
        })
    }

    fn eigen_jump(&self, start: &TrackerState, acc: &Accepted) -> f64 {
        (acc.state.s - start.s).norm()
    }

    /// Step from `start`, halving on failure or on oversized eigenvalue changes.
    fn try_from(&mut self, start: &TrackerState, dp_full: f64) -> Result<Accepted> {
        let integrator = self.cfg.integrator;
        let corrector_on = self.cfg.corrector.is_on();
        let dp_min = self.cfg.dp_min();
        let threshold = self.reject_threshold();
        let mut dp = dp_full;
        loop {
            let at_min = self.grid.is_some() || dp.abs() <= dp_min * (1.0 + 1e-12);
            match self.attempt(start, dp, integrator) {
                Ok(acc) if self.eigen_jump(start, &acc) <= threshold => return Ok(acc),
                Ok(acc) => {
                    if !at_min {
                        dp /= 2.0;
                        continue;
                    }
                    let ds = self.eigen_jump(start, &acc);
                    if !corrector_on {
                        return Err(Error::UnverifiedJump(ds));
                    }
                    let mut best = acc;
                    if integrator != Integrator::None {
                        if let Ok(alt) = self.attempt(start, dp, Integrator::None) {
                            let m_best = mac(&start.phi, &best.state.phi).unwrap_or(0.0);
                            let m_alt = mac(&start.phi, &alt.state.phi).unwrap_or(0.0);
                            if m_alt > m_best {
                                best = alt;
                            }
                        }
                    }
                    best.flags.jump_detected = self.eigen_jump(start, &best) > threshold;
                    return Ok(best);
                }
                Err(e) => {
                    if !at_min {
                        dp /= 2.0;
                        continue;
                    }
                    if corrector_on && integrator != Integrator::None {
                        if let Ok(mut alt) = self.attempt(start, dp, Integrator::None) {
                            alt.flags.jump_detected = self.eigen_jump(start, &alt) > threshold;
                            return Ok(alt);
                        }
                    }
                    return Err(e);
                }
            }
        }
    }

    fn reinit(&self, p: f64, rule: BranchRule) -> Result<Accepted> {
        let st = &self.state;
        let state = reinitialize(self.provider, p, &st.phi, st.s, rule, st.c)?;
        let pencil = self.provider.pencil(p)?;
        Ok(Accepted {
            state,
            pencil,
            iterations: 0,
            cond: f64::NAN,
            dp: p - st.p,
            flags: StepFlags {
                reinitialized: true,
                ..StepFlags::default()
            },
        })
    }

    fn advance(&mut self) -> Result<TrajectoryRecord> {
        let start = self.state.clone();
        let dp_full = self.dp;
        let eps_base = self.cfg.epsilon_imag.unwrap_or(1e-6);
        let eps = eps_for(eps_base, start.s);

        let mut acc = match self.try_from(&start, dp_full) {
            Ok(acc) => acc,
            Err(err) => self.recover(&start, dp_full, err)?,
        };

        let fold = detect_fold(&start, &acc.state, acc.cond, eps, self.cfg.fold_cond_cap);
        acc.flags.fold_detected |= fold;
        if fold && !acc.flags.reinitialized {
            if let ReinitPolicy::OnFold(BranchRule::Other) = self.cfg.reinit_policy {
                let p = acc.state.p;
                let other = reinitialize(self.provider, p, &acc.state.phi, acc.state.s, BranchRule::Other, start.c)?;
                acc.state = other;
                acc.iterations = 0;
                acc.flags.reinitialized = true;
            }
        }

        let ds = (acc.state.s - start.s).norm();
        self.dp = if self.cfg.step.adaptive {
            adapt_step(ds, acc.dp, self.cfg)
        } else {
            self.cfg.dp_init
        };
        let record = TrajectoryRecord {
            p: acc.state.p,
            s: acc.state.s,
            phi: acc.state.phi.clone(),
            residual: residual(&acc.pencil.e, &acc.pencil.a, acc.state.s, &acc.state.phi),
            dp_used: acc.dp,
            corrector_iters: acc.iterations,
            flags: acc.flags,
        };
        self.state = acc.state;
        self.pencil = acc.pencil;
        self.sample = None;
        Ok(record)
    }

    /// Escalation after the step failed at the smallest step size.
    fn recover(&mut self, start: &TrackerState, dp_full: f64, err: Error) -> Result<Accepted> {
        if let Some(base) = self.cfg.epsilon_imag {
            if base > 0.0 && start.is_real() {
                let perturbed = perturb_epsilon(start, eps_for(base, start.s));
                self.iter_factor = PERTURBED_ITER_FACTOR;
                let retry = self.try_from(&perturbed, dp_full);
                self.iter_factor = 1;
                if let Ok(mut acc) = retry {
                    acc.flags.perturbed = true;
                    return Ok(acc);
                }
            }
        }
        let p_next = self.target(start.p, dp_full);
        match self.cfg.reinit_policy {
            ReinitPolicy::Never => Err(err),
            ReinitPolicy::OnFailure(rule) => self.reinit(p_next, rule).map_err(|_| err),
            ReinitPolicy::OnFold(rule) => {
                let acc = self.reinit(p_next, rule).map_err(|_| err.clone())?;
                let eps = eps_for(self.cfg.epsilon_imag.unwrap_or(1e-6), start.s);
                let singular = matches!(err, Error::SingularMatrix { .. });
                if singular || detect_fold(start, &acc.state, f64::NAN, eps, self.cfg.fold_cond_cap) {
                    Ok(acc)
                } else {
                    Err(err)
                }
            }
        }
    }
}

/// Continues `init` from `cfg.p_init` to `cfg.p_fin`.
pub fn track<P: PencilProvider + ?Sized>(
    provider: &P,
    init: TrackerState,
    cfg: &TrackerConfig,
) -> std::result::Result<Trajectory, TrackingAborted> {
    let mut traj = Trajectory::new(provider.parameter_name());
    let p0 = init.p;
    let fail = |traj: Trajectory, cause: Error, p: f64| TrackingAborted {
        partial: traj,
        cause,
        p,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(traj, e, p0));
    }
    if init.p != cfg.p_init {
        let e = Error::InvalidConfig(format!("initial state at p = {} but p_init = {}", init.p, cfg.p_init));
        return Err(fail(traj, e, p0));
    }
    let grid = provider.grid();
    if grid.is_some() && cfg.integrator == Integrator::Rk4 {
        let e = Error::InvalidConfig("RK4 needs midpoints, which a discrete provider cannot supply".into());
        return Err(fail(traj, e, p0));
    }
    let pencil = match provider.pencil(p0) {
        Ok(p) => p,
        Err(e) => return Err(fail(traj, e, p0)),
    };
    let res0 = residual(&pencil.e, &pencil.a, init.s, &init.phi);
    if !(res0 <= INIT_RESIDUAL_MAX) {
        let e = Error::InvalidConfig(format!("initial eigenpair residual {res0:.3e} exceeds {INIT_RESIDUAL_MAX:e}"));
        return Err(fail(traj, e, p0));
    }
    traj.records.push(TrajectoryRecord {
        p: p0,
        s: init.s,
        phi: init.phi.clone(),
        residual: res0,
        dp_used: 0.0,
        corrector_iters: 0,
        flags: StepFlags::default(),
    });
    let mut tracker = Tracker {
        provider,
        cfg,
        grid,
        state: init,
        pencil,
        sample: None,
        dp: cfg.dp_init,
        iter_factor: 1,
        orderings: OrderingCache::new(),
    };
    while !tracker.done() {
        match tracker.advance() {
            Ok(rec) => traj.records.push(rec),
            Err(e) => {
                let p = tracker.state.p;
                return Err(fail(traj, e, p));
            }
        }
    }
    Ok(traj)
}
