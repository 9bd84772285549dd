use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dae::{DaeModel, ModelProvider, PencilProvider};
use crate::error::{Error, Result};
use crate::models::{
    load_pencil_sequence, make_companion_fold, make_multimachine, six_machine, sweep_parameter, synthetic,
    two_machine, CompanionFoldModel, MultiMachineModel, MultiMachineSpec, PencilSequence,
};
use crate::tracker::{Corrector, Integrator, TrackerConfig};

pub const DEFAULT_SYNTHETIC_MACHINES: usize = 80;
pub const DEFAULT_SEED: u64 = 1;

/// Everything a subcommand needs, as read from a JSON config file or from
/// command-line flags. Every field is optional so that the two sources can
/// be layered; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name or path to a multi-machine JSON spec.
    pub model: Option<String>,
    pub manifest: Option<PathBuf>,
    pub param: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub dp: Option<f64>,
    pub integrator: Option<Integrator>,
    pub corrector: Option<bool>,
    pub adaptive: Option<bool>,
    pub eps: Option<f64>,
    pub target_index: Option<Vec<usize>>,
    /// `[re0, re1, im0, im1]`.
    pub target_box: Option<[f64; 4]>,
    /// File with one complex entry `re,im` per line.
    pub target_mac: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Embed eigenvectors when writing JSON trajectories.
    pub vectors: Option<bool>,
    /// Seed of the synthetic model generator.
    pub seed: Option<u64>,
    /// Machine count of the synthetic model.
    pub machines: Option<usize>,
    /// Base tracker settings; the sweep flags above override its fields.
    pub tracker: Option<TrackerConfig>,
    pub max_rel_err: Option<f64>,
    pub max_dzeta: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Layers `self` (flags) over `base` (file). A model source or target
    /// selector given on top replaces every source or selector below it.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let has_source = self.model.is_some() || self.manifest.is_some();
        let has_target = self.target_index.is_some() || self.target_box.is_some() || self.target_mac.is_some();
        let (model, manifest) = if has_source {
            (self.model, self.manifest)
        } else {
            (base.model, base.manifest)
        };
        let (target_index, target_box, target_mac) = if has_target {
            (self.target_index, self.target_box, self.target_mac)
        } else {
            (base.target_index, base.target_box, base.target_mac)
        };
        RunConfig {
            model,
            manifest,
            param: self.param.or(base.param),
            from: self.from.or(base.from),
            to: self.to.or(base.to),
            dp: self.dp.or(base.dp),
            integrator: self.integrator.or(base.integrator),
            corrector: self.corrector.or(base.corrector),
            adaptive: self.adaptive.or(base.adaptive),
            eps: self.eps.or(base.eps),
            target_index,
            target_box,
            target_mac,
            out: self.out.or(base.out),
            vectors: self.vectors.or(base.vectors),
            seed: self.seed.or(base.seed),
            machines: self.machines.or(base.machines),
            tracker: self.tracker.or(base.tracker),
            max_rel_err: self.max_rel_err.or(base.max_rel_err),
            max_dzeta: self.max_dzeta.or(base.max_dzeta),
        }
    }

    pub fn source(&self) -> Result<Source> {
        match (&self.model, &self.manifest) {
            (Some(_), Some(_)) => Err(Error::InvalidConfig("give either a model or a manifest, not both".into())),
            (None, None) => Err(Error::InvalidConfig("no model source: pass --model or --manifest".into())),
            (None, Some(path)) => {
                if self.param.is_some() {
                    return Err(Error::InvalidConfig("--param does not apply to a manifest".into()));
                }
                Ok(Source::Files(Arc::new(load_pencil_sequence(path)?)))
            }
            (Some(name), None) => self.model_source(name),
        }
    }

    fn model_source(&self, name: &str) -> Result<Source> {
        let spec = match name {
            "companion" => {
                return match self.param.as_deref() {
                    None | Some("p") => Ok(Source::Companion(make_companion_fold(2.0)?.provider())),
                    Some(other) => Err(Error::UnknownParameter(other.to_string())),
                };
            }
            "two-machine" => two_machine(),
            "six-machine" => six_machine(),
            "synthetic" => synthetic(
                self.machines.unwrap_or(DEFAULT_SYNTHETIC_MACHINES),
                self.seed.unwrap_or(DEFAULT_SEED),
            ),
            path => {
                let path = Path::new(path);
                if !path.is_file() {
                    return Err(Error::Io(format!(
                        "model '{}' is neither a built-in name nor an existing spec file",
                        path.display()
                    )));
                }
                let text = std::fs::read_to_string(path)?;
                MultiMachineSpec::from_json(&text)?
            }
        };
        let model = make_multimachine(spec)?;
        let param = self.param.as_deref().unwrap_or("mu");
        Ok(Source::Machines(sweep_parameter(&model, param)?))
    }

    /// Tracker settings for the sweep, with flag values applied on top of
    /// the base `tracker` block.
    pub fn tracker_config(&self, source: &Source) -> Result<TrackerConfig> {
        let (p0, p1, dp0) = source.defaults();
        let mut cfg = self.tracker.clone().unwrap_or_default();
        cfg.p_init = self.from.unwrap_or(p0);
        cfg.p_fin = self.to.unwrap_or(p1);
        let dir = if cfg.p_fin < cfg.p_init { -1.0 } else { 1.0 };
        cfg.dp_init = match (self.dp, dp0) {
            (Some(dp), _) => dp.abs() * dir,
            (None, Some(dp)) => dp.abs() * dir,
            (None, None) if self.tracker.is_some() => cfg.dp_init.abs() * dir,
            (None, None) => (cfg.p_fin - cfg.p_init).abs().max(1e-3) / 100.0 * dir,
        };
        if let Some(i) = self.integrator {
            cfg.integrator = i;
        }
        match self.corrector {
            Some(true) if !cfg.corrector.is_on() => cfg.corrector = Corrector::newton(),
            Some(false) => cfg.corrector = Corrector::Off,
            _ => {}
        }
        if let Some(a) = self.adaptive {
            cfg.step.adaptive = a;
        }
        if let Some(e) = self.eps {
            cfg.epsilon_imag = if e > 0.0 { Some(e) } else { None };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn target(&self) -> Result<TargetSelector> {
        match (&self.target_index, &self.target_box, &self.target_mac) {
            (Some(idx), None, None) => {
                if idx.is_empty() {
                    return Err(Error::InvalidConfig("empty target index list".into()));
                }
                Ok(TargetSelector::Indices(idx.clone()))
            }
            (None, Some(b), None) => {
                if !(b.iter().all(|v| v.is_finite()) && b[0] <= b[1] && b[2] <= b[3]) {
                    return Err(Error::InvalidConfig(format!("bad target box {b:?}")));
                }
                Ok(TargetSelector::Box(*b))
            }
            (None, None, Some(path)) => Ok(TargetSelector::Mac(path.clone())),
            (None, None, None) => Err(Error::InvalidConfig(
                "no target: pass --target-index, --target-box or --target-mac".into(),
            )),
            _ => Err(Error::InvalidConfig("give exactly one target selector".into())),
        }
    }
}

/// How the eigenvalues to follow are picked from the initial spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSelector {
    Indices(Vec<usize>),
    Box([f64; 4]),
    Mac(PathBuf),
}

/// A resolved model source. Providers handed out by [`Source::provider`]
/// are independent clones, one per tracker.
#[derive(Clone)]
pub enum Source {
    Companion(ModelProvider<CompanionFoldModel>),
    Machines(ModelProvider<MultiMachineModel>),
    Files(Arc<PencilSequence>),
}

impl Source {
    pub fn provider(&self) -> Box<dyn PencilProvider> {
        match self {
            Source::Companion(p) => Box::new(p.clone()),
            Source::Machines(p) => Box::new(p.clone()),
            Source::Files(s) => Box::new(Arc::clone(s)),
        }
    }

    /// Default sweep start, end and, for file sequences, the grid spacing.
    pub fn defaults(&self) -> (f64, f64, Option<f64>) {
        match self {
            Source::Companion(p) => {
                let d = p.model().parameter();
                (d.p_init, d.p_fin, None)
            }
            Source::Machines(p) => {
                let d = p.model().parameter();
                (d.p_init, d.p_fin, None)
            }
            Source::Files(s) => {
                let ps = s.parameters();
                let dp = if ps.len() > 1 { Some(ps[1] - ps[0]) } else { None };
                (ps[0], ps[ps.len() - 1], dp)
            }
        }
    }

    pub fn grid(&self) -> Option<Vec<f64>> {
        match self {
            Source::Files(s) => s.grid(),
            _ => None,
        }
    }
}

/// Parameter values `from, from + dp, ...` up to and including `to`, or the
/// provider's own grid points between the two.
pub fn sweep_grid(source: &Source, from: f64, to: f64, dp: f64) -> Result<Vec<f64>> {
    if let Some(grid) = source.grid() {
        let (lo, hi) = (from.min(to), from.max(to));
        let tol = 1e-12 * from.abs().max(to.abs()).max(1.0);
        let mut pts: Vec<f64> = grid.into_iter().filter(|&p| p >= lo - tol && p <= hi + tol).collect();
        if to < from {
            pts.reverse();
        }
        if pts.first().is_none_or(|&p| (p - from).abs() > tol) {
            return Err(Error::ParameterNotAvailable(from));
        }
        return Ok(pts);
    }
    if from == to {
        return Ok(vec![from]);
    }
    if !(dp != 0.0 && dp.is_finite()) || (to - from).signum() != dp.signum() {
        return Err(Error::InvalidConfig(format!("step {dp} does not lead from {from} to {to}")));
    }
    let n = ((to - from) / dp).abs();
    let tol = 1e-9;
    let whole = (n + tol).floor() as usize;
    let mut pts: Vec<f64> = (0..=whole).map(|k| from + dp * k as f64).collect();
    if (n - whole as f64).abs() <= tol {
        *pts.last_mut().unwrap() = to;
    } else {
        pts.push(to);
    }
    Ok(pts)
}
