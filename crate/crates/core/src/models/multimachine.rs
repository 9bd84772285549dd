use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dae::{newton_solve, DaeModel, Equilibrium, ModelBlocks, ModelProvider, NewtonOptions, ParamDescriptor};
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::spectrum::EigenPair;

/// Largest pairwise phase difference, in degrees, for the speed components of
/// the frequency regulation mode.
pub const FR_ALIGNMENT_DEG: f64 = 10.0;

/// Largest pairwise phase difference in degrees among the entries of
/// `values`, ignoring entries smaller than `1e-6` times the largest one.
pub fn phase_spread(values: &[Complex64]) -> f64 {
    let top = values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if top == 0.0 {
        return 0.0;
    }
    let kept: Vec<&Complex64> = values.iter().filter(|z| z.norm() > 1e-6 * top).collect();
    let mut spread = 0.0f64;
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            spread = spread.max((*a / *b).arg().abs().to_degrees());
        }
    }
    spread
}

/// Primary frequency control of one machine: droop `R`, turbine filter `T_f`
/// and output limit `P_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorSpec {
    pub droop: f64,
    pub t_f: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub bus: usize,
    /// `M = 2H` in seconds.
    pub inertia: f64,
    #[serde(default)]
    pub damping: f64,
    pub xd_prime: f64,
    /// Active power dispatch at zero loading factor.
    pub p_gen: f64,
    #[serde(default = "unit")]
    pub v_set: f64,
    #[serde(default)]
    pub governor: Option<GovernorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

/// Network, machines and loads of a multi-machine system.
///
/// The network is lossless. Loads are a mix of constant power and constant
/// impedance, `P = (1 + mu) P0 ((1 - z) + z V^2)`, and every non-slack
/// dispatch also scales with `1 + mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiMachineSpec {
    pub n_buses: usize,
    pub machines: Vec<MachineSpec>,
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub mu: f64,
    /// Index of the machine whose bus is the angle and power reference.
    #[serde(default)]
    pub slack: usize,
    #[serde(default = "default_omega_b")]
    pub omega_b: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_omega_b() -> f64 {
    2.0 * std::f64::consts::PI * 60.0
}

impl MultiMachineSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_buses == 0 || self.machines.is_empty() {
            return bad("a multi-machine system needs at least one bus and one machine".into());
        }
        if self.slack >= self.machines.len() {
            return bad(format!("slack machine {} does not exist", self.slack));
        }
        if !(0.0..=1.0).contains(&self.z) {
            return bad(format!("load mix z = {} is outside [0, 1]", self.z));
        }
        if !(self.mu >= 0.0) {
            return bad(format!("loading factor mu = {} is negative", self.mu));
        }
        if !(self.omega_b > 0.0) {
            return bad("base frequency must be positive".into());
        }
        let mut occupied = vec![false; self.n_buses];
        for (i, m) in self.machines.iter().enumerate() {
            if m.bus >= self.n_buses {
                return bad(format!("machine {i} sits on missing bus {}", m.bus));
            }
            if occupied[m.bus] {
                return bad(format!("bus {} carries more than one machine", m.bus));
            }
            occupied[m.bus] = true;
            if !(m.inertia > 0.0 && m.xd_prime > 0.0 && m.damping >= 0.0 && m.v_set > 0.0) {
                return bad(format!("machine {i} has non-physical data"));
            }
            if let Some(g) = &m.governor {
                if !(g.droop > 0.0 && g.t_f > 0.0 && g.p_max > 0.0) {
                    return bad(format!("governor of machine {i} has non-physical data"));
                }
            }
        }
        for (k, l) in self.lines.iter().enumerate() {
            if l.from >= self.n_buses || l.to >= self.n_buses || l.from == l.to || !(l.x > 0.0) {
                return bad(format!("line {k} is invalid"));
            }
        }
        for l in &self.loads {
            if l.bus >= self.n_buses {
                return bad(format!("load on missing bus {}", l.bus));
            }
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let mut adj = vec![Vec::new(); self.n_buses];
        for l in &self.lines {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
        let mut seen = vec![false; self.n_buses];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(b) = queue.pop_front() {
            for &k in &adj[b] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(b) => Err(Error::DisconnectedNetwork(b)),
            None => Ok(()),
        }
    }
}

/// Swept quantity of a [`MultiMachineModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    /// Droop of every governor, or of one machine.
    Droop(Option<usize>),
    /// Inertia `M` of every machine, or of one machine.
    Inertia(Option<usize>),
    /// Governor filter time constant of every governor, or of one machine.
    FilterTime(Option<usize>),
    LoadMix,
    Loading,
}

impl SweepTarget {
    pub fn parse(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownParameter(name.to_string());
        let (head, index) = match name.split_once(':') {
            Some((h, k)) => (h, Some(k.trim().parse::<usize>().map_err(|_| unknown())?)),
            None => (name, None),
        };
        match (head.trim(), index) {
            ("droop", k) => Ok(Self::Droop(k)),
            ("inertia", k) => Ok(Self::Inertia(k)),
            ("tf", k) => Ok(Self::FilterTime(k)),
            ("z", None) => Ok(Self::LoadMix),
            ("mu", None) => Ok(Self::Loading),
            _ => Err(unknown()),
        }
    }

    pub fn name(&self) -> String {
        let with = |h: &str, k: Option<usize>| match k {
            Some(k) => format!("{h}:{k}"),
            None => h.to_string(),
        };
        match *self {
            Self::Droop(k) => with("droop", k),
            Self::Inertia(k) => with("inertia", k),
            Self::FilterTime(k) => with("tf", k),
            Self::LoadMix => "z".into(),
            Self::Loading => "mu".into(),
        }
    }
}

/// Machine data after the swept parameter has been applied.
struct Effective {
    inertia: Vec<f64>,
    droop: Vec<f64>,
    t_f: Vec<f64>,
    z: f64,
    mu: f64,
}

/// Multi-machine power system in semi-implicit form.
///
/// Each machine contributes a rotor angle and speed and, when it has a
/// governor, a mechanical power state. Every bus contributes its voltage angle
/// and magnitude as algebraic variables, tied together by active and reactive
/// power balance. The operating point comes from a power flow with PV buses at
/// the machines; internal voltages and governor references are frozen there.
///
/// A governor whose scheduled output reaches `P_max` is switched to a limited
/// mode in which its state relaxes to `P_max` and no longer responds to speed.
#[derive(Debug, Clone)]
pub struct MultiMachineModel {
    spec: MultiMachineSpec,
    target: SweepTarget,
    p_init: f64,
    p_fin: f64,
    state_offset: Vec<usize>,
    n_states: usize,
    /// `(neighbour, susceptance)` per bus, parallel lines merged.
    adjacency: Vec<Vec<(usize, f64)>>,
    load_p: Vec<f64>,
    load_q: Vec<f64>,
}

pub fn make_multimachine(spec: MultiMachineSpec) -> Result<MultiMachineModel> {
    spec.validate()?;
    let mut state_offset = Vec::with_capacity(spec.machines.len());
    let mut n_states = 0;
    for m in &spec.machines {
        state_offset.push(n_states);
        n_states += if m.governor.is_some() { 3 } else { 2 };
    }
    let nb = spec.n_buses;
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for l in &spec.lines {
        for (a, b) in [(l.from, l.to), (l.to, l.from)] {
            match adjacency[a].iter_mut().find(|(k, _)| *k == b) {
                Some(entry) => entry.1 += 1.0 / l.x,
                None => adjacency[a].push((b, 1.0 / l.x)),
            }
        }
    }
    let mut load_p = vec![0.0; nb];
    let mut load_q = vec![0.0; nb];
    for l in &spec.loads {
        load_p[l.bus] += l.p;
        load_q[l.bus] += l.q;
    }
    let mu = spec.mu;
    Ok(MultiMachineModel {
        spec,
        target: SweepTarget::Loading,
        p_init: mu,
        p_fin: mu,
        state_offset,
        n_states,
        adjacency,
        load_p,
        load_q,
    })
}

/// Provider sweeping the named parameter of `model`, e.g. `droop`, `droop:2`,
/// `inertia`, `tf`, `z` or `mu`.
pub fn sweep_parameter(model: &MultiMachineModel, name: &str) -> Result<ModelProvider<MultiMachineModel>> {
    let mut m = model.clone();
    m.set_target(SweepTarget::parse(name)?)?;
    Ok(ModelProvider::new(m))
}

impl MultiMachineModel {
    pub fn spec(&self) -> &MultiMachineSpec {
        &self.spec
    }

    pub fn target(&self) -> SweepTarget {
        self.target
    }

    pub fn n_machines(&self) -> usize {
        self.spec.machines.len()
    }

    /// Index of the speed state of machine `i`.
    pub fn speed_index(&self, i: usize) -> usize {
        self.state_offset[i] + 1
    }

    pub fn angle_index(&self, i: usize) -> usize {
        self.state_offset[i]
    }

    /// Index of the mechanical power state of machine `i`, if it has a governor.
    pub fn governor_index(&self, i: usize) -> Option<usize> {
        self.spec.machines[i].governor.as_ref().map(|_| self.state_offset[i] + 2)
    }

    pub fn speed_indices(&self) -> Vec<usize> {
        (0..self.n_machines()).map(|i| self.speed_index(i)).collect()
    }

    /// Speed components of a right eigenvector given in state or pencil
    /// coordinates.
    pub fn speed_shape(&self, pair: &EigenPair) -> Vec<Complex64> {
        self.speed_indices().into_iter().map(|k| pair.right.get(k)).collect()
    }

    /// Oscillatory modes (upper half plane) whose speed components all move
    /// in phase within [`FR_ALIGNMENT_DEG`], ordered by increasing `|s|`.
    pub fn coherent_modes(&self, pairs: &[EigenPair]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pairs.len())
            .filter(|&k| pairs[k].s.im > 1e-9 * pairs[k].s.norm().max(1.0))
            .filter(|&k| phase_spread(&self.speed_shape(&pairs[k])) < FR_ALIGNMENT_DEG)
            .collect();
        idx.sort_by(|&a, &b| pairs[a].s.norm().total_cmp(&pairs[b].s.norm()));
        idx
    }

    /// The frequency regulation mode: the slowest coherent oscillatory mode.
    pub fn frequency_regulation_mode(&self, pairs: &[EigenPair]) -> Option<usize> {
        self.coherent_modes(pairs).first().copied()
    }

    /// Index of the voltage magnitude of bus `b` among the algebraic variables.
    pub fn voltage_index(&self, b: usize) -> usize {
        self.spec.n_buses + b
    }

    /// Sets the swept parameter; the sweep range defaults to its current value.
    pub fn set_target(&mut self, target: SweepTarget) -> Result<()> {
        let nm = self.n_machines();
        let check = |k: Option<usize>| match k {
            Some(k) if k >= nm => Err(Error::UnknownParameter(format!("{} (no machine {k})", target.name()))),
            _ => Ok(()),
        };
        let first_governor = |k: Option<usize>| -> Result<f64> {
            let idx = match k {
                Some(k) => k,
                None => self
                    .spec
                    .machines
                    .iter()
                    .position(|m| m.governor.is_some())
                    .ok_or_else(|| Error::UnknownParameter(format!("{}: no governors", target.name())))?,
            };
            self.spec.machines[idx]
                .governor
                .as_ref()
                .ok_or_else(|| Error::UnknownParameter(format!("{}: machine {idx} has no governor", target.name())))
                .map(|g| match target {
                    SweepTarget::Droop(_) => g.droop,
                    _ => g.t_f,
                })
        };
        let current = match target {
            SweepTarget::Droop(k) | SweepTarget::FilterTime(k) => {
                check(k)?;
                first_governor(k)?
            }
            SweepTarget::Inertia(k) => {
                check(k)?;
                self.spec.machines[k.unwrap_or(0)].inertia
            }
            SweepTarget::LoadMix => self.spec.z,
            SweepTarget::Loading => self.spec.mu,
        };
        self.target = target;
        self.p_init = current;
        self.p_fin = current;
        Ok(())
    }

    /// Value of the swept parameter in the spec.
    pub fn parameter_value(&self) -> f64 {
        self.p_init
    }

    pub fn with_range(mut self, p_init: f64, p_fin: f64) -> Self {
        self.p_init = p_init;
        self.p_fin = p_fin;
        self
    }

    fn effective(&self, p: f64) -> Effective {
        let ms = &self.spec.machines;
        let mut e = Effective {
            inertia: ms.iter().map(|m| m.inertia).collect(),
            droop: ms.iter().map(|m| m.governor.as_ref().map_or(f64::INFINITY, |g| g.droop)).collect(),
            t_f: ms.iter().map(|m| m.governor.as_ref().map_or(1.0, |g| g.t_f)).collect(),
            z: self.spec.z,
            mu: self.spec.mu,
        };
        let set = |v: &mut Vec<f64>, k: Option<usize>| match k {
            Some(k) => v[k] = p,
            None => v.iter_mut().for_each(|x| *x = p),
        };
        match self.target {
            SweepTarget::Droop(k) => set(&mut e.droop, k),
            SweepTarget::Inertia(k) => set(&mut e.inertia, k),
            SweepTarget::FilterTime(k) => set(&mut e.t_f, k),
            SweepTarget::LoadMix => e.z = p,
            SweepTarget::Loading => e.mu = p,
        }
        e
    }

    fn check_effective(&self, e: &Effective) -> Result<()> {
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && !x.is_nan());
        if !positive(&e.inertia) || !positive(&e.droop) || !positive(&e.t_f) || !e.mu.is_finite() || !e.z.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "parameter {} leaves the physical range",
                self.target.name()
            )));
        }
        Ok(())
    }

    /// Scheduled active power of non-slack machine `i` and whether its
    /// governor is at the limit.
    fn dispatch(&self, i: usize, mu: f64) -> (f64, bool) {
        let m = &self.spec.machines[i];
        let scheduled = m.p_gen * (1.0 + mu);
        match &m.governor {
            Some(g) if i != self.spec.slack && scheduled >= g.p_max => (g.p_max, true),
            _ => (scheduled, false),
        }
    }

    /// Machines whose governor is limited at `p`.
    pub fn limited_machines(&self, p: f64) -> Vec<usize> {
        let mu = self.effective(p).mu;
        (0..self.n_machines()).filter(|&i| self.dispatch(i, mu).1).collect()
    }

    fn load(&self, b: usize, v: f64, e: &Effective) -> (f64, f64) {
        let shape = (1.0 - e.z) + e.z * v * v;
        let scale = (1.0 + e.mu) * shape;
        (scale * self.load_p[b], scale * self.load_q[b])
    }

    /// Network injections `(P_b, Q_b)` of a lossless network.
    fn injections(&self, theta: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nb = self.spec.n_buses;
        let mut p = vec![0.0; nb];
        let mut q = vec![0.0; nb];
        for b in 0..nb {
            for &(k, bk) in &self.adjacency[b] {
                let d = theta[b] - theta[k];
                p[b] += bk * v[b] * v[k] * d.sin();
                q[b] += bk * v[b] * (v[b] - v[k] * d.cos());
            }
        }
        (p, q)
    }

    /// Electrical power and reactive output of machine `i`.
    fn machine_output(&self, i: usize, delta: f64, theta: f64, v: f64, e_int: f64) -> (f64, f64) {
        let x = self.spec.machines[i].xd_prime;
        let d = delta - theta;
        (e_int * v * d.sin() / x, (e_int * v * d.cos() - v * v) / x)
    }

    fn split<'a>(&self, y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        y.split_at(self.spec.n_buses)
    }

    /// Power flow at `p`: returns bus angles and magnitudes and the complex
    /// power of every machine.
    fn power_flow(&self, e: &Effective, warm: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>, Vec<Complex64>)> {
        let nb = self.spec.n_buses;
        let slack_bus = self.spec.machines[self.spec.slack].bus;
        let mut p_sched = vec![0.0; nb];
        let mut v_fixed = vec![None; nb];
        for (i, m) in self.spec.machines.iter().enumerate() {
            p_sched[m.bus] = self.dispatch(i, e.mu).0;
            v_fixed[m.bus] = Some(m.v_set);
        }
        let angle_buses: Vec<usize> = (0..nb).filter(|&b| b != slack_bus).collect();
        let pq_buses: Vec<usize> = (0..nb).filter(|&b| v_fixed[b].is_none()).collect();

        let (mut theta0, mut v0) = match warm {
            Some(y) if y.len() == 2 * nb => (y[..nb].to_vec(), y[nb..].to_vec()),
            _ => (vec![0.0; nb], vec![1.0; nb]),
        };
        theta0[slack_bus] = 0.0;
        for b in 0..nb {
            if let Some(vs) = v_fixed[b] {
                v0[b] = vs;
            }
        }
        let unpack = |u: &[f64]| {
            let mut th = theta0.clone();
            let mut v = v0.clone();
            for (k, &b) in angle_buses.iter().enumerate() {
                th[b] = u[k];
            }
            for (k, &b) in pq_buses.iter().enumerate() {
                v[b] = u[angle_buses.len() + k];
            }
            (th, v)
        };
        let residual = |u: &[f64]| {
            let (th, v) = unpack(u);
            let (pi, qi) = self.injections(&th, &v);
            let mut r = Vec::with_capacity(u.len());
            for &b in &angle_buses {
                r.push(p_sched[b] - self.load(b, v[b], e).0 - pi[b]);
            }
            for &b in &pq_buses {
                r.push(-self.load(b, v[b], e).1 - qi[b]);
            }
            r
        };
        let u0: Vec<f64> = angle_buses
            .iter()
            .map(|&b| theta0[b])
            .chain(pq_buses.iter().map(|&b| v0[b]))
            .collect();
        let opts = NewtonOptions {
            max_iter: 30,
            ..NewtonOptions::default()
        };
        let u = newton_solve(residual, &u0, &opts, "power flow")?;
        let (theta, v) = unpack(&u);
        if v.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::NoConvergence {
                what: "power flow",
                iterations: opts.max_iter,
            });
        }
        let (pi, qi) = self.injections(&theta, &v);
        let power = self
            .spec
            .machines
            .iter()
            .map(|m| {
                let b = m.bus;
                let (pl, ql) = self.load(b, v[b], e);
                Complex64::new(pi[b] + pl, qi[b] + ql)
            })
            .collect();
        Ok((theta, v, power))
    }
}

impl DaeModel for MultiMachineModel {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_algebraic(&self) -> usize {
        2 * self.spec.n_buses
    }

    /// Setpoints are the internal voltages followed by the governor references.
    fn f(&self, x: &[f64], y: &[f64], p: f64, setpoints: &[f64]) -> Vec<f64> {
        let e = self.effective(p);
        let nm = self.n_machines();
        let (theta, v) = self.split(y);
        let mut out = vec![0.0; self.n_states];
        for (i, m) in self.spec.machines.iter().enumerate() {
            let o = self.state_offset[i];
            let (delta, omega) = (x[o], x[o + 1]);
            let (pe, _) = self.machine_output(i, delta, theta[m.bus], v[m.bus], setpoints[i]);
            let p_ref = setpoints[nm + i];
            let pm = if m.governor.is_some() { x[o + 2] } else { p_ref };
            out[o] = self.spec.omega_b * (omega - 1.0);
            out[o + 1] = pm - pe - m.damping * (omega - 1.0);
            if let Some(g) = &m.governor {
                out[o + 2] = if self.dispatch(i, e.mu).1 {
                    g.p_max - pm
                } else {
                    p_ref - (omega - 1.0) / e.droop[i] - pm
                };
            }
        }
        out
    }

    fn g(&self, x: &[f64], y: &[f64], p: f64, setpoints: &[f64]) -> Vec<f64> {
        let e = self.effective(p);
        let nb = self.spec.n_buses;
        let (theta, v) = self.split(y);
        let (pi, qi) = self.injections(theta, v);
        let mut out = vec![0.0; 2 * nb];
        for b in 0..nb {
            let (pl, ql) = self.load(b, v[b], &e);
            out[b] = -pl - pi[b];
            out[nb + b] = -ql - qi[b];
        }
        for (i, m) in self.spec.machines.iter().enumerate() {
            let delta = x[self.state_offset[i]];
            let (pe, qg) = self.machine_output(i, delta, theta[m.bus], v[m.bus], setpoints[i]);
            out[m.bus] += pe;
            out[nb + m.bus] += qg;
        }
        out
    }

    fn t_matrix(&self, p: f64) -> SparseMatrix {
        let e = self.effective(p);
        let mut t = TripletBuilder::with_capacity(self.n_states, self.n_states, self.n_states);
        for (i, m) in self.spec.machines.iter().enumerate() {
            let o = self.state_offset[i];
            t.push(o, o, 1.0);
            t.push(o + 1, o + 1, e.inertia[i]);
            if m.governor.is_some() {
                t.push(o + 2, o + 2, e.t_f[i]);
            }
        }
        t.build()
    }

    fn parameter(&self) -> ParamDescriptor {
        ParamDescriptor {
            name: self.target.name(),
            p_init: self.p_init,
            p_fin: self.p_fin,
        }
    }

    fn equilibrium(&self, p: f64, warm: Option<&Equilibrium>) -> Result<Equilibrium> {
        let e = self.effective(p);
        self.check_effective(&e)?;
        let (theta, v, power) = self.power_flow(&e, warm.map(|w| w.y.as_slice()))?;
        let nm = self.n_machines();
        let mut x = vec![0.0; self.n_states];
        let mut setpoints = vec![0.0; 2 * nm];
        for (i, m) in self.spec.machines.iter().enumerate() {
            let b = m.bus;
            let vb = Complex64::from_polar(v[b], theta[b]);
            let current = (power[i] / vb).conj();
            let internal = vb + Complex64::new(0.0, m.xd_prime) * current;
            let o = self.state_offset[i];
            x[o] = internal.arg();
            x[o + 1] = 1.0;
            if m.governor.is_some() {
                x[o + 2] = power[i].re;
            }
            setpoints[i] = internal.norm();
            setpoints[nm + i] = power[i].re;
        }
        let mut y = theta;
        y.extend(v);
        Ok(Equilibrium { x, y, p, setpoints })
    }

    fn analytic_jacobians(&self, eq: &Equilibrium) -> Option<Result<ModelBlocks>> {
        Some(self.jacobians(eq))
    }
}

impl MultiMachineModel {
    fn jacobians(&self, eq: &Equilibrium) -> Result<ModelBlocks> {
        let e = self.effective(eq.p);
        self.check_effective(&e)?;
        let n = self.n_states;
        let nb = self.spec.n_buses;
        let m_alg = 2 * nb;
        let (theta, v) = self.split(&eq.y);
        let mut fx = TripletBuilder::new(n, n);
        let mut fy = TripletBuilder::new(n, m_alg);
        let mut gx = TripletBuilder::new(m_alg, n);
        let mut gy = TripletBuilder::new(m_alg, m_alg);

        for (i, m) in self.spec.machines.iter().enumerate() {
            let o = self.state_offset[i];
            let b = m.bus;
            let e_int = eq.setpoints[i];
            let d = eq.x[o] - theta[b];
            let (sn, cs) = d.sin_cos();
            let x = m.xd_prime;
            let vb = v[b];
            let dpe_dd = e_int * vb * cs / x;
            let dpe_dv = e_int * sn / x;
            let dq_dd = -e_int * vb * sn / x;
            let dq_dv = (e_int * cs - 2.0 * vb) / x;

            fx.push(o, o + 1, self.spec.omega_b);
            fx.push(o + 1, o, -dpe_dd);
            fx.push(o + 1, o + 1, -m.damping);
            fy.push(o + 1, b, dpe_dd);
            fy.push(o + 1, nb + b, -dpe_dv);
            if m.governor.is_some() {
                fx.push(o + 1, o + 2, 1.0);
                fx.push(o + 2, o + 2, -1.0);
                if !self.dispatch(i, e.mu).1 {
                    fx.push(o + 2, o + 1, -1.0 / e.droop[i]);
                }
            }

            gx.push(b, o, dpe_dd);
            gx.push(nb + b, o, dq_dd);
            gy.push(b, b, -dpe_dd);
            gy.push(b, nb + b, dpe_dv);
            gy.push(nb + b, b, -dq_dd);
            gy.push(nb + b, nb + b, dq_dv);
        }

        let shape_slope = (1.0 + e.mu) * 2.0 * e.z;
        for b in 0..nb {
            if self.load_p[b] != 0.0 || self.load_q[b] != 0.0 {
                gy.push(b, nb + b, -shape_slope * self.load_p[b] * v[b]);
                gy.push(nb + b, nb + b, -shape_slope * self.load_q[b] * v[b]);
            }
            for &(k, bk) in &self.adjacency[b] {
                let (sn, cs) = (theta[b] - theta[k]).sin_cos();
                let (vb, vk) = (v[b], v[k]);
                // Active injection term bk vb vk sin(theta_b - theta_k).
                gy.push(b, b, -bk * vb * vk * cs);
                gy.push(b, k, bk * vb * vk * cs);
                gy.push(b, nb + b, -bk * vk * sn);
                gy.push(b, nb + k, -bk * vb * sn);
                // Reactive injection term bk vb (vb - vk cos(theta_b - theta_k)).
                gy.push(nb + b, b, -bk * vb * vk * sn);
                gy.push(nb + b, k, bk * vb * vk * sn);
                gy.push(nb + b, nb + b, -bk * (2.0 * vb - vk * cs));
                gy.push(nb + b, nb + k, bk * vb * cs);
            }
        }

        Ok(ModelBlocks {
            t: self.t_matrix(eq.p),
            r: SparseMatrix::zeros(m_alg, n),
            fx: fx.build(),
            fy: fy.build(),
            gx: gx.build(),
            gy: gy.build(),
        })
    }
}
