//! Built-in multi-machine systems.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::multimachine::{GovernorSpec, LineSpec, LoadSpec, MachineSpec, MultiMachineSpec};

fn machine(bus: usize, inertia: f64, p_gen: f64, governor: Option<GovernorSpec>) -> MachineSpec {
    MachineSpec {
        bus,
        inertia,
        damping: 1.0,
        xd_prime: 0.06,
        p_gen,
        v_set: 1.02,
        governor,
    }
}

fn line(from: usize, to: usize, x: f64) -> LineSpec {
    LineSpec { from, to, x }
}

/// Two machines joined through a load bus, without governors.
pub fn two_machine() -> MultiMachineSpec {
    MultiMachineSpec {
        n_buses: 3,
        machines: vec![machine(0, 10.0, 0.0, None), machine(2, 8.0, 1.5, None)],
        lines: vec![line(0, 1, 0.05), line(1, 2, 0.06)],
        loads: vec![LoadSpec { bus: 1, p: 2.5, q: 0.5 }],
        z: 0.0,
        mu: 0.0,
        slack: 0,
        omega_b: 2.0 * std::f64::consts::PI * 60.0,
    }
}

/// Six governed machines on a sixteen-bus meshed ring with ten load buses.
///
/// Machine 3 carries a stiff governor and runs close to its output limit,
/// which it reaches at a loading factor of 0.1.
pub fn six_machine() -> MultiMachineSpec {
    let gen_bus = [0, 2, 5, 8, 10, 13];
    let inertia = [12.0, 10.0, 8.0, 10.0, 9.0, 11.0];
    let p_gen = [0.0, 4.0, 3.5, 5.0, 3.0, 4.5];
    let t_f = [5.0, 4.0, 6.0, 5.5, 4.5, 6.5];
    let machines = (0..6)
        .map(|i| {
            let (droop, p_max) = if i == 3 { (0.004, 5.5) } else { (0.05, 8.0) };
            let gov = GovernorSpec {
                droop,
                t_f: t_f[i],
                p_max,
            };
            machine(gen_bus[i], inertia[i], p_gen[i], Some(gov))
        })
        .collect();
    let reactance = [0.04, 0.05, 0.06, 0.05, 0.07, 0.04, 0.05, 0.06, 0.05, 0.04, 0.06, 0.05, 0.07, 0.05, 0.04, 0.06];
    let mut lines: Vec<LineSpec> = (0..16).map(|b| line(b, (b + 1) % 16, reactance[b])).collect();
    lines.extend([line(3, 11, 0.08), line(6, 14, 0.09), line(1, 9, 0.1)]);
    let load_bus = [1, 3, 4, 6, 7, 9, 11, 12, 14, 15];
    let load_p = [2.4, 2.8, 2.0, 2.6, 2.2, 2.5, 2.7, 2.1, 2.6, 2.3];
    let loads = load_bus
        .iter()
        .zip(load_p)
        .map(|(&bus, p)| LoadSpec { bus, p, q: 0.25 * p })
        .collect();
    MultiMachineSpec {
        n_buses: 16,
        machines,
        lines,
        loads,
        z: 0.0,
        mu: 0.0,
        slack: 0,
        omega_b: 2.0 * std::f64::consts::PI * 60.0,
    }
}

/// Random meshed ring with `n_machines` governed machines and half as many
/// load buses, reproducible from `seed`.
pub fn synthetic(n_machines: usize, seed: u64) -> MultiMachineSpec {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_loads = (n_machines / 2).max(1);
    let n_buses = n_machines + n_loads;
    // Every third bus carries a load so that generation and demand interleave.
    let is_load = |b: usize| b % 3 == 2 && b / 3 < n_loads;
    let mut machines = Vec::with_capacity(n_machines);
    let mut load_buses = Vec::with_capacity(n_loads);
    for b in 0..n_buses {
        if is_load(b) || machines.len() == n_machines {
            load_buses.push(b);
            continue;
        }
        let p_gen = rng.gen_range(2.0..5.0);
        let gov = GovernorSpec {
            droop: 0.05,
            t_f: rng.gen_range(3.0..7.0),
            p_max: 2.0 * p_gen,
        };
        machines.push(machine(b, rng.gen_range(6.0..14.0), p_gen, Some(gov)));
    }
    machines[0].p_gen = 0.0;
    let total: f64 = machines.iter().map(|m| m.p_gen).sum::<f64>() * 1.1;
    let weights: Vec<f64> = load_buses.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let loads = load_buses
        .iter()
        .zip(&weights)
        .map(|(&bus, w)| {
            let p = total * w / wsum;
            LoadSpec { bus, p, q: 0.2 * p }
        })
        .collect();
    let mut lines: Vec<LineSpec> = (0..n_buses)
        .map(|b| line(b, (b + 1) % n_buses, rng.gen_range(0.01..0.03)))
        .collect();
    for _ in 0..n_buses / 3 {
        let a = rng.gen_range(0..n_buses);
        let b = rng.gen_range(0..n_buses);
        if a != b {
            lines.push(line(a, b, rng.gen_range(0.03..0.08)));
        }
    }
    MultiMachineSpec {
        n_buses,
        machines,
        lines,
        loads,
        z: 0.0,
        mu: 0.0,
        slack: 0,
        omega_b: 2.0 * std::f64::consts::PI * 60.0,
    }
}
