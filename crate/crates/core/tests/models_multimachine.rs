use eigtrack::dae::{equilibrium_residual, fd_jacobians, linearize, FdOptions, PencilProvider};
use eigtrack::models::*;
use eigtrack::spectrum::{full_spectrum, participation_factors, reference_trajectory, EigenPair};
use eigtrack::Error;
use num_complex::Complex64;

fn fr_mode(model: &MultiMachineModel, pairs: &[EigenPair]) -> usize {
    model.frequency_regulation_mode(pairs).expect("no coherent mode")
}

#[test]
fn two_machines_without_governors() {
    let model = make_multimachine(two_machine()).unwrap();
    let prov = sweep_parameter(&model, "mu").unwrap();
    let pairs = full_spectrum(&prov, 0.0, false, false).unwrap();
    assert_eq!(pairs.len(), 4);
    let zeros = pairs.iter().filter(|e| e.s.norm() < 1e-8).count();
    let oscillatory = pairs.iter().filter(|e| e.s.im > 1e-6).count();
    assert_eq!(zeros, 1);
    assert_eq!(oscillatory, 1);
    let swing = pairs.iter().find(|e| e.s.im > 1e-6).unwrap();
    // Speeds swing against each other in the inter-machine mode.
    let shape = prov.model().speed_shape(swing);
    assert!(((shape[0] / shape[1]).arg().abs().to_degrees() - 180.0).abs() < 1.0);
}

#[test]
fn equilibrium_is_exact_and_jacobians_match_differences() {
    let model = make_multimachine(six_machine()).unwrap();
    for name in ["droop", "mu", "z"] {
        let prov = sweep_parameter(&model, name).unwrap();
        let p = prov.model().parameter_value();
        let eq = prov.equilibrium(p).unwrap();
        assert!(equilibrium_residual(prov.model(), &eq) < 1e-10);
        let exact = linearize(prov.model(), &eq, &FdOptions::default()).unwrap();
        let fd = fd_jacobians(prov.model(), &eq, &FdOptions { central: true, h_x: 1e-6, ..FdOptions::default() });
        for (a, b) in [(&exact.fx, &fd.fx), (&exact.fy, &fd.fy), (&exact.gx, &fd.gx), (&exact.gy, &fd.gy)] {
            let diff = a.add_scaled(1.0, b, -1.0).unwrap().norm_inf();
            assert!(diff <= 1e-6 * a.norm_inf().max(1.0), "{name}: {diff}");
        }
    }
}

#[test]
fn pencil_is_semi_implicit_with_full_rank_e() {
    let model = make_multimachine(six_machine()).unwrap();
    let prov = sweep_parameter(&model, "droop").unwrap();
    let pen = prov.pencil(0.05).unwrap();
    assert_eq!(pen.n_states, 18);
    assert_eq!(pen.dim(), 50);
    assert_eq!(pen.structural_rank_e(), pen.n_states);
    assert!((pen.n_states..pen.dim()).all(|j| pen.e.column_is_structurally_zero(j)));
}

#[test]
fn governors_create_one_coherent_mode() {
    let model = make_multimachine(six_machine()).unwrap();
    let prov = sweep_parameter(&model, "droop").unwrap();
    let pairs = full_spectrum(&prov, 0.05, true, false).unwrap();
    let coherent = model.coherent_modes(&pairs);
    assert_eq!(coherent.len(), 1, "{:?}", coherent.iter().map(|&k| pairs[k].s).collect::<Vec<_>>());

    // The slowest oscillatory mode is the coherent one and its speed
    // participations are phase aligned.
    let slowest = (0..pairs.len())
        .filter(|&k| pairs[k].s.im > 1e-6)
        .min_by(|&a, &b| pairs[a].s.norm().total_cmp(&pairs[b].s.norm()))
        .unwrap();
    assert_eq!(slowest, coherent[0]);
    let pf = participation_factors(&pairs).unwrap();
    let speeds: Vec<Complex64> = model.speed_indices().iter().map(|&k| pf.get(k, slowest)).collect();
    assert!(phase_spread(&speeds) < FR_ALIGNMENT_DEG, "{}", phase_spread(&speeds));
}

#[test]
fn detuned_droop_weakens_its_governor_in_the_coherent_mode() {
    let base = make_multimachine(six_machine()).unwrap();
    let mut spec = six_machine();
    spec.machines[2].governor.as_mut().unwrap().droop *= 10.0;
    let detuned = make_multimachine(spec).unwrap();
    let governor_share = |model: &MultiMachineModel| {
        let prov = sweep_parameter(model, "mu").unwrap();
        let pairs = full_spectrum(&prov, 0.0, true, false).unwrap();
        let k = fr_mode(model, &pairs);
        let pf = participation_factors(&pairs).unwrap();
        pf.get(model.governor_index(2).unwrap(), k).norm()
    };
    assert!(governor_share(&detuned) < 0.5 * governor_share(&base));
}

#[test]
fn lower_inertia_speeds_up_the_coherent_mode() {
    let mut last = 0.0;
    for scale in [1.0, 0.56, 0.32, 0.18, 0.1] {
        let mut spec = six_machine();
        for m in &mut spec.machines {
            m.inertia *= scale;
        }
        let model = make_multimachine(spec).unwrap();
        let prov = sweep_parameter(&model, "mu").unwrap();
        let pairs = full_spectrum(&prov, 0.0, false, false).unwrap();
        let s = pairs[fr_mode(&model, &pairs)].s.norm();
        assert!(s > last, "scale {scale}: |s| = {s} after {last}");
        last = s;
    }
}

#[test]
fn droop_only_touches_governor_rows() {
    let model = make_multimachine(six_machine()).unwrap();
    let prov = sweep_parameter(&model, "droop").unwrap();
    let (a, b) = (prov.pencil(0.05).unwrap(), prov.pencil(0.2).unwrap());
    assert_eq!(a.e, b.e);
    let governor_rows: Vec<usize> = (0..model.n_machines()).filter_map(|i| model.governor_index(i)).collect();
    let diff = a.a.add_scaled(1.0, &b.a, -1.0).unwrap();
    let changed: Vec<(usize, usize, f64)> = diff.iter().filter(|&(_, _, v)| v.abs() > 1e-12).collect();
    assert!(!changed.is_empty());
    for (i, j, _) in changed {
        assert!(governor_rows.contains(&i), "entry ({i}, {j}) changed");
    }
}

#[test]
fn loading_past_the_nose_fails() {
    let model = make_multimachine(six_machine()).unwrap();
    let prov = sweep_parameter(&model, "mu").unwrap();
    let mut failure = None;
    for k in 0..200 {
        let mu = 0.1 * k as f64;
        if let Err(e) = prov.pencil(mu) {
            failure = Some(e);
            break;
        }
    }
    assert!(matches!(failure, Some(Error::NoConvergence { .. })), "{failure:?}");
}

#[test]
fn load_mix_moves_bus_voltages() {
    let mut spec = six_machine();
    spec.mu = 0.05;
    let model = make_multimachine(spec).unwrap();
    let prov = sweep_parameter(&model, "z").unwrap();
    let v0 = prov.equilibrium(0.0).unwrap().y;
    let v1 = prov.equilibrium(1.0).unwrap().y;
    let moved = (0..model.spec().n_buses)
        .map(|b| model.voltage_index(b))
        .any(|k| (v0[k] - v1[k]).abs() > 1e-4);
    assert!(moved);
}

#[test]
fn governor_limit_makes_the_spectrum_jump() {
    let model = make_multimachine(six_machine()).unwrap();
    assert!(model.limited_machines(0.09).is_empty());
    assert_eq!(model.limited_machines(0.11), vec![3]);
    let prov = sweep_parameter(&model, "mu").unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| 0.05 + 0.0025 * k as f64).collect();
    let pairs = full_spectrum(&prov, grid[0], false, true).unwrap();
    let seed = fr_mode(&model, &pairs);
    let reference = reference_trajectory(&prov, &grid, seed).unwrap();
    let steps: Vec<f64> = reference
        .points
        .windows(2)
        .map(|w| (w[1].tracked_pair().s - w[0].tracked_pair().s).norm())
        .collect();
    let (k, biggest) = steps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let typical = steps.iter().copied().fold(0.0f64, |m, v| if v < *biggest { m.max(v) } else { m });
    assert!(*biggest > 0.32 && *biggest > 20.0 * typical, "{biggest} vs {typical}");
    assert!(reference.points[k].p < 0.1 + 1e-9 && reference.points[k + 1].p > 0.1 - 1e-9);
}

#[test]
fn disconnected_network_is_rejected() {
    let mut spec = two_machine();
    spec.lines.retain(|l| l.to != 2);
    assert_eq!(make_multimachine(spec).unwrap_err(), Error::DisconnectedNetwork(2));
}

#[test]
fn spec_round_trips_through_json() {
    let spec = six_machine();
    let back = MultiMachineSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(back, spec);
    assert!(matches!(MultiMachineSpec::from_json("{"), Err(Error::Parse(_))));
}

#[test]
fn unknown_parameters_are_rejected() {
    let model = make_multimachine(six_machine()).unwrap();
    for name in ["speed", "droop:9", "z:1", "droop:x"] {
        assert!(matches!(sweep_parameter(&model, name), Err(Error::UnknownParameter(_))), "{name}");
    }
    let two = make_multimachine(two_machine()).unwrap();
    assert!(matches!(sweep_parameter(&two, "droop"), Err(Error::UnknownParameter(_))));
}

#[test]
fn synthetic_model_is_large_and_reproducible() {
    let a = synthetic(80, 7);
    assert_eq!(a, synthetic(80, 7));
    assert_ne!(a, synthetic(80, 8));
    let model = make_multimachine(a).unwrap();
    let prov = sweep_parameter(&model, "droop").unwrap();
    let pen = prov.pencil(0.05).unwrap();
    assert!(pen.dim() >= 400);
    assert_eq!(pen.structural_rank_e(), pen.n_states);
}
