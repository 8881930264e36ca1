//! Properties of full adaptive runs.

use nvhf_core::bayes::knowledge_from_measurement;
use nvhf_core::circuit::{CircuitSimulator, CircuitSpec, ErrorModel};
use nvhf_core::evolution::DissipationParams;
use nvhf_core::protocol::{run_ensemble, run_estimation, RunConfig};
use nvhf_core::spin_system::{eta, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ideal_schedule_grows_geometrically() {
    let cfg = RunConfig::nv_default(ErrorModel::Ideal).unwrap();
    let growth = cfg.scheduler.c / cfg.scheduler.zeta;
    let trace = run_estimation(&cfg).unwrap();
    for w in trace.steps.windows(2) {
        let r = w[1].tau / w[0].tau;
        assert!(r >= 0.5 * growth && r <= 1.5 * growth, "τ ratio {r}");
    }
}

#[test]
fn reference_ordering_on_generated_schedules() {
    for model in [ErrorModel::Ideal, ErrorModel::RotationError { epsilon: 0.1 }] {
        let mut cfg = RunConfig::nv_default(model).unwrap();
        cfg.prior = nvhf_core::bayes::GaussianKnowledge::uninformative(3.03);
        cfg.scheduler = cfg.scheduler.with_first_tau(Some(1.0));
        let trace = run_estimation(&cfg).unwrap();
        for s in &trace.steps {
            // with Q ≡ 1 and a non-decreasing schedule, Δ_QML ≤ Δ_K ≤ Δ_SQL
            let slack = 1.0 + 1e-12;
            assert!(s.delta_qml <= s.delta_sql * slack);
            if matches!(model, ErrorModel::Ideal) {
                assert!(s.delta_qml <= s.delta_k * slack && s.delta_k <= s.delta_sql * slack, "{s:?}");
            }
        }
    }
}

#[test]
fn decoherence_schedule_repeats_after_cap() {
    let diss = DissipationParams::nv_room_temperature();
    let mut cfg = RunConfig::nv_default(ErrorModel::Decoherence(diss)).unwrap();
    cfg.k_max = 8;
    let trace = run_estimation(&cfg).unwrap();
    let taus = trace.taus();
    for t in &taus[3..] {
        assert!((t - taus[3]).abs() < 1e-3 * taus[3], "{taus:?}");
        assert!(*t <= 175.0);
    }
    assert!(taus[2] < 175.0 - 1.0);
}

#[test]
fn end_to_end_single_step_coverage() {
    // circuit + conversion from the reference prior: |mean − A| < 4·std in ≥ 95% of trials
    let params = SystemParams::nv15n().with_a(3.06);
    let eta2 = eta(&params).unwrap().powi(2);
    let tau = 3.25 / 3.03;
    let spec = CircuitSpec::nv_default(tau - 1.0);
    let sim = CircuitSimulator::new(&params, &spec, &ErrorModel::Ideal).unwrap();
    let mut hits = 0;
    for seed in 0..200u64 {
        let mut outcomes = ChaCha8Rng::seed_from_u64(seed);
        let mut eps = ChaCha8Rng::seed_from_u64(seed);
        let record = sim.measure(&spec, &mut outcomes, &mut eps).unwrap();
        let k = knowledge_from_measurement(&record, 3.03, tau, 1.0, eta2).unwrap();
        if (k.mean - 3.06).abs() < 4.0 * k.std {
            hits += 1;
        }
    }
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn ensemble_is_reproducible_and_ordered() {
    let cfg = RunConfig::nv_default(ErrorModel::Ideal).unwrap().with_seed(77);
    let a = run_ensemble(&cfg, 8).unwrap();
    let b = run_ensemble(&cfg, 8).unwrap();
    assert_eq!(a, b);
    for (i, t) in a.traces.iter().enumerate() {
        assert_eq!(t.seed, 77 + i as u64);
        assert_eq!(t, &run_estimation(&cfg.with_seed(77 + i as u64)).unwrap());
    }
}

#[test]
fn target_std_stops_early() {
    let mut cfg = RunConfig::nv_default(ErrorModel::Ideal).unwrap();
    cfg.target_std = 1e-4;
    let trace = run_estimation(&cfg).unwrap();
    assert!(trace.steps.len() < cfg.k_max);
    assert!(trace.last().delta_k <= 1e-4);
}
