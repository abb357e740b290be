use noisesync::integrate::run;
use noisesync::models::{centre_manifold_residual, phase_psi, reduce_to_landau_stuart, Unwrapper};
use noisesync::noise::{scale_for_rescaled_time, NoiseSpec};
use noisesync::{IntegratorConfig, LandauStuartParams, LaserParams, Model, NoisePath, Scheme, State, VectorField};
use num_complex::Complex64;
use proptest::prelude::*;

/// Largest deviation of the unwrapped isochronal phase from Ψ(0) + ωt.
fn psi_drift(model: &Model, s0: State, t1: f64, dt: f64) -> f64 {
    let alpha = match model {
        Model::Laser(p) => p.alpha,
        Model::LandauStuart(p) => p.alpha,
    };
    let omega = match model {
        Model::Laser(p) => p.delta,
        Model::LandauStuart(p) => p.delta_tilde,
    };
    let mut unwrap = Unwrapper::new();
    let ln0 = s0.amplitude().ln();
    let psi0 = unwrap.push(s0.arg()) + alpha * ln0;
    let mut worst: f64 = 0.0;
    let cfg = IntegratorConfig::new(dt, Scheme::Rk4);
    run(model, &s0, t1, &cfg, None, &mut |_, s| {
        let psi = unwrap.push(s.arg()) + alpha * s.amplitude().ln();
        worst = worst.max((psi - psi0 - omega * (s.t - s0.t)).abs());
    })
    .unwrap();
    worst
}

/// Largest |dΨ/dt − ω| from the drift along a trajectory, sampled every tenth step.
fn psi_rate_error(model: &Model, s0: State, t1: f64, dt: f64) -> f64 {
    let alpha = model.alpha();
    let omega = model.phase_velocity();
    let mut worst: f64 = 0.0;
    let cfg = IntegratorConfig::new(dt, Scheme::Rk4);
    run(model, &s0, t1, &cfg, None, &mut |k, s| {
        if k % 10 != 0 {
            return;
        }
        let d = model.drift(&s.coords());
        let e = s.field();
        let rate = Complex64::new(d[0], d[1]) / e;
        worst = worst.max((rate.im + alpha * rate.re - omega).abs());
    })
    .unwrap();
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laser_conserves_isochronal_phase(
        r in 0.2..2.0f64, th in -3.0..3.0f64, n in -0.3..0.3f64,
        alpha in 0.0..6.0f64, delta in -20.0..20.0f64, j in 0.2..5.0f64,
    ) {
        let m: Model = LaserParams::new(j, alpha).with_delta(delta).into();
        let s0 = State::new(r * th.cos(), r * th.sin(), n, 0.0);
        prop_assert!(psi_rate_error(&m, s0, 2.0, 1e-4) < 1e-6);
    }

    #[test]
    fn landau_stuart_conserves_isochronal_phase(
        r in 0.05..3.0f64, th in -3.0..3.0f64,
        alpha in 0.0..10.0f64, delta in -2.0..2.0f64, j in 0.1..3.0f64,
    ) {
        let m: Model = LandauStuartParams { j, delta_tilde: delta, alpha }.into();
        let s0 = State::new(r * th.cos(), r * th.sin(), 0.0, 0.0);
        prop_assert!(psi_rate_error(&m, s0, 20.0, 1e-3) < 1e-6);
    }

    #[test]
    fn psi_of_a_state_is_consistent_with_its_field(
        r in 1e-3..1e3f64, th in -3.1..3.1f64, alpha in -10.0..10.0f64,
    ) {
        let s = State::new(r * th.cos(), r * th.sin(), 0.0, 0.0);
        let psi = phase_psi(&s, alpha).unwrap();
        prop_assert!((psi - th - alpha * r.ln()).abs() < 1e-9 * (1.0 + psi.abs()));
    }
}

#[test]
fn integrated_phase_drift_is_fourth_order_in_the_step() {
    let cases: [(Model, State, f64, [f64; 2]); 2] = [
        (LaserParams::new(0.2, 4.69).into(), State::new(0.2, 0.0, -0.281, 0.0), 2.0, [1e-4, 5e-5]),
        (LandauStuartParams { j: 0.1, delta_tilde: 0.0, alpha: 9.68 }.into(), State::new(2.87, 0.0, 0.0, 0.0), 20.0, [1e-3, 5e-4]),
    ];
    for (m, s0, t1, [h, h2]) in cases {
        let coarse = psi_drift(&m, s0, t1, h);
        let fine = psi_drift(&m, s0, t1, h2);
        assert!(coarse / fine > 10.0, "{coarse} -> {fine}");
    }
}

#[test]
fn laser_relaxes_onto_centre_manifold_near_threshold() {
    let p = LaserParams::new(0.02, 3.0);
    let s0 = State::new(0.05, 0.1, 0.04, 0.0);
    let cfg = IntegratorConfig::new(1e-4, Scheme::Rk4);
    let trace = noisesync::integrate::run_simple(&p, &s0, 60.0, &cfg, None).unwrap();
    let res: Vec<f64> = trace
        .points
        .iter()
        .map(|q| centre_manifold_residual(&State::new(q.e_re, q.e_im, q.n, q.t), p.j))
        .collect();
    let early = res[0];
    let late = res[res.len() - 1];
    assert!(late < 1e-3 * early.max(1e-3), "{early} -> {late}");
}

#[test]
fn laser_near_threshold_tracks_the_reduced_model() {
    // Overdamped regime, so no relaxation oscillation survives the reduction.
    // Same forcing realisation seen through the time change t̃ = gγ t.
    let p = LaserParams::new(1e-5, 2.0);
    let ls = reduce_to_landau_stuart(&p);
    let gg = p.g_gamma();
    let dt = 1e-2;
    let noise = NoiseSpec::external(1e-9, 11, dt);
    let lpath = NoisePath::new(noise).unwrap();
    let lsnoise = NoiseSpec {
        dt_grid: dt * gg,
        ..scale_for_rescaled_time(&noise, gg).unwrap()
    };
    let lspath = NoisePath::new(lsnoise).unwrap();

    let r0 = 0.5 * p.j.sqrt();
    let s0 = State::new(r0, 0.0, p.j - r0 * r0, 0.0);
    let t1 = 200.0;
    let laser_end = noisesync::integrate::run_simple(&p, &s0, t1, &IntegratorConfig::new(dt, Scheme::StochasticHeun), Some(&lpath))
        .unwrap()
        .last_state()
        .unwrap();
    let ls_end = noisesync::integrate::run_simple(
        &ls,
        &State::new(r0, 0.0, 0.0, 0.0),
        t1 * gg,
        &IntegratorConfig::new(dt * gg, Scheme::StochasticHeun),
        Some(&lspath),
    )
    .unwrap()
    .last_state()
    .unwrap();
    assert!((laser_end.amplitude() / ls_end.amplitude() - 1.0).abs() < 0.01);
    let gap = (laser_end.field() - ls_end.field()).norm();
    assert!(gap < 0.02 * p.j.sqrt(), "laser {:?} vs reduced {:?}", laser_end.field(), ls_end.field());
}

