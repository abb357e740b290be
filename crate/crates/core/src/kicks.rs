//! Deterministic flow interleaved with angle-dependent radial kicks, fold
//! detection on kicked circles, and the two-trajectory phase-difference
//! experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrate::{advance, check_state, Scheme};
use crate::models::{reduce_to_landau_stuart, wrap_angle, LandauStuartParams, LaserParams, Model, State, Unwrapper, VectorField};

/// Smallest amplitude a kick may leave.
pub const AMPLITUDE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickMode {
    /// `|E| → |E|(1 + κ sin kθ)`.
    #[default]
    Multiplicative,
    /// `|E| → |E| + κ sin kθ`.
    Additive,
}

/// `amplitude · sin(k θ + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl FourierTerm {
    fn at(&self, theta: f64) -> f64 {
        self.amplitude * (self.k as f64 * theta + self.phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickSchedule {
    pub times: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_wavenumber")]
    pub angular_wavenumber: u32,
    #[serde(default)]
    pub mode: KickMode,
    /// Extra radial terms, combined with the main term in the same mode.
    #[serde(default)]
    pub radial_terms: Vec<FourierTerm>,
    /// Offsets added to arg E; empty keeps the phase untouched.
    #[serde(default)]
    pub angular_terms: Vec<FourierTerm>,
}

fn default_amplitude() -> f64 {
    0.8
}
fn default_wavenumber() -> u32 {
    4
}

impl KickSchedule {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            amplitude: default_amplitude(),
            angular_wavenumber: default_wavenumber(),
            mode: KickMode::Multiplicative,
            radial_terms: Vec::new(),
            angular_terms: Vec::new(),
        }
    }

    /// Kicks at t = 0, 0.25, 0.5, 0.75.
    pub fn quarter_periods() -> Self {
        Self::new(vec![0.0, 0.25, 0.5, 0.75])
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[1] > w[0])) || self.times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("times", "kick times must be finite and strictly increasing"));
        }
        let terms = self.radial_terms.iter().chain(&self.angular_terms);
        if !self.amplitude.is_finite() || terms.clone().any(|t| !t.amplitude.is_finite() || !t.phase.is_finite()) {
            return Err(invalid("amplitude", "must be finite"));
        }
        Ok(())
    }

    fn radial(&self, theta: f64) -> f64 {
        self.amplitude * (self.angular_wavenumber as f64 * theta).sin() + self.radial_terms.iter().map(|t| t.at(theta)).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KickOutcome {
    pub state: State,
    /// The amplitude hit the floor.
    pub clamped: bool,
}

/// Apply one kick. Without angular terms only |E| changes.
pub fn apply_kick(state: &State, schedule: &KickSchedule) -> Result<KickOutcome> {
    let r = state.amplitude();
    if r == 0.0 {
        return Err(Error::PhaseSingular);
    }
    let theta = state.e_im.atan2(state.e_re);
    let s = schedule.radial(theta);
    let mut r_new = match schedule.mode {
        KickMode::Multiplicative => r * (1.0 + s),
        KickMode::Additive => r + s,
    };
    let clamped = !(r_new > AMPLITUDE_FLOOR);
    if clamped {
        r_new = AMPLITUDE_FLOOR;
    }
    let mut out = *state;
    if schedule.angular_terms.is_empty() {
        let f = r_new / r;
        out.e_re = state.e_re * f;
        out.e_im = state.e_im * f;
    } else {
        let th = theta + schedule.angular_terms.iter().map(|t| t.at(theta)).sum::<f64>();
        out.e_re = r_new * th.cos();
        out.e_im = r_new * th.sin();
    }
    Ok(KickOutcome { state: out, clamped })
}

/// Change of Ψ produced by a pure radial kick: `α ln(r'/r)`.
pub fn kick_psi_jump(before: &State, after: &State, alpha: f64) -> f64 {
    alpha * (after.amplitude() / before.amplitude()).ln()
}

/// Deterministic RK4 flow from `x.t` to `t1` with the step adjusted to land
/// exactly on `t1`.
pub fn flow_to<F: VectorField + ?Sized>(model: &F, x: &mut State, t1: f64, dt: f64) -> Result<()> {
    let span = t1 - x.t;
    if span <= 0.0 {
        return Ok(());
    }
    let n = (span / dt).ceil().max(1.0) as u64;
    let h = span / n as f64;
    let t0 = x.t;
    let mut c = x.coords();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        c = advance(model, None, Scheme::Rk4, &c, t, h, &[0.0; 3]);
        check_state(&c, t + h)?;
    }
    *x = State::from_coords(&c, t1);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickSnapshot {
    pub t: f64,
    /// Points in the order of the initial set.
    pub points: Vec<State>,
    /// Indices of members that blew up; their entries repeat the last good state.
    pub failed: Vec<usize>,
    pub clamped: usize,
    pub folds: usize,
}

fn check_no_detuning(model: &Model) -> Result<()> {
    let d = match model {
        Model::Laser(p) => p.delta,
        Model::LandauStuart(p) => p.delta_tilde,
    };
    if d != 0.0 {
        return Err(invalid("delta", "kick experiments run in the frame with zero detuning"));
    }
    Ok(())
}

/// Equally spaced points on the limit cycle, in order of phase.
pub fn circle_set(j: f64, n: usize) -> Vec<State> {
    (0..n)
        .map(|i| State::on_cycle(j, std::f64::consts::TAU * i as f64 / n as f64))
        .collect()
}

/// Flow `initial` with kicks and record snapshots (taken after any kick at
/// the same instant). Points are integrated in parallel and collected in
/// their original order.
pub fn evolve_kicked_set(
    model: &Model,
    initial: &[State],
    schedule: &KickSchedule,
    snapshot_times: &[f64],
    dt: f64,
) -> Result<Vec<KickSnapshot>> {
    model.validate()?;
    check_no_detuning(model)?;
    schedule.validate()?;
    if snapshot_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("snapshot_times", "must be non-decreasing"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let t0 = initial.first().map(|s| s.t).unwrap_or(0.0);
    // Event list: (time, is_kick); kicks sort before snapshots at equal times.
    let mut events: Vec<(f64, bool)> = schedule.times.iter().filter(|&&t| t >= t0).map(|&t| (t, true)).collect();
    events.extend(snapshot_times.iter().map(|&t| (t, false)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));

    struct Track {
        snaps: Vec<State>,
        failed: bool,
        clamped: Vec<bool>,
    }
    let tracks: Vec<Track> = initial
        .par_iter()
        .map(|s0| {
            let mut x = *s0;
            let mut tr = Track {
                snaps: Vec::with_capacity(snapshot_times.len()),
                failed: false,
                clamped: Vec::with_capacity(snapshot_times.len()),
            };
            let mut clamped = false;
            for &(t, kick) in &events {
                if !tr.failed && flow_to(model, &mut x, t, dt).is_err() {
                    tr.failed = true;
                }
                if kick {
                    if !tr.failed {
                        match apply_kick(&x, schedule) {
                            Ok(o) => {
                                clamped |= o.clamped;
                                x = o.state;
                            }
                            Err(_) => tr.failed = true,
                        }
                    }
                } else {
                    tr.snaps.push(x);
                    tr.clamped.push(clamped);
                }
            }
            tr
        })
        .collect();
    Ok(snapshot_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let points: Vec<State> = tracks.iter().map(|tr| tr.snaps[k]).collect();
            KickSnapshot {
                t,
                folds: count_folds(&points),
                failed: tracks.iter().enumerate().filter(|(_, tr)| tr.failed).map(|(i, _)| i).collect(),
                clamped: tracks.iter().filter(|tr| tr.clamped[k]).count(),
                points,
            }
        })
        .collect())
}

/// Number of sign changes of the angular increment along the closed curve
/// through `points` in order. Increments below `1e-12` rad are skipped.
pub fn count_folds(points: &[State]) -> usize {
    let n = points.len();
    if n < 3 {
        return 0;
    }
    let ang: Vec<f64> = points.iter().map(|s| s.e_im.atan2(s.e_re)).collect();
    let signs: Vec<f64> = (0..n)
        .map(|i| wrap_angle(ang[(i + 1) % n] - ang[i]))
        .filter(|d| d.abs() > 1e-12)
        .map(f64::signum)
        .collect();
    let m = signs.len();
    (0..m).filter(|&i| signs[i] != signs[(i + 1) % m]).count()
}

/// Winding number of the closed curve through `points` around the origin.
pub fn winding_number(points: &[State]) -> i64 {
    let n = points.len();
    let ang: Vec<f64> = points.iter().map(|s| s.e_im.atan2(s.e_re)).collect();
    let total: f64 = (0..n).map(|i| wrap_angle(ang[(i + 1) % n] - ang[i])).sum();
    (total / std::f64::consts::TAU).round() as i64
}

/// Initial pair of the phase-difference experiment: amplitudes relative to √J
/// and phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcPair {
    pub r1: f64,
    pub theta1: f64,
    pub r2: f64,
    pub theta2: f64,
}

impl Default for IcPair {
    fn default() -> Self {
        Self {
            r1: 0.5,
            theta1: 0.0,
            r2: 1.5,
            theta2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub label: String,
    pub alpha: f64,
    /// Laser time units.
    pub times: Vec<f64>,
    /// Unwrapped `arg E₁ − arg E₂`.
    pub difference: Vec<f64>,
    /// Ψ₁ − Ψ₂ at t = 0, the limit of the difference.
    pub delta_psi0: f64,
    pub final_difference: f64,
    /// Largest excursion in the direction of `delta_psi0`.
    pub max_excursion: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseExperimentConfig {
    pub j: f64,
    pub pair: IcPair,
    /// End time in laser units.
    pub t_end: f64,
    pub dt_laser: f64,
    /// Step in rescaled Landau–Stuart time.
    pub dt_ls: f64,
    pub samples: usize,
}

impl PhaseExperimentConfig {
    /// Ten relaxation times of the laser at `j`.
    pub fn new(j: f64) -> Self {
        let a = 0.5 * (1.0 + LaserParams::new(j, 0.0).g * j);
        Self {
            j,
            pair: IcPair::default(),
            t_end: 10.0 / a,
            dt_laser: 1e-4,
            dt_ls: 1e-2,
            samples: 2000,
        }
    }
}

fn pair_states(j: f64, p: &IcPair) -> [State; 2] {
    let s = j.sqrt();
    [
        State::new(p.r1 * s * p.theta1.cos(), p.r1 * s * p.theta1.sin(), 0.0, 0.0),
        State::new(p.r2 * s * p.theta2.cos(), p.r2 * s * p.theta2.sin(), 0.0, 0.0),
    ]
}

/// Integrate two deterministic trajectories of `model` and return their
/// unwrapped phase difference sampled `samples` times. `time_scale`
/// converts model time into laser time.
fn phase_curve(label: &str, model: &Model, pair: [State; 2], t_end: f64, dt: f64, samples: usize, time_scale: f64) -> Result<PhaseCurve> {
    let alpha = model.alpha();
    let mut xs = pair;
    let mut un = [Unwrapper::new(), Unwrapper::new()];
    let mut phase = [un[0].push(xs[0].arg()), un[1].push(xs[1].arg())];
    let delta_psi0 = phase[0] - phase[1] + alpha * (pair[0].amplitude() / pair[1].amplitude()).ln();
    let mut times = vec![0.0];
    let mut diff = vec![phase[0] - phase[1]];
    // The phase is unwrapped every step, since it can turn fast between samples.
    let span = t_end / samples as f64;
    let substeps = (span / dt).ceil().max(1.0) as usize;
    let h = span / substeps as f64;
    for k in 1..=samples {
        for _ in 0..substeps {
            for (i, x) in xs.iter_mut().enumerate() {
                let c = advance(model, None, Scheme::Rk4, &x.coords(), x.t, h, &[0.0; 3]);
                check_state(&c, x.t + h)?;
                *x = State::from_coords(&c, x.t + h);
                phase[i] = un[i].push(x.arg());
            }
        }
        let t = k as f64 * span;
        for x in xs.iter_mut() {
            x.t = t;
        }
        times.push(t * time_scale);
        diff.push(phase[0] - phase[1]);
    }
    let sign = if delta_psi0 >= 0.0 { 1.0 } else { -1.0 };
    let max_excursion = diff.iter().map(|d| d * sign).fold(f64::NEG_INFINITY, f64::max) * sign;
    Ok(PhaseCurve {
        label: label.to_string(),
        alpha,
        final_difference: *diff.last().unwrap_or(&0.0),
        times,
        difference: diff,
        delta_psi0,
        max_excursion,
    })
}

/// Phase difference of two trajectories for the laser at α = 0, the laser
/// at `alpha` and the Landau–Stuart model at `alpha`, the last run in
/// rescaled time and mapped back through t = t̃/(gγ).
pub fn phase_difference_experiment(cfg: &PhaseExperimentConfig, alpha: f64) -> Result<Vec<PhaseCurve>> {
    if !(cfg.t_end > 0.0) || cfg.samples == 0 || !(cfg.dt_laser > 0.0) || !(cfg.dt_ls > 0.0) {
        return Err(invalid("t_end", "need positive t_end, steps and sample count"));
    }
    let pair = pair_states(cfg.j, &cfg.pair);
    let laser0 = LaserParams::new(cfg.j, 0.0);
    let laser = LaserParams::new(cfg.j, alpha);
    laser.validate()?;
    let ls: LandauStuartParams = reduce_to_landau_stuart(&laser);
    let gg = laser.g_gamma();
    let cases: Vec<(String, Model, f64, f64)> = vec![
        ("laser_alpha0".into(), laser0.into(), cfg.dt_laser, 1.0),
        (format!("laser_alpha{alpha}"), laser.into(), cfg.dt_laser, 1.0),
        (format!("landau_stuart_alpha{alpha}"), ls.into(), cfg.dt_ls, 1.0 / gg),
    ];
    cases
        .into_par_iter()
        .map(|(label, m, dt, scale)| phase_curve(&label, &m, pair, cfg.t_end / scale, dt, cfg.samples, scale))
        .collect()
}

/// CSV of phase-difference curves, one row per sample and curve.
pub fn phase_curves_csv(curves: &[PhaseCurve]) -> String {
    let mut s = String::from("label,alpha,t,phase_difference\n");
    for c in curves {
        for (t, d) in c.times.iter().zip(&c.difference) {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", c.label, c.alpha, t, d));
        }
    }
    s
}

/// CSV of kicked-set snapshots.
pub fn kick_snapshots_csv(snaps: &[KickSnapshot]) -> String {
    let mut s = String::from("t,index,e_re,e_im,n\n");
    for sn in snaps {
        for (i, p) in sn.points.iter().enumerate() {
            s.push_str(&format!("{:e},{},{:e},{:e},{:e}\n", sn.t, i, p.e_re, p.e_im, p.n));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn psi(s: &State, alpha: f64) -> f64 {
        s.arg() + alpha * s.amplitude().ln()
    }

    #[test]
    fn kick_reference_values() {
        let sch = KickSchedule::quarter_periods();
        let s = State::new(1.0, 0.0, 0.3, 0.0);
        assert_eq!(apply_kick(&s, &sch).unwrap().state, s);
        let mut add = sch.clone();
        add.mode = KickMode::Additive;
        assert_eq!(apply_kick(&s, &add).unwrap().state, s);
        let s = State::new((PI / 8.0).cos(), (PI / 8.0).sin(), 0.3, 0.0);
        let k = apply_kick(&s, &sch).unwrap();
        assert!((k.state.amplitude() - 1.8).abs() < 1e-12);
        assert_eq!(k.state.n, 0.3);
        let k = apply_kick(&s, &add).unwrap();
        assert!((k.state.amplitude() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn kick_clamps_and_rejects_origin() {
        let mut sch = KickSchedule::new(vec![0.0]);
        sch.amplitude = 2.0;
        let s = State::new((-PI / 8.0).cos(), (-PI / 8.0).sin(), 0.0, 0.0);
        let k = apply_kick(&s, &sch).unwrap();
        assert!(k.clamped);
        assert!((k.state.amplitude() - AMPLITUDE_FLOOR).abs() < 1e-20);
        assert!(matches!(apply_kick(&State::new(0.0, 0.0, 0.0, 0.0), &sch), Err(Error::PhaseSingular)));
        assert!(KickSchedule::new(vec![0.5, 0.5]).validate().is_err());
    }

    #[test]
    fn angular_terms_shift_the_phase() {
        let mut sch = KickSchedule::new(vec![0.0]);
        sch.amplitude = 0.0;
        sch.angular_terms = vec![FourierTerm { k: 0, amplitude: 0.25, phase: PI / 2.0 }];
        let s = State::new(0.0, 2.0, 0.1, 0.0);
        let k = apply_kick(&s, &sch).unwrap();
        assert!((k.state.arg() - (PI / 2.0 + 0.25)).abs() < 1e-12);
        assert!((k.state.amplitude() - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kicks_change_only_the_amplitude(th in -3.1..3.1f64, r in 0.1..3.0f64, n in -1.0..1.0f64, alpha in -5.0..5.0f64) {
            let s = State::new(r * th.cos(), r * th.sin(), n, 0.2);
            let k = apply_kick(&s, &KickSchedule::quarter_periods()).unwrap().state;
            prop_assert_eq!(k.n.to_bits(), n.to_bits());
            prop_assert_eq!(k.t, s.t);
            prop_assert!((k.arg() - s.arg()).abs() <= 4.0 * f64::EPSILON * PI);
            let jump = psi(&k, alpha) - psi(&s, alpha);
            prop_assert!((jump - kick_psi_jump(&s, &k, alpha)).abs() < 1e-12);
            let expected = r * (1.0 + 0.8 * (4.0 * th).sin());
            prop_assert!((k.amplitude() - expected).abs() < 1e-12 * r.max(1.0));
        }
    }

    #[test]
    fn psi_differences_survive_the_flow_between_kicks() {
        let model: Model = LaserParams::new(1.0, 2.0).into();
        let set: Vec<State> = circle_set(1.0, 16).iter().map(|s| apply_kick(s, &KickSchedule::new(vec![0.0])).unwrap().state).collect();
        let snaps = evolve_kicked_set(&model, &set, &KickSchedule::new(vec![]), &[0.25], 1e-4).unwrap();
        for (a, b) in set.iter().zip(&snaps[0].points) {
            assert!(wrap_angle(psi(a, 2.0) - psi(b, 2.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn unkicked_set_relaxes_onto_the_circle() {
        let model: Model = LaserParams::new(1.0, 2.0).into();
        let set: Vec<State> = circle_set(1.0, 8)
            .into_iter()
            .enumerate()
            .map(|(i, s)| State::new(s.e_re * (0.6 + 0.1 * i as f64), s.e_im * (0.6 + 0.1 * i as f64), 0.0, 0.0))
            .collect();
        let snaps = evolve_kicked_set(&model, &set, &KickSchedule::new(vec![]), &[10.0], 1e-4).unwrap();
        for p in &snaps[0].points {
            assert!((p.amplitude() - 1.0).abs() < 1e-6);
        }
        let bad: Model = LaserParams::new(1.0, 2.0).with_delta(1.0).into();
        assert!(evolve_kicked_set(&bad, &set, &KickSchedule::new(vec![]), &[1.0], 1e-4).is_err());
    }

    #[test]
    fn fold_counting_on_synthetic_curves() {
        let circle = circle_set(1.0, 100);
        assert_eq!(count_folds(&circle), 0);
        assert_eq!(winding_number(&circle), 1);
        // A curve whose angle runs back once: two turning points.
        let s: Vec<State> = (0..200)
            .map(|i| {
                let u = i as f64 / 200.0;
                let th = std::f64::consts::TAU * u + 0.8 * (std::f64::consts::TAU * u).sin();
                State::new(th.cos(), th.sin(), 0.0, 0.0)
            })
            .collect();
        assert_eq!(count_folds(&s), 0);
        let s: Vec<State> = (0..200)
            .map(|i| {
                let u = i as f64 / 200.0;
                let th = std::f64::consts::TAU * u + 1.5 * (std::f64::consts::TAU * u).sin();
                State::new(th.cos(), th.sin(), 0.0, 0.0)
            })
            .collect();
        assert_eq!(count_folds(&s), 2);
        assert_eq!(winding_number(&s), 1);
    }

    #[test]
    fn shear_free_laser_never_folds() {
        let model: Model = LaserParams::new(1.0, 0.0).into();
        let times = [0.1, 0.3, 0.5, 0.8];
        let snaps = evolve_kicked_set(&model, &circle_set(1.0, 400), &KickSchedule::quarter_periods(), &times, 1e-4).unwrap();
        for s in &snaps {
            assert_eq!(s.folds, 0, "t = {}", s.t);
            assert_eq!(winding_number(&s.points), 1);
        }
    }

    #[test]
    fn phase_difference_limits() {
        let cfg = PhaseExperimentConfig::new(1.0);
        let curves = phase_difference_experiment(&cfg, 3.0).unwrap();
        assert_eq!(curves.len(), 3);
        assert!(curves[0].final_difference.abs() < 1e-3);
        for c in &curves[1..] {
            assert!((c.final_difference - c.delta_psi0).abs() < 1e-3, "{}: {} vs {}", c.label, c.final_difference, c.delta_psi0);
        }
        assert!((curves[1].delta_psi0 - 3.0 * (0.5f64 / 1.5).ln()).abs() < 1e-12);
        assert!(curves[1].max_excursion.abs() > curves[2].max_excursion.abs());
        assert!(*curves[2].times.last().unwrap() - cfg.t_end < 1e-9);
    }
}
