//! Deterministic and stochastic time stepping with optional tangent propagation.
//!
//! Noise enters additively: the external pair and the oscillator's intrinsic
//! field channels are added to the E components, the inversion channel to N.
//! The tangent (variational) equation never sees noise.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{wrap_angle, State, Vec3, VectorField};
use crate::noise::{Channel, NoiseCursor, NoisePath};

/// |E|² above which a run is declared blown up.
pub const BLOWUP_INTENSITY: f64 = 1e9;
/// |N| above which a run is declared blown up.
pub const BLOWUP_INVERSION: f64 = 1e6;

/// Default laser step, in laser time units.
pub const DEFAULT_DT_LASER: f64 = 1e-4;
/// Default Landau–Stuart step, in rescaled time units.
pub const DEFAULT_DT_LS: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[serde(alias = "rk4_deterministic")]
    Rk4,
    EulerMaruyama,
    #[default]
    StochasticHeun,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Record every `record_stride`-th step in a [`Trace`].
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            scheme,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// Monochromatic injection `K e^{iνt}` added to dE/dt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub k: f64,
    pub nu: f64,
}

impl Tone {
    #[inline]
    fn at(&self, t: f64) -> [f64; 2] {
        let (s, c) = (self.nu * t).sin_cos();
        [self.k * c, self.k * s]
    }
}

#[inline]
fn axpy(a: f64, x: &Vec3, y: &Vec3) -> Vec3 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

#[inline]
fn drift_at<F: VectorField + ?Sized>(model: &F, tone: Option<&Tone>, x: &Vec3, t: f64) -> Vec3 {
    let mut d = model.drift(x);
    if let Some(tn) = tone {
        let f = tn.at(t);
        d[0] += f[0];
        d[1] += f[1];
    }
    d
}

/// Check a freshly computed state against the blow-up thresholds.
pub fn check_state(x: &Vec3, t: f64) -> Result<()> {
    if !(x[0].is_finite() && x[1].is_finite() && x[2].is_finite()) {
        return Err(Error::BlowUp {
            time: t,
            detail: "non-finite state".into(),
        });
    }
    let i = x[0] * x[0] + x[1] * x[1];
    if i > BLOWUP_INTENSITY {
        return Err(Error::BlowUp {
            time: t,
            detail: format!("|E|^2 = {i:.3e} exceeds {BLOWUP_INTENSITY:e}"),
        });
    }
    if x[2].abs() > BLOWUP_INVERSION {
        return Err(Error::BlowUp {
            time: t,
            detail: format!("|N| = {:.3e} exceeds {BLOWUP_INVERSION:e}", x[2].abs()),
        });
    }
    Ok(())
}

/// One step of `scheme` from `(x, t)` with the noise increment `xi` already
/// assembled for the step. RK4 ignores `xi`.
#[inline]
pub fn advance<F: VectorField + ?Sized>(
    model: &F,
    tone: Option<&Tone>,
    scheme: Scheme,
    x: &Vec3,
    t: f64,
    dt: f64,
    xi: &Vec3,
) -> Vec3 {
    match scheme {
        Scheme::Rk4 => {
            let h = 0.5 * dt;
            let k1 = drift_at(model, tone, x, t);
            let k2 = drift_at(model, tone, &axpy(h, &k1, x), t + h);
            let k3 = drift_at(model, tone, &axpy(h, &k2, x), t + h);
            let k4 = drift_at(model, tone, &axpy(dt, &k3, x), t + dt);
            let w = dt / 6.0;
            [
                x[0] + w * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
                x[1] + w * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
                x[2] + w * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]),
            ]
        }
        Scheme::EulerMaruyama => {
            let f = drift_at(model, tone, x, t);
            [
                x[0] + f[0] * dt + xi[0],
                x[1] + f[1] * dt + xi[1],
                x[2] + f[2] * dt + xi[2],
            ]
        }
        Scheme::StochasticHeun => {
            let f0 = drift_at(model, tone, x, t);
            let p = [
                x[0] + f0[0] * dt + xi[0],
                x[1] + f0[1] * dt + xi[1],
                x[2] + f0[2] * dt + xi[2],
            ];
            let f1 = drift_at(model, tone, &p, t + dt);
            let h = 0.5 * dt;
            [
                x[0] + h * (f0[0] + f1[0]) + xi[0],
                x[1] + h * (f0[1] + f1[1]) + xi[1],
                x[2] + h * (f0[2] + f1[2]) + xi[2],
            ]
        }
    }
}

/// As [`advance`], also carrying a tangent vector through the derivative of
/// the discrete map.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn advance_with_tangent<F: VectorField + ?Sized>(
    model: &F,
    tone: Option<&Tone>,
    scheme: Scheme,
    x: &Vec3,
    v: &Vec3,
    t: f64,
    dt: f64,
    xi: &Vec3,
) -> (Vec3, Vec3) {
    match scheme {
        Scheme::Rk4 => {
            let h = 0.5 * dt;
            let k1 = drift_at(model, tone, x, t);
            let l1 = model.tangent(x, v);
            let x2 = axpy(h, &k1, x);
            let v2 = axpy(h, &l1, v);
            let k2 = drift_at(model, tone, &x2, t + h);
            let l2 = model.tangent(&x2, &v2);
            let x3 = axpy(h, &k2, x);
            let v3 = axpy(h, &l2, v);
            let k3 = drift_at(model, tone, &x3, t + h);
            let l3 = model.tangent(&x3, &v3);
            let x4 = axpy(dt, &k3, x);
            let v4 = axpy(dt, &l3, v);
            let k4 = drift_at(model, tone, &x4, t + dt);
            let l4 = model.tangent(&x4, &v4);
            let w = dt / 6.0;
            let mut xn = [0.0; 3];
            let mut vn = [0.0; 3];
            for i in 0..3 {
                xn[i] = x[i] + w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                vn[i] = v[i] + w * (l1[i] + 2.0 * (l2[i] + l3[i]) + l4[i]);
            }
            (xn, vn)
        }
        Scheme::EulerMaruyama => {
            let xn = advance(model, tone, scheme, x, t, dt, xi);
            let l = model.tangent(x, v);
            (xn, axpy(dt, &l, v))
        }
        Scheme::StochasticHeun => {
            let f0 = drift_at(model, tone, x, t);
            let l0 = model.tangent(x, v);
            let p = [
                x[0] + f0[0] * dt + xi[0],
                x[1] + f0[1] * dt + xi[1],
                x[2] + f0[2] * dt + xi[2],
            ];
            let vp = axpy(dt, &l0, v);
            let f1 = drift_at(model, tone, &p, t + dt);
            let l1 = model.tangent(&p, &vp);
            let h = 0.5 * dt;
            let mut xn = [0.0; 3];
            let mut vn = [0.0; 3];
            for i in 0..3 {
                xn[i] = x[i] + h * (f0[i] + f1[i]) + xi[i];
                vn[i] = v[i] + h * (l0[i] + l1[i]);
            }
            (xn, vn)
        }
    }
}

/// How integrator steps map onto the noise grid.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Grid {
    /// No noise path: the clock advances by `dt`.
    Free,
    /// Each step spans this many whole grid cells.
    Cells(u32),
    /// Each grid cell is split into this many steps.
    Parts(u32),
}

fn grid_for(dt: f64, path: Option<&NoisePath>) -> Result<Grid> {
    let Some(p) = path else { return Ok(Grid::Free) };
    let g = p.dt_grid();
    let tol = 1e-9;
    if dt >= g * (1.0 - tol) {
        let k = (dt / g).round();
        if ((dt / g) - k).abs() > tol * k || k < 1.0 || k > u32::MAX as f64 {
            return Err(invalid("dt", format!("step {dt} is not a whole multiple of the noise grid {g}")));
        }
        Ok(Grid::Cells(k as u32))
    } else {
        let m = (g / dt).round();
        if ((g / dt) - m).abs() > tol * m || m > u32::MAX as f64 {
            return Err(invalid("dt", format!("step {dt} does not evenly subdivide the noise grid {g}")));
        }
        Ok(Grid::Parts(m as u32))
    }
}

/// Stateful stepper for one trajectory: owns a noise cursor and the
/// mapping from model time to noise cells.
pub struct Stepper<'m, F: VectorField + ?Sized> {
    model: &'m F,
    cfg: IntegratorConfig,
    cursor: Option<NoiseCursor>,
    grid: Grid,
    oscillator: u32,
    tone: Option<Tone>,
    noisy_n: bool,
}

impl<'m, F: VectorField + ?Sized> Stepper<'m, F> {
    pub fn new(model: &'m F, cfg: IntegratorConfig, path: Option<&NoisePath>) -> Result<Self> {
        cfg.validate()?;
        let grid = grid_for(cfg.dt, path)?;
        let silent = path.map(|p| p.spec().is_silent()).unwrap_or(true);
        if cfg.scheme == Scheme::Rk4 && !silent {
            return Err(invalid("scheme", "rk4 is deterministic; use a stochastic scheme with noise"));
        }
        Ok(Self {
            model,
            cfg,
            cursor: path.filter(|p| !p.spec().is_silent()).map(|p| p.cursor()),
            grid,
            oscillator: 0,
            tone: None,
            noisy_n: model.dim() == 3,
        })
    }

    /// Select which oscillator's intrinsic channels drive this trajectory.
    pub fn with_oscillator(mut self, j: u32) -> Self {
        self.oscillator = j;
        self
    }

    pub fn with_tone(mut self, tone: Option<Tone>) -> Self {
        self.tone = tone;
        self
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Noise increment for the step starting at `t`, and the end time.
    #[inline]
    fn increment(&mut self, t: f64) -> (Vec3, f64) {
        let dt = self.cfg.dt;
        match self.grid {
            Grid::Free => ([0.0; 3], t + dt),
            Grid::Cells(k) => {
                let g = dt / k as f64;
                let start = (t / g).round() as i64;
                let end_t = (start + k as i64) as f64 * g;
                let Some(c) = self.cursor.as_mut() else {
                    return ([0.0; 3], end_t);
                };
                let j = self.oscillator;
                let xi = [
                    c.span_increment(Channel::ExtRe, start, k) + c.span_increment(Channel::FieldRe(j), start, k),
                    c.span_increment(Channel::ExtIm, start, k) + c.span_increment(Channel::FieldIm(j), start, k),
                    if self.noisy_n { c.span_increment(Channel::Inversion(j), start, k) } else { 0.0 },
                ];
                (xi, end_t)
            }
            Grid::Parts(m) => {
                let sub = (t / dt).round() as i64;
                let end_t = (sub + 1) as f64 * dt;
                let Some(c) = self.cursor.as_mut() else {
                    return ([0.0; 3], end_t);
                };
                let cell = sub.div_euclid(m as i64);
                let part = sub.rem_euclid(m as i64) as u32;
                let j = self.oscillator;
                let xi = [
                    c.sub_increment(Channel::ExtRe, cell, part, m) + c.sub_increment(Channel::FieldRe(j), cell, part, m),
                    c.sub_increment(Channel::ExtIm, cell, part, m) + c.sub_increment(Channel::FieldIm(j), cell, part, m),
                    if self.noisy_n { c.sub_increment(Channel::Inversion(j), cell, part, m) } else { 0.0 },
                ];
                (xi, end_t)
            }
        }
    }

    /// Advance `state` by one step.
    #[inline]
    pub fn step(&mut self, state: &mut State) -> Result<()> {
        let (xi, t1) = self.increment(state.t);
        let x = advance(self.model, self.tone.as_ref(), self.cfg.scheme, &state.coords(), state.t, self.cfg.dt, &xi);
        check_state(&x, t1)?;
        *state = State::from_coords(&x, t1);
        Ok(())
    }

    /// Advance `state` and a tangent vector by one step.
    #[inline]
    pub fn step_tangent(&mut self, state: &mut State, v: &mut Vec3) -> Result<()> {
        let (xi, t1) = self.increment(state.t);
        let (x, vn) =
            advance_with_tangent(self.model, self.tone.as_ref(), self.cfg.scheme, &state.coords(), v, state.t, self.cfg.dt, &xi);
        check_state(&x, t1)?;
        *state = State::from_coords(&x, t1);
        *v = vn;
        Ok(())
    }

    /// Number of steps needed to go from `t0` to `t1`.
    pub fn steps_between(&self, t0: f64, t1: f64) -> u64 {
        let n = (t1 - t0) / self.cfg.dt;
        if n <= 0.0 {
            0
        } else {
            (n - 1e-9).ceil() as u64
        }
    }

    /// Step until the clock reaches `t1`.
    pub fn advance_to(&mut self, state: &mut State, t1: f64) -> Result<()> {
        let n = self.steps_between(state.t, t1);
        for _ in 0..n {
            self.step(state)?;
        }
        Ok(())
    }
}

/// One step from `state`.
pub fn step<F: VectorField + ?Sized>(model: &F, state: &State, cfg: &IntegratorConfig, path: Option<&NoisePath>) -> Result<State> {
    state_finite(state)?;
    let mut s = *state;
    Stepper::new(model, *cfg, path)?.step(&mut s)?;
    Ok(s)
}

/// One step of the state and of a tangent vector.
pub fn step_with_tangent<F: VectorField + ?Sized>(
    model: &F,
    state: &State,
    tangent: &Vec3,
    cfg: &IntegratorConfig,
    path: Option<&NoisePath>,
) -> Result<(State, Vec3)> {
    state_finite(state)?;
    if tangent.iter().all(|&c| c == 0.0) {
        return Err(invalid("tangent", "must be nonzero"));
    }
    let mut s = *state;
    let mut v = *tangent;
    Stepper::new(model, *cfg, path)?.step_tangent(&mut s, &mut v)?;
    Ok((s, v))
}

fn state_finite(s: &State) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::BlowUp {
            time: s.t,
            detail: "non-finite initial state".into(),
        });
    }
    Ok(())
}

/// One recorded sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub e_re: f64,
    pub e_im: f64,
    pub n: f64,
    pub intensity: f64,
    /// arg E, unwrapped continuously along the recorded samples.
    pub arg_unwrapped: f64,
}

/// A decimated trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub points: Vec<TracePoint>,
}

pub const TRACE_CSV_HEADER: &str = "t,e_re,e_im,n,intensity,arg_unwrapped";
const TRACE_MAGIC: &[u8; 4] = b"NSTR";
const TRACE_VERSION: u32 = 1;

impl Trace {
    fn push(&mut self, s: &State) {
        let wrapped = s.arg();
        let arg = match self.points.last() {
            Some(p) => p.arg_unwrapped + wrap_angle(wrapped - wrap_angle(p.arg_unwrapped)),
            None => wrapped,
        };
        self.points.push(TracePoint {
            t: s.t,
            e_re: s.e_re,
            e_im: s.e_im,
            n: s.n,
            intensity: s.intensity(),
            arg_unwrapped: arg,
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_state(&self) -> Option<State> {
        self.points.last().map(|p| State::new(p.e_re, p.e_im, p.n, p.t))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e},{:e}", p.t, p.e_re, p.e_im, p.n, p.intensity, p.arg_unwrapped)?;
        }
        Ok(())
    }

    /// Little-endian binary: magic, version, row count, then six f64 per row.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(TRACE_MAGIC)?;
        w.write_all(&TRACE_VERSION.to_le_bytes())?;
        w.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for p in &self.points {
            for v in [p.t, p.e_re, p.e_im, p.n, p.intensity, p.arg_unwrapped] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRACE_MAGIC {
            return Err(Error::Io("not a trace file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != TRACE_VERSION {
            return Err(Error::Io("unsupported trace version".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut points = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let mut row = [0.0; 6];
            for v in row.iter_mut() {
                r.read_exact(&mut b8)?;
                *v = f64::from_le_bytes(b8);
            }
            points.push(TracePoint {
                t: row[0],
                e_re: row[1],
                e_im: row[2],
                n: row[3],
                intensity: row[4],
                arg_unwrapped: row[5],
            });
        }
        Ok(Self { points })
    }
}

/// Integrate from `initial` (at `initial.t`) to `t1`, calling `observer`
/// after every step with the step count and the new state. Records every
/// `record_stride`-th step, the initial state and the final state.
pub fn run<F: VectorField + ?Sized>(
    model: &F,
    initial: &State,
    t1: f64,
    cfg: &IntegratorConfig,
    path: Option<&NoisePath>,
    observer: &mut dyn FnMut(u64, &State),
) -> Result<Trace> {
    state_finite(initial)?;
    let mut stepper = Stepper::new(model, *cfg, path)?;
    let n = stepper.steps_between(initial.t, t1);
    let mut trace = Trace::default();
    let mut s = *initial;
    trace.push(&s);
    for k in 1..=n {
        stepper.step(&mut s)?;
        observer(k, &s);
        if k % cfg.record_stride as u64 == 0 || k == n {
            trace.push(&s);
        }
    }
    Ok(trace)
}

/// [`run`] without an observer.
pub fn run_simple<F: VectorField + ?Sized>(
    model: &F,
    initial: &State,
    t1: f64,
    cfg: &IntegratorConfig,
    path: Option<&NoisePath>,
) -> Result<Trace> {
    run(model, initial, t1, cfg, path, &mut |_, _| {})
}
