//! Oscillator vector fields: the class-B laser rate equations and the
//! Landau–Stuart (Hopf normal form with shear) model.
//!
//! The complex field `E` is always stored as two reals `(Re E, Im E)`; the
//! laser adds the inversion `N` as a third coordinate. Landau–Stuart states
//! carry an inert third slot that is never read.
//!
//! Laser, in real coordinates with `E = x + iy`:
//!
//! ```text
//! dx/dt = -Δ y + gγ N (x + α y)
//! dy/dt =  Δ x + gγ N (y - α x)
//! dN/dt =  J - N - (1 + g N)(x² + y²)
//! ```
//!
//! Landau–Stuart, in rescaled time `t̃ = gγ t`, with `w = Δ̃ - α (J - |E|²)`:
//!
//! ```text
//! dx/dt̃ = (J - |E|²) x - w y
//! dy/dt̃ = (J - |E|²) y + w x
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Normalised decay rate γ used when none is given.
pub const DEFAULT_GAMMA: f64 = 500.0;
/// Normalised gain coefficient g used when none is given.
pub const DEFAULT_GAIN: f64 = 2.765;

/// Parameters of the class-B laser rate equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Pump deviation from threshold (`J = -1` is zero pump).
    pub j: f64,
    /// Detuning Δ between the reference frame and the laser frequency.
    #[serde(default)]
    pub delta: f64,
    /// Linewidth enhancement factor (shear).
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_gain")]
    pub g: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_gain() -> f64 {
    DEFAULT_GAIN
}

impl LaserParams {
    /// Laser with default γ and g, and Δ = 0.
    pub fn new(j: f64, alpha: f64) -> Self {
        Self {
            j,
            delta: 0.0,
            alpha,
            gamma: DEFAULT_GAMMA,
            g: DEFAULT_GAIN,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// The product gγ, which sets the fast time scale of the field equation.
    pub fn g_gamma(&self) -> f64 {
        self.g * self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j", self.j),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("g", self.g),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.gamma <= 0.0 {
            return Err(invalid("gamma", "must be positive"));
        }
        if self.g <= 0.0 {
            return Err(invalid("g", "must be positive"));
        }
        Ok(())
    }
}

/// Parameters of the Landau–Stuart model in rescaled time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauStuartParams {
    pub j: f64,
    /// Rescaled detuning Δ̃ = Δ/(gγ).
    #[serde(default)]
    pub delta_tilde: f64,
    pub alpha: f64,
}

impl LandauStuartParams {
    pub fn new(j: f64, alpha: f64) -> Self {
        Self {
            j,
            delta_tilde: 0.0,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j", self.j),
            ("delta_tilde", self.delta_tilde),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Oscillator state plus the simulation clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub e_re: f64,
    pub e_im: f64,
    /// Inversion N; unused by the Landau–Stuart model.
    pub n: f64,
    pub t: f64,
}

impl State {
    pub fn new(e_re: f64, e_im: f64, n: f64, t: f64) -> Self {
        Self { e_re, e_im, n, t }
    }

    /// Point on the on-state circle `|E|² = J`, `N = 0`, at the given phase.
    pub fn on_cycle(j: f64, phase: f64) -> Self {
        let r = j.max(0.0).sqrt();
        Self::new(r * phase.cos(), r * phase.sin(), 0.0, 0.0)
    }

    pub fn from_coords(x: &Vec3, t: f64) -> Self {
        Self::new(x[0], x[1], x[2], t)
    }

    pub fn coords(&self) -> Vec3 {
        [self.e_re, self.e_im, self.n]
    }

    pub fn field(&self) -> Complex64 {
        Complex64::new(self.e_re, self.e_im)
    }

    pub fn intensity(&self) -> f64 {
        self.e_re * self.e_re + self.e_im * self.e_im
    }

    pub fn amplitude(&self) -> f64 {
        self.e_re.hypot(self.e_im)
    }

    /// Wrapped argument of E in (-π, π].
    pub fn arg(&self) -> f64 {
        self.e_im.atan2(self.e_re)
    }

    pub fn is_finite(&self) -> bool {
        self.e_re.is_finite() && self.e_im.is_finite() && self.n.is_finite() && self.t.is_finite()
    }

    fn check_finite(&self) -> Result<()> {
        if !self.e_re.is_finite() {
            return Err(Error::NonFinite("e_re"));
        }
        if !self.e_im.is_finite() {
            return Err(Error::NonFinite("e_im"));
        }
        if !self.n.is_finite() {
            return Err(Error::NonFinite("n"));
        }
        Ok(())
    }
}

/// Time derivative of a [`State`] (clock excluded).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub d_e_re: f64,
    pub d_e_im: f64,
    pub d_n: f64,
}

impl From<Vec3> for StateDerivative {
    fn from(d: Vec3) -> Self {
        Self {
            d_e_re: d[0],
            d_e_im: d[1],
            d_n: d[2],
        }
    }
}

/// An autonomous vector field in the (Re E, Im E, N) coordinates.
pub trait VectorField: Send + Sync {
    /// Number of active coordinates (3 for the laser, 2 for Landau–Stuart).
    fn dim(&self) -> usize;
    fn drift(&self, x: &Vec3) -> Vec3;
    fn jacobian(&self, x: &Vec3) -> Mat3;

    /// Jacobian-vector product.
    fn tangent(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        let m = self.jacobian(x);
        mat_vec(&m, v)
    }

    /// Shear α.
    fn alpha(&self) -> f64;

    /// The constant rate dΨ/dt of the isochronal phase (Δ or Δ̃).
    fn phase_velocity(&self) -> f64;

    /// Pump parameter J.
    fn pump(&self) -> f64;

    /// Slowest transverse relaxation rate |Re μ₂| of the limit cycle, if one exists.
    fn relaxation_rate(&self) -> Option<f64>;
}

#[inline]
pub(crate) fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

impl VectorField for LaserParams {
    fn dim(&self) -> usize {
        3
    }

    #[inline]
    fn drift(&self, x: &Vec3) -> Vec3 {
        let [re, im, n] = *x;
        let gn = self.g_gamma() * n;
        let r2 = re * re + im * im;
        [
            -self.delta * im + gn * (re + self.alpha * im),
            self.delta * re + gn * (im - self.alpha * re),
            self.j - n - (1.0 + self.g * n) * r2,
        ]
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let [re, im, n] = *x;
        let gg = self.g_gamma();
        let gn = gg * n;
        let a = self.alpha;
        let pump = 1.0 + self.g * n;
        [
            [gn, -self.delta + gn * a, gg * (re + a * im)],
            [self.delta - gn * a, gn, gg * (im - a * re)],
            [
                -2.0 * pump * re,
                -2.0 * pump * im,
                -1.0 - self.g * (re * re + im * im),
            ],
        ]
    }

    #[inline]
    fn tangent(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        let [re, im, n] = *x;
        let gg = self.g_gamma();
        let gn = gg * n;
        let a = self.alpha;
        let r2 = re * re + im * im;
        [
            -self.delta * v[1] + gn * (v[0] + a * v[1]) + gg * v[2] * (re + a * im),
            self.delta * v[0] + gn * (v[1] - a * v[0]) + gg * v[2] * (im - a * re),
            -v[2] * (1.0 + self.g * r2) - 2.0 * (1.0 + self.g * n) * (re * v[0] + im * v[1]),
        ]
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn phase_velocity(&self) -> f64 {
        self.delta
    }

    fn pump(&self) -> f64 {
        self.j
    }

    fn relaxation_rate(&self) -> Option<f64> {
        floquet_laser(self)
            .ok()
            .map(|f| f.lyapunov_exponents().iter().filter(|&&l| l < 0.0).fold(f64::INFINITY, |m, &l| m.min(-l)))
    }
}

impl VectorField for LandauStuartParams {
    fn dim(&self) -> usize {
        2
    }

    #[inline]
    fn drift(&self, x: &Vec3) -> Vec3 {
        let [re, im, _] = *x;
        let r2 = re * re + im * im;
        let grow = self.j - r2;
        let w = self.delta_tilde - self.alpha * grow;
        [grow * re - w * im, grow * im + w * re, 0.0]
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let [re, im, _] = *x;
        let r2 = re * re + im * im;
        let grow = self.j - r2;
        let w = self.delta_tilde - self.alpha * grow;
        let a = self.alpha;
        [
            [grow - 2.0 * re * re - 2.0 * a * re * im, -2.0 * re * im - w - 2.0 * a * im * im, 0.0],
            [-2.0 * re * im + w + 2.0 * a * re * re, grow - 2.0 * im * im + 2.0 * a * re * im, 0.0],
            [0.0, 0.0, 0.0],
        ]
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn phase_velocity(&self) -> f64 {
        self.delta_tilde
    }

    fn pump(&self) -> f64 {
        self.j
    }

    fn relaxation_rate(&self) -> Option<f64> {
        (self.j > 0.0).then(|| 2.0 * self.j)
    }
}

/// Either oscillator model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Laser(LaserParams),
    LandauStuart(LandauStuartParams),
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Laser(p) => p.validate(),
            Model::LandauStuart(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Laser(_) => "laser",
            Model::LandauStuart(_) => "landau_stuart",
        }
    }

    pub fn is_laser(&self) -> bool {
        matches!(self, Model::Laser(_))
    }
}

impl VectorField for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Laser(p) => p.dim(),
            Model::LandauStuart(p) => p.dim(),
        }
    }

    #[inline]
    fn drift(&self, x: &Vec3) -> Vec3 {
        match self {
            Model::Laser(p) => p.drift(x),
            Model::LandauStuart(p) => p.drift(x),
        }
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        match self {
            Model::Laser(p) => p.jacobian(x),
            Model::LandauStuart(p) => p.jacobian(x),
        }
    }

    #[inline]
    fn tangent(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        match self {
            Model::Laser(p) => p.tangent(x, v),
            Model::LandauStuart(p) => p.tangent(x, v),
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            Model::Laser(p) => p.alpha,
            Model::LandauStuart(p) => p.alpha,
        }
    }

    fn phase_velocity(&self) -> f64 {
        match self {
            Model::Laser(p) => p.phase_velocity(),
            Model::LandauStuart(p) => p.phase_velocity(),
        }
    }

    fn pump(&self) -> f64 {
        match self {
            Model::Laser(p) => p.j,
            Model::LandauStuart(p) => p.j,
        }
    }

    fn relaxation_rate(&self) -> Option<f64> {
        match self {
            Model::Laser(p) => p.relaxation_rate(),
            Model::LandauStuart(p) => p.relaxation_rate(),
        }
    }
}

impl From<LaserParams> for Model {
    fn from(p: LaserParams) -> Self {
        Model::Laser(p)
    }
}

impl From<LandauStuartParams> for Model {
    fn from(p: LandauStuartParams) -> Self {
        Model::LandauStuart(p)
    }
}

/// Right-hand side of the laser rate equations.
pub fn laser_drift(state: &State, p: &LaserParams) -> Result<StateDerivative> {
    state.check_finite()?;
    Ok(p.drift(&state.coords()).into())
}

/// Right-hand side of the Landau–Stuart equation (N slot is zero).
pub fn ls_drift(state: &State, p: &LandauStuartParams) -> Result<StateDerivative> {
    state.check_finite()?;
    Ok(p.drift(&state.coords()).into())
}

pub fn laser_jacobian(state: &State, p: &LaserParams) -> Mat3 {
    p.jacobian(&state.coords())
}

/// 2×2 Jacobian of the Landau–Stuart field in (Re E, Im E).
pub fn ls_jacobian(state: &State, p: &LandauStuartParams) -> [[f64; 2]; 2] {
    let m = p.jacobian(&state.coords());
    [[m[0][0], m[0][1]], [m[1][0], m[1][1]]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Three real laser exponents.
    Overdamped,
    /// One real and a complex-conjugate pair (relaxation oscillations).
    Underdamped,
    LandauStuart,
}

/// Floquet exponents of the on-state limit cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetSet {
    /// Neutral exponent along the cycle; always exactly zero.
    pub mu1: f64,
    pub mu2: Complex64,
    /// Absent for the planar Landau–Stuart model.
    pub mu3: Option<Complex64>,
    pub regime: Regime,
}

impl FloquetSet {
    /// Real parts, i.e. the Lyapunov exponents of the unforced cycle.
    pub fn lyapunov_exponents(&self) -> Vec<f64> {
        let mut out = vec![self.mu1, self.mu2.re];
        if let Some(m) = self.mu3 {
            out.push(m.re);
        }
        out
    }
}

/// Lower and upper pump values separating the overdamped and underdamped
/// laser regimes: `(4γ(1 ∓ √(1 - 1/(2γ))) - 1)/g`.
pub fn regime_boundaries(gamma: f64, g: f64) -> (f64, f64) {
    let root = (1.0 - 1.0 / (2.0 * gamma)).sqrt();
    (
        (4.0 * gamma * (1.0 - root) - 1.0) / g,
        (4.0 * gamma * (1.0 + root) - 1.0) / g,
    )
}

fn floquet_laser(p: &LaserParams) -> Result<FloquetSet> {
    if !(p.j > 0.0) {
        return Err(Error::NoLimitCycle(p.j));
    }
    let a = 0.5 * (1.0 + p.g * p.j);
    let disc = a * a - 2.0 * p.g_gamma() * p.j;
    let b = disc.abs().sqrt();
    // Above the upper boundary the discriminant is positive again.
    if disc >= 0.0 {
        Ok(FloquetSet {
            mu1: 0.0,
            mu2: Complex64::new(-a + b, 0.0),
            mu3: Some(Complex64::new(-a - b, 0.0)),
            regime: Regime::Overdamped,
        })
    } else {
        Ok(FloquetSet {
            mu1: 0.0,
            mu2: Complex64::new(-a, b),
            mu3: Some(Complex64::new(-a, -b)),
            regime: Regime::Underdamped,
        })
    }
}

/// Closed-form Floquet exponents of the on-state cycle.
pub fn floquet_closed_form(model: &Model) -> Result<FloquetSet> {
    match model {
        Model::Laser(p) => floquet_laser(p),
        Model::LandauStuart(p) => {
            if !(p.j > 0.0) {
                return Err(Error::NoLimitCycle(p.j));
            }
            Ok(FloquetSet {
                mu1: 0.0,
                mu2: Complex64::new(-2.0 * p.j, 0.0),
                mu3: None,
                regime: Regime::LandauStuart,
            })
        }
    }
}

/// Isochronal phase Ψ = arg E + α ln|E|, with arg E in (-π, π].
pub fn phase_psi(state: &State, alpha: f64) -> Result<f64> {
    let r = state.amplitude();
    if r == 0.0 {
        return Err(Error::PhaseSingular);
    }
    Ok(state.arg() + alpha * r.ln())
}

/// Ψ reduced to [0, 2π).
pub fn phase_psi_wrapped(state: &State, alpha: f64) -> Result<f64> {
    phase_psi(state, alpha).map(|p| p.rem_euclid(2.0 * PI))
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Continuous (unwrapped) tracking of a sequence of wrapped angles.
#[derive(Clone, Debug, Default)]
pub struct Unwrapper {
    last: Option<f64>,
    total: f64,
}

impl Unwrapper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed the next wrapped angle; returns its continuous counterpart.
    pub fn push(&mut self, wrapped: f64) -> f64 {
        match self.last {
            None => self.total = wrapped,
            Some(prev) => self.total += wrap_angle(wrapped - prev),
        }
        self.last = Some(wrapped);
        self.total
    }
}

/// Samples of the logarithmic-spiral isochrone `arg E + α ln|E| = C` for
/// radii in `[r_min, r_max]`, returned as `(Re E, Im E)` pairs.
pub fn isochrone_points(c: f64, alpha: f64, r_min: f64, r_max: f64, samples: usize) -> Result<Vec<[f64; 2]>> {
    if !(r_min > 0.0) {
        return Err(invalid("r_min", "radius range must exclude 0"));
    }
    if !(r_max >= r_min) || !r_max.is_finite() {
        return Err(invalid("r_max", "must be finite and at least r_min"));
    }
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let (l0, l1) = (r_min.ln(), r_max.ln());
    Ok((0..samples)
        .map(|i| {
            let lr = l0 + (l1 - l0) * i as f64 / (samples - 1) as f64;
            let r = lr.exp();
            let theta = c - alpha * lr;
            [r * theta.cos(), r * theta.sin()]
        })
        .collect())
}

/// Centre-manifold reduction of the laser to the Landau–Stuart model.
///
/// Time changes units as `t̃ = gγ t` and the detuning as `Δ̃ = Δ/(gγ)`.
pub fn reduce_to_landau_stuart(p: &LaserParams) -> LandauStuartParams {
    LandauStuartParams {
        j: p.j,
        delta_tilde: p.delta / p.g_gamma(),
        alpha: p.alpha,
    }
}

/// Distance `|N - (J - |E|²)|` of a laser state from the centre manifold.
pub fn centre_manifold_residual(state: &State, j: f64) -> f64 {
    (state.n - (j - state.intensity())).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Hand evaluation of the complex-form rate equations, kept separate from
    // the real-coordinate implementation.
    fn laser_complex(e: Complex64, n: f64, p: &LaserParams) -> (Complex64, f64) {
        let i = Complex64::i();
        let de = i * p.delta * e + p.g_gamma() * Complex64::new(1.0, -p.alpha) * n * e;
        let dn = p.j - n - (1.0 + p.g * n) * e.norm_sqr();
        (de, dn)
    }

    fn ls_complex(e: Complex64, p: &LandauStuartParams) -> Complex64 {
        let i = Complex64::i();
        (p.j + i * (p.delta_tilde - p.alpha * (p.j - e.norm_sqr()))) * e - e * e.norm_sqr()
    }

    #[test]
    fn off_state_is_an_equilibrium() {
        for &(j, a, d) in &[(1.0, 3.0, 0.7), (-0.5, 0.0, 0.0), (20.0, -2.0, 1e3)] {
            let p = LaserParams::new(j, a).with_delta(d);
            let dx = laser_drift(&State::new(0.0, 0.0, j, 0.0), &p).unwrap();
            assert_eq!((dx.d_e_re, dx.d_e_im, dx.d_n), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn on_state_is_stationary_without_detuning() {
        let p = LaserParams::new(2.0, 3.0);
        let s = State::on_cycle(2.0, 0.4);
        let d = laser_drift(&s, &p).unwrap();
        let radial = s.e_re * d.d_e_re + s.e_im * d.d_e_im;
        assert!(radial.abs() < 1e-12);
        assert!(d.d_n.abs() < 1e-12);
        assert!(d.d_e_re.abs() < 1e-12 && d.d_e_im.abs() < 1e-12);
    }

    #[test]
    fn laser_drift_reference_value() {
        let p = LaserParams::new(1.0, 0.0);
        let d = laser_drift(&State::new(1.0, 0.0, 0.1, 0.0), &p).unwrap();
        assert_relative_eq!(d.d_e_re, 138.25, max_relative = 1e-12);
        assert_eq!(d.d_e_im, 0.0);
        assert_relative_eq!(d.d_n, -0.3765, max_relative = 1e-12);
    }

    #[test]
    fn ls_drift_reference_value() {
        let p = LandauStuartParams::new(1.0, 2.0);
        let d = ls_drift(&State::new(2.0, 0.0, 0.0, 0.0), &p).unwrap();
        assert_relative_eq!(d.d_e_re, -6.0, max_relative = 1e-12);
        assert_relative_eq!(d.d_e_im, 12.0, max_relative = 1e-12);
        assert_eq!(ls_drift(&State::new(0.0, 0.0, 0.0, 0.0), &p).unwrap().d_e_re, 0.0);
    }

    #[test]
    fn ls_cycle_has_zero_phase_velocity_without_detuning() {
        let p = LandauStuartParams::new(1.5, 4.0);
        let s = State::on_cycle(1.5, 1.0);
        let d = ls_drift(&s, &p).unwrap();
        assert!(d.d_e_re.abs() < 1e-12 && d.d_e_im.abs() < 1e-12);
    }

    #[test]
    fn drift_rejects_non_finite_input() {
        let p = LaserParams::new(1.0, 3.0);
        assert_eq!(
            laser_drift(&State::new(f64::NAN, 0.0, 0.0, 0.0), &p),
            Err(Error::NonFinite("e_re"))
        );
        let q = LandauStuartParams::new(1.0, 3.0);
        assert!(ls_drift(&State::new(0.0, f64::INFINITY, 0.0, 0.0), &q).is_err());
    }

    #[test]
    fn ls_jacobian_at_origin_is_pump_times_identity() {
        let p = LandauStuartParams::new(0.7, 0.0);
        let m = ls_jacobian(&State::new(0.0, 0.0, 0.0, 0.0), &p);
        assert_eq!(m, [[0.7, 0.0], [0.0, 0.7]]);
    }

    #[test]
    fn off_state_field_block_is_stable_below_threshold() {
        let p = LaserParams::new(-0.3, 3.0).with_delta(2.0);
        let m = laser_jacobian(&State::new(0.0, 0.0, p.j, 0.0), &p);
        // Field block [[gγJ, -Δ+gγJα],[Δ-gγJα, gγJ]] has eigenvalues gγJ ± i(...).
        let block = nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
        for ev in block.complex_eigenvalues().iter() {
            assert!(ev.re < 0.0);
            assert_relative_eq!(ev.re, p.g_gamma() * p.j, max_relative = 1e-12);
            assert_relative_eq!(ev.im.abs(), (p.delta - p.g_gamma() * p.j * p.alpha).abs(), max_relative = 1e-12);
        }
    }

    fn fd_jacobian<F: Fn(&Vec3) -> Vec3>(f: F, x: &Vec3, dim: usize) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for k in 0..dim {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for r in 0..dim {
                m[r][k] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        m
    }

    fn assert_jacobian_close(a: &Mat3, b: &Mat3, dim: usize) {
        let scale = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| a[r][c].abs())
            .fold(0.0, f64::max)
            .max(1.0);
        for r in 0..dim {
            for c in 0..dim {
                let err = (a[r][c] - b[r][c]).abs();
                assert!(err <= 1e-5 * a[r][c].abs().max(1e-3 * scale), "entry ({r},{c}): {} vs {}", a[r][c], b[r][c]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn laser_jacobian_matches_finite_differences(
            re in -3.0..3.0f64, im in -3.0..3.0f64, n in -0.5..0.5f64,
            j in -1.0..10.0f64, alpha in -5.0..5.0f64, delta in -10.0..10.0f64,
        ) {
            let p = LaserParams::new(j, alpha).with_delta(delta);
            let x = [re, im, n];
            let fd = fd_jacobian(|y| p.drift(y), &x, 3);
            assert_jacobian_close(&p.jacobian(&x), &fd, 3);
            // The hand-fused tangent must agree with Jacobian × v.
            let v = [0.3, -1.1, 0.7];
            let a = p.tangent(&x, &v);
            let b = mat_vec(&p.jacobian(&x), &v);
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-9 * (1.0 + b[k].abs()));
            }
        }

        #[test]
        fn ls_jacobian_matches_finite_differences(
            re in -3.0..3.0f64, im in -3.0..3.0f64,
            j in -1.0..10.0f64, alpha in -10.0..10.0f64, delta in -2.0..2.0f64,
        ) {
            let p = LandauStuartParams { j, delta_tilde: delta, alpha };
            let x = [re, im, 0.0];
            let fd = fd_jacobian(|y| p.drift(y), &x, 2);
            assert_jacobian_close(&p.jacobian(&x), &fd, 2);
        }

        #[test]
        fn real_coordinates_match_complex_form(
            re in -3.0..3.0f64, im in -3.0..3.0f64, n in -1.0..1.0f64,
            j in -1.0..10.0f64, alpha in -5.0..5.0f64, delta in -10.0..10.0f64,
        ) {
            let p = LaserParams::new(j, alpha).with_delta(delta);
            let (de, dn) = laser_complex(Complex64::new(re, im), n, &p);
            let d = p.drift(&[re, im, n]);
            prop_assert!((d[0] - de.re).abs() <= 1e-9 * (1.0 + de.re.abs()));
            prop_assert!((d[1] - de.im).abs() <= 1e-9 * (1.0 + de.im.abs()));
            prop_assert!((d[2] - dn).abs() <= 1e-9 * (1.0 + dn.abs()));

            let q = LandauStuartParams { j, delta_tilde: delta / 100.0, alpha };
            let le = ls_complex(Complex64::new(re, im), &q);
            let l = q.drift(&[re, im, 0.0]);
            prop_assert!((l[0] - le.re).abs() <= 1e-9 * (1.0 + le.re.abs()));
            prop_assert!((l[1] - le.im).abs() <= 1e-9 * (1.0 + le.im.abs()));
        }

        #[test]
        fn isochrone_points_round_trip_through_psi(
            c in -PI..PI, alpha in -5.0..5.0f64, r0 in 0.05..1.0f64, span in 1.0..20.0f64,
        ) {
            for pt in isochrone_points(c, alpha, r0, r0 * span, 17).unwrap() {
                let psi = phase_psi(&State::new(pt[0], pt[1], 0.0, 0.0), alpha).unwrap();
                prop_assert!(wrap_angle(psi - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regime_boundaries_match_reported_values() {
        let (lo, hi) = regime_boundaries(DEFAULT_GAMMA, DEFAULT_GAIN);
        assert!((lo - 9e-5).abs() < 0.5e-5, "lower boundary {lo}");
        assert!((hi - 1446.0).abs() < 1.0, "upper boundary {hi}");
    }

    #[test]
    fn floquet_closed_form_at_unit_pump() {
        let f = floquet_closed_form(&LaserParams::new(1.0, 0.0).into()).unwrap();
        assert_eq!(f.regime, Regime::Underdamped);
        assert_eq!(f.mu1, 0.0);
        assert_relative_eq!(f.mu2.re, -1.8825, max_relative = 1e-12);
        // b = sqrt(|1.8825² - 2·2.765·500|)
        assert_relative_eq!(f.mu2.im, (2765.0f64 - 1.8825 * 1.8825).sqrt(), max_relative = 1e-12);
        assert!((f.mu2.im - 52.549).abs() < 1e-3);
        assert_eq!(f.mu3, Some(f.mu2.conj()));
    }

    #[test]
    fn floquet_regime_switches_at_lower_boundary() {
        let (lo, _) = regime_boundaries(DEFAULT_GAMMA, DEFAULT_GAIN);
        let below = floquet_closed_form(&LaserParams::new(lo * 0.999, 0.0).into()).unwrap();
        let above = floquet_closed_form(&LaserParams::new(lo * 1.001, 0.0).into()).unwrap();
        assert_eq!(below.regime, Regime::Overdamped);
        assert_eq!(below.mu2.im, 0.0);
        assert!(below.mu2.re != below.mu3.unwrap().re);
        assert_eq!(above.regime, Regime::Underdamped);
        assert_eq!(above.mu3.unwrap(), above.mu2.conj());
    }

    #[test]
    fn floquet_landau_stuart_and_errors() {
        let f = floquet_closed_form(&LandauStuartParams::new(1.0, 6.0).into()).unwrap();
        assert_eq!(f.mu2, Complex64::new(-2.0, 0.0));
        assert_eq!(f.regime, Regime::LandauStuart);
        assert!(f.mu3.is_none());
        assert_eq!(
            floquet_closed_form(&LaserParams::new(0.0, 1.0).into()),
            Err(Error::NoLimitCycle(0.0))
        );
        assert!(floquet_closed_form(&LandauStuartParams::new(-1.0, 1.0).into()).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(phase_psi(&State::new(1.0, 0.0, 0.0, 0.0), 0.0).unwrap(), 0.0);
        let up = State::new(0.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(phase_psi(&up, 2.0).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_eq!(phase_psi(&State::new(0.0, 0.0, 1.0, 0.0), 1.0), Err(Error::PhaseSingular));
        let w = phase_psi_wrapped(&State::new(-1.0, -1e-9, 0.0, 0.0), 0.0).unwrap();
        assert!((0.0..2.0 * PI).contains(&w));
    }

    #[test]
    fn isochrone_geometry() {
        // No shear: straight ray at angle C.
        for pt in isochrone_points(0.5, 0.0, 0.1, 3.0, 5).unwrap() {
            assert_relative_eq!(pt[1].atan2(pt[0]), 0.5, epsilon = 1e-14);
        }
        let pts = isochrone_points(0.0, 2.0, 1.0, std::f64::consts::E, 2).unwrap();
        assert_relative_eq!(pts[0][1].atan2(pts[0][0]), 0.0, epsilon = 1e-14);
        assert_relative_eq!(pts[1][1].atan2(pts[1][0]), -2.0, epsilon = 1e-14);
        assert!(isochrone_points(0.0, 2.0, 0.0, 1.0, 5).is_err());
    }

    #[test]
    fn reduction_rescales_detuning() {
        let p = LaserParams::new(0.1, 4.0);
        assert_eq!(reduce_to_landau_stuart(&p).delta_tilde, 0.0);
        let q = reduce_to_landau_stuart(&p.with_delta(1382.5));
        assert_relative_eq!(q.delta_tilde, 1.0, max_relative = 1e-15);
        assert_eq!((q.j, q.alpha), (0.1, 4.0));
    }

    #[test]
    fn unwrapper_follows_continuous_rotation() {
        let mut u = Unwrapper::new();
        let mut last = 0.0;
        for k in 0..1000 {
            let theta = 0.05 * k as f64;
            last = u.push(wrap_angle(theta));
            assert!((last - theta).abs() < 1e-9);
        }
        assert!(last > 40.0);
    }

    #[test]
    fn laser_relaxation_rate_is_slowest_decay() {
        let p = LaserParams::new(1.0, 0.0);
        assert_relative_eq!(p.relaxation_rate().unwrap(), 1.8825, max_relative = 1e-12);
        let q = LaserParams::new(1e-5, 0.0);
        let f = floquet_laser(&q).unwrap();
        assert_relative_eq!(q.relaxation_rate().unwrap(), -f.mu2.re, max_relative = 1e-12);
        assert!(LaserParams::new(-1.0, 0.0).relaxation_rate().is_none());
    }
}
