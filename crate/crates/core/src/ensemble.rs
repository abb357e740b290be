//! M identical uncoupled lasers with independent intrinsic noise and one
//! common external forcing, and the order parameter `I_M = |Σ E_j|²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorConfig, Scheme, Stepper, Tone, DEFAULT_DT_LASER};
use crate::models::{LaserParams, State};
use crate::noise::{derive_seed, NoisePath, NoiseSpec};

/// Intrinsic field noise intensity used by default.
pub const DEFAULT_D_E: f64 = 0.05;
/// Intrinsic inversion noise intensity used by default.
pub const DEFAULT_D_N: f64 = 3.5e-8;
/// Ratio band around 1 that counts as synchronised.
pub const SYNC_LOW: f64 = 0.8;
pub const SYNC_HIGH: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    None,
    /// `K e^{iνt}` added to dE/dt; `nu_ext = None` means ν = Δ.
    Monochromatic {
        k: f64,
        #[serde(default)]
        nu_ext: Option<f64>,
    },
    WhiteNoise { d_ext: f64 },
}

impl Forcing {
    /// Same kind of forcing at another strength.
    pub fn with_strength(&self, s: f64) -> Self {
        match *self {
            Forcing::None => Forcing::None,
            Forcing::Monochromatic { nu_ext, .. } => Forcing::Monochromatic { k: s, nu_ext },
            Forcing::WhiteNoise { .. } => Forcing::WhiteNoise { d_ext: s },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub m: usize,
    pub forcing: Forcing,
    #[serde(default = "default_d_e")]
    pub d_e: f64,
    #[serde(default = "default_d_n")]
    pub d_n: f64,
    /// Averaging span after the burn-in.
    pub horizon: f64,
    pub burn_in: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Steps between order-parameter samples.
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_d_e() -> f64 {
    DEFAULT_D_E
}
fn default_d_n() -> f64 {
    DEFAULT_D_N
}
fn default_dt() -> f64 {
    DEFAULT_DT_LASER
}
fn default_stride() -> usize {
    10
}
fn default_bins() -> usize {
    50
}

impl EnsembleConfig {
    pub fn new(m: usize, forcing: Forcing) -> Self {
        Self {
            m,
            forcing,
            d_e: DEFAULT_D_E,
            d_n: DEFAULT_D_N,
            horizon: 200.0,
            burn_in: 50.0,
            dt: DEFAULT_DT_LASER,
            sample_stride: default_stride(),
            bins: default_bins(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m", "need at least one oscillator"));
        }
        match self.forcing {
            Forcing::Monochromatic { k, nu_ext } => {
                if !(k >= 0.0) || !k.is_finite() {
                    return Err(invalid("k", "forcing amplitude must be finite and >= 0"));
                }
                if nu_ext.is_some_and(|v| !v.is_finite()) {
                    return Err(invalid("nu_ext", "must be finite"));
                }
            }
            Forcing::WhiteNoise { d_ext } => {
                if !(d_ext >= 0.0) || !d_ext.is_finite() {
                    return Err(invalid("d_ext", "must be finite and >= 0"));
                }
            }
            Forcing::None => {}
        }
        for (name, v) in [("d_e", self.d_e), ("d_n", self.d_n)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be finite and >= 0"));
            }
        }
        if !(self.burn_in >= 0.0) || !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "need horizon > 0 and burn_in >= 0"));
        }
        if self.sample_stride == 0 || self.bins == 0 {
            return Err(invalid("sample_stride", "stride and bin count must be positive"));
        }
        IntegratorConfig::new(self.dt, Scheme::StochasticHeun).validate()
    }

    fn noise(&self, seed: u64) -> NoiseSpec {
        let d_ext = match self.forcing {
            Forcing::WhiteNoise { d_ext } => d_ext,
            _ => 0.0,
        };
        NoiseSpec {
            d_ext,
            d_e: self.d_e,
            d_n: self.d_n,
            seed,
            dt_grid: self.dt,
        }
    }

    fn tone(&self, p: &LaserParams) -> Option<Tone> {
        match self.forcing {
            Forcing::Monochromatic { k, nu_ext } => Some(Tone {
                k,
                nu: nu_ext.unwrap_or(p.delta),
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncClass {
    Synchronised,
    Partial,
    Unsynchronised,
    Trivial,
}

impl SyncClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SyncClass::Synchronised => "synchronised",
            SyncClass::Partial => "partial",
            SyncClass::Unsynchronised => "unsynchronised",
            SyncClass::Trivial => "trivial",
        }
    }
}

/// Classify by `ratio = ⟨I_M⟩/(M²⟨I_fr⟩)`.
pub fn classify_ratio(ratio: f64, m: usize) -> SyncClass {
    let m = m as f64;
    if ratio > SYNC_HIGH {
        SyncClass::Trivial
    } else if ratio >= SYNC_LOW {
        SyncClass::Synchronised
    } else if ratio * m * m <= SYNC_HIGH * m {
        SyncClass::Unsynchronised
    } else {
        SyncClass::Partial
    }
}

pub fn classify_sync(result: &OrderParameterResult) -> SyncClass {
    classify_ratio(result.ratio, result.m)
}

/// Normalised histogram over `[edges[0], edges[bins]]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Bin samples over `[0, max]`; the masses sum to one.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples to bin".into()));
    }
    if bins == 0 {
        return Err(invalid("bins", "must be positive"));
    }
    let hi = samples.iter().cloned().fold(0.0, f64::max);
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let w = hi / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let b = ((s / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    Ok(Histogram {
        edges: (0..=bins).map(|i| i as f64 * w).collect(),
        mass: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterResult {
    pub m: usize,
    pub mean_im: f64,
    pub mean_ifr: f64,
    pub ratio: f64,
    pub histogram: Histogram,
    pub sync_class: SyncClass,
    /// Largest `I_M / (Σ|E_j|)²` seen; never above one.
    pub max_bound_ratio: f64,
    /// `I_M(t)` after the burn-in.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

pub fn histogram_im(result: &OrderParameterResult, bins: usize) -> Result<Histogram> {
    histogram(&result.samples, bins)
}

/// Lock-step integrator for M lasers on one noise path.
pub struct Ensemble<'m> {
    steppers: Vec<Stepper<'m, LaserParams>>,
    states: Vec<State>,
}

impl<'m> Ensemble<'m> {
    /// Oscillator `j` reads the intrinsic channels of index `j` and the
    /// shared external channels.
    pub fn new(model: &'m LaserParams, cfg: IntegratorConfig, path: &NoisePath, tone: Option<Tone>, initial: Vec<State>) -> Result<Self> {
        let steppers = (0..initial.len())
            .map(|j| Ok(Stepper::new(model, cfg, Some(path))?.with_oscillator(j as u32).with_tone(tone)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steppers, states: initial })
    }

    pub fn step(&mut self) -> Result<()> {
        for (s, x) in self.steppers.iter_mut().zip(self.states.iter_mut()) {
            s.step(x)?;
        }
        Ok(())
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// `|Σ E_j|²`.
    pub fn order_parameter(&self) -> f64 {
        let (re, im) = self.states.iter().fold((0.0, 0.0), |(a, b), s| (a + s.e_re, b + s.e_im));
        re * re + im * im
    }

    /// `(Σ |E_j|)²`, the triangle-inequality bound on the order parameter.
    pub fn amplitude_bound(&self) -> f64 {
        let s: f64 = self.states.iter().map(|s| s.amplitude()).sum();
        s * s
    }
}

/// M phases drawn uniformly on the limit cycle.
pub fn random_phases(p: &LaserParams, m: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| State::on_cycle(p.j, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Time average of `I_M` after the burn-in; returns the samples and the
/// largest bound ratio.
fn average(
    p: &LaserParams,
    cfg: &EnsembleConfig,
    spec: &NoiseSpec,
    tone: Option<Tone>,
    initial: Vec<State>,
) -> Result<(Vec<f64>, f64)> {
    let path = NoisePath::new(*spec)?;
    let icfg = IntegratorConfig::new(cfg.dt, Scheme::StochasticHeun);
    let mut ens = Ensemble::new(p, icfg, &path, tone, initial)?;
    let burn = (cfg.burn_in / cfg.dt).round() as u64;
    let total = burn + (cfg.horizon / cfg.dt).round() as u64;
    let mut samples = Vec::with_capacity(((total - burn) / cfg.sample_stride as u64) as usize + 1);
    let mut worst: f64 = 0.0;
    for k in 1..=total {
        ens.step()?;
        if k > burn && (k - burn) % cfg.sample_stride as u64 == 0 {
            let im = ens.order_parameter();
            let b = ens.amplitude_bound();
            if b > 0.0 {
                worst = worst.max(im / b);
            }
            samples.push(im);
        }
    }
    Ok((samples, worst))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

/// Free-running single-laser intensity ⟨I_fr⟩: intrinsic noise on, no forcing.
pub fn free_running_intensity(p: &LaserParams, cfg: &EnsembleConfig, seed: u64) -> Result<f64> {
    let single = EnsembleConfig {
        m: 1,
        forcing: Forcing::None,
        ..cfg.clone()
    };
    let spec = single.noise(derive_seed(seed, 1));
    let (s, _) = average(p, &single, &spec, None, vec![State::on_cycle(p.j, 0.0)])?;
    Ok(mean(&s))
}

/// Order parameter statistics of one ensemble run.
pub fn run_ensemble(p: &LaserParams, cfg: &EnsembleConfig, seed: u64) -> Result<OrderParameterResult> {
    p.validate()?;
    cfg.validate()?;
    let initial = random_phases(p, cfg.m, derive_seed(seed, 2));
    let (samples, worst) = average(p, cfg, &cfg.noise(seed), cfg.tone(p), initial)?;
    let mean_ifr = free_running_intensity(p, cfg, seed)?;
    let mean_im = mean(&samples);
    let m = cfg.m as f64;
    let ratio = mean_im / (m * m * mean_ifr);
    Ok(OrderParameterResult {
        m: cfg.m,
        mean_im,
        mean_ifr,
        ratio,
        histogram: histogram(&samples, cfg.bins)?,
        sync_class: classify_ratio(ratio, cfg.m),
        max_bound_ratio: worst,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strength: f64,
    pub ratio: Option<f64>,
    pub mean_im: Option<f64>,
    pub mean_ifr: Option<f64>,
    pub sync_class: Option<SyncClass>,
    /// Failure text when the run did not finish.
    pub error: Option<String>,
}

/// Order parameter ratio against forcing strength; every point reuses `seed`.
pub fn sweep_forcing_strength(p: &LaserParams, template: &EnsembleConfig, strengths: &[f64], seed: u64) -> Vec<CurvePoint> {
    strengths
        .par_iter()
        .map(|&s| {
            let cfg = EnsembleConfig {
                forcing: template.forcing.with_strength(s),
                ..template.clone()
            };
            match run_ensemble(p, &cfg, seed) {
                Ok(r) => CurvePoint {
                    strength: s,
                    ratio: Some(r.ratio),
                    mean_im: Some(r.mean_im),
                    mean_ifr: Some(r.mean_ifr),
                    sync_class: Some(r.sync_class),
                    error: None,
                },
                Err(e) => CurvePoint {
                    strength: s,
                    ratio: None,
                    mean_im: None,
                    mean_ifr: None,
                    sync_class: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::advance;
    use crate::noise::Channel;

    fn short(m: usize, forcing: Forcing) -> EnsembleConfig {
        EnsembleConfig {
            horizon: 2.0,
            burn_in: 0.5,
            dt: 1e-3,
            ..EnsembleConfig::new(m, forcing)
        }
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify_ratio(1.0, 50), SyncClass::Synchronised);
        assert_eq!(classify_ratio(1.0 / 50.0, 50), SyncClass::Unsynchronised);
        assert_eq!(classify_ratio(2.0, 50), SyncClass::Trivial);
        assert_eq!(classify_ratio(0.3, 50), SyncClass::Partial);
        assert_eq!(classify_ratio(0.8, 50), SyncClass::Synchronised);
    }

    #[test]
    fn single_laser_order_parameter_is_its_intensity() {
        let p = LaserParams::new(1.0, 3.0);
        let cfg = short(1, Forcing::WhiteNoise { d_ext: 0.1 });
        let path = NoisePath::new(cfg.noise(4)).unwrap();
        let mut ens = Ensemble::new(&p, IntegratorConfig::new(cfg.dt, Scheme::StochasticHeun), &path, None, vec![State::on_cycle(1.0, 0.3)]).unwrap();
        for _ in 0..200 {
            ens.step().unwrap();
            assert_eq!(ens.order_parameter(), ens.states()[0].intensity());
        }
    }

    #[test]
    fn triangle_bound_and_histogram_mass() {
        let p = LaserParams::new(1.0, 3.0);
        let r = run_ensemble(&p, &short(8, Forcing::WhiteNoise { d_ext: 0.5 }), 11).unwrap();
        assert!(r.max_bound_ratio <= 1.0 + 1e-12);
        assert!(r.mean_im >= 0.0);
        assert!((r.histogram.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(histogram_im(&r, 7).unwrap().mass.len(), 7);
        assert!(histogram(&[], 3).is_err());
    }

    #[test]
    fn deterministic_single_laser_histogram_is_a_spike() {
        let p = LaserParams::new(1.0, 0.0);
        let cfg = EnsembleConfig {
            d_e: 0.0,
            d_n: 0.0,
            ..short(1, Forcing::None)
        };
        let r = run_ensemble(&p, &cfg, 0).unwrap();
        assert!((r.mean_ifr - 1.0).abs() < 1e-9);
        assert!(r.histogram.mass.iter().cloned().fold(0.0, f64::max) == 1.0);
        assert_eq!(r.sync_class, SyncClass::Synchronised);
    }

    #[test]
    fn members_share_only_the_external_channels() {
        let spec = NoiseSpec {
            d_ext: 1.0,
            d_e: 1.0,
            d_n: 1.0,
            seed: 3,
            dt_grid: 1e-3,
        };
        let path = NoisePath::new(spec).unwrap();
        for j in 0..4u32 {
            for k in (j + 1)..5 {
                assert_ne!(path.sample_increment(Channel::FieldRe(j), 10), path.sample_increment(Channel::FieldRe(k), 10));
                assert_ne!(path.sample_increment(Channel::Inversion(j), 10), path.sample_increment(Channel::Inversion(k), 10));
            }
        }
    }

    // One forced laser integrated by hand from M initial conditions must give
    // the ensemble of identical lasers without intrinsic noise.
    #[test]
    fn ensemble_equals_many_initial_conditions_of_one_laser() {
        let p = LaserParams::new(2.0, 3.0);
        let dt = 1e-3;
        let spec = NoiseSpec::external(0.3, 9, dt);
        let path = NoisePath::new(spec).unwrap();
        let init = random_phases(&p, 8, 1);
        let mut ens = Ensemble::new(&p, IntegratorConfig::new(dt, Scheme::StochasticHeun), &path, None, init.clone()).unwrap();
        let mut xs: Vec<[f64; 3]> = init.iter().map(|s| s.coords()).collect();
        for step in 0..500i64 {
            ens.step().unwrap();
            let xi = [
                path.sample_increment(Channel::ExtRe, step),
                path.sample_increment(Channel::ExtIm, step),
                0.0,
            ];
            for x in xs.iter_mut() {
                *x = advance(&p, None, Scheme::StochasticHeun, x, step as f64 * dt, dt, &xi);
            }
        }
        for (s, x) in ens.states().iter().zip(&xs) {
            assert_eq!(s.coords(), *x);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let p = LaserParams::new(1.0, 3.0);
        let cfg = short(4, Forcing::Monochromatic { k: 0.1, nu_ext: None });
        let a = run_ensemble(&p, &cfg, 5).unwrap();
        let b = run_ensemble(&p, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let p = LaserParams::new(1.0, 0.0);
        assert!(run_ensemble(&p, &short(0, Forcing::None), 0).is_err());
        assert!(run_ensemble(&p, &short(2, Forcing::WhiteNoise { d_ext: -1.0 }), 0).is_err());
        let curve = sweep_forcing_strength(&p, &short(2, Forcing::WhiteNoise { d_ext: 0.0 }), &[0.01, -1.0], 0);
        assert!(curve[0].ratio.is_some() && curve[1].error.is_some());
    }
}
