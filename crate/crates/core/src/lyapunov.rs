//! Largest Lyapunov exponent by tangent-vector renormalisation, and the
//! numerical Floquet spectrum of the unforced on-state.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrate::{IntegratorConfig, Scheme, Stepper};
use crate::models::{FloquetSet, Model, Regime, State, Vec3, VectorField};
use crate::noise::{derive_seed, NoisePath, NoiseSpec};

/// Tangent norms outside this band force an immediate renormalisation.
pub const NORM_BAND: (f64, f64) = (1e-6, 1e6);
/// Burn-in, in relaxation times, when none is given.
pub const DEFAULT_BURN_IN_RELAXATIONS: f64 = 20.0;
pub const MIN_BLOCKS: usize = 20;

/// Knobs of [`estimate_lambda_max`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSettings {
    /// Averaging time after burn-in.
    pub horizon: f64,
    /// Discarded transient; `None` means 20 relaxation times (20 time units
    /// when the model has no limit cycle).
    #[serde(default)]
    pub burn_in: Option<f64>,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Steps between renormalisations.
    #[serde(default = "default_renorm")]
    pub renorm_interval: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Seed of the random initial condition and tangent, independent of the noise seed.
    #[serde(default)]
    pub ic_seed: u64,
    /// Interpret `horizon`, `burn_in`, `dt` and the noise grid in units of
    /// the relaxation time 1/|Re μ₂|.
    #[serde(default)]
    pub relaxation_units: bool,
}

fn default_renorm() -> usize {
    10
}

fn default_blocks() -> usize {
    MIN_BLOCKS
}

fn default_resamples() -> usize {
    500
}

impl LyapunovSettings {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            burn_in: None,
            dt,
            scheme: Scheme::StochasticHeun,
            renorm_interval: default_renorm(),
            blocks: MIN_BLOCKS,
            bootstrap_resamples: default_resamples(),
            ic_seed: 0,
            relaxation_units: false,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_ic_seed(mut self, seed: u64) -> Self {
        self.ic_seed = seed;
        self
    }

    pub fn in_relaxation_units(mut self) -> Self {
        self.relaxation_units = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "must be positive"));
        }
        if let Some(b) = self.burn_in {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(invalid("burn_in", "must be finite and >= 0"));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.renorm_interval == 0 {
            return Err(invalid("renorm_interval", "must be at least 1"));
        }
        if self.blocks < MIN_BLOCKS {
            return Err(invalid("blocks", format!("at least {MIN_BLOCKS} blocks are required")));
        }
        if self.bootstrap_resamples < 2 {
            return Err(invalid("bootstrap_resamples", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    /// Block-bootstrap standard error.
    pub stderr: f64,
    /// Averaged horizon in model time units.
    pub t_total: f64,
    pub n_renorm: u64,
    pub seed_set: Vec<u64>,
    /// Time average of |E|² over the averaging window.
    pub mean_intensity: f64,
    pub block_rates: Vec<f64>,
}

impl LyapunovEstimate {
    /// Sign of λ if it is at least `k` standard errors away from zero.
    pub fn significant_sign(&self, k: f64) -> Option<f64> {
        if self.lambda_max.abs() > k * self.stderr {
            Some(self.lambda_max.signum())
        } else {
            None
        }
    }
}

fn unit(v: &Vec3) -> (Vec3, f64) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    ([v[0] / n, v[1] / n, v[2] / n], n)
}

/// Random initial state and tangent for a trajectory.
pub fn random_initial<F: VectorField + ?Sized>(model: &F, seed: u64) -> (State, Vec3) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = model.pump();
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let r = if j > 0.0 {
        j.sqrt() * rng.random_range(0.8..1.2)
    } else {
        rng.random_range(0.05..0.2)
    };
    let n = if model.dim() == 3 {
        if j > 0.0 {
            0.1 * j * rng.random_range(-1.0..1.0)
        } else {
            j
        }
    } else {
        0.0
    };
    let mut v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0];
    if model.dim() == 3 {
        v[2] = rng.random_range(-1.0..1.0);
    }
    let (v, _) = unit(&v);
    (State::new(r * phase.cos(), r * phase.sin(), n, 0.0), v)
}

/// Bootstrap standard error of the mean of `x`, resampling whole entries.
pub fn bootstrap_stderr(x: &[f64], resamples: usize, seed: u64) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| x[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let m = means.iter().sum::<f64>() / resamples as f64;
    (means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (resamples - 1) as f64).sqrt()
}

/// Time scale applied to the settings: 1 normally, 1/rate in relaxation units.
fn time_scale<F: VectorField + ?Sized>(model: &F, s: &LyapunovSettings) -> Result<f64> {
    if !s.relaxation_units {
        return Ok(1.0);
    }
    model
        .relaxation_rate()
        .filter(|r| *r > 0.0)
        .map(|r| 1.0 / r)
        .ok_or(Error::NoLimitCycle(model.pump()))
}

/// Effective burn-in in model time units.
pub fn effective_burn_in<F: VectorField + ?Sized>(model: &F, s: &LyapunovSettings) -> Result<f64> {
    let scale = time_scale(model, s)?;
    Ok(match s.burn_in {
        Some(b) => b * scale,
        None if s.relaxation_units => DEFAULT_BURN_IN_RELAXATIONS * scale,
        None => match model.relaxation_rate() {
            Some(r) if r > 0.0 => DEFAULT_BURN_IN_RELAXATIONS / r,
            _ => DEFAULT_BURN_IN_RELAXATIONS,
        },
    })
}

/// Largest Lyapunov exponent of `model` driven by `noise`.
///
/// With `relaxation_units`, the noise grid is rescaled along with `dt`.
pub fn estimate_lambda_max<F: VectorField + ?Sized>(
    model: &F,
    noise: &NoiseSpec,
    settings: &LyapunovSettings,
) -> Result<LyapunovEstimate> {
    settings.validate()?;
    let scale = time_scale(model, settings)?;
    let dt = settings.dt * scale;
    let burn_in = effective_burn_in(model, settings)?;
    let horizon = settings.horizon * scale;
    let mut spec = *noise;
    spec.dt_grid *= scale;
    let path = NoisePath::new(spec)?;

    let cfg = IntegratorConfig::new(dt, settings.scheme);
    let mut stepper = Stepper::new(model, cfg, Some(&path))?;

    let n_avg = (horizon / dt).round() as u64;
    let per_block = n_avg / settings.blocks as u64;
    if per_block < settings.renorm_interval as u64 {
        return Err(Error::HorizonTooShort(format!(
            "{n_avg} steps cannot fill {} blocks of at least {} steps",
            settings.blocks, settings.renorm_interval
        )));
    }

    let (mut s, mut v) = random_initial(model, settings.ic_seed);
    let interval = settings.renorm_interval as u64;
    let (lo, hi) = NORM_BAND;

    let n_burn = stepper.steps_between(0.0, burn_in);
    for k in 1..=n_burn {
        stepper.step_tangent(&mut s, &mut v)?;
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if k % interval == 0 || !(lo * lo..=hi * hi).contains(&n2) {
            v = unit(&v).0;
        }
    }
    v = unit(&v).0;

    let mut n_renorm = 0u64;
    let mut rates = Vec::with_capacity(settings.blocks);
    let mut intensity_sum = 0.0;
    let block_time = per_block as f64 * dt;
    for _ in 0..settings.blocks {
        let mut log = 0.0;
        for k in 1..=per_block {
            stepper.step_tangent(&mut s, &mut v)?;
            intensity_sum += s.intensity();
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if k % interval == 0 || k == per_block || !(lo * lo..=hi * hi).contains(&n2) {
                let (u, n) = unit(&v);
                log += n.ln();
                v = u;
                n_renorm += 1;
            }
        }
        rates.push(log / block_time);
    }
    let total_steps = per_block * settings.blocks as u64;
    let lambda = rates.iter().sum::<f64>() / rates.len() as f64;
    let stderr = bootstrap_stderr(&rates, settings.bootstrap_resamples, derive_seed(noise.seed, settings.ic_seed));
    Ok(LyapunovEstimate {
        lambda_max: lambda,
        stderr,
        t_total: total_steps as f64 * dt,
        n_renorm,
        seed_set: vec![noise.seed],
        mean_intensity: intensity_sum / total_steps as f64,
        block_rates: rates,
    })
}

/// Estimate, doubling the horizon up to `max_doublings` times until λ is
/// more than `k` standard errors from zero. Returns the last estimate and
/// whether it reached significance.
pub fn estimate_until_significant<F: VectorField + ?Sized>(
    model: &F,
    noise: &NoiseSpec,
    settings: &LyapunovSettings,
    k: f64,
    max_doublings: u32,
) -> Result<(LyapunovEstimate, bool)> {
    let mut s = *settings;
    let mut est = estimate_lambda_max(model, noise, &s)?;
    for _ in 0..max_doublings {
        if est.significant_sign(k).is_some() {
            return Ok((est, true));
        }
        s.horizon *= 2.0;
        est = estimate_lambda_max(model, noise, &s)?;
    }
    let ok = est.significant_sign(k).is_some();
    Ok((est, ok))
}

/// Independent forcing seeds derived from `base`.
pub fn seed_panel(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(base, i)).collect()
}

/// λ_max for `n_seeds` independent noise realisations, estimated in parallel.
pub fn lambda_vs_seed<F: VectorField + ?Sized>(
    model: &F,
    noise: &NoiseSpec,
    settings: &LyapunovSettings,
    n_seeds: usize,
) -> Result<Vec<LyapunovEstimate>> {
    seed_panel(noise.seed, n_seeds)
        .into_par_iter()
        .map(|seed| estimate_lambda_max(model, &noise.with_seed(seed), settings))
        .collect()
}

/// Pooled standard error of a panel of estimates.
pub fn pooled_stderr(panel: &[LyapunovEstimate]) -> f64 {
    (panel.iter().map(|e| e.stderr * e.stderr).sum::<f64>() / panel.len().max(1) as f64).sqrt()
}

fn frobenius(m: &Matrix3<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Newton-polish an on-state guess so the drift vanishes.
fn locate_on_state(model: &Model) -> Result<Vec3> {
    let j = model.pump();
    if !(j > 0.0) {
        return Err(Error::NoLimitCycle(j));
    }
    let still = zero_detuning(model);
    let mut x = [j.sqrt(), 0.0, 0.0];
    let dim = still.dim();
    for _ in 0..20 {
        let f = still.drift(&x);
        let res = f.iter().take(dim).map(|v| v.abs()).fold(0.0, f64::max);
        if res < 1e-14 * (1.0 + j) {
            break;
        }
        // The on-state is a circle, so the Jacobian is singular; take a
        // least-squares step with the phase fixed (Im E = 0).
        let m = still.jacobian(&x);
        if dim == 3 {
            let a = nalgebra::Matrix3x2::new(m[0][0], m[0][2], m[1][0], m[1][2], m[2][0], m[2][2]);
            let b = nalgebra::Vector3::new(-f[0], -f[1], -f[2]);
            let Some(inv) = (a.transpose() * a).try_inverse() else { break };
            let d = inv * a.transpose() * b;
            x[0] += d[0];
            x[2] += d[1];
        } else {
            let a = Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
            let Some(inv) = (a.transpose() * a + Matrix2::identity() * 1e-12).try_inverse() else { break };
            let d = inv * a.transpose() * nalgebra::Vector2::new(-f[0], -f[1]);
            x[0] += d[0];
        }
    }
    Ok(x)
}

fn zero_detuning(model: &Model) -> Model {
    match *model {
        Model::Laser(p) => Model::Laser(p.with_delta(0.0)),
        Model::LandauStuart(mut p) => {
            p.delta_tilde = 0.0;
            Model::LandauStuart(p)
        }
    }
}

fn sort_floquet(mut mus: Vec<Complex64>, landau_stuart: bool) -> FloquetSet {
    // Neutral exponent first, then by real part descending, positive imaginary first.
    mus.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let mu1 = mus.remove(0);
    mus.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let scale = mus.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
    if landau_stuart {
        return FloquetSet {
            mu1: mu1.re,
            mu2: Complex64::new(mus[0].re, 0.0),
            mu3: None,
            regime: Regime::LandauStuart,
        };
    }
    let complex = mus.iter().any(|m| m.im.abs() > 1e-9 * scale);
    let (mu2, mu3) = if complex {
        let re = 0.5 * (mus[0].re + mus[1].re);
        let im = 0.5 * (mus[0].im.abs() + mus[1].im.abs());
        (Complex64::new(re, im), Complex64::new(re, -im))
    } else {
        (Complex64::new(mus[0].re, 0.0), Complex64::new(mus[1].re, 0.0))
    };
    FloquetSet {
        mu1: mu1.re,
        mu2,
        mu3: Some(mu3),
        regime: if complex { Regime::Underdamped } else { Regime::Overdamped },
    }
}

/// Floquet exponents from the numerically integrated monodromy matrix of the
/// variational equation at the on-state, with Δ set to zero.
///
/// The integration time τ = 0.5/‖Df‖ keeps every exponent's phase inside
/// the principal branch of the complex logarithm. `mu1` carries the
/// numerical residual of the neutral exponent rather than an exact zero.
pub fn floquet_spectrum_numeric(model: &Model) -> Result<FloquetSet> {
    model.validate()?;
    let x0 = locate_on_state(model)?;
    let still = zero_detuning(model);
    let m = still.jacobian(&x0);
    let a = Matrix3::from_fn(|r, c| m[r][c]);
    let tau = 0.5 / frobenius(&a);
    let steps = 2000u32;
    let cfg = IntegratorConfig::new(tau / steps as f64, Scheme::Rk4);
    let dim = still.dim();
    let mut mono = Matrix3::<f64>::zeros();
    for col in 0..dim {
        let mut v = [0.0; 3];
        v[col] = 1.0;
        let mut s = State::from_coords(&x0, 0.0);
        let mut st = Stepper::new(&still, cfg, None)?;
        for _ in 0..steps {
            st.step_tangent(&mut s, &mut v)?;
        }
        for r in 0..3 {
            mono[(r, col)] = v[r];
        }
    }
    let eigs: Vec<Complex64> = if dim == 3 {
        mono.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
    } else {
        let m2 = Matrix2::new(mono[(0, 0)], mono[(0, 1)], mono[(1, 0)], mono[(1, 1)]);
        m2.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
    };
    let mus = eigs.into_iter().map(|z| z.ln() / tau).collect();
    Ok(sort_floquet(mus, dim == 2))
}

/// Full Lyapunov spectrum of the unforced model by repeated Gram–Schmidt
/// orthonormalisation, started on the on-state. Exponents in descending order.
pub fn lyapunov_spectrum(model: &Model, horizon: f64) -> Result<Vec<f64>> {
    model.validate()?;
    let x0 = locate_on_state(model)?;
    let still = zero_detuning(model);
    let m = still.jacobian(&x0);
    let norm = frobenius(&Matrix3::from_fn(|r, c| m[r][c]));
    let dt = (0.02 / norm).min(1e-2);
    let cfg = IntegratorConfig::new(dt, Scheme::Rk4);
    let dim = still.dim();
    // A generic starting frame: coordinate axes can sit in invariant subspaces.
    let seeds: [Vec3; 3] = if dim == 3 {
        [[0.6, 0.7, 0.3], [-0.5, 0.2, 0.9], [0.3, -0.8, 0.4]]
    } else {
        [[0.6, 0.8, 0.0], [-0.8, 0.6, 0.0], [0.0; 3]]
    };
    let mut basis: Vec<Vec3> = seeds[..dim].to_vec();
    let mut states = vec![State::from_coords(&x0, 0.0); dim];
    let mut steppers: Vec<_> = (0..dim).map(|_| Stepper::new(&still, cfg, None)).collect::<Result<_>>()?;
    // Let the frame align with the Oseledets directions before accumulating.
    let align = still.relaxation_rate().map(|r| DEFAULT_BURN_IN_RELAXATIONS / r).unwrap_or(0.0);
    let burn = (align / dt).ceil() as u64;
    let steps = (horizon / dt).ceil() as u64;
    let mut sums = vec![0.0; dim];
    for k in 1..=burn + steps {
        if k == burn + 1 {
            sums.iter_mut().for_each(|s| *s = 0.0);
        }
        for i in 0..dim {
            steppers[i].step_tangent(&mut states[i], &mut basis[i])?;
        }
        if k % 10 == 0 || k == burn || k == burn + steps {
            for i in 0..dim {
                for p in 0..i {
                    let d = (0..3).map(|c| basis[i][c] * basis[p][c]).sum::<f64>();
                    let q = basis[p];
                    for c in 0..3 {
                        basis[i][c] -= d * q[c];
                    }
                }
                let (u, n) = unit(&basis[i]);
                sums[i] += n.ln();
                basis[i] = u;
            }
        }
    }
    let t = steps as f64 * dt;
    let mut out: Vec<f64> = sums.into_iter().map(|s| s / t).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{floquet_closed_form, LandauStuartParams, LaserParams};

    #[test]
    fn bootstrap_of_constant_is_zero() {
        assert_eq!(bootstrap_stderr(&[2.0; 30], 100, 1), 0.0);
        assert!(bootstrap_stderr(&[1.0], 100, 1).is_infinite());
    }

    #[test]
    fn bootstrap_matches_analytic_stderr() {
        let x: Vec<f64> = (0..400).map(|i| ((i * 7919) % 400) as f64 / 400.0).collect();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        let b = bootstrap_stderr(&x, 4000, 3);
        assert!((b / (sd / n.sqrt()) - 1.0).abs() < 0.08);
    }

    #[test]
    fn horizon_too_short_is_reported() {
        let p = LaserParams::new(1.0, 0.0);
        let s = LyapunovSettings::new(1e-3, 1e-4).with_burn_in(0.0);
        assert!(matches!(
            estimate_lambda_max(&p, &NoiseSpec::silent(1e-4), &s),
            Err(Error::HorizonTooShort(_))
        ));
    }

    #[test]
    fn too_few_blocks_rejected() {
        let mut s = LyapunovSettings::new(10.0, 1e-2);
        s.blocks = 5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unforced_landau_stuart_is_neutral() {
        let p = LandauStuartParams::new(1.0, 3.0);
        let s = LyapunovSettings::new(200.0, 1e-2).with_ic_seed(4);
        let e = estimate_lambda_max(&p, &NoiseSpec::silent(1e-2), &s).unwrap();
        assert!(e.lambda_max.abs() <= 3.0 * e.stderr + 1e-12, "{e:?}");
        assert!(e.stderr <= 1e-3);
        assert!((e.mean_intensity - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_runs_ignore_noise_seed() {
        let p = LandauStuartParams::new(1.0, 3.0);
        let s = LyapunovSettings::new(50.0, 1e-2);
        let panel = lambda_vs_seed(&p, &NoiseSpec::silent(1e-2), &s, 3).unwrap();
        assert_eq!(panel.len(), 3);
        assert_eq!(panel[0].lambda_max.to_bits(), panel[2].lambda_max.to_bits());
        assert_ne!(panel[0].seed_set, panel[1].seed_set);
        assert_eq!(lambda_vs_seed(&p, &NoiseSpec::silent(1e-2), &s, 1).unwrap().len(), 1);
    }

    #[test]
    fn relaxation_units_scale_the_clock() {
        let p = LandauStuartParams::new(0.5, 3.0);
        let s = LyapunovSettings::new(100.0, 0.01).in_relaxation_units();
        let e = estimate_lambda_max(&p, &NoiseSpec::external(0.1, 2, 0.01), &s).unwrap();
        assert!((e.t_total - 100.0).abs() < 1e-6);
        assert!((effective_burn_in(&p, &s).unwrap() - 20.0).abs() < 1e-12);
        let q = LandauStuartParams::new(0.0, 3.0);
        assert!(estimate_lambda_max(&q, &NoiseSpec::external(0.1, 2, 0.01), &s).is_err());
    }

    #[test]
    fn landau_stuart_forcing_without_shear_gives_a_sink() {
        let p = LandauStuartParams::new(1.0, 0.0);
        let s = LyapunovSettings::new(400.0, 1e-2);
        let e = estimate_lambda_max(&p, &NoiseSpec::external(0.5, 7, 1e-2), &s).unwrap();
        assert!(e.lambda_max < -2.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn numeric_floquet_matches_closed_form() {
        for j in [1e-4, 1e-2, 1.0, 5.0, 20.0] {
            let m: Model = LaserParams::new(j, 3.0).into();
            let num = floquet_spectrum_numeric(&m).unwrap();
            let exact = floquet_closed_form(&m).unwrap();
            assert_eq!(num.regime, exact.regime);
            assert!(num.mu1.abs() < 1e-6 * exact.mu2.norm());
            for (a, b) in [(num.mu2, exact.mu2), (num.mu3.unwrap(), exact.mu3.unwrap())] {
                assert!((a - b).norm() <= 1e-6 * b.norm(), "J={j}: {a} vs {b}");
            }
        }
        let ls = floquet_spectrum_numeric(&LandauStuartParams::new(2.0, 5.0).into()).unwrap();
        assert!((ls.mu2.re + 4.0).abs() < 1e-8);
        assert!(ls.mu1.abs() < 1e-8);
    }

    #[test]
    fn numeric_floquet_sees_overdamped_regime() {
        let m: Model = LaserParams::new(1e-5, 0.0).into();
        let num = floquet_spectrum_numeric(&m).unwrap();
        assert_eq!(num.regime, Regime::Overdamped);
        let exact = floquet_closed_form(&m).unwrap();
        assert!((num.mu2.re - exact.mu2.re).abs() < 1e-6 * exact.mu2.re.abs());
        assert!((num.mu3.unwrap().re - exact.mu3.unwrap().re).abs() < 1e-6 * exact.mu3.unwrap().re.abs());
        assert!(num.mu2.re != num.mu3.unwrap().re);
        assert!(floquet_spectrum_numeric(&LaserParams::new(-1.0, 0.0).into()).is_err());
    }

    #[test]
    fn gram_schmidt_spectrum_matches_real_parts() {
        let ls = lyapunov_spectrum(&LandauStuartParams::new(2.0, 1.0).into(), 200.0).unwrap();
        assert!(ls[0].abs() < 1e-3 && (ls[1] + 4.0).abs() < 4e-3, "{ls:?}");
        let laser = lyapunov_spectrum(&LaserParams::new(1.0, 0.0).into(), 400.0).unwrap();
        assert!(laser[0].abs() < 1e-3, "{laser:?}");
        assert!((laser[1] + 1.8825).abs() < 2e-2 && (laser[2] + 1.8825).abs() < 2e-2, "{laser:?}");
    }
}
