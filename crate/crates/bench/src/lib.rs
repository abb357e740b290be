//! Fixtures shared by the benchmarks.

use noisesync::{IntegratorConfig, LaserParams, LandauStuartParams, LyapunovSettings, NoiseSpec, Scheme, State};

/// Laser at the pump and shear of the pullback reference point.
pub fn laser() -> LaserParams {
    LaserParams::new(1.0, 3.0)
}

pub fn landau_stuart() -> LandauStuartParams {
    LandauStuartParams::new(1.0, 6.0)
}

pub fn on_cycle(j: f64) -> State {
    State::on_cycle(j, 0.3)
}

pub fn heun(dt: f64) -> IntegratorConfig {
    IntegratorConfig::new(dt, Scheme::StochasticHeun)
}

pub fn forcing(d_ext: f64, dt: f64) -> NoiseSpec {
    NoiseSpec::external(d_ext, 42, dt)
}

/// A short estimator run: one time unit after a one-unit burn-in.
pub fn short_lyapunov() -> LyapunovSettings {
    LyapunovSettings::new(1.0, 1e-4).with_burn_in(1.0)
}
