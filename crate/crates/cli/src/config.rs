use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use noisesync::bifurcation::{log_space, BisectionConfig, Evaluator};
use noisesync::ensemble::EnsembleConfig;
use noisesync::kicks::{KickSchedule, PhaseExperimentConfig};
use noisesync::sweep::hash_json;
use noisesync::{LaserParams, LyapunovSettings, Model, NoiseSpec, PullbackConfig};

use crate::CliError;

/// A complete experiment description, read from TOML or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all logical cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output directory below the output root; `name` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Floquet(FloquetExp),
    Lyapunov(LyapunovExp),
    Pullback(PullbackExp),
    #[serde(alias = "bifurcation-sweep")]
    BifurcationSweep(BifurcationExp),
    Ensemble(EnsembleExp),
    Kicks(KicksExp),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Floquet(_) => "floquet",
            Experiment::Lyapunov(_) => "lyapunov",
            Experiment::Pullback(_) => "pullback",
            Experiment::BifurcationSweep(_) => "bifurcation_sweep",
            Experiment::Ensemble(_) => "ensemble",
            Experiment::Kicks(_) => "kicks",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetExp {
    pub model: Model,
    /// Also compute the spectrum from the monodromy matrix.
    #[serde(default = "yes")]
    pub numeric: bool,
}

fn yes() -> bool {
    true
}

/// Noise intensities; the seed comes from the experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    #[serde(default)]
    pub d_ext: f64,
    #[serde(default)]
    pub d_e: f64,
    #[serde(default)]
    pub d_n: f64,
    /// Noise grid; the integrator step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_grid: Option<f64>,
}

impl NoiseParams {
    pub fn spec(&self, seed: u64, dt: f64) -> NoiseSpec {
        NoiseSpec {
            d_ext: self.d_ext,
            d_e: self.d_e,
            d_n: self.d_n,
            seed,
            dt_grid: self.dt_grid.unwrap_or(dt),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovExp {
    pub model: Model,
    #[serde(default)]
    pub noise: NoiseParams,
    pub settings: LyapunovSettings,
    /// Independent noise realisations.
    #[serde(default = "one")]
    pub seeds: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackExp {
    pub model: Model,
    #[serde(default)]
    pub noise: NoiseParams,
    pub pullback: PullbackConfig,
    /// Settings of the λ estimate used for classification.
    pub lyapunov: LyapunovSettings,
}

/// An axis given as a list or as a log/linear range `[from, to, count]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    List(Vec<f64>),
    Log { log: [f64; 3] },
    Lin { lin: [f64; 3] },
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AxisSpec::List(v) => v.clone(),
            AxisSpec::Log { log } => log_space(log[0], log[1], log[2] as usize),
            AxisSpec::Lin { lin } => {
                let n = lin[2] as usize;
                if n <= 1 {
                    return vec![lin[0]];
                }
                (0..n).map(|i| lin[0] + (lin[1] - lin[0]) * i as f64 / (n - 1) as f64).collect()
            }
        }
    }

    fn check(&self, name: &str) -> Result<(), CliError> {
        let ok = match self {
            AxisSpec::List(v) => !v.is_empty(),
            AxisSpec::Log { log } => log[0] > 0.0 && log[1] > 0.0 && log[2] >= 1.0 && log[2].fract() == 0.0,
            AxisSpec::Lin { lin } => lin[2] >= 1.0 && lin[2].fract() == 0.0,
        };
        if !ok {
            return Err(CliError::Config(format!("{name}: malformed axis {self:?}")));
        }
        let v = self.values();
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config(format!("{name}: axis values must be finite and strictly increasing")));
        }
        Ok(())
    }
}

/// Model and estimator settings shared by all λ evaluations of an analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub model: Model,
    pub settings: LyapunovSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_grid: Option<f64>,
}

impl EvalSpec {
    pub fn evaluator(&self, seed: u64) -> Evaluator {
        Evaluator {
            dt_grid: self.dt_grid,
            ..Evaluator::new(self.model, self.settings, seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationExp {
    pub analysis: Analysis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Analysis {
    /// λ on a rectangular grid, checkpointed.
    Grid(GridSpec),
    /// d-bifurcation branches in J and their power-law fits.
    Locus(LocusSpec),
    /// Onset α of a positive-λ region.
    AlphaMin(AlphaMinSpec),
    /// Laser against the Landau–Stuart model at matched forcing.
    Compare(CompareSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub eval: EvalSpec,
    pub d_ext: AxisSpec,
    pub j: AxisSpec,
    pub alpha: AxisSpec,
    #[serde(default)]
    pub max_doublings: u32,
    #[serde(default = "three")]
    pub k_sigma: f64,
}

fn three() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusSpec {
    pub eval: EvalSpec,
    pub alpha: f64,
    pub d_ext: AxisSpec,
    /// J scan range as multiples of √(2 D_ext).
    pub window: [f64; 2],
    pub n_scan: usize,
    #[serde(default)]
    pub bisection: BisectionConfig,
    /// Drop points whose mean |E|² departs from J by more than this fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaMinSpec {
    pub eval: EvalSpec,
    /// `[d_ext, j]` probe points.
    pub probes: Vec<[f64; 2]>,
    pub range: [f64; 2],
    pub tol: f64,
    #[serde(default)]
    pub k_sigma: f64,
    /// Trace the branches at the upper end of the final bracket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<RidgeLocus>,
    /// Also locate the large-D asymptote.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptote: Option<AsymptoteSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeLocus {
    /// Pump values; at each the scan covers the probe ratios D_ext/J².
    pub j: AxisSpec,
    #[serde(default)]
    pub bisection: BisectionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoteSpec {
    pub settings: LyapunovSettings,
    pub range: [f64; 2],
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub laser: EvalSpec,
    pub landau_stuart: EvalSpec,
    pub alpha: AxisSpec,
    pub j: AxisSpec,
    /// Laser intensities; the Landau–Stuart model gets D_ext/(gγ).
    pub d_ext: AxisSpec,
    #[serde(default = "two")]
    pub k_sigma: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleExp {
    /// Laser parameters; `alpha` is replaced by each entry of `alphas`.
    pub laser: LaserParams,
    pub alphas: Vec<f64>,
    pub ensemble: EnsembleConfig,
    /// Forcing strengths; the one in `ensemble.forcing` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strengths: Option<AxisSpec>,
    #[serde(default)]
    pub histograms: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KicksExp {
    pub protocol: KickProtocol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KickProtocol {
    /// Kicked circle of initial conditions.
    Set(KickSetSpec),
    /// Two trajectories on different isochrones.
    PhaseDifference(PhaseDiffSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickSetSpec {
    /// Model; `alpha` is replaced by each entry of `alphas`.
    pub model: Model,
    pub alphas: Vec<f64>,
    pub n_points: usize,
    pub schedule: KickSchedule,
    pub snapshot_times: Vec<f64>,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiffSpec {
    pub alpha: f64,
    pub config: PhaseExperimentConfig,
}

fn core(e: noisesync::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn check_eval(e: &EvalSpec) -> Result<(), CliError> {
    e.model.validate().map_err(core)?;
    e.settings.validate().map_err(core)
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("JSON: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(format!("TOML: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hash of everything that affects numeric output.
    pub fn numeric_hash(&self) -> String {
        hash_json(&(&self.experiment, self.seed)).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Config("name: must be a non-empty plain file name".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers: must be at least 1".into()));
        }
        match &self.experiment {
            Experiment::Floquet(f) => f.model.validate().map_err(core),
            Experiment::Lyapunov(l) => {
                l.model.validate().map_err(core)?;
                l.settings.validate().map_err(core)?;
                l.noise.spec(self.seed, l.settings.dt).validate().map_err(core)?;
                if l.seeds == 0 {
                    return Err(CliError::Config("seeds: must be at least 1".into()));
                }
                Ok(())
            }
            Experiment::Pullback(p) => {
                p.model.validate().map_err(core)?;
                p.pullback.validate().map_err(core)?;
                p.lyapunov.validate().map_err(core)?;
                p.noise.spec(self.seed, p.pullback.dt).validate().map_err(core)
            }
            Experiment::BifurcationSweep(b) => match &b.analysis {
                Analysis::Grid(g) => {
                    check_eval(&g.eval)?;
                    g.d_ext.check("d_ext")?;
                    g.j.check("j")?;
                    g.alpha.check("alpha")
                }
                Analysis::Locus(l) => {
                    check_eval(&l.eval)?;
                    l.d_ext.check("d_ext")?;
                    check_window(l.window, l.n_scan)
                }
                Analysis::AlphaMin(a) => {
                    check_eval(&a.eval)?;
                    if a.probes.is_empty() || !(a.range[1] > a.range[0]) || !(a.tol > 0.0) {
                        return Err(CliError::Config("alpha_min: need probes, an increasing range and tol > 0".into()));
                    }
                    if a.probes.iter().any(|p| !(p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite())) {
                        return Err(CliError::Config("alpha_min: probe points need D_ext > 0 and J > 0".into()));
                    }
                    if let Some(l) = &a.locus {
                        l.j.check("locus.j")?;
                        if l.j.values().iter().any(|j| !(*j > 0.0)) {
                            return Err(CliError::Config("locus.j: pump values must be positive".into()));
                        }
                    }
                    if let Some(s) = &a.asymptote {
                        s.settings.validate().map_err(core)?;
                    }
                    Ok(())
                }
                Analysis::Compare(c) => {
                    check_eval(&c.laser)?;
                    check_eval(&c.landau_stuart)?;
                    if !c.laser.model.is_laser() || c.landau_stuart.model.is_laser() {
                        return Err(CliError::Config("compare: `laser` must be a laser and `landau_stuart` a Landau–Stuart model".into()));
                    }
                    c.alpha.check("alpha")?;
                    c.j.check("j")?;
                    c.d_ext.check("d_ext")
                }
            },
            Experiment::Ensemble(e) => {
                e.laser.validate().map_err(core)?;
                e.ensemble.validate().map_err(core)?;
                if e.alphas.is_empty() {
                    return Err(CliError::Config("alphas: must not be empty".into()));
                }
                if let Some(s) = &e.strengths {
                    s.check("strengths")?;
                }
                Ok(())
            }
            Experiment::Kicks(k) => match &k.protocol {
                KickProtocol::Set(s) => {
                    s.model.validate().map_err(core)?;
                    s.schedule.validate().map_err(core)?;
                    if s.n_points < 3 || s.alphas.is_empty() || !(s.dt > 0.0) {
                        return Err(CliError::Config("kicks: need n_points >= 3, alphas and dt > 0".into()));
                    }
                    Ok(())
                }
                KickProtocol::PhaseDifference(p) => {
                    if !(p.config.t_end > 0.0) || p.config.samples == 0 {
                        return Err(CliError::Config("phase_difference: need t_end > 0 and samples > 0".into()));
                    }
                    Ok(())
                }
            },
        }
    }
}

fn check_window(w: [f64; 2], n: usize) -> Result<(), CliError> {
    if !(w[0] > 0.0 && w[1] > w[0]) || n < 2 {
        return Err(CliError::Config("window: need 0 < low < high and n_scan >= 2".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn every_preset_round_trips_through_toml_and_json() {
        for p in presets::all() {
            let cfg = (p.build)();
            cfg.validate().unwrap();
            let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{}", p.name);
            let back = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg, "{}", p.name);
        }
    }

    #[test]
    fn unknown_fields_are_reported() {
        let text = presets::find("fig10").unwrap().to_toml().replace("alpha = 3.0", "alpah = 3.0");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("alpah"), "{err}");
    }

    #[test]
    fn axes() {
        assert_eq!(AxisSpec::Lin { lin: [0.0, 1.0, 3.0] }.values(), vec![0.0, 0.5, 1.0]);
        assert_eq!(AxisSpec::Log { log: [1.0, 100.0, 3.0] }.values().len(), 3);
        assert!(AxisSpec::List(vec![2.0, 1.0]).check("x").is_err());
    }
}
