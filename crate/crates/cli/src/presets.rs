//! Desk-scale experiment presets.

use noisesync::bifurcation::{log_space, BisectionConfig};
use noisesync::ensemble::{EnsembleConfig, Forcing};
use noisesync::kicks::{KickSchedule, PhaseExperimentConfig};
use noisesync::{LandauStuartParams, LaserParams, LyapunovSettings, Model, PullbackConfig};

use crate::config::*;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub build: fn() -> ExperimentConfig,
}

pub const SEED: u64 = 20_240_917;

fn cfg(name: &str, experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        seed: SEED,
        workers: None,
        output_dir: None,
        experiment,
    }
}

/// Laser λ estimator used by the sweeps: horizon 100, step 1e-4.
pub fn laser_settings() -> LyapunovSettings {
    LyapunovSettings::new(100.0, 1e-4)
}

/// Landau–Stuart estimator in relaxation units.
pub fn ls_settings(horizon: f64) -> LyapunovSettings {
    let mut s = LyapunovSettings::new(horizon, 0.01).in_relaxation_units();
    s.burn_in = Some(20.0);
    s
}

fn laser(j: f64, alpha: f64) -> Model {
    LaserParams::new(j, alpha).into()
}

fn ls(j: f64, alpha: f64) -> Model {
    LandauStuartParams::new(j, alpha).into()
}

/// The 12-point J axis of the sign-structure maps with J = 1 added.
pub fn fig4_j_axis() -> Vec<f64> {
    let mut j = log_space(1e-4, 10.0, 12);
    j.push(1.0);
    j.sort_by(f64::total_cmp);
    j
}

fn fig4(name: &str, alpha: f64) -> ExperimentConfig {
    cfg(
        name,
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::Grid(GridSpec {
                eval: EvalSpec {
                    model: laser(1.0, alpha),
                    settings: laser_settings(),
                    dt_grid: None,
                },
                d_ext: AxisSpec::Log { log: [1e-3, 1e3, 12.0] },
                j: AxisSpec::List(fig4_j_axis()),
                alpha: AxisSpec::List(vec![alpha]),
                max_doublings: 2,
                k_sigma: 3.0,
            }),
        }),
    )
}

fn fig2(name: &str, forcing: Forcing, strengths: AxisSpec, histograms: bool, alphas: Vec<f64>) -> ExperimentConfig {
    cfg(
        name,
        Experiment::Ensemble(EnsembleExp {
            laser: LaserParams::new(5.0, 0.0),
            alphas,
            ensemble: EnsembleConfig::new(50, forcing),
            strengths: Some(strengths),
            histograms,
        }),
    )
}

fn fig5(name: &str, d_ext: f64) -> ExperimentConfig {
    let mut pb = PullbackConfig::new(30.0, vec![29.0, 28.0, 25.0, 20.0, 0.0], noisesync::pullback::DESK_POINTS, 1e-4);
    pb.cluster_radius = Some(1e-3);
    cfg(
        name,
        Experiment::Pullback(PullbackExp {
            model: laser(1.0, 3.0),
            noise: NoiseParams {
                d_ext,
                ..Default::default()
            },
            pullback: pb,
            lyapunov: laser_settings(),
        }),
    )
}

/// Bisection on raw signs; common random numbers make λ smooth in J.
pub fn sign_bisection() -> BisectionConfig {
    BisectionConfig {
        rel_width: 0.02,
        k_sigma: 0.0,
        max_iter: 40,
    }
}

pub fn fig6a() -> ExperimentConfig {
    cfg(
        "fig6a",
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::Locus(LocusSpec {
                eval: EvalSpec {
                    model: ls(1.0, 6.0),
                    settings: ls_settings(4000.0),
                    dt_grid: None,
                },
                alpha: 6.0,
                d_ext: AxisSpec::Log { log: [1e-4, 1e-1, 7.0] },
                window: [0.3, 4.0],
                n_scan: 16,
                bisection: sign_bisection(),
                weak_cap: None,
            }),
        }),
    )
}

fn fig6b() -> ExperimentConfig {
    cfg(
        "fig6b",
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::Grid(GridSpec {
                eval: EvalSpec {
                    model: ls(1.0, 0.0),
                    settings: ls_settings(2000.0),
                    dt_grid: None,
                },
                d_ext: AxisSpec::Log { log: [1e-3, 10.0, 9.0] },
                j: AxisSpec::List(vec![0.5, 1.0, 2.0]),
                alpha: AxisSpec::Lin { lin: [0.0, 10.0, 11.0] },
                max_doublings: 1,
                k_sigma: 3.0,
            }),
        }),
    )
}

fn fig6c() -> ExperimentConfig {
    cfg(
        "fig6c",
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::Grid(GridSpec {
                eval: EvalSpec {
                    model: laser(1.0, 0.0),
                    settings: laser_settings(),
                    dt_grid: None,
                },
                d_ext: AxisSpec::Log { log: [1e-3, 1e3, 9.0] },
                j: AxisSpec::List(vec![1.0]),
                alpha: AxisSpec::Lin { lin: [0.0, 5.0, 6.0] },
                max_doublings: 2,
                k_sigma: 3.0,
            }),
        }),
    )
}

/// Laser α ladder against the Landau–Stuart model at matched forcing.
pub fn fig6d() -> ExperimentConfig {
    cfg(
        "fig6d",
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::Compare(CompareSpec {
                laser: EvalSpec {
                    model: laser(1.0, 0.0),
                    settings: laser_settings(),
                    dt_grid: None,
                },
                landau_stuart: EvalSpec {
                    model: ls(1.0, 0.0),
                    settings: ls_settings(4000.0),
                    dt_grid: None,
                },
                alpha: AxisSpec::List(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
                j: AxisSpec::List(vec![1.0]),
                d_ext: AxisSpec::Log { log: [1e-2, 1e2, 9.0] },
                k_sigma: 2.0,
            }),
        }),
    )
}

/// Ridge α_min of the Landau–Stuart model, its branches and the large-D
/// asymptote.
pub fn fig7() -> ExperimentConfig {
    let mut asym = LyapunovSettings::new(4000.0, 0.005);
    asym.burn_in = Some(20.0);
    cfg(
        "fig7",
        Experiment::BifurcationSweep(BifurcationExp {
            analysis: Analysis::AlphaMin(AlphaMinSpec {
                eval: EvalSpec {
                    model: ls(1.0, 5.0),
                    settings: ls_settings(8000.0),
                    dt_grid: None,
                },
                probes: [0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7, 0.85, 1.0].iter().map(|&d| [d, 1.0]).collect(),
                range: [4.5, 6.5],
                tol: 0.02,
                k_sigma: 0.0,
                locus: Some(RidgeLocus {
                    j: AxisSpec::List(vec![0.0625, 0.25, 1.0, 4.0, 16.0]),
                    bisection: sign_bisection(),
                }),
                asymptote: Some(AsymptoteSpec {
                    settings: asym,
                    range: [6.0, 12.0],
                    tol: 0.05,
                }),
            }),
        }),
    )
}

fn fig9() -> ExperimentConfig {
    cfg(
        "fig9",
        Experiment::Kicks(KicksExp {
            protocol: KickProtocol::Set(KickSetSpec {
                model: laser(1.0, 0.0),
                alphas: vec![0.0, 2.0],
                n_points: 2000,
                schedule: KickSchedule::quarter_periods(),
                snapshot_times: vec![0.0, 0.1, 0.2, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7, 0.8],
                dt: 1e-4,
            }),
        }),
    )
}

fn fig10() -> ExperimentConfig {
    cfg(
        "fig10",
        Experiment::Kicks(KicksExp {
            protocol: KickProtocol::PhaseDifference(PhaseDiffSpec {
                alpha: 3.0,
                config: PhaseExperimentConfig::new(1.0),
            }),
        }),
    )
}

pub fn all() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig2a",
            description: "order parameter against monochromatic forcing K, M = 50, J = 5, alpha 0 and 3",
            build: || fig2(
                "fig2a",
                Forcing::Monochromatic { k: 0.0, nu_ext: None },
                AxisSpec::Log { log: [1e-4, 1e3, 8.0] },
                false,
                vec![0.0, 3.0],
            ),
        },
        Preset {
            name: "fig2b",
            description: "order parameter against white-noise intensity D_ext, M = 50, J = 5, alpha 0 and 3",
            build: || fig2(
                "fig2b",
                Forcing::WhiteNoise { d_ext: 0.0 },
                AxisSpec::Log { log: [1e-5, 1e2, 8.0] },
                false,
                vec![0.0, 3.0],
            ),
        },
        Preset {
            name: "fig3",
            description: "I_M histograms under white noise for alpha 0 and 3 at D_ext 1 and 10",
            build: || fig2("fig3", Forcing::WhiteNoise { d_ext: 0.0 }, AxisSpec::List(vec![1.0, 10.0]), true, vec![0.0, 3.0]),
        },
        Preset {
            name: "fig4a",
            description: "laser lambda_max sign map over D_ext and J at alpha = 0 (checkpointed)",
            build: || fig4("fig4a", 0.0),
        },
        Preset {
            name: "fig4b",
            description: "laser lambda_max sign map over D_ext and J at alpha = 3 (checkpointed)",
            build: || fig4("fig4b", 3.0),
        },
        Preset {
            name: "fig5",
            description: "pullback snapshots, laser alpha = 3, J = 1, D_ext = 0.1 (random sink)",
            build: || fig5("fig5", 0.1),
        },
        Preset {
            name: "fig5-sink",
            description: "pullback snapshots, laser alpha = 3, J = 1, D_ext = 0.1",
            build: || fig5("fig5-sink", 0.1),
        },
        Preset {
            name: "fig5-rsa",
            description: "pullback snapshots, laser alpha = 3, J = 1, D_ext = 0.5",
            build: || fig5("fig5-rsa", 0.5),
        },
        Preset {
            name: "fig6a",
            description: "Landau-Stuart d-bifurcation branches at alpha = 6 and their power-law fits",
            build: fig6a,
        },
        Preset {
            name: "fig6b",
            description: "Landau-Stuart lambda_max over (D_ext, alpha) at J = 0.5, 1, 2",
            build: fig6b,
        },
        Preset {
            name: "fig6c",
            description: "laser lambda_max over (D_ext, alpha) at J = 1",
            build: fig6c,
        },
        Preset {
            name: "fig6d",
            description: "laser against Landau-Stuart sign structure on an alpha ladder, matched forcing",
            build: fig6d,
        },
        Preset {
            name: "fig7",
            description: "Landau-Stuart ridge alpha_min, branch constants there, large-D asymptote",
            build: fig7,
        },
        Preset {
            name: "fig9",
            description: "kicked circle of 2000 laser states, alpha 0 and 2, fold counts",
            build: fig9,
        },
        Preset {
            name: "fig10",
            description: "phase difference of two trajectories, laser alpha 0 and 3, Landau-Stuart alpha 3",
            build: fig10,
        },
    ]
}

pub fn find(name: &str) -> Option<ExperimentConfig> {
    all().into_iter().find(|p| p.name == name).map(|p| (p.build)())
}
