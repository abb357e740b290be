//! Simulation of noise-forced limit-cycle oscillators: the class-B laser
//! rate equations and the Landau–Stuart model, with Lyapunov, pullback,
//! bifurcation, ensemble and kick analyses.

pub mod bifurcation;
pub mod ensemble;
pub mod error;
pub mod integrate;
pub mod kicks;
pub mod lyapunov;
pub mod models;
pub mod noise;
pub mod pullback;
pub mod sweep;

pub use bifurcation::{BisectionConfig, Evaluator, LocusPoint, PowerLawFit, SweepGrid, SweepRow};
pub use ensemble::{EnsembleConfig, Forcing, OrderParameterResult, SyncClass};
pub use error::{Error, Result};
pub use integrate::{IntegratorConfig, Scheme, Stepper, Tone, Trace};
pub use kicks::{KickMode, KickSchedule, KickSnapshot, PhaseCurve};
pub use lyapunov::{LyapunovEstimate, LyapunovSettings};
pub use models::{FloquetSet, LandauStuartParams, LaserParams, Model, Regime, State, VectorField};
pub use noise::{Channel, NoisePath, NoiseSpec};
pub use pullback::{AttractorClass, PullbackConfig, SnapshotSummary};
pub use sweep::{Checkpoint, RunOptions};
