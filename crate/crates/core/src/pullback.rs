//! Pullback snapshots: clouds of initial conditions released at earlier and
//! earlier times under one noise realisation, observed at a fixed time.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::integrate::{IntegratorConfig, Scheme, Stepper};
use crate::lyapunov::LyapunovEstimate;
use crate::models::{State, VectorField};
use crate::noise::{NoisePath, NoiseSpec};

/// Full-resolution ensemble size.
pub const DEFAULT_POINTS: usize = 10_000;
/// Reduced ensemble size for quick runs.
pub const DESK_POINTS: usize = 2_500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackConfig {
    pub t_snapshot: f64,
    /// Release times, each earlier than `t_snapshot`.
    pub t0_list: Vec<f64>,
    /// Requested ensemble size; rounded up to a square grid.
    pub n_points: usize,
    /// Half-width of the seeding box; `None` means 2√J.
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Inversion of every seeded point.
    #[serde(default)]
    pub n_initial: f64,
    /// Linkage radius for cluster counting; `None` means 1e-3·√J.
    #[serde(default)]
    pub cluster_radius: Option<f64>,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl PullbackConfig {
    pub fn new(t_snapshot: f64, t0_list: Vec<f64>, n_points: usize, dt: f64) -> Self {
        Self {
            t_snapshot,
            t0_list,
            n_points,
            half_width: None,
            n_initial: 0.0,
            cluster_radius: None,
            dt,
            scheme: Scheme::StochasticHeun,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(invalid("n_points", "need at least two points"));
        }
        if self.t0_list.is_empty() {
            return Err(invalid("t0_list", "must not be empty"));
        }
        if let Some(t0) = self.t0_list.iter().find(|&&t0| !(t0 < self.t_snapshot)) {
            return Err(invalid("t0_list", format!("release time {t0} is not before the snapshot")));
        }
        if let Some(w) = self.half_width {
            if !(w > 0.0) {
                return Err(invalid("half_width", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub t0: f64,
    pub t_snapshot: f64,
    /// Surviving members at the snapshot time.
    pub points: Vec<State>,
    /// Largest pairwise distance in the E-plane.
    pub diameter: f64,
    /// max |E| − min |E| over the snapshot.
    pub radial_spread: f64,
    pub cluster_count: usize,
    pub cluster_radius: f64,
    /// Members lost to blow-up.
    pub excluded: usize,
}

/// Square grid of E-plane points over `[-w, w]²` with `side = ⌈√n⌉`.
pub fn seed_grid(n: usize, half_width: f64, n_initial: f64) -> Vec<State> {
    let side = (n as f64).sqrt().ceil() as usize;
    let side = side.max(2);
    let step = 2.0 * half_width / (side - 1) as f64;
    let mut out = Vec::with_capacity(side * side);
    for i in 0..side {
        for k in 0..side {
            out.push(State::new(-half_width + k as f64 * step, -half_width + i as f64 * step, n_initial, 0.0));
        }
    }
    out
}

/// Largest pairwise E-plane distance.
pub fn diameter(points: &[State]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a.e_re - b.e_re).powi(2) + (a.e_im - b.e_im).powi(2);
            best = best.max(d);
        }
    }
    best.sqrt()
}

/// Single-linkage cluster count at radius `r` in the E-plane.
pub fn cluster_count(points: &[State], r: f64) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let r2 = r * r;
    for i in 0..n {
        for k in i + 1..n {
            let d = (points[i].e_re - points[k].e_re).powi(2) + (points[i].e_im - points[k].e_im).powi(2);
            if d <= r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, k));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

fn summarise(t0: f64, t_snapshot: f64, points: Vec<State>, excluded: usize, radius: f64) -> SnapshotSummary {
    let (lo, hi) = points
        .iter()
        .map(|p| p.amplitude())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a), hi.max(a)));
    SnapshotSummary {
        t0,
        t_snapshot,
        diameter: diameter(&points),
        radial_spread: if points.is_empty() { 0.0 } else { hi - lo },
        cluster_count: cluster_count(&points, radius),
        cluster_radius: radius,
        excluded,
        points,
    }
}

/// Integrate the seeded cloud from every release time to the snapshot time
/// under one noise realisation.
pub fn pullback_snapshot<F: VectorField + ?Sized>(
    model: &F,
    noise: &NoiseSpec,
    cfg: &PullbackConfig,
) -> Result<Vec<SnapshotSummary>> {
    cfg.validate()?;
    let path = NoisePath::new(*noise)?;
    let icfg = IntegratorConfig::new(cfg.dt, cfg.scheme);
    // Surface configuration errors before fanning out.
    Stepper::new(model, icfg, Some(&path))?;
    let scale = model.pump().abs().sqrt().max(1e-12);
    let half_width = cfg.half_width.unwrap_or(2.0 * scale);
    let radius = cfg.cluster_radius.unwrap_or(1e-3 * scale);
    let seeds = seed_grid(cfg.n_points, half_width, cfg.n_initial);

    cfg.t0_list
        .iter()
        .map(|&t0| {
            let results: Vec<Option<State>> = seeds
                .par_iter()
                .map(|s0| {
                    let mut s = State { t: t0, ..*s0 };
                    let mut st = Stepper::new(model, icfg, Some(&path)).ok()?;
                    st.advance_to(&mut s, cfg.t_snapshot).ok()?;
                    Some(s)
                })
                .collect();
            let excluded = results.iter().filter(|r| r.is_none()).count();
            let points = results.into_iter().flatten().collect();
            Ok(summarise(t0, cfg.t_snapshot, points, excluded, radius))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorClass {
    RandomSink,
    RandomStrangeAttractor,
    Inconclusive,
}

impl AttractorClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttractorClass::RandomSink => "random_sink",
            AttractorClass::RandomStrangeAttractor => "random_strange_attractor",
            AttractorClass::Inconclusive => "inconclusive",
        }
    }
}

/// Classify by the sign of λ beyond two standard errors, checked against the
/// snapshot trend. Summaries are ordered by release time internally.
pub fn classify_attractor(summaries: &[SnapshotSummary], est: &LyapunovEstimate) -> AttractorClass {
    let by_sign = match est.significant_sign(2.0) {
        Some(s) if s < 0.0 => AttractorClass::RandomSink,
        Some(_) => AttractorClass::RandomStrangeAttractor,
        None => return AttractorClass::Inconclusive,
    };
    let earliest = summaries.iter().min_by(|a, b| a.t0.total_cmp(&b.t0));
    let latest = summaries.iter().max_by(|a, b| a.t0.total_cmp(&b.t0));
    let (Some(early), Some(late)) = (earliest, latest) else {
        return by_sign;
    };
    let consistent = match by_sign {
        AttractorClass::RandomSink => early.diameter <= late.diameter,
        _ => early.cluster_count > 1,
    };
    if consistent {
        by_sign
    } else {
        AttractorClass::Inconclusive
    }
}

pub const SNAPSHOT_CSV_HEADER: &str = "t0,t,e_re,e_im,n";

/// Write the point clouds of all summaries as CSV.
pub fn write_snapshots_csv<W: Write>(summaries: &[SnapshotSummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SNAPSHOT_CSV_HEADER}")?;
    for s in summaries {
        for p in &s.points {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", s.t0, p.t, p.e_re, p.e_im, p.n)?;
        }
    }
    Ok(())
}
