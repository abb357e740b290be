use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use noisesync::bifurcation::{
    compare_models, find_alpha_min, large_d_asymptote, ridge_branches, sweep_csv, sweep_lambda_checkpointed, trace_branches, BifurcationLocus,
    LocusPoint, SweepGrid,
};
use noisesync::ensemble::{run_ensemble, Forcing};
use noisesync::kicks::{circle_set, evolve_kicked_set, phase_curves_csv, phase_difference_experiment, winding_number};
use noisesync::lyapunov::{estimate_lambda_max, floquet_spectrum_numeric, lambda_vs_seed, pooled_stderr};
use noisesync::models::{floquet_closed_form, regime_boundaries};
use noisesync::pullback::{classify_attractor, pullback_snapshot, write_snapshots_csv};
use noisesync::sweep::RunOptions;
use noisesync::{FloquetSet, Model, VectorField};

use crate::config::*;
use crate::output::{output_dir_for, Output, CHECKPOINT, CONFIG_ECHO};
use crate::CliError;

/// Flags that change how, not what, a run computes.
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    /// Stop a sweep after this many newly computed jobs.
    pub stop_after_jobs: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub complete: bool,
    /// Human-readable result lines.
    pub lines: Vec<String>,
}

/// Run `cfg` below `root`, writing artifacts and a manifest.
pub fn run(cfg: &ExperimentConfig, root: &Path, flags: &RunFlags) -> Result<RunReport, CliError> {
    run_in(cfg, output_dir_for(cfg, root), flags)
}

fn run_in(cfg: &ExperimentConfig, dir: PathBuf, flags: &RunFlags) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let mut out = Output::create(dir)?;
    out.write_json(CONFIG_ECHO, cfg)?;
    let mut lines = Vec::new();
    let complete = match &cfg.experiment {
        Experiment::Floquet(f) => floquet(f, &mut out, &mut lines)?,
        Experiment::Lyapunov(l) => lyapunov(l, cfg.seed, &mut out, &mut lines)?,
        Experiment::Pullback(p) => pullback(p, cfg.seed, &mut out, &mut lines)?,
        Experiment::BifurcationSweep(b) => bifurcation(b, cfg, flags, &mut out, &mut lines)?,
        Experiment::Ensemble(e) => ensemble(e, cfg.seed, &mut out, &mut lines)?,
        Experiment::Kicks(k) => kicks(k, &mut out, &mut lines)?,
    };
    out.finish(cfg, complete)?;
    Ok(RunReport {
        dir: out.dir.clone(),
        complete,
        lines,
    })
}

/// Continue the run that owns `checkpoint`, using the config echoed next to it.
pub fn resume(checkpoint: &Path, flags: &RunFlags) -> Result<RunReport, CliError> {
    let dir = checkpoint
        .parent()
        .ok_or_else(|| CliError::Checkpoint(format!("{}: no parent directory", checkpoint.display())))?;
    let echo = dir.join(CONFIG_ECHO);
    let text = std::fs::read_to_string(&echo).map_err(|e| CliError::Checkpoint(format!("{}: {e}", echo.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|e| CliError::Checkpoint(format!("{}: {e}", echo.display())))?;
    noisesync::Checkpoint::load(checkpoint, Some(&cfg.numeric_hash()))?;
    // Resume in place, whatever the current output root.
    run_in(&cfg, dir.to_path_buf(), flags)
}

fn fmt_complex_pair(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re:.4}")
    } else {
        format!("{re:.4} ± {:.4}i", im.abs())
    }
}

fn floquet_lines(label: &str, f: &FloquetSet) -> Vec<String> {
    let mut v = vec![format!("{label}: mu1 = {}", f.mu1)];
    match f.mu3 {
        Some(m3) if m3.im != 0.0 && (m3.im + f.mu2.im).abs() < 1e-9 * m3.im.abs().max(1.0) => {
            v.push(format!("{label}: mu2,3 = {}", fmt_complex_pair(f.mu2.re, f.mu2.im)));
        }
        Some(m3) => {
            v.push(format!("{label}: mu2 = {}", fmt_complex_pair(f.mu2.re, f.mu2.im)));
            v.push(format!("{label}: mu3 = {}", fmt_complex_pair(m3.re, m3.im)));
        }
        None => v.push(format!("{label}: mu2 = {}", fmt_complex_pair(f.mu2.re, f.mu2.im))),
    }
    v.push(format!("{label}: regime = {:?}", f.regime));
    v
}

fn floquet(f: &FloquetExp, out: &mut Output, lines: &mut Vec<String>) -> Result<bool, CliError> {
    let closed = floquet_closed_form(&f.model)?;
    lines.extend(floquet_lines("closed form", &closed));
    let numeric = if f.numeric {
        let n = floquet_spectrum_numeric(&f.model)?;
        lines.extend(floquet_lines("numeric", &n));
        Some(n)
    } else {
        None
    };
    let boundaries = match f.model {
        Model::Laser(p) => Some(regime_boundaries(p.gamma, p.g)),
        Model::LandauStuart(_) => None,
    };
    out.write_json(
        "floquet.json",
        &json!({ "model": f.model, "closed_form": closed, "numeric": numeric, "regime_boundaries": boundaries }),
    )?;
    Ok(true)
}

fn lyapunov(l: &LyapunovExp, seed: u64, out: &mut Output, lines: &mut Vec<String>) -> Result<bool, CliError> {
    let spec = l.noise.spec(seed, l.settings.dt);
    let panel = if l.seeds == 1 {
        vec![estimate_lambda_max(&l.model, &spec, &l.settings)?]
    } else {
        lambda_vs_seed(&l.model, &spec, &l.settings, l.seeds)?
    };
    let mut csv = String::from("seed,lambda_max,stderr,horizon,n_renorm,mean_intensity\n");
    for e in &panel {
        let _ = writeln!(
            csv,
            "{},{:e},{:e},{:e},{},{:e}",
            e.seed_set[0], e.lambda_max, e.stderr, e.t_total, e.n_renorm, e.mean_intensity
        );
    }
    out.write("lyapunov.csv", csv.as_bytes())?;
    let mean = panel.iter().map(|e| e.lambda_max).sum::<f64>() / panel.len() as f64;
    let se = if panel.len() == 1 {
        panel[0].stderr
    } else {
        // Spread across realisations, falling back to the pooled error.
        let n = panel.len() as f64;
        let var = panel.iter().map(|e| (e.lambda_max - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt().max(pooled_stderr(&panel) / n.sqrt())
    };
    lines.push(format!("lambda_max = {mean:.6e} ± {se:.2e} ({} realisation(s))", panel.len()));
    out.write_json("summary.json", &json!({ "lambda_max": mean, "stderr": se, "realisations": panel.len() }))?;
    Ok(true)
}

fn pullback(p: &PullbackExp, seed: u64, out: &mut Output, lines: &mut Vec<String>) -> Result<bool, CliError> {
    let spec = p.noise.spec(seed, p.pullback.dt);
    let summaries = pullback_snapshot(&p.model, &spec, &p.pullback)?;
    let lspec = p.noise.spec(seed, p.lyapunov.dt);
    let est = estimate_lambda_max(&p.model, &lspec, &p.lyapunov)?;
    let class = classify_attractor(&summaries, &est);
    let mut buf = Vec::new();
    write_snapshots_csv(&summaries, &mut buf)?;
    out.write("snapshots.csv", &buf)?;
    let mut csv = String::from("t0,t,n_points,diameter,radial_spread,cluster_count,cluster_radius,excluded\n");
    for s in &summaries {
        let _ = writeln!(
            csv,
            "{:e},{:e},{},{:e},{:e},{},{:e},{}",
            s.t0,
            s.t_snapshot,
            s.points.len(),
            s.diameter,
            s.radial_spread,
            s.cluster_count,
            s.cluster_radius,
            s.excluded
        );
        lines.push(format!("t0 = {}: diameter = {:.3e}, clusters = {}", s.t0, s.diameter, s.cluster_count));
    }
    out.write("pullback.csv", csv.as_bytes())?;
    lines.push(format!("lambda_max = {:.4e} ± {:.1e}", est.lambda_max, est.stderr));
    lines.push(format!("classification: {}", class.as_str()));
    out.write_json(
        "summary.json",
        &json!({ "classification": class, "lambda_max": est.lambda_max, "stderr": est.stderr }),
    )?;
    Ok(true)
}

const LOCUS_CSV_HEADER: &str =
    "alpha,d_ext,j,axis,lower,upper,lambda_lower,stderr_lower,lambda_upper,stderr_upper,branch,resolution_limited,mean_intensity";

fn locus_csv(points: &[LocusPoint]) -> String {
    let mut s = String::from(LOCUS_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:?},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e}",
            p.alpha,
            p.d_ext,
            p.j,
            p.axis,
            p.lower,
            p.upper,
            p.lambda_lower,
            p.stderr_lower,
            p.lambda_upper,
            p.stderr_upper,
            p.branch.map(|b| b.to_string()).unwrap_or_default(),
            p.resolution_limited,
            p.mean_intensity
        );
    }
    s
}

fn write_locus(locus: &BifurcationLocus, out: &mut Output, lines: &mut Vec<String>) -> Result<(), CliError> {
    out.write("locus.csv", locus_csv(&locus.points).as_bytes())?;
    out.write_json("fits.json", &locus.fits)?;
    for f in &locus.fits {
        lines.push(format!(
            "branch {}: slope = {:.4} ± {:.4}, C = {:.4} (slope fixed to 1: {:.4}), {} points",
            f.branch, f.slope, f.slope_stderr, f.c_free, f.c_fixed, f.n_points
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareRowOut {
    alpha: f64,
    #[serde(flatten)]
    row: noisesync::bifurcation::ComparisonRow,
}

fn bifurcation(
    b: &BifurcationExp,
    cfg: &ExperimentConfig,
    flags: &RunFlags,
    out: &mut Output,
    lines: &mut Vec<String>,
) -> Result<bool, CliError> {
    let seed = cfg.seed;
    match &b.analysis {
        Analysis::Grid(g) => {
            let grid = SweepGrid {
                evaluator: g.eval.evaluator(seed),
                d_ext: g.d_ext.values(),
                j: g.j.values(),
                alpha: g.alpha.values(),
                max_doublings: g.max_doublings,
                k_sigma: g.k_sigma,
            };
            let opts = RunOptions {
                checkpoint: Some(out.path(CHECKPOINT)),
                config_hash: cfg.numeric_hash(),
                stop_after: flags.stop_after_jobs,
            };
            let outcome = sweep_lambda_checkpointed(&grid, &opts)?;
            let total = grid.jobs().len();
            if !outcome.complete {
                lines.push(format!(
                    "sweep incomplete: {}/{} jobs done; continue with `noisesync resume {}`",
                    outcome.rows.len(),
                    total,
                    out.path(CHECKPOINT).display()
                ));
                return Ok(false);
            }
            out.write("sweep.csv", sweep_csv(&outcome.rows).as_bytes())?;
            let pos = outcome.rows.iter().filter(|r| r.converged() && r.lambda().unwrap_or(0.0) > 0.0).count();
            let neg = outcome.rows.iter().filter(|r| r.converged() && r.lambda().unwrap_or(0.0) < 0.0).count();
            let failed = outcome.rows.iter().filter(|r| r.result.is_err()).count();
            lines.push(format!("{total} points: {neg} converged negative, {pos} converged positive, {failed} failed"));
            Ok(true)
        }
        Analysis::Locus(l) => {
            let ev = l.eval.evaluator(seed);
            let locus = trace_branches(&ev, l.alpha, &l.d_ext.values(), (l.window[0], l.window[1]), l.n_scan, &l.bisection, l.weak_cap)?;
            write_locus(&locus, out, lines)?;
            Ok(true)
        }
        Analysis::AlphaMin(a) => {
            let ev = a.eval.evaluator(seed);
            let probes: Vec<(f64, f64)> = a.probes.iter().map(|p| (p[0], p[1])).collect();
            let am = find_alpha_min(&ev, &probes, (a.range[0], a.range[1]), a.tol, a.k_sigma)?;
            lines.push(format!("alpha_min = {:.4} (bracket [{:.4}, {:.4}])", am.alpha_min, am.bracket.0, am.bracket.1));
            let mut locus = None;
            if let Some(r) = &a.locus {
                let ratios: Vec<f64> = probes.iter().map(|&(d, j)| d / (j * j)).collect();
                let l = ridge_branches(&ev, am.bracket.1, &ratios, &r.j.values(), &r.bisection)?;
                write_locus(&l, out, lines)?;
                locus = Some(l.fits);
            }
            let asym = match &a.asymptote {
                Some(s) => {
                    let (v, br) = large_d_asymptote(&s.settings, seed, (s.range[0], s.range[1]), s.tol)?;
                    lines.push(format!("large-D asymptote: alpha = {v:.3} (bracket [{:.3}, {:.3}])", br.0, br.1));
                    Some(json!({ "alpha": v, "bracket": br }))
                }
                None => None,
            };
            out.write_json("alpha_min.json", &json!({ "alpha_min": am, "fits": locus, "asymptote": asym }))?;
            Ok(true)
        }
        Analysis::Compare(c) => {
            let laser = c.laser.evaluator(seed);
            let ls = c.landau_stuart.evaluator(seed);
            let (j, d) = (c.j.values(), c.d_ext.values());
            let mut rows = Vec::new();
            let mut intervals = String::from("alpha,j,laser_positive_intervals,landau_stuart_positive_intervals\n");
            let mut summary = Vec::new();
            for alpha in c.alpha.values() {
                let rep = compare_models(&laser, &ls, alpha, &j, &d, c.k_sigma)?;
                let lp: usize = rep.laser_positive_intervals.iter().map(|x| x.1).sum();
                let sp: usize = rep.ls_positive_intervals.iter().map(|x| x.1).sum();
                lines.push(format!(
                    "alpha = {alpha}: laser positive intervals = {lp}, Landau–Stuart = {sp}, sign discrepancies = {}",
                    rep.discrepancies
                ));
                for (a, b) in rep.laser_positive_intervals.iter().zip(&rep.ls_positive_intervals) {
                    let _ = writeln!(intervals, "{:e},{:e},{},{}", alpha, a.0, a.1, b.1);
                }
                summary.push(json!({ "alpha": alpha, "laser_positive_intervals": lp, "landau_stuart_positive_intervals": sp, "discrepancies": rep.discrepancies }));
                rows.extend(rep.rows.into_iter().map(|row| CompareRowOut { alpha, row }));
            }
            let mut csv = String::from("alpha,j,d_ext,d_ls,lambda_laser,stderr_laser,lambda_ls,stderr_ls,discrepancy\n");
            let o = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{:e},{:e},{:e},{:e},{},{},{},{},{}",
                    r.alpha,
                    r.row.j,
                    r.row.d_ext,
                    r.row.d_ls,
                    o(r.row.lambda_laser),
                    o(r.row.stderr_laser),
                    o(r.row.lambda_ls),
                    o(r.row.stderr_ls),
                    r.row.discrepancy
                );
            }
            out.write("comparison.csv", csv.as_bytes())?;
            out.write("intervals.csv", intervals.as_bytes())?;
            out.write_json("summary.json", &summary)?;
            Ok(true)
        }
    }
}

fn ensemble(e: &EnsembleExp, seed: u64, out: &mut Output, lines: &mut Vec<String>) -> Result<bool, CliError> {
    let strengths = match (&e.strengths, e.ensemble.forcing) {
        (Some(s), _) => s.values(),
        (None, Forcing::None) => vec![0.0],
        (None, Forcing::Monochromatic { k, .. }) => vec![k],
        (None, Forcing::WhiteNoise { d_ext }) => vec![d_ext],
    };
    let cases: Vec<(f64, f64)> = e.alphas.iter().flat_map(|&a| strengths.iter().map(move |&s| (a, s))).collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|&(alpha, s)| {
            let mut p = e.laser;
            p.alpha = alpha;
            let cfg = noisesync::EnsembleConfig {
                forcing: e.ensemble.forcing.with_strength(s),
                ..e.ensemble.clone()
            };
            run_ensemble(&p, &cfg, seed)
        })
        .collect();
    let mut curve = String::from("alpha,strength,ratio,mean_im,mean_ifr,sync_class,status\n");
    let mut hist = String::from("alpha,strength,bin_lo,bin_hi,mass\n");
    for (&(alpha, s), r) in cases.iter().zip(&results) {
        match r {
            Ok(r) => {
                let _ = writeln!(
                    curve,
                    "{:e},{:e},{:e},{:e},{:e},{},ok",
                    alpha,
                    s,
                    r.ratio,
                    r.mean_im,
                    r.mean_ifr,
                    r.sync_class.as_str()
                );
                lines.push(format!("alpha = {alpha}, strength = {s:e}: ratio = {:.4}, {}", r.ratio, r.sync_class.as_str()));
                for (i, m) in r.histogram.mass.iter().enumerate() {
                    let _ = writeln!(hist, "{:e},{:e},{:e},{:e},{:e}", alpha, s, r.histogram.edges[i], r.histogram.edges[i + 1], m);
                }
            }
            Err(err) => {
                let _ = writeln!(curve, "{:e},{:e},,,,,\"failed: {}\"", alpha, s, err.to_string().replace('"', "'"));
                lines.push(format!("alpha = {alpha}, strength = {s:e}: failed: {err}"));
            }
        }
    }
    out.write("curve.csv", curve.as_bytes())?;
    if e.histograms {
        out.write("histograms.csv", hist.as_bytes())?;
    }
    Ok(true)
}

fn with_alpha(m: &Model, alpha: f64) -> Model {
    match *m {
        Model::Laser(mut p) => {
            p.alpha = alpha;
            Model::Laser(p)
        }
        Model::LandauStuart(mut p) => {
            p.alpha = alpha;
            Model::LandauStuart(p)
        }
    }
}

fn kicks(k: &KicksExp, out: &mut Output, lines: &mut Vec<String>) -> Result<bool, CliError> {
    match &k.protocol {
        KickProtocol::Set(s) => {
            let mut snaps_csv = String::from("alpha,t,index,e_re,e_im,n\n");
            let mut folds_csv = String::from("alpha,t,folds,winding,clamped,failed\n");
            for &alpha in &s.alphas {
                let model = with_alpha(&s.model, alpha);
                let set = circle_set(model.pump(), s.n_points);
                let snaps = evolve_kicked_set(&model, &set, &s.schedule, &s.snapshot_times, s.dt)?;
                for sn in &snaps {
                    for (i, p) in sn.points.iter().enumerate() {
                        let _ = writeln!(snaps_csv, "{:e},{:e},{},{:e},{:e},{:e}", alpha, sn.t, i, p.e_re, p.e_im, p.n);
                    }
                    let w = winding_number(&sn.points);
                    let _ = writeln!(folds_csv, "{:e},{:e},{},{},{},{}", alpha, sn.t, sn.folds, w, sn.clamped, sn.failed.len());
                }
                let folds: Vec<String> = snaps.iter().map(|s| format!("t={}:{}", s.t, s.folds)).collect();
                lines.push(format!("alpha = {alpha}: folds {}", folds.join(" ")));
            }
            out.write("kick_snapshots.csv", snaps_csv.as_bytes())?;
            out.write("folds.csv", folds_csv.as_bytes())?;
        }
        KickProtocol::PhaseDifference(p) => {
            let curves = phase_difference_experiment(&p.config, p.alpha)?;
            out.write("phase_difference.csv", phase_curves_csv(&curves).as_bytes())?;
            let summary: Vec<_> = curves
                .iter()
                .map(|c| {
                    lines.push(format!(
                        "{}: final = {:.6}, delta_psi0 = {:.6}, max excursion = {:.6}",
                        c.label, c.final_difference, c.delta_psi0, c.max_excursion
                    ));
                    json!({ "label": c.label, "alpha": c.alpha, "delta_psi0": c.delta_psi0, "final_difference": c.final_difference, "max_excursion": c.max_excursion })
                })
                .collect();
            out.write_json("summary.json", &summary)?;
        }
    }
    Ok(true)
}
