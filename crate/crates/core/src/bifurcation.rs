//! λ_max maps over (D_ext, J, α), location of stochastic d-bifurcations by
//! bisection, power-law fits of the loci, the ridge α_min and the large-D
//! asymptote.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lyapunov::{estimate_lambda_max, estimate_until_significant, LyapunovEstimate, LyapunovSettings};
use crate::models::{LandauStuartParams, Model};
use crate::noise::NoiseSpec;
use crate::sweep::{run_jobs, RunOptions};

/// Evaluates λ_max at parameter points of one model family.
///
/// Every point uses the same noise seed (common random numbers), so
/// neighbouring points differ only through their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluator {
    /// Model template; `j` and `alpha` are overwritten per point.
    pub template: Model,
    pub settings: LyapunovSettings,
    pub seed: u64,
    /// Noise grid; `None` means the integrator step.
    #[serde(default)]
    pub dt_grid: Option<f64>,
}

impl Evaluator {
    pub fn new(template: Model, settings: LyapunovSettings, seed: u64) -> Self {
        Self {
            template,
            settings,
            seed,
            dt_grid: None,
        }
    }

    pub fn model_at(&self, alpha: f64, j: f64) -> Model {
        match self.template {
            Model::Laser(mut p) => {
                p.alpha = alpha;
                p.j = j;
                Model::Laser(p)
            }
            Model::LandauStuart(mut p) => {
                p.alpha = alpha;
                p.j = j;
                Model::LandauStuart(p)
            }
        }
    }

    pub fn noise_at(&self, d_ext: f64) -> NoiseSpec {
        NoiseSpec::external(d_ext, self.seed, self.dt_grid.unwrap_or(self.settings.dt))
    }

    pub fn lambda(&self, alpha: f64, d_ext: f64, j: f64) -> Result<LyapunovEstimate> {
        estimate_lambda_max(&self.model_at(alpha, j), &self.noise_at(d_ext), &self.settings)
    }

    /// λ with horizon doubling until `k` standard errors clear zero.
    pub fn lambda_converged(&self, alpha: f64, d_ext: f64, j: f64, k: f64, doublings: u32) -> Result<(LyapunovEstimate, bool)> {
        estimate_until_significant(&self.model_at(alpha, j), &self.noise_at(d_ext), &self.settings, k, doublings)
    }
}

/// A rectangular (α, J, D_ext) grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub evaluator: Evaluator,
    pub d_ext: Vec<f64>,
    pub j: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Horizon doublings allowed for a point to reach significance.
    #[serde(default)]
    pub max_doublings: u32,
    /// Significance multiple used to call a point converged.
    #[serde(default = "three")]
    pub k_sigma: f64,
}

fn three() -> f64 {
    3.0
}

fn check_axis(name: &'static str, v: &[f64], positive: bool) -> Result<()> {
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(name, "axis values must be strictly increasing"));
    }
    if v.iter().any(|x| !x.is_finite() || (positive && !(*x > 0.0))) {
        return Err(invalid(name, "axis values must be finite and positive"));
    }
    Ok(())
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        check_axis("d_ext", &self.d_ext, false)?;
        if self.d_ext.iter().any(|d| *d < 0.0) {
            return Err(invalid("d_ext", "intensities must be >= 0"));
        }
        check_axis("j", &self.j, false)?;
        check_axis("alpha", &self.alpha, false)?;
        self.evaluator.settings.validate()
    }

    /// Jobs in canonical order: α outermost, then J, then D_ext.
    pub fn jobs(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.alpha.len() * self.j.len() * self.d_ext.len());
        for &alpha in &self.alpha {
            for &j in &self.j {
                for &d_ext in &self.d_ext {
                    out.push(GridPoint { alpha, j, d_ext });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub j: f64,
    pub d_ext: f64,
}

/// λ estimate at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub lambda_max: f64,
    pub stderr: f64,
    pub t_total: f64,
    pub mean_intensity: f64,
    /// λ is more than `k_sigma` standard errors from zero.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: GridPoint,
    pub seed: u64,
    /// `Err` carries the failure (usually a blow-up) as text.
    pub result: std::result::Result<PointResult, String>,
}

impl SweepRow {
    pub fn lambda(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.lambda_max)
    }

    pub fn converged(&self) -> bool {
        self.result.as_ref().map(|r| r.converged).unwrap_or(false)
    }
}

pub const SWEEP_CSV_HEADER: &str = "alpha,j,d_ext,lambda_max,stderr,horizon,mean_intensity,converged,seed,status";

/// CSV rows for a sweep table.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let p = r.point;
        match &r.result {
            Ok(v) => s.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},ok\n",
                p.alpha, p.j, p.d_ext, v.lambda_max, v.stderr, v.t_total, v.mean_intensity, v.converged, r.seed
            )),
            Err(e) => s.push_str(&format!(
                "{:e},{:e},{:e},,,,,false,{},\"failed: {}\"\n",
                p.alpha,
                p.j,
                p.d_ext,
                r.seed,
                e.replace('"', "'")
            )),
        }
    }
    s
}

fn evaluate_point(grid: &SweepGrid, p: &GridPoint) -> std::result::Result<PointResult, String> {
    grid.evaluator
        .lambda_converged(p.alpha, p.d_ext, p.j, grid.k_sigma, grid.max_doublings)
        .map(|(e, ok)| PointResult {
            lambda_max: e.lambda_max,
            stderr: e.stderr,
            t_total: e.t_total,
            mean_intensity: e.mean_intensity,
            converged: ok,
        })
        .map_err(|e| e.to_string())
}

/// Result of a (possibly interrupted) sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    /// Finished rows in canonical job order.
    pub rows: Vec<SweepRow>,
    pub complete: bool,
}

/// λ_max over the whole grid; failures are kept as rows.
pub fn sweep_lambda(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    Ok(sweep_lambda_checkpointed(grid, &RunOptions::default())?.rows)
}

/// As [`sweep_lambda`], resuming from and updating a checkpoint.
pub fn sweep_lambda_checkpointed(grid: &SweepGrid, opts: &RunOptions) -> Result<SweepOutcome> {
    grid.validate()?;
    let jobs = grid.jobs();
    let out = run_jobs(&jobs, opts, |p| evaluate_point(grid, p))?;
    let rows = jobs
        .iter()
        .zip(out.results)
        .filter_map(|(p, r)| {
            r.map(|result| SweepRow {
                point: *p,
                seed: grid.evaluator.seed,
                result,
            })
        })
        .collect();
    Ok(SweepOutcome {
        rows,
        complete: out.complete,
    })
}

/// Which coordinate a bisection moves along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    DExt,
    J,
    Alpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    /// Stop when the bracket width falls below this fraction of its midpoint.
    pub rel_width: f64,
    /// Significance multiple for a sign to count; 0 accepts raw signs.
    pub k_sigma: f64,
    pub max_iter: u32,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self {
            rel_width: 0.02,
            k_sigma: 2.0,
            max_iter: 40,
        }
    }
}

fn sign_of(e: &LyapunovEstimate, k: f64) -> Option<f64> {
    if k <= 0.0 {
        (e.lambda_max != 0.0).then(|| e.lambda_max.signum())
    } else {
        e.significant_sign(k)
    }
}

/// A bracketed zero crossing of λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub alpha: f64,
    pub d_ext: f64,
    pub j: f64,
    pub axis: Axis,
    /// Bracket on the bisected axis.
    pub lower: f64,
    pub upper: f64,
    pub lambda_lower: f64,
    pub stderr_lower: f64,
    pub lambda_upper: f64,
    pub stderr_upper: f64,
    /// The last midpoint could not be signed; the bracket is wider than requested.
    pub resolution_limited: bool,
    /// Mean |E|² at the bracket end nearer the crossing.
    pub mean_intensity: f64,
    /// 1 for the lower, 2 for the upper curve, once labelled.
    #[serde(default)]
    pub branch: Option<usize>,
}

impl LocusPoint {
    /// Crossing estimate: geometric bracket midpoint on positive axes.
    pub fn value(&self) -> f64 {
        if self.lower > 0.0 && self.axis != Axis::Alpha {
            (self.lower * self.upper).sqrt()
        } else {
            0.5 * (self.lower + self.upper)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BifurcationLocus {
    pub points: Vec<LocusPoint>,
    pub fits: Vec<PowerLawFit>,
}

fn midpoint(axis: Axis, a: f64, b: f64) -> f64 {
    if axis != Axis::Alpha && a > 0.0 && b > 0.0 {
        (a * b).sqrt()
    } else {
        0.5 * (a + b)
    }
}

/// Bisect a sign change of λ along `axis` between two signed ends.
#[allow(clippy::too_many_arguments)]
pub fn bisect_crossing<E>(
    eval: E,
    axis: Axis,
    fixed: GridPoint,
    mut lo: f64,
    mut hi: f64,
    mut e_lo: LyapunovEstimate,
    mut e_hi: LyapunovEstimate,
    cfg: &BisectionConfig,
) -> Result<LocusPoint>
where
    E: Fn(f64) -> Result<LyapunovEstimate>,
{
    let s_lo = sign_of(&e_lo, cfg.k_sigma);
    let s_hi = sign_of(&e_hi, cfg.k_sigma);
    match (s_lo, s_hi) {
        (Some(a), Some(b)) if a != b => {}
        _ => return Err(Error::NoBracket(format!("λ does not change sign on [{lo}, {hi}]"))),
    }
    let mut limited = false;
    for _ in 0..cfg.max_iter {
        let mid = midpoint(axis, lo, hi);
        if (hi - lo).abs() <= cfg.rel_width * mid.abs() {
            break;
        }
        let e = eval(mid)?;
        match sign_of(&e, cfg.k_sigma) {
            None => {
                limited = true;
                break;
            }
            Some(s) if Some(s) == s_lo => {
                lo = mid;
                e_lo = e;
            }
            Some(_) => {
                hi = mid;
                e_hi = e;
            }
        }
    }
    let nearer = if e_lo.lambda_max.abs() < e_hi.lambda_max.abs() { &e_lo } else { &e_hi };
    let mean_intensity = nearer.mean_intensity;
    let mut pt = LocusPoint {
        alpha: fixed.alpha,
        d_ext: fixed.d_ext,
        j: fixed.j,
        axis,
        lower: lo,
        upper: hi,
        lambda_lower: e_lo.lambda_max,
        stderr_lower: e_lo.stderr,
        lambda_upper: e_hi.lambda_max,
        stderr_upper: e_hi.stderr,
        resolution_limited: limited,
        mean_intensity,
        branch: None,
    };
    let v = pt.value();
    match axis {
        Axis::DExt => pt.d_ext = v,
        Axis::J => pt.j = v,
        Axis::Alpha => pt.alpha = v,
    }
    Ok(pt)
}

fn with_axis(p: GridPoint, axis: Axis, v: f64) -> GridPoint {
    match axis {
        Axis::DExt => GridPoint { d_ext: v, ..p },
        Axis::J => GridPoint { j: v, ..p },
        Axis::Alpha => GridPoint { alpha: v, ..p },
    }
}

/// Scan `values` along `axis` at the fixed coordinates, then bisect every
/// sign change between consecutive signed scan points. No sign change gives
/// an empty list.
pub fn locate_d_bifurcation(
    ev: &Evaluator,
    fixed: GridPoint,
    axis: Axis,
    values: &[f64],
    cfg: &BisectionConfig,
) -> Result<Vec<LocusPoint>> {
    check_axis("values", values, false)?;
    let at = |v: f64| {
        let p = with_axis(fixed, axis, v);
        ev.lambda(p.alpha, p.d_ext, p.j)
    };
    let scan: Vec<(f64, Result<LyapunovEstimate>)> = values.par_iter().map(|&v| (v, at(v))).collect();
    let signed: Vec<(f64, LyapunovEstimate, f64)> = scan
        .into_iter()
        .filter_map(|(v, r)| r.ok().and_then(|e| sign_of(&e, cfg.k_sigma).map(|s| (v, e, s))))
        .collect();
    let pairs: Vec<_> = signed.windows(2).filter(|w| w[0].2 != w[1].2).map(|w| (w[0].clone(), w[1].clone())).collect();
    pairs
        .into_par_iter()
        .map(|((a, ea, _), (b, eb, _))| bisect_crossing(at, axis, fixed, a, b, ea, eb, cfg))
        .collect()
}

/// Label crossings along J at equal (α, D_ext) as branch 1, 2, ... from below.
pub fn assign_branches(points: &mut [LocusPoint]) {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.alpha
            .total_cmp(&q.alpha)
            .then(p.d_ext.total_cmp(&q.d_ext))
            .then(p.j.total_cmp(&q.j))
    });
    let mut prev: Option<(f64, f64)> = None;
    let mut k = 0;
    for i in idx {
        let key = (points[i].alpha, points[i].d_ext);
        if prev != Some(key) {
            k = 0;
            prev = Some(key);
        }
        k += 1;
        points[i].branch = Some(k);
    }
}

/// Log-log regression of J against √(2 D_ext) along one branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub branch: usize,
    pub n_points: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// exp(intercept) of the free fit.
    pub c_free: f64,
    /// C from the fit with the slope fixed to 1.
    pub c_fixed: f64,
    pub residual_rms: f64,
}

/// Fit `ln J = s ln √(2D) + c` to the points of `branch`. With `weak_cap`,
/// points whose mean |E|² deviates from J by more than that fraction are
/// dropped first.
pub fn fit_power_law(points: &[LocusPoint], branch: usize, weak_cap: Option<f64>) -> Result<PowerLawFit> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.branch == Some(branch))
        .filter(|p| weak_cap.is_none_or(|cap| ((p.mean_intensity - p.j) / p.j).abs() < cap))
        .filter(|p| p.j > 0.0 && p.d_ext > 0.0)
        .map(|p| ((2.0 * p.d_ext).sqrt().ln(), p.j.ln()))
        .collect();
    fit_log_line(&data, branch)
}

fn fit_log_line(data: &[(f64, f64)], branch: usize) -> Result<PowerLawFit> {
    let n = data.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("branch {branch} has {n} points, need at least 4")));
    }
    let nf = n as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / nf;
    let my = data.iter().map(|d| d.1).sum::<f64>() / nf;
    let sxx = data.iter().map(|d| (d.0 - mx).powi(2)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points share one D_ext".into()));
    }
    let sxy = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = data.iter().map(|d| (d.1 - intercept - slope * d.0).powi(2)).sum::<f64>();
    let slope_stderr = (ss / (nf - 2.0) / sxx).sqrt();
    let c_fixed = (data.iter().map(|d| d.1 - d.0).sum::<f64>() / nf).exp();
    Ok(PowerLawFit {
        branch,
        n_points: n,
        slope,
        slope_stderr,
        intercept,
        c_free: intercept.exp(),
        c_fixed,
        residual_rms: (ss / nf).sqrt(),
    })
}

/// Locate J crossings at every D_ext value, scanning J over
/// `[lo, hi]·√(2D)` with `n_scan` log-spaced values, label branches and fit
/// each branch that has enough points.
pub fn trace_branches(
    ev: &Evaluator,
    alpha: f64,
    d_values: &[f64],
    window: (f64, f64),
    n_scan: usize,
    cfg: &BisectionConfig,
    weak_cap: Option<f64>,
) -> Result<BifurcationLocus> {
    let mut points = Vec::new();
    for &d in d_values {
        let base = (2.0 * d).sqrt();
        let scan = log_space(window.0 * base, window.1 * base, n_scan);
        points.extend(locate_d_bifurcation(ev, GridPoint { alpha, j: base, d_ext: d }, Axis::J, &scan, cfg)?);
    }
    assign_branches(&mut points);
    let branches = points.iter().filter_map(|p| p.branch).max().unwrap_or(0);
    let fits = (1..=branches).filter_map(|b| fit_power_law(&points, b, weak_cap).ok()).collect();
    Ok(BifurcationLocus { points, fits })
}

/// Crossings along D_ext near the ridge. At every J the scan runs over
/// `ratios` of D_ext/J², so a probe known to be positive stays on the scan.
/// Branch 1 has the smallest J/√(2D) at each J.
pub fn ridge_branches(
    ev: &Evaluator,
    alpha: f64,
    ratios: &[f64],
    j_values: &[f64],
    cfg: &BisectionConfig,
) -> Result<BifurcationLocus> {
    let mut ratios = ratios.to_vec();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    if ratios.len() < 2 {
        return Err(invalid("ratios", "need at least two distinct ratios"));
    }
    check_axis("ratios", &ratios, true)?;
    check_axis("j", j_values, true)?;
    let mut points = Vec::new();
    for &j in j_values {
        let scan: Vec<f64> = ratios.iter().map(|r| r * j * j).collect();
        let mut row = locate_d_bifurcation(ev, GridPoint { alpha, j, d_ext: scan[0] }, Axis::DExt, &scan, cfg)?;
        row.sort_by(|a, b| b.d_ext.total_cmp(&a.d_ext));
        for (k, p) in row.iter_mut().enumerate() {
            p.branch = Some(k + 1);
        }
        points.extend(row);
    }
    let branches = points.iter().filter_map(|p| p.branch).max().unwrap_or(0);
    let fits = (1..=branches).filter_map(|b| fit_power_law(&points, b, None).ok()).collect();
    Ok(BifurcationLocus { points, fits })
}

/// `n` logarithmically spaced values from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Result of [`find_alpha_min`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMin {
    pub alpha_min: f64,
    /// α without a positive region, α with one.
    pub bracket: (f64, f64),
    /// The probe point with the largest λ at the upper end.
    pub best_probe: GridPoint,
    pub best_lambda: f64,
}

/// Largest λ over the probe points and whether any is positive beyond `k` errors.
pub fn probe_positive(ev: &Evaluator, alpha: f64, probes: &[(f64, f64)], k: f64) -> Result<(bool, GridPoint, f64)> {
    let res: Vec<(GridPoint, Result<LyapunovEstimate>)> = probes
        .par_iter()
        .map(|&(d, j)| {
            let p = GridPoint { alpha, j, d_ext: d };
            (p, ev.lambda(alpha, d, j))
        })
        .collect();
    let mut any = false;
    let mut best = (GridPoint { alpha, j: f64::NAN, d_ext: f64::NAN }, f64::NEG_INFINITY);
    for (p, r) in res {
        if let Ok(e) = r {
            if e.lambda_max > k * e.stderr {
                any = true;
            }
            if e.lambda_max > best.1 {
                best = (p, e.lambda_max);
            }
        }
    }
    Ok((any, best.0, best.1))
}

/// Bisect α for the onset of a positive-λ region over the (D_ext, J) probes.
pub fn find_alpha_min(ev: &Evaluator, probes: &[(f64, f64)], range: (f64, f64), tol: f64, k: f64) -> Result<AlphaMin> {
    if probes.is_empty() {
        return Err(invalid("probes", "need at least one probe point"));
    }
    let (mut lo, mut hi) = range;
    let (pos_lo, _, _) = probe_positive(ev, lo, probes, k)?;
    let (pos_hi, mut best_p, mut best_l) = probe_positive(ev, hi, probes, k)?;
    if pos_lo || !pos_hi {
        return Err(Error::NoBracket(format!(
            "positive region at α={lo}: {pos_lo}, at α={hi}: {pos_hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (pos, p, l) = probe_positive(ev, mid, probes, k)?;
        if pos {
            hi = mid;
            best_p = p;
            best_l = l;
        } else {
            lo = mid;
        }
    }
    Ok(AlphaMin {
        alpha_min: 0.5 * (lo + hi),
        bracket: (lo, hi),
        best_probe: best_p,
        best_lambda: best_l,
    })
}

/// α at which λ of the Landau–Stuart model with J = 0 and D_ext = 1 changes
/// sign, the large-D limit of the single-curve regime.
pub fn large_d_asymptote(settings: &LyapunovSettings, seed: u64, range: (f64, f64), tol: f64) -> Result<(f64, (f64, f64))> {
    let mut s = *settings;
    s.relaxation_units = false;
    let ev = Evaluator::new(Model::LandauStuart(LandauStuartParams::new(0.0, 0.0)), s, seed);
    let f = |a: f64| ev.lambda(a, 1.0, 0.0).map(|e| e.lambda_max);
    let (mut lo, mut hi) = range;
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoBracket(format!("λ({lo}) = {f_lo}, λ({hi}) = {f_hi}")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), (lo, hi)))
}

/// One matched comparison point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub j: f64,
    /// Laser forcing intensity.
    pub d_ext: f64,
    /// Matched Landau–Stuart intensity D_ext/(gγ).
    pub d_ls: f64,
    pub lambda_laser: Option<f64>,
    pub stderr_laser: Option<f64>,
    pub lambda_ls: Option<f64>,
    pub stderr_ls: Option<f64>,
    /// Both signs significant and different.
    pub discrepancy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub rows: Vec<ComparisonRow>,
    pub discrepancies: usize,
    /// Per J: number of disjoint positive-λ intervals of the laser along D_ext.
    pub laser_positive_intervals: Vec<(f64, usize)>,
    pub ls_positive_intervals: Vec<(f64, usize)>,
}

/// Number of maximal runs of significantly positive values in a sequence.
/// Insignificant entries neither open nor close a run.
pub fn count_positive_intervals(signs: &[Option<f64>]) -> usize {
    let mut count = 0;
    let mut inside = false;
    for s in signs.iter().flatten() {
        if *s > 0.0 {
            if !inside {
                count += 1;
                inside = true;
            }
        } else {
            inside = false;
        }
    }
    count
}

/// Evaluate both models on matched grids: the laser at D_ext, the
/// Landau–Stuart model at D_ext/(gγ) in rescaled time.
pub fn compare_models(
    laser: &Evaluator,
    ls: &Evaluator,
    alpha: f64,
    j_values: &[f64],
    d_values: &[f64],
    k: f64,
) -> Result<ComparisonReport> {
    let Model::Laser(lp) = laser.template else {
        return Err(invalid("laser", "first evaluator must be a laser"));
    };
    if !matches!(ls.template, Model::LandauStuart(_)) {
        return Err(invalid("ls", "second evaluator must be a Landau–Stuart model"));
    }
    let gg = lp.g_gamma();
    let pts: Vec<(f64, f64)> = j_values.iter().flat_map(|&j| d_values.iter().map(move |&d| (j, d))).collect();
    let rows: Vec<ComparisonRow> = pts
        .par_iter()
        .map(|&(j, d)| {
            let a = laser.lambda(alpha, d, j).ok();
            let b = ls.lambda(alpha, d / gg, j).ok();
            let sa = a.as_ref().and_then(|e| e.significant_sign(k));
            let sb = b.as_ref().and_then(|e| e.significant_sign(k));
            ComparisonRow {
                j,
                d_ext: d,
                d_ls: d / gg,
                lambda_laser: a.as_ref().map(|e| e.lambda_max),
                stderr_laser: a.as_ref().map(|e| e.stderr),
                lambda_ls: b.as_ref().map(|e| e.lambda_max),
                stderr_ls: b.as_ref().map(|e| e.stderr),
                discrepancy: matches!((sa, sb), (Some(x), Some(y)) if x != y),
            }
        })
        .collect();
    let sig = |l: Option<f64>, e: Option<f64>| match (l, e) {
        (Some(l), Some(e)) if l.abs() > k * e => Some(l.signum()),
        _ => None,
    };
    let intervals = |laser_side: bool| {
        j_values
            .iter()
            .map(|&j| {
                let signs: Vec<Option<f64>> = rows
                    .iter()
                    .filter(|r| r.j == j)
                    .map(|r| {
                        if laser_side {
                            sig(r.lambda_laser, r.stderr_laser)
                        } else {
                            sig(r.lambda_ls, r.stderr_ls)
                        }
                    })
                    .collect();
                (j, count_positive_intervals(&signs))
            })
            .collect()
    };
    Ok(ComparisonReport {
        alpha,
        discrepancies: rows.iter().filter(|r| r.discrepancy).count(),
        laser_positive_intervals: intervals(true),
        ls_positive_intervals: intervals(false),
        rows,
    })
}
