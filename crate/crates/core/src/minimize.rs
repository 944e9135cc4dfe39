//! Relaxation of the elastic energy over the deformation at fixed phase
//! indicator: analytic per-vertex gradients, gradient descent with a
//! backtracking line search that preserves cell-wise orientation, and the
//! volume sweep with two-regime log-log exponent fits.

use crate::construction::{build_configuration, InclusionGeometry};
use crate::error::{Error, Result};
use crate::field::{total_energy, EnergyBreakdown, GridSpec, ScalarField, VectorField};
use crate::mat2::{closest_rotation, project_onto_well, Vec2, WellPair};

/// Gradient-descent parameters. The deformation stays pinned to the
/// identity on the outermost vertex ring, matching the cutoff support of
/// the constructions.
#[derive(Clone, Copy, Debug)]
pub struct RelaxConfig {
    pub max_iters: usize,
    /// Termination threshold on the sup norm of the per-vertex gradient.
    pub grad_tol: f64,
    /// Line-search step shrink factor, in (0, 1).
    pub shrink: f64,
    /// Armijo sufficient-decrease constant, in (0, 0.5].
    pub sufficient_decrease: f64,
    /// Initial trial step for the first iteration.
    pub initial_step: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            max_iters: 500,
            grad_tol: 1e-8,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        initial_step: 1.0,
        }
    }
}

impl RelaxConfig {
    fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Domain(format!("shrink must be in (0,1), got {}", self.shrink)));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease <= 0.5) {
            return Err(Error::Domain(format!(
                "sufficient decrease must be in (0, 0.5], got {}",
                self.sufficient_decrease
            )));
        }
        Ok(())
    }
}

/// Outcome of a relaxation run.
#[derive(Clone, Debug)]
pub struct RelaxResult {
    pub v_final: VectorField,
    /// Energy after the initial state and after each accepted step; the
    /// elastic component is strictly decreasing.
    pub energy_trace: Vec<EnergyBreakdown>,
    pub iterations: usize,
    pub converged: bool,
}

/// Analytic gradient of the elastic energy with respect to every vertex.
///
/// Uses `d/dG dist²(G, SO(2)W) = 2(G − Π(G))` with `Π` the orbit projection,
/// chained through the cell-centered difference stencil. Fails on any cell
/// with a non-positive Jacobian, where the projection loses uniqueness.
pub fn elastic_gradient(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
) -> Result<VectorField> {
    if chi.grid() != v.grid() {
        return Err(Error::GridMismatch("gradient needs chi and v on one grid".into()));
    }
    let grid = v.grid();
    let n = grid.n();
    let h = grid.h();
    let mut grad = VectorField::from_map(grid, |_| Vec2::ZERO);
    for j in 0..n {
        for i in 0..n {
            let g = v.gradient_unchecked(i, j);
            if g.det() <= 0.0 {
                return Err(Error::NonAdmissible {
                    i,
                    j,
                    reason: format!("det ∇v = {} during gradient assembly", g.det()),
                });
            }
            let c = chi.value(i, j);
            let d_par = (g - closest_rotation(&g)) * (2.0 * (1.0 - c));
            let d_inc = (g - project_onto_well(&g, &w.f)) * (2.0 * c);
            let d = (d_par + d_inc) * (0.5 * h);
            // corner signs of the difference stencil
            for (di, dj) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
                let s = Vec2::new(
                    if di == 1 { 1.0 } else { -1.0 },
                    if dj == 1 { 1.0 } else { -1.0 },
                );
                let vi = i + di;
                let vj = j + dj;
                let cur = grad.vertex(vi, vj);
                grad.set_vertex(vi, vj, cur + d * s);
            }
        }
    }
    Ok(grad)
}

fn elastic_only(chi: &ScalarField, v: &VectorField, w: &WellPair) -> f64 {
    let n = chi.grid().n();
    let h = chi.grid().h();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let g = v.gradient_unchecked(i, j);
            acc += crate::field::elastic_density(chi.value(i, j), &g, w);
        }
    }
    acc * h * h
}

fn orientation_ok(v: &VectorField) -> bool {
    let n = v.grid().n();
    for j in 0..n {
        for i in 0..n {
            if v.gradient_unchecked(i, j).det() <= 0.0 {
                return false;
            }
        }
    }
    true
}

fn zero_boundary_ring(g: &mut VectorField) {
    let n = g.grid().n();
    for i in 0..=n {
        g.set_vertex(i, 0, Vec2::ZERO);
        g.set_vertex(i, n, Vec2::ZERO);
        g.set_vertex(0, i, Vec2::ZERO);
        g.set_vertex(n, i, Vec2::ZERO);
    }
}

/// Gradient descent on the elastic energy at fixed `chi`, with backtracking
/// line search. Accepted steps keep `det ∇v > 0` on every cell (the step is
/// shrunk until they do) and strictly decrease the elastic energy.
pub fn relax(
    chi: &ScalarField,
    v0: &VectorField,
    w: &WellPair,
    cfg: &RelaxConfig,
) -> Result<RelaxResult> {
    cfg.validate()?;
    if chi.grid() != v0.grid() {
        return Err(Error::GridMismatch("relax needs chi and v on one grid".into()));
    }
    if !orientation_ok(v0) {
        return Err(Error::Domain("initial deformation has a non-positive Jacobian".into()));
    }

    let grid = v0.grid();
    let n = grid.n();
    let mut v = v0.clone();
    let mut energy = elastic_only(chi, &v, w);
    let interface = chi.perimeter();
    let mu = chi.mu();
    let breakdown = |elastic: f64| EnergyBreakdown {
        interface,
        elastic,
        total: interface + elastic,
        mu,
    };
    let mut trace = vec![breakdown(energy)];
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let mut grad = elastic_gradient(chi, &v, w)?;
        zero_boundary_ring(&mut grad);
        let mut sup = 0.0f64;
        let mut norm_sq = 0.0f64;
        for g in grad.values() {
            sup = sup.max(g.norm());
            norm_sq += g.norm_sq();
        }
        if sup <= cfg.grad_tol {
            converged = true;
            break;
        }

        // backtracking with orientation guard
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let mut candidate = v.clone();
            for j in 0..=n {
                for i in 0..=n {
                    let cur = candidate.vertex(i, j);
                    candidate.set_vertex(i, j, cur - grad.vertex(i, j) * t);
                }
            }
            if !orientation_ok(&candidate) {
                t *= cfg.shrink;
                continue;
            }
            let e_new = elastic_only(chi, &candidate, w);
            if e_new <= energy - cfg.sufficient_decrease * t * norm_sq {
                v = candidate;
                energy = e_new;
                trace.push(breakdown(energy));
                // let the step grow back between iterations
                step = (t / cfg.shrink).min(cfg.initial_step.max(1.0));
                accepted = true;
                break;
            }
            t *= cfg.shrink;
        }
        iterations += 1;
        if !accepted {
            return Ok(RelaxResult {
                v_final: v,
                energy_trace: trace,
                iterations,
                converged: false,
            });
        }
    }

    Ok(RelaxResult {
        v_final: v,
        energy_trace: trace,
        iterations,
        converged,
    })
}

/// Least-squares line through `(log mu, log E)` with r² and a 95%
/// confidence halfwidth on the slope.
#[derive(Clone, Copy, Debug)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_ci95: f64,
    pub n_points: usize,
}

/// Two-sided 97.5% Student-t quantile for small degrees of freedom.
fn t_quantile_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= 30 {
        TABLE[df - 1]
    } else {
        1.96
    }
}

/// Fit `log y = slope·log x + intercept` by least squares.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<FitLine> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points for a log-log fit, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Fit(format!("log-log fit needs positive data, got ({x}, {y})")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate abscissae in log-log fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let df = points.len().saturating_sub(2);
    let slope_ci95 = if df > 0 {
        t_quantile_975(df) * (ss_res / df as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(FitLine {
        slope,
        intercept,
        r_squared,
        slope_ci95,
        n_points: points.len(),
    })
}

/// Grid selection for sweep points: `n` cells per side and a window scaled
/// to the inclusion, `L = l_factor·mu^(2/3)` (widened for small-volume
/// balls so the inclusion keeps a margin).
#[derive(Clone, Copy, Debug)]
pub struct GridPolicy {
    pub n: usize,
    pub l_factor: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { n: 512, l_factor: 2.5 }
    }
}

impl GridPolicy {
    pub fn grid_for(&self, mu: f64) -> Result<GridSpec> {
        let scale = mu.powf(2.0 / 3.0);
        let ball_radius = (mu / std::f64::consts::PI).sqrt();
        let l = (self.l_factor * scale).max(2.5 * ball_radius);
        GridSpec::new(self.n, l)
    }
}

/// One sweep point: the configuration geometry and its energy, with the
/// relaxation flags.
#[derive(Clone, Copy, Debug)]
pub struct SweepPoint {
    pub mu: f64,
    pub rlen: f64,
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub relaxed: bool,
    pub converged: bool,
}

/// Sweep results with per-regime exponent fits.
#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub points: Vec<SweepPoint>,
    /// Fit over `mu <= 1`, when that regime has at least 3 points.
    pub small: Option<FitLine>,
    /// Fit over `mu >= 1`, when that regime has at least 3 points.
    pub large: Option<FitLine>,
}

/// Build (and optionally relax) the configuration for every volume in
/// `mu_list`, then fit `log E` against `log mu` separately on the two
/// regimes. Regimes with fewer than 3 points are skipped; it is an error if
/// no regime is fittable.
pub fn scaling_sweep(
    mu_list: &[f64],
    well: &WellPair,
    policy: &GridPolicy,
    relax_cfg: Option<&RelaxConfig>,
) -> Result<ScalingFit> {
    let mut points = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        points.push(sweep_point(mu, well, policy, relax_cfg)?);
    }
    fit_sweep(points)
}

/// A single sweep evaluation, exposed so drivers can parallelize points.
pub fn sweep_point(
    mu: f64,
    well: &WellPair,
    policy: &GridPolicy,
    relax_cfg: Option<&RelaxConfig>,
) -> Result<SweepPoint> {
    let grid = policy.grid_for(mu)?;
    let config = build_configuration(mu, well, grid)?;
    let (rlen, t) = match &config.geometry {
        InclusionGeometry::Ball { radius } => (*radius, 0.0),
        InclusionGeometry::Lens(lens) => (lens.rlen, lens.t),
    };
    let mut energy = total_energy(&config.chi, &config.v, &config.well)?;
    let mut relaxed = false;
    let mut converged = true;
    if let Some(cfg) = relax_cfg {
        let result = relax(&config.chi, &config.v, &config.well, cfg)?;
        energy = *result.energy_trace.last().expect("trace is never empty");
        relaxed = true;
        converged = result.converged;
    }
    Ok(SweepPoint {
        mu,
        rlen,
        t,
        energy,
        relaxed,
        converged,
    })
}

/// Fit already-computed sweep points.
pub fn fit_sweep(points: Vec<SweepPoint>) -> Result<ScalingFit> {
    let small_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mu <= 1.0)
        .map(|p| (p.mu, p.energy.total))
        .collect();
    let large_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mu >= 1.0)
        .map(|p| (p.mu, p.energy.total))
        .collect();
    let small = if small_pts.len() >= 3 {
        Some(fit_log_log(&small_pts)?)
    } else {
        None
    };
    let large = if large_pts.len() >= 3 {
        Some(fit_log_log(&large_pts)?)
    } else {
        None
    };
    if small.is_none() && large.is_none() {
        return Err(Error::Fit(
            "fewer than 3 points in both volume regimes; nothing to fit".into(),
        ));
    }
    Ok(ScalingFit { points, small, large })
}
