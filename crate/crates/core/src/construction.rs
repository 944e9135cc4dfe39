//! The explicit upper-bound configuration: a lens-shaped inclusion of
//! prescribed area, the piecewise displacement that shears the lens and
//! decays through normal fans, a radial cutoff, and the admissibility
//! certificates of the resulting deformation.
//!
//! For volume `mu <= 1` the configuration degenerates to a ball with the
//! identity deformation; the surface term alone then gives the `μ^(1/2)`
//! regime.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{bilip_constant, GridSpec, ScalarField, VectorField};
use crate::mat2::{Mat2, Vec2, WellPair};

/// Radial cutoff: 1 inside `B_inner`, 0 outside `B_{2 inner}`, a C¹
/// smoothstep in between with `|w'| <= 1.5 / inner`.
#[derive(Clone, Copy, Debug)]
pub struct CutoffProfile {
    inner: f64,
}

impl CutoffProfile {
    pub fn new(inner: f64) -> Self {
        CutoffProfile { inner }
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        2.0 * self.inner
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            1.0
        } else if r >= 2.0 * self.inner {
            0.0
        } else {
            let t = (r - self.inner) / self.inner;
            1.0 - (3.0 * t * t - 2.0 * t * t * t)
        }
    }

    /// Upper bound for `|d/dr value|`, attained at the midpoint of the ramp.
    pub fn derivative_bound(&self) -> f64 {
        1.5 / self.inner
    }
}

/// Lens inclusion `B_rho(c1) ∩ B_rho(c2)` of diameter `rlen` along e1 and
/// thickness `t` along e2, with the shear well and cutoff that complete the
/// deformation `v(x) = ω(|x|)·u0(x) + x`.
#[derive(Clone, Debug)]
pub struct LensConstruction {
    /// Lens diameter: corners at `(±rlen/2, 0)`.
    pub rlen: f64,
    /// Lens thickness: apexes at `(0, ±t/2)`.
    pub t: f64,
    /// Arc radius, fixed by the chord relation `rho = (rlen² + t²) / (4t)`.
    pub rho: f64,
    /// Arc centers on the x2-axis, `centers.0 = -centers.1`.
    pub centers: (Vec2, Vec2),
    /// Well in shear normal form, `F = Id + nu1·e1⊗e2`.
    pub well: WellPair,
    pub cutoff: CutoffProfile,
    pub mu_target: f64,
}

/// Closed-form lens area: twice the circular-segment area
/// `rho²·(θ − sin θ cos θ)` with `cos θ = y_c / rho`.
fn lens_area_closed(rlen: f64, t: f64) -> f64 {
    let rho = (rlen * rlen + t * t) / (4.0 * t);
    let yc = rho - t / 2.0;
    let theta = (yc / rho).clamp(-1.0, 1.0).acos();
    2.0 * rho * rho * (theta - theta.sin() * theta.cos())
}

impl LensConstruction {
    /// Distance from the origin to each arc center.
    pub fn center_offset(&self) -> f64 {
        self.rho - self.t / 2.0
    }

    /// Half-angle of each arc seen from its center.
    pub fn theta_half(&self) -> f64 {
        (self.center_offset() / self.rho).clamp(-1.0, 1.0).acos()
    }

    pub fn area(&self) -> f64 {
        lens_area_closed(self.rlen, self.t)
    }

    /// Total arc length of the lens boundary, `4·rho·θ_half`.
    pub fn perimeter(&self) -> f64 {
        4.0 * self.rho * self.theta_half()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.centers.0).norm() <= self.rho && (p - self.centers.1).norm() <= self.rho
    }

    /// Whole closed square cell of side `h` centered at `c` lies outside.
    pub fn cell_fully_outside(&self, c: Vec2, h: f64) -> bool {
        let margin = h * std::f64::consts::FRAC_1_SQRT_2 + 1e-12 * self.rho;
        let r1 = (c - self.centers.0).norm();
        let r2 = (c - self.centers.1).norm();
        r1.max(r2) >= self.rho + margin
    }

    /// Whole closed square cell of side `h` centered at `c` lies inside.
    pub fn cell_fully_inside(&self, c: Vec2, h: f64) -> bool {
        let margin = h * std::f64::consts::FRAC_1_SQRT_2 + 1e-12 * self.rho;
        let r1 = (c - self.centers.0).norm();
        let r2 = (c - self.centers.1).norm();
        r1.max(r2) <= self.rho - margin
    }

    /// Displacement before the cutoff. Three branches:
    /// inside the lens `u0 = (F − Id)x = (nu1·x2, 0)`; in the normal fan of
    /// an arc, the value frozen at the radial foot point on that arc; zero
    /// in the lateral wedges. Globally continuous.
    pub fn u0(&self, p: Vec2) -> Vec2 {
        let nu1 = self.well.nu1();
        let rho = self.rho;
        let cth = self.center_offset() / rho;
        let z1 = p - self.centers.0;
        let z2 = p - self.centers.1;
        let r1 = z1.norm();
        let r2 = z2.norm();
        if r1 <= rho && r2 <= rho {
            return Vec2::new(nu1 * p.y, 0.0);
        }
        // upper arc belongs to the lower-centered circle and vice versa
        if r2 >= rho && r2 > 0.0 && z2.y / r2 >= cth {
            let foot_y = self.centers.1.y + rho * z2.y / r2;
            return Vec2::new(nu1 * foot_y, 0.0);
        }
        if r1 >= rho && r1 > 0.0 && z1.y / r1 <= -cth {
            let foot_y = self.centers.0.y + rho * z1.y / r1;
            return Vec2::new(nu1 * foot_y, 0.0);
        }
        Vec2::ZERO
    }

    /// Analytic gradient of `u0` (zero rows except the first).
    pub fn grad_u0(&self, p: Vec2) -> Mat2 {
        let nu1 = self.well.nu1();
        let rho = self.rho;
        let cth = self.center_offset() / rho;
        let z1 = p - self.centers.0;
        let z2 = p - self.centers.1;
        let r1 = z1.norm();
        let r2 = z2.norm();
        if r1 <= rho && r2 <= rho {
            return Mat2::new(0.0, nu1, 0.0, 0.0);
        }
        let fan = |z: Vec2, r: f64| -> Mat2 {
            // d/dp [rho * z2 / r] = rho * (-z1*z2, z1²) / r³
            let r3 = r * r * r;
            Mat2::new(
                nu1 * rho * (-z.x * z.y) / r3,
                nu1 * rho * (z.x * z.x) / r3,
                0.0,
                0.0,
            )
        };
        if r2 >= rho && r2 > 0.0 && z2.y / r2 >= cth {
            return fan(z2, r2);
        }
        if r1 >= rho && r1 > 0.0 && z1.y / r1 <= -cth {
            return fan(z1, r1);
        }
        Mat2::ZERO
    }

    /// The deformation `v(x) = ω(|x|)·u0(x) + x`.
    pub fn deform(&self, p: Vec2) -> Vec2 {
        let w = self.cutoff.value(p.norm());
        p + self.u0(p) * w
    }
}

/// Solve the lens thickness so that the exact lens area matches `mu` to
/// 1e-8 relative, by bisection on `t ∈ (0, rlen)`.
pub fn solve_lens(mu: f64, rlen: f64, well: &WellPair) -> Result<LensConstruction> {
    if !(mu > 0.0 && rlen > 0.0) {
        return Err(Error::Domain(format!(
            "lens solve needs positive mu and Rlen, got mu={mu}, Rlen={rlen}"
        )));
    }
    let area_max = lens_area_closed(rlen, rlen);
    if mu >= area_max {
        return Err(Error::Infeasible(format!(
            "volume {mu} needs thickness >= diameter at Rlen = {rlen} \
             (max lens area {area_max:.6}); use a larger Rlen"
        )));
    }
    let mut lo = 0.0_f64;
    let mut hi = rlen;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lens_area_closed(rlen, mid) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-16 * rlen {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let area = lens_area_closed(rlen, t);
    if ((area - mu) / mu).abs() > 1e-8 {
        return Err(Error::Infeasible(format!(
            "lens area solve did not converge: area {area} vs mu {mu}"
        )));
    }
    let rho = (rlen * rlen + t * t) / (4.0 * t);
    let yc = rho - t / 2.0;
    let shear = well.to_shear()?;
    Ok(LensConstruction {
        rlen,
        t,
        rho,
        centers: (Vec2::new(0.0, yc), Vec2::new(0.0, -yc)),
        well: shear,
        cutoff: CutoffProfile::new(rlen),
        mu_target: mu,
    })
}

/// The inclusion geometry used by a built configuration.
#[derive(Clone, Debug)]
pub enum InclusionGeometry {
    /// Small-volume branch: a ball with the identity deformation.
    Ball { radius: f64 },
    Lens(LensConstruction),
}

/// A built configuration: indicator, deformation, and the shear-form well
/// they are expressed in.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub chi: ScalarField,
    pub v: VectorField,
    pub well: WellPair,
    pub geometry: InclusionGeometry,
}

impl Configuration {
    pub fn lens(&self) -> Option<&LensConstruction> {
        match &self.geometry {
            InclusionGeometry::Lens(l) => Some(l),
            InclusionGeometry::Ball { .. } => None,
        }
    }
}

/// Build the upper-bound configuration for volume `mu`: a lens of diameter
/// `mu^(2/3)` (with cutoff radius equal to the diameter) for `mu > 1`, a
/// ball with `v = id` for `mu <= 1`.
pub fn build_configuration(mu: f64, well: &WellPair, grid: GridSpec) -> Result<Configuration> {
    if mu > 1.0 {
        build_configuration_with_rlen(mu, well, grid, mu.powf(2.0 / 3.0))
    } else {
        build_ball(mu, well, grid)
    }
}

fn build_ball(mu: f64, well: &WellPair, grid: GridSpec) -> Result<Configuration> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("volume must be positive, got {mu}")));
    }
    let radius = (mu / std::f64::consts::PI).sqrt();
    if radius >= grid.halfwidth() {
        return Err(Error::Resolution(format!(
            "ball radius {radius} does not fit the window L = {}",
            grid.halfwidth()
        )));
    }
    if 2.0 * radius / grid.h() < 8.0 {
        return Err(Error::Resolution(format!(
            "fewer than 8 cells across the ball diameter (h = {})",
            grid.h()
        )));
    }
    Ok(Configuration {
        chi: ScalarField::disc(grid, Vec2::ZERO, radius),
        v: VectorField::identity(grid),
        well: well.to_shear()?,
        geometry: InclusionGeometry::Ball { radius },
    })
}

/// Lens configuration with an explicit diameter (the scaling-default choice
/// is `rlen = mu^(2/3)`).
pub fn build_configuration_with_rlen(
    mu: f64,
    well: &WellPair,
    grid: GridSpec,
    rlen: f64,
) -> Result<Configuration> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("volume must be positive, got {mu}")));
    }
    let lens = solve_lens(mu, rlen, well)?;
    if grid.halfwidth() < 2.0 * lens.cutoff.inner() {
        return Err(Error::Resolution(format!(
            "window halfwidth {} smaller than the cutoff support 2R = {}",
            grid.halfwidth(),
            2.0 * lens.cutoff.inner()
        )));
    }
    if lens.t / grid.h() < 8.0 {
        return Err(Error::Resolution(format!(
            "fewer than 8 cells across the lens thickness T = {} (h = {})",
            lens.t,
            grid.h()
        )));
    }
    let mut chi = ScalarField::indicator(grid, |p| lens.contains(p));
    chi.set_perimeter_hint(Some(lens.perimeter()));
    let v = VectorField::from_map(grid, |p| lens.deform(p));
    Ok(Configuration {
        chi,
        v,
        well: lens.well,
        geometry: InclusionGeometry::Lens(lens),
    })
}

/// Admissibility certificates of a built configuration.
#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    /// max ‖∇v − Id‖ over cells fully outside the lens.
    pub max_grad_dev_outside: f64,
    /// `max_grad_dev_outside / (‖F‖·mu^(-1/3))`: the empirical constant in
    /// the decay certificate.
    pub decay_constant: f64,
    /// Grid bi-Lipschitz constant, or `None` with `admissible = false` when
    /// a cell has a non-positive Jacobian.
    pub bilip: Option<f64>,
    /// Cell that broke admissibility, if any.
    pub offending_cell: Option<(usize, usize)>,
    /// Number of sampled pairs (of 10⁴) with `v(x) = v(y)` at grid accuracy
    /// but `|x − y| > h`.
    pub injectivity_violations: usize,
    /// max ‖∇u0‖ over sampled points outside the lens, divided by `T/R`.
    pub u0_bound_constant: f64,
    pub admissible: bool,
}

/// Check the built deformation: gradient decay outside the inclusion,
/// bi-Lipschitz constant, and a randomized grid-level injectivity probe.
pub fn admissibility_report(
    config: &Configuration,
    rng: &mut impl Rng,
) -> Result<AdmissibilityReport> {
    let grid = config.v.grid();
    let n = grid.n();
    let h = grid.h();

    let (bilip, offending_cell) = match bilip_constant(&config.v) {
        Ok(m) => (Some(m), None),
        Err(Error::NonAdmissible { i, j, .. }) => (None, Some((i, j))),
        Err(e) => return Err(e),
    };

    let lens = match &config.geometry {
        InclusionGeometry::Ball { .. } => {
            // identity deformation: everything is trivial
            return Ok(AdmissibilityReport {
                max_grad_dev_outside: 0.0,
                decay_constant: 0.0,
                bilip,
                offending_cell,
                injectivity_violations: 0,
                u0_bound_constant: 0.0,
                admissible: offending_cell.is_none(),
            });
        }
        InclusionGeometry::Lens(l) => l,
    };

    let mut max_dev = 0.0f64;
    let mut max_grad_u0 = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let c = grid.cell_center(i, j);
            if !lens.cell_fully_outside(c, h) {
                continue;
            }
            let g = config.v.gradient_unchecked(i, j);
            max_dev = max_dev.max((g - Mat2::IDENTITY).norm());
            max_grad_u0 = max_grad_u0.max(lens.grad_u0(c).norm());
        }
    }

    let mu = lens.mu_target;
    let f_norm = config.well.f.norm();
    let decay_constant = max_dev / (f_norm * mu.powf(-1.0 / 3.0));
    let u0_bound_constant = max_grad_u0 / (lens.t / lens.rlen);

    let l = grid.halfwidth();
    let mut violations = 0usize;
    for _ in 0..10_000 {
        let x = Vec2::new(rng.gen_range(-l..l), rng.gen_range(-l..l));
        let y = Vec2::new(rng.gen_range(-l..l), rng.gen_range(-l..l));
        if (x - y).norm() <= h {
            continue;
        }
        let vx = config.v.eval(x)?;
        let vy = config.v.eval(y)?;
        if (vx - vy).norm() <= 1e-6 * h {
            violations += 1;
        }
    }

    Ok(AdmissibilityReport {
        max_grad_dev_outside: max_dev,
        decay_constant,
        bilip,
        offending_cell,
        injectivity_violations: violations,
        u0_bound_constant,
        admissible: offending_cell.is_none() && violations == 0,
    })
}
