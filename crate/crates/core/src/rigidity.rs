//! Rigidity diagnostics on discrete fields: selection of low-energy lines
//! avoiding the inclusion, the good-rhombus search with length-distortion
//! certificates, the bad-set measure, the localized lower-bound ratio, and
//! the covering-radius / greedy ball-cover machinery behind the large-volume
//! lower bound.

use crate::construction::LensConstruction;
use crate::error::{Error, Result};
use crate::field::{elastic_density, elastic_energy_ball, segment_energy, ScalarField, VectorField};
use crate::mat2::{closest_rotation, dist_so2, dist_well_unchecked, Mat2, Vec2, WellPair};

/// A probe ball.
#[derive(Clone, Copy, Debug)]
pub struct Ball {
    pub center: Vec2,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

/// Standard probe placement: a ball of radius `radius_frac·rlen` sitting
/// above the lens on the symmetry axis, disjoint from the inclusion.
pub fn lens_probe_ball(lens: &LensConstruction, radius_frac: f64) -> Ball {
    let r = radius_frac * lens.rlen;
    Ball::new(Vec2::new(0.0, lens.t / 2.0 + 1.3 * r), r)
}

/// Measurable region for localized diagnostics.
#[derive(Clone, Copy, Debug)]
pub enum Region {
    Ball(Ball),
    /// Axis-aligned rhombus `|dx|/half_h + |dy|/half_v <= 1`.
    Rhombus {
        center: Vec2,
        half_h: f64,
        half_v: f64,
    },
    Window,
}

impl Region {
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Region::Ball(b) => b.contains(p),
            Region::Rhombus {
                center,
                half_h,
                half_v,
            } => {
                let d = p - *center;
                d.x.abs() / half_h + d.y.abs() / half_v <= 1.0
            }
            Region::Window => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Horizontal,
    Vertical,
}

/// Candidate line for the cross search: offset from the ball center along
/// the scan direction, with its segment energy and inclusion-avoidance flag.
#[derive(Clone, Copy, Debug)]
struct LineCandidate {
    offset: f64,
    energy: f64,
    avoids_m: bool,
}

fn segment_avoids_m(chi: &ScalarField, a: Vec2, b: Vec2) -> bool {
    let h = chi.grid().h();
    let len = (b - a).norm();
    let steps = ((2.0 * len / h).ceil() as usize).max(2);
    for k in 0..=steps {
        let p = a + (b - a) * (k as f64 / steps as f64);
        if chi.dilated_value_at(p) > 0.5 {
            return false;
        }
    }
    true
}

fn scan_lines(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    ball: &Ball,
    axis: Axis,
    half_len: f64,
    max_offset: f64,
) -> Result<Vec<LineCandidate>> {
    let h = chi.grid().h();
    let mut out = Vec::new();
    let steps = (2.0 * max_offset / h).floor() as i64;
    for k in -steps / 2..=steps / 2 {
        let offset = k as f64 * h;
        if offset.abs() >= max_offset {
            continue;
        }
        let (a, b) = match axis {
            Axis::Horizontal => (
                ball.center + Vec2::new(-half_len, offset),
                ball.center + Vec2::new(half_len, offset),
            ),
            Axis::Vertical => (
                ball.center + Vec2::new(offset, -half_len),
                ball.center + Vec2::new(offset, half_len),
            ),
        };
        let energy = segment_energy(chi, v, w, a, b)?;
        out.push(LineCandidate {
            offset,
            energy,
            avoids_m: segment_avoids_m(chi, a, b),
        });
    }
    Ok(out)
}

/// Threshold at the `(1 - theta)` empirical quantile: accepting values at
/// or below it keeps the best `1 - theta` fraction of the population.
fn quantile_threshold(values: &[f64], theta: f64) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = (((1.0 - theta) * (sorted.len() - 1) as f64).floor() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Heights `r` (offsets from the ball center, in length units, spanning
/// `(-delta·R, delta·R)` at grid resolution) whose horizontal segments of
/// half-length `R/2` avoid the inclusion and sit in the best `1 - theta`
/// energy fraction of all scanned lines.
pub fn good_horizontal_lines(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    delta: f64,
    theta: f64,
    ball: &Ball,
) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    let candidates = scan_lines(
        chi,
        v,
        w,
        ball,
        Axis::Horizontal,
        ball.radius / 2.0,
        delta * ball.radius,
    )?;
    select_good(&candidates, theta)
}

fn select_good(candidates: &[LineCandidate], theta: f64) -> Result<Vec<f64>> {
    let energies: Vec<f64> = candidates.iter().map(|c| c.energy).collect();
    let threshold = quantile_threshold(&energies, theta);
    let accepted: Vec<f64> = candidates
        .iter()
        .filter(|c| c.avoids_m && c.energy <= threshold)
        .map(|c| c.offset)
        .collect();
    if accepted.is_empty() {
        return Err(Error::Hypothesis(
            "no admissible line: the inclusion mass in the ball is too large \
             for the requested delta/theta (eta too large)"
                .into(),
        ));
    }
    Ok(accepted)
}

/// Report on the best rhombus found by the homothety scan.
#[derive(Clone, Debug)]
pub struct RhombusReport {
    /// Corners in the order: left, right (horizontal diagonal), top, bottom
    /// (vertical diagonal).
    pub corners: [Vec2; 4],
    /// Homothety parameter of the winning rhombus, in (1/4, 3/4).
    pub rho: f64,
    /// Energies of the six connecting segments:
    /// `[ab, cd, ac, cb, bd, da]` with `a,b` the horizontal and `c,d` the
    /// vertical corners.
    pub segment_energies: [f64; 6],
    /// Inclusion-intersection flags for the same six segments; all false
    /// for a good rhombus.
    pub intersects_m: [bool; 6],
    /// max over the six segments of `|1 − |v(x)−v(y)| / |x−y||`.
    pub max_length_distortion: f64,
    /// max over corners of `|v(x) − (Qx + p)|` for the least-squares rigid
    /// motion fitted to the four corners.
    pub rigid_motion_residual: f64,
    /// Elastic energy of the probe ball, for normalizing the certificates.
    pub ball_elastic: f64,
    /// max over corners of the distance-weighted energy
    /// `h²·Σ e/dist(z, corner)` over the ball.
    pub max_weighted_energy: f64,
}

fn rigid_motion_fit(xs: &[Vec2], ys: &[Vec2]) -> (Mat2, Vec2) {
    let n = xs.len() as f64;
    let mut xbar = Vec2::ZERO;
    let mut ybar = Vec2::ZERO;
    for (x, y) in xs.iter().zip(ys) {
        xbar = xbar + *x;
        ybar = ybar + *y;
    }
    xbar = xbar / n;
    ybar = ybar / n;
    let mut cross = Mat2::ZERO;
    for (x, y) in xs.iter().zip(ys) {
        cross = cross + Mat2::outer(*y - ybar, *x - xbar);
    }
    let q = closest_rotation(&cross);
    let p = ybar - q * xbar;
    (q, p)
}

/// Distance-weighted elastic energy `h²·Σ_cells e(cell)/dist(center, x0)`
/// over the ball, excluding the cell containing `x0` (its mass is O(h) by
/// local integrability of 1/dist).
fn weighted_energy(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    ball: &Ball,
    x0: Vec2,
) -> f64 {
    let grid = chi.grid();
    let n = grid.n();
    let h = grid.h();
    let own = grid.cell_at(x0);
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if own == Some((i, j)) {
                continue;
            }
            let c = grid.cell_center(i, j);
            if !ball.contains(c) {
                continue;
            }
            let dist = (c - x0).norm();
            if dist < 1e-12 {
                continue;
            }
            let g = v.gradient_unchecked(i, j);
            acc += elastic_density(chi.value(i, j), &g, w) / dist;
        }
    }
    acc * h * h
}

/// Search for a rhombus inside `B_{R/m}(center)` whose diagonals and sides
/// avoid the inclusion and carry low 1D energy, scanning the homothety
/// parameter over (1/4, 3/4).
///
/// The cross is built from the best accepted horizontal/vertical lines, the
/// energy and weighted-energy gates use empirical `(1 − theta)` quantiles
/// over the scan population, and the winner minimizes the maximal segment
/// energy among fully good candidates.
#[allow(clippy::too_many_arguments)]
pub fn find_good_rhombus(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    ball: &Ball,
    delta: f64,
    m: f64,
    theta: f64,
    eta: f64,
) -> Result<RhombusReport> {
    if m < 1.0 {
        return Err(Error::Domain(format!("bi-Lipschitz parameter must be >= 1, got {m}")));
    }
    let mass = chi.l1_in_ball(ball.center, ball.radius);
    if mass > eta * ball.radius * ball.radius {
        return Err(Error::Hypothesis(format!(
            "indicator mass {mass:.6} in the probe ball exceeds eta·R² = {:.6}",
            eta * ball.radius * ball.radius
        )));
    }

    let scale = ball.radius / m;
    let hor = scan_lines(chi, v, w, ball, Axis::Horizontal, scale / 2.0, delta * scale)?;
    let ver = scan_lines(chi, v, w, ball, Axis::Vertical, delta * scale, scale / 2.0)?;
    let hor_good = select_good(&hor, theta)?;
    let ver_good = select_good(&ver, theta)?;

    // center the cross on the accepted lines closest to the ball center
    let r0 = hor_good
        .iter()
        .copied()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap();
    let s0 = ver_good
        .iter()
        .copied()
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
        .unwrap();
    let o = ball.center + Vec2::new(s0, r0);
    let half_h = scale / 2.0 - s0.abs();
    let half_v = delta * scale - r0.abs();
    if half_h <= 0.0 || half_v <= 0.0 {
        return Err(Error::SearchFailed("accepted cross lines leave no symmetric extent".into()));
    }

    let ball_elastic = elastic_energy_ball(chi, v, w, ball.center, ball.radius)?;

    const RHO_SAMPLES: usize = 96;
    struct Candidate {
        rho: f64,
        corners: [Vec2; 4],
        energies: [f64; 6],
        intersects: [bool; 6],
        max_side_energy: f64,
        max_weighted: f64,
    }
    let mut candidates = Vec::with_capacity(RHO_SAMPLES);
    for k in 0..RHO_SAMPLES {
        let rho = 0.25 + 0.5 * (k as f64 + 0.5) / RHO_SAMPLES as f64;
        let a = o + Vec2::new(-rho * half_h, 0.0);
        let b = o + Vec2::new(rho * half_h, 0.0);
        let c = o + Vec2::new(0.0, rho * half_v);
        let d = o + Vec2::new(0.0, -rho * half_v);
        let pairs = [(a, b), (c, d), (a, c), (c, b), (b, d), (d, a)];
        let mut energies = [0.0; 6];
        let mut intersects = [false; 6];
        for (idx, (x, y)) in pairs.iter().enumerate() {
            energies[idx] = segment_energy(chi, v, w, *x, *y)?;
            intersects[idx] = !segment_avoids_m(chi, *x, *y);
        }
        let max_side_energy = energies[2..].iter().cloned().fold(0.0f64, f64::max);
        let max_weighted = [a, b, c, d]
            .iter()
            .map(|x0| weighted_energy(chi, v, w, ball, *x0))
            .fold(0.0f64, f64::max);
        candidates.push(Candidate {
            rho,
            corners: [a, b, c, d],
            energies,
            intersects,
            max_side_energy,
            max_weighted,
        });
    }

    let side_threshold =
        quantile_threshold(&candidates.iter().map(|c| c.max_side_energy).collect::<Vec<_>>(), theta);
    let weighted_threshold =
        quantile_threshold(&candidates.iter().map(|c| c.max_weighted).collect::<Vec<_>>(), theta);

    let mut fail_m = 0usize;
    let mut fail_energy = 0usize;
    let mut fail_weighted = 0usize;
    let mut best: Option<&Candidate> = None;
    for cand in &candidates {
        if cand.intersects.iter().any(|&f| f) {
            fail_m += 1;
            continue;
        }
        if cand.max_side_energy > side_threshold {
            fail_energy += 1;
            continue;
        }
        if cand.max_weighted > weighted_threshold {
            fail_weighted += 1;
            continue;
        }
        let max_energy = cand.energies.iter().cloned().fold(0.0f64, f64::max);
        if best.is_none()
            || max_energy
                < best
                    .unwrap()
                    .energies
                    .iter()
                    .cloned()
                    .fold(0.0f64, f64::max)
        {
            best = Some(cand);
        }
    }
    let best = best.ok_or_else(|| {
        Error::SearchFailed(format!(
            "no good rhombus among {RHO_SAMPLES} homothety samples \
             (inclusion hits: {fail_m}, energy gate: {fail_energy}, weighted gate: {fail_weighted})"
        ))
    })?;

    let xs = best.corners;
    let mut ys = [Vec2::ZERO; 4];
    for (k, x) in xs.iter().enumerate() {
        ys[k] = v.eval(*x)?;
    }
    let (q, p) = rigid_motion_fit(&xs, &ys);
    let rigid_motion_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (*y - (q * *x + p)).norm())
        .fold(0.0f64, f64::max);
    let pairs = [
        (xs[0], xs[1]),
        (xs[2], xs[3]),
        (xs[0], xs[2]),
        (xs[2], xs[1]),
        (xs[1], xs[3]),
        (xs[3], xs[0]),
    ];
    let mut max_length_distortion = 0.0f64;
    for (x, y) in pairs {
        let l0 = (y - x).norm();
        let l1 = (v.eval(y)? - v.eval(x)?).norm();
        max_length_distortion = max_length_distortion.max((1.0 - l1 / l0).abs());
    }

    Ok(RhombusReport {
        corners: xs,
        rho: best.rho,
        segment_energies: best.energies,
        intersects_m: best.intersects,
        max_length_distortion,
        rigid_motion_residual,
        ball_elastic,
        max_weighted_energy: best.max_weighted,
    })
}

/// Measure of the set where the gradient is strictly closer to the
/// inclusion well than to the parent well, restricted to `region`.
pub fn bad_set_measure(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    region: &Region,
) -> Result<f64> {
    if chi.grid() != v.grid() {
        return Err(Error::GridMismatch("bad-set measure needs one grid".into()));
    }
    let grid = chi.grid();
    let n = grid.n();
    let h = grid.h();
    let mut count = 0usize;
    for j in 0..n {
        for i in 0..n {
            if !region.contains(grid.cell_center(i, j)) {
                continue;
            }
            let g = v.gradient_unchecked(i, j);
            if dist_well_unchecked(&g, &w.f) < dist_so2(&g) {
                count += 1;
            }
        }
    }
    Ok(h * h * count as f64)
}

/// Localized lower-bound ratio
/// `E_elast(B_R)·R² / ‖chi‖²_{L¹(B_{alpha R})}`, gated on the smallness
/// hypothesis `‖chi‖_{L¹(B_R)} <= eta·R²`. Returns +inf when the inner
/// ball carries no inclusion mass.
pub fn lower_bound_ratio(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    ball: &Ball,
    alpha: f64,
    eta: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let mass = chi.l1_in_ball(ball.center, ball.radius);
    if mass > eta * ball.radius * ball.radius {
        return Err(Error::Hypothesis(format!(
            "smallness hypothesis fails: ‖chi‖_L1(B_R) = {mass:.6} > eta·R² = {:.6}; \
             the localized bound does not apply",
            eta * ball.radius * ball.radius
        )));
    }
    let inner = chi.l1_in_ball(ball.center, alpha * ball.radius);
    if inner == 0.0 {
        return Ok(f64::INFINITY);
    }
    let energy = elastic_energy_ball(chi, v, w, ball.center, ball.radius)?;
    Ok(energy * ball.radius * ball.radius / (inner * inner))
}

/// Which branch of the covering-radius dichotomy a ball satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoveringRegime {
    /// Mass at most 1 and `|M ∩ B_R| = eta0·R²`.
    SurfaceDominated,
    /// Mass above 1 and `|M ∩ B_R| = eta0·|M ∩ B_R|^{-1/3}·R²`.
    SelfAccommodating,
}

/// Smallest radius (at grid resolution) with
/// `r^{-2}·|M ∩ B_r(x)| <= eta0·min(1, |M ∩ B_r(x)|^{-1/3})`, together with
/// the regime at that radius and the relative defining-identity residual.
pub fn covering_radius(
    chi: &ScalarField,
    x: Vec2,
    eta0: f64,
) -> Result<(f64, CoveringRegime, f64)> {
    if !(eta0 > 0.0) {
        return Err(Error::Domain(format!("eta0 must be positive, got {eta0}")));
    }
    let grid = chi.grid();
    let (ci, cj) = grid
        .cell_at(x)
        .ok_or_else(|| Error::Domain("query point outside the window".into()))?;
    if chi.value(ci, cj) < 0.5 {
        return Err(Error::Domain(
            "covering radius is defined at density points of the inclusion".into(),
        ));
    }
    let h = grid.h();
    let n = grid.n();
    let mut dists = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if chi.value(i, j) > 0.5 {
                dists.push((grid.cell_center(i, j) - x).norm());
            }
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let cell_area = h * h;
    let max_r = 4.0 * grid.halfwidth();
    let mut idx = 0usize;
    let mut k = 1u64;
    loop {
        let r = k as f64 * h;
        if r > max_r {
            return Err(Error::SearchFailed(
                "covering radius scan exceeded the window diagonal".into(),
            ));
        }
        while idx < dists.len() && dists[idx] <= r {
            idx += 1;
        }
        let mass = cell_area * idx as f64;
        let rhs = eta0 * 1.0f64.min(mass.powf(-1.0 / 3.0));
        if mass / (r * r) <= rhs {
            let regime = if mass <= 1.0 {
                CoveringRegime::SurfaceDominated
            } else {
                CoveringRegime::SelfAccommodating
            };
            let ideal = rhs * r * r;
            let residual = if mass > 0.0 { (mass - ideal).abs() / mass } else { 1.0 };
            return Ok((r, regime, residual));
        }
        k += 1;
    }
}

/// One accepted ball of the greedy cover.
#[derive(Clone, Copy, Debug)]
pub struct CoverBall {
    pub center: Vec2,
    pub radius: f64,
    pub regime: CoveringRegime,
    /// Relative residual of the defining identity at the stopping radius.
    pub regime_residual: f64,
    /// Inclusion mass inside the full ball.
    pub mass: f64,
    /// Interface + elastic energy localized to the 1/5-shrunken ball.
    pub local_energy: f64,
}

/// Result of the greedy Vitali-style cover.
#[derive(Clone, Debug)]
pub struct CoveringReport {
    pub balls: Vec<CoverBall>,
    /// Every inclusion cell lies within `radius + h` of an accepted center.
    pub covered: bool,
    /// The 1/5-shrunken balls are pairwise disjoint (center-distance test).
    pub disjoint: bool,
    /// `Σ |M ∩ B_{R_i}|^{2/3}` over accepted balls.
    pub sum_mass_two_thirds: f64,
}

/// Greedy ball cover: every inclusion cell proposes its covering-radius
/// ball; balls are accepted in decreasing radius order whenever the
/// 1/5-shrink stays disjoint from all accepted shrinks, until the full
/// balls cover the inclusion (up to one cell width).
pub fn vitali_cover(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    eta0: f64,
) -> Result<CoveringReport> {
    let grid = chi.grid();
    let n = grid.n();
    let h = grid.h();
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if chi.value(i, j) > 0.5 {
                cells.push(grid.cell_center(i, j));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Domain("cover of an empty inclusion".into()));
    }

    let mut candidates = Vec::with_capacity(cells.len());
    for &c in &cells {
        let (r, regime, residual) = covering_radius(chi, c, eta0)?;
        candidates.push((c, r, regime, residual));
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    let mut accepted: Vec<(Vec2, f64, CoveringRegime, f64)> = Vec::new();
    let mut covered = vec![false; cells.len()];
    let mut covered_count = 0usize;
    for (c, r, regime, residual) in candidates {
        if accepted.len() >= 100_000 {
            return Err(Error::SearchFailed("cover did not terminate within 1e5 balls".into()));
        }
        let disjoint = accepted
            .iter()
            .all(|&(ac, ar, _, _)| (c - ac).norm() > (r + ar) / 5.0);
        if !disjoint {
            continue;
        }
        accepted.push((c, r, regime, residual));
        for (k, cell) in cells.iter().enumerate() {
            if !covered[k] && (*cell - c).norm() <= r + h {
                covered[k] = true;
                covered_count += 1;
            }
        }
        if covered_count == cells.len() {
            break;
        }
    }

    let all_covered = covered_count == cells.len();
    let mut disjoint_ok = true;
    for a in 0..accepted.len() {
        for b in a + 1..accepted.len() {
            if (accepted[a].0 - accepted[b].0).norm() <= (accepted[a].1 + accepted[b].1) / 5.0 {
                disjoint_ok = false;
            }
        }
    }

    let mut balls = Vec::with_capacity(accepted.len());
    let mut sum23 = 0.0;
    for &(c, r, regime, residual) in &accepted {
        let mass = chi.l1_in_ball(c, r);
        sum23 += mass.powf(2.0 / 3.0);
        let shrink = r / 5.0;
        let local_elastic = elastic_energy_ball(chi, v, w, c, shrink)?;
        let local_interface =
            chi.contour_length_filtered(|mid| (mid - c).norm() <= shrink);
        balls.push(CoverBall {
            center: c,
            radius: r,
            regime,
            regime_residual: residual,
            mass,
            local_energy: local_elastic + local_interface,
        });
    }

    Ok(CoveringReport {
        balls,
        covered: all_covered,
        disjoint: disjoint_ok,
        sum_mass_two_thirds: sum23,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::build_configuration;
    use crate::field::GridSpec;
    use crate::mat2::WellPair;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    fn well() -> WellPair {
        WellPair::from_lambda(0.5).unwrap()
    }

    #[test]
    fn all_lines_good_on_trivial_field() {
        let g = grid(128, 2.0);
        let chi = ScalarField::zeros(g);
        let v = VectorField::identity(g);
        let ball = Ball::new(Vec2::ZERO, 1.0);
        let lines = good_horizontal_lines(&chi, &v, &well(), 0.2, 0.1, &ball).unwrap();
        // quantile keeps at least the best 1 - theta fraction
        let total = (2.0 * 0.2 * 1.0 / g.h()).floor();
        assert!(lines.len() as f64 >= 0.9 * total * 0.95);
    }

    #[test]
    fn strip_blocks_nearby_lines_only() {
        let g = grid(256, 2.0);
        // thin horizontal strip at height 0.1 of width ~2 cells
        let h = g.h();
        let chi = ScalarField::indicator(g, |p| (p.y - 0.1).abs() <= h);
        let v = VectorField::identity(g);
        let ball = Ball::new(Vec2::ZERO, 1.0);
        let lines = good_horizontal_lines(&chi, &v, &well(), 0.2, 0.1, &ball).unwrap();
        // the one-cell dilation clears at least a band of one cell width
        for r in &lines {
            assert!(
                (r - 0.1).abs() > 1.0 * h,
                "line at {r} too close to the strip"
            );
        }
        assert!(!lines.is_empty());
    }

    #[test]
    fn lens_probe_ball_accepts_most_lines() {
        let g = grid(256, 40.0);
        let config = build_configuration(64.0, &well(), g).unwrap();
        let lens = config.lens().unwrap();
        // ball above the lens, disjoint from it
        let ball = Ball::new(Vec2::new(0.0, lens.t / 2.0 + 7.0), 5.0);
        let lines =
            good_horizontal_lines(&config.chi, &config.v, &config.well, 0.2, 0.1, &ball).unwrap();
        let scanned = (2.0 * 0.2 * ball.radius / g.h()).floor();
        assert!(
            lines.len() as f64 >= (1.0 - 0.1) * scanned * 0.9,
            "acceptance fraction too small: {} of {scanned}",
            lines.len()
        );
    }

    #[test]
    fn rhombus_trivial_and_rigid_motion() {
        let g = grid(128, 2.0);
        let chi = ScalarField::zeros(g);
        let ball = Ball::new(Vec2::ZERO, 1.0);
        let w = well();

        let v_id = VectorField::identity(g);
        let rep = find_good_rhombus(&chi, &v_id, &w, &ball, 0.2, 1.0, 0.1, 0.01).unwrap();
        assert!(rep.max_length_distortion <= 1e-9);
        assert!(rep.segment_energies.iter().all(|&e| e < 1e-12));
        assert!(rep.intersects_m.iter().all(|&f| !f));
        assert!(rep.rho > 0.25 && rep.rho < 0.75);

        // exact rigid motion: distortion and rigid-fit residual vanish
        let q = Mat2::rotation(0.6);
        let shift = Vec2::new(0.3, -0.2);
        let v_rigid = VectorField::from_map(g, |p| q * p + shift);
        let rep = find_good_rhombus(&chi, &v_rigid, &w, &ball, 0.2, 1.0, 0.1, 0.01).unwrap();
        assert!(rep.max_length_distortion <= 1e-9);
        assert!(rep.rigid_motion_residual <= 1e-9);
    }

    #[test]
    fn rhombus_respects_scale_invariants() {
        let g = grid(128, 2.0);
        let chi = ScalarField::zeros(g);
        let v = VectorField::identity(g);
        let ball = Ball::new(Vec2::new(0.2, -0.1), 1.2);
        let m = 1.5;
        let delta = 0.2;
        let rep = find_good_rhombus(&chi, &v, &well(), &ball, delta, m, 0.1, 0.01).unwrap();
        let ab = (rep.corners[0] - rep.corners[1]).norm();
        let cd = (rep.corners[2] - rep.corners[3]).norm();
        let scale = ball.radius / m;
        assert!(ab >= scale / 4.0 && ab <= scale * 4.0);
        assert!(cd >= delta * scale / 4.0 && cd <= delta * scale * 4.0);
    }

    #[test]
    fn rhombus_hypothesis_gate() {
        let g = grid(128, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.8);
        let v = VectorField::identity(g);
        let ball = Ball::new(Vec2::ZERO, 1.0);
        match find_good_rhombus(&chi, &v, &well(), &ball, 0.2, 1.0, 0.1, 0.01) {
            Err(Error::Hypothesis(_)) => {}
            other => panic!("expected hypothesis gate, got {other:?}"),
        }
    }

    #[test]
    fn bad_set_trivial_values() {
        let g = grid(64, 1.0);
        let w = well();
        let chi = ScalarField::zeros(g);
        let region = Region::Ball(Ball::new(Vec2::ZERO, 0.7));
        let v_id = VectorField::identity(g);
        assert_eq!(bad_set_measure(&chi, &v_id, &w, &region).unwrap(), 0.0);

        // v = F x everywhere: gradient sits on the inclusion well
        let vf = VectorField::from_map(g, |p| w.f * p);
        let m = bad_set_measure(&chi, &vf, &w, &region).unwrap();
        let area: f64 = {
            let n = g.n();
            let mut count = 0;
            for j in 0..n {
                for i in 0..n {
                    if region.contains(g.cell_center(i, j)) {
                        count += 1;
                    }
                }
            }
            g.h() * g.h() * count as f64
        };
        assert!((m - area).abs() < 1e-12);
    }

    #[test]
    fn bad_set_monotone_in_region() {
        let g = grid(128, 40.0);
        let config = build_configuration(64.0, &well(), g).unwrap();
        let small = Region::Ball(Ball::new(Vec2::ZERO, 10.0));
        let big = Region::Ball(Ball::new(Vec2::ZERO, 20.0));
        let m_small = bad_set_measure(&config.chi, &config.v, &config.well, &small).unwrap();
        let m_big = bad_set_measure(&config.chi, &config.v, &config.well, &big).unwrap();
        assert!(m_small <= m_big + 1e-12);
    }

    #[test]
    fn ratio_sentinel_and_gate() {
        let g = grid(128, 2.0);
        let w = well();
        let v = VectorField::identity(g);
        // empty inner ball -> sentinel
        let chi = ScalarField::disc(g, Vec2::new(0.9, 0.0), 0.05);
        let ball = Ball::new(Vec2::new(-0.5, 0.0), 0.4);
        let ratio = lower_bound_ratio(&chi, &v, &w, &ball, 0.25, 0.05).unwrap();
        assert!(ratio.is_infinite());

        // hypothesis violation: chi = 1 on the inner ball, far too much mass
        let chi_full = ScalarField::disc(g, Vec2::ZERO, 0.5);
        let ball0 = Ball::new(Vec2::ZERO, 0.6);
        let vf = VectorField::from_map(g, |p| w.f * p);
        match lower_bound_ratio(&chi_full, &vf, &w, &ball0, 0.5, 0.01) {
            Err(Error::Hypothesis(_)) => {}
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn ratio_monotone_in_energy() {
        let g = grid(128, 2.0);
        let w = well();
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.05);
        let ball = Ball::new(Vec2::ZERO, 1.0);
        let mild = VectorField::from_map(g, |p| {
            Vec2::new(p.x + 0.01 * (3.0 * p.y).sin(), p.y)
        });
        let strong = VectorField::from_map(g, |p| {
            Vec2::new(p.x + 0.05 * (3.0 * p.y).sin(), p.y)
        });
        let r1 = lower_bound_ratio(&chi, &mild, &w, &ball, 0.25, 0.95).unwrap();
        let r2 = lower_bound_ratio(&chi, &strong, &w, &ball, 0.25, 0.95).unwrap();
        assert!(r2 >= r1);
    }

    #[test]
    fn covering_radius_disc_mass_identity() {
        // small ball: at R(x) the mass identity |M ∩ B_R| = eta0·R² holds
        let g = grid(512, 2.0);
        let mu = 0.5;
        let r_disc = (mu / std::f64::consts::PI).sqrt();
        let chi = ScalarField::disc(g, Vec2::ZERO, r_disc);
        let (r, regime, residual) = covering_radius(&chi, Vec2::ZERO, 0.01).unwrap();
        assert_eq!(regime, CoveringRegime::SurfaceDominated);
        assert!(residual <= 0.1, "identity residual {residual}");
        // and R(x) <= mu^(1/2)/sqrt(eta0) in the small regime
        assert!(r <= mu.sqrt() / 0.01f64.sqrt() + g.h());
    }

    #[test]
    fn covering_radius_single_cell() {
        let g = grid(128, 2.0);
        let mut chi = ScalarField::zeros(g);
        chi.set_value(64, 64, 1.0);
        let c = g.cell_center(64, 64);
        let (r, regime, _) = covering_radius(&chi, c, 0.01).unwrap();
        assert_eq!(regime, CoveringRegime::SurfaceDominated);
        // r ~ h/sqrt(eta0)
        let expect = g.h() / 0.01f64.sqrt();
        assert!(r <= 2.0 * expect && r >= expect / 10.0, "r = {r}, expect ~{expect}");
    }

    #[test]
    fn covering_radius_rejects_outside_points() {
        let g = grid(128, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.3);
        assert!(covering_radius(&chi, Vec2::new(1.5, 1.5), 0.01).is_err());
    }

    #[test]
    fn cover_single_and_two_balls() {
        let g = grid(256, 2.0);
        let w = well();
        let v = VectorField::identity(g);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.15);
        let report = vitali_cover(&chi, &v, &w, 0.01).unwrap();
        assert!(report.covered);
        assert!(report.disjoint);
        assert_eq!(report.balls.len(), 1);

        let two = ScalarField::indicator(g, |p| {
            (p - Vec2::new(-1.2, -1.2)).norm() <= 0.1 || (p - Vec2::new(1.2, 1.2)).norm() <= 0.1
        });
        let report = vitali_cover(&two, &v, &w, 0.01).unwrap();
        assert!(report.covered);
        assert!(report.disjoint);
        assert_eq!(report.balls.len(), 2);
    }
}
