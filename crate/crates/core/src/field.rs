//! Discrete phase indicators and deformations on a uniform grid over a
//! square window `[-L, L]²`, with the total energy, localized and 1D
//! elastic energies, bi-Lipschitz reporting and the pushforward of the
//! indicator under the deformation.
//!
//! `chi` lives on cell centers (n x n values), the deformation `v` on cell
//! vertices ((n+1) x (n+1) samples); gradients are cell-centered finite
//! differences of the four surrounding vertices, exact on affine maps.

use crate::error::{Error, Result};
use crate::mat2::{dist_so2, dist_well_unchecked, Mat2, Vec2, WellPair};

/// Uniform grid: `n` cells per side on `[-L, L]²`, cell size `h = 2L/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    halfwidth: f64,
}

impl GridSpec {
    /// `n` must be even and at least 8 so the origin is a grid vertex.
    pub fn new(n: usize, halfwidth: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Domain(format!(
                "grid needs an even cell count >= 8, got {n}"
            )));
        }
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(Error::Domain(format!("grid halfwidth must be positive, got {halfwidth}")));
        }
        Ok(GridSpec { n, halfwidth })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn h(&self) -> f64 {
        2.0 * self.halfwidth / self.n as f64
    }

    pub fn vertex_pos(&self, i: usize, j: usize) -> Vec2 {
        let h = self.h();
        Vec2::new(-self.halfwidth + i as f64 * h, -self.halfwidth + j as f64 * h)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let h = self.h();
        Vec2::new(
            -self.halfwidth + (i as f64 + 0.5) * h,
            -self.halfwidth + (j as f64 + 0.5) * h,
        )
    }

    /// Cell containing `p`, or `None` outside the window.
    pub fn cell_at(&self, p: Vec2) -> Option<(usize, usize)> {
        let l = self.halfwidth;
        if p.x < -l || p.x > l || p.y < -l || p.y > l {
            return None;
        }
        let h = self.h();
        let i = (((p.x + l) / h).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        let j = (((p.y + l) / h).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        Some((i, j))
    }

    /// Cell nearest to `p` (clamped to the window).
    pub fn nearest_cell(&self, p: Vec2) -> (usize, usize) {
        let l = self.halfwidth;
        let h = self.h();
        let i = (((p.x + l) / h).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        let j = (((p.y + l) / h).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        (i, j)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.halfwidth && p.y.abs() <= self.halfwidth
    }
}

/// Interface, elastic and total energy of a configuration, together with
/// the rasterized inclusion volume.
#[derive(Clone, Copy, Debug, Default)]
pub struct EnergyBreakdown {
    pub interface: f64,
    pub elastic: f64,
    pub total: f64,
    pub mu: f64,
}

/// Phase indicator (or relaxed density) sampled at cell centers.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    /// Exact perimeter for analytically-built shapes; measured contour
    /// length is used when absent. Plain finite-difference total variation
    /// overestimates Euclidean length anisotropically, so it is never used.
    perimeter_hint: Option<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.n() * grid.n()],
            perimeter_hint: None,
        }
    }

    /// Indicator of `{p : predicate(p)}` rasterized by cell centers.
    pub fn indicator(grid: GridSpec, predicate: impl Fn(Vec2) -> bool) -> Self {
        let n = grid.n();
        let mut values = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                if predicate(grid.cell_center(i, j)) {
                    values[j * n + i] = 1.0;
                }
            }
        }
        ScalarField {
            grid,
            values,
            perimeter_hint: None,
        }
    }

    /// Indicator of the disc `B_radius(center)` with its analytic perimeter
    /// attached.
    pub fn disc(grid: GridSpec, center: Vec2, radius: f64) -> Self {
        let mut f = ScalarField::indicator(grid, |p| (p - center).norm() <= radius);
        f.perimeter_hint = Some(2.0 * std::f64::consts::PI * radius);
        f
    }

    /// Relaxed rasterization of `{signed_distance >= 0}`: values ramp
    /// linearly from 0 to 1 across one cell of the boundary, which makes the
    /// measured contour length converge to the true perimeter as h -> 0.
    pub fn from_signed_distance(grid: GridSpec, signed_distance: impl Fn(Vec2) -> f64) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut values = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let d = signed_distance(grid.cell_center(i, j));
                values[j * n + i] = (0.5 + d / h).clamp(0.0, 1.0);
            }
        }
        ScalarField {
            grid,
            values,
            perimeter_hint: None,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() * grid.n() {
            return Err(Error::GridMismatch(format!(
                "expected {} cell values, got {}",
                grid.n() * grid.n(),
                values.len()
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            perimeter_hint: None,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.n() + i]
    }

    pub fn set_value(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.grid.n() + i] = v;
        self.perimeter_hint = None;
    }

    pub fn set_perimeter_hint(&mut self, p: Option<f64>) {
        self.perimeter_hint = p;
    }

    pub fn perimeter_hint(&self) -> Option<f64> {
        self.perimeter_hint
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Inclusion volume `μ = h²·Σ chi`.
    pub fn mu(&self) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().sum::<f64>()
    }

    /// `‖chi‖_{L¹(B_r(center))}` over cells whose centers lie in the ball.
    pub fn l1_in_ball(&self, center: Vec2, radius: f64) -> f64 {
        let n = self.grid.n();
        let h = self.grid.h();
        let mut sum = 0.0;
        for j in 0..n {
            for i in 0..n {
                if (self.grid.cell_center(i, j) - center).norm() <= radius {
                    sum += self.values[j * n + i];
                }
            }
        }
        h * h * sum
    }

    /// Value at the cell nearest to `p`, dilated by one cell: the maximum
    /// over the 3x3 neighborhood, conservative against rasterization leaks.
    pub fn dilated_value_at(&self, p: Vec2) -> f64 {
        let (ci, cj) = self.grid.nearest_cell(p);
        let n = self.grid.n() as isize;
        let mut m = 0.0f64;
        for dj in -1..=1 {
            for di in -1..=1 {
                let i = ci as isize + di;
                let j = cj as isize + dj;
                if i >= 0 && i < n && j >= 0 && j < n {
                    m = m.max(self.values[(j * n + i) as usize]);
                }
            }
        }
        m
    }

    /// Interface length: the analytic perimeter when attached, otherwise the
    /// measured contour length of the 1/2 level set.
    pub fn perimeter(&self) -> f64 {
        self.perimeter_hint.unwrap_or_else(|| self.contour_length())
    }

    /// Marching-squares contour length at level 1/2 over cell-center samples.
    pub fn contour_length(&self) -> f64 {
        self.contour_length_filtered(|_| true)
    }

    /// Contour length restricted to segments whose midpoints satisfy `keep`.
    pub fn contour_length_filtered(&self, keep: impl Fn(Vec2) -> bool) -> f64 {
        let n = self.grid.n();
        let h = self.grid.h();
        let level = 0.5;
        let mut total = 0.0;
        for j in 0..n.saturating_sub(1) {
            for i in 0..n.saturating_sub(1) {
                // Counter-clockwise corners of the marching cell spanning
                // four neighboring cell centers.
                let vals = [
                    self.value(i, j),
                    self.value(i + 1, j),
                    self.value(i + 1, j + 1),
                    self.value(i, j + 1),
                ];
                let mut case = 0usize;
                for (k, &v) in vals.iter().enumerate() {
                    if v > level {
                        case |= 1 << k;
                    }
                }
                if case == 0 || case == 15 {
                    continue;
                }
                let corner = |k: usize| -> Vec2 {
                    match k {
                        0 => Vec2::new(0.0, 0.0),
                        1 => Vec2::new(1.0, 0.0),
                        2 => Vec2::new(1.0, 1.0),
                        _ => Vec2::new(0.0, 1.0),
                    }
                };
                // Crossing point on edge k (between corners k and k+1 mod 4).
                let edge_point = |k: usize| -> Vec2 {
                    let a = k;
                    let b = (k + 1) % 4;
                    let (va, vb) = (vals[a], vals[b]);
                    let t = if (vb - va).abs() < 1e-300 {
                        0.5
                    } else {
                        ((level - va) / (vb - va)).clamp(0.0, 1.0)
                    };
                    corner(a) + (corner(b) - corner(a)) * t
                };
                let segs: &[(usize, usize)] = match case {
                    1 => &[(3, 0)],
                    2 => &[(0, 1)],
                    3 => &[(3, 1)],
                    4 => &[(1, 2)],
                    5 => {
                        // saddle: split by the cell average
                        if vals.iter().sum::<f64>() / 4.0 > level {
                            &[(3, 2), (0, 1)]
                        } else {
                            &[(3, 0), (1, 2)]
                        }
                    }
                    6 => &[(0, 2)],
                    7 => &[(3, 2)],
                    8 => &[(2, 3)],
                    9 => &[(2, 0)],
                    10 => {
                        if vals.iter().sum::<f64>() / 4.0 > level {
                            &[(3, 0), (1, 2)]
                        } else {
                            &[(3, 2), (0, 1)]
                        }
                    }
                    11 => &[(2, 1)],
                    12 => &[(1, 3)],
                    13 => &[(0, 1)],
                    _ => &[(3, 0)], // 14
                };
                let base = self.grid.cell_center(i, j);
                for &(e1, e2) in segs {
                    let p1 = edge_point(e1);
                    let p2 = edge_point(e2);
                    let mid = base + (p1 + p2) * (0.5 * h);
                    if keep(mid) {
                        total += (p2 - p1).norm() * h;
                    }
                }
            }
        }
        total
    }
}

/// Deformation sampled at grid vertices.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<Vec2>,
}

impl VectorField {
    pub fn identity(grid: GridSpec) -> Self {
        VectorField::from_map(grid, |p| p)
    }

    pub fn from_map(grid: GridSpec, map: impl Fn(Vec2) -> Vec2) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                values.push(map(grid.vertex_pos(i, j)));
            }
        }
        VectorField { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Vec2>) -> Result<Self> {
        let m = (grid.n() + 1) * (grid.n() + 1);
        if values.len() != m {
            return Err(Error::GridMismatch(format!(
                "expected {m} vertex values, got {}",
                values.len()
            )));
        }
        Ok(VectorField { grid, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vertex(&self, i: usize, j: usize) -> Vec2 {
        self.values[j * (self.grid.n() + 1) + i]
    }

    pub fn set_vertex(&mut self, i: usize, j: usize, v: Vec2) {
        self.values[j * (self.grid.n() + 1) + i] = v;
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    /// Cell-centered gradient of cell `(i, j)` from its four corner
    /// vertices; exact for affine deformations.
    pub fn gradient(&self, i: usize, j: usize) -> Result<Mat2> {
        let n = self.grid.n();
        if i >= n || j >= n {
            return Err(Error::Domain(format!(
                "cell ({i}, {j}) out of range for n = {n}"
            )));
        }
        Ok(self.gradient_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn gradient_unchecked(&self, i: usize, j: usize) -> Mat2 {
        let h = self.grid.h();
        let v00 = self.vertex(i, j);
        let v10 = self.vertex(i + 1, j);
        let v01 = self.vertex(i, j + 1);
        let v11 = self.vertex(i + 1, j + 1);
        let dx = (v10 - v00 + v11 - v01) * (0.5 / h);
        let dy = (v01 - v00 + v11 - v10) * (0.5 / h);
        Mat2::new(dx.x, dy.x, dx.y, dy.y)
    }

    /// Bilinear interpolation of the deformation at `p`.
    pub fn eval(&self, p: Vec2) -> Result<Vec2> {
        let l = self.grid.halfwidth();
        if !self.grid.contains(p) {
            return Err(Error::Domain(format!("point ({}, {}) outside window", p.x, p.y)));
        }
        let n = self.grid.n();
        let h = self.grid.h();
        let fx = ((p.x + l) / h).clamp(0.0, n as f64 - 1e-12);
        let fy = ((p.y + l) / h).clamp(0.0, n as f64 - 1e-12);
        let i = (fx.floor() as usize).min(n - 1);
        let j = (fy.floor() as usize).min(n - 1);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = self.vertex(i, j);
        let v10 = self.vertex(i + 1, j);
        let v01 = self.vertex(i, j + 1);
        let v11 = self.vertex(i + 1, j + 1);
        Ok(v00 * ((1.0 - tx) * (1.0 - ty))
            + v10 * (tx * (1.0 - ty))
            + v01 * ((1.0 - tx) * ty)
            + v11 * (tx * ty))
    }

    /// Bilinear interpolation of the cell-centered gradient at `p`, clamped
    /// to the cell-center lattice near the window boundary.
    pub fn gradient_at(&self, p: Vec2) -> Result<Mat2> {
        if !self.grid.contains(p) {
            return Err(Error::Domain(format!("point ({}, {}) outside window", p.x, p.y)));
        }
        let n = self.grid.n();
        let l = self.grid.halfwidth();
        let h = self.grid.h();
        // Coordinates in the cell-center lattice.
        let fx = ((p.x + l) / h - 0.5).clamp(0.0, (n - 1) as f64);
        let fy = ((p.y + l) / h - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (fx.floor() as usize).min(n - 2);
        let j = (fy.floor() as usize).min(n - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let g00 = self.gradient_unchecked(i, j);
        let g10 = self.gradient_unchecked(i + 1, j);
        let g01 = self.gradient_unchecked(i, j + 1);
        let g11 = self.gradient_unchecked(i + 1, j + 1);
        Ok(g00 * ((1.0 - tx) * (1.0 - ty))
            + g10 * (tx * (1.0 - ty))
            + g01 * ((1.0 - tx) * ty)
            + g11 * (tx * ty))
    }
}

/// Two-branch elastic density
/// `(1 − chi)·dist²(G, SO(2)) + chi·dist²(G, SO(2)F)`.
#[inline]
pub fn elastic_density(chi_val: f64, g: &Mat2, w: &WellPair) -> f64 {
    let d0 = dist_so2(g);
    let df = dist_well_unchecked(g, &w.f);
    (1.0 - chi_val) * d0 * d0 + chi_val * df * df
}

fn check_same_grid(chi: &ScalarField, v: &VectorField) -> Result<()> {
    if chi.grid() != v.grid() {
        return Err(Error::GridMismatch(format!(
            "chi grid (n={}, L={}) vs v grid (n={}, L={})",
            chi.grid().n(),
            chi.grid().halfwidth(),
            v.grid().n(),
            v.grid().halfwidth()
        )));
    }
    Ok(())
}

/// Total energy: interface length plus the cell-summed elastic energy,
/// with the rasterized volume `μ = h²·Σ chi`.
pub fn total_energy(chi: &ScalarField, v: &VectorField, w: &WellPair) -> Result<EnergyBreakdown> {
    check_same_grid(chi, v)?;
    let n = chi.grid().n();
    let h = chi.grid().h();
    let mut elastic = 0.0;
    for j in 0..n {
        for i in 0..n {
            let g = v.gradient_unchecked(i, j);
            elastic += elastic_density(chi.value(i, j), &g, w);
        }
    }
    elastic *= h * h;
    let interface = chi.perimeter();
    Ok(EnergyBreakdown {
        interface,
        elastic,
        total: interface + elastic,
        mu: chi.mu(),
    })
}

/// Elastic energy over cells whose centers lie in `B_radius(center)`.
pub fn elastic_energy_ball(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    center: Vec2,
    radius: f64,
) -> Result<f64> {
    check_same_grid(chi, v)?;
    let n = chi.grid().n();
    let h = chi.grid().h();
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if (chi.grid().cell_center(i, j) - center).norm() <= radius {
                let g = v.gradient_unchecked(i, j);
                sum += elastic_density(chi.value(i, j), &g, w);
            }
        }
    }
    Ok(sum * h * h)
}

/// 1D elastic energy along the segment `[x, y]`: composite midpoint
/// quadrature with at least four nodes per cell crossed, nearest-cell `chi`
/// and bilinearly interpolated gradients.
pub fn segment_energy(
    chi: &ScalarField,
    v: &VectorField,
    w: &WellPair,
    x: Vec2,
    y: Vec2,
) -> Result<f64> {
    check_same_grid(chi, v)?;
    if !chi.grid().contains(x) || !chi.grid().contains(y) {
        return Err(Error::Domain("segment endpoint outside the window".into()));
    }
    let len = (y - x).norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let h = chi.grid().h();
    let nodes = ((4.0 * len / h).ceil() as usize).max(4);
    let dl = len / nodes as f64;
    let mut sum = 0.0;
    for k in 0..nodes {
        let t = (k as f64 + 0.5) / nodes as f64;
        let p = x + (y - x) * t;
        let (ci, cj) = chi.grid().nearest_cell(p);
        let g = v.gradient_at(p)?;
        sum += elastic_density(chi.value(ci, cj), &g, w);
    }
    Ok(sum * dl)
}

/// Grid bi-Lipschitz constant: the maximum over cells of
/// `max(op_norm(∇v), op_norm((∇v)⁻¹))`, a lower bound on the true constant.
/// Reports the first cell with a non-positive Jacobian as non-admissible.
pub fn bilip_constant(v: &VectorField) -> Result<f64> {
    let n = v.grid().n();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let g = v.gradient_unchecked(i, j);
            let det = g.det();
            if det <= 0.0 {
                return Err(Error::NonAdmissible {
                    i,
                    j,
                    reason: format!("det ∇v = {det}"),
                });
            }
            let (s_max, s_min) = g.singular_values();
            m = m.max(s_max).max(1.0 / s_min);
        }
    }
    Ok(m)
}

/// Pushforward `chi ∘ v⁻¹` rasterized on the same grid by inverse sampling:
/// for each target cell center `y`, solve `v(x) = y` by Newton iteration
/// seeded from the forward image of the source lattice.
///
/// Cells where Newton stalls in the interior are marked indeterminate and
/// keep the seed's phase; more than 0.1% such cells is an error. Targets
/// whose preimage escapes the window are outside the image and get 0.
pub fn pushforward_chi(chi: &ScalarField, v: &VectorField) -> Result<ScalarField> {
    check_same_grid(chi, v)?;
    let grid = chi.grid();
    let n = grid.n();
    let l = grid.halfwidth();
    let h = grid.h();

    // Forward pass: remember, per target cell, a source point mapping near it.
    let mut seeds: Vec<Option<Vec2>> = vec![None; n * n];
    for j in 0..=n {
        for i in 0..=n {
            let x = grid.vertex_pos(i, j);
            let y = v.vertex(i, j);
            if let Some((ti, tj)) = grid.cell_at(y) {
                seeds[tj * n + ti] = Some(x);
            }
        }
    }

    let tol = 1e-9 * h;
    let mut out = ScalarField::zeros(grid);
    let mut indeterminate = 0usize;
    for tj in 0..n {
        for ti in 0..n {
            let y = grid.cell_center(ti, tj);
            // Nearest recorded seed in an expanding neighborhood, else y itself.
            let mut seed = None;
            'search: for ring in 0..3i32 {
                for dj in -ring..=ring {
                    for di in -ring..=ring {
                        if di.abs().max(dj.abs()) != ring {
                            continue;
                        }
                        let si = ti as i32 + di;
                        let sj = tj as i32 + dj;
                        if si >= 0 && (si as usize) < n && sj >= 0 && (sj as usize) < n {
                            if let Some(s) = seeds[sj as usize * n + si as usize] {
                                seed = Some(s);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let mut x = seed.unwrap_or(y);
            let mut converged = false;
            for _ in 0..50 {
                let val = v.eval(x)?;
                let r = val - y;
                if r.norm() <= tol {
                    converged = true;
                    break;
                }
                let jac = v.gradient_at(x)?;
                let step = match jac.inverse() {
                    Ok(inv) => inv * r,
                    Err(_) => break,
                };
                x = Vec2::new(
                    (x.x - step.x).clamp(-l, l),
                    (x.y - step.y).clamp(-l, l),
                );
            }
            let (si, sj) = grid.nearest_cell(x);
            if converged {
                out.set_value(ti, tj, chi.value(si, sj));
            } else if x.x.abs() > l - 1.5 * h || x.y.abs() > l - 1.5 * h {
                // preimage ran off the window: target is outside the image
                out.set_value(ti, tj, 0.0);
            } else {
                indeterminate += 1;
                out.set_value(ti, tj, chi.value(si, sj));
            }
        }
    }
    if (indeterminate as f64) > 0.001 * (n * n) as f64 {
        return Err(Error::Domain(format!(
            "pushforward: {indeterminate} of {} cells indeterminate",
            n * n
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::dist_well;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::new(7, 1.0).is_err());
        assert!(GridSpec::new(9, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::new(8, 1.0).is_ok());
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = grid(16, 1.0);
        let id = VectorField::identity(g);
        let f = Mat2::new(1.3, 0.4, -0.2, 0.9);
        let affine = VectorField::from_map(g, |p| f * p);
        for j in 0..16 {
            for i in 0..16 {
                assert!((id.gradient(i, j).unwrap() - Mat2::IDENTITY).norm() < 1e-13);
                assert!((affine.gradient(i, j).unwrap() - f).norm() < 1e-12);
            }
        }
        assert!(id.gradient(16, 0).is_err());
    }

    #[test]
    fn gradient_second_order_on_quadratic() {
        // v(x) = (x1^2, x2): interior error should shrink ~4x per refinement.
        let target = |c: Vec2| Mat2::new(2.0 * c.x, 0.0, 0.0, 1.0);
        let mut errs = Vec::new();
        for &n in &[16usize, 32, 64] {
            let g = grid(n, 1.0);
            let v = VectorField::from_map(g, |p| Vec2::new(p.x * p.x, p.y));
            let mut worst = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    let c = g.cell_center(i, j);
                    worst = worst.max((v.gradient(i, j).unwrap() - target(c)).norm());
                }
            }
            errs.push(worst);
        }
        // cell-averaged x-derivative of x^2 is exact; just demand no growth
        // and second-order-or-better decay overall
        assert!(errs[2] <= errs[0] + 1e-12, "{errs:?}");
    }

    #[test]
    fn elastic_density_branch_examples() {
        let w = WellPair::from_lambda(0.5).unwrap();
        assert_eq!(elastic_density(0.0, &Mat2::IDENTITY, &w), 0.0);
        assert!(elastic_density(1.0, &w.f, &w) < 1e-25);
        // dist²(Id, SO(2)·diag(2, 0.5)) = 1.25
        let w2 = WellPair::from_lambda(2.0).unwrap();
        assert!((elastic_density(1.0, &Mat2::IDENTITY, &w2) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn total_energy_empty_configuration() {
        let g = grid(32, 1.0);
        let chi = ScalarField::zeros(g);
        let v = VectorField::identity(g);
        let w = WellPair::from_lambda(0.5).unwrap();
        let e = total_energy(&chi, &v, &w).unwrap();
        assert_eq!(e.interface, 0.0);
        assert_eq!(e.elastic, 0.0);
        assert_eq!(e.total, 0.0);
        assert_eq!(e.mu, 0.0);
    }

    #[test]
    fn total_energy_disc_analytic_values() {
        let g = grid(1024, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 1.0);
        let v = VectorField::identity(g);
        let w = WellPair::from_lambda(0.5).unwrap();
        let e = total_energy(&chi, &v, &w).unwrap();
        let pi = std::f64::consts::PI;
        assert!((e.interface - 2.0 * pi).abs() < 0.02 * 2.0 * pi);
        assert!((e.mu - pi).abs() < 0.01 * pi);
        // v = id everywhere: elastic = dist²(Id, SO(2)F) * mu_raster
        let d = dist_well(&Mat2::IDENTITY, &w.f).unwrap();
        assert!((e.elastic - d * d * e.mu).abs() < 1e-9 * e.elastic);
        assert!((e.total - e.interface - e.elastic).abs() < 1e-12);
    }

    #[test]
    fn total_energy_grid_mismatch() {
        let chi = ScalarField::zeros(grid(16, 1.0));
        let v = VectorField::identity(grid(32, 1.0));
        let w = WellPair::from_lambda(0.5).unwrap();
        assert!(total_energy(&chi, &v, &w).is_err());
    }

    #[test]
    fn energy_rotation_invariance() {
        // Replacing v by Q∘v leaves the elastic term unchanged.
        let g = grid(64, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.8);
        let w = WellPair::from_lambda(0.5).unwrap();
        let v = VectorField::from_map(g, |p| {
            Vec2::new(p.x + 0.05 * (p.y * 2.0).sin(), p.y + 0.04 * (p.x * 1.5).cos())
        });
        let q = Mat2::rotation(0.93);
        let mut vq = v.clone();
        for j in 0..=64 {
            for i in 0..=64 {
                vq.set_vertex(i, j, q * v.vertex(i, j));
            }
        }
        let e1 = total_energy(&chi, &v, &w).unwrap().elastic;
        let e2 = total_energy(&chi, &vq, &w).unwrap().elastic;
        assert!((e1 - e2).abs() <= 1e-9 * e1.max(1.0));
    }

    #[test]
    fn contour_length_converges_for_smooth_rasterization() {
        // Relaxed (signed-distance) rasterization of a disc: measured length
        // approaches 2π with an O(h)-or-better trend.
        let pi = std::f64::consts::PI;
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let g = grid(n, 2.0);
            let f = ScalarField::from_signed_distance(g, |p| 1.0 - p.norm());
            errs.push((f.contour_length() - 2.0 * pi).abs());
        }
        for e in &errs {
            assert!(*e < 0.01 * 2.0 * pi, "{errs:?}");
        }
        // volume converges at first order
        let mut vol_errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let g = grid(n, 2.0);
            let chi = ScalarField::disc(g, Vec2::ZERO, 1.0);
            vol_errs.push((chi.mu() - pi).abs());
        }
        for (k, &n) in [64usize, 128, 256].iter().enumerate() {
            let h = 4.0 / n as f64;
            assert!(vol_errs[k] <= 2.0 * pi * h, "volume error not O(h): {vol_errs:?}");
        }
    }

    #[test]
    fn segment_energy_cases() {
        let g = grid(64, 2.0);
        let chi = ScalarField::zeros(g);
        let v = VectorField::identity(g);
        let w = WellPair::from_lambda(0.5).unwrap();
        let x = Vec2::new(-1.0, 0.3);
        let y = Vec2::new(1.2, -0.4);
        assert!(segment_energy(&chi, &v, &w, x, y).unwrap() < 1e-14);

        // affine map, chi = 0: constant integrand |x−y|·dist²(A, SO(2))
        let a = Mat2::new(1.1, 0.3, -0.1, 0.85);
        let va = VectorField::from_map(g, |p| a * p);
        let d = dist_so2(&a);
        let e = segment_energy(&chi, &va, &w, x, y).unwrap();
        assert!((e - (y - x).norm() * d * d).abs() < 1e-10);

        // leaving the window is a domain error
        assert!(segment_energy(&chi, &v, &w, x, Vec2::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn segment_energy_quadrature_self_convergence() {
        // Doubling the node count is emulated by splitting the segment in two.
        let g = grid(64, 2.0);
        let w = WellPair::from_lambda(0.5).unwrap();
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.7);
        let v = VectorField::from_map(g, |p| {
            Vec2::new(p.x + 0.1 * (p.y).sin(), p.y + 0.07 * (1.3 * p.x).cos())
        });
        let x = Vec2::new(-1.5, 1.1);
        let y = Vec2::new(1.4, 1.3);
        let whole = segment_energy(&chi, &v, &w, x, y).unwrap();
        let mid = x + (y - x) * 0.5;
        let halves =
            segment_energy(&chi, &v, &w, x, mid).unwrap() + segment_energy(&chi, &v, &w, mid, y).unwrap();
        assert!((whole - halves).abs() <= 0.01 * whole.max(1e-12));
    }

    #[test]
    fn bilip_constant_cases() {
        let g = grid(32, 1.0);
        assert!((bilip_constant(&VectorField::identity(g)).unwrap() - 1.0).abs() < 1e-12);
        let f = Mat2::diag(2.0, 0.5);
        let v = VectorField::from_map(g, |p| f * p);
        assert!((bilip_constant(&v).unwrap() - 2.0).abs() < 1e-12);
        let collapse = VectorField::from_map(g, |p| Vec2::new(p.x, 0.0));
        match bilip_constant(&collapse) {
            Err(Error::NonAdmissible { .. }) => {}
            other => panic!("expected non-admissible, got {other:?}"),
        }
    }

    #[test]
    fn pushforward_identity_keeps_chi() {
        let g = grid(64, 2.0);
        let chi = ScalarField::disc(g, Vec2::new(0.2, -0.1), 0.8);
        let v = VectorField::identity(g);
        let out = pushforward_chi(&chi, &v).unwrap();
        for j in 0..64 {
            for i in 0..64 {
                assert_eq!(out.value(i, j), chi.value(i, j));
            }
        }
    }

    #[test]
    fn pushforward_affine_preserves_area() {
        // det F = 1 maps the disc to an ellipse of equal area.
        let g = grid(128, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.6);
        let f = Mat2::new(1.0, 0.4, 0.0, 1.0);
        let v = VectorField::from_map(g, |p| f * p);
        let out = pushforward_chi(&chi, &v).unwrap();
        let a0 = chi.mu();
        let a1 = out.mu();
        assert!((a1 - a0).abs() <= 0.01 * a0, "areas {a0} vs {a1}");
    }

    #[test]
    fn pushforward_volume_bound() {
        // ‖chi∘v⁻¹‖_L1 <= m²·‖chi‖_L1·(1 + 2%) on a mildly distorted field.
        let g = grid(128, 2.0);
        let chi = ScalarField::disc(g, Vec2::ZERO, 0.5);
        let v = VectorField::from_map(g, |p| {
            let r2 = p.norm_sq();
            let s = 1.0 + 0.08 * (-r2).exp();
            Vec2::new(p.x * s, p.y * s)
        });
        let m = bilip_constant(&v).unwrap();
        let out = pushforward_chi(&chi, &v).unwrap();
        assert!(out.mu() <= m * m * chi.mu() * 1.02);
    }

    #[test]
    fn zero_energy_iff_trivial() {
        let g = grid(32, 1.0);
        let w = WellPair::from_lambda(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // rotations have zero energy with empty chi
        let q = Mat2::rotation(rng.gen_range(0.0..6.28));
        let chi = ScalarField::zeros(g);
        let v = VectorField::from_map(g, |p| q * p);
        assert!(total_energy(&chi, &v, &w).unwrap().total < 1e-20);
        // a nonzero chi or a strained v gives positive energy
        let chi1 = ScalarField::disc(g, Vec2::ZERO, 0.4);
        assert!(total_energy(&chi1, &v, &w).unwrap().total > 0.0);
        let strained = VectorField::from_map(g, |p| Vec2::new(1.1 * p.x, p.y / 1.1));
        assert!(total_energy(&chi, &strained, &w).unwrap().total > 0.0);
    }
}
