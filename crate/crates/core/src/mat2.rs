//! Exact 2x2 kernels: Frobenius distances to the rotation orbits SO(2) and
//! SO(2)W, polar decomposition, and the rank-one / shear normal forms of a
//! volume-preserving symmetric stretch.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Tolerance for algebraic identities (reassembly residuals, det F = 1, ...).
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// A point or direction in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

/// A dense 2x2 matrix in row-major entry naming: `a{row}{col}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };

    pub const ZERO: Mat2 = Mat2 {
        a11: 0.0,
        a12: 0.0,
        a21: 0.0,
        a22: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Outer product `a ⊗ b` (rank one).
    pub fn outer(a: Vec2, b: Vec2) -> Self {
        Mat2::new(a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y)
    }

    pub fn transpose(self) -> Self {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    /// Frobenius norm `sqrt(tr(AᵀA))`.
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22
    }

    pub fn inverse(self) -> Result<Mat2> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return Err(Error::Domain("matrix is singular".into()));
        }
        Ok(Mat2::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d))
    }

    /// Singular values, largest first.
    pub fn singular_values(self) -> (f64, f64) {
        // For B = AᵀA: eigenvalues from trace/det, stable via the half-difference form.
        let t = self.norm_sq();
        let d = self.det().abs();
        // sigma_max^2 + sigma_min^2 = t, sigma_max * sigma_min = d
        let disc = (t * t / 4.0 - d * d).max(0.0).sqrt();
        let s_max_sq = t / 2.0 + disc;
        let s_max = s_max_sq.sqrt();
        let s_min = if s_max > 0.0 { d / s_max } else { 0.0 };
        (s_max, s_min)
    }

    /// Operator (spectral) norm: the largest singular value.
    pub fn op_norm(self) -> f64 {
        self.singular_values().0
    }

    pub fn is_finite(self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a11 + r.a11, self.a12 + r.a12, self.a21 + r.a21, self.a22 + r.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a11 - r.a11, self.a12 - r.a12, self.a21 - r.a21, self.a22 - r.a22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * r.a11 + self.a12 * r.a21,
            self.a11 * r.a12 + self.a12 * r.a22,
            self.a21 * r.a11 + self.a22 * r.a21,
            self.a21 * r.a12 + self.a22 * r.a22,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }
}

/// The two energy wells: the identity orbit SO(2) and the stretched orbit
/// SO(2)F with det F = 1.
#[derive(Clone, Copy, Debug)]
pub struct WellPair {
    /// Diagonal stretch parameter; the singular values of `f` are
    /// `{lambda, 1/lambda}`.
    pub lambda: f64,
    pub f: Mat2,
    pub f_inv: Mat2,
}

impl WellPair {
    /// Well from the diagonal stretch `F = diag(lambda, 1/lambda)`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) || (lambda - 1.0).abs() < 1e-14 {
            return Err(Error::Domain(format!(
                "well parameter must be positive and != 1, got {lambda}"
            )));
        }
        Ok(WellPair {
            lambda,
            f: Mat2::diag(lambda, 1.0 / lambda),
            f_inv: Mat2::diag(1.0 / lambda, lambda),
        })
    }

    /// Well given directly in shear form `F = Id + nu1·e1⊗e2`.
    pub fn from_nu1(nu1: f64) -> Result<Self> {
        if !(nu1.is_finite() && nu1 > 0.0) {
            return Err(Error::Domain(format!("shear parameter must be positive, got {nu1}")));
        }
        let f = Mat2::new(1.0, nu1, 0.0, 1.0);
        let lambda = f.singular_values().1; // smaller singular value, in (0,1)
        Ok(WellPair {
            lambda,
            f,
            f_inv: Mat2::new(1.0, -nu1, 0.0, 1.0),
        })
    }

    /// Shear magnitude `nu1 = sigma_max - sigma_min = |lambda - 1/lambda|`
    /// of the equivalent normal form `Id + nu1·e1⊗e2`.
    pub fn nu1(&self) -> f64 {
        let (s_max, s_min) = self.f.singular_values();
        s_max - s_min
    }

    /// The same orbit pair with `f` replaced by its shear normal form.
    pub fn to_shear(&self) -> Result<WellPair> {
        WellPair::from_nu1(self.nu1())
    }
}

/// Distance from `a` to the rotation group SO(2) in Frobenius norm.
///
/// Closed form: `dist² = ‖A‖² + 2 − 2·sqrt(‖A‖² + 2 det A)`, valid for any
/// determinant sign since `‖A‖² + 2 det A = (tr A)² + (a21 − a12)² ≥ 0`.
/// Evaluated in the cancellation-free rearrangement
/// `dist² = ((s₊ − 2)² + s₋²)/2` with
/// `s₊ = |(a11+a22, a21−a12)|`, `s₋ = |(a11−a22, a12+a21)|`,
/// which stays accurate on and near the orbit.
pub fn dist_so2(a: &Mat2) -> f64 {
    let s_plus = (a.a11 + a.a22).hypot(a.a21 - a.a12);
    let s_minus = (a.a11 - a.a22).hypot(a.a12 + a.a21);
    let d = s_plus - 2.0;
    ((d * d + s_minus * s_minus) / 2.0).sqrt()
}

/// Distance from `a` to the orbit SO(2)·W in Frobenius norm.
///
/// With `G = A Wᵀ` the maximal alignment over rotations is
/// `max_θ tr(Gᵀ R(θ)) = sqrt((tr G)² + (g21 − g12)²)`, so
/// `dist² = ‖A‖² + ‖W‖² − 2·sqrt((tr G)² + (g21 − g12)²)`.
pub fn dist_well(a: &Mat2, w: &Mat2) -> Result<f64> {
    if w.det().abs() < 1e-300 {
        return Err(Error::Domain("well matrix is singular".into()));
    }
    Ok(dist_well_unchecked(a, w))
}

/// `dist_well` without the singularity gate, for hot loops over a fixed
/// well that was validated up front.
///
/// Evaluated as the residual `‖A − R*·W‖` against the optimal rotation
/// `R* = closest_rotation(A Wᵀ)`, which is the same minimum without the
/// cancellation the subtractive closed form suffers near the orbit.
#[inline]
pub fn dist_well_unchecked(a: &Mat2, w: &Mat2) -> f64 {
    let g = *a * w.transpose();
    let r = closest_rotation(&g);
    (*a - r * *w).norm()
}

/// The rotation closest to `a` in Frobenius norm among SO(2), i.e. the polar
/// factor when `det a > 0`. Falls back to the identity at the (measure-zero)
/// degeneracy `tr A = 0, a21 = a12`.
pub fn closest_rotation(a: &Mat2) -> Mat2 {
    let p = a.trace();
    let q = a.a21 - a.a12;
    let s = (p * p + q * q).sqrt();
    if s < 1e-300 {
        return Mat2::IDENTITY;
    }
    Mat2::new(p / s, -q / s, q / s, p / s)
}

/// Orbit projection: the point of SO(2)·W closest to `a`.
#[inline]
pub fn project_onto_well(a: &Mat2, w: &Mat2) -> Mat2 {
    closest_rotation(&(*a * w.transpose())) * *w
}

/// Polar decomposition `A = R·U` with `R ∈ SO(2)` and `U` symmetric
/// positive-definite. Requires `det A > 0`.
pub fn polar_decompose(a: &Mat2) -> Result<(Mat2, Mat2)> {
    if !(a.det() > 0.0) {
        return Err(Error::Domain(format!(
            "polar decomposition requires det A > 0, got {}",
            a.det()
        )));
    }
    // det A > 0 implies (tr A)^2 + (a21 - a12)^2 > 0, so R is well defined.
    let r = closest_rotation(a);
    let u = r.transpose() * *a;
    Ok((r, u))
}

fn check_spd_det_one(f: &Mat2, what: &str) -> Result<()> {
    if (f.a12 - f.a21).abs() > 1e-10 {
        return Err(Error::Domain(format!("{what} requires a symmetric matrix")));
    }
    if !(f.trace() > 0.0 && f.det() > 0.0) {
        return Err(Error::Domain(format!("{what} requires a positive-definite matrix")));
    }
    if (f.det() - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "{what} requires det F = 1, got {}",
            f.det()
        )));
    }
    Ok(())
}

/// Rank-one splitting `F = R + a⊗b` of a symmetric positive-definite `F`
/// with `det F = 1`, `F != Id`.
///
/// The rotation satisfies `cos φ = 2 / tr F` (equal to `2/(λ + 1/λ)` in the
/// diagonal frame), which makes `det(F − R) = 0` exactly; the sign of φ is
/// fixed non-negative.
pub fn rank_one_decompose(f: &Mat2) -> Result<(Mat2, Vec2, Vec2)> {
    check_spd_det_one(f, "rank-one decomposition")?;
    if (*f - Mat2::IDENTITY).norm() < 1e-14 {
        return Err(Error::Domain(
            "rank-one decomposition is degenerate at F = Id".into(),
        ));
    }
    let c = 2.0 / f.trace();
    let s = (1.0 - c * c).max(0.0).sqrt(); // φ >= 0 tie-break
    let r = Mat2::new(c, -s, s, c);
    let m = *f - r;
    let col1 = Vec2::new(m.a11, m.a21);
    let col2 = Vec2::new(m.a12, m.a22);
    // Factor the rank-one remainder from its stronger column.
    let (a, b) = if col1.norm_sq() >= col2.norm_sq() {
        let t = col1.dot(col2) / col1.norm_sq();
        (col1, Vec2::new(1.0, t))
    } else {
        let t = col1.dot(col2) / col2.norm_sq();
        (col2, Vec2::new(t, 1.0))
    };
    Ok((r, a, b))
}

/// Shear normal form: rotations `S`, `R` with
/// `S Rᵀ F Sᵀ = Id + ν⊗e2`, `ν = (ν1, 0)`, `ν1 ≥ 0`.
///
/// The normal form shares the singular values `{λ, 1/λ}` of `F`
/// (`ν1 = |λ − 1/λ|`), and the conjugation carries distances over:
/// `dist(B·Sᵀ, SO(2)·F') = dist(B, SO(2)·F)` for every `B`.
pub fn shear_normal_form(f: &Mat2) -> Result<(Vec2, Mat2, Mat2)> {
    let (r, a, b) = rank_one_decompose(f)?;
    // Rᵀ F = Id + c⊗b with c ⟂ b (det = 1 forces c·b = 0).
    let c = r.transpose() * a;
    let nb = b.norm();
    // S rotates b onto the e2 axis, so S(c⊗b)Sᵀ = (S c)⊗(S b) = ν⊗e2.
    let co = b.y / nb;
    let si = b.x / nb;
    let mut s_rot = Mat2::new(co, -si, si, co);
    let mut nu = (s_rot * c) * nb;
    if nu.x < 0.0 {
        // -S is the rotation by π more; flips the sign of ν.
        s_rot = s_rot * -1.0;
        nu = -nu;
    }
    Ok((nu, s_rot, r))
}

/// Ratio `dist(U⁻¹, A⁻¹·SO(2)) / dist(U, SO(2)·A)` for invertible `U` and
/// symmetric positive-definite `A`. Returns 0 when both distances vanish
/// (below 1e-14).
///
/// The inverse is compared against the right orbit: for `U = QA` the
/// inverse is `A⁻¹Qᵀ`, which lies in `A⁻¹·SO(2)` but generally not in
/// `SO(2)·A⁻¹`. With this pairing the bound
/// `ratio ≤ ‖U⁻¹‖·‖A⁻¹‖_op = m / min-eigenvalue(A)` follows from
/// `U⁻¹ − A⁻¹S = A⁻¹(A − SU)U⁻¹`. Right-orbit distances reduce to left
/// ones by transposition: `dist(X, B·SO(2)) = dist(Xᵀ, SO(2)·Bᵀ)`.
pub fn inverse_distance_ratio(u: &Mat2, a: &Mat2) -> Result<f64> {
    if (a.a12 - a.a21).abs() > 1e-10 || !(a.trace() > 0.0 && a.det() > 0.0) {
        return Err(Error::Domain(
            "inverse distance ratio requires symmetric positive-definite A".into(),
        ));
    }
    let u_inv = u.inverse()?;
    let a_inv = a.inverse()?;
    let num = dist_well(&u_inv.transpose(), &a_inv)?;
    let den = dist_well(u, a)?;
    if num < 1e-14 && den < 1e-14 {
        return Ok(0.0);
    }
    Ok(num / den)
}
