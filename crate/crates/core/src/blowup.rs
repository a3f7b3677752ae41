//! Blow-up coordinates of the compactified parameter space `K`.
//!
//! The first blow-up writes `(χ(z₁), χ(z₂))` in polar form `r₁(ω₁, ω₂)`, the
//! second writes `(z₁+Re λ-q₁, z₂+Re λ-q₂)` as `r₂(η₁, η₂)`. On the boundary
//! the directions are independent data, so `KPoint` stores them explicitly.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::halfplane::{chi, ExtendedPoint, SpectralParam, C64};
use crate::recursion::{phi, weighted_star, CyclicPerm, PotentialQuad, SiteTriple};

/// Default tolerance of `sigma_classify`.
pub const CLASSIFY_TOL: f64 = 1e-9;

const UNIT_TOL: f64 = 1e-12;

/// Polar coordinates of `(χ(z₁), χ(z₂))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstBlowup {
    pub r1: f64,
    pub omega: [f64; 2],
}

impl FirstBlowup {
    pub fn new(r1: f64, omega: [f64; 2]) -> Result<Self> {
        if !(r1 >= 0.0) || omega.iter().any(|w| !(*w >= 0.0)) {
            return Err(domain("first blow-up coordinates must be non-negative"));
        }
        if (omega[0].powi(2) + omega[1].powi(2) - 1.0).abs() > UNIT_TOL {
            return Err(domain("ω must be a unit vector"));
        }
        Ok(FirstBlowup { r1, omega })
    }

    /// Direction from an angle `θ ∈ [0, π/2]`, `ω = (cos θ, sin θ)`.
    pub fn from_angle(r1: f64, theta: f64) -> Result<Self> {
        Self::new(r1, [theta.cos().max(0.0), theta.sin().max(0.0)])
    }
}

/// Polar coordinates of `(χ(z₁), χ(z₂), χ(z₃))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleBlowup {
    pub r1: f64,
    pub omega: [f64; 3],
}

/// Polar coordinates of the offsets `zᵢ + Re λ - qᵢ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondBlowup {
    pub r2: f64,
    pub eta: [C64; 2],
}

impl SecondBlowup {
    pub fn new(r2: f64, eta: [C64; 2]) -> Result<Self> {
        if !(r2 >= 0.0) {
            return Err(domain("r₂ must be non-negative"));
        }
        if eta.iter().any(|e| e.im < 0.0) {
            return Err(domain("η must lie in the closed upper half-plane"));
        }
        if (eta[0].norm_sqr() + eta[1].norm_sqr() - 1.0).abs() > UNIT_TOL {
            return Err(domain("η must be a unit vector"));
        }
        Ok(SecondBlowup { r2, eta })
    }
}

fn polar<const N: usize>(x: [f64; N]) -> Result<(f64, [f64; N])> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::IndeterminateDirection("r₁ = 0: all χ vanish"));
    }
    if !r.is_finite() {
        return Err(domain("χ is not finite"));
    }
    Ok((r, x.map(|v| v / r)))
}

pub fn first_blowup(z1: &ExtendedPoint, z2: &ExtendedPoint, lambda: &SpectralParam) -> Result<FirstBlowup> {
    let (r1, omega) = polar([chi(z1, lambda)?, chi(z2, lambda)?])?;
    Ok(FirstBlowup { r1, omega })
}

/// Like `first_blowup`, but at `r₁ = 0` the supplied direction is used.
pub fn first_blowup_with_direction(
    z1: &ExtendedPoint,
    z2: &ExtendedPoint,
    lambda: &SpectralParam,
    direction: [f64; 2],
) -> Result<FirstBlowup> {
    match first_blowup(z1, z2, lambda) {
        Err(Error::IndeterminateDirection(_)) => FirstBlowup::new(0.0, direction),
        other => other,
    }
}

pub fn triple_blowup(z: &SiteTriple, lambda: &SpectralParam) -> Result<TripleBlowup> {
    let x = [chi(&z.0[0], lambda)?, chi(&z.0[1], lambda)?, chi(&z.0[2], lambda)?];
    let (r1, omega) = polar(x)?;
    Ok(TripleBlowup { r1, omega })
}

pub fn second_blowup(
    z1: &ExtendedPoint,
    z2: &ExtendedPoint,
    q1: f64,
    q2: f64,
    lambda: &SpectralParam,
) -> Result<SecondBlowup> {
    let (a, b) = match (z1.value(), z2.value()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(domain("the second blow-up is only defined in the bounded chart")),
    };
    let u1 = a + lambda.re() - q1;
    let u2 = b + lambda.re() - q2;
    let r2 = (u1.norm_sqr() + u2.norm_sqr()).sqrt();
    if r2 == 0.0 {
        return Err(Error::IndeterminateDirection("r₂ = 0: both points on the singular locus"));
    }
    Ok(SecondBlowup { r2, eta: [u1 / r2, u2 / r2] })
}

/// A point of the blown-up space `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KPoint {
    pub z: [ExtendedPoint; 2],
    pub q: [f64; 2],
    pub lambda: SpectralParam,
    pub first: FirstBlowup,
    pub second: Option<SecondBlowup>,
}

impl KPoint {
    /// The point of `K \ ∂∞K` over interior base coordinates.
    pub fn from_interior(
        z1: &ExtendedPoint,
        z2: &ExtendedPoint,
        q1: f64,
        q2: f64,
        lambda: &SpectralParam,
    ) -> Result<Self> {
        z1.interior_value()?;
        z2.interior_value()?;
        let first = first_blowup(z1, z2, lambda)?;
        let second = match second_blowup(z1, z2, q1, q2, lambda) {
            Ok(s) => Some(s),
            Err(Error::IndeterminateDirection(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(KPoint { z: [*z1, *z2], q: [q1, q2], lambda: *lambda, first, second })
    }

    /// A point with explicit blow-up data.
    ///
    /// Without `eta` and off the singular locus of the second blow-up, the
    /// second coordinates are filled in from the base point.
    pub fn with_directions(
        z: [ExtendedPoint; 2],
        q: [f64; 2],
        lambda: SpectralParam,
        first: FirstBlowup,
        second: Option<SecondBlowup>,
    ) -> Result<Self> {
        for (p, w) in z.iter().zip(first.omega) {
            if p.is_boundary() && w > UNIT_TOL && first.r1 > 0.0 {
                return Err(domain("a boundary point with r₁ > 0 needs ω = 0"));
            }
        }
        let second = second.or_else(|| second_blowup(&z[0], &z[1], q[0], q[1], &lambda).ok());
        Ok(KPoint { z, q, lambda, first, second })
    }

    pub fn in_boundary(&self) -> bool {
        self.first.r1 == 0.0 || self.first.omega[0] == 0.0 || self.first.omega[1] == 0.0
    }

    /// Residual of the compatibility condition between the two blow-ups,
    /// normalised by the larger side. `None` without second blow-up data.
    pub fn compat_residual(&self) -> Option<f64> {
        let s = self.second?;
        let zl = self.lambda.z_lambda();
        let re_l = self.lambda.re();
        let [w1, w2] = self.first.omega;
        let lhs = s.eta[0].im * w2 * (s.eta[1] * s.r2 - re_l + self.q[1] - zl).norm_sqr();
        let rhs = s.eta[1].im * w1 * (s.eta[0] * s.r2 - re_l + self.q[0] - zl).norm_sqr();
        let scale = lhs.abs().max(rhs.abs());
        Some(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
    }
}

pub fn compat_residual(k: &KPoint) -> Option<f64> {
    k.compat_residual()
}

#[derive(Serialize, Deserialize)]
struct KPointJson {
    z1: ExtendedPoint,
    z2: ExtendedPoint,
    q: [f64; 2],
    lambda: SpectralParam,
    r1: f64,
    omega: [f64; 2],
    r2: Option<f64>,
    eta: Option<[[f64; 2]; 2]>,
}

impl Serialize for KPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KPointJson {
            z1: self.z[0],
            z2: self.z[1],
            q: self.q,
            lambda: self.lambda,
            r1: self.first.r1,
            omega: self.first.omega,
            r2: self.second.map(|b| b.r2),
            eta: self.second.map(|b| b.eta.map(|e| [e.re, e.im])),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = KPointJson::deserialize(d)?;
        let first = FirstBlowup::new(j.r1, j.omega).map_err(D::Error::custom)?;
        let second = match (j.r2, j.eta) {
            (Some(r2), Some(e)) => {
                Some(SecondBlowup::new(r2, e.map(|[re, im]| C64::new(re, im))).map_err(D::Error::custom)?)
            }
            (None, None) => None,
            _ => return Err(D::Error::custom("r2 and eta must be given together")),
        };
        KPoint::with_directions([j.z1, j.z2], j.q, j.lambda, first, second).map_err(D::Error::custom)
    }
}

/// Residuals of the two relations between the triple polar coordinates `Ω`
/// and the pair coordinates `ω`: the first compares `Ω_σ₂²` and `Ω_σ₃²` with
/// `(Ω_σ₂²+Ω_σ₃²) ω²(z_σ₂, z_σ₃)`, the second compares `Ω_σ₁²` and
/// `F²(Ω_σ₂²+Ω_σ₃²)` with `(Ω_σ₁² + F²(Ω_σ₂²+Ω_σ₃²)) ω²(z_σ₁, φ)`, with `F`
/// taken from its `μ₂` form.
pub fn omega_relations_residual(
    z: &SiteTriple,
    q: &PotentialQuad,
    lambda: &SpectralParam,
    sigma: CyclicPerm,
) -> Result<(f64, f64)> {
    z.interior_values()?;
    let big = triple_blowup(z, lambda)?;
    let [a, b, c] = sigma.indices();
    let om = big.omega;
    let pair = om[b].powi(2) + om[c].powi(2);

    let inner_dir = first_blowup(&z.0[b], &z.0[c], lambda)?;
    let res_oo = (om[b].powi(2) - pair * inner_dir.omega[0].powi(2))
        .abs()
        .max((om[c].powi(2) - pair * inner_dir.omega[1].powi(2)).abs());

    let f = crate::recursion::f_factor_via_mu2(&z.0[b], &z.0[c], q.0[b], q.0[c], lambda)?;
    let inner = phi(&z.0[b], &z.0[c], q.0[b], q.0[c], lambda)?;
    let outer_dir = first_blowup(&z.0[a], &inner, lambda)?;
    let total = om[a].powi(2) + f * f * pair;
    let res_of = (om[a].powi(2) - total * outer_dir.omega[0].powi(2))
        .abs()
        .max((f * f * pair - total * outer_dir.omega[1].powi(2)).abs())
        / total.max(1.0);
    Ok((res_oo, res_of))
}

pub type Sym2 = [[f64; 2]; 2];

/// Quadratic-form matrix for real `sᵢ = zᵢ + λ` and real `λ`.
pub fn m_matrix_real(s1: f64, s2: f64, lambda: f64) -> Sym2 {
    let off = -s1 * s2 * (s1 * s2 - lambda * (s1 + s2) / 2.0 + 2.0);
    [[(s1 * s1 - lambda * s1 + 2.0) * s2 * s2, off], [off, (s2 * s2 - lambda * s2 + 2.0) * s1 * s1]]
}

/// The same matrix built from `|zᵢ - z_λ|²` and the numerator of `μ₂*`.
pub fn m_matrix_from_points(z1: f64, z2: f64, lambda: &SpectralParam) -> Sym2 {
    let l = lambda.lambda();
    let zl = lambda.z_lambda();
    let (a, b) = (C64::new(z1, 0.0), C64::new(z2, 0.0));
    let m11 = (a - zl).norm_sqr() * (b + l).norm_sqr();
    let m22 = (b - zl).norm_sqr() * (a + l).norm_sqr();
    let cross = (a + l + b + l + zl * ((a + l) * (b + l))).norm_sqr();
    let m12 = (m11 + m22) / 2.0 - cross;
    [[m11, m12], [m12, m22]]
}

pub fn det2(m: &Sym2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn quad_form(m: &Sym2, v: [f64; 2]) -> f64 {
    m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1]
}

/// `s₁²s₂²(s₁-s₂)²(2 - λ²/4)`.
pub fn det_m_factored(s1: f64, s2: f64, lambda: f64) -> f64 {
    s1 * s1 * s2 * s2 * (s1 - s2).powi(2) * (2.0 - lambda * lambda / 4.0)
}

/// Quadratic-form matrix at the singular locus, in terms of `η`.
pub fn m_matrix_eta(eta1: C64, eta2: C64) -> Sym2 {
    let off = -(eta1.conj() * eta2).re;
    [[eta2.norm_sqr(), off], [off, eta1.norm_sqr()]]
}

/// Determinant of `m_matrix_eta` through the angle between `η₁` and `η₂`:
/// `|η₁|²|η₂|² (1 - cos 2(arg η₁ - arg η₂)) / 2`.
pub fn det_m_eta_angle(eta1: C64, eta2: C64) -> f64 {
    let delta = eta1.arg() - eta2.arg();
    eta1.norm_sqr() * eta2.norm_sqr() * (1.0 - (2.0 * delta).cos()) / 2.0
}

/// The continuous extension of `μ₂*` at a point of `K`, computed with the
/// blow-up direction `ω` in place of `χ`.
pub fn boundary_mu2_star(k: &KPoint) -> Result<f64> {
    let [w1, w2] = k.first.omega;
    let v = weighted_star(&k.z[0], &k.z[1], k.q[0], k.q[1], &k.lambda, [w1, w2]);
    // treat a relatively tiny denominator as vanishing
    let (h1, h2) =
        (crate::recursion::homog(&k.z[0], k.q[0], &k.lambda), crate::recursion::homog(&k.z[1], k.q[1], &k.lambda));
    let (_, t1, t2) = crate::recursion::closed_form_parts(&h1, &h2, k.lambda.z_lambda());
    let scale = (h1.d.norm_sqr() + h2.d.norm_sqr()) * (h1.s.norm_sqr() + h2.s.norm_sqr() + 1.0);
    if w1 * t1 + w2 * t2 <= 1e-13 * scale {
        return Err(Error::Singular("μ₂* has no continuous extension here; estimate the limit along a path".into()));
    }
    v
}

/// Classes of boundary points where the extended `μ₂` equals one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "psi")]
pub enum SigmaClass {
    Sigma1,
    Sigma2,
    Sigma3,
    Sigma4(f64),
    NotSigma,
}

impl SigmaClass {
    pub fn is_sigma(&self) -> bool {
        !matches!(self, SigmaClass::NotSigma)
    }
}

/// Classify a point of `K₀`: `∂∞K` over real `λ ∈ (-2√2, 2√2)` and `q = 0`.
pub fn sigma_classify(k: &KPoint, tol: f64) -> Result<SigmaClass> {
    if !k.lambda.in_open_band() {
        return Err(domain("K₀ needs real λ in (-2√2, 2√2)"));
    }
    if k.q != [0.0, 0.0] {
        return Err(domain("K₀ needs q₁ = q₂ = 0"));
    }
    let [w1, w2] = k.first.omega;
    if !(k.first.r1 <= tol || w1 <= tol || w2 <= tol) {
        return Err(domain("point is not on the boundary at infinity"));
    }
    let l = k.lambda.re();
    let at_pole = |p: &ExtendedPoint| matches!(p, ExtendedPoint::Real(x) if (x + l).abs() <= tol);
    let (p1, p2) = (at_pole(&k.z[0]), at_pole(&k.z[1]));

    let class = match (p1, p2) {
        (true, true) => {
            let s = k.second.ok_or_else(|| domain("second blow-up data required at z₁ = z₂ = -λ"))?;
            let sum = s.eta[0] + s.eta[1];
            let mut psi = sum.im.atan2(sum.re);
            if psi < 0.0 {
                psi = if psi < -std::f64::consts::FRAC_PI_2 { std::f64::consts::PI } else { 0.0 };
            }
            let phase = C64::from_polar(1.0, psi);
            let aligned = (0..2).all(|i| (s.eta[i] - phase * k.first.omega[i]).norm() <= tol);
            if aligned && sum.norm() > 0.0 {
                SigmaClass::Sigma4(psi)
            } else {
                SigmaClass::NotSigma
            }
        }
        (true, false) if w1 <= tol => SigmaClass::Sigma2,
        (false, true) if w2 <= tol => SigmaClass::Sigma3,
        (false, false)
            if k.z[0].is_boundary()
                && k.z[1].is_boundary()
                && k.z[0].chart_distance(&k.z[1]) <= tol
                && (w1 - w2).abs() <= tol =>
        {
            SigmaClass::Sigma1
        }
        _ => SigmaClass::NotSigma,
    };
    Ok(class)
}
