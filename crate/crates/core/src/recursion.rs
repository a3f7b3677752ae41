//! The recursion map `φ` and the contraction functionals built from it.
//!
//! `φ(z₁, z₂, q₁, q₂, λ) = -1/(z₁+λ-q₁) - 1/(z₂+λ-q₂)` is the two-child
//! Green's function recursion. The functionals `μ₂`, `μ₂*` and `μ₃,p`
//! compare `cd` of the image with `cd` of the arguments.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::halfplane::{cd_raw, ExtendedPoint, SpectralParam, C64};

/// A triple `Z = (z₁, z₂, z₃)` of points of the closed half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTriple(pub [ExtendedPoint; 3]);

impl SiteTriple {
    pub fn interior(z: [C64; 3]) -> Result<Self> {
        Ok(SiteTriple([ExtendedPoint::interior(z[0])?, ExtendedPoint::interior(z[1])?, ExtendedPoint::interior(z[2])?]))
    }

    pub fn interior_values(&self) -> Result<[C64; 3]> {
        Ok([self.0[0].interior_value()?, self.0[1].interior_value()?, self.0[2].interior_value()?])
    }
}

/// Site potentials `Q = (q₁, q₂, q₃, q₄)`; `q₄` sits at the outer vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialQuad(pub [f64; 4]);

impl PotentialQuad {
    pub fn zero() -> Self {
        PotentialQuad([0.0; 4])
    }

    pub fn new(q: [f64; 4]) -> Result<Self> {
        if q.iter().all(|v| v.is_finite()) {
            Ok(PotentialQuad(q))
        } else {
            Err(domain("potentials must be finite"))
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.0.iter().map(|q| q * q).sum()
    }
}

/// The three cyclic permutations of `(1, 2, 3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CyclicPerm {
    Id,
    Shift,
    Shift2,
}

impl CyclicPerm {
    pub const ALL: [CyclicPerm; 3] = [CyclicPerm::Id, CyclicPerm::Shift, CyclicPerm::Shift2];

    /// Zero-based images `(σ₁, σ₂, σ₃)`.
    pub fn indices(self) -> [usize; 3] {
        match self {
            CyclicPerm::Id => [0, 1, 2],
            CyclicPerm::Shift => [1, 2, 0],
            CyclicPerm::Shift2 => [2, 0, 1],
        }
    }
}

#[inline]
pub(crate) fn phi_raw(z1: C64, z2: C64, q1: f64, q2: f64, lambda: C64) -> C64 {
    -(z1 + lambda - q1).inv() - (z2 + lambda - q2).inv()
}

enum Term {
    Finite(C64),
    Pole,
}

fn recursion_term(z: &ExtendedPoint, q: f64, lambda: C64) -> Term {
    match z.value() {
        None => Term::Finite(C64::new(0.0, 0.0)),
        Some(v) => {
            let s = v + lambda - q;
            if s == C64::new(0.0, 0.0) {
                Term::Pole
            } else {
                Term::Finite(-s.inv())
            }
        }
    }
}

/// The recursion map on the closed half-plane. A single pole gives `i∞`;
/// two simultaneous poles are a 0/0 configuration.
pub fn phi(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<ExtendedPoint> {
    let l = lambda.lambda();
    match (recursion_term(z1, q1, l), recursion_term(z2, q2, l)) {
        (Term::Pole, Term::Pole) => {
            Err(Error::Indeterminate(format!("both z₁+λ-q₁ and z₂+λ-q₂ vanish at z₁ = {z1}, z₂ = {z2}")))
        }
        (Term::Pole, _) | (_, Term::Pole) => Ok(ExtendedPoint::Infinity),
        (Term::Finite(a), Term::Finite(b)) => Ok(ExtendedPoint::from_complex(a + b)),
    }
}

/// `1 + Im λ / Im z`.
pub fn p_factor(z: &ExtendedPoint, lambda: &SpectralParam) -> Result<f64> {
    let z = z.interior_value()?;
    Ok(1.0 + lambda.im() / z.im)
}

/// `μ₂ = 2 cd(φ) / (cd z₁ + cd z₂)` on interior points.
pub fn mu2(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<f64> {
    let (a, b) = (z1.interior_value()?, z2.interior_value()?);
    let zl = lambda.z_lambda();
    if cd_raw(a, zl) + cd_raw(b, zl) == 0.0 {
        return Err(domain("μ₂ is undefined at (z_λ, z_λ)"));
    }
    Ok(mu2_raw(a, b, q1, q2, lambda))
}

#[inline]
pub(crate) fn mu2_raw(z1: C64, z2: C64, q1: f64, q2: f64, lambda: &SpectralParam) -> f64 {
    let zl = lambda.z_lambda();
    let image = phi_raw(z1, z2, q1, q2, lambda.lambda());
    2.0 * cd_raw(image, zl) / (cd_raw(z1, zl) + cd_raw(z2, zl))
}

/// Projective data of a point for the closed-form functionals: with
/// `s = z+λ-q`, `s = S/W` and `z - z_λ = D/W`. At `i∞`, `W = 0`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Homog {
    pub s: C64,
    pub d: C64,
    pub w: C64,
}

pub(crate) fn homog(z: &ExtendedPoint, q: f64, lambda: &SpectralParam) -> Homog {
    let l = lambda.lambda();
    match z.value() {
        Some(v) => Homog { s: v + l - q, d: v - lambda.z_lambda(), w: C64::new(1.0, 0.0) },
        None => Homog { s: C64::new(-1.0, 0.0), d: C64::new(-1.0, 0.0), w: C64::new(0.0, 0.0) },
    }
}

/// `(numerator, two denominator terms)` of the weighted closed form: the
/// numerator is `|S₁W₂ + S₂W₁ + z_λS₁S₂|²`, the terms are `|D₁|²|S₂|²` and
/// `|D₂|²|S₁|²`.
pub(crate) fn closed_form_parts(h1: &Homog, h2: &Homog, z_lambda: C64) -> (f64, f64, f64) {
    let num = (h1.s * h2.w + h2.s * h1.w + z_lambda * (h1.s * h2.s)).norm_sqr();
    (num, h1.d.norm_sqr() * h2.s.norm_sqr(), h2.d.norm_sqr() * h1.s.norm_sqr())
}

/// Closed form `2ω₁ω₂ N / ((ω₁T₁ + ω₂T₂)(ω₁+ω₂))`, homogeneous of degree
/// zero in the weights. With `ω = χ` it is `μ₂*`.
pub(crate) fn weighted_star(
    z1: &ExtendedPoint,
    z2: &ExtendedPoint,
    q1: f64,
    q2: f64,
    lambda: &SpectralParam,
    weights: [f64; 2],
) -> Result<f64> {
    let (h1, h2) = (homog(z1, q1, lambda), homog(z2, q2, lambda));
    let (num, t1, t2) = closed_form_parts(&h1, &h2, lambda.z_lambda());
    let [w1, w2] = weights;
    let den = (w1 * t1 + w2 * t2) * (w1 + w2);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Singular(format!("closed-form denominator vanishes at z₁ = {z1}, z₂ = {z2}")));
    }
    Ok(2.0 * w1 * w2 * num / den)
}

fn chi_pair(z1: C64, z2: C64, lambda: &SpectralParam) -> Result<[f64; 2]> {
    let zl = lambda.z_lambda();
    let c1 = (z1 - zl).norm_sqr();
    let c2 = (z2 - zl).norm_sqr();
    if c1 == 0.0 || c2 == 0.0 {
        return Err(Error::Singular("χ is infinite at z_λ".into()));
    }
    Ok([z1.im / c1, z2.im / c2])
}

/// `μ₂*`: the closed form of `μ₂` with both p-factors set to one.
pub fn mu2_star(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<f64> {
    let weights = chi_pair(z1.interior_value()?, z2.interior_value()?, lambda)?;
    weighted_star(z1, z2, q1, q2, lambda, weights)
}

/// `μ₂` through its closed form with the p-factors in the denominator.
pub fn mu2_closed(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<f64> {
    let (a, b) = (z1.interior_value()?, z2.interior_value()?);
    let [x1, x2] = chi_pair(a, b, lambda)?;
    let (h1, h2) = (homog(z1, q1, lambda), homog(z2, q2, lambda));
    let (num, t1, t2) = closed_form_parts(&h1, &h2, lambda.z_lambda());
    let (p1, p2) = (1.0 + lambda.im() / a.im, 1.0 + lambda.im() / b.im);
    let den = (p1 * x1 * t1 + p2 * x2 * t2) * (x1 + x2);
    if den == 0.0 {
        return Err(Error::Singular("closed-form denominator of μ₂ vanishes".into()));
    }
    Ok(2.0 * x1 * x2 * num / den)
}

/// `χ(φ(z₁, z₂, q₁, q₂, λ))` from the explicit rational expression, valid
/// also when one argument lies on the real axis.
pub fn chi_phi_closed(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<f64> {
    let (a, b) = match (z1.value(), z2.value()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(domain("χ(φ) closed form needs finite arguments")),
    };
    let l = lambda.lambda();
    let (s1, s2) = (a + l - q1, b + l - q2);
    let num = s1.im * s2.norm_sqr() + s2.im * s1.norm_sqr();
    let den = (s1 + s2 + lambda.z_lambda() * (s1 * s2)).norm_sqr();
    if den == 0.0 {
        return Err(Error::Singular("φ coincides with z_λ".into()));
    }
    Ok(num / den)
}

/// Weights `νᵢ = cd(zᵢ) / Σ cd(zⱼ)`.
pub fn nu(z: &SiteTriple, lambda: &SpectralParam) -> Result<[f64; 3]> {
    nu_raw(z.interior_values()?, lambda)
}

pub(crate) fn nu_raw(z: [C64; 3], lambda: &SpectralParam) -> Result<[f64; 3]> {
    let zl = lambda.z_lambda();
    let c = z.map(|v| cd_raw(v, zl));
    let total: f64 = c.iter().sum();
    if total == 0.0 {
        return Err(domain("ν is undefined when all three points equal z_λ"));
    }
    Ok(c.map(|v| v / total))
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("exponent p = {p} must be a finite real >= 1")))
    }
}

/// `μ₃,p` as the ratio `Σ_σ cd^p(φ(z_σ₁, φ(z_σ₂, z_σ₃, …), q_σ₁, q₄, λ)) / Σ cd^p(zᵢ)`.
pub fn mu3p_direct(z: &SiteTriple, q: &PotentialQuad, lambda: &SpectralParam, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let v = mu3p_direct_raw(z.interior_values()?, &q.0, lambda, p);
    if v.is_nan() {
        return Err(domain("μ₃,p is undefined when all three points equal z_λ"));
    }
    Ok(v)
}

pub(crate) fn mu3p_direct_raw(z: [C64; 3], q: &[f64; 4], lambda: &SpectralParam, p: f64) -> f64 {
    let zl = lambda.z_lambda();
    let l = lambda.lambda();
    let den: f64 = z.iter().map(|&v| cd_raw(v, zl).powf(p)).sum();
    let num: f64 = CyclicPerm::ALL
        .iter()
        .map(|s| {
            let [a, b, c] = s.indices();
            let inner = phi_raw(z[b], z[c], q[b], q[c], l);
            let outer = phi_raw(z[a], inner, q[a], q[3], l);
            cd_raw(outer, zl).powf(p)
        })
        .sum();
    num / den
}

/// `μ₃,p` assembled from `μ₂(τ_σ)`, `μ₂(ξ_σ)` and the weights `ν`.
pub fn mu3p_factored(z: &SiteTriple, q: &PotentialQuad, lambda: &SpectralParam, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let zs = z.interior_values()?;
    let nu = nu_raw(zs, lambda)?;
    let l = lambda.lambda();
    let q = &q.0;
    let mut total = 0.0;
    for s in CyclicPerm::ALL {
        let [a, b, c] = s.indices();
        let pair = nu[b] + nu[c];
        let inner_part = if pair == 0.0 { 0.0 } else { 0.25 * mu2_raw(zs[b], zs[c], q[b], q[c], lambda) * pair };
        let bracket = 0.5 * nu[a] + inner_part;
        if bracket == 0.0 {
            continue;
        }
        let inner = phi_raw(zs[b], zs[c], q[b], q[c], l);
        let outer = mu2_raw(zs[a], inner, q[a], q[3], lambda);
        total += (outer * bracket).powf(p);
    }
    let norm: f64 = nu.iter().map(|v| v.powf(p)).sum();
    Ok(total / norm)
}

/// `F = χ(φ(z₁, z₂, …)) / r₁(z₁, z₂)`.
pub fn f_factor(z1: &ExtendedPoint, z2: &ExtendedPoint, q1: f64, q2: f64, lambda: &SpectralParam) -> Result<f64> {
    let (a, b) = (z1.interior_value()?, z2.interior_value()?);
    let [x1, x2] = chi_pair(a, b, lambda)?;
    let image = phi_raw(a, b, q1, q2, lambda.lambda());
    let d = (image - lambda.z_lambda()).norm_sqr();
    if d == 0.0 {
        return Err(Error::Singular("φ coincides with z_λ".into()));
    }
    Ok(image.im / d / x1.hypot(x2))
}

/// `F` through `2ω₁ω₂ / (μ₂ (ω₁+ω₂))`.
pub fn f_factor_via_mu2(
    z1: &ExtendedPoint,
    z2: &ExtendedPoint,
    q1: f64,
    q2: f64,
    lambda: &SpectralParam,
) -> Result<f64> {
    let (a, b) = (z1.interior_value()?, z2.interior_value()?);
    let [x1, x2] = chi_pair(a, b, lambda)?;
    let r = x1.hypot(x2);
    f_from_direction([x1 / r, x2 / r], mu2_raw(a, b, q1, q2, lambda))
}

/// Second form of `F` from a blow-up direction and a value of `μ₂`; this is
/// the form that still makes sense at boundary points.
pub fn f_from_direction(omega: [f64; 2], mu2: f64) -> Result<f64> {
    let [w1, w2] = omega;
    if mu2 == 0.0 || w1 + w2 == 0.0 {
        return Err(Error::Singular("μ₂ = 0; use the χ(φ)/r₁ form".into()));
    }
    Ok(2.0 * w1 * w2 / (mu2 * (w1 + w2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfplane::{cd, dist, fixed_point};
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn ip(re: f64, im: f64) -> ExtendedPoint {
        ExtendedPoint::interior(C64::new(re, im)).unwrap()
    }

    fn lam(re: f64, im: f64) -> SpectralParam {
        SpectralParam::new(C64::new(re, im)).unwrap()
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    // cd at λ = 0 by hand: z_λ = i√2, z purely imaginary.
    fn cd_imag_axis(y: f64) -> f64 {
        (y - SQRT2).powi(2) / y
    }

    #[test]
    fn phi_examples() {
        let l0 = lam(0.0, 0.0);
        let zl = ip(0.0, SQRT2);
        let v = phi(&zl, &zl, 0.0, 0.0, &l0).unwrap().value().unwrap();
        assert!(close(v, C64::new(0.0, SQRT2), 1e-15));
        let v = phi(&ip(0.0, 1.0), &ip(0.0, 1.0), 0.0, 0.0, &l0).unwrap().value().unwrap();
        assert!(close(v, C64::new(0.0, 2.0), 1e-15));
        let v = phi(&ip(0.0, 1.0), &ip(0.0, 2.0), 1.0, 0.0, &l0).unwrap().value().unwrap();
        assert!(close(v, C64::new(0.5, 1.0), 1e-15));
    }

    #[test]
    fn phi_boundary_cases() {
        let l = lam(0.5, 0.0);
        // z₁ + λ = 0 with the other term finite: a pole at i∞
        let r = phi(&ExtendedPoint::Real(-0.5), &ip(0.0, 1.0), 0.0, 0.0, &l).unwrap();
        assert_eq!(r, ExtendedPoint::Infinity);
        let r = phi(&ExtendedPoint::Real(-0.5), &ExtendedPoint::Real(-0.5), 0.0, 0.0, &l);
        assert!(matches!(r, Err(Error::Indeterminate(_))));
        // both at i∞: both terms vanish
        let r = phi(&ExtendedPoint::Infinity, &ExtendedPoint::Infinity, 0.0, 0.0, &l).unwrap();
        assert_eq!(r, ExtendedPoint::Real(0.0));
        let r = phi(&ExtendedPoint::Real(1.5), &ExtendedPoint::Infinity, 0.0, 0.0, &l).unwrap();
        assert_eq!(r, ExtendedPoint::Real(-0.5));
    }

    #[test]
    fn p_factor_examples() {
        assert_eq!(p_factor(&ip(0.0, 1.0), &lam(0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(p_factor(&ip(0.0, 1.0), &lam(0.0, 0.5)).unwrap(), 1.5);
        assert_eq!(p_factor(&ip(0.0, 2.0), &lam(0.0, 1.0)).unwrap(), 1.5);
        assert!(p_factor(&ExtendedPoint::Real(0.0), &lam(0.0, 1.0)).is_err());
    }

    #[test]
    fn mu2_examples() {
        let l0 = lam(0.0, 0.0);
        let v = mu2(&ip(0.0, 1.0), &ip(0.0, 1.0), 0.0, 0.0, &l0).unwrap();
        assert!((v - 1.0).abs() <= 1e-12);

        let oracle = 2.0 * cd_imag_axis(1.5) / (cd_imag_axis(1.0) + cd_imag_axis(2.0));
        let v = mu2(&ip(0.0, 1.0), &ip(0.0, 2.0), 0.0, 0.0, &l0).unwrap();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.02859).abs() < 1e-4);

        let v = mu2(&ip(0.0, 1.0), &ip(0.0, 1.0), 0.0, 0.0, &lam(0.0, 0.5)).unwrap();
        assert!(v < 1.0);

        let zl = ip(0.0, SQRT2);
        assert!(mu2(&zl, &zl, 0.0, 0.0, &l0).is_err());
        assert!(mu2(&ExtendedPoint::Real(0.0), &zl, 0.0, 0.0, &l0).is_err());
    }

    #[test]
    fn mu2_star_examples() {
        let l0 = lam(0.0, 0.0);
        let (a, b) = (ip(0.0, 1.0), ip(0.0, 2.0));
        let s = mu2_star(&a, &b, 0.0, 0.0, &l0).unwrap();
        let m = mu2(&a, &b, 0.0, 0.0, &l0).unwrap();
        assert!((s - m).abs() <= 1e-14);
        let l = lam(0.0, 0.5);
        let s = mu2_star(&a, &a, 0.0, 0.0, &l).unwrap();
        assert!(s >= mu2(&a, &a, 0.0, 0.0, &l).unwrap());
    }

    #[test]
    fn mu2_star_singular_at_pole() {
        // z₁ = z₂ = z_λ makes the χ weights infinite
        let l0 = lam(0.0, 0.0);
        let zl = ip(0.0, SQRT2);
        assert!(matches!(mu2_star(&zl, &zl, 0.0, 0.0, &l0), Err(Error::Singular(_))));
    }

    #[test]
    fn chi_phi_closed_examples() {
        let l0 = lam(0.0, 0.0);
        let v = chi_phi_closed(&ip(0.0, 1.0), &ip(0.0, 2.0), 0.0, 0.0, &l0).unwrap();
        assert!((v - 1.0 / cd_imag_axis(1.5)).abs() <= 1e-10 * v);

        let l = lam(0.3, 0.1);
        let (a, b) = (ip(0.0, 1.0), ip(0.0, 1.0));
        let direct = 1.0 / cd(&phi(&a, &b, 1.0, -1.0, &l).unwrap(), &l);
        let v = chi_phi_closed(&a, &b, 1.0, -1.0, &l).unwrap();
        assert!((v - direct).abs() <= 1e-10 * direct);

        // z₁ on the real axis: the numerator weight Im(z₁ + λ) is Im λ
        let x = ExtendedPoint::Real(0.7);
        let v = chi_phi_closed(&x, &b, 0.0, 0.0, &l).unwrap();
        let (s1, s2) = (C64::new(1.0, 0.1), C64::new(0.3, 1.1));
        let expected = (0.1 * s2.norm_sqr() + 1.1 * s1.norm_sqr()) / (s1 + s2 + l.z_lambda() * s1 * s2).norm_sqr();
        assert!((v - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn nu_examples() {
        let l0 = lam(0.0, 0.0);
        let z = SiteTriple::interior([C64::new(0.3, 0.9); 3]).unwrap();
        for v in nu(&z, &l0).unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let z = SiteTriple::interior([C64::new(0.0, SQRT2), C64::new(0.0, 1.0), C64::new(0.0, 2.0)]).unwrap();
        let v = nu(&z, &l0).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-14 && (v[2] - 0.5).abs() < 1e-14);
        let all = SiteTriple::interior([C64::new(0.0, SQRT2); 3]).unwrap();
        assert!(nu(&all, &l0).is_err());
    }

    #[test]
    fn mu3p_examples() {
        let l0 = lam(0.0, 0.0);
        let q0 = PotentialQuad::zero();
        let sym = SiteTriple::interior([C64::new(0.0, 1.0); 3]).unwrap();
        let direct = mu3p_direct(&sym, &q0, &l0, 2.0).unwrap();
        let m = mu2(&ip(0.0, 1.0), &ip(0.0, 2.0), 0.0, 0.0, &l0).unwrap();
        assert!((direct - m * m).abs() < 1e-6);
        assert!((direct - 8.18e-4).abs() < 5e-6);
        let factored = mu3p_factored(&sym, &q0, &l0, 2.0).unwrap();
        assert!((direct - factored).abs() <= 1e-12);

        let z = SiteTriple::interior([C64::new(0.0, 1.0), C64::new(0.0, 2.0), C64::new(0.0, 3.0)]).unwrap();
        let l = lam(0.0, 0.1);
        let d = mu3p_direct(&z, &q0, &l, 1.5).unwrap();
        let f = mu3p_factored(&z, &q0, &l, 1.5).unwrap();
        assert!((d - f).abs() <= 1e-10 * d);

        let p1 = mu3p_direct(&sym, &q0, &l0, 1.0).unwrap();
        assert!((p1 - m).abs() <= 1e-12);

        assert!(mu3p_direct(&sym, &q0, &l0, 0.5).is_err());
        assert!(mu3p_factored(&sym, &q0, &l0, f64::NAN).is_err());
    }

    #[test]
    fn f_factor_examples() {
        let l0 = lam(0.0, 0.0);
        let i = ip(0.0, 1.0);
        let f = f_factor(&i, &i, 0.0, 0.0, &l0).unwrap();
        assert!((f - 1.0 / SQRT2).abs() < 1e-14);
        let g = f_factor_via_mu2(&i, &i, 0.0, 0.0, &l0).unwrap();
        assert!((g - 1.0 / SQRT2).abs() < 1e-12);

        let two = ip(0.0, 2.0);
        let f = f_factor(&i, &two, 0.0, 0.0, &l0).unwrap();
        let g = f_factor_via_mu2(&i, &two, 0.0, 0.0, &l0).unwrap();
        assert!((f - g).abs() <= 1e-10 * f);

        assert_eq!(f_from_direction([1.0, 0.0], 0.5).unwrap(), 0.0);
        assert!(f_from_direction([0.6, 0.8], 0.0).is_err());
    }

    #[test]
    fn strict_contraction_toward_fixed_point() {
        let l = lam(0.5, 0.1);
        let zl = fixed_point(&l);
        for &(re, im) in &[(0.0, 1.0), (3.0, 0.01), (-4.0, 20.0), (0.2, 1.3)] {
            let z = ip(re, im);
            let image = phi(&z, &z, 0.0, 0.0, &l).unwrap();
            assert!(dist(&image, &zl).unwrap() < dist(&z, &zl).unwrap());
        }
    }

    fn interior() -> impl Strategy<Value = C64> {
        (-6.0..6.0f64, -3.0..3.0f64).prop_map(|(re, lg)| C64::new(re, 10f64.powf(lg)))
    }

    fn band_lambda() -> impl Strategy<Value = SpectralParam> {
        (-2.5..2.5f64, 1e-6..0.5f64).prop_map(|(re, im)| lam(re, im))
    }

    proptest! {
        #[test]
        fn mu2_symmetric(a in interior(), b in interior(), q1 in -3.0..3.0f64, q2 in -3.0..3.0f64, l in band_lambda()) {
            let (pa, pb) = (ExtendedPoint::Interior(a), ExtendedPoint::Interior(b));
            prop_assert_eq!(mu2(&pa, &pb, q1, q2, &l).unwrap(), mu2(&pb, &pa, q2, q1, &l).unwrap());
            prop_assert_eq!(mu2_star(&pa, &pb, q1, q2, &l).unwrap(), mu2_star(&pb, &pa, q2, q1, &l).unwrap());
        }

        #[test]
        fn mu2_below_one_without_potential(a in interior(), b in interior(), l in band_lambda()) {
            let v = mu2(&ExtendedPoint::Interior(a), &ExtendedPoint::Interior(b), 0.0, 0.0, &l).unwrap();
            prop_assert!(v < 1.0, "μ₂ = {}", v);
        }

        #[test]
        fn mu2_bounded_by_star(a in interior(), b in interior(), q1 in -3.0..3.0f64, q2 in -3.0..3.0f64, l in band_lambda()) {
            let (pa, pb) = (ExtendedPoint::Interior(a), ExtendedPoint::Interior(b));
            let m = mu2(&pa, &pb, q1, q2, &l).unwrap();
            let s = mu2_star(&pa, &pb, q1, q2, &l).unwrap();
            prop_assert!(m <= s * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn mu2_diagonal_is_one_for_real_lambda(a in interior(), e in -2.8..2.8f64) {
            let l = lam(e, 0.0);
            let p = ExtendedPoint::Interior(a);
            let v = mu2(&p, &p, 0.0, 0.0, &l).unwrap();
            prop_assert!((v - 1.0).abs() <= 1e-12, "μ₂ = {}", v);
        }

        #[test]
        fn reduction_law(a in interior(), b in interior(), q1 in -3.0..3.0f64, q2 in -3.0..3.0f64, l in band_lambda()) {
            let (pa, pb) = (ExtendedPoint::Interior(a), ExtendedPoint::Interior(b));
            let lhs = cd(&phi(&pa, &pb, q1, q2, &l).unwrap(), &l);
            let rhs = mu2(&pa, &pb, q1, q2, &l).unwrap() * (cd(&pa, &l) + cd(&pb, &l)) / 2.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
        }

        #[test]
        fn mu3_direct_matches_factored(a in interior(), b in interior(), c in interior(),
                                      q in proptest::array::uniform4(-3.0..3.0f64), l in band_lambda(), p in 1.0..4.0f64) {
            let z = SiteTriple::interior([a, b, c]).unwrap();
            let q = PotentialQuad::new(q).unwrap();
            let d = mu3p_direct(&z, &q, &l, p).unwrap();
            let f = mu3p_factored(&z, &q, &l, p).unwrap();
            prop_assert!((d - f).abs() <= 1e-9 * d.max(f), "{} vs {}", d, f);
        }

        #[test]
        fn phi_keeps_interior(a in interior(), b in interior(), q1 in -3.0..3.0f64, q2 in -3.0..3.0f64, l in band_lambda()) {
            let r = phi(&ExtendedPoint::Interior(a), &ExtendedPoint::Interior(b), q1, q2, &l).unwrap();
            prop_assert!(r.is_interior());
        }
    }
}
