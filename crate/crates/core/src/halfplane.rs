//! Upper half-plane geometry used by the contraction functionals.
//!
//! Points of the closed half-plane are interior values, real boundary values
//! or the point `i∞`. Near infinity the chart `w = -1/z` is used; `i∞` is the
//! point `w = 0`.

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type C64 = Complex64;

/// `2√2`, the edge of the spectral band of the binary tree.
pub const BAND_EDGE: f64 = 2.0 * std::f64::consts::SQRT_2;

/// A point of the closed upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedPoint {
    Interior(C64),
    Real(f64),
    Infinity,
}

/// Local coordinate of a point: the `z` chart for `|z| <= 1`, the `w = -1/z`
/// chart otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    Z(C64),
    W(C64),
}

pub fn to_chart(z: C64) -> Chart {
    if z.norm() <= 1.0 {
        Chart::Z(z)
    } else {
        Chart::W(-z.inv())
    }
}

pub fn from_chart(c: Chart) -> ExtendedPoint {
    match c {
        Chart::Z(z) => ExtendedPoint::from_complex(z),
        Chart::W(w) if w == C64::new(0.0, 0.0) => ExtendedPoint::Infinity,
        Chart::W(w) => ExtendedPoint::from_complex(-w.inv()),
    }
}

impl ExtendedPoint {
    pub fn interior(z: C64) -> Result<Self> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(ExtendedPoint::Interior(z))
        } else {
            Err(domain(format!("{z} is not in the open upper half-plane")))
        }
    }

    /// Classify a complex value; non-finite values map to `i∞`.
    ///
    /// Values with negative imaginary part are clamped onto the real axis,
    /// which only happens through rounding in boundary arithmetic.
    pub fn from_complex(z: C64) -> Self {
        if !z.re.is_finite() || !z.im.is_finite() {
            ExtendedPoint::Infinity
        } else if z.im > 0.0 {
            ExtendedPoint::Interior(z)
        } else {
            ExtendedPoint::Real(z.re)
        }
    }

    pub fn is_interior(&self) -> bool {
        matches!(self, ExtendedPoint::Interior(_))
    }

    pub fn is_boundary(&self) -> bool {
        !self.is_interior()
    }

    /// Finite value as a complex number (`None` at `i∞`).
    pub fn value(&self) -> Option<C64> {
        match *self {
            ExtendedPoint::Interior(z) => Some(z),
            ExtendedPoint::Real(x) => Some(C64::new(x, 0.0)),
            ExtendedPoint::Infinity => None,
        }
    }

    pub fn interior_value(&self) -> Result<C64> {
        match *self {
            ExtendedPoint::Interior(z) => Ok(z),
            other => Err(domain(format!("{other} is not an interior point"))),
        }
    }

    /// The `w = -1/z` coordinate; zero exactly at `i∞`.
    pub fn chart_w(&self) -> Option<C64> {
        match *self {
            ExtendedPoint::Infinity => Some(C64::new(0.0, 0.0)),
            ExtendedPoint::Real(0.0) => None,
            p => p.value().map(|z| -z.inv()),
        }
    }

    pub fn chart(&self) -> Chart {
        match self.value() {
            Some(z) => to_chart(z),
            None => Chart::W(C64::new(0.0, 0.0)),
        }
    }

    /// Distance between two points measured in chart coordinates: the `z`
    /// chart when either point is inside the unit disc, the `w` chart
    /// otherwise.
    pub fn chart_distance(&self, other: &ExtendedPoint) -> f64 {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) if a.norm() <= 1.0 || b.norm() <= 1.0 => (a - b).norm(),
            _ => {
                let wa = self.chart_w().unwrap_or(C64::new(f64::INFINITY, 0.0));
                let wb = other.chart_w().unwrap_or(C64::new(f64::INFINITY, 0.0));
                (wa - wb).norm()
            }
        }
    }
}

impl fmt::Display for ExtendedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedPoint::Interior(z) => write!(f, "{z}"),
            ExtendedPoint::Real(x) => write!(f, "{x} (real)"),
            ExtendedPoint::Infinity => write!(f, "i∞"),
        }
    }
}

impl Serialize for ExtendedPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.value() {
            None => s.serialize_str("iinf"),
            Some(z) => {
                let mut t = s.serialize_tuple(2)?;
                t.serialize_element(&z.re)?;
                t.serialize_element(&z.im)?;
                t.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PointVisitor;

        impl<'de> Visitor<'de> for PointVisitor {
            type Value = ExtendedPoint;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an [re, im] pair or the string \"iinf\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "iinf" {
                    Ok(ExtendedPoint::Infinity)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if im < 0.0 {
                    return Err(de::Error::custom("imaginary part must be non-negative"));
                }
                Ok(ExtendedPoint::from_complex(C64::new(re, im)))
            }
        }

        d.deserialize_any(PointVisitor)
    }
}

/// Complex spectral parameter `λ` with `Im λ >= 0`, together with the fixed
/// point `z_λ` of `z ↦ -2/(z+λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParam {
    lambda: C64,
    fixed: C64,
}

impl SpectralParam {
    pub fn new(lambda: C64) -> Result<Self> {
        if !(lambda.im >= 0.0) || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return Err(domain(format!("spectral parameter {lambda} must satisfy Im λ >= 0")));
        }
        Ok(SpectralParam { lambda, fixed: quadratic_upper_root(lambda) })
    }

    pub fn real(e: f64) -> Result<Self> {
        Self::new(C64::new(e, 0.0))
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn re(&self) -> f64 {
        self.lambda.re
    }

    pub fn im(&self) -> f64 {
        self.lambda.im
    }

    /// `z_λ` as a complex number (imaginary part zero outside the band).
    pub fn z_lambda(&self) -> C64 {
        self.fixed
    }

    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0
    }

    /// Real `λ` strictly inside `(-2√2, 2√2)`.
    pub fn in_open_band(&self) -> bool {
        self.is_real() && self.lambda.re.abs() < BAND_EDGE
    }
}

impl Serialize for SpectralParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.lambda.re)?;
        t.serialize_element(&self.lambda.im)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for SpectralParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (re, im) = <(f64, f64)>::deserialize(d)?;
        SpectralParam::new(C64::new(re, im)).map_err(de::Error::custom)
    }
}

/// The rectangle `|Re λ| <= E`, `0 < Im λ <= ε` of spectral parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRegion {
    pub e: f64,
    pub eps: f64,
}

impl SpectralRegion {
    pub fn new(e: f64, eps: f64) -> Result<Self> {
        if !(e > 0.0 && e < BAND_EDGE) {
            return Err(Error::Config(format!("E = {e} must lie in (0, 2√2)")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Config(format!("ε = {eps} must be positive")));
        }
        Ok(SpectralRegion { e, eps })
    }

    pub fn contains(&self, lambda: C64) -> bool {
        lambda.re.abs() <= self.e && lambda.im > 0.0 && lambda.im <= self.eps
    }

    /// Closure of the region: adds the segment `Im λ = 0`.
    pub fn closure_contains(&self, lambda: C64) -> bool {
        lambda.re.abs() <= self.e && lambda.im >= 0.0 && lambda.im <= self.eps
    }
}

/// Root of `z² + λz + 2 = 0` in the closed upper half-plane.
///
/// The larger-magnitude root is formed without cancellation and the other
/// from the product of roots, which is 2. Among the two, the one with larger
/// imaginary part wins; ties go to the larger real part.
fn quadratic_upper_root(lambda: C64) -> C64 {
    if lambda.im == 0.0 {
        let e = lambda.re;
        let disc = 8.0 - e * e;
        if disc > 0.0 {
            return C64::new(-e / 2.0, disc.sqrt() / 2.0);
        }
        let root = (-disc).sqrt() / 2.0;
        return C64::new(-e / 2.0 + root, 0.0);
    }
    let sq = (lambda * lambda - 8.0).sqrt();
    let big = if (-lambda + sq).norm() >= (-lambda - sq).norm() { (-lambda + sq) / 2.0 } else { (-lambda - sq) / 2.0 };
    let small = C64::new(2.0, 0.0) / big;
    if big.im > small.im || (big.im == small.im && big.re >= small.re) {
        big
    } else {
        small
    }
}

/// The fixed point `z_λ` as a point of the closed half-plane.
pub fn fixed_point(lambda: &SpectralParam) -> ExtendedPoint {
    let z = lambda.z_lambda();
    if z.im > 0.0 {
        ExtendedPoint::Interior(z)
    } else {
        ExtendedPoint::Real(z.re)
    }
}

/// `|w - z|² / (Im w Im z)`, equal to `2(cosh d(w,z) - 1)`.
pub fn c(w: &ExtendedPoint, z: &ExtendedPoint) -> Result<f64> {
    let (w, z) = (w.interior_value()?, z.interior_value()?);
    Ok(c_raw(w, z))
}

pub(crate) fn c_raw(w: C64, z: C64) -> f64 {
    (w - z).norm_sqr() / (w.im * z.im)
}

/// Hyperbolic distance for the metric of curvature -1.
pub fn dist(w: &ExtendedPoint, z: &ExtendedPoint) -> Result<f64> {
    Ok(dist_raw(w.interior_value()?, z.interior_value()?))
}

pub(crate) fn dist_raw(w: C64, z: C64) -> f64 {
    let y = c_raw(w, z) / 2.0;
    // arcosh(1 + y), accurate for small y
    (y + (y * (y + 2.0)).sqrt()).ln_1p()
}

/// `|z - z_λ|² / Im z`; `+∞` on the boundary at infinity.
pub fn cd(z: &ExtendedPoint, lambda: &SpectralParam) -> f64 {
    match *z {
        ExtendedPoint::Interior(z) => cd_raw(z, lambda.z_lambda()),
        _ => f64::INFINITY,
    }
}

#[inline]
pub(crate) fn cd_raw(z: C64, z_lambda: C64) -> f64 {
    (z - z_lambda).norm_sqr() / z.im
}

/// `Im z / |z - z_λ|²`, the boundary defining function. Zero on the boundary;
/// the removable singularity `z = z_λ` is rejected.
pub fn chi(z: &ExtendedPoint, lambda: &SpectralParam) -> Result<f64> {
    match *z {
        ExtendedPoint::Interior(v) => {
            let d = (v - lambda.z_lambda()).norm_sqr();
            if d == 0.0 {
                Err(domain("χ is infinite at z = z_λ"))
            } else {
                Ok(v.im / d)
            }
        }
        _ => Ok(0.0),
    }
}

/// Real Möbius map `z ↦ (az+b)/(cz+d)` with `ad - bc > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Mobius {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(domain(format!("Möbius matrix has determinant {det}, need > 0")));
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Mobius { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, z: &ExtendedPoint) -> ExtendedPoint {
        let Mobius { a, b, c, d } = *self;
        match *z {
            ExtendedPoint::Interior(v) => ExtendedPoint::Interior(self.apply_raw(v)),
            ExtendedPoint::Real(x) => {
                let den = c * x + d;
                if den == 0.0 {
                    ExtendedPoint::Infinity
                } else {
                    ExtendedPoint::Real((a * x + b) / den)
                }
            }
            ExtendedPoint::Infinity => {
                if c == 0.0 {
                    ExtendedPoint::Infinity
                } else {
                    ExtendedPoint::Real(a / c)
                }
            }
        }
    }

    pub(crate) fn apply_raw(&self, z: C64) -> C64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }
}

/// `Mobius::new` as a free function.
pub fn mobius_apply(a: f64, b: f64, c: f64, d: f64, z: &ExtendedPoint) -> Result<ExtendedPoint> {
    Ok(Mobius::new(a, b, c, d)?.apply(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn ip(re: f64, im: f64) -> ExtendedPoint {
        ExtendedPoint::interior(C64::new(re, im)).unwrap()
    }

    fn lam(re: f64, im: f64) -> SpectralParam {
        SpectralParam::new(C64::new(re, im)).unwrap()
    }

    #[test]
    fn fixed_point_examples() {
        let z0 = fixed_point(&lam(0.0, 0.0)).value().unwrap();
        assert!((z0 - C64::new(0.0, SQRT2)).norm() < 1e-15);
        let z2 = fixed_point(&lam(2.0, 0.0)).value().unwrap();
        assert!((z2 - C64::new(-1.0, 1.0)).norm() < 1e-15);
        match fixed_point(&lam(BAND_EDGE, 0.0)) {
            ExtendedPoint::Real(x) => assert!((x + SQRT2).abs() < 1e-7),
            other => panic!("expected a real boundary point, got {other}"),
        }
        assert!(matches!(fixed_point(&lam(3.0, 0.0)), ExtendedPoint::Real(_)));
    }

    #[test]
    fn fixed_point_residual_complex_lambda() {
        for &(re, im) in &[(0.5, 0.1), (-2.7, 1e-9), (3.0, 1e-8), (10.0, 4.0), (0.0, 100.0)] {
            let l = lam(re, im);
            let z = l.z_lambda();
            let res = (z * z + l.lambda() * z + 2.0).norm();
            assert!(res <= 1e-13 * (1.0 + l.lambda().norm_sqr()), "residual {res} at {re}+{im}i");
            assert!(z.im > 0.0);
        }
    }

    #[test]
    fn fixed_point_modulus_in_band() {
        for k in 0..=100 {
            let e = -2.8 + 5.6 * k as f64 / 100.0;
            let z = lam(e, 0.0).z_lambda();
            assert!((z.norm_sqr() - 2.0).abs() <= 1e-14, "E = {e}");
        }
    }

    #[test]
    fn c_examples() {
        assert_eq!(c(&ip(0.0, 1.0), &ip(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(c(&ip(0.0, 1.0), &ip(0.0, 2.0)).unwrap(), 0.5);
        assert_eq!(c(&ip(1.0, 1.0), &ip(-1.0, 1.0)).unwrap(), 4.0);
        assert!(c(&ExtendedPoint::Real(0.0), &ip(0.0, 1.0)).is_err());
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist(&ip(0.0, 1.0), &ip(0.0, 1.0)).unwrap(), 0.0);
        let d = dist(&ip(0.0, 1.0), &ip(0.0, 2.0)).unwrap();
        // arcosh(5/4) = ln 2
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
        let g = Mobius::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let (w, z) = (ip(0.3, 0.7), ip(-1.2, 2.5));
        let lhs = dist(&g.apply(&w), &g.apply(&z)).unwrap();
        assert!((lhs - dist(&w, &z).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn cd_examples() {
        let l0 = lam(0.0, 0.0);
        assert_eq!(cd(&ip(0.0, SQRT2), &l0), 0.0);
        let expected = 3.0 - 2.0 * SQRT2;
        assert!((cd(&ip(0.0, 1.0), &l0) - expected).abs() < 1e-15);
        assert!((cd(&ip(0.0, 2.0), &l0) - expected).abs() < 1e-15);
        assert_eq!(cd(&ExtendedPoint::Real(1.0), &l0), f64::INFINITY);
        assert_eq!(cd(&ExtendedPoint::Infinity, &l0), f64::INFINITY);
    }

    #[test]
    fn chi_examples() {
        let l0 = lam(0.0, 0.0);
        let x = chi(&ip(0.0, 1.0), &l0).unwrap();
        assert!((x - (3.0 + 2.0 * SQRT2)).abs() < 1e-13);
        assert_eq!(chi(&ExtendedPoint::Real(0.4), &l0).unwrap(), 0.0);
        assert_eq!(chi(&ExtendedPoint::Infinity, &l0).unwrap(), 0.0);
        assert!(chi(&ip(0.0, SQRT2), &l0).is_err());
    }

    #[test]
    fn mobius_examples() {
        let i = ip(0.0, 1.0);
        assert_eq!(Mobius::identity().apply(&i), i);
        for &e in &[0.0, 1.3, -2.0] {
            let l = lam(e, 0.0);
            let g = Mobius::new(0.0, -2.0, 1.0, e).unwrap();
            let zl = fixed_point(&l);
            let image = g.apply(&zl).value().unwrap();
            assert!((image - l.z_lambda()).norm() < 1e-15);
        }
        let inv = Mobius::new(0.0, -1.0, 1.0, 0.0).unwrap();
        assert_eq!(inv.apply(&ExtendedPoint::Infinity), ExtendedPoint::Real(0.0));
        assert_eq!(inv.apply(&ExtendedPoint::Real(0.0)), ExtendedPoint::Infinity);
        assert!(Mobius::new(1.0, 2.0, 2.0, 4.0).is_err());
        assert!(mobius_apply(0.0, 1.0, 1.0, 0.0, &i).is_err());
    }

    #[test]
    fn chart_round_trip() {
        for &(re, im) in &[(3.0, 4.0), (-100.0, 1e-3), (0.5, 1e6), (1.0, 1e-12)] {
            let z = C64::new(re, im);
            let back = from_chart(to_chart(z)).value().unwrap();
            assert!((back - z).norm() <= 1e-14 * z.norm());
        }
        assert_eq!(from_chart(Chart::W(C64::new(0.0, 0.0))), ExtendedPoint::Infinity);
        assert_eq!(ExtendedPoint::Infinity.chart_w(), Some(C64::new(0.0, 0.0)));
    }

    #[test]
    fn region_membership() {
        let r = SpectralRegion::new(2.5, 0.5).unwrap();
        assert!(r.contains(C64::new(2.5, 0.5)));
        assert!(!r.contains(C64::new(0.0, 0.0)));
        assert!(r.closure_contains(C64::new(0.0, 0.0)));
        assert!(!r.contains(C64::new(2.6, 0.1)));
        assert!(SpectralRegion::new(3.0, 0.5).is_err());
        assert!(SpectralRegion::new(1.0, 0.0).is_err());
        assert!(SpectralParam::new(C64::new(0.0, -1e-3)).is_err());
    }

    #[test]
    fn serde_points() {
        let pts = vec![ip(1.0, 2.0), ExtendedPoint::Real(-0.5), ExtendedPoint::Infinity];
        let s = serde_json::to_string(&pts).unwrap();
        assert_eq!(s, r#"[[1.0,2.0],[-0.5,0.0],"iinf"]"#);
        let back: Vec<ExtendedPoint> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pts);
        assert!(serde_json::from_str::<ExtendedPoint>(r#"[0.0,-1.0]"#).is_err());
    }
}
