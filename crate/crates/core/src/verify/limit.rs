//! Directional limits of `μ₂` (and of `φ` in the chart at `i∞`) along
//! paths that approach the boundary of `K`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use crate::blowup::KPoint;
use crate::error::{Error, Result};
use crate::halfplane::{ExtendedPoint, SpectralParam, C64};
use crate::recursion::{mu2, phi};

/// How one base coordinate moves with the path parameter `t > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathBase {
    /// A fixed interior point.
    Fixed { z: ExtendedPoint },
    /// `z = x + t η + i c tᵏ`.
    Linear { x: f64, eta: C64, coeff: f64, power: f64 },
    /// `w = -1/z = i c tᵏ`.
    AtInfinity { coeff: f64, power: f64 },
}

impl PathBase {
    pub fn real(x: f64, coeff: f64, power: f64) -> Self {
        PathBase::Linear { x, eta: C64::new(0.0, 0.0), coeff, power }
    }

    fn at(&self, t: f64) -> Option<C64> {
        let z = match *self {
            PathBase::Fixed { z } => z.value()?,
            PathBase::Linear { x, eta, coeff, power } => {
                let offset = eta * t;
                // the offset from a nonzero base must survive rounding
                if offset.norm() > 0.0 && offset.norm() < 1e-6 * x.abs() {
                    return None;
                }
                C64::new(x, 0.0) + offset + C64::new(0.0, coeff * t.powf(power))
            }
            PathBase::AtInfinity { coeff, power } => -C64::new(0.0, coeff * t.powf(power)).inv(),
        };
        (z.im > 0.0 && z.re.is_finite() && z.im.is_finite()).then_some(z)
    }
}

/// Quantity tracked along the path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Mu2,
    /// `|w|` for `w = -1/φ`; zero exactly when `φ = i∞`.
    PhiChart,
}

/// A path `t ↦ (z₁(t), z₂(t), q, λ(t))` with `λ(t) = λ₀ + i c tᵏ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub z: [PathBase; 2],
    pub q: [f64; 2],
    pub lambda_re: f64,
    pub lambda_im_coeff: f64,
    pub lambda_im_power: f64,
    pub observable: Observable,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_im_coeff >= 0.0) || !self.lambda_re.is_finite() {
            return Err(Error::Config("λ(t) must stay in the closed upper half-plane".into()));
        }
        for b in &self.z {
            match *b {
                PathBase::Fixed { z } if !z.is_interior() => {
                    return Err(Error::Config("a fixed path point must be interior".into()))
                }
                PathBase::Linear { coeff, power, .. } | PathBase::AtInfinity { coeff, power }
                    if !(coeff >= 0.0 && power > 0.0) =>
                {
                    return Err(Error::Config("path coefficients must be >= 0 with positive powers".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn lambda(&self, t: f64) -> Option<SpectralParam> {
        SpectralParam::new(C64::new(self.lambda_re, self.lambda_im_coeff * t.powf(self.lambda_im_power))).ok()
    }

    /// The observable at parameter `t`, or `None` where the point is not
    /// usable.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let z1 = ExtendedPoint::Interior(self.z[0].at(t)?);
        let z2 = ExtendedPoint::Interior(self.z[1].at(t)?);
        let lambda = self.lambda(t)?;
        let v = match self.observable {
            Observable::Mu2 => mu2(&z1, &z2, self.q[0], self.q[1], &lambda).ok()?,
            Observable::PhiChart => match phi(&z1, &z2, self.q[0], self.q[1], &lambda).ok()? {
                ExtendedPoint::Infinity => 0.0,
                p => p.chart_w().map_or(f64::INFINITY, |w| w.norm()),
            },
        };
        v.is_finite().then_some(v)
    }

    /// Built-in paths: `sigma1`, `sigma2`, `sigma4`, `iinf-check` and
    /// `skew:a:b`, with real base point `x`.
    pub fn named(name: &str, x: f64) -> Result<Self> {
        const L0: f64 = 0.5;
        let sigma1 = |a: f64, b: f64| PathSpec {
            z: [PathBase::real(x, a, 1.0), PathBase::real(x, b, 1.0)],
            q: [0.0, 0.0],
            lambda_re: L0,
            lambda_im_coeff: 1.0,
            lambda_im_power: 2.0,
            observable: Observable::Mu2,
        };
        let eta = C64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4);
        let sigma4 = |observable| PathSpec {
            z: [PathBase::Linear { x: -L0, eta, coeff: 0.0, power: 2.0 }; 2],
            q: [0.0, 0.0],
            lambda_re: L0,
            lambda_im_coeff: 1.0,
            lambda_im_power: 3.0,
            observable,
        };
        match name {
            "sigma1" => Ok(sigma1(1.0, 1.0)),
            "sigma2" => Ok(PathSpec {
                z: [PathBase::real(-L0, 1.0, 2.0), PathBase::real(x, 1.0, 1.0)],
                q: [0.0, 0.0],
                lambda_re: L0,
                lambda_im_coeff: 1.0,
                lambda_im_power: 4.0,
                observable: Observable::Mu2,
            }),
            "sigma4" => Ok(sigma4(Observable::Mu2)),
            "iinf-check" => Ok(sigma4(Observable::PhiChart)),
            _ => {
                let parts: Vec<&str> = name.split(':').collect();
                match parts.as_slice() {
                    ["skew", a, b] => {
                        let a: f64 = a.parse().map_err(|_| Error::Config(format!("bad skew ratio in {name}")))?;
                        let b: f64 = b.parse().map_err(|_| Error::Config(format!("bad skew ratio in {name}")))?;
                        if !(a > 0.0 && b > 0.0) {
                            return Err(Error::Config("skew ratios must be positive".into()));
                        }
                        Ok(sigma1(a, b))
                    }
                    _ => Err(Error::Config(format!(
                        "unknown path {name}; expected sigma1, sigma2, sigma4, iinf-check or skew:a:b"
                    ))),
                }
            }
        }
    }

    /// A path into a point of `K₀` (real `λ`, `q = 0`) that realizes its
    /// blow-up directions: `χ(zᵢ(t))` is asymptotically proportional to
    /// `ωᵢ`, and at `z₁ = z₂ = -λ` the offsets follow `η`.
    pub fn toward(k: &KPoint) -> Result<Self> {
        if !k.lambda.is_real() {
            return Err(Error::Config("paths are built into points over real λ".into()));
        }
        let l0 = k.lambda.re();
        let zl = k.lambda.z_lambda();
        let both_singular = k.z.iter().all(|z| matches!(z, ExtendedPoint::Real(x) if *x == -l0)) && k.q == [0.0, 0.0];
        let mut bases = [PathBase::real(0.0, 1.0, 1.0); 2];
        for i in 0..2 {
            let w = k.first.omega[i];
            bases[i] = match k.z[i] {
                ExtendedPoint::Interior(_) => PathBase::Fixed { z: k.z[i] },
                ExtendedPoint::Infinity => {
                    if w > 0.0 {
                        PathBase::AtInfinity { coeff: w, power: 1.0 }
                    } else {
                        PathBase::AtInfinity { coeff: 1.0, power: 2.0 }
                    }
                }
                ExtendedPoint::Real(x) => {
                    let scale = (C64::new(x, 0.0) - zl).norm_sqr();
                    if both_singular {
                        let s = k.second.ok_or_else(|| Error::Config("η is needed at z₁ = z₂ = -λ".into()))?;
                        PathBase::Linear { x, eta: s.eta[i], coeff: scale * w, power: 2.0 }
                    } else if w > 0.0 {
                        PathBase::real(x, scale * w, 1.0)
                    } else {
                        PathBase::real(x, scale, 2.0)
                    }
                }
            };
        }
        Ok(PathSpec {
            z: bases,
            q: k.q,
            lambda_re: l0,
            lambda_im_coeff: 1.0,
            lambda_im_power: 4.0,
            observable: Observable::Mu2,
        })
    }
}

/// `t = 2^-k` for `k = k_min..=k_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub k_min: u32,
    pub k_max: u32,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { k_min: 1, k_max: 40 }
    }
}

/// Terms used by the extrapolation.
pub const RICHARDSON_TERMS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub limit: f64,
    pub error_estimate: f64,
    /// `log₂` of the ratio of successive differences at the tail.
    pub order_estimate: Option<f64>,
    /// `(t, value)` for the usable terms, in schedule order.
    pub tail: Vec<(f64, f64)>,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

/// Richardson extrapolation to `t = 0` for samples at `t, t/2, t/4, …`,
/// assuming an expansion in integer powers of `t`. Returns the limit and
/// the difference of the last two diagonal entries.
pub fn richardson(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let mut prev: Vec<f64> = values.to_vec();
    let mut last_two = (values[m - 1], values[m - 1]);
    let mut factor = 1.0;
    for j in 1..m {
        factor *= 2.0;
        let next: Vec<f64> = (1..prev.len()).map(|i| prev[i] + (prev[i] - prev[i - 1]) / (factor - 1.0)).collect();
        last_two = (prev[prev.len() - 1], next[next.len() - 1]);
        prev = next;
        if j == m - 1 {
            break;
        }
    }
    (last_two.1, (last_two.1 - last_two.0).abs())
}

/// Estimate the limit of the observable as `t → 0`.
pub fn limit_along_path(path: &PathSpec, schedule: Schedule) -> Result<LimitReport> {
    path.validate()?;
    if schedule.k_min > schedule.k_max {
        return Err(Error::Config("schedule needs k_min <= k_max".into()));
    }
    let mut tail = Vec::new();
    for k in schedule.k_min..=schedule.k_max {
        let t = (-(k as f64)).exp2();
        match path.eval(t) {
            Some(v) => tail.push((t, v)),
            None if !tail.is_empty() => break,
            None => {}
        }
    }
    if tail.len() < 2 {
        return Ok(LimitReport {
            limit: f64::NAN,
            error_estimate: f64::INFINITY,
            order_estimate: None,
            tail,
            converged: false,
            diagnostic: Some("fewer than two usable terms".into()),
        });
    }
    let used: Vec<f64> = tail.iter().rev().take(RICHARDSON_TERMS).rev().map(|p| p.1).collect();
    let (limit, err) = richardson(&used);
    let n = used.len();
    let order_estimate = if n >= 3 {
        let d1 = (used[n - 2] - used[n - 3]).abs();
        let d2 = (used[n - 1] - used[n - 2]).abs();
        (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).log2())
    } else {
        None
    };
    let tol = 1e-6 * limit.abs().max(1.0);
    let converged = limit.is_finite() && err <= tol;
    let diagnostic = (!converged).then(|| {
        let lo = used.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("tail does not settle: extrapolation error {err:.3e}, oscillation {:.3e}", hi - lo)
    });
    Ok(LimitReport { limit, error_estimate: err, order_estimate, tail, converged, diagnostic })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_removes_polynomial_terms() {
        let f = |t: f64| 3.0 + 2.0 * t - 5.0 * t * t + t * t * t;
        let v: Vec<f64> = (1..=8).map(|k| f((-(k as f64)).exp2())).collect();
        let (l, e) = richardson(&v);
        assert!((l - 3.0).abs() < 1e-12, "{l}");
        assert!(e < 1e-10);
    }

    #[test]
    fn named_paths_parse() {
        for n in ["sigma1", "sigma2", "sigma4", "iinf-check", "skew:1:3"] {
            assert!(PathSpec::named(n, 1.0).is_ok(), "{n}");
        }
        assert!(PathSpec::named("skew:1", 1.0).is_err());
        assert!(PathSpec::named("skew:0:1", 1.0).is_err());
        assert!(PathSpec::named("nope", 1.0).is_err());
    }

    #[test]
    fn sigma1_limit_is_one() {
        let r = limit_along_path(&PathSpec::named("sigma1", 1.0).unwrap(), Schedule::default()).unwrap();
        assert!((r.limit - 1.0).abs() <= 1e-4, "{r:?}");
    }

    #[test]
    fn skew_limit_matches_weights() {
        let r = limit_along_path(&PathSpec::named("skew:1:3", 1.0).unwrap(), Schedule::default()).unwrap();
        assert!((r.limit - 0.75).abs() <= 1e-4, "{r:?}");
    }

    #[test]
    fn sigma4_sends_phi_to_infinity() {
        let p = PathSpec::named("iinf-check", 1.0).unwrap();
        let w = p.eval((-20f64).exp2()).unwrap();
        assert!(w <= 1e-6, "{w}");
        let r = limit_along_path(&p, Schedule::default()).unwrap();
        assert!(r.limit.abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn too_short_schedule_is_reported() {
        let p = PathSpec::named("sigma1", 1.0).unwrap();
        let r = limit_along_path(&p, Schedule { k_min: 3, k_max: 3 }).unwrap();
        assert!(!r.converged);
        assert!(r.diagnostic.is_some());
    }
}
