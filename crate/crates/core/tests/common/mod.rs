//! Random points of `K₀` with known expected classification.

#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use hypermu::blowup::{FirstBlowup, KPoint, SecondBlowup};
use hypermu::verify::sample_rng;
use hypermu::{ExtendedPoint, SpectralParam, C64};
use rand::Rng;

pub struct Case {
    pub k: KPoint,
    pub expect_sigma: bool,
    pub label: &'static str,
}

fn boundary_point<R: Rng>(rng: &mut R, avoid: f64) -> ExtendedPoint {
    if rng.gen_ratio(1, 4) {
        return ExtendedPoint::Infinity;
    }
    loop {
        let x: f64 = rng.gen_range(-4.0..4.0);
        if (x - avoid).abs() > 0.2 {
            return ExtendedPoint::Real(x);
        }
    }
}

/// An angle in `[0, π/2]` at least `gap` away from the diagonal `π/4`.
fn off_diagonal<R: Rng>(rng: &mut R, gap: f64) -> f64 {
    let a: f64 = rng.gen_range(0.0..(std::f64::consts::FRAC_PI_4 - gap));
    if rng.gen() {
        a
    } else {
        FRAC_PI_2 - a
    }
}

fn k0(z: [ExtendedPoint; 2], l0: f64, omega: [f64; 2], eta: Option<[C64; 2]>) -> KPoint {
    let lambda = SpectralParam::real(l0).unwrap();
    let second = eta.map(|e| SecondBlowup::new(0.0, e).unwrap());
    KPoint::with_directions(z, [0.0, 0.0], lambda, FirstBlowup::new(0.0, omega).unwrap(), second).unwrap()
}

pub fn random_case(seed: u64, index: u64) -> Case {
    let mut rng = sample_rng(seed, index);
    let l0: f64 = rng.gen_range(-2.5..2.5);
    let pole = -l0;
    let kind = rng.gen_range(0..8);
    let (k, expect_sigma, label) = match kind {
        0 => {
            let z = boundary_point(&mut rng, pole);
            (k0([z, z], l0, [FRAC_1_SQRT_2, FRAC_1_SQRT_2], None), true, "sigma1")
        }
        1 => {
            let z = boundary_point(&mut rng, pole);
            let t = off_diagonal(&mut rng, 0.15);
            (k0([z, z], l0, [t.cos(), t.sin()], None), false, "skew")
        }
        2 => {
            let z = boundary_point(&mut rng, pole);
            (k0([ExtendedPoint::Real(pole), z], l0, [0.0, 1.0], None), true, "sigma2")
        }
        3 => {
            let z = boundary_point(&mut rng, pole);
            (k0([z, ExtendedPoint::Real(pole)], l0, [1.0, 0.0], None), true, "sigma3")
        }
        4 => {
            let z = boundary_point(&mut rng, pole);
            let t: f64 = rng.gen_range(0.15..(FRAC_PI_2 - 0.15));
            (k0([ExtendedPoint::Real(pole), z], l0, [t.cos(), t.sin()], None), false, "pole-off-axis")
        }
        5 => {
            let t: f64 = rng.gen_range(0.15..(FRAC_PI_2 - 0.15));
            let psi: f64 = rng.gen_range(0.1..(PI - 0.1));
            let w = [t.cos(), t.sin()];
            let e = C64::from_polar(1.0, psi);
            let z = ExtendedPoint::Real(pole);
            (k0([z, z], l0, w, Some([e * w[0], e * w[1]])), true, "sigma4")
        }
        6 => {
            // compatible at r₂ = 0 only with ψ₂ = π - ψ₁
            let t: f64 = rng.gen_range(0.15..(FRAC_PI_2 - 0.15));
            let psi: f64 = rng.gen_range(0.1..(FRAC_PI_2 - 0.3));
            let w = [t.cos(), t.sin()];
            let z = ExtendedPoint::Real(pole);
            let eta = [C64::from_polar(w[0], psi), C64::from_polar(w[1], PI - psi)];
            (k0([z, z], l0, w, Some(eta)), false, "pole-misaligned")
        }
        _ => {
            let z1 = boundary_point(&mut rng, pole);
            let z2 = loop {
                let z = boundary_point(&mut rng, pole);
                if z.chart_distance(&z1) > 0.2 {
                    break z;
                }
            };
            let t: f64 = rng.gen_range(0.0..FRAC_PI_2);
            (k0([z1, z2], l0, [t.cos(), t.sin()], None), false, "generic")
        }
    };
    Case { k, expect_sigma, label }
}
