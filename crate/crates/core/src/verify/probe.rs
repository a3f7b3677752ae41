//! Numerical probes of the geometry behind the bound `μ₂ < 1`: invariance
//! of `c` under real Möbius maps and strict convexity of `z ↦ c(w, z)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rel_diff, sample_rng, Jobs, Region};
use crate::halfplane::{c_raw, cd_raw, dist_raw, Mobius, SpectralParam};

/// Largest accepted invariance and identity residual.
pub const PROBE_TOL: f64 = 1e-10;

/// Relative separation above which the convexity gap must be positive.
pub const STRICT_SEPARATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub n: u64,
    pub seed: u64,
    /// `|c(gw, gz) - c(w, z)|`, relative.
    pub isometry_max: f64,
    /// Smallest `((c(w,z₁) + c(w,z₂))/2 - c(w, (z₁+z₂)/2))` relative to the
    /// mean; negative values violate convexity.
    pub convexity_min_gap: f64,
    /// The same minimum over pairs separated by at least
    /// `STRICT_SEPARATION` relative to their size.
    pub strict_min_gap: f64,
    /// `c = 2(cosh d - 1)`, relative.
    pub cosh_max: f64,
    /// `cd(z) = Im z_λ · c(z_λ, z)`, relative.
    pub cd_max: f64,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug)]
struct Row {
    iso: f64,
    gap: f64,
    strict_gap: f64,
    cosh: f64,
    cd: f64,
}

impl Row {
    fn identity() -> Self {
        Row { iso: 0.0, gap: f64::INFINITY, strict_gap: f64::INFINITY, cosh: 0.0, cd: 0.0 }
    }

    fn merge(self, o: Row) -> Row {
        Row {
            iso: self.iso.max(o.iso),
            gap: self.gap.min(o.gap),
            strict_gap: self.strict_gap.min(o.strict_gap),
            cosh: self.cosh.max(o.cosh),
            cd: self.cd.max(o.cd),
        }
    }
}

fn random_mobius<R: Rng>(rng: &mut R) -> Mobius {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-3.0..=3.0));
        if let Ok(m) = Mobius::new(v[0], v[1], v[2], v[3]) {
            if m.det() >= 0.5 {
                return m;
            }
        }
    }
}

fn probe_sample(region: &Region, seed: u64, index: u64) -> Row {
    let mut rng = sample_rng(seed, index);
    let w = region.sample_z(&mut rng);
    let z1 = region.sample_z(&mut rng);
    let z2 = if rng.gen_ratio(1, 16) { z1 } else { region.sample_z(&mut rng) };
    let g = random_mobius(&mut rng);
    let lambda = SpectralParam::new(region.sample_lambda(&mut rng)).expect("sampled λ has Im > 0");

    let base = c_raw(w, z1);
    let moved = c_raw(g.apply_raw(w), g.apply_raw(z1));
    let iso = rel_diff(base, moved);

    let mid = (z1 + z2) / 2.0;
    let mean = (c_raw(w, z1) + c_raw(w, z2)) / 2.0;
    let gap = if mean == 0.0 { 0.0 } else { (mean - c_raw(w, mid)) / mean };
    let separated = (z1 - z2).norm() >= STRICT_SEPARATION * z1.norm().max(z2.norm());
    let strict_gap = if separated { gap } else { f64::INFINITY };

    let d = dist_raw(w, z1);
    let cosh = rel_diff(base, 2.0 * (d.cosh() - 1.0));
    let zl = lambda.z_lambda();
    let cd = rel_diff(cd_raw(z1, zl), zl.im * c_raw(zl, z1));
    Row { iso, gap, strict_gap, cosh, cd }
}

/// Sample `n` configurations and report the worst residuals.
pub fn convexity_isometry_probe(n: u64, seed: u64, jobs: Jobs) -> ProbeReport {
    let region = Region { im_floor: 1e-2, im_max: 1e2, ..Region::default() };
    let row =
        jobs.run(|| (0..n).into_par_iter().map(|i| probe_sample(&region, seed, i)).reduce(Row::identity, Row::merge));
    let passed = row.iso <= PROBE_TOL
        && row.gap >= -1e-12
        && row.strict_gap > 0.0
        && row.cosh <= PROBE_TOL
        && row.cd <= PROBE_TOL;
    ProbeReport {
        n,
        seed,
        isometry_max: row.iso,
        convexity_min_gap: row.gap,
        strict_min_gap: row.strict_gap,
        cosh_max: row.cosh,
        cd_max: row.cd,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfplane::C64;

    #[test]
    fn probe_passes() {
        let r = convexity_isometry_probe(3000, 4, Jobs(2));
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn coincident_points_give_equality() {
        let w = C64::new(0.3, 1.2);
        let z = C64::new(-1.0, 0.4);
        let mid = (z + z) / 2.0;
        assert_eq!((c_raw(w, z) + c_raw(w, z)) / 2.0, c_raw(w, mid));
    }

    #[test]
    fn far_points_have_a_large_gap() {
        let w = C64::new(0.0, 1.0);
        let (z1, z2) = (C64::new(-50.0, 1.0), C64::new(50.0, 1.0));
        let mean = (c_raw(w, z1) + c_raw(w, z2)) / 2.0;
        assert!(mean - c_raw(w, (z1 + z2) / 2.0) > 1000.0);
    }
}
