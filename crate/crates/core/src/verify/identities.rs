//! Randomized checks of the algebraic identities between the functionals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rel_diff, sample_rng, Jobs, Region};
use crate::blowup::{
    boundary_mu2_star, det2, det_m_factored, m_matrix_from_points, m_matrix_real, omega_relations_residual,
    triple_blowup, KPoint,
};
use crate::error::Result;
use crate::halfplane::{cd_raw, ExtendedPoint, SpectralParam, C64};
use crate::recursion::{
    chi_phi_closed, f_factor, f_factor_via_mu2, mu2, mu2_closed, mu2_star, mu3p_direct, mu3p_factored, nu, phi_raw,
    CyclicPerm, PotentialQuad, SiteTriple,
};

/// Largest residual accepted in float mode.
pub const FLOAT_THRESHOLD: f64 = 1e-9;

/// Largest fraction of samples an identity may skip as ill-conditioned.
pub const MAX_SKIP_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Exact,
}

/// Result for one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityEntry {
    pub name: String,
    pub max_residual: f64,
    /// Sample index of the largest residual.
    pub worst_sample: Option<u64>,
    pub evaluated: u64,
    pub skipped: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub mode: Mode,
    pub n: u64,
    pub seed: u64,
    pub threshold: f64,
    pub entries: Vec<IdentityEntry>,
    pub passed: bool,
}

impl IdentityReport {
    pub(crate) fn assemble(mode: Mode, n: u64, seed: u64, threshold: f64, acc: &[Acc], names: &[&str]) -> Self {
        let entries: Vec<IdentityEntry> = names
            .iter()
            .zip(acc)
            .map(|(name, a)| {
                let skip_ok = (a.skipped as f64) <= MAX_SKIP_FRACTION * n as f64;
                IdentityEntry {
                    name: name.to_string(),
                    max_residual: a.max,
                    worst_sample: a.arg,
                    evaluated: a.evaluated,
                    skipped: a.skipped,
                    passed: a.max <= threshold && skip_ok,
                }
            })
            .collect();
        let passed = entries.iter().all(|e| e.passed);
        IdentityReport { mode, n, seed, threshold, entries, passed }
    }
}

/// Running maximum with the smallest sample index as tie-break. Merging is
/// associative and commutative, so the outcome does not depend on how the
/// samples were split between threads.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Acc {
    pub max: f64,
    pub arg: Option<u64>,
    pub evaluated: u64,
    pub skipped: u64,
}

impl Acc {
    pub fn push(&mut self, index: u64, r: Option<f64>) {
        match r {
            None => self.skipped += 1,
            Some(v) => {
                self.evaluated += 1;
                let v = if v.is_nan() { f64::INFINITY } else { v };
                let better = match self.arg {
                    None => true,
                    Some(a) => v > self.max || (v == self.max && index < a),
                };
                if better {
                    self.max = v;
                    self.arg = Some(index);
                }
            }
        }
    }

    pub fn merge(mut self, o: Acc) -> Acc {
        self.evaluated += o.evaluated;
        self.skipped += o.skipped;
        if let Some(i) = o.arg {
            let skipped = self.skipped;
            let evaluated = self.evaluated;
            self.push(i, Some(o.max));
            self.evaluated = evaluated;
            self.skipped = skipped;
        }
        self
    }
}

pub(crate) fn reduce_parallel<const K: usize>(
    n: u64,
    jobs: Jobs,
    eval: impl Fn(u64) -> [Option<f64>; K] + Sync,
) -> Vec<Acc> {
    let acc = jobs.run(|| {
        (0..n)
            .into_par_iter()
            .fold(
                || [Acc::default(); K],
                |mut a, i| {
                    for (slot, r) in a.iter_mut().zip(eval(i)) {
                        slot.push(i, r);
                    }
                    a
                },
            )
            .reduce(
                || [Acc::default(); K],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x = x.merge(y);
                    }
                    a
                },
            )
    });
    acc.to_vec()
}

pub const FLOAT_IDENTITIES: [&str; 14] = [
    "chi_phi_closed_form",
    "mu2_closed_form",
    "mu2_star_omega_form",
    "mu2_le_mu2_star",
    "mu2_star_equals_mu2_real_lambda",
    "mu3_direct_equals_factored",
    "f_two_forms",
    "nu_omega",
    "omega_oo",
    "omega_of",
    "compat_bu2_3",
    "det_m_factorization",
    "m_matrix_two_ways",
    "cd_reduction",
];

/// Run the identity suite on `n` samples.
pub fn run_identity_suite(n: u64, seed: u64, region: &Region, mode: Mode, jobs: Jobs) -> Result<IdentityReport> {
    region.validate()?;
    match mode {
        Mode::Exact => Ok(super::exact::run_exact_suite(n, seed, jobs)),
        Mode::Float => {
            let acc = reduce_parallel(n, jobs, |i| float_sample(region, seed, i));
            Ok(IdentityReport::assemble(Mode::Float, n, seed, FLOAT_THRESHOLD, &acc, &FLOAT_IDENTITIES))
        }
    }
}

/// `|s₁ + s₂ + z_λ s₁ s₂|` is the distance scale of `φ` from `z_λ`; when it
/// is tiny compared with its terms every relative residual is dominated by
/// cancellation.
fn well_conditioned(z1: C64, z2: C64, q1: f64, q2: f64, lambda: &SpectralParam) -> bool {
    let l = lambda.lambda();
    let (s1, s2) = (z1 + l - q1, z2 + l - q2);
    let zl = lambda.z_lambda();
    let n = (s1 + s2 + zl * (s1 * s2)).norm();
    let scale = s1.norm() + s2.norm() + zl.norm() * s1.norm() * s2.norm();
    n.is_finite() && n >= 1e-6 * scale
}

fn triple_conditioned(z: &[C64; 3], q: &[f64; 4], lambda: &SpectralParam) -> bool {
    CyclicPerm::ALL.iter().all(|s| {
        let [a, b, c] = s.indices();
        let inner = phi_raw(z[b], z[c], q[b], q[c], lambda.lambda());
        well_conditioned(z[b], z[c], q[b], q[c], lambda) && well_conditioned(z[a], inner, q[a], q[3], lambda)
    })
}

fn pt(z: C64) -> ExtendedPoint {
    ExtendedPoint::Interior(z)
}

fn ok(r: Result<f64>) -> Option<f64> {
    r.ok()
}

fn float_sample(region: &Region, seed: u64, index: u64) -> [Option<f64>; 14] {
    let mut rng = sample_rng(seed, index);
    let z = [region.sample_z(&mut rng), region.sample_z(&mut rng), region.sample_z(&mut rng)];
    let q =
        [region.sample_q(&mut rng), region.sample_q(&mut rng), region.sample_q(&mut rng), region.sample_q(&mut rng)];
    let lambda = SpectralParam::new(region.sample_lambda(&mut rng)).expect("sampled λ has Im > 0");
    let real = SpectralParam::real(rng.gen_range(-region.e..=region.e)).expect("real λ");
    let p = rng.gen_range(1.1..=3.0);
    let s = [rng.gen_range(-6.0..=6.0), rng.gen_range(-6.0..=6.0)];
    let lm = rng.gen_range(-2.8..=2.8);
    let x = [rng.gen_range(-region.re_max..=region.re_max), rng.gen_range(-region.re_max..=region.re_max)];

    let (z1, z2) = (pt(z[0]), pt(z[1]));
    let (q1, q2) = (q[0], q[1]);
    let pair_ok = well_conditioned(z[0], z[1], q1, q2, &lambda);
    let guarded = |f: &dyn Fn() -> Option<f64>| if pair_ok { f() } else { None };

    let chi_phi = guarded(&|| {
        let v = phi_raw(z[0], z[1], q1, q2, lambda.lambda());
        let direct = v.im / (v - lambda.z_lambda()).norm_sqr();
        ok(chi_phi_closed(&z1, &z2, q1, q2, &lambda)).map(|c| rel_diff(direct, c))
    });
    let mu2_cf = guarded(&|| {
        let a = mu2(&z1, &z2, q1, q2, &lambda).ok()?;
        ok(mu2_closed(&z1, &z2, q1, q2, &lambda)).map(|b| rel_diff(a, b))
    });
    let star_omega = guarded(&|| {
        let a = mu2_star(&z1, &z2, q1, q2, &lambda).ok()?;
        let k = KPoint::from_interior(&z1, &z2, q1, q2, &lambda).ok()?;
        ok(boundary_mu2_star(&k)).map(|b| rel_diff(a, b))
    });
    let le_star = guarded(&|| {
        let a = mu2(&z1, &z2, q1, q2, &lambda).ok()?;
        let b = mu2_star(&z1, &z2, q1, q2, &lambda).ok()?;
        Some(((a - b) / b).max(0.0))
    });
    let star_real = if well_conditioned(z[0], z[1], q1, q2, &real) {
        (|| {
            let a = mu2(&z1, &z2, q1, q2, &real).ok()?;
            ok(mu2_star(&z1, &z2, q1, q2, &real)).map(|b| rel_diff(a, b))
        })()
    } else {
        None
    };
    let triple_ok = triple_conditioned(&z, &q, &lambda);
    let zt = SiteTriple([pt(z[0]), pt(z[1]), pt(z[2])]);
    let qq = PotentialQuad(q);
    let mu3 = if triple_ok {
        (|| {
            let a = mu3p_direct(&zt, &qq, &lambda, p).ok()?;
            ok(mu3p_factored(&zt, &qq, &lambda, p)).map(|b| rel_diff(a, b))
        })()
    } else {
        None
    };
    let f_forms = guarded(&|| {
        let a = f_factor(&z1, &z2, q1, q2, &lambda).ok()?;
        ok(f_factor_via_mu2(&z1, &z2, q1, q2, &lambda)).map(|b| rel_diff(a, b))
    });
    let nu_omega = (|| {
        let n = nu(&zt, &lambda).ok()?;
        let om = triple_blowup(&zt, &lambda).ok()?.omega;
        let den = om[0] * om[1] + om[0] * om[2] + om[1] * om[2];
        let worst = CyclicPerm::ALL
            .iter()
            .map(|s| {
                let [a, b, c] = s.indices();
                rel_diff(n[a], om[b] * om[c] / den)
            })
            .fold(0.0, f64::max);
        Some(worst)
    })();
    let (mut oo, mut of) = (Some(0.0f64), if triple_ok { Some(0.0f64) } else { None });
    for s in CyclicPerm::ALL {
        match omega_relations_residual(&zt, &qq, &lambda, s) {
            Ok((a, b)) => {
                oo = oo.map(|v| v.max(a));
                of = of.map(|v| v.max(b));
            }
            Err(_) => {
                oo = None;
                of = None;
            }
        }
    }
    let compat = KPoint::from_interior(&z1, &z2, q1, q2, &lambda).ok().and_then(|k| k.compat_residual());

    let det = {
        let m = m_matrix_real(s[0], s[1], lm);
        let direct = det2(&m);
        let fac = det_m_factored(s[0], s[1], lm);
        if fac.abs() >= 1e-6 * (m[0][0] * m[1][1]).abs() {
            Some(rel_diff(direct, fac))
        } else {
            None
        }
    };
    let two_ways = {
        let a = m_matrix_from_points(x[0], x[1], &real);
        let b = m_matrix_real(x[0] + real.re(), x[1] + real.re(), real.re());
        let scale = a.iter().flatten().chain(b.iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = (0..4).map(|k| (a[k / 2][k % 2] - b[k / 2][k % 2]).abs()).fold(0.0, f64::max);
        Some(if scale == 0.0 { 0.0 } else { diff / scale })
    };
    let reduction = guarded(&|| {
        let zl = lambda.z_lambda();
        let lhs = cd_raw(phi_raw(z[0], z[1], q1, q2, lambda.lambda()), zl);
        let m = mu2_closed(&z1, &z2, q1, q2, &lambda).ok()?;
        Some(rel_diff(lhs, m * (cd_raw(z[0], zl) + cd_raw(z[1], zl)) / 2.0))
    });

    [chi_phi, mu2_cf, star_omega, le_star, star_real, mu3, f_forms, nu_omega, oo, of, compat, det, two_ways, reduction]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_passes() {
        let r = run_identity_suite(0, 1, &Region::default(), Mode::Float, Jobs(1)).unwrap();
        assert!(r.passed);
        assert!(r.entries.iter().all(|e| e.evaluated == 0));
    }

    #[test]
    fn small_float_suite_passes() {
        let r = run_identity_suite(2000, 42, &Region::default(), Mode::Float, Jobs(2)).unwrap();
        for e in &r.entries {
            assert!(e.passed, "{e:?}");
        }
    }

    #[test]
    fn accumulator_merge_is_order_free() {
        let vals = [0.5, 0.1, 0.5, 0.3];
        let mut whole = Acc::default();
        for (i, v) in vals.iter().enumerate() {
            whole.push(i as u64, Some(*v));
        }
        let (mut a, mut b) = (Acc::default(), Acc::default());
        a.push(2, Some(0.5));
        a.push(3, Some(0.3));
        b.push(0, Some(0.5));
        b.push(1, Some(0.1));
        b.push(9, None);
        let m1 = a.merge(b);
        let m2 = b.merge(a);
        assert_eq!(m1.arg, Some(0));
        assert_eq!(m2.arg, Some(0));
        assert_eq!(m1.evaluated, 4);
        assert_eq!(m1.skipped, 1);
        assert_eq!(whole.arg, m1.arg);
    }
}
