//! The identity suite over Gaussian rationals.
//!
//! Spectral parameters are drawn through their fixed point: for a Gaussian
//! rational `z_λ` with `Im z_λ > 0` and `|z_λ|² <= 2`, `λ = -z_λ - 2/z_λ` has
//! `Im λ >= 0` and `z_λ` as its upper root. Real `λ` come from rational
//! points of the circle `|z|² = 2`. Quantities involving square roots
//! (`r₁`, `r₂`, `ω`, `Ω`) enter only through degree-zero ratios, which are
//! evaluated with `χ` in place of the polar direction.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use super::identities::{reduce_parallel, IdentityReport, Mode};
use super::{sample_rng, Jobs};
use crate::recursion::CyclicPerm;

type Q = BigRational;
type QC = Complex<Q>;

pub const EXACT_IDENTITIES: [&str; 14] = [
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

/// Run the exact suite; every evaluated identity must hold with equality.
pub fn run_exact_suite(n: u64, seed: u64, jobs: Jobs) -> IdentityReport {
    let acc = reduce_parallel(n, jobs, |i| exact_sample(seed, i));
    IdentityReport::assemble(Mode::Exact, n, seed, 0.0, &acc, &EXACT_IDENTITIES)
}

fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn real(x: Q) -> QC {
    QC::new(x, Q::zero())
}

fn rand_q<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Q {
    q(rng.gen_range(lo..=hi), rng.gen_range(1..=den))
}

fn nsq(z: &QC) -> Q {
    z.norm_sqr()
}

fn div(a: &Q, b: &Q) -> Option<Q> {
    if b.is_zero() {
        None
    } else {
        Some(a / b)
    }
}

fn cinv(z: &QC) -> Option<QC> {
    if z.is_zero() {
        None
    } else {
        Some(z.inv())
    }
}

fn powu(x: &Q, p: u32) -> Q {
    (0..p).fold(Q::one(), |acc, _| acc * x)
}

/// `0` on equality, otherwise the relative difference in floating point.
fn residual(a: &Q, b: &Q) -> f64 {
    if a == b {
        return 0.0;
    }
    let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    ((a - b).abs() / scale).to_f64().unwrap_or(f64::INFINITY)
}

struct Lam {
    l: QC,
    zl: QC,
}

impl Lam {
    fn from_fixed_point(zl: QC) -> Option<Self> {
        let l = -(zl.clone() + real(q(2, 1)) * cinv(&zl)?);
        Some(Lam { l, zl })
    }

    fn s(&self, z: &QC, qi: &Q) -> QC {
        z + &self.l - real(qi.clone())
    }

    fn phi(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> Option<QC> {
        Some(-cinv(&self.s(z1, q1))? - cinv(&self.s(z2, q2))?)
    }

    fn cd(&self, z: &QC) -> Option<Q> {
        div(&nsq(&(z - &self.zl)), &z.im)
    }

    fn chi(&self, z: &QC) -> Option<Q> {
        div(&z.im, &nsq(&(z - &self.zl)))
    }

    fn mu2(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> Option<Q> {
        let f = self.phi(z1, z2, q1, q2)?;
        div(&(q(2, 1) * self.cd(&f)?), &(self.cd(z1)? + self.cd(z2)?))
    }

    /// `(N, T₁, T₂)` of the closed forms.
    fn parts(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> (Q, Q, Q) {
        let (s1, s2) = (self.s(z1, q1), self.s(z2, q2));
        let n = nsq(&(&s1 + &s2 + &self.zl * (&s1 * &s2)));
        let t1 = nsq(&(z1 - &self.zl)) * nsq(&s2);
        let t2 = nsq(&(z2 - &self.zl)) * nsq(&s1);
        (n, t1, t2)
    }

    fn weighted(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q, w: [&Q; 2], p: [&Q; 2]) -> Option<Q> {
        let (n, t1, t2) = self.parts(z1, z2, q1, q2);
        let den = (p[0] * w[0] * t1 + p[1] * w[1] * t2) * (w[0] + w[1]);
        div(&(q(2, 1) * w[0] * w[1] * n), &den)
    }

    fn p_factor(&self, z: &QC) -> Option<Q> {
        Some(Q::one() + div(&self.l.im, &z.im)?)
    }

    fn mu2_closed(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> Option<Q> {
        let (x1, x2) = (self.chi(z1)?, self.chi(z2)?);
        let (p1, p2) = (self.p_factor(z1)?, self.p_factor(z2)?);
        self.weighted(z1, z2, q1, q2, [&x1, &x2], [&p1, &p2])
    }

    fn mu2_star(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> Option<Q> {
        let (x1, x2) = (self.chi(z1)?, self.chi(z2)?);
        let one = Q::one();
        self.weighted(z1, z2, q1, q2, [&x1, &x2], [&one, &one])
    }

    fn chi_phi_closed(&self, z1: &QC, z2: &QC, q1: &Q, q2: &Q) -> Option<Q> {
        let (s1, s2) = (self.s(z1, q1), self.s(z2, q2));
        let num = &s1.im * nsq(&s2) + &s2.im * nsq(&s1);
        div(&num, &nsq(&(&s1 + &s2 + &self.zl * (&s1 * &s2))))
    }
}

fn m_real(s1: &Q, s2: &Q, l: &Q) -> [Q; 3] {
    let two = q(2, 1);
    let off = -(s1 * s2) * (s1 * s2 - l * (s1 + s2) / &two + &two);
    let m11 = (s1 * s1 - l * s1 + &two) * s2 * s2;
    let m22 = (s2 * s2 - l * s2 + &two) * s1 * s1;
    [m11, off, m22]
}

fn sample_z<R: Rng>(rng: &mut R) -> QC {
    QC::new(rand_q(rng, -60, 60, 10), rand_q(rng, 1, 60, 20))
}

fn sample_fixed_point<R: Rng>(rng: &mut R) -> QC {
    loop {
        let z = QC::new(rand_q(rng, -14, 14, 10), rand_q(rng, 1, 14, 10));
        if nsq(&z) <= q(2, 1) {
            return z;
        }
    }
}

/// A rational point `x + iy` of `|z|² = 2` with `y > 0`; `λ = -2x`.
fn sample_circle_point<R: Rng>(rng: &mut R) -> QC {
    loop {
        let m = rand_q(rng, -24, 4, 10);
        let d = Q::one() + &m * &m;
        let x = (&m * &m - q(2, 1) * &m - Q::one()) / &d;
        let y = (Q::one() - q(2, 1) * &m - &m * &m) / &d;
        if y.is_positive() {
            return QC::new(x, y);
        }
    }
}

fn opt_res(a: Option<Q>, b: Option<Q>) -> Option<f64> {
    Some(residual(&a?, &b?))
}

fn exact_sample(seed: u64, index: u64) -> [Option<f64>; 14] {
    let mut rng = sample_rng(seed, index);
    let z = [sample_z(&mut rng), sample_z(&mut rng), sample_z(&mut rng)];
    let qs: [Q; 4] = std::array::from_fn(|_| rand_q(&mut rng, -30, 30, 10));
    let lam = Lam::from_fixed_point(sample_fixed_point(&mut rng)).expect("nonzero fixed point");
    let rl = Lam::from_fixed_point(sample_circle_point(&mut rng)).expect("nonzero fixed point");
    let k = rand_q(&mut rng, 1, 50, 7);
    let s = [rand_q(&mut rng, -60, 60, 10), rand_q(&mut rng, -60, 60, 10)];
    let lm = rand_q(&mut rng, -28, 28, 10);
    let x = [rand_q(&mut rng, -60, 60, 10), rand_q(&mut rng, -60, 60, 10)];

    let (z1, z2, q1, q2) = (&z[0], &z[1], &qs[0], &qs[1]);

    let chi_phi = (|| {
        let f = lam.phi(z1, z2, q1, q2)?;
        opt_res(lam.chi(&f), lam.chi_phi_closed(z1, z2, q1, q2))
    })();
    let mu2_cf = opt_res(lam.mu2(z1, z2, q1, q2), lam.mu2_closed(z1, z2, q1, q2));
    let star_omega = (|| {
        let (x1, x2) = (lam.chi(z1)?, lam.chi(z2)?);
        let (w1, w2) = (&k * &x1, &k * &x2);
        let one = Q::one();
        opt_res(lam.mu2_star(z1, z2, q1, q2), lam.weighted(z1, z2, q1, q2, [&w1, &w2], [&one, &one]))
    })();
    let le_star = (|| {
        let (a, b) = (lam.mu2(z1, z2, q1, q2)?, lam.mu2_star(z1, z2, q1, q2)?);
        Some(if a <= b { 0.0 } else { residual(&a, &b) })
    })();
    let star_real = opt_res(rl.mu2(z1, z2, q1, q2), rl.mu2_star(z1, z2, q1, q2));

    let mu3 = (|| {
        let cds = [lam.cd(&z[0])?, lam.cd(&z[1])?, lam.cd(&z[2])?];
        let total = &cds[0] + &cds[1] + &cds[2];
        let nu: Vec<Q> = cds.iter().map(|c| div(c, &total)).collect::<Option<_>>()?;
        let mut worst = 0.0f64;
        for p in [2u32, 3] {
            let mut num = Q::zero();
            let mut fac = Q::zero();
            for s in CyclicPerm::ALL {
                let [a, b, c] = s.indices();
                let inner = lam.phi(&z[b], &z[c], &qs[b], &qs[c])?;
                let outer = lam.phi(&z[a], &inner, &qs[a], &qs[3])?;
                num += powu(&lam.cd(&outer)?, p);
                let tau = lam.mu2(&z[a], &inner, &qs[a], &qs[3])?;
                let xi = lam.mu2(&z[b], &z[c], &qs[b], &qs[c])?;
                let bracket = &nu[a] / q(2, 1) + xi * (&nu[b] + &nu[c]) / q(4, 1);
                fac += powu(&(tau * bracket), p);
            }
            let direct = div(&num, &cds.iter().map(|c| powu(c, p)).sum())?;
            let factored = div(&fac, &nu.iter().map(|v| powu(v, p)).sum())?;
            worst = worst.max(residual(&direct, &factored));
        }
        Some(worst)
    })();

    // r₁F from both forms: χ(φ) and 2χ₁χ₂/(μ₂(χ₁+χ₂))
    let f_r1_mu2 = |a: &QC, b: &QC, qa: &Q, qb: &Q| -> Option<Q> {
        let (x1, x2) = (lam.chi(a)?, lam.chi(b)?);
        div(&(q(2, 1) * &x1 * &x2), &(lam.mu2(a, b, qa, qb)? * (&x1 + &x2)))
    };
    let f_forms = (|| {
        let f = lam.phi(z1, z2, q1, q2)?;
        opt_res(lam.chi(&f), f_r1_mu2(z1, z2, q1, q2))
    })();

    let chis: Option<[Q; 3]> = (|| Some([lam.chi(&z[0])?, lam.chi(&z[1])?, lam.chi(&z[2])?]))();
    let nu_omega = (|| {
        let x = chis.clone()?;
        let cds = [lam.cd(&z[0])?, lam.cd(&z[1])?, lam.cd(&z[2])?];
        let total = &cds[0] + &cds[1] + &cds[2];
        let den = &x[0] * &x[1] + &x[0] * &x[2] + &x[1] * &x[2];
        let mut worst = 0.0f64;
        for s in CyclicPerm::ALL {
            let [a, b, c] = s.indices();
            worst = worst.max(residual(&div(&cds[a], &total)?, &div(&(&x[b] * &x[c]), &den)?));
        }
        Some(worst)
    })();
    let oo = (|| {
        let x = chis.clone()?;
        let mut worst = 0.0f64;
        for s in CyclicPerm::ALL {
            let [_, b, c] = s.indices();
            let pair = &x[b] * &x[b] + &x[c] * &x[c];
            let w1 = div(&(&x[b] * &x[b]), &pair)?;
            let w2 = div(&(&x[c] * &x[c]), &pair)?;
            worst = worst.max(residual(&(&x[b] * &x[b]), &(&pair * w1)));
            worst = worst.max(residual(&(&x[c] * &x[c]), &(&pair * w2)));
        }
        Some(worst)
    })();
    let of = (|| {
        let x = chis.clone()?;
        let mut worst = 0.0f64;
        for s in CyclicPerm::ALL {
            let [a, b, c] = s.indices();
            let inner = lam.phi(&z[b], &z[c], &qs[b], &qs[c])?;
            let xf = lam.chi(&inner)?;
            let fr = f_r1_mu2(&z[b], &z[c], &qs[b], &qs[c])?;
            let fr2 = &fr * &fr;
            let xa2 = &x[a] * &x[a];
            let outer = &xa2 + &xf * &xf;
            let w1 = div(&xa2, &outer)?;
            let w2 = div(&(&xf * &xf), &outer)?;
            let total = &xa2 + &fr2;
            worst = worst.max(residual(&xa2, &(&total * w1)));
            worst = worst.max(residual(&fr2, &(&total * w2)));
        }
        Some(worst)
    })();
    let compat = (|| {
        let lhs = &z1.im * lam.chi(z2)? * nsq(&(z2 - &lam.zl));
        let rhs = &z2.im * lam.chi(z1)? * nsq(&(z1 - &lam.zl));
        Some(residual(&lhs, &rhs))
    })();

    let det = {
        let [m11, m12, m22] = m_real(&s[0], &s[1], &lm);
        let direct = &m11 * &m22 - &m12 * &m12;
        let d = &s[0] - &s[1];
        let fac = &s[0] * &s[0] * &s[1] * &s[1] * &d * &d * (q(2, 1) - &lm * &lm / q(4, 1));
        Some(residual(&direct, &fac))
    };
    let two_ways = {
        let l = rl.l.re.clone();
        let (a, b) = (real(x[0].clone()), real(x[1].clone()));
        let (sa, sb) = (&a + &rl.l, &b + &rl.l);
        let m11 = nsq(&(&a - &rl.zl)) * nsq(&sb);
        let m22 = nsq(&(&b - &rl.zl)) * nsq(&sa);
        let cross = nsq(&(&sa + &sb + &rl.zl * (&sa * &sb)));
        let m12 = (&m11 + &m22) / q(2, 1) - cross;
        let [r11, r12, r22] = m_real(&(&x[0] + &l), &(&x[1] + &l), &l);
        Some(residual(&m11, &r11).max(residual(&m12, &r12)).max(residual(&m22, &r22)))
    };
    let reduction = (|| {
        let f = lam.phi(z1, z2, q1, q2)?;
        let lhs = lam.cd(&f)?;
        let rhs = lam.mu2_closed(z1, z2, q1, q2)? * (lam.cd(z1)? + lam.cd(z2)?) / q(2, 1);
        Some(residual(&lhs, &rhs))
    })();

    [chi_phi, mu2_cf, star_omega, le_star, star_real, mu3, f_forms, nu_omega, oo, of, compat, det, two_ways, reduction]
}
