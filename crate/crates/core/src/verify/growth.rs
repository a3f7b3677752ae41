//! Monte-Carlo envelope of the two-level growth ratio
//! `cd(φ(z_σ₁, φ(z_σ₂, z_σ₃, …), q_σ₁, q₄)) / ((Σ cd zᵢ)(1 + Σ qᵢ²))`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_band, require_strict_exponent, sample_rng, Jobs, Region};
use crate::error::{Error, Result};
use crate::halfplane::{cd_raw, SpectralParam};
use crate::recursion::{phi_raw, CyclicPerm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub p: f64,
    pub n: u64,
    pub seed: u64,
    /// Samples must satisfy `Σ cd(zᵢ) >= c_k`, i.e. lie outside the
    /// compact set where the bound is trivial.
    pub c_k: f64,
    /// `|qᵢ|` is log-uniform on `[q_min, q_max]`.
    pub q_min: f64,
    pub q_max: f64,
    /// Probability that the whole quadruple `Q` is zero.
    pub q_zero_probability: f64,
    /// Largest accepted relative change of the maximum from `n` to `2n`.
    pub stability_tol: f64,
}

impl EnvelopeConfig {
    pub fn new(p: f64, n: u64, seed: u64) -> Self {
        EnvelopeConfig { p, n, seed, c_k: 1.0, q_min: 1e-3, q_max: 1e3, q_zero_probability: 0.125, stability_tol: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        require_strict_exponent(self.p)?;
        if self.n == 0 {
            return Err(Error::Config("the envelope needs n >= 1".into()));
        }
        if !(self.c_k > 0.0 && self.q_min > 0.0 && self.q_max >= self.q_min) {
            return Err(Error::Config("need c_k > 0 and 0 < q_min <= q_max".into()));
        }
        if !(0.0..=1.0).contains(&self.q_zero_probability) {
            return Err(Error::Config("q_zero_probability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub p: f64,
    pub n: u64,
    /// Fitted constant: the largest ratio over all `2n` samples.
    pub c_est: f64,
    pub max_ratio_n: f64,
    pub max_ratio_2n: f64,
    pub relative_change: f64,
    pub argmax_sample: u64,
    pub q_zero_samples: u64,
    pub q_zero_max_ratio: f64,
    /// Terms exceeding `3^(p-1)` times the `p`-th power of their ratio.
    pub per_term_violations: u64,
    /// Samples discarded because a value was not finite.
    pub skipped: u64,
    pub stable: bool,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    ratio: f64,
    q_zero: bool,
    violations: u64,
    finite: bool,
}

fn draw(region: &Region, cfg: &EnvelopeConfig, index: u64) -> Sample {
    let mut rng = sample_rng(cfg.seed, index);
    let lambda = SpectralParam::new(region.sample_lambda(&mut rng)).expect("sampled λ has Im > 0");
    let zl = lambda.z_lambda();
    let l = lambda.lambda();
    let z = loop {
        let z = [region.sample_z(&mut rng), region.sample_z(&mut rng), region.sample_z(&mut rng)];
        if z.iter().map(|&v| cd_raw(v, zl)).sum::<f64>() >= cfg.c_k {
            break z;
        }
    };
    let q_zero = rng.gen::<f64>() < cfg.q_zero_probability;
    let (lo, hi) = (cfg.q_min.ln(), cfg.q_max.ln());
    let q: [f64; 4] = std::array::from_fn(|_| {
        let mag = rng.gen_range(lo..=hi).exp();
        if rng.gen::<bool>() {
            mag
        } else {
            -mag
        }
    });
    let q = if q_zero { [0.0; 4] } else { q };

    let cds = z.map(|v| cd_raw(v, zl));
    let total: f64 = cds.iter().sum();
    let total_p: f64 = cds.iter().map(|c| c.powf(cfg.p)).sum();
    let weight = 1.0 + q.iter().map(|v| v * v).sum::<f64>();
    let bound_factor = 3f64.powf(cfg.p - 1.0);
    let mut ratio = 0.0f64;
    let mut violations = 0;
    let mut finite = true;
    for s in CyclicPerm::ALL {
        let [a, b, c] = s.indices();
        let inner = phi_raw(z[b], z[c], q[b], q[c], l);
        let outer = phi_raw(z[a], inner, q[a], q[3], l);
        let cd = cd_raw(outer, zl);
        let r = cd / total;
        finite &= r.is_finite();
        ratio = ratio.max(r / weight);
        if cd.powf(cfg.p) / total_p > bound_factor * r.powf(cfg.p) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    Sample { ratio, q_zero, violations, finite }
}

#[derive(Clone, Copy, Debug, Default)]
struct Acc {
    max: f64,
    arg: u64,
    q0_max: f64,
    q0: u64,
    violations: u64,
    skipped: u64,
}

impl Acc {
    fn push(mut self, i: u64, s: Sample) -> Self {
        if !s.finite {
            self.skipped += 1;
            return self;
        }
        if s.ratio > self.max || (s.ratio == self.max && i < self.arg) {
            self.max = s.ratio;
            self.arg = i;
        }
        if s.q_zero {
            self.q0 += 1;
            self.q0_max = self.q0_max.max(s.ratio);
        }
        self.violations += s.violations;
        self
    }

    fn merge(mut self, o: Acc) -> Self {
        if o.max > self.max || (o.max == self.max && o.arg < self.arg) {
            self.max = o.max;
            self.arg = o.arg;
        }
        self.q0_max = self.q0_max.max(o.q0_max);
        self.q0 += o.q0;
        self.violations += o.violations;
        self.skipped += o.skipped;
        self
    }
}

fn accumulate(region: &Region, cfg: &EnvelopeConfig, range: std::ops::Range<u64>, jobs: Jobs) -> Acc {
    jobs.run(|| {
        range
            .into_par_iter()
            .fold(Acc::default, |a, i| a.push(i, draw(region, cfg, i)))
            .reduce(Acc::default, Acc::merge)
    })
}

/// Estimate the growth constant on `n` samples and again on `2n` (the first
/// `n` samples are shared), and compare the two maxima.
pub fn growth_envelope(region: &Region, cfg: &EnvelopeConfig, jobs: Jobs) -> Result<EnvelopeReport> {
    region.validate()?;
    require_band(region.e)?;
    cfg.validate()?;
    let first = accumulate(region, cfg, 0..cfg.n, jobs);
    let second = accumulate(region, cfg, cfg.n..2 * cfg.n, jobs);
    let all = first.merge(second);
    let relative_change = super::rel_diff(all.max, first.max);
    let stable = all.max.is_finite() && relative_change < cfg.stability_tol;
    let skip_ok = (all.skipped as f64) <= 0.01 * (2 * cfg.n) as f64;
    Ok(EnvelopeReport {
        p: cfg.p,
        n: cfg.n,
        c_est: all.max,
        max_ratio_n: first.max,
        max_ratio_2n: all.max,
        relative_change,
        argmax_sample: all.arg,
        q_zero_samples: all.q0,
        q_zero_max_ratio: all.q0_max,
        per_term_violations: all.violations,
        skipped: all.skipped,
        stable,
        passed: stable && skip_ok && all.violations == 0 && all.q0_max <= all.max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configs() {
        let r = Region::default();
        assert!(growth_envelope(&r, &EnvelopeConfig::new(1.0, 10, 1), Jobs(1)).is_err());
        assert!(growth_envelope(&r, &EnvelopeConfig::new(2.0, 0, 1), Jobs(1)).is_err());
    }

    #[test]
    fn samples_respect_the_compact_set_and_bounds() {
        let r = Region::default();
        let cfg = EnvelopeConfig::new(2.0, 2000, 5);
        let rep = growth_envelope(&r, &cfg, Jobs(2)).unwrap();
        assert!(rep.c_est.is_finite() && rep.c_est > 0.0);
        assert_eq!(rep.per_term_violations, 0);
        assert!(rep.q_zero_max_ratio <= rep.c_est);
        assert!(rep.q_zero_samples > 0);
        assert!(rep.max_ratio_2n >= rep.max_ratio_n);
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let r = Region::default();
        let cfg = EnvelopeConfig::new(2.0, 500, 9);
        let a = growth_envelope(&r, &cfg, Jobs(1)).unwrap();
        let b = growth_envelope(&r, &cfg, Jobs(3)).unwrap();
        assert_eq!(a, b);
    }
}
