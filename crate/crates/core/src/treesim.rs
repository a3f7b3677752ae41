//! Population dynamics of the binary-tree Green's function recursion
//! `z' = φ(z_a, z_b, q_a, q_b, λ)` with i.i.d. random potentials.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfplane::{cd_raw, dist_raw, fixed_point, ExtendedPoint, SpectralParam, C64};
use crate::recursion::phi_raw;
use crate::verify::{require_strict_exponent, sample_rng, Jobs};

/// Law of the potentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialLaw {
    /// Uniform on `[-δ, δ]`.
    Uniform,
    /// `±δ` with equal probability.
    Bernoulli,
}

/// `Im λ` per generation: a constant, or a list whose last entry repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSchedule {
    Constant(f64),
    Schedule(Vec<f64>),
}

impl EtaSchedule {
    pub fn at(&self, generation: usize) -> f64 {
        match self {
            EtaSchedule::Constant(v) => *v,
            EtaSchedule::Schedule(v) => v[generation.min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            EtaSchedule::Constant(v) => *v > 0.0,
            EtaSchedule::Schedule(v) => !v.is_empty() && v.iter().all(|x| *x > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("η must be positive".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub generations: usize,
    pub energy: f64,
    pub eta: EtaSchedule,
    pub delta: f64,
    pub dist: PotentialLaw,
    pub p: f64,
    pub seed: u64,
    /// Common starting point of the population.
    pub init: C64,
}

impl SimConfig {
    pub fn new(n: usize, generations: usize, energy: f64, eta: f64, seed: u64) -> Self {
        SimConfig {
            n,
            generations,
            energy,
            eta: EtaSchedule::Constant(eta),
            delta: 0.0,
            dist: PotentialLaw::Uniform,
            p: 2.0,
            seed,
            init: C64::new(0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("the population needs N >= 2".into()));
        }
        self.eta.validate()?;
        require_strict_exponent(self.p)?;
        if !(self.delta >= 0.0) || !self.energy.is_finite() {
            return Err(Error::Config("need a finite energy and δ >= 0".into()));
        }
        ExtendedPoint::interior(self.init)?;
        Ok(())
    }

    fn lambda(&self, generation: usize) -> Result<SpectralParam> {
        SpectralParam::new(C64::new(self.energy, self.eta.at(generation)))
    }
}

/// Moments of one generation, taken with that generation's `z_λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_cdp: f64,
    pub max_cd: f64,
    pub mean_dist: f64,
    pub max_dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub config: SimConfig,
    pub stats: Vec<GenerationStats>,
    /// Set when the run stopped before the last generation.
    pub stopped_early: Option<String>,
}

fn stats(generation: usize, pop: &[C64], lambda: &SpectralParam, p: f64) -> GenerationStats {
    let zl = lambda.z_lambda();
    let n = pop.len() as f64;
    let (mut cdp, mut max_cd, mut dist, mut max_dist) = (0.0, 0.0f64, 0.0, 0.0f64);
    for &z in pop {
        let c = cd_raw(z, zl);
        let d = dist_raw(z, zl);
        cdp += c.powf(p);
        max_cd = max_cd.max(c);
        dist += d;
        max_dist = max_dist.max(d);
    }
    GenerationStats { generation, mean_cdp: cdp / n, max_cd, mean_dist: dist / n, max_dist }
}

/// Stream keys: `(g+1) << 32 | j` for offspring `j` of generation `g`, and
/// `(g+1) << 32 | 0xFFFF_FFFF` for the pairing permutation.
fn offspring_key(g: usize, j: usize) -> u64 {
    ((g as u64 + 1) << 32) | j as u64
}

fn draw_potential<R: Rng>(rng: &mut R, cfg: &SimConfig) -> f64 {
    if cfg.delta == 0.0 {
        return 0.0;
    }
    match cfg.dist {
        PotentialLaw::Uniform => rng.gen_range(-cfg.delta..=cfg.delta),
        PotentialLaw::Bernoulli => {
            if rng.gen::<bool>() {
                cfg.delta
            } else {
                -cfg.delta
            }
        }
    }
}

/// Evolve the population and record the moment series.
pub fn run(cfg: &SimConfig, jobs: Jobs) -> Result<MomentSeries> {
    cfg.validate()?;
    if cfg.n as u64 >= 0xFFFF_FFFF {
        return Err(Error::Config("population too large for the stream layout".into()));
    }
    let mut pop = vec![cfg.init; cfg.n];
    let mut out = Vec::with_capacity(cfg.generations + 1);
    out.push(stats(0, &pop, &cfg.lambda(0)?, cfg.p));
    let mut stopped_early = None;
    for g in 0..cfg.generations {
        let lambda = cfg.lambda(g + 1)?;
        let l = lambda.lambda();
        let mut perm: Vec<usize> = (0..cfg.n).collect();
        perm.shuffle(&mut sample_rng(cfg.seed, offspring_key(g, 0xFFFF_FFFF)));
        let next: Vec<C64> = jobs.run(|| {
            (0..cfg.n)
                .into_par_iter()
                .map(|j| {
                    let mut rng = sample_rng(cfg.seed, offspring_key(g, j));
                    let (qa, qb) = (draw_potential(&mut rng, cfg), draw_potential(&mut rng, cfg));
                    let (a, b) = (perm[j], perm[(j + 1) % cfg.n]);
                    phi_raw(pop[a], pop[b], qa, qb, l)
                })
                .collect()
        });
        if let Some(bad) = next.iter().find(|z| !(z.im > 0.0 && z.re.is_finite() && z.im.is_finite())) {
            stopped_early = Some(format!("generation {}: a point left the open half-plane numerically ({bad})", g + 1));
            break;
        }
        let s = stats(g + 1, &next, &lambda, cfg.p);
        if !(s.max_cd.is_finite() && s.mean_cdp.is_finite()) {
            stopped_early = Some(format!("generation {}: cd overflowed", g + 1));
            break;
        }
        out.push(s);
        pop = next;
    }
    Ok(MomentSeries { config: cfg.clone(), stats: out, stopped_early })
}

/// `z_λ` for `λ = E + iη`, with the limiting band value `√(8 - E²)/2`
/// (zero outside the band) for comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub energy: f64,
    pub eta: f64,
    pub re_z_lambda: f64,
    pub im_z_lambda: f64,
    pub band_limit: f64,
}

pub fn fixed_point_profile(energies: &[f64], etas: &[f64]) -> Result<Vec<ProfileRow>> {
    if etas.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("profile needs η > 0".into()));
    }
    let mut rows = Vec::with_capacity(energies.len() * etas.len());
    for &e in energies {
        for &eta in etas {
            let z = fixed_point(&SpectralParam::new(C64::new(e, eta))?).value().expect("finite fixed point");
            rows.push(ProfileRow {
                energy: e,
                eta,
                re_z_lambda: z.re,
                im_z_lambda: z.im,
                band_limit: (8.0 - e * e).max(0.0).sqrt() / 2.0,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generations_echo_the_start() {
        let cfg = SimConfig::new(2, 0, 0.5, 0.1, 1);
        let s = run(&cfg, Jobs(1)).unwrap();
        assert_eq!(s.stats.len(), 1);
        let l = SpectralParam::new(C64::new(0.5, 0.1)).unwrap();
        let c = cd_raw(C64::new(0.0, 1.0), l.z_lambda());
        assert_eq!(s.stats[0].max_cd, c);
        assert_eq!(s.stats[0].mean_cdp, c * c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run(&SimConfig::new(1, 3, 0.5, 0.1, 1), Jobs(1)).is_err());
        assert!(run(&SimConfig::new(4, 3, 0.5, 0.0, 1), Jobs(1)).is_err());
        let mut c = SimConfig::new(4, 3, 0.5, 0.1, 1);
        c.p = 1.0;
        assert!(run(&c, Jobs(1)).is_err());
    }

    #[test]
    fn deterministic_dynamics_contract() {
        let cfg = SimConfig::new(8, 60, 0.5, 0.1, 3);
        let s = run(&cfg, Jobs(1)).unwrap();
        for w in s.stats[1..].windows(2) {
            assert!(w[1].max_dist < w[0].max_dist);
        }
    }

    #[test]
    fn random_potentials_keep_points_interior_and_are_reproducible() {
        let mut cfg = SimConfig::new(64, 30, 1.0, 1e-3, 7);
        cfg.delta = 0.1;
        cfg.dist = PotentialLaw::Bernoulli;
        let a = run(&cfg, Jobs(1)).unwrap();
        let b = run(&cfg, Jobs(4)).unwrap();
        assert!(a.stopped_early.is_none());
        assert_eq!(a, b);
    }

    #[test]
    fn profile_examples() {
        let rows = fixed_point_profile(&[0.0, 3.0, crate::halfplane::BAND_EDGE], &[1e-8]).unwrap();
        assert!((rows[0].im_z_lambda - std::f64::consts::SQRT_2).abs() < 1e-6);
        assert!(rows[1].im_z_lambda.abs() < 1e-6);
        assert_eq!(rows[2].band_limit, 0.0);
    }
}
