//! Verification engine: identity suites, supremum scans, directional
//! boundary limits, growth envelopes and geometric probes.
//!
//! Every randomized routine draws sample `i` from its own counter-based
//! stream `(seed, i)`, and every reduction is either associative with a
//! deterministic tie-break or performed sequentially over collected values,
//! so reports do not depend on the number of worker threads.

pub mod exact;
pub mod growth;
pub mod identities;
pub mod limit;
pub mod probe;
pub mod scan;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfplane::{SpectralRegion, BAND_EDGE, C64};

pub use exact::run_exact_suite;
pub use growth::{growth_envelope, EnvelopeConfig, EnvelopeReport};
pub use identities::{run_identity_suite, IdentityEntry, IdentityReport, Mode};
pub use limit::{limit_along_path, LimitReport, Observable, PathBase, PathSpec, Schedule};
pub use probe::{convexity_isometry_probe, ProbeReport};
pub use scan::{
    diagonal_slice, scan_mu2, scan_mu3, DiagonalReport, GridSpec, Mu3GridSpec, Mu3Level, Mu3ScanReport, ScanReport,
};

/// Sampling box for verification runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Half-width of the energy window, `0 < E < 2√2`.
    pub e: f64,
    /// Largest `Im λ`.
    pub eps: f64,
    /// Smallest `Im z` sampled.
    pub im_floor: f64,
    /// Largest `Im z` sampled.
    pub im_max: f64,
    /// `Re z ∈ [-re_max, re_max]`.
    pub re_max: f64,
    /// `|qᵢ| <= q_max`.
    pub q_max: f64,
}

impl Default for Region {
    fn default() -> Self {
        Region { e: 2.5, eps: 0.5, im_floor: 1e-3, im_max: 1e3, re_max: 6.0, q_max: 3.0 }
    }
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        SpectralRegion::new(self.e, self.eps)?;
        if !(self.im_floor > 0.0 && self.im_max > self.im_floor) {
            return Err(Error::Config("need 0 < im_floor < im_max".into()));
        }
        if !(self.re_max > 0.0) || !(self.q_max >= 0.0) {
            return Err(Error::Config("need re_max > 0 and q_max >= 0".into()));
        }
        Ok(())
    }

    pub fn spectral(&self) -> SpectralRegion {
        SpectralRegion { e: self.e, eps: self.eps }
    }

    pub(crate) fn sample_z<R: Rng>(&self, rng: &mut R) -> C64 {
        let re = rng.gen_range(-self.re_max..=self.re_max);
        let lo = self.im_floor.ln();
        let hi = self.im_max.ln();
        C64::new(re, rng.gen_range(lo..=hi).exp())
    }

    /// `λ` uniformly in `[-E, E] × (0, ε]`.
    pub(crate) fn sample_lambda<R: Rng>(&self, rng: &mut R) -> C64 {
        let re = rng.gen_range(-self.e..=self.e);
        let im = self.eps * (1.0 - rng.gen::<f64>());
        C64::new(re, im)
    }

    pub(crate) fn sample_q<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.q_max == 0.0 {
            0.0
        } else {
            rng.gen_range(-self.q_max..=self.q_max)
        }
    }
}

pub fn require_strict_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("p = {p} must be a finite real > 1")))
    }
}

pub(crate) fn require_band(e: f64) -> Result<()> {
    if e > 0.0 && e < BAND_EDGE {
        Ok(())
    } else {
        Err(Error::Config(format!("E = {e} must lie in (0, 2√2)")))
    }
}

/// Counter-based generator for sample `index` of the run keyed by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Number of worker threads for the parallel sections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Jobs(pub usize);

impl Default for Jobs {
    fn default() -> Self {
        Jobs(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

impl Jobs {
    pub fn run<T: Send>(self, f: impl FnOnce() -> T + Send) -> T {
        match rayon::ThreadPoolBuilder::new().num_threads(self.0.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

/// Relative difference with a floor on the scale.
pub(crate) fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_of_order() {
        let a: Vec<u64> = (0..5).map(|i| sample_rng(7, i).gen()).collect();
        let b: Vec<u64> = (0..5).rev().map(|i| sample_rng(7, i).gen()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(sample_rng(7, 0).gen::<u64>(), sample_rng(7, 1).gen::<u64>());
        assert_ne!(sample_rng(7, 0).gen::<u64>(), sample_rng(8, 0).gen::<u64>());
    }

    #[test]
    fn region_validation() {
        assert!(Region::default().validate().is_ok());
        assert!(Region { e: 3.0, ..Region::default() }.validate().is_err());
        assert!(Region { im_floor: 0.0, ..Region::default() }.validate().is_err());
        assert!(require_strict_exponent(1.0).is_err());
        assert!(require_strict_exponent(1.5).is_ok());
    }

    #[test]
    fn samples_stay_in_region() {
        let r = Region::default();
        let mut rng = sample_rng(1, 2);
        for _ in 0..1000 {
            let z = r.sample_z(&mut rng);
            assert!(z.im >= r.im_floor * (1.0 - 1e-12) && z.im <= r.im_max * (1.0 + 1e-12));
            let l = r.sample_lambda(&mut rng);
            assert!(r.spectral().contains(l));
        }
    }
}
