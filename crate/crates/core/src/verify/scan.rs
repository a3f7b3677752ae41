//! Supremum scans of `μ₂` and `μ₃,p` over grids near the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_band, require_strict_exponent, Jobs, Region};
use crate::error::{Error, Result};
use crate::halfplane::{cd_raw, ExtendedPoint, SpectralParam, C64};
use crate::recursion::mu2_raw;

/// Most counterexamples kept in a report; the count is always exact.
pub const MAX_COUNTEREXAMPLES: usize = 100;

/// Grid for `scan_mu2`.
///
/// The `z` axis is the product of `n_re` real parts and `n_im` log-spaced
/// imaginary parts, plus `n_w × n_w` points `z = -1/w` of the chart at `i∞`
/// with `|w|` log-spaced over `[1/im_max, 1/re_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_re: usize,
    pub n_im: usize,
    pub n_w: usize,
    pub n_lambda_re: usize,
    pub lambda_im: Vec<f64>,
    pub refinement_depth: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_re: 40,
            n_im: 40,
            n_w: 8,
            n_lambda_re: 40,
            lambda_im: vec![1e-3, 1e-2, 1e-1],
            refinement_depth: 24,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_re < 2 || self.n_im < 2 || self.n_w < 2 || self.n_lambda_re < 2 {
            return Err(Error::Config("every grid axis needs at least 2 points".into()));
        }
        if self.lambda_im.is_empty() || self.lambda_im.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("lambda_im must be a non-empty list of positive values".into()));
        }
        Ok(())
    }

    /// Uniform scaling of the per-axis counts, used by `--grid`.
    pub fn scaled(n: usize) -> Self {
        GridSpec { n_re: n, n_im: n, n_w: (n / 5).max(2), n_lambda_re: n, ..GridSpec::default() }
    }

    fn points(&self) -> usize {
        self.n_re * self.n_im + self.n_w * self.n_w
    }

    /// Number of ordered cells `(z₁, z₂, λ)` covered.
    pub fn cells(&self) -> u64 {
        let m = self.points() as u64;
        m * m * (self.n_lambda_re * self.lambda_im.len()) as u64
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// Refinement coordinates of a grid point.
#[derive(Clone, Copy, Debug)]
enum Coord {
    /// `(Re z, ln Im z)`.
    Z(f64, f64),
    /// `(ln |w|, arg w)` with `z = -1/w`.
    W(f64, f64),
}

impl Coord {
    fn point(self) -> C64 {
        match self {
            Coord::Z(re, li) => C64::new(re, li.exp()),
            Coord::W(lr, th) => -C64::from_polar(lr.exp(), th).inv(),
        }
    }

    fn pair(self) -> [f64; 2] {
        match self {
            Coord::Z(a, b) | Coord::W(a, b) => [a, b],
        }
    }

    fn with(self, v: [f64; 2]) -> Coord {
        match self {
            Coord::Z(..) => Coord::Z(v[0], v[1]),
            Coord::W(..) => Coord::W(v[0], v[1]),
        }
    }
}

/// Box and step sizes of the refinement for each chart.
#[derive(Clone, Copy)]
struct Bounds {
    z: [[f64; 2]; 2],
    w: [[f64; 2]; 2],
    z_step: [f64; 2],
    w_step: [f64; 2],
}

impl Bounds {
    fn of(&self, c: Coord) -> ([[f64; 2]; 2], [f64; 2]) {
        match c {
            Coord::Z(..) => (self.z, self.z_step),
            Coord::W(..) => (self.w, self.w_step),
        }
    }
}

struct ZAxis {
    coords: Vec<Coord>,
    bounds: Bounds,
}

fn z_axis(re: &[f64], im: &[f64], rho: &[f64], theta: &[f64]) -> ZAxis {
    let mut coords = Vec::with_capacity(re.len() * im.len() + rho.len() * theta.len());
    for &y in im {
        for &x in re {
            coords.push(Coord::Z(x, y.ln()));
        }
    }
    for &r in rho {
        for &t in theta {
            coords.push(Coord::W(r.ln(), t));
        }
    }
    let span = |v: &[f64], f: fn(f64) -> f64| [f(v[0]), f(v[v.len() - 1])];
    let step = |b: [f64; 2], n: usize| (b[1] - b[0]).abs() / (n.max(2) - 1) as f64;
    let zb = [span(re, |x| x), span(im, f64::ln)];
    let wb = [span(rho, f64::ln), span(theta, |x| x)];
    let bounds = Bounds {
        z: zb,
        w: wb,
        z_step: [step(zb[0], re.len()), step(zb[1], im.len())],
        w_step: [step(wb[0], rho.len()), step(wb[1], theta.len())],
    };
    ZAxis { coords, bounds }
}

fn w_angles(n: usize) -> Vec<f64> {
    (1..=n).map(|k| std::f64::consts::PI * k as f64 / (n + 1) as f64).collect()
}

/// A sampled point where the bound fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub z: Vec<ExtendedPoint>,
    pub lambda: SpectralParam,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub z1: ExtendedPoint,
    pub z2: ExtendedPoint,
    pub lambda: SpectralParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Supremum after refinement of the grid argmax.
    pub sup: f64,
    /// Supremum over the grid alone.
    pub grid_sup: f64,
    pub argmax: Argmax,
    pub grid_argmax: Argmax,
    pub margin: f64,
    /// Ordered cells covered; evaluation uses the symmetry `μ₂(a,b) = μ₂(b,a)`.
    pub samples: u64,
    pub evaluated: u64,
    pub skipped: u64,
    pub counterexample_count: u64,
    pub counterexamples: Vec<Counterexample>,
    pub refinement_depth: usize,
    pub passed: bool,
}

/// Running maximum keyed by a lexicographic index; smallest index wins ties.
#[derive(Clone, Debug, Default)]
struct MaxAcc<K: Ord + Copy> {
    best: Option<(f64, K)>,
    evaluated: u64,
    skipped: u64,
    bad: Vec<(K, f64)>,
    bad_count: u64,
}

impl<K: Ord + Copy> MaxAcc<K> {
    fn new() -> Self {
        MaxAcc { best: None, evaluated: 0, skipped: 0, bad: Vec::new(), bad_count: 0 }
    }

    fn push(&mut self, key: K, v: f64) {
        if !v.is_finite() {
            self.skipped += 1;
            return;
        }
        self.evaluated += 1;
        if v >= 1.0 {
            self.bad_count += 1;
            if self.bad.len() < MAX_COUNTEREXAMPLES {
                self.bad.push((key, v));
            }
        }
        self.offer(key, v);
    }

    fn offer(&mut self, key: K, v: f64) {
        let better = match self.best {
            None => true,
            Some((m, k)) => v > m || (v == m && key < k),
        };
        if better {
            self.best = Some((v, key));
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.evaluated += o.evaluated;
        self.skipped += o.skipped;
        self.bad_count += o.bad_count;
        self.bad.extend(o.bad);
        self.bad.sort_by_key(|b| b.0);
        self.bad.truncate(MAX_COUNTEREXAMPLES);
        if let Some((v, k)) = o.best {
            self.offer(k, v);
        }
        self
    }
}

/// Per-`λ` tables: `-1/(z+λ)` and `cd(z)` for every axis point.
fn tables(points: &[C64], lambda: &SpectralParam) -> (Vec<C64>, Vec<f64>) {
    let l = lambda.lambda();
    let zl = lambda.z_lambda();
    let t = points.iter().map(|&z| -(z + l).inv()).collect();
    let c = points.iter().map(|&z| cd_raw(z, zl)).collect();
    (t, c)
}

/// Scan `μ₂(z₁, z₂, 0, 0, λ)` over the grid and refine the largest value.
pub fn scan_mu2(region: &Region, grid: &GridSpec, jobs: Jobs) -> Result<ScanReport> {
    region.validate()?;
    require_band(region.e)?;
    grid.validate()?;

    let re = linspace(-region.re_max, region.re_max, grid.n_re);
    let im = logspace(region.im_floor, region.im_max, grid.n_im);
    let rho = logspace(1.0 / region.im_max, 1.0 / region.re_max, grid.n_w);
    let axis = z_axis(&re, &im, &rho, &w_angles(grid.n_w));
    let points: Vec<C64> = axis.coords.iter().map(|c| c.point()).collect();
    let lre = linspace(-region.e, region.e, grid.n_lambda_re);
    let lambdas: Vec<SpectralParam> = grid
        .lambda_im
        .iter()
        .flat_map(|&y| lre.iter().map(move |&x| SpectralParam::new(C64::new(x, y))))
        .collect::<Result<_>>()?;

    let m = points.len();
    let tasks = lambdas.len() * m;
    let acc = jobs.run(|| {
        let tabs: Vec<(Vec<C64>, Vec<f64>)> = lambdas.par_iter().map(|l| tables(&points, l)).collect();
        (0..tasks)
            .into_par_iter()
            .fold(MaxAcc::<(usize, usize, usize)>::new, |mut acc, task| {
                let (li, i) = (task / m, task % m);
                let zl = lambdas[li].z_lambda();
                let (t, c) = &tabs[li];
                for j in i..m {
                    let image = t[i] + t[j];
                    let v = 2.0 * cd_raw(image, zl) / (c[i] + c[j]);
                    acc.push((li, i, j), v);
                }
                acc
            })
            .reduce(MaxAcc::new, MaxAcc::merge)
    });

    let (grid_sup, (li, i, j)) = acc.best.ok_or_else(|| Error::Config("the grid has no finite values".into()))?;
    let lam = lambdas[li];
    let start = Refine { a: axis.coords[i], b: axis.coords[j], re_lambda: lam.re(), im_lambda: lam.im() };
    let lstep = 2.0 * region.e / (grid.n_lambda_re - 1) as f64;
    let refined = refine(start, &axis.bounds, [-region.e, region.e], lstep, grid.refinement_depth);
    let refined_value = refined.value();

    let mut bad: Vec<Counterexample> = acc
        .bad
        .iter()
        .map(|&((li, i, j), v)| Counterexample {
            z: vec![ExtendedPoint::Interior(points[i]), ExtendedPoint::Interior(points[j])],
            lambda: lambdas[li],
            value: v,
        })
        .collect();
    let mut bad_count = acc.bad_count;
    if refined_value >= 1.0 {
        bad_count += 1;
        if bad.len() < MAX_COUNTEREXAMPLES {
            bad.push(Counterexample { z: refined.points().to_vec(), lambda: refined.lambda(), value: refined_value });
        }
    }
    let (sup, argmax) =
        if refined_value > grid_sup { (refined_value, refined.argmax()) } else { (grid_sup, start.argmax()) };
    let skipped = acc.skipped;
    let evaluated = acc.evaluated;
    Ok(ScanReport {
        sup,
        grid_sup,
        argmax,
        grid_argmax: start.argmax(),
        margin: 1.0 - sup,
        samples: grid.cells(),
        evaluated,
        skipped,
        counterexample_count: bad_count,
        counterexamples: bad,
        refinement_depth: grid.refinement_depth,
        passed: sup < 1.0 && bad_count == 0 && (skipped as f64) <= 0.01 * (evaluated + skipped) as f64,
    })
}

#[derive(Clone, Copy, Debug)]
struct Refine {
    a: Coord,
    b: Coord,
    re_lambda: f64,
    im_lambda: f64,
}

impl Refine {
    fn lambda(&self) -> SpectralParam {
        SpectralParam::new(C64::new(self.re_lambda, self.im_lambda)).expect("Im λ > 0")
    }

    fn points(&self) -> [ExtendedPoint; 2] {
        [ExtendedPoint::Interior(self.a.point()), ExtendedPoint::Interior(self.b.point())]
    }

    fn value(&self) -> f64 {
        let v = mu2_raw(self.a.point(), self.b.point(), 0.0, 0.0, &self.lambda());
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }

    fn argmax(&self) -> Argmax {
        let [z1, z2] = self.points();
        Argmax { z1, z2, lambda: self.lambda() }
    }
}

/// Compass search with halving steps, kept inside the grid box.
fn refine(start: Refine, bounds: &Bounds, lbox: [f64; 2], lstep: f64, depth: usize) -> Refine {
    let mut best = start;
    let mut best_v = best.value();
    let (_, sa) = bounds.of(start.a);
    let (_, sb) = bounds.of(start.b);
    let mut steps = [sa[0], sa[1], sb[0], sb[1], lstep];
    for _ in 0..depth {
        for _ in 0..64 {
            let mut improved = false;
            for k in 0..5 {
                for sign in [-1.0, 1.0] {
                    let cand = shifted(best, bounds, lbox, k, sign * steps[k]);
                    let v = cand.value();
                    if v > best_v {
                        best = cand;
                        best_v = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        for s in steps.iter_mut() {
            *s /= 2.0;
        }
    }
    best
}

fn shifted(r: Refine, bounds: &Bounds, lbox: [f64; 2], k: usize, delta: f64) -> Refine {
    let mut out = r;
    let move_coord = |c: Coord, idx: usize| {
        let (b, _) = bounds.of(c);
        let mut v = c.pair();
        v[idx] = (v[idx] + delta).clamp(b[idx][0].min(b[idx][1]), b[idx][0].max(b[idx][1]));
        c.with(v)
    };
    match k {
        0 | 1 => out.a = move_coord(r.a, k),
        2 | 3 => out.b = move_coord(r.b, k - 2),
        _ => out.re_lambda = (r.re_lambda + delta).clamp(lbox[0], lbox[1]),
    }
    out
}

/// One level of the diagonal slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalLevel {
    pub im_lambda: f64,
    pub max_mu2: f64,
    /// Largest `(1 - μ₂)/Im λ` over the slice.
    pub max_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub levels: Vec<DiagonalLevel>,
    /// Largest relative change of the pointwise slope `(1 - μ₂)/Im λ`
    /// between the two smallest levels, over points with `Im z >= 100 Im λ`.
    pub slope_change: f64,
    pub points: u64,
    pub passed: bool,
}

/// Largest slope change accepted by `diagonal_slice`.
pub const SLOPE_TOL: f64 = 0.05;

/// `μ₂(z, z, 0, 0, λ)` along the diagonal for decreasing `Im λ`. For real
/// `λ` the value is one, so it must approach one linearly in `Im λ`.
pub fn diagonal_slice(region: &Region, grid: &GridSpec, im_levels: &[f64], jobs: Jobs) -> Result<DiagonalReport> {
    region.validate()?;
    require_band(region.e)?;
    grid.validate()?;
    if im_levels.len() < 2 || im_levels.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("the diagonal slice needs at least two positive Im λ levels".into()));
    }
    let mut levels_sorted = im_levels.to_vec();
    levels_sorted.sort_by(|a, b| b.total_cmp(a));

    let re = linspace(-region.re_max, region.re_max, grid.n_re);
    let im = logspace(region.im_floor, region.im_max, grid.n_im);
    let lre = linspace(-region.e, region.e, grid.n_lambda_re);
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(lre.len() * im.len() * re.len());
    for &l in &lre {
        for &y in &im {
            for &x in &re {
                cells.push((l, x, y));
            }
        }
    }

    let eval = |eps: f64| -> Vec<f64> {
        jobs.run(|| {
            cells
                .par_iter()
                .map(|&(l, x, y)| {
                    let lam = SpectralParam::new(C64::new(l, eps)).expect("Im λ > 0");
                    let z = C64::new(x, y);
                    mu2_raw(z, z, 0.0, 0.0, &lam)
                })
                .collect()
        })
    };
    let values: Vec<Vec<f64>> = levels_sorted.iter().map(|&e| eval(e)).collect();

    let levels: Vec<DiagonalLevel> = levels_sorted
        .iter()
        .zip(&values)
        .map(|(&eps, v)| DiagonalLevel {
            im_lambda: eps,
            max_mu2: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_slope: v.iter().map(|m| (1.0 - m) / eps).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();

    let n = levels_sorted.len();
    let (e1, e2) = (levels_sorted[n - 2], levels_sorted[n - 1]);
    let mut slope_change = 0.0f64;
    for (k, &(_, _, y)) in cells.iter().enumerate() {
        if y < 100.0 * e1 {
            continue;
        }
        let s1 = (1.0 - values[n - 2][k]) / e1;
        let s2 = (1.0 - values[n - 1][k]) / e2;
        slope_change = slope_change.max(super::rel_diff(s1, s2));
    }
    let below_one = levels.iter().all(|l| l.max_mu2 < 1.0) && values.iter().flatten().all(|v| v.is_finite());
    Ok(DiagonalReport {
        levels,
        slope_change,
        points: cells.len() as u64,
        passed: below_one && slope_change <= SLOPE_TOL,
    })
}

/// Grid for `scan_mu3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mu3GridSpec {
    pub p: f64,
    /// `im_floor` levels, visited in the given order.
    pub levels: Vec<f64>,
    pub n_re: usize,
    /// Imaginary parts per level, spread over `[im_floor, 2 im_floor]`.
    pub n_im: usize,
    /// Points `z = -1/w` near `i∞`, `|w| ∈ [im_floor, 2 im_floor]`, per
    /// angle and radius.
    pub n_w: usize,
    pub n_lambda_re: usize,
    /// `Im λ` used at every level.
    pub lambda_im: f64,
    /// Size of the set of largest values whose `ν` spread is tracked.
    pub top_k: usize,
}

impl Mu3GridSpec {
    /// `1e-2 · 2^-k` until the level drops to `1e-4` or below.
    pub fn dyadic_levels() -> Vec<f64> {
        let mut out = vec![1e-2];
        while *out.last().expect("non-empty") > 1e-4 {
            let next = out.last().expect("non-empty") / 2.0;
            out.push(next);
        }
        out
    }

    pub fn new(p: f64) -> Self {
        Mu3GridSpec {
            p,
            levels: Self::dyadic_levels(),
            n_re: 32,
            n_im: 3,
            n_w: 3,
            n_lambda_re: 21,
            lambda_im: 0.0,
            top_k: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_strict_exponent(self.p)?;
        if self.n_re < 2 || self.n_im < 2 || self.n_w < 2 || self.n_lambda_re < 2 {
            return Err(Error::Config("every grid axis needs at least 2 points".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("levels must be a non-empty list of positive values".into()));
        }
        if !(self.lambda_im >= 0.0) || self.top_k == 0 {
            return Err(Error::Config("need lambda_im >= 0 and top_k >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mu3Level {
    pub im_floor: f64,
    pub sup: f64,
    pub margin: f64,
    pub argmax: Vec<ExtendedPoint>,
    pub argmax_lambda: SpectralParam,
    pub evaluated: u64,
    pub skipped: u64,
    pub counterexample_count: u64,
    pub counterexamples: Vec<Counterexample>,
    /// Mean of `‖ν - (⅓,⅓,⅓)‖₁` over the `top_k` largest values.
    pub top_spread_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mu3ScanReport {
    pub p: f64,
    pub e: f64,
    pub lambda_im: f64,
    pub levels: Vec<Mu3Level>,
    /// Largest relative gap on symmetric triples `(z,z,z)` between `μ₃,p`
    /// and `(μ₂(z, φ(z,z)) (1 + μ₂(z,z)) / 2)^p`.
    pub diagonal_residual: f64,
    pub margin_finest: f64,
    /// Whether the `ν` spread decreases strictly from level to level.
    pub spread_decreasing: bool,
    pub passed: bool,
}

/// Largest values with their keys, ordered by value then key.
#[derive(Clone, Debug)]
struct TopK {
    k: usize,
    items: Vec<(f64, (usize, usize, usize, usize))>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, items: Vec::new() }
    }

    fn normalize(&mut self) {
        self.items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        self.items.truncate(self.k);
    }

    fn push(&mut self, v: f64, key: (usize, usize, usize, usize)) {
        self.items.push((v, key));
        if self.items.len() >= 4 * self.k {
            self.normalize();
        }
    }

    fn merge(mut self, o: TopK) -> TopK {
        self.items.extend(o.items);
        self.normalize();
        self
    }
}

/// Scan `μ₃,p(Z, 0, λ)` over sorted triples of near-boundary points, one
/// level of `im_floor` at a time.
pub fn scan_mu3(region: &Region, grid: &Mu3GridSpec, jobs: Jobs) -> Result<Mu3ScanReport> {
    region.validate()?;
    require_band(region.e)?;
    grid.validate()?;
    let p = grid.p;
    let lre = linspace(-region.e, region.e, grid.n_lambda_re);
    let lambdas: Vec<SpectralParam> =
        lre.iter().map(|&x| SpectralParam::new(C64::new(x, grid.lambda_im))).collect::<Result<_>>()?;

    let mut levels = Vec::with_capacity(grid.levels.len());
    let mut diagonal_residual = 0.0f64;
    for &floor in &grid.levels {
        let re = linspace(-region.re_max, region.re_max, grid.n_re);
        let im = linspace(floor, 2.0 * floor, grid.n_im);
        let rho = linspace(floor, 2.0 * floor, grid.n_w);
        let axis = z_axis(&re, &im, &rho, &w_angles(grid.n_w));
        let points: Vec<C64> = axis.coords.iter().map(|c| c.point()).collect();
        let (level, diag) = scan_mu3_level(&points, &lambdas, p, floor, grid.top_k, jobs);
        diagonal_residual = diagonal_residual.max(diag);
        levels.push(level);
    }
    let margin_finest = levels.last().map(|l| l.margin).unwrap_or(f64::NAN);
    let spread_decreasing = levels.windows(2).all(|w| w[1].top_spread_mean < w[0].top_spread_mean);
    let passed = levels.iter().all(|l| l.sup < 1.0 && l.counterexample_count == 0)
        && margin_finest > 0.0
        && diagonal_residual <= 1e-9;
    Ok(Mu3ScanReport {
        p,
        e: region.e,
        lambda_im: grid.lambda_im,
        levels,
        diagonal_residual,
        margin_finest,
        spread_decreasing,
        passed,
    })
}

fn scan_mu3_level(
    points: &[C64],
    lambdas: &[SpectralParam],
    p: f64,
    floor: f64,
    top_k: usize,
    jobs: Jobs,
) -> (Mu3Level, f64) {
    let m = points.len();
    let tasks = lambdas.len() * m;
    let (acc, top, diag) = jobs.run(|| {
        let tabs: Vec<(Vec<C64>, Vec<f64>)> = lambdas.par_iter().map(|l| tables(points, l)).collect();
        (0..tasks)
            .into_par_iter()
            .fold(
                || (MaxAcc::<(usize, usize, usize, usize)>::new(), TopK::new(top_k), 0.0f64),
                |(mut acc, mut top, mut diag), task| {
                    let (li, i) = (task / m, task % m);
                    let lam = &lambdas[li];
                    let (l, zl) = (lam.lambda(), lam.z_lambda());
                    let (t, c) = &tabs[li];
                    let cdp = |k: usize| c[k].powf(p);
                    // outer image φ(z_a, φ(z_b, z_c)) with Q = 0
                    let outer = |a: usize, b: usize, cc: usize| {
                        let inner = t[b] + t[cc];
                        cd_raw(t[a] - (inner + l).inv(), zl).powf(p)
                    };
                    for j in i..m {
                        for k in j..m {
                            let num = outer(i, j, k) + outer(j, k, i) + outer(k, i, j);
                            let v = num / (cdp(i) + cdp(j) + cdp(k));
                            let key = (li, i, j, k);
                            acc.push(key, v);
                            if v.is_finite() {
                                top.push(v, key);
                            }
                            if i == j && j == k && v.is_finite() {
                                let z = points[i];
                                let w = t[i] + t[i];
                                let expect =
                                    (mu2_raw(z, w, 0.0, 0.0, lam) * (1.0 + mu2_raw(z, z, 0.0, 0.0, lam)) / 2.0).powf(p);
                                diag = diag.max(super::rel_diff(v, expect));
                            }
                        }
                    }
                    (acc, top, diag)
                },
            )
            .reduce(|| (MaxAcc::new(), TopK::new(top_k), 0.0f64), |a, b| (a.0.merge(b.0), a.1.merge(b.1), a.2.max(b.2)))
    });
    let mut top = top;
    top.normalize();

    let spread = |(li, i, j, k): (usize, usize, usize, usize)| -> f64 {
        let zl = lambdas[li].z_lambda();
        let c = [cd_raw(points[i], zl), cd_raw(points[j], zl), cd_raw(points[k], zl)];
        let total: f64 = c.iter().sum();
        c.iter().map(|v| (v / total - 1.0 / 3.0).abs()).sum()
    };
    let top_spread_mean = if top.items.is_empty() {
        f64::NAN
    } else {
        top.items.iter().map(|&(_, key)| spread(key)).sum::<f64>() / top.items.len() as f64
    };
    let triple = |(li, i, j, k): (usize, usize, usize, usize)| -> (Vec<ExtendedPoint>, SpectralParam) {
        ([i, j, k].iter().map(|&x| ExtendedPoint::Interior(points[x])).collect(), lambdas[li])
    };
    let (sup, key) = acc.best.unwrap_or((f64::NAN, (0, 0, 0, 0)));
    let (argmax, argmax_lambda) = triple(key);
    let counterexamples = acc
        .bad
        .iter()
        .map(|&(key, value)| {
            let (z, lambda) = triple(key);
            Counterexample { z, lambda, value }
        })
        .collect();
    (
        Mu3Level {
            im_floor: floor,
            sup,
            margin: 1.0 - sup,
            argmax,
            argmax_lambda,
            evaluated: acc.evaluated,
            skipped: acc.skipped,
            counterexample_count: acc.bad_count,
            counterexamples,
            top_spread_mean,
        },
        diag,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridSpec {
        GridSpec { n_re: 7, n_im: 7, n_w: 3, n_lambda_re: 5, lambda_im: vec![1e-2, 1e-1], refinement_depth: 6 }
    }

    #[test]
    fn default_grid_meets_the_cell_budget() {
        assert!(GridSpec::default().cells() >= 40u64.pow(5));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let g = GridSpec { n_re: 0, ..small() };
        assert!(scan_mu2(&Region::default(), &g, Jobs(1)).is_err());
        let g = GridSpec { lambda_im: vec![], ..small() };
        assert!(scan_mu2(&Region::default(), &g, Jobs(1)).is_err());
    }

    #[test]
    fn grid_values_match_the_functional() {
        let r = scan_mu2(&Region::default(), &small(), Jobs(1)).unwrap();
        let a = &r.grid_argmax;
        let v = mu2_raw(a.z1.value().unwrap(), a.z2.value().unwrap(), 0.0, 0.0, &a.lambda);
        assert_eq!(v, r.grid_sup);
        assert!(r.sup >= r.grid_sup);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn refinement_of_the_grid_does_not_lower_the_supremum() {
        let coarse = small();
        let fine = GridSpec { n_re: 13, n_im: 13, n_w: 5, n_lambda_re: 9, ..coarse.clone() };
        let a = scan_mu2(&Region::default(), &coarse, Jobs(1)).unwrap();
        let b = scan_mu2(&Region::default(), &fine, Jobs(1)).unwrap();
        assert!(b.grid_sup >= a.grid_sup);
    }

    #[test]
    fn mu3_rejects_p_one() {
        let g = Mu3GridSpec::new(1.0);
        assert!(scan_mu3(&Region::default(), &g, Jobs(1)).is_err());
    }

    #[test]
    fn dyadic_schedule_reaches_the_floor() {
        let l = Mu3GridSpec::dyadic_levels();
        assert_eq!(l[0], 1e-2);
        assert!(*l.last().unwrap() <= 1e-4);
        assert!(l[l.len() - 2] > 1e-4);
    }

    #[test]
    fn small_mu3_scan_matches_the_direct_formula() {
        use crate::recursion::{mu3p_direct, PotentialQuad, SiteTriple};
        let g = Mu3GridSpec { levels: vec![1e-2], n_re: 5, n_im: 2, n_w: 2, n_lambda_re: 3, ..Mu3GridSpec::new(2.0) };
        let r = scan_mu3(&Region::default(), &g, Jobs(1)).unwrap();
        let lv = &r.levels[0];
        let z = SiteTriple([lv.argmax[0], lv.argmax[1], lv.argmax[2]]);
        let d = mu3p_direct(&z, &PotentialQuad::zero(), &lv.argmax_lambda, 2.0).unwrap();
        assert!((d - lv.sup).abs() <= 1e-12 * d);
        assert!(r.diagonal_residual <= 1e-9);
    }
}
