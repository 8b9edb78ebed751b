//! Conditional laws given observed rows: posterior jump densities, the
//! posterior of the scaling variable, and the predictive row.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmat::{FeatureMatrix, MatrixStats};
use crate::levy::{sample_ranked_jumps, LevyDensity, TruncationRule};
use crate::measures::{sample_jot_at, thin, unitary_rule, ScalingLaw, UnitaryMeasure};
use crate::special::{lbeta, lgamma, poisson, quad_rel, RngStream};

/// Row count and per-feature counts `n_k` of the observed atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationSummary {
    pub n: u32,
    pub counts: Vec<u32>,
}

impl ObservationSummary {
    pub fn new(n: u32, counts: Vec<u32>) -> Result<Self> {
        if let Some(c) = counts.iter().find(|&&c| c == 0 || c > n) {
            return Err(Error::param(format!("feature count {c} outside [1, {n}]")));
        }
        Ok(ObservationSummary { n, counts })
    }

    pub fn empty() -> Self {
        ObservationSummary { n: 0, counts: Vec::new() }
    }

    pub fn from_stats(n: usize, s: &MatrixStats) -> Self {
        ObservationSummary {
            n: n as u32,
            counts: s.counts.clone(),
        }
    }

    pub fn from_matrix(z: &FeatureMatrix) -> Self {
        Self::from_stats(z.n_rows(), &z.stats())
    }

    pub fn k_n(&self) -> usize {
        self.counts.len()
    }

    /// Exchangeable summary: `n` and the counts in decreasing order.
    pub fn key(&self) -> (u32, Vec<u32>) {
        let mut c = self.counts.clone();
        c.sort_unstable_by(|a, b| b.cmp(a));
        (self.n, c)
    }
}

/// Which integral defines `c_a`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaConvention {
    /// `∫_0^1 s^{n_k} (1-s)^{n-n_k} λ_a(s) ds` with `λ_a(s) = a λ(a s)`.
    #[default]
    Conditional,
    /// `∫_0^a s^{n_k} (1-s)^{n-n_k} λ(a s) ds`, the alternative display.
    UpperA,
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("a must be positive and finite, got {a}")))
    }
}

/// `c_a(n, n_k)` under the conditional convention.
pub fn c_a(lv: &LevyDensity, a: f64, n: u32, nk: u32) -> Result<f64> {
    c_a_with(lv, a, n, nk, CaConvention::Conditional)
}

pub fn c_a_with(lv: &LevyDensity, a: f64, n: u32, nk: u32, conv: CaConvention) -> Result<f64> {
    check_a(a)?;
    if nk > n {
        return Err(Error::param(format!("n_k={nk} exceeds n={n}")));
    }
    match conv {
        CaConvention::Conditional => {
            let cond = lv.conditional(a)?;
            if nk == 0 {
                if cond.total_mass().is_infinite() {
                    return Ok(f64::INFINITY);
                }
                let (lo, hi) = cond.support();
                return quad_rel(|s| (1.0 - s).powi(n as i32) * cond.density(s), lo, hi, 1e-12);
            }
            cond.beta_moment(nk, n, 1.0)
        }
        CaConvention::UpperA => {
            let (_, hi) = lv.support();
            let top = a.min(hi / a);
            let f = |s: f64| {
                let d = lv.density(a * s);
                if d == 0.0 {
                    0.0
                } else {
                    s.powi(nk as i32) * (1.0 - s).powi((n - nk) as i32) * d
                }
            };
            quad_rel(f, 0.0, top, 1e-12)
        }
    }
}

fn ln_choose(n: u32, m: u32) -> f64 {
    lgamma(n as f64 + 1.0) - lgamma(m as f64 + 1.0) - lgamma((n - m) as f64 + 1.0)
}

/// `ψ_n(a) = a ∫_0^1 (1 - (1-s)^n) λ(a s) ds`, expanded as
/// `Σ_m C(n, m) ∫ s^m (1-s)^{n-m} λ_a`.
pub fn psi_n(lv: &LevyDensity, a: f64, n: u32) -> Result<f64> {
    check_a(a)?;
    if n == 0 {
        return Ok(0.0);
    }
    let cond = lv.conditional(a)?;
    let mut total = 0.0;
    for m in 1..=n {
        total += ln_choose(n, m).exp() * cond.beta_moment(m, n, 1.0)?;
    }
    Ok(total)
}

/// `q_n = ∫_0^1 s (1-s)^n λ_a(s) ds`, the rate of new features in row `n+1`.
pub fn q_n(lv: &LevyDensity, a: f64, n: u32) -> Result<f64> {
    check_a(a)?;
    lv.conditional(a)?.beta_moment(1, n + 1, 1.0)
}

/// `a (1-s)^n λ(a s)` on (0, 1]: the unobserved part of the posterior measure.
pub fn posterior_levy(lv: &LevyDensity, a: f64, n: u32) -> Result<LevyDensity> {
    check_a(a)?;
    let cond = lv.conditional(a)?;
    if n == 0 {
        return Ok(cond);
    }
    Ok(cond.tilted(&format!("(1-s)^{n}"), move |s| (1.0 - s).powi(n as i32)))
}

/// Posterior jumps by inverting the tail of [`posterior_levy`].
pub fn sample_posterior_direct(
    lv: &LevyDensity,
    a: f64,
    n: u32,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<UnitaryMeasure> {
    let post = posterior_levy(lv, a, n)?;
    let rule = unitary_rule(trunc);
    let rj = sample_ranked_jumps(&post, 0.0, &rule, rng)?;
    let mut m = UnitaryMeasure::from_jumps(rj, rule);
    m.delta_ref = Some(a);
    Ok(m)
}

/// Posterior jumps by thinning the conditional jumps with `(1-s)^n`.
pub fn sample_posterior_thinned(
    lv: &LevyDensity,
    a: f64,
    n: u32,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<UnitaryMeasure> {
    let m = sample_jot_at(lv, a, trunc, rng)?;
    thin(&m, |s| (1.0 - s).powi(n as i32), rng)
}

/// Weight of an observed atom: density `∝ s^{n_k} (1-s)^{n-n_k} λ(a s)` on
/// (0, 1], drawn by inversion on a 10^4-point logit grid.
pub fn sample_observed_jump(lv: &LevyDensity, a: f64, n: u32, nk: u32, rng: &mut RngStream) -> Result<f64> {
    Ok(observed_jump_law(lv, a, n, nk)?.sample(rng))
}

pub fn observed_jump_law(lv: &LevyDensity, a: f64, n: u32, nk: u32) -> Result<GridDistribution> {
    check_a(a)?;
    if nk == 0 || nk > n {
        return Err(Error::param(format!("observed jump needs 1 <= n_k <= n, got n_k={nk}, n={n}")));
    }
    let cond = lv.conditional(a)?;
    let (_, hi) = cond.support();
    let (nkf, rest) = (nk as f64, (n - nk) as f64);
    let log_f = move |s: f64| {
        let d = cond.density(s);
        // overflow only happens far below the region holding the mass
        if !(d > 0.0 && d.is_finite()) {
            f64::NEG_INFINITY
        } else {
            nkf * s.ln() + rest * (-s).ln_1p() + d.ln()
        }
    };
    GridDistribution::from_log_density(log_f, GridMap::Logit { lo: 0.0, hi }, 10_000)
}

// ---------------------------------------------------------------------------
// grid distributions

/// Coordinate used to lay out a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum GridMap {
    /// `s = lo + (hi - lo) / (1 + e^{-x})`
    Logit { lo: f64, hi: f64 },
    /// `s = e^x`, restricted to `[e^{x_lo}, e^{x_hi}]`
    Log { x_lo: f64, x_hi: f64 },
}

impl GridMap {
    fn s(&self, x: f64) -> f64 {
        match *self {
            GridMap::Logit { lo, hi } => lo + (hi - lo) / (1.0 + (-x).exp()),
            GridMap::Log { .. } => x.exp(),
        }
    }

    fn x(&self, s: f64) -> f64 {
        match *self {
            GridMap::Logit { lo, hi } => ((s - lo) / (hi - s)).ln(),
            GridMap::Log { .. } => s.ln(),
        }
    }

    fn log_jac(&self, x: f64) -> f64 {
        match *self {
            GridMap::Logit { lo, hi } => {
                // ln σ(x) + ln σ(-x)
                let ls = |t: f64| if t > 0.0 { -(-t).exp().ln_1p() } else { t - t.exp().ln_1p() };
                (hi - lo).ln() + ls(x) + ls(-x)
            }
            GridMap::Log { .. } => x,
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            GridMap::Logit { .. } => (-700.0, 700.0),
            GridMap::Log { x_lo, x_hi } => (x_lo, x_hi),
        }
    }
}

/// A univariate law tabulated on a uniform grid in a transformed coordinate,
/// with a piecewise-linear density in that coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridDistribution {
    map: GridMap,
    x: Vec<f64>,
    /// Normalized density with respect to `x`.
    p: Vec<f64>,
    cdf: Vec<f64>,
    /// Cell mass over the trapezoid of its end values.
    scale: Vec<f64>,
    /// Log of the normalizer of the input density.
    log_norm: f64,
}

/// Plot-ready grid dump.
#[derive(Clone, Debug, Serialize)]
pub struct GridDump {
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
}

const COARSE: usize = 4001;
/// Grid cells whose log density is this far below the peak are trimmed.
const TRIM: f64 = 50.0;

impl GridDistribution {
    /// Tabulates the (unnormalized) density `exp(log_f(s))`.
    pub fn from_log_density<F: Fn(f64) -> f64>(log_f: F, map: GridMap, points: usize) -> Result<Self> {
        // odd, so nodes pair up for Simpson's rule
        let points = points.max(17) | 1;
        let v = |x: f64| {
            let s = map.s(x);
            let l = log_f(s) + map.log_jac(x);
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        };
        let (lo, hi) = map.range();
        let h = (hi - lo) / (COARSE - 1) as f64;
        let coarse: Vec<f64> = (0..COARSE).map(|i| v(lo + i as f64 * h)).collect();
        let peak = coarse.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::Numerical(
                "grid density vanishes or is infinite everywhere on the grid".into(),
            ));
        }
        let keep: Vec<usize> = (0..COARSE).filter(|&i| coarse[i] > peak - TRIM).collect();
        let first = keep[0].saturating_sub(1);
        let last = (keep[keep.len() - 1] + 1).min(COARSE - 1);
        let (a, b) = (lo + first as f64 * h, lo + last as f64 * h);
        let step = (b - a) / (points - 1) as f64;
        let x: Vec<f64> = (0..points).map(|i| a + i as f64 * step).collect();
        let lv: Vec<f64> = x.iter().map(|&t| v(t)).collect();
        let top = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Numerical("grid density is not finite at its peak".into()));
        }
        let mut p: Vec<f64> = lv.iter().map(|&l| (l - top).exp()).collect();
        // Simpson on node pairs, split into the two halves of the quadratic
        let mut cdf = vec![0.0; points];
        let mut scale = vec![1.0; points - 1];
        let trap = |i: usize| 0.5 * step * (p[i] + p[i + 1]);
        for i in (0..points - 2).step_by(2) {
            let (p0, p1, p2) = (p[i], p[i + 1], p[i + 2]);
            let l = step / 12.0 * (5.0 * p0 + 8.0 * p1 - p2);
            let r = step / 12.0 * (-p0 + 8.0 * p1 + 5.0 * p2);
            let (l, r) = if l >= 0.0 && r >= 0.0 { (l, r) } else { (trap(i), trap(i + 1)) };
            for (j, m) in [(i, l), (i + 1, r)] {
                let t = trap(j);
                if t > 0.0 {
                    scale[j] = m / t;
                }
                cdf[j + 1] = cdf[j] + m;
            }
        }
        let z = cdf[points - 1];
        if !(z > 0.0) {
            return Err(Error::Numerical("grid normalizer vanishes".into()));
        }
        for q in p.iter_mut() {
            *q /= z;
        }
        for c in cdf.iter_mut() {
            *c /= z;
        }
        Ok(GridDistribution {
            map,
            x,
            p,
            cdf,
            scale,
            log_norm: top + z.ln(),
        })
    }

    pub fn map(&self) -> GridMap {
        self.map
    }

    /// Log of `∫ exp(log_f)`, the normalizer of the tabulated density.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    fn step(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Support covered by the grid.
    pub fn bounds(&self) -> (f64, f64) {
        (self.map.s(self.x[0]), self.map.s(self.x[self.x.len() - 1]))
    }

    /// Total mass of the tabulated density; one up to rounding.
    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    fn cell_offset(&self, i: usize, r: f64) -> f64 {
        // solve p0 t + (p1 - p0) t^2 / (2h) = r on [0, h]
        let h = self.step();
        let r = r / self.scale[i];
        let (p0, p1) = (self.p[i], self.p[i + 1]);
        let slope = (p1 - p0) / h;
        let t = if slope.abs() < 1e-12 * (p0 + p1).max(1e-300) / h {
            r / p0.max(1e-300)
        } else {
            let disc = (p0 * p0 + 2.0 * slope * r).max(0.0);
            (disc.sqrt() - p0) / slope
        };
        t.clamp(0.0, h)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0) * self.total();
        let i = match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        };
        let t = self.cell_offset(i, u - self.cdf[i]);
        self.map.s(self.x[i] + t)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.uniform())
    }

    pub fn cdf(&self, s: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if s <= lo {
            return 0.0;
        }
        if s >= hi {
            return self.total();
        }
        let x = self.map.x(s);
        let h = self.step();
        let i = (((x - self.x[0]) / h).floor() as usize).min(self.x.len() - 2);
        let t = x - self.x[i];
        let slope = (self.p[i + 1] - self.p[i]) / h;
        self.cdf[i] + self.scale[i] * (self.p[i] * t + 0.5 * slope * t * t)
    }

    /// Density with respect to the original variable.
    pub fn pdf(&self, s: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if !(s > lo && s < hi) {
            return 0.0;
        }
        let x = self.map.x(s);
        let h = self.step();
        let i = (((x - self.x[0]) / h).floor() as usize).min(self.x.len() - 2);
        let t = (x - self.x[i]) / h;
        let px = self.p[i] * (1.0 - t) + self.p[i + 1] * t;
        px / self.map.log_jac(x).exp()
    }

    /// `E f(S)` by Simpson's rule on the grid.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let h = self.step();
        let last = self.x.len() - 1;
        let sum: f64 = (0..=last)
            .map(|i| {
                let w = if i == 0 || i == last { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(self.map.s(self.x[i])) * self.p[i]
            })
            .sum();
        sum * h / 3.0
    }

    pub fn mean(&self) -> f64 {
        self.expect(|s| s)
    }

    /// Probability of each grid cell, keyed by the cell's left end.
    pub fn dump(&self) -> GridDump {
        let points = self.x[..self.x.len() - 1].iter().map(|&x| self.map.s(x)).collect();
        let masses = self.cdf.windows(2).map(|w| w[1] - w[0]).collect();
        GridDump { points, masses }
    }

    /// Cell boundaries in the original variable with the mass of each cell.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        (0..self.x.len() - 1)
            .map(|i| (self.map.s(self.x[i]), self.map.s(self.x[i + 1]), self.cdf[i + 1] - self.cdf[i]))
            .collect()
    }
}

/// Range of the log grid used for scaling variables.
const LOG_GRID: GridMap = GridMap::Log {
    x_lo: -27.7,
    x_hi: 27.7,
};

const DELTA_POINTS: usize = 8000;

/// Log of `exp(-ψ_n(a)) Π_k c_a(n, n_k)`.
pub fn log_likelihood_a(lv: &LevyDensity, a: f64, obs: &ObservationSummary) -> Result<f64> {
    let mut l = -psi_n(lv, a, obs.n)?;
    for &nk in &obs.counts {
        let c = c_a(lv, a, obs.n, nk)?;
        if !(c > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        l += c.ln();
    }
    Ok(l)
}

/// Posterior of `Δ°` given observed rows: density
/// `p°(a) exp(-ψ_n(a)) Π_k c_a(n, n_k)` on a log grid over `[1e-12, 1e12]`.
pub fn delta_posterior<P: Fn(f64) -> f64>(
    lv: &LevyDensity,
    log_prior: P,
    obs: &ObservationSummary,
) -> Result<GridDistribution> {
    // counts are only needed once per distinct value
    let mut distinct: Vec<(u32, usize)> = Vec::new();
    for &c in &obs.counts {
        match distinct.iter_mut().find(|(v, _)| *v == c) {
            Some(e) => e.1 += 1,
            None => distinct.push((c, 1)),
        }
    }
    let err = Mutex::new(None);
    let log_f = |a: f64| {
        let lp = log_prior(a);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let run = || -> Result<f64> {
            let mut l = -psi_n(lv, a, obs.n)?;
            for &(nk, mult) in &distinct {
                let c = c_a(lv, a, obs.n, nk)?;
                l += mult as f64 * c.ln();
            }
            Ok(l)
        };
        match run() {
            Ok(l) => lp + l,
            Err(e) => {
                *err.lock().expect("poisoned") = Some(e);
                f64::NEG_INFINITY
            }
        }
    };
    let g = GridDistribution::from_log_density(log_f, LOG_GRID, DELTA_POINTS);
    if let Some(e) = err.into_inner().expect("poisoned") {
        return Err(e);
    }
    g
}

/// Conjugate update for the stable density `c s^{-1-alpha}` with a
/// `Gamma(shape, rate)` prior on `ζ = (Δ°)^{-alpha}`: `ψ_n(a) = ζ φ_n` and
/// `c_a(n, n_k) ∝ ζ`, so `ζ | rows ~ Gamma(shape + K_n, rate + φ_n)`.
pub fn stable_zeta_posterior(c: f64, alpha: f64, shape: f64, rate: f64, n: u32, k_n: usize) -> (f64, f64) {
    (shape + k_n as f64, rate + stable_phi(c, alpha, n))
}

/// `φ_n = c Σ_{j<n} B(1-alpha, j+1)`, the coefficient of `ζ` in `ψ_n`.
pub fn stable_phi(c: f64, alpha: f64, n: u32) -> f64 {
    (0..n).map(|j| c * lbeta(1.0 - alpha, j as f64 + 1.0).exp()).sum()
}

/// Grid posterior `∝ y^{K_n} f_ζ(y) e^{-y φ}` for priors on `ζ` without a
/// conjugate update.
pub fn zeta_grid_posterior<P: Fn(f64) -> f64>(log_prior: P, k_n: usize, phi: f64) -> Result<GridDistribution> {
    let k = k_n as f64;
    let log_f = |y: f64| log_prior(y) + k * y.ln() - phi * y;
    GridDistribution::from_log_density(log_f, LOG_GRID, DELTA_POINTS)
}

// ---------------------------------------------------------------------------
// predictive rows

/// Law of `Δ°` used for a predictive draw.
#[derive(Clone, Debug)]
pub enum ScalingPosterior {
    Fixed(f64),
    Grid(Arc<GridDistribution>),
}

impl ScalingPosterior {
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            ScalingPosterior::Fixed(a) => *a,
            ScalingPosterior::Grid(g) => g.sample(rng),
        }
    }
}

/// Observed atoms included in the next row, plus the number of new ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub included: Vec<usize>,
    pub new_count: u64,
}

/// Next row given `obs`: draw `a`, include atom `k` with probability
/// `c_a(n+1, n_k+1) / c_a(n, n_k)`, and append `Poisson(q_n(a))` new atoms.
pub fn predictive_row(
    lv: &LevyDensity,
    a_law: &ScalingPosterior,
    obs: &ObservationSummary,
    rng: &mut RngStream,
) -> Result<PredictiveRow> {
    let a = a_law.sample(rng);
    predictive_row_at(lv, a, obs, rng)
}

pub fn predictive_row_at(lv: &LevyDensity, a: f64, obs: &ObservationSummary, rng: &mut RngStream) -> Result<PredictiveRow> {
    let n = obs.n;
    let mut included = Vec::new();
    let mut cache: Vec<(u32, f64)> = Vec::new();
    for (k, &nk) in obs.counts.iter().enumerate() {
        let p = match cache.iter().find(|(v, _)| *v == nk) {
            Some(&(_, p)) => p,
            None => {
                let p = c_a(lv, a, n + 1, nk + 1)? / c_a(lv, a, n, nk)?;
                cache.push((nk, p));
                p
            }
        };
        if rng.uniform() < p {
            included.push(k);
        }
    }
    let new_count = poisson(q_n(lv, a, n)?, rng)?;
    Ok(PredictiveRow { included, new_count })
}

/// `(n, sorted feature counts)` of the rows seen so far.
type SummaryKey = (u32, Vec<u32>);

/// Sequential predictive sampling of whole matrices with the `Δ°` posterior
/// cached per exchangeable summary of the rows seen so far.
pub struct PredictiveSampler {
    lv: LevyDensity,
    prior: ScalingLaw,
    cache: Mutex<HashMap<SummaryKey, Arc<GridDistribution>>>,
}

impl PredictiveSampler {
    pub fn new(lv: LevyDensity, prior: ScalingLaw) -> Result<Self> {
        prior.validate()?;
        Ok(PredictiveSampler {
            lv,
            prior,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Law of `Δ°` given the observations.
    pub fn scaling_posterior(&self, obs: &ObservationSummary) -> Result<ScalingPosterior> {
        if let ScalingLaw::Fixed { a } = self.prior {
            return Ok(ScalingPosterior::Fixed(a));
        }
        let key = obs.key();
        if let Some(g) = self.cache.lock().expect("poisoned").get(&key) {
            return Ok(ScalingPosterior::Grid(g.clone()));
        }
        let prior = self.prior;
        let lv = self.lv.clone();
        let g = Arc::new(delta_posterior(
            &self.lv,
            move |a| prior.log_density(&lv, a).unwrap_or(f64::NEG_INFINITY),
            obs,
        )?);
        self.cache.lock().expect("poisoned").insert(key, g.clone());
        Ok(ScalingPosterior::Grid(g))
    }

    pub fn sample_matrix(&self, n_rows: usize, rng: &mut RngStream) -> Result<FeatureMatrix> {
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n_rows);
        let mut counts: Vec<u32> = Vec::new();
        for i in 0..n_rows {
            let obs = ObservationSummary {
                n: i as u32,
                counts: counts.clone(),
            };
            let a = if i == 0 {
                self.prior.draw(&self.lv, rng)?
            } else {
                self.scaling_posterior(&obs)?.sample(rng)
            };
            let row = predictive_row_at(&self.lv, a, &obs, rng)?;
            let mut ids: Vec<u64> = row.included.iter().map(|&k| k as u64).collect();
            for &k in &row.included {
                counts[k] += 1;
            }
            for _ in 0..row.new_count {
                ids.push(counts.len() as u64);
                counts.push(1);
            }
            rows.push(ids);
        }
        FeatureMatrix::from_rows(&rows)
    }
}
