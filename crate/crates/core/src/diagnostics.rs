//! Two-sample and goodness-of-fit tests, TV estimators, the Le Cam check,
//! tail-index estimation and the τ_β comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{sample_ranked_jumps, LevyDensity, TruncationRule};
use crate::special::{gamma_p, gamma_q, lgamma, RngStream};

/// Statistic and p-value of a test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom after bin merging (chi-square tests only).
    pub dof: usize,
}

/// Minimum expected count per bin after merging.
pub const MIN_EXPECTED: f64 = 5.0;

fn chi_square_p(stat: f64, dof: usize) -> Result<f64> {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Merges adjacent bins, left to right, until every merged bin has
/// `min(expected)` at least [`MIN_EXPECTED`]; a short remainder joins the last
/// merged bin.
fn merge_bins(cols: &[Vec<f64>], expected_min: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut acc: Option<Vec<f64>> = None;
    for c in cols {
        let cur = match acc.take() {
            Some(mut a) => {
                for (x, y) in a.iter_mut().zip(c) {
                    *x += y;
                }
                a
            }
            None => c.clone(),
        };
        if expected_min(&cur) >= MIN_EXPECTED {
            out.push(cur);
        } else {
            acc = Some(cur);
        }
    }
    if let Some(rest) = acc {
        match out.last_mut() {
            Some(last) => {
                for (x, y) in last.iter_mut().zip(&rest) {
                    *x += y;
                }
            }
            None => out.push(rest),
        }
    }
    out
}

/// Two-sample chi-square test on a shared ordered binning.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<TestOutcome> {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    if na == 0.0 || nb == 0.0 {
        return Err(Error::param("chi-square needs two nonempty histograms"));
    }
    let n = na + nb;
    let cols: Vec<Vec<f64>> = (0..len).map(|i| vec![get(a, i), get(b, i)]).collect();
    let merged = merge_bins(&cols, |c| (c[0] + c[1]) * na.min(nb) / n);
    if merged.len() < 2 {
        return Err(Error::param("fewer than 2 usable bins after merging"));
    }
    let mut stat = 0.0;
    for c in &merged {
        let pooled = c[0] + c[1];
        let (ea, eb) = (pooled * na / n, pooled * nb / n);
        stat += (c[0] - ea).powi(2) / ea + (c[1] - eb).powi(2) / eb;
    }
    let dof = merged.len() - 1;
    Ok(TestOutcome {
        statistic: stat,
        p_value: chi_square_p(stat, dof)?,
        dof,
    })
}

/// Two-sample chi-square on categorical keys: categories are ordered by pooled
/// count (ties by key) so that rare categories are merged together.
pub fn chi_square_keyed<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> Result<TestOutcome> {
    let mut keys: Vec<(u64, K)> = Vec::new();
    for k in a.keys().chain(b.keys()) {
        if !keys.iter().any(|(_, x)| x == k) {
            let pooled = a.get(k).copied().unwrap_or(0) + b.get(k).copied().unwrap_or(0);
            keys.push((pooled, k.clone()));
        }
    }
    keys.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
    let ha: Vec<u64> = keys.iter().map(|(_, k)| a.get(k).copied().unwrap_or(0)).collect();
    let hb: Vec<u64> = keys.iter().map(|(_, k)| b.get(k).copied().unwrap_or(0)).collect();
    chi_square_two_sample(&ha, &hb)
}

/// Chi-square goodness of fit of counts against probabilities; `probs` must
/// cover the whole support (put any tail mass in the last entry).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<TestOutcome> {
    let n: f64 = observed.iter().sum::<u64>() as f64;
    let freqs: Vec<f64> = observed.iter().map(|&o| o as f64 / n.max(1.0)).collect();
    chi_square_gof_weighted(&freqs, probs, n)
}

/// Goodness of fit for weighted frequencies with effective sample size
/// `n_eff` (Kish), `X^2 = n_eff Σ (f - p)^2 / p`.
pub fn chi_square_gof_weighted(freqs: &[f64], probs: &[f64], n_eff: f64) -> Result<TestOutcome> {
    if freqs.len() != probs.len() {
        return Err(Error::param(format!(
            "{} frequencies against {} probabilities",
            freqs.len(),
            probs.len()
        )));
    }
    if !(n_eff > 0.0) {
        return Err(Error::param("goodness of fit needs a positive sample size"));
    }
    if probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::param("probabilities must be non-negative"));
    }
    let cols: Vec<Vec<f64>> = freqs.iter().zip(probs).map(|(&f, &p)| vec![f, p]).collect();
    let merged = merge_bins(&cols, |c| c[1] * n_eff);
    if merged.len() < 2 {
        return Err(Error::param("fewer than 2 usable bins after merging"));
    }
    let stat: f64 = merged.iter().map(|c| n_eff * (c[0] - c[1]).powi(2) / c[1]).sum();
    let dof = merged.len() - 1;
    Ok(TestOutcome {
        statistic: stat,
        p_value: chi_square_p(stat, dof)?,
        dof,
    })
}

/// Asymptotic Kolmogorov distribution tail `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { t } else { -t };
        if t < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::param("empty sample"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::param("sample contains NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p(d, na * nb / (na + nb)),
        dof: 0,
    })
}

/// One-sample Kolmogorov-Smirnov test against a continuous cdf.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<TestOutcome> {
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p(d, n),
        dof: 0,
    })
}

/// Histogram TV estimate with its expected value under equal laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// Expected TV estimate when both samples share one law (upward bias of
    /// the estimator at these sample sizes and bins).
    pub null_level: f64,
    pub bins: usize,
}

fn histogram(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let w = (hi - lo) / bins as f64;
    for &x in xs {
        let i = if w > 0.0 { ((x - lo) / w).floor() } else { 0.0 };
        let i = (i.max(0.0) as usize).min(bins - 1);
        h[i] += 1.0;
    }
    h
}

fn null_tv(p: &[f64], na: f64, nb: f64) -> f64 {
    // E|N(0, v)| = sqrt(2 v / π)
    0.5 * p
        .iter()
        .map(|&q| (2.0 * q * (1.0 - q) * (1.0 / na + 1.0 / nb) / std::f64::consts::PI).sqrt())
        .sum::<f64>()
}

/// `½ Σ |p̂_A - p̂_B|` over `bins` equal-width bins spanning both samples.
pub fn tv_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<TvEstimate> {
    if a.is_empty() || b.is_empty() || bins == 0 {
        return Err(Error::param("tv needs two nonempty samples and at least one bin"));
    }
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("tv samples must be finite"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ha = histogram(a, lo, hi, bins);
    let hb = histogram(b, lo, hi, bins);
    let tv = 0.5 * ha.iter().zip(&hb).map(|(x, y)| (x / na - y / nb).abs()).sum::<f64>();
    let pooled: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| (x + y) / (na + nb)).collect();
    Ok(TvEstimate {
        tv,
        null_level: null_tv(&pooled, na, nb),
        bins,
    })
}

/// Histogram TV of a sample against a reference cdf on `bins` equal-width
/// bins over `[lo, hi]`; mass outside the range counts fully.
pub fn tv_histogram_cdf<F: Fn(f64) -> f64>(xs: &[f64], cdf: F, lo: f64, hi: f64, bins: usize) -> Result<TvEstimate> {
    if xs.is_empty() || bins == 0 || !(hi > lo) {
        return Err(Error::param("tv needs a nonempty sample, bins and a range"));
    }
    let n = xs.len() as f64;
    let inside: Vec<f64> = xs.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
    let h = histogram(&inside, lo, hi, bins);
    let w = (hi - lo) / bins as f64;
    let mut tv = 0.0;
    let mut probs = Vec::with_capacity(bins);
    for (i, &c) in h.iter().enumerate() {
        let p = cdf(lo + (i + 1) as f64 * w) - cdf(lo + i as f64 * w);
        probs.push(p);
        tv += (c / n - p).abs();
    }
    let out_ref = 1.0 - (cdf(hi) - cdf(lo));
    let out_obs = (xs.len() - inside.len()) as f64 / n;
    tv += (out_obs - out_ref).abs();
    let null = 0.5 * probs.iter().map(|&q| (2.0 * q * (1.0 - q) / (n * std::f64::consts::PI)).sqrt()).sum::<f64>();
    Ok(TvEstimate {
        tv: 0.5 * tv,
        null_level: null,
        bins,
    })
}

// ---------------------------------------------------------------------------
// Le Cam

/// Exact TV between the Poisson-binomial law of independent Bernoulli(w_k)
/// and Poisson(Σ w_k), with the bound `Σ w_k²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeCam {
    pub tv_exact: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Exact convolution over `0..=min(len, μ + 20σ + 30)`; the Poisson mass
/// beyond the cut enters the TV as a tail term.
pub fn lecam_check(weights: &[f64]) -> Result<LeCam> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
        return Err(Error::param(format!("le cam weights must lie in (0, 1], got {w}")));
    }
    let mu: f64 = weights.iter().sum();
    let var: f64 = weights.iter().map(|w| w * (1.0 - w)).sum();
    let bound: f64 = weights.iter().map(|w| w * w).sum();
    let cap = ((mu + 20.0 * mu.max(var).sqrt() + 30.0).ceil() as usize).min(weights.len());
    let mut pb = vec![0.0; cap + 1];
    pb[0] = 1.0;
    let mut top = 0usize;
    for &w in weights {
        top = (top + 1).min(cap);
        for k in (1..=top).rev() {
            pb[k] = pb[k] * (1.0 - w) + pb[k - 1] * w;
        }
        pb[0] *= 1.0 - w;
    }
    let head = small_count_diffs(weights, mu);
    let mut diff = 0.0;
    for (k, &p) in pb.iter().enumerate() {
        let q = if mu > 0.0 {
            (k as f64 * mu.ln() - mu - lgamma(k as f64 + 1.0)).exp()
        } else if k == 0 {
            1.0
        } else {
            0.0
        };
        diff += match head {
            Some(d) if k < 2 => d[k].abs(),
            _ => (p - q).abs(),
        };
    }
    // Beyond the cap the Poisson-binomial mass is zero (cap = len) or more
    // than 20 sd out; 1 - Σp would only add rounding noise.
    let po_tail = if mu > 0.0 { gamma_p(cap as f64 + 1.0, mu)? } else { 0.0 };
    let tv = 0.5 * (diff + po_tail);
    Ok(LeCam {
        tv_exact: tv,
        bound,
        pass: tv <= bound,
    })
}

/// `P(S = k) - P(N = k)` for k = 0, 1 without cancellation. Both
/// probabilities are near 1 and μ when the weights are small, while the TV is
/// of order Σw²; returns None when some weight equals 1.
fn small_count_diffs(weights: &[f64], mu: f64) -> Option<[f64; 2]> {
    if weights.iter().any(|&w| w >= 1.0) {
        return None;
    }
    // L = ln P(S = 0) + μ = Σ ln(1 - w) + w
    let l: f64 = weights
        .iter()
        .map(|&w| {
            if w < 0.25 {
                let mut term = w * w;
                let mut acc = 0.0;
                let mut j = 2.0;
                while term > 1e-18 * w * w {
                    acc -= term / j;
                    term *= w;
                    j += 1.0;
                }
                acc
            } else {
                (-w).ln_1p() + w
            }
        })
        .sum();
    let em = (-mu).exp();
    let el = l.exp_m1();
    // P(S = 1) = P(S = 0) Σ w/(1-w), and Σ w/(1-w) - μ = Σ w²/(1-w)
    let excess: f64 = weights.iter().map(|&w| w * w / (1.0 - w)).sum();
    Some([em * el, em * (el * (mu + excess) + excess)])
}

/// Monte Carlo TV between the Poisson-binomial and Poisson laws, with a
/// standard error from the per-point binomial noise.
pub fn lecam_monte_carlo(weights: &[f64], draws: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    let mu: f64 = weights.iter().sum();
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for _ in 0..draws {
        let k = weights.iter().filter(|&&w| rng.uniform() < w).count() as u64;
        *counts.entry(k).or_default() += 1.0;
    }
    let n = draws as f64;
    let max_k = counts.keys().last().copied().unwrap_or(0) + 20;
    let mut tv = 0.0;
    let mut var = 0.0;
    let mut seen = 0.0;
    for k in 0..=max_k {
        let q = (k as f64 * mu.ln() - mu - lgamma(k as f64 + 1.0)).exp();
        let p = counts.get(&k).copied().unwrap_or(0.0) / n;
        tv += (p - q).abs();
        var += p * (1.0 - p) / n;
        seen += q;
    }
    tv += (1.0 - seen).max(0.0);
    Ok((0.5 * tv, 0.5 * var.sqrt()))
}

// ---------------------------------------------------------------------------
// tail index

/// Hill estimate of the tail index (`P(X > x) ~ x^{-index}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailIndex {
    pub index: f64,
    pub stderr: f64,
    /// Estimates at `k_frac`, `k_frac/2`, `k_frac/4`, `k_frac/8`.
    pub path: Vec<f64>,
    /// False when the estimates drift instead of settling (light tails).
    pub power_law: bool,
}

fn hill(desc: &[f64], k: usize) -> f64 {
    let base = desc[k].ln();
    let h: f64 = desc[..k].iter().map(|x| x.ln() - base).sum::<f64>() / k as f64;
    1.0 / h
}

/// Hill estimator over the top `k_frac` fraction with a bootstrap standard
/// error (200 resamples) and a plateau check along `k_frac / 2^j`. Zeros
/// are allowed below the threshold.
pub fn tail_index(samples: &[f64], k_frac: f64, rng: &mut RngStream) -> Result<TailIndex> {
    if samples.len() < 1000 {
        return Err(Error::param(format!("tail index needs at least 1000 samples, got {}", samples.len())));
    }
    if !(k_frac > 0.0 && k_frac <= 0.5) {
        return Err(Error::param(format!("k_frac must lie in (0, 0.5], got {k_frac}")));
    }
    if samples.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::param("tail index needs non-negative finite samples"));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let k = (k_frac * desc.len() as f64) as usize;
    if k < 20 || !(desc[k] > 0.0) || desc[k] >= desc[0] {
        return Err(Error::param("too few distinct exceedances for the Hill estimator"));
    }
    let index = hill(&desc, k);
    let n = desc.len();
    let mut boots = Vec::with_capacity(200);
    let mut buf = vec![0.0; n];
    for _ in 0..200 {
        for b in buf.iter_mut() {
            *b = desc[(rng.uniform() * n as f64) as usize % n];
        }
        buf.sort_by(|a, b| b.total_cmp(a));
        if buf[k] > 0.0 && buf[k] < buf[0] {
            boots.push(hill(&buf, k));
        }
    }
    let m = boots.iter().sum::<f64>() / boots.len() as f64;
    let stderr = (boots.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (boots.len() as f64 - 1.0)).sqrt();
    let mut path = vec![index];
    let mut kk = k;
    for _ in 0..3 {
        kk /= 2;
        if kk < 10 || desc[kk] >= desc[0] {
            break;
        }
        path.push(hill(&desc, kk));
    }
    // every estimate along the path must stay within its own noise (the
    // Hill estimate's relative error is about 1/sqrt(k)) or 25% of the base
    let power_law = path
        .iter()
        .enumerate()
        .all(|(j, &h)| (h - index).abs() <= index * (3.0 / ((k >> j) as f64).sqrt()).max(0.25));
    Ok(TailIndex {
        index,
        stderr,
        path,
        power_law,
    })
}

// ---------------------------------------------------------------------------
// tau_beta

/// TV between the law of `τ_β = Σ x 1{x ≤ β}` given `T ∈ window` and its
/// unconditional law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBeta {
    pub beta: f64,
    pub tv: f64,
    pub stderr: f64,
    pub null_level: f64,
    pub conditioned: usize,
    pub replicates: usize,
}

/// Bins used by [`tau_beta_compare`].
pub const TAU_BETA_BINS: usize = 30;

/// Draws `(T, τ_β)` pairs for each `beta` from one set of jump sequences.
pub fn tau_beta_draws(
    lv: &LevyDensity,
    betas: &[f64],
    replicates: usize,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<Vec<(f64, Vec<f64>)>> {
    (0..replicates)
        .map(|_| {
            let rj = sample_ranked_jumps(lv, 0.0, trunc, rng)?;
            // dust below the floor belongs to every τ_β with β above the floor
            let dust = rj.tail_mass_bound;
            let total = rj.jumps.iter().sum::<f64>() + dust;
            let taus = betas
                .iter()
                .map(|&b| rj.jumps.iter().filter(|&&x| x <= b).sum::<f64>() + if b >= rj.floor { dust } else { 0.0 })
                .collect();
            Ok((total, taus))
        })
        .collect()
}

/// TV estimate for one `beta` from draws made by [`tau_beta_draws`] (`j` is
/// the position of `beta` in the list used there).
pub fn tau_beta_from_draws(
    draws: &[(f64, Vec<f64>)],
    j: usize,
    beta: f64,
    window: (f64, f64),
    rng: &mut RngStream,
) -> Result<TauBeta> {
    let all: Vec<f64> = draws.iter().map(|d| d.1[j]).collect();
    let cond: Vec<f64> = draws
        .iter()
        .filter(|d| d.0 >= window.0 && d.0 <= window.1)
        .map(|d| d.1[j])
        .collect();
    if cond.is_empty() {
        return Err(Error::param(format!(
            "no replicate has total mass in [{}, {}]",
            window.0, window.1
        )));
    }
    let est = tv_histogram(&cond, &all, TAU_BETA_BINS)?;
    // bootstrap over the conditioned sample
    let mut boots = Vec::with_capacity(50);
    let mut buf = vec![0.0; cond.len()];
    for _ in 0..50 {
        for b in buf.iter_mut() {
            *b = cond[(rng.uniform() * cond.len() as f64) as usize % cond.len()];
        }
        boots.push(tv_histogram(&buf, &all, TAU_BETA_BINS)?.tv);
    }
    let m = boots.iter().sum::<f64>() / boots.len() as f64;
    let stderr = (boots.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (boots.len() as f64 - 1.0)).sqrt();
    Ok(TauBeta {
        beta,
        tv: est.tv,
        stderr,
        null_level: est.null_level,
        conditioned: cond.len(),
        replicates: draws.len(),
    })
}

pub fn tau_beta_compare(
    lv: &LevyDensity,
    beta: f64,
    window: (f64, f64),
    replicates: usize,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<TauBeta> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(format!("beta must lie in (0, 1], got {beta}")));
    }
    let draws = tau_beta_draws(lv, &[beta], replicates, trunc, rng)?;
    tau_beta_from_draws(&draws, 0, beta, window, rng)
}

// ---------------------------------------------------------------------------
// reports

/// One line of a test report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv: Option<f64>,
    /// Reference value for tolerance checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub pass: bool,
    pub seeds: Vec<u64>,
}

impl TestReport {
    /// Passes when `p_value > threshold`.
    pub fn from_p(name: &str, t: &TestOutcome, threshold: f64, seeds: Vec<u64>) -> Self {
        TestReport {
            name: name.to_string(),
            statistic: t.statistic,
            p_value: Some(t.p_value),
            tv: None,
            target: None,
            threshold: Some(threshold),
            pass: t.p_value > threshold,
            seeds,
        }
    }

    /// Passes when `tv < threshold`.
    pub fn from_tv(name: &str, tv: f64, threshold: f64, seeds: Vec<u64>) -> Self {
        TestReport {
            name: name.to_string(),
            statistic: tv,
            p_value: None,
            tv: Some(tv),
            target: None,
            threshold: Some(threshold),
            pass: tv < threshold,
            seeds,
        }
    }

    /// Passes when `|value - target| <= tol`.
    pub fn within(name: &str, value: f64, target: f64, tol: f64, seeds: Vec<u64>) -> Self {
        TestReport {
            name: name.to_string(),
            statistic: value,
            p_value: None,
            tv: None,
            target: Some(target),
            threshold: Some(tol),
            pass: (value - target).abs() <= tol,
            seeds,
        }
    }

    /// A yes/no check carrying a descriptive statistic.
    pub fn flag(name: &str, statistic: f64, pass: bool, seeds: Vec<u64>) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            p_value: None,
            tv: None,
            target: None,
            threshold: None,
            pass,
            seeds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{poisson, quad};
    use proptest::prelude::*;

    fn poisson_hist(rate: f64, n: usize, rng: &mut RngStream) -> Vec<u64> {
        let mut h = vec![0u64; 40];
        for _ in 0..n {
            let k = poisson(rate, rng).unwrap() as usize;
            h[k.min(39)] += 1;
        }
        h
    }

    #[test]
    fn chi_square_identical_and_power() {
        let h = vec![50, 80, 120, 30, 4, 1];
        let t = chi_square_two_sample(&h, &h).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let mut rng = RngStream::new(20, 0);
        let a = poisson_hist(3.0, 10_000, &mut rng);
        let b = poisson_hist(4.0, 10_000, &mut rng);
        assert!(chi_square_two_sample(&a, &b).unwrap().p_value < 1e-6);
        assert!(chi_square_two_sample(&[3, 0], &[2, 1]).is_err());
    }

    #[test]
    fn chi_square_null_p_values_are_uniform() {
        let ps: Vec<f64> = (0..200)
            .map(|r| {
                let a = poisson_hist(3.0, 10_000, &mut RngStream::new(21, 2 * r));
                let b = poisson_hist(3.0, 10_000, &mut RngStream::new(21, 2 * r + 1));
                chi_square_two_sample(&a, &b).unwrap().p_value
            })
            .collect();
        let t = ks_one_sample(&ps, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(t.p_value > 0.01, "p={}", t.p_value);
    }

    #[test]
    fn gof_and_keyed() {
        let p = [0.25, 0.5, 0.25];
        let t = chi_square_gof(&[250, 500, 250], &p).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        a.insert("x", 100u64);
        a.insert("y", 50);
        b.insert("x", 98);
        b.insert("y", 52);
        b.insert("z", 1);
        let k = chi_square_keyed(&a, &b).unwrap();
        assert!(k.p_value > 0.5);
    }

    #[test]
    fn ks_basics() {
        let mut rng = RngStream::new(22, 0);
        let x: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
        let t = ks_two_sample(&x, &x).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(ks_two_sample(&[], &x).is_err());
        let y: Vec<f64> = (0..1000).map(|_| rng.uniform() + 0.2).collect();
        assert!(ks_two_sample(&x, &y).unwrap().p_value < 1e-6);
        // calibration of the one-sample p-value
        let ps: Vec<f64> = (0..300)
            .map(|_| {
                let s: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
                ks_one_sample(&s, |v| v).unwrap().p_value
            })
            .collect();
        assert!(ks_one_sample(&ps, |v| v).unwrap().p_value > 0.01);
    }

    #[test]
    fn tv_null_and_beta() {
        let mut r1 = RngStream::new(23, 0);
        let mut r2 = RngStream::new(23, 1);
        let a: Vec<f64> = (0..100_000).map(|_| r1.normal()).collect();
        let b: Vec<f64> = (0..100_000).map(|_| r2.normal()).collect();
        assert!(tv_histogram(&a, &b, 50).unwrap().tv < 0.02);
        let u: Vec<f64> = (0..100_000).map(|_| r1.uniform()).collect();
        let beta = crate::special::Variate::Beta { a: 2.0, b: 2.0 };
        let v: Vec<f64> = (0..100_000)
            .map(|_| crate::special::sample_variate(&beta, &mut r2).unwrap())
            .collect();
        let want = 0.5 * quad(|x: f64| (1.0 - 6.0 * x * (1.0 - x)).abs(), 0.0, 1.0, 1e-12).unwrap().value;
        let est = tv_histogram(&u, &v, 50).unwrap();
        assert!((est.tv - want).abs() < 0.02, "{} vs {want}", est.tv);
        let cdf = tv_histogram_cdf(&u, |x| x.clamp(0.0, 1.0), 0.0, 1.0, 50).unwrap();
        assert!(cdf.tv < 0.02);
    }

    #[test]
    fn lecam_examples() {
        let r = lecam_check(&[0.5, 0.5]).unwrap();
        // PB (1/4, 1/2, 1/4) against Poisson(1), enumerated by hand
        let e = (-1.0f64).exp();
        let want = 0.5 * ((0.25 - e).abs() + (0.5 - e).abs() + (0.25 - e / 2.0).abs() + (1.0 - 2.5 * e));
        assert!((r.tv_exact - want).abs() < 1e-14);
        assert!((r.tv_exact - 0.198).abs() < 1e-3);
        assert_eq!(r.bound, 0.5);
        assert!(r.pass);
        for i in 1..=50 {
            let w = i as f64 / 50.0;
            let s = lecam_check(&[w]).unwrap();
            // single summand: TV = w (1 - e^{-w})
            assert!((s.tv_exact - w * (1.0 - (-w).exp())).abs() < 1e-14);
            assert!(s.pass);
        }
        for w in [1e-9, 1e-6, 1e-3, 0.2] {
            let s = lecam_check(&[w]).unwrap();
            let want = -w * (-w).exp_m1();
            assert!((s.tv_exact / want - 1.0).abs() < 1e-9, "{w}: {} vs {want}", s.tv_exact);
        }
        let tiny = lecam_check(&[1e-4; 20]).unwrap();
        assert!(tiny.tv_exact < 1e-6 && tiny.pass);
        assert!(lecam_check(&[0.0, 0.5]).is_err());
        let w: Vec<f64> = (0..60).map(|i| 0.01 + i as f64 / 100.0).collect();
        let ex = lecam_check(&w).unwrap();
        let (mc, se) = lecam_monte_carlo(&w, 200_000, &mut RngStream::new(24, 0)).unwrap();
        // the MC estimate is biased upward by its own noise
        assert!(mc > ex.tv_exact - 4.0 * se && mc < ex.tv_exact + 0.02, "{mc} vs {}", ex.tv_exact);
    }

    #[test]
    fn hill_on_pareto_and_exponential() {
        let mut rng = RngStream::new(25, 0);
        let pareto: Vec<f64> = (0..100_000).map(|_| rng.uniform().powf(-1.0 / 0.5)).collect();
        let t = tail_index(&pareto, 0.1, &mut rng).unwrap();
        assert!((t.index - 0.5).abs() < 0.05, "{t:?}");
        assert!(t.power_law);
        let expo: Vec<f64> = (0..100_000).map(|_| rng.exp1()).collect();
        let e = tail_index(&expo, 0.1, &mut rng).unwrap();
        assert!(!e.power_law, "{e:?}");
        assert!(e.path.windows(2).all(|w| w[1] > w[0]));
        assert!(tail_index(&expo[..10], 0.1, &mut rng).is_err());
    }

    #[test]
    fn hill_on_bfry() {
        let mut rng = RngStream::new(26, 0);
        let v = crate::special::Variate::Bfry { sigma: 0.5 };
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| crate::special::sample_variate(&v, &mut rng).unwrap())
            .collect();
        let t = tail_index(&xs, 0.05, &mut rng).unwrap();
        assert!((t.index - 0.5).abs() < 0.05, "{t:?}");
    }

    #[test]
    fn tau_beta_trend() {
        let lv = LevyDensity::scale_invariant(1.0).unwrap();
        let mut rng = RngStream::new(27, 0);
        let tr = TruncationRule::default();
        let betas = [1.0, 0.5, 0.1];
        let draws = tau_beta_draws(&lv, &betas, 100_000, &tr, &mut rng).unwrap();
        let tvs: Vec<f64> = (0..3)
            .map(|j| tau_beta_from_draws(&draws, j, betas[j], (0.95, 1.05), &mut rng).unwrap().tv)
            .collect();
        assert!(tvs[0] > tvs[1] && tvs[1] > tvs[2], "{tvs:?}");
        let full = tau_beta_from_draws(&draws, 0, 1.0, (0.0, f64::INFINITY), &mut rng).unwrap();
        assert!(full.tv < 0.02);
        assert!(tau_beta_from_draws(&draws, 0, 1.0, (50.0, 60.0), &mut rng).is_err());
    }

    #[test]
    fn report_json() {
        let r = TestReport::from_tv("dickman", 0.01, 0.02, vec![7]);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"name":"dickman","statistic":0.01,"tv":0.01,"threshold":0.02,"pass":true,"seeds":[7]}"#);
    }

    proptest! {
        #[test]
        fn lecam_bound_holds(seed in 0u64..10_000, len in 1usize..=30) {
            let mut rng = RngStream::new(seed, 3);
            let w: Vec<f64> = (0..len).map(|_| rng.uniform().max(1e-12)).collect();
            let r = lecam_check(&w).unwrap();
            prop_assert!(r.pass, "tv {} bound {}", r.tv_exact, r.bound);
        }

        #[test]
        fn lecam_bound_holds_for_tiny_weights(seed in 0u64..10_000, len in 1usize..=8, scale in 3i32..10) {
            let mut rng = RngStream::new(seed, 4);
            let w: Vec<f64> = (0..len).map(|_| (1.0 - rng.uniform()) * 10f64.powi(-scale)).collect();
            let r = lecam_check(&w).unwrap();
            prop_assert!(r.pass, "tv {} bound {}", r.tv_exact, r.bound);
        }
    }
}
