//! Acceptance battery: criteria 1-11 as seeded Monte Carlo experiments.
//!
//! Every check draws its replicates from `RngStream::new(check_seed, i)`, so
//! reports are identical regardless of thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    chi_square_gof, chi_square_gof_weighted, chi_square_keyed, chi_square_two_sample, ks_one_sample, ks_two_sample,
    lecam_check, tail_index, tau_beta_draws, tau_beta_from_draws, tv_histogram_cdf, TestReport,
};
use crate::error::{Error, Result};
use crate::featmat::sample_jot_matrix;
use crate::levy::{sample_ranked_jumps, Dickman, LevyDensity, TruncationRule};
use crate::measures::{sample_jot, sample_jot_at, thin, total_mass, ScalingLaw};
use crate::pkbridge::{
    bridge_partition, crp_sample, py_block_count_pmf, py_sample, surrogate_samples, surrogate_weights, WeightForm,
};
use crate::posterior::{sample_posterior_direct, sample_posterior_thinned, PredictiveSampler};
use crate::special::{lgamma, mix64, quad, RngStream, EULER_GAMMA};
use crate::urns::{
    poisson_bfry_pmf, poisson_bfry_tail, psi_cumulative, sample_hierarchical, CountUrn, HierarchicalDraw, UrnModel,
    UrnState,
};

/// Chi-square equivalence threshold (criteria 1, 4, 6, 7).
pub const P_CHI: f64 = 1e-3;
/// Kolmogorov-Smirnov threshold (criteria 2, 7, 9).
pub const P_KS: f64 = 0.01;
pub const DICKMAN_PDF_TOL: f64 = 1e-4;
pub const DICKMAN_TV_MAX: f64 = 0.02;
pub const DICKMAN_MASS_TOL: f64 = 0.005;
pub const BFRY_SUM_TOL: f64 = 1e-8;
pub const BFRY_POINT_TOL: f64 = 1e-6;
pub const HILL_TOL: f64 = 0.1;
pub const PY_ONE_BLOCK_TOL: f64 = 0.01;
pub const LECAM_HALF_TOL: f64 = 1e-3;
pub const TAU_BETA_MAX: f64 = 0.05;
pub const RUNTIME_LIMIT_SECS: f64 = 1800.0;

/// Feature cap shared by the urn and hierarchical sides of criterion 1;
/// larger draws fall into one overflow category.
pub const EQUIV_MAX_FEATURES: usize = 1_000_000;
const OVERFLOW: u64 = u64::MAX;

pub const TITLES: [&str; 11] = [
    "urn/hierarchical equivalence",
    "stick-breaking laws",
    "dickman",
    "poisson-bfry calculus",
    "power law",
    "pk bridge",
    "posterior consistency",
    "le cam",
    "thinning equivalence",
    "tau_beta trend",
    "determinism",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptOptions {
    pub seed: u64,
    /// Multiplies every replicate count (1 is the full suite).
    pub scale: f64,
    /// Criteria to run; empty means all.
    pub criteria: Vec<u8>,
}

impl Default for AcceptOptions {
    fn default() -> Self {
        AcceptOptions {
            seed: 1,
            scale: 1.0,
            criteria: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<TestReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptReport {
    pub seed: u64,
    pub scale: f64,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

impl AcceptReport {
    /// One `criterion N <title>: PASS|FAIL` line per criterion.
    pub fn lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| format!("criterion {} {}: {}", c.id, c.title, if c.pass { "PASS" } else { "FAIL" }))
            .collect()
    }
}

struct Ctx {
    seed: u64,
    scale: f64,
    id: u8,
    next: u64,
}

impl Ctx {
    fn new(opts: &AcceptOptions, id: u8) -> Self {
        Ctx {
            seed: opts.seed,
            scale: opts.scale,
            id,
            next: 0,
        }
    }

    fn seed(&mut self) -> u64 {
        self.next += 1;
        mix64(self.seed ^ mix64(((self.id as u64) << 32) | self.next))
    }

    fn reps(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(base.min(200))
    }
}

fn replicate<T, F>(seed: u64, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, i as u64)))
        .collect()
}

fn counts<K: Ord>(xs: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

/// Histograms over the union of observed values, in value order.
fn aligned(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> (Vec<u64>, Vec<u64>) {
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let get = |m: &BTreeMap<u64, u64>, k: &u64| m.get(k).copied().unwrap_or(0);
    (keys.iter().map(|k| get(a, k)).collect(), keys.iter().map(|k| get(b, k)).collect())
}

fn ordered_chi(name: &str, a: &[u64], b: &[u64], seeds: Vec<u64>) -> Result<TestReport> {
    let (ha, hb) = aligned(&counts(a.iter().copied()), &counts(b.iter().copied()));
    Ok(TestReport::from_p(name, &chi_square_two_sample(&ha, &hb)?, P_CHI, seeds))
}

fn c1(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let trunc = TruncationRule::default();
    let models = [
        ("ibp(c=1,theta=1)", UrnModel::Ibp { c: 1.0, theta: 1.0 }),
        (
            "stable_jot(alpha=0.5,gamma pstar)",
            UrnModel::StableJot {
                alpha: 0.5,
                pstar: ScalingLaw::ZetaGamma {
                    alpha: 0.5,
                    shape: 3.0,
                    rate: 1.0,
                },
            },
        ),
        (
            "bfry(sigma=0.5,stable_beta alpha=0.3 theta=1)",
            UrnModel::Bfry {
                sigma: 0.5,
                lv: LevyDensity::stable_beta(0.3, 1.0, 0.3)?,
            },
        ),
    ];
    let n = 4;
    let reps = cx.reps(20_000);
    let mut out = Vec::new();
    for (name, model) in models {
        let (s_urn, s_hier) = (cx.seed(), cx.seed());
        let urn = replicate(s_urn, reps, |rng| {
            let mut st = UrnState::new(model.clone())?.with_max_features(EQUIV_MAX_FEATURES);
            match st.run(n, rng) {
                Ok(z) => Ok(z.columns().len() as u64),
                Err(Error::Capacity(_)) => Ok(OVERFLOW),
                Err(e) => Err(e),
            }
        })?;
        let hier = replicate(s_hier, reps, |rng| {
            Ok(match sample_hierarchical(&model, n, &trunc, EQUIV_MAX_FEATURES, rng)? {
                HierarchicalDraw::Matrix(z) => z.columns().len() as u64,
                HierarchicalDraw::Overflow { .. } => OVERFLOW,
            })
        })?;
        out.push(ordered_chi(&format!("K_4 urn vs hierarchical, {name}"), &urn, &hier, vec![s_urn, s_hier])?);
    }
    Ok(out)
}

fn stick_ratios(m: &[f64], k: usize) -> Option<Vec<f64>> {
    if m.len() < k {
        return None;
    }
    let mut r = vec![m[0]];
    r.extend(m.windows(2).take(k - 1).map(|w| w[1] / w[0]));
    Some(r)
}

fn c2(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let k_max = 5;
    let trunc = TruncationRule::FixedCount { count: k_max };
    let reps = cx.reps(100_000);
    let mut out = Vec::new();
    let cases = [
        ("ibp", LevyDensity::scale_invariant(1.0)?, ScalingLaw::LargestJump, 1.0, 0.0),
        (
            "stable(alpha=0.5)+gamma pstar",
            LevyDensity::stable(0.5, 0.5)?,
            ScalingLaw::ZetaGamma {
                alpha: 0.5,
                shape: 3.0,
                rate: 1.0,
            },
            1.0,
            0.5,
        ),
    ];
    for (name, lv, pstar, theta, alpha) in cases {
        let seed = cx.seed();
        let ratios = replicate(seed, reps, |rng| {
            let m = sample_jot(&lv, &pstar, &trunc, rng)?;
            stick_ratios(&m.weights, k_max).ok_or_else(|| Error::Numerical("jot draw with fewer than 5 weights".into()))
        })?;
        for k in 1..=k_max {
            let xs: Vec<f64> = ratios.iter().map(|r| r[k - 1]).collect();
            let shape = theta + alpha * k as f64;
            let t = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0).powf(shape))?;
            out.push(TestReport::from_p(
                &format!("{name}: R_{k} ~ Beta({shape}, 1)"),
                &t,
                P_KS,
                vec![seed],
            ));
        }
    }
    Ok(out)
}

fn c3(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let d = Dickman::new(1.0)?;
    let want = (-EULER_GAMMA).exp();
    let mut dev: f64 = 0.0;
    for i in 1..=1000 {
        dev = dev.max((d.pdf(i as f64 / 1000.0)? - want).abs());
    }
    let mut out = vec![TestReport::within("solver pdf on (0,1] vs e^-gamma", want + dev, want, DICKMAN_PDF_TOL, vec![])];
    let lv = LevyDensity::scale_invariant(1.0)?;
    let trunc = TruncationRule::default();
    let seed = cx.seed();
    let masses = replicate(seed, cx.reps(1_000_000), |rng| {
        let s = total_mass(&sample_jot(&lv, &ScalingLaw::LargestJump, &trunc, rng)?);
        Ok(s.sum + s.tail_mass_bound)
    })?;
    let hi = d.horizon().min(5.0);
    let tv = tv_histogram_cdf(&masses, |t| d.cdf(t), 0.0, hi, 50)?;
    out.push(TestReport::from_tv("mass histogram vs solver (50 bins)", tv.tv, DICKMAN_TV_MAX, vec![seed]));
    let below = masses.iter().filter(|&&m| m <= 1.0).count() as f64 / masses.len() as f64;
    out.push(TestReport::within("P(mass <= 1)", below, want, DICKMAN_MASS_TOL, vec![seed]));
    Ok(out)
}

/// `P(Poisson(τ ζ) = j)` for `ζ ~ BFRY(σ)` by quadrature over the BFRY density.
fn poisson_bfry_oracle(sigma: f64, tau: f64, j: u64) -> Result<f64> {
    let lc = sigma.ln() - lgamma(1.0 - sigma) - lgamma(j as f64 + 1.0) + j as f64 * tau.ln();
    let f = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        (lc - tau * z + (j as f64 - sigma - 1.0) * z.ln()).exp() * -(-z).exp_m1()
    };
    Ok(quad(f, 0.0, 1.0, 1e-14)?.value + quad(f, 1.0, f64::INFINITY, 1e-14)?.value)
}

fn bfry_gof(name: &str, ks: &[u64], sigma: f64, tau: f64, seeds: Vec<u64>) -> Result<TestReport> {
    const J: u64 = 200;
    let mut probs: Vec<f64> = (0..=J).map(|j| poisson_bfry_pmf(sigma, tau, j)).collect::<Result<_>>()?;
    probs.push(poisson_bfry_tail(sigma, tau, J)?);
    let mut obs = vec![0u64; J as usize + 2];
    for &k in ks {
        obs[k.min(J + 1) as usize] += 1;
    }
    Ok(TestReport::from_p(name, &chi_square_gof(&obs, &probs)?, P_CHI, seeds))
}

fn c4(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    for &(sigma, tau) in &[(0.5, 1.0), (0.3, 2.5), (0.7, 0.2)] {
        let j_max = 500;
        let s: f64 = (0..=j_max).map(|j| poisson_bfry_pmf(sigma, tau, j)).sum::<Result<f64>>()?
            + poisson_bfry_tail(sigma, tau, j_max)?;
        out.push(TestReport::within(
            &format!("pmf(sigma={sigma},tau={tau}) sums to 1"),
            s,
            1.0,
            BFRY_SUM_TOL,
            vec![],
        ));
    }
    for (j, shown) in [(0u64, 0.41421), (1, 0.14645)] {
        let pmf = poisson_bfry_pmf(0.5, 1.0, j)?;
        let oracle = poisson_bfry_oracle(0.5, 1.0, j)?;
        out.push(TestReport::within(&format!("P({j}) vs integral oracle"), pmf, oracle, BFRY_POINT_TOL, vec![]));
        out.push(TestReport::within(&format!("P({j}) vs {shown}"), pmf, shown, 5e-6, vec![]));
    }
    let sigma = 0.5;
    let lv = LevyDensity::stable_beta(0.3, 1.0, 0.3)?;
    let taus = psi_cumulative(&lv, 10)?;
    let model = UrnModel::Bfry { sigma, lv };
    let seed = cx.seed();
    let ks = replicate(seed, cx.reps(20_000), |rng| {
        let mut urn = CountUrn::new(model.clone())?;
        let mut at = [0u64; 3];
        for row in 1..=10 {
            urn.step(rng)?;
            match row {
                1 => at[0] = urn.k_n(),
                3 => at[1] = urn.k_n(),
                10 => at[2] = urn.k_n(),
                _ => {}
            }
        }
        Ok(at)
    })?;
    for (i, n) in [1usize, 3, 10].into_iter().enumerate() {
        let col: Vec<u64> = ks.iter().map(|k| k[i]).collect();
        out.push(bfry_gof(
            &format!("urn K_{n} vs poisson_bfry(0.5, tau_{n})"),
            &col,
            sigma,
            taus[n - 1],
            vec![seed],
        )?);
    }
    Ok(out)
}

fn k10(model: &UrnModel, seed: u64, reps: usize) -> Result<Vec<f64>> {
    replicate(seed, reps, |rng| {
        let mut urn = CountUrn::new(model.clone())?;
        urn.run(10, rng)?;
        Ok(urn.k_n() as f64)
    })
}

/// Fraction of the sample used by the Hill estimator in criterion 5.
pub const HILL_K_FRAC: f64 = 0.02;

fn c5(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let reps = cx.reps(100_000);
    let mut out = Vec::new();
    for sigma in [0.3, 0.5, 0.7] {
        let model = UrnModel::Bfry {
            sigma,
            lv: LevyDensity::stable_beta(0.3, 1.0, 0.3)?,
        };
        let (s_run, s_boot) = (cx.seed(), cx.seed());
        let ks = k10(&model, s_run, reps)?;
        let t = tail_index(&ks, HILL_K_FRAC, &mut RngStream::new(s_boot, 0))?;
        out.push(TestReport::within(
            &format!("Hill index of K_10, bfry sigma={sigma}"),
            t.index,
            sigma,
            HILL_TOL,
            vec![s_run, s_boot],
        ));
    }
    let (s_run, s_boot) = (cx.seed(), cx.seed());
    let ks = k10(&UrnModel::Ibp { c: 1.0, theta: 1.0 }, s_run, reps)?;
    let t = tail_index(&ks, HILL_K_FRAC, &mut RngStream::new(s_boot, 0))?;
    out.push(TestReport::flag(
        "ibp K_10 flagged as no power law",
        t.index,
        !t.power_law,
        vec![s_run, s_boot],
    ));
    Ok(out)
}

fn c6(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let trunc = TruncationRule::default();
    let n = 5;
    let reps = cx.reps(20_000);
    let mut out = Vec::new();
    let stable = LevyDensity::stable(1.0, 0.5)?;
    let cases: [(&str, LevyDensity, (f64, f64)); 3] = [
        ("gamma(1) vs crp(1)", LevyDensity::gamma(1.0)?, (0.0, 1.0)),
        ("scale_invariant(1) vs crp(1)", LevyDensity::scale_invariant(1.0)?, (0.0, 1.0)),
        ("stable(0.5) vs py(0.5,0.5)", stable.clone(), (0.5, 0.5)),
    ];
    for (name, lv, (alpha, theta)) in cases {
        let (s_b, s_r) = (cx.seed(), cx.seed());
        let bridge = replicate(s_b, reps, |rng| {
            Ok(bridge_partition(&lv, &ScalingLaw::LargestJump, n, 1.0, &trunc, rng)?.block_count() as u64)
        })?;
        let reference = replicate(s_r, reps, |rng| {
            let p = if alpha == 0.0 {
                crp_sample(theta, n, rng)?
            } else {
                py_sample(alpha, theta, n, rng)?
            };
            Ok(p.block_count() as u64)
        })?;
        out.push(ordered_chi(&format!("block count {name}"), &bridge, &reference, vec![s_b, s_r])?);
    }
    let seed = cx.seed();
    let one = replicate(seed, reps, |rng| {
        Ok(bridge_partition(&stable, &ScalingLaw::LargestJump, 3, 1.0, &trunc, rng)?.block_count() == 1)
    })?;
    let p1 = one.iter().filter(|&&b| b).count() as f64 / one.len() as f64;
    out.push(TestReport::within("stable bridge P(one block of 3)", p1, 0.2, PY_ONE_BLOCK_TOL, vec![seed]));

    let seed = cx.seed();
    let draws = replicate(seed, reps, |rng| {
        let s = surrogate_samples(&stable, n, 1, &trunc, rng)?;
        Ok(s.into_iter().next().expect("one sample"))
    })?;
    let at: Vec<(f64, f64)> = draws.iter().map(|d| (d.a, d.t)).collect();
    let w = surrogate_weights(&stable, |s| 1.0 / s, WeightForm::MassScaled, &at)?;
    let mut freqs = vec![0.0; n];
    for (wi, d) in w.weights.iter().zip(&draws) {
        freqs[d.partition.block_count() - 1] += wi;
    }
    let probs = py_block_count_pmf(0.5, 1.0, n)[1..].to_vec();
    out.push(TestReport::from_p(
        "reweighted stable (h=1/s) vs py(0.5,1), weighted by kish ess",
        &chi_square_gof_weighted(&freqs, &probs, w.ess)?,
        P_CHI,
        vec![seed],
    ));
    Ok(out)
}

fn c7(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let trunc = TruncationRule::default();
    let reps = cx.reps(20_000);
    let mut out = Vec::new();
    let families = [
        ("scale_invariant(1)", LevyDensity::scale_invariant(1.0)?),
        ("stable(0.5,0.5)", LevyDensity::stable(0.5, 0.5)?),
    ];
    for (name, lv) in &families {
        let sampler = PredictiveSampler::new(lv.clone(), ScalingLaw::LargestJump)?;
        let (s_p, s_h) = (cx.seed(), cx.seed());
        let pred = replicate(s_p, reps, |rng| Ok(sampler.sample_matrix(3, rng)?.stats().sorted_counts()))?;
        let hier = replicate(s_h, reps, |rng| {
            Ok(sample_jot_matrix(lv, &ScalingLaw::LargestJump, &trunc, 3, rng)?.0.stats().sorted_counts())
        })?;
        let t = chi_square_keyed(&counts(pred), &counts(hier))?;
        out.push(TestReport::from_p(
            &format!("predictive vs hierarchical (K_3, sorted counts), {name}"),
            &t,
            P_CHI,
            vec![s_p, s_h],
        ));
    }
    for (name, lv) in &families {
        let (s_d, s_t) = (cx.seed(), cx.seed());
        let reps = cx.reps(10_000);
        let mass = |m: &crate::measures::UnitaryMeasure| {
            let s = total_mass(m);
            s.sum + s.tail_mass_bound
        };
        let direct = replicate(s_d, reps, |rng| Ok(mass(&sample_posterior_direct(lv, 1.0, 3, &trunc, rng)?)))?;
        let thinned = replicate(s_t, reps, |rng| Ok(mass(&sample_posterior_thinned(lv, 1.0, 3, &trunc, rng)?)))?;
        out.push(TestReport::from_p(
            &format!("posterior mass, direct vs thinned (a=1, n=3), {name}"),
            &ks_two_sample(&direct, &thinned)?,
            P_KS,
            vec![s_d, s_t],
        ));
    }
    Ok(out)
}

fn c8(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let half = lecam_check(&[0.5, 0.5])?;
    let mut out = vec![TestReport::within("{0.5, 0.5} exact tv", half.tv_exact, 0.198, LECAM_HALF_TOL, vec![])];
    let seed = cx.seed();
    let random = replicate(seed, cx.reps(1_000), |rng| {
        let len = 1 + (rng.uniform() * 200.0) as usize;
        let w: Vec<f64> = (0..len).map(|_| 1.0 - rng.uniform()).collect();
        lecam_check(&w)
    })?;
    out.push(lecam_summary("random weight vectors", &random, seed));
    let seed = cx.seed();
    let lv = LevyDensity::stable(0.5, 0.5)?;
    let trunc = TruncationRule::default();
    let jot = replicate(seed, cx.reps(100), |rng| {
        let m = sample_jot(&lv, &ScalingLaw::LargestJump, &trunc, rng)?;
        lecam_check(&m.weights)
    })?;
    out.push(lecam_summary("jot-sampled truncated measures", &jot, seed));
    Ok(out)
}

/// Passes when every vector satisfies the bound; the statistic is the
/// largest ratio `tv / Σw²`.
fn lecam_summary(name: &str, rs: &[crate::diagnostics::LeCam], seed: u64) -> TestReport {
    let worst = rs.iter().map(|r| r.tv_exact / r.bound).fold(0.0, f64::max);
    TestReport::flag(
        &format!("{name}: exact tv <= sum w^2 for all {}", rs.len()),
        worst,
        rs.iter().all(|r| r.pass),
        vec![seed],
    )
}

fn c9(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let (alpha, theta) = (0.5, 1.0);
    let st = LevyDensity::stable(alpha, alpha)?;
    let sb = LevyDensity::stable_beta(alpha, theta, alpha)?;
    // both sides cut at the same level and add the expected mass below it
    let trunc = TruncationRule::relative(1e-4);
    let reps = cx.reps(10_000);
    let (s_t, s_d) = (cx.seed(), cx.seed());
    let thinned = replicate(s_t, reps, |rng| {
        let m = thin(&sample_jot_at(&st, 1.0, &trunc, rng)?, |s| (1.0 - s).powf(theta + alpha - 1.0), rng)?;
        let s = total_mass(&m);
        Ok((m.weights.first().copied().unwrap_or(0.0), s.sum + s.tail_mass_bound))
    })?;
    let direct = replicate(s_d, reps, |rng| {
        let rj = sample_ranked_jumps(&sb, 0.0, &trunc, rng)?;
        Ok((rj.jumps.first().copied().unwrap_or(0.0), rj.jumps.iter().sum::<f64>() + rj.tail_mass_bound))
    })?;
    let pick = |v: &[(f64, f64)], i: usize| -> Vec<f64> { v.iter().map(|x| if i == 0 { x.0 } else { x.1 }).collect() };
    let mut out = Vec::new();
    for (i, what) in ["largest weight", "total mass"].into_iter().enumerate() {
        out.push(TestReport::from_p(
            &format!("thinned stable (a=1) vs stable_beta(theta=1, alpha=0.5): {what}"),
            &ks_two_sample(&pick(&thinned, i), &pick(&direct, i))?,
            P_KS,
            vec![s_t, s_d],
        ));
    }
    Ok(out)
}

fn c10(cx: &mut Ctx) -> Result<Vec<TestReport>> {
    let lv = LevyDensity::scale_invariant(1.0)?;
    let betas = [1.0, 0.5, 0.1];
    let (s_d, s_b) = (cx.seed(), cx.seed());
    let draws = tau_beta_draws(&lv, &betas, cx.reps(100_000), &TruncationRule::default(), &mut RngStream::new(s_d, 0))?;
    let mut boot = RngStream::new(s_b, 0);
    let tvs = betas
        .iter()
        .enumerate()
        .map(|(j, &b)| tau_beta_from_draws(&draws, j, b, (0.95, 1.05), &mut boot))
        .collect::<Result<Vec<_>>>()?;
    let monotone = tvs.windows(2).all(|w| w[1].tv < w[0].tv);
    let mut out: Vec<TestReport> = tvs
        .iter()
        .map(|t| TestReport::flag(&format!("tv at beta={}", t.beta), t.tv, true, vec![s_d, s_b]))
        .collect();
    out.push(TestReport::flag("tv decreases over beta = 1, 0.5, 0.1", tvs[2].tv - tvs[0].tv, monotone, vec![s_d, s_b]));
    out.push(TestReport::from_tv("tv at beta=0.1", tvs[2].tv, TAU_BETA_MAX, vec![s_d, s_b]));
    Ok(out)
}

/// Reruns criterion 8 on the global pool and on a single thread and
/// compares the serialized reports byte for byte.
fn c11(opts: &AcceptOptions, elapsed: f64) -> Result<Vec<TestReport>> {
    let sub = AcceptOptions {
        seed: opts.seed,
        scale: opts.scale.min(0.2),
        criteria: vec![8],
    };
    let a = serde_json::to_vec(&run_criterion(8, &sub)?).map_err(|e| Error::Numerical(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let b = pool.install(|| run_criterion(8, &sub))?;
    let b = serde_json::to_vec(&b).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(vec![
        TestReport::flag("criterion 8 rerun is byte-identical across thread counts", 0.0, a == b, vec![opts.seed]),
        // the elapsed time stays out of the report so that it remains reproducible
        TestReport::flag("suite finished within the runtime limit", 0.0, elapsed < RUNTIME_LIMIT_SECS, vec![]),
    ])
}

/// Runs one criterion (1-10; criterion 11 needs the whole suite).
pub fn run_criterion(id: u8, opts: &AcceptOptions) -> Result<CriterionReport> {
    let mut cx = Ctx::new(opts, id);
    let checks = match id {
        1 => c1(&mut cx)?,
        2 => c2(&mut cx)?,
        3 => c3(&mut cx)?,
        4 => c4(&mut cx)?,
        5 => c5(&mut cx)?,
        6 => c6(&mut cx)?,
        7 => c7(&mut cx)?,
        8 => c8(&mut cx)?,
        9 => c9(&mut cx)?,
        10 => c10(&mut cx)?,
        11 => c11(opts, 0.0)?,
        _ => return Err(Error::param(format!("unknown acceptance criterion {id}"))),
    };
    Ok(report(id, checks))
}

fn report(id: u8, checks: Vec<TestReport>) -> CriterionReport {
    CriterionReport {
        id,
        title: TITLES[id as usize - 1].to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

/// Runs the selected criteria in order; criterion 11 checks the runtime of
/// everything run before it.
pub fn run_suite(opts: &AcceptOptions) -> Result<AcceptReport> {
    if !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return Err(Error::param(format!("scale must be positive, got {}", opts.scale)));
    }
    let ids: Vec<u8> = if opts.criteria.is_empty() {
        (1..=11).collect()
    } else {
        opts.criteria.clone()
    };
    let start = Instant::now();
    let mut criteria = Vec::new();
    for id in ids {
        let r = if id == 11 {
            report(11, c11(opts, start.elapsed().as_secs_f64())?)
        } else {
            run_criterion(id, opts)?
        };
        criteria.push(r);
    }
    Ok(AcceptReport {
        seed: opts.seed,
        scale: opts.scale,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}
