//! Partitions from normalized scaled subordinators: mass conditioning,
//! paintbox draws, reference CRP and Pitman-Yor samplers, surrogate
//! reweighting and the coupled CRP/IBP generator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmat::{matrix_with_dust, FeatureMatrix};
use crate::levy::{LevyDensity, LevyFamily, TruncationRule};
use crate::measures::{sample_jot, total_mass, ScalingLaw, UnitaryMeasure};
use crate::special::RngStream;

/// Partition of `{0, .., n-1}` into non-empty blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub blocks: Vec<Vec<u32>>,
}

impl Partition {
    /// Checks disjointness and coverage, then orders blocks by least element.
    pub fn new(n: usize, mut blocks: Vec<Vec<u32>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(Error::Construction("partition has an empty block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                let i = i as usize;
                if i >= n || seen[i] {
                    return Err(Error::Construction(format!("index {i} repeated or outside 0..{n}")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Construction("partition does not cover every index".into()));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { n, blocks })
    }

    /// Builds the partition whose blocks are the indices sharing a label.
    pub fn from_labels(labels: &[u64]) -> Self {
        let mut blocks: Vec<(u64, Vec<u32>)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for (i, &l) in labels.iter().enumerate() {
            let slot = *index.entry(l).or_insert_with(|| {
                blocks.push((l, Vec::new()));
                blocks.len() - 1
            });
            blocks[slot].1.push(i as u32);
        }
        Partition {
            n: labels.len(),
            blocks: blocks.into_iter().map(|(_, b)| b).collect(),
        }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Block sizes in decreasing order.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.blocks.iter().map(|b| b.len()).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    pub fn singletons(&self) -> usize {
        self.blocks.iter().filter(|b| b.len() == 1).count()
    }
}

/// A JOT measure accepted under `mass <= threshold`.
#[derive(Clone, Debug)]
pub struct ConditionedMeasure {
    pub measure: UnitaryMeasure,
    /// Kept weights plus the expected mass below the truncation floor.
    pub mass: f64,
    pub tries: u64,
}

/// Rejection sampling of `JOT(lv, pstar)` until the total mass is at most
/// `threshold`.
pub fn condition_mass(
    lv: &LevyDensity,
    pstar: &ScalingLaw,
    threshold: f64,
    max_tries: u64,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<ConditionedMeasure> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    for tries in 1..=max_tries {
        let m = sample_jot(lv, pstar, trunc, rng)?;
        let s = total_mass(&m);
        let mass = s.sum + s.tail_mass_bound;
        if mass <= threshold {
            return Ok(ConditionedMeasure { measure: m, mass, tries });
        }
    }
    Err(Error::NonConvergence {
        routine: "condition_mass",
        detail: format!("no draw with mass <= {threshold} in {max_tries} tries (acceptance rate 0)"),
    })
}

/// Fraction of `tries` JOT draws with mass at most `threshold`.
pub fn acceptance_rate(
    lv: &LevyDensity,
    pstar: &ScalingLaw,
    threshold: f64,
    tries: u64,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<f64> {
    let mut hits = 0u64;
    for _ in 0..tries {
        let s = total_mass(&sample_jot(lv, pstar, trunc, rng)?);
        if s.sum + s.tail_mass_bound <= threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / tries as f64)
}

/// Kingman paintbox: each index picks atom `k` with probability `weights[k]`
/// and otherwise lands in the residual mass as a singleton.
pub fn paintbox(weights: &[f64], n: usize, rng: &mut RngStream) -> Result<Partition> {
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::param(format!("paintbox weight {w} is negative")));
    }
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    if acc > 1.0 + 1e-9 {
        return Err(Error::param(format!("paintbox weights sum to {acc} > 1")));
    }
    let mut labels = Vec::with_capacity(n);
    let mut fresh = weights.len() as u64;
    for _ in 0..n {
        let u = rng.uniform();
        let k = cum.partition_point(|&c| c <= u);
        if k < weights.len() {
            labels.push(k as u64);
        } else {
            labels.push(fresh);
            fresh += 1;
        }
    }
    Ok(Partition::from_labels(&labels))
}

/// Chinese restaurant process with concentration `theta`.
pub fn crp_sample(theta: f64, n: usize, rng: &mut RngStream) -> Result<Partition> {
    if !(theta > 0.0) {
        return Err(Error::param(format!("crp theta must be positive, got {theta}")));
    }
    py_sample(0.0, theta, n, rng)
}

/// Two-parameter (Pitman-Yor) seating with discount `alpha` and strength `theta`.
pub fn py_sample(alpha: f64, theta: f64, n: usize, rng: &mut RngStream) -> Result<Partition> {
    if !(0.0..1.0).contains(&alpha) || !(theta > -alpha) {
        return Err(Error::param(format!(
            "pitman-yor needs alpha in [0, 1) and theta > -alpha, got {alpha}, {theta}"
        )));
    }
    let mut blocks: Vec<Vec<u32>> = Vec::new();
    for i in 0..n {
        let total = theta + i as f64;
        let mut u = rng.uniform() * total;
        let mut chosen = None;
        for (b, block) in blocks.iter().enumerate() {
            let w = block.len() as f64 - alpha;
            if u < w {
                chosen = Some(b);
                break;
            }
            u -= w;
        }
        // the remainder, theta + alpha * #blocks, opens a new block
        match chosen {
            Some(b) => blocks[b].push(i as u32),
            None => blocks.push(vec![i as u32]),
        }
    }
    Ok(Partition { n, blocks })
}

/// Exact law of the number of blocks of a Pitman-Yor partition of `n`;
/// entry `k` is `P(K = k)`.
pub fn py_block_count_pmf(alpha: f64, theta: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    if n == 0 {
        p[0] = 1.0;
        return p;
    }
    p[1] = 1.0;
    for i in 1..n {
        let mut next = vec![0.0; n + 1];
        let total = theta + i as f64;
        for k in 1..=i {
            if p[k] == 0.0 {
                continue;
            }
            let new = (theta + alpha * k as f64) / total;
            next[k + 1] += p[k] * new;
            next[k] += p[k] * (1.0 - new);
        }
        p = next;
    }
    p
}

/// Families whose normalized law given `mass = t` does not depend on `t`
/// for `t ∈ (0, 1]` under the given scaling law.
fn check_bridge(lv: &LevyDensity, pstar: &ScalingLaw) -> Result<()> {
    let ok = match (lv.family(), pstar) {
        (Some(LevyFamily::Gamma { .. }), _) => true,
        (Some(LevyFamily::ScaleInvariant { .. }), ScalingLaw::LargestJump) => true,
        (Some(LevyFamily::ScaleInvariant { .. }), ScalingLaw::Fixed { a }) => *a <= 1.0,
        (Some(LevyFamily::Stable { .. }), ScalingLaw::LargestJump) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::param(format!(
            "bridge partitions are only exact for gamma, scale-invariant (scaling at most 1) and stable \
             (largest-jump scaling) densities, got {} with {pstar:?}",
            lv.describe()
        )))
    }
}

/// Condition on `mass <= threshold`, normalize, and draw a paintbox partition.
pub fn bridge_partition(
    lv: &LevyDensity,
    pstar: &ScalingLaw,
    n: usize,
    threshold: f64,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<Partition> {
    check_bridge(lv, pstar)?;
    let c = condition_mass(lv, pstar, threshold, 1_000_000, trunc, rng)?;
    let w: Vec<f64> = c.measure.weights.iter().map(|x| x / c.mass).collect();
    paintbox(&w, n, rng)
}

/// One largest-jump draw: scaling `a = Δ_1`, JOT mass `t`, and the partition
/// of `n` indices from the normalized measure.
#[derive(Clone, Debug)]
pub struct SurrogateSample {
    pub a: f64,
    pub t: f64,
    pub partition: Partition,
}

/// Largest-jump draws conditioned on `t <= 1`, for later reweighting.
pub fn surrogate_samples(
    lv: &LevyDensity,
    n: usize,
    count: usize,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<Vec<SurrogateSample>> {
    (0..count)
        .map(|_| {
            let c = condition_mass(lv, &ScalingLaw::LargestJump, 1.0, 1_000_000, trunc, rng)?;
            let a = c.measure.delta_ref.expect("jot measures record their scaling");
            let w: Vec<f64> = c.measure.weights.iter().map(|x| x / c.mass).collect();
            Ok(SurrogateSample {
                a,
                t: c.mass,
                partition: paintbox(&w, n, rng)?,
            })
        })
        .collect()
}

/// Form of the importance weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// `ω(a, t) = h(a t) / (a λ(a))`.
    Plain,
    /// `t ω(a, t)`: same law given `t`, bounded weights for stable densities.
    #[default]
    MassScaled,
}

/// Self-normalized importance weights for largest-jump draws `(a, t)`.
#[derive(Clone, Debug, Serialize)]
pub struct Reweighted {
    pub weights: Vec<f64>,
    /// Kish effective sample size `(Σw)^2 / Σw^2`.
    pub ess: f64,
    pub warning: Option<String>,
}

/// Below this effective sample size a reweighting carries a warning.
pub const MIN_ESS: f64 = 50.0;

pub fn surrogate_weights<H: Fn(f64) -> f64>(
    lv: &LevyDensity,
    h: H,
    form: WeightForm,
    at: &[(f64, f64)],
) -> Result<Reweighted> {
    let raw: Vec<f64> = at
        .iter()
        .map(|&(a, t)| {
            let d = a * lv.density(a);
            let w = if d > 0.0 { h(a * t) / d } else { 0.0 };
            match form {
                WeightForm::Plain => w,
                WeightForm::MassScaled => t * w,
            }
        })
        .collect();
    if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Numerical("surrogate weight is negative or not finite".into()));
    }
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Numerical("all surrogate weights vanish".into()));
    }
    let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let warning = (ess < MIN_ESS).then(|| format!("effective sample size {ess:.1} is below {MIN_ESS}"));
    Ok(Reweighted { weights, ess, warning })
}

/// Reweighted mean of a statistic.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub ess: f64,
    pub warning: Option<String>,
}

/// Weighted mean of `stat` over `(a, t, stat)` samples under the surrogate
/// law with density `h`.
pub fn surrogate_reweight<H: Fn(f64) -> f64>(
    lv: &LevyDensity,
    h: H,
    form: WeightForm,
    samples: &[(f64, f64, f64)],
) -> Result<WeightedEstimate> {
    let at: Vec<(f64, f64)> = samples.iter().map(|&(a, t, _)| (a, t)).collect();
    let r = surrogate_weights(lv, h, form, &at)?;
    let estimate = r.weights.iter().zip(samples).map(|(w, s)| w * s.2).sum();
    Ok(WeightedEstimate {
        estimate,
        ess: r.ess,
        warning: r.warning,
    })
}

/// One accepted scale-invariant measure drives both a paintbox partition of
/// its normalization and Bernoulli feature rows of the unnormalized weights.
pub fn coupled_crp_ibp(
    theta: f64,
    n: usize,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<(Partition, FeatureMatrix)> {
    let lv = LevyDensity::scale_invariant(theta)?;
    let c = condition_mass(&lv, &ScalingLaw::LargestJump, 1.0, 1_000_000, trunc, rng)?;
    let w: Vec<f64> = c.measure.weights.iter().map(|x| x / c.mass).collect();
    let p = paintbox(&w, n, rng)?;
    let a = c.measure.delta_ref.expect("jot measures record their scaling");
    let z = matrix_with_dust(&c.measure, &lv.conditional(a)?, n, rng)?;
    Ok((p, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_validation() {
        assert!(Partition::new(3, vec![vec![0, 2], vec![1]]).is_ok());
        assert!(Partition::new(3, vec![vec![0, 2], vec![2, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 1], vec![]]).is_err());
        let p = Partition::new(3, vec![vec![2, 1], vec![0]]).unwrap();
        assert_eq!(p.blocks, vec![vec![0], vec![1, 2]]);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"n":3,"blocks":[[0],[1,2]]}"#);
    }

    #[test]
    fn paintbox_edge_cases() {
        let mut rng = RngStream::new(9, 0);
        assert_eq!(paintbox(&[1.0], 6, &mut rng).unwrap().block_count(), 1);
        assert_eq!(paintbox(&[], 6, &mut rng).unwrap().block_count(), 6);
        assert!(paintbox(&[0.5, -0.1], 2, &mut rng).is_err());
        let reps = 100_000;
        let same = (0..reps)
            .filter(|_| paintbox(&[0.5, 0.5], 2, &mut rng).unwrap().block_count() == 1)
            .count();
        let se = (0.25 / reps as f64).sqrt();
        assert!((same as f64 / reps as f64 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn seating_probabilities() {
        let mut rng = RngStream::new(10, 0);
        let reps = 100_000;
        let crp1 = (0..reps)
            .filter(|_| crp_sample(1.0, 3, &mut rng).unwrap().block_count() == 1)
            .count() as f64
            / reps as f64;
        assert!((crp1 - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / reps as f64).sqrt());
        let py = (0..reps)
            .filter(|_| py_sample(0.5, 0.5, 3, &mut rng).unwrap().block_count() == 1)
            .count() as f64
            / reps as f64;
        assert!((py - 0.2).abs() < 4.0 * (0.16 / reps as f64).sqrt());
        assert_eq!(py_sample(0.3, 2.0, 1, &mut rng).unwrap().block_count(), 1);
        assert!(py_sample(0.5, -0.6, 3, &mut rng).is_err());
    }

    #[test]
    fn block_count_pmf() {
        let p = py_block_count_pmf(0.5, 0.5, 3);
        assert!((p[1] - 0.2).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let c = py_block_count_pmf(0.0, 1.0, 3);
        assert!((c[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((c[3] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn scale_invariant_acceptance_is_dickman() {
        let lv = LevyDensity::scale_invariant(1.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let tr = TruncationRule::default();
        let r = acceptance_rate(&lv, &ScalingLaw::LargestJump, 1.0, 100_000, &tr, &mut rng).unwrap();
        assert!((r - 0.5615).abs() < 0.005, "rate {r}");
        let half = acceptance_rate(&lv, &ScalingLaw::LargestJump, 0.5, 20_000, &tr, &mut rng).unwrap();
        assert!(half < r);
        let st = LevyDensity::stable(1.0, 0.5).unwrap();
        assert!(acceptance_rate(&st, &ScalingLaw::LargestJump, 1.0, 2_000, &tr, &mut rng).unwrap() > 0.0);
    }

    #[test]
    fn bridge_whitelist() {
        let mut rng = RngStream::new(12, 0);
        let tr = TruncationRule::default();
        let bp = LevyDensity::beta_process(1.0, 1.0).unwrap();
        assert!(bridge_partition(&bp, &ScalingLaw::LargestJump, 3, 1.0, &tr, &mut rng).is_err());
        let st = LevyDensity::stable(1.0, 0.5).unwrap();
        let g = ScalingLaw::Gamma { shape: 1.0, rate: 1.0 };
        assert!(bridge_partition(&st, &g, 3, 1.0, &tr, &mut rng).is_err());
        let gm = LevyDensity::gamma(2.0).unwrap();
        assert_eq!(bridge_partition(&gm, &g, 4, 1.0, &tr, &mut rng).unwrap().n, 4);
    }

    #[test]
    fn stable_bridge_one_block_probability() {
        let st = LevyDensity::stable(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(13, 0);
        let tr = TruncationRule::default();
        let reps = 20_000;
        let one = (0..reps)
            .filter(|_| {
                bridge_partition(&st, &ScalingLaw::LargestJump, 3, 1.0, &tr, &mut rng)
                    .unwrap()
                    .block_count()
                    == 1
            })
            .count() as f64
            / reps as f64;
        assert!((one - 0.2).abs() < 0.01, "{one}");
    }

    #[test]
    fn reweighting_trivial_cases() {
        let st = LevyDensity::stable(1.0, 0.5).unwrap();
        // h(at) proportional to a λ(a) makes every weight equal
        let samples: Vec<(f64, f64, f64)> = (1..=60).map(|i| (i as f64 / 10.0, 0.5, i as f64)).collect();
        let plain = samples.iter().map(|s| s.2).sum::<f64>() / 60.0;
        let eq = surrogate_reweight(&st, |z: f64| (2.0 * z).powf(-0.5), WeightForm::MassScaled, &samples).unwrap();
        assert!((eq.estimate - plain).abs() < 1e-9);
        assert!((eq.ess - 60.0).abs() < 1e-9);
        assert!(eq.warning.is_none());
        // a point mass on one sample
        let one = surrogate_reweight(
            &st,
            |z: f64| if (z - 1.5).abs() < 1e-12 { 1.0 } else { 0.0 },
            WeightForm::Plain,
            &samples,
        ).unwrap();
        assert_eq!(one.estimate, 30.0);
        assert!(one.warning.is_some());
    }

    #[test]
    fn reweighted_stable_draws_give_pitman_yor() {
        let st = LevyDensity::stable(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(15, 0);
        let s = surrogate_samples(&st, 4, 20_000, &TruncationRule::default(), &mut rng).unwrap();
        let at: Vec<(f64, f64)> = s.iter().map(|x| (x.a, x.t)).collect();
        let r = surrogate_weights(&st, |z| 1.0 / z, WeightForm::MassScaled, &at).unwrap();
        assert!(r.ess > 1e3);
        let one: f64 = r
            .weights
            .iter()
            .zip(&s)
            .filter(|(_, x)| x.partition.block_count() == 1)
            .map(|(w, _)| w)
            .sum();
        let want = py_block_count_pmf(0.5, 1.0, 4)[1];
        let se = (want * (1.0 - want) / r.ess).sqrt();
        assert!((one - want).abs() < 4.0 * se, "{one} vs {want}");
    }

    #[test]
    fn coupled_outputs_are_dependent() {
        let mut rng = RngStream::new(14, 0);
        let tr = TruncationRule::default();
        let reps = 10_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let (p, z) = coupled_crp_ibp(1.0, 5, &tr, &mut rng).unwrap();
            let (x, y) = (p.block_count() as f64, z.columns().len() as f64);
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let r = reps as f64;
        let cov = sxy / r - sx * sy / (r * r);
        let corr = cov / ((sxx / r - (sx / r).powi(2)) * (syy / r - (sy / r).powi(2))).sqrt();
        assert!(corr > 0.0, "corr {corr}");
    }

    proptest! {
        #[test]
        fn paintbox_covers_all_indices(seed in 0u64..1000, n in 1usize..40, k in 0usize..6) {
            let mut rng = RngStream::new(seed, 1);
            let w = vec![0.9 / k.max(1) as f64; k];
            let p = paintbox(&w, n, &mut rng).unwrap();
            let again = Partition::new(p.n, p.blocks.clone()).unwrap();
            prop_assert_eq!(again.block_sizes().iter().sum::<usize>(), n);
        }

        #[test]
        fn py_partitions_are_valid(seed in 0u64..1000, n in 1usize..30) {
            let mut rng = RngStream::new(seed, 2);
            let p = py_sample(0.4, 1.3, n, &mut rng).unwrap();
            prop_assert!(Partition::new(n, p.blocks.clone()).is_ok());
        }
    }
}
