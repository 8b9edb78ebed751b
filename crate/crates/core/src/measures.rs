//! Unitary random measures: JOT draws, conditional and scaled subordinators,
//! thinning, and the stable-beta construction by scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{sample_ranked_jumps, LevyDensity, RankedJumps, TruncationRule};
use crate::special::{gamma_draw, RngStream};

/// Lower cutoff for scaling variables drawn from explicit laws.
pub const SCALING_CUTOFF: f64 = 1e-12;
const MAX_REDRAWS: usize = 10_000;

/// Law `P°` of the scaling variable `Δ°`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScalingLaw {
    /// `Δ° = Δ_1`, the largest jump of the subordinator itself.
    LargestJump,
    Fixed { a: f64 },
    /// `Δ° ~ Gamma(shape, rate)`.
    Gamma { shape: f64, rate: f64 },
    /// `(Δ°)^{-alpha} ~ Gamma(shape, rate)`.
    ZetaGamma { alpha: f64, shape: f64, rate: f64 },
}

impl ScalingLaw {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("scaling law {name} must be positive, got {x}")))
            }
        };
        match *self {
            ScalingLaw::LargestJump => Ok(()),
            ScalingLaw::Fixed { a } => pos("a", a),
            ScalingLaw::Gamma { shape, rate } => pos("shape", shape).and(pos("rate", rate)),
            ScalingLaw::ZetaGamma { alpha, shape, rate } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::param(format!("scaling law alpha must lie in (0,1), got {alpha}")));
                }
                pos("shape", shape).and(pos("rate", rate))
            }
        }
    }

    /// Draw `Δ°`. Explicit laws are redrawn below [`SCALING_CUTOFF`]; the
    /// largest jump of a finite measure is drawn given at least one jump.
    pub fn draw(&self, lv: &LevyDensity, rng: &mut RngStream) -> Result<f64> {
        self.validate()?;
        for _ in 0..MAX_REDRAWS {
            let a = match *self {
                ScalingLaw::LargestJump => {
                    let e = rng.exp1();
                    if e >= lv.total_mass() {
                        continue;
                    }
                    return lv.inv_tail(e);
                }
                ScalingLaw::Fixed { a } => return Ok(a),
                ScalingLaw::Gamma { shape, rate } => gamma_draw(shape, rng) / rate,
                ScalingLaw::ZetaGamma { alpha, shape, rate } => {
                    let zeta = gamma_draw(shape, rng) / rate;
                    zeta.powf(-1.0 / alpha)
                }
            };
            if a >= SCALING_CUTOFF && a.is_finite() {
                return Ok(a);
            }
        }
        Err(Error::NonConvergence {
            routine: "scaling law",
            detail: format!("{self:?} produced no admissible draw in {MAX_REDRAWS} tries"),
        })
    }

    /// Log density of `Δ°` at `a`, ignoring the cutoff renormalization.
    pub fn log_density(&self, lv: &LevyDensity, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let lg = crate::special::lgamma;
        match *self {
            ScalingLaw::LargestJump => {
                let d = lv.density(a);
                if d == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(d.ln() - lv.tail(a)?)
            }
            ScalingLaw::Fixed { .. } => Err(Error::param("a fixed scaling law has no density")),
            ScalingLaw::Gamma { shape, rate } => {
                Ok(shape * rate.ln() - lg(shape) + (shape - 1.0) * a.ln() - rate * a)
            }
            ScalingLaw::ZetaGamma { alpha, shape, rate } => {
                let z = a.powf(-alpha);
                let lz = shape * rate.ln() - lg(shape) + (shape - 1.0) * z.ln() - rate * z;
                Ok(lz + alpha.ln() + (-alpha - 1.0) * a.ln())
            }
        }
    }
}

/// How a measure's jump sequence was cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub rule: TruncationRule,
    pub floor: f64,
    pub tail_mass_bound: f64,
    pub exhausted: bool,
}

impl TruncationInfo {
    fn from_jumps(rule: TruncationRule, rj: &RankedJumps) -> Self {
        TruncationInfo {
            rule,
            floor: rj.floor,
            tail_mass_bound: rj.tail_mass_bound,
            exhausted: rj.exhausted,
        }
    }

    fn none() -> Self {
        TruncationInfo {
            rule: TruncationRule::FixedCount { count: usize::MAX },
            floor: 0.0,
            tail_mass_bound: 0.0,
            exhausted: true,
        }
    }
}

/// Finite list of weights in (0, 1], in decreasing order, with atom labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryMeasure {
    pub weights: Vec<f64>,
    pub atoms: Vec<u64>,
    pub delta_ref: Option<f64>,
    pub zeta: Option<f64>,
    pub truncation: TruncationInfo,
}

impl UnitaryMeasure {
    /// A directly specified measure; weights are sorted and labelled 0, 1, ...
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::param(format!("unitary weights must lie in (0,1], got {w}")));
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        let atoms = (0..weights.len() as u64).collect();
        Ok(UnitaryMeasure {
            weights,
            atoms,
            delta_ref: None,
            zeta: None,
            truncation: TruncationInfo::none(),
        })
    }

    pub(crate) fn from_jumps(rj: RankedJumps, rule: TruncationRule) -> Self {
        let info = TruncationInfo::from_jumps(rule, &rj);
        let atoms = (0..rj.jumps.len() as u64).collect();
        UnitaryMeasure {
            weights: rj.jumps,
            atoms,
            delta_ref: None,
            zeta: None,
            truncation: info,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Draw an atom value for every weight from a base distribution.
    pub fn atom_values<F: FnMut(&mut RngStream) -> f64>(&self, mut base: F, rng: &mut RngStream) -> Vec<f64> {
        self.weights.iter().map(|_| base(rng)).collect()
    }
}

/// Sum of the kept weights and the expected mass of the discarded ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub sum: f64,
    pub tail_mass_bound: f64,
}

pub fn total_mass(m: &UnitaryMeasure) -> MassSummary {
    MassSummary {
        sum: m.weights.iter().sum(),
        tail_mass_bound: m.truncation.tail_mass_bound,
    }
}

/// Relative floors on unitary weights default to the unit scale.
pub(crate) fn unitary_rule(rule: &TruncationRule) -> TruncationRule {
    match *rule {
        TruncationRule::RelativeFloor { eps, reference: None } => TruncationRule::RelativeFloor {
            eps,
            reference: Some(1.0),
        },
        r => r,
    }
}

/// `a λ(a s)` on `(0, min(1, hi/a)]`.
pub fn conditional_levy(lv: &LevyDensity, a: f64) -> Result<LevyDensity> {
    lv.conditional(a)
}

/// A draw of `JOT(λ, P°)`: `a ~ P°`, then the ranked jumps below `a`, divided by `a`.
pub fn sample_jot(
    lv: &LevyDensity,
    pstar: &ScalingLaw,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<UnitaryMeasure> {
    let a = pstar.draw(lv, rng)?;
    sample_jot_at(lv, a, trunc, rng)
}

/// JOT weights for a given scaling value `a`.
pub fn sample_jot_at(lv: &LevyDensity, a: f64, trunc: &TruncationRule, rng: &mut RngStream) -> Result<UnitaryMeasure> {
    let cond = lv.conditional(a)?;
    let rule = unitary_rule(trunc);
    let rj = sample_ranked_jumps(&cond, 0.0, &rule, rng)?;
    let mut m = UnitaryMeasure::from_jumps(rj, rule);
    m.delta_ref = Some(a);
    Ok(m)
}

/// Ranked jumps of the subordinator with density `zeta λ`, `λ` on (0, 1].
pub fn sample_scaled_levy(
    lv: &LevyDensity,
    zeta: f64,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<UnitaryMeasure> {
    let (_, hi) = lv.support();
    if hi > 1.0 {
        return Err(Error::param(format!(
            "scaled sampling needs a density supported in (0,1], got upper end {hi}"
        )));
    }
    let scaled = lv.scaled(zeta)?;
    let rule = unitary_rule(trunc);
    let rj = sample_ranked_jumps(&scaled, 0.0, &rule, rng)?;
    let mut m = UnitaryMeasure::from_jumps(rj, rule);
    m.zeta = Some(zeta);
    Ok(m)
}

fn check_prob(h: f64, s: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&h) {
        Ok(h)
    } else {
        Err(Error::param(format!("thinning function returned {h} at s={s}, outside [0,1]")))
    }
}

/// Keep each weight `J_k` independently with probability `h(J_k)`.
pub fn thin<H: Fn(f64) -> f64>(m: &UnitaryMeasure, h: H, rng: &mut RngStream) -> Result<UnitaryMeasure> {
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    for (&w, &id) in m.weights.iter().zip(&m.atoms) {
        let p = check_prob(h(w), w)?;
        if rng.uniform() < p {
            weights.push(w);
            atoms.push(id);
        }
    }
    Ok(UnitaryMeasure {
        weights,
        atoms,
        delta_ref: m.delta_ref,
        zeta: m.zeta,
        truncation: m.truncation.clone(),
    })
}

/// The density `h λ` whose jumps the thinned process has.
pub fn thin_levy<H>(lv: &LevyDensity, label: &str, h: H) -> LevyDensity
where
    H: Fn(f64) -> f64 + Send + Sync + 'static,
{
    lv.tilted(label, h)
}

/// Density produced by [`stable_beta_by_scaling`]:
/// `alpha tau^{-alpha} s^{-1-alpha} (1-s)^{theta+alpha-1}` on (0, 1).
pub fn stable_beta_scaling_density(alpha: f64, theta: f64, tau: f64) -> Result<LevyDensity> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")));
    }
    LevyDensity::stable_beta(alpha * tau.powf(-alpha), theta, alpha)
}

/// Stable-beta weights from stable jumps.
///
/// Jumps of the stable density `alpha s^{-1-alpha}` are mapped by
/// `s -> s/(s+tau)`, which gives `alpha tau^{-alpha} s^{-1-alpha} (1-s)^{alpha-1}`.
/// The closed-form inverse tail of that density is exactly the stable inverse
/// followed by the map, so the mapped jumps are drawn through it. For
/// `theta >= 0` they are then thinned with `(1-s)^theta`. For
/// `theta in (-alpha, 0)` that probability would exceed one, so each mapped
/// jump `y` is instead sent through the monotone map `Λ_T^{-1}(Λ_S(y))`
/// between the two tails, which carries the Poisson process onto the target.
pub fn stable_beta_by_scaling(
    alpha: f64,
    theta: f64,
    tau: f64,
    trunc: &TruncationRule,
    rng: &mut RngStream,
) -> Result<UnitaryMeasure> {
    if !(theta > -alpha) || !theta.is_finite() {
        return Err(Error::param(format!("stable-beta needs theta > -alpha, got theta={theta}")));
    }
    let mapped = stable_beta_scaling_density(alpha, 0.0, tau)?;
    let rule = unitary_rule(trunc);
    let rj = sample_ranked_jumps(&mapped, 0.0, &rule, rng)?;
    if theta >= 0.0 {
        let target = stable_beta_scaling_density(alpha, theta, tau)?;
        let floor = rj.floor;
        let m = UnitaryMeasure::from_jumps(rj, rule);
        let mut out = thin(&m, |s| (1.0 - s).powf(theta), rng)?;
        out.truncation.tail_mass_bound = target.mass_below(floor)?;
        return Ok(out);
    }
    let target = stable_beta_scaling_density(alpha, theta, tau)?;
    let mut jumps = Vec::with_capacity(rj.jumps.len());
    for &y in &rj.jumps {
        let v = target.inv_tail(mapped.tail(y)?)?;
        if let Some(&prev) = jumps.last() {
            if !(v < prev) {
                break;
            }
        }
        jumps.push(v);
    }
    let floor = if rj.floor > 0.0 {
        target.inv_tail(mapped.tail(rj.floor)?)?
    } else {
        0.0
    };
    let out = RankedJumps {
        jumps,
        floor,
        tail_mass_bound: target.mass_below(floor)?,
        exhausted: rj.exhausted,
    };
    Ok(UnitaryMeasure::from_jumps(out, rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn from_weights_sorts_and_validates() {
        let m = UnitaryMeasure::from_weights(vec![0.25, 0.5]).unwrap();
        assert_eq!(m.weights, vec![0.5, 0.25]);
        assert_eq!(total_mass(&m).sum, 0.75);
        assert_eq!(total_mass(&UnitaryMeasure::from_weights(vec![]).unwrap()).sum, 0.0);
        assert!(UnitaryMeasure::from_weights(vec![1.5]).is_err());
        assert!(UnitaryMeasure::from_weights(vec![0.0]).is_err());
    }

    #[test]
    fn conditional_scale_invariant_does_not_depend_on_a() {
        let lv = LevyDensity::scale_invariant(2.0).unwrap();
        for &a in &[0.1, 0.5, 1.0] {
            let c = conditional_levy(&lv, a).unwrap();
            for &s in &[0.01, 0.3, 0.9] {
                assert!((c.density(s) - 2.0 / s).abs() < 1e-12);
            }
        }
        let c = conditional_levy(&lv, 1.0).unwrap();
        assert_eq!(c.density(0.3), lv.density(0.3));
    }

    #[test]
    fn conditional_stable_is_rescaled_stable() {
        let lv = LevyDensity::stable(1.5, 0.4).unwrap();
        let a = 0.3f64;
        let c = conditional_levy(&lv, a).unwrap();
        assert_eq!(c.support(), (0.0, 1.0));
        for &s in &[1e-3f64, 0.2, 0.99] {
            let want = 1.5 * a.powf(-0.4) * s.powf(-1.4);
            assert!((c.density(s) / want - 1.0).abs() < 1e-12);
        }
        assert_eq!(c.density(1.5), 0.0);
    }

    #[test]
    fn beta_process_fixed_a_closed_form() {
        // ((1-a)/a)^alpha = 1 at a = 1/2
        let alpha: f64 = 0.5;
        let lv = LevyDensity::beta_process_alpha(alpha).unwrap();
        let a = 0.5;
        let rule = TruncationRule::FixedCount { count: 6 };
        let m = sample_jot_at(&lv, a, &rule, &mut RngStream::new(11, 0)).unwrap();
        let mut rng = RngStream::new(11, 0);
        let mut acc = 1.0;
        for (k, &w) in m.weights.iter().enumerate() {
            acc += rng.exp1();
            let mk = 1.0 / (acc.powf(1.0 / alpha) + 1.0);
            assert!((w * a - mk).abs() < 1e-12, "k={k}: {} vs {mk}", w * a);
        }
    }

    #[test]
    fn largest_jump_weights_are_below_one() {
        let lv = LevyDensity::stable(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(5, 1);
        for _ in 0..200 {
            let m = sample_jot(&lv, &ScalingLaw::LargestJump, &TruncationRule::relative(1e-4), &mut rng).unwrap();
            assert!(m.weights.iter().all(|&w| w < 1.0 && w > 0.0));
            assert!(m.weights.windows(2).all(|p| p[0] > p[1]));
        }
    }

    #[test]
    fn scaling_law_densities_integrate_to_one() {
        let lv = LevyDensity::stable(0.5, 0.5).unwrap();
        let laws = [
            ScalingLaw::LargestJump,
            ScalingLaw::Gamma { shape: 2.0, rate: 2.0 },
            ScalingLaw::ZetaGamma {
                alpha: 0.5,
                shape: 3.0,
                rate: 1.0,
            },
        ];
        for law in laws {
            let f = |a: f64| law.log_density(&lv, a).unwrap().exp();
            let total = crate::special::quad(f, 0.0, f64::INFINITY, 1e-10).unwrap().value;
            assert!((total - 1.0).abs() < 1e-8, "{law:?}: {total}");
        }
        assert!(ScalingLaw::Fixed { a: 1.0 }.log_density(&lv, 1.0).is_err());
        assert!(ScalingLaw::Gamma { shape: -1.0, rate: 1.0 }.validate().is_err());
    }

    #[test]
    fn thinning_edge_cases() {
        let m = UnitaryMeasure::from_weights(vec![0.9, 0.5, 0.1]).unwrap();
        let mut rng = RngStream::new(1, 1);
        assert_eq!(thin(&m, |_| 1.0, &mut rng).unwrap().weights, m.weights);
        assert!(thin(&m, |_| 0.0, &mut rng).unwrap().is_empty());
        let err = thin(&m, |s| 2.0 * s, &mut rng).unwrap_err();
        assert!(err.to_string().contains("s=0.9"));
    }

    #[test]
    fn scaled_measure_rejects_unbounded_support() {
        let lv = LevyDensity::stable(1.0, 0.5).unwrap();
        let rule = TruncationRule::relative(1e-3);
        assert!(sample_scaled_levy(&lv, 1.0, &rule, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn scaled_zeta_one_equals_ranked_jumps() {
        let lv = LevyDensity::scale_invariant(1.0).unwrap();
        let rule = TruncationRule::relative(1e-6);
        let m = sample_scaled_levy(&lv, 1.0, &rule, &mut RngStream::new(4, 2)).unwrap();
        let rj = sample_ranked_jumps(&lv, 0.0, &unitary_rule(&rule), &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(m.weights, rj.jumps);
        assert_eq!(m.zeta, Some(1.0));
    }

    #[test]
    fn scaling_map_is_the_mapped_stable_inverse() {
        let (alpha, tau) = (0.5, 2.0);
        let st = LevyDensity::stable(alpha, alpha).unwrap();
        let mapped = stable_beta_scaling_density(alpha, 0.0, tau).unwrap();
        let mut t = 0.0;
        let mut rng = RngStream::new(9, 9);
        for _ in 0..50 {
            t += rng.exp1();
            let s = st.inv_tail(t).unwrap();
            let y = mapped.inv_tail(t).unwrap();
            assert!((y - s / (s + tau)).abs() < 1e-13 * (1.0 + y));
        }
    }

    #[test]
    fn negative_theta_scaling_route_is_monotone() {
        let rule = TruncationRule::FixedCount { count: 40 };
        let m = stable_beta_by_scaling(0.5, -0.2, 1.0, &rule, &mut RngStream::new(2, 3)).unwrap();
        assert_eq!(m.len(), 40);
        assert!(m.weights.windows(2).all(|p| p[0] > p[1]));
        assert!(m.weights.iter().all(|&w| w > 0.0 && w < 1.0));
        assert!(stable_beta_by_scaling(0.5, -0.6, 1.0, &rule, &mut RngStream::new(2, 3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conditioned_jumps_never_exceed_one(seed in any::<u64>(), a in 0.05f64..3.0) {
            let lv = LevyDensity::stable(1.0, 0.6).unwrap();
            let m = sample_jot_at(&lv, a, &TruncationRule::FixedCount { count: 30 }, &mut RngStream::new(seed, 0)).unwrap();
            prop_assert!(m.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
        }

        #[test]
        fn thinning_keeps_order(seed in any::<u64>(), p in 0.0f64..1.0) {
            let lv = LevyDensity::scale_invariant(3.0).unwrap();
            let mut rng = RngStream::new(seed, 1);
            let m = sample_jot(&lv, &ScalingLaw::LargestJump, &TruncationRule::relative(1e-5), &mut rng).unwrap();
            let t = thin(&m, |_| p, &mut rng).unwrap();
            prop_assert!(t.weights.windows(2).all(|w| w[0] > w[1]));
            prop_assert!(t.atoms.iter().all(|id| m.atoms.contains(id)));
        }
    }
}
