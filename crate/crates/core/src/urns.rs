//! Row-by-row generators (IBP, stable JOT, BFRY) and the Poisson-BFRY
//! distribution calculus.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::featmat::{profile_rates, random_subset, sample_scaled_matrix, Column, CountProfile, FeatureMatrix};
use crate::levy::{LevyDensity, LevyFamily, TruncationRule};
use crate::measures::ScalingLaw;
use crate::posterior::{stable_phi, zeta_grid_posterior, GridDistribution};
use crate::special::{binomial, gamma_draw, lbeta, lgamma, log_add_exp, poisson_count, quad_rel, RngStream};

/// Default cap on the number of distinct features an urn may hold.
pub const DEFAULT_MAX_FEATURES: usize = 10_000_000;

/// Urn parameters.
#[derive(Clone, Debug)]
pub enum UrnModel {
    /// Two-parameter IBP with mass `c` and concentration `theta`.
    Ibp { c: f64, theta: f64 },
    /// Stable JOT urn with `c = alpha` and scaling law `pstar` on `Δ°`.
    StableJot { alpha: f64, pstar: ScalingLaw },
    /// BFRY urn: `ζ ~ BFRY(sigma)` scaling a density `lv` on (0, 1].
    Bfry { sigma: f64, lv: LevyDensity },
}

impl UrnModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            UrnModel::Ibp { c, theta } => {
                if !(*c > 0.0 && c.is_finite() && *theta > 0.0 && theta.is_finite()) {
                    return Err(Error::param(format!("ibp needs c, theta > 0, got c={c}, theta={theta}")));
                }
            }
            UrnModel::StableJot { alpha, pstar } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
                }
                pstar.validate()?;
            }
            UrnModel::Bfry { sigma, lv } => {
                if !(*sigma > 0.0 && *sigma < 1.0) {
                    return Err(Error::param(format!("sigma must lie in (0, 1), got {sigma}")));
                }
                let (lo, hi) = lv.support();
                if lo != 0.0 || hi > 1.0 {
                    return Err(Error::param(format!(
                        "bfry urn needs a density on (0, 1], got support ({lo}, {hi})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            UrnModel::Ibp { .. } => "ibp",
            UrnModel::StableJot { .. } => "stable_jot",
            UrnModel::Bfry { .. } => "bfry",
        }
    }
}

/// Inclusion probabilities and new-feature rates shared by the explicit and
/// the compressed urn.
#[derive(Debug)]
struct Engine {
    model: UrnModel,
    /// Increments `ψ_1, ψ_2, ...` (BFRY only).
    psi: Vec<f64>,
    /// Cumulative `τ_0 = 0, τ_1, ...` (BFRY only).
    tau: Vec<f64>,
    inclusion: HashMap<(u32, u32), f64>,
    zeta_grids: HashMap<(u32, u64), Arc<GridDistribution>>,
}

impl Engine {
    fn new(model: UrnModel) -> Result<Self> {
        model.validate()?;
        Ok(Engine {
            model,
            psi: Vec::new(),
            tau: vec![0.0],
            inclusion: HashMap::new(),
            zeta_grids: HashMap::new(),
        })
    }

    fn extend_psi(&mut self, k: usize) -> Result<()> {
        if let UrnModel::Bfry { lv, .. } = &self.model {
            while self.psi.len() < k {
                let next = self.psi.len() as u32 + 1;
                let v = lv.beta_moment(1, next, 1.0)?;
                self.psi.push(v);
                let t = self.tau[self.tau.len() - 1] + v;
                self.tau.push(t);
            }
        }
        Ok(())
    }

    /// Probability that a feature held by `m` of the first `n` rows is in
    /// row `n + 1`.
    fn inclusion(&mut self, n: u32, m: u32) -> Result<f64> {
        let p = match &self.model {
            UrnModel::Ibp { theta, .. } => m as f64 / (theta + n as f64),
            UrnModel::StableJot { alpha, .. } => (m as f64 - alpha) / (n as f64 + 1.0 - alpha),
            UrnModel::Bfry { lv, .. } => {
                if let Some(LevyFamily::StableBeta { theta, alpha, .. }) = lv.family() {
                    (m as f64 - alpha) / (theta + n as f64)
                } else if let Some(&p) = self.inclusion.get(&(n, m)) {
                    p
                } else {
                    let p = lv.beta_moment(m + 1, n + 1, 1.0)? / lv.beta_moment(m, n, 1.0)?;
                    self.inclusion.insert((n, m), p);
                    p
                }
            }
        };
        Ok(p)
    }

    /// Poisson rate of new features in row `n + 1` given `K_n = k`.
    fn new_rate(&mut self, n: u32, k: u64, rng: &mut RngStream) -> Result<f64> {
        match self.model.clone() {
            UrnModel::Ibp { c, theta } => Ok(c * theta / (theta + n as f64)),
            UrnModel::StableJot { alpha, pstar } => {
                let zeta = self.stable_zeta(alpha, &pstar, n, k, rng)?;
                Ok(zeta * alpha * lbeta(1.0 - alpha, n as f64 + 1.0).exp())
            }
            UrnModel::Bfry { sigma, .. } => {
                self.extend_psi(n as usize + 1)?;
                let zeta = sample_bfry_posterior(sigma, self.tau[n as usize], k, rng)?;
                Ok(zeta * self.psi[n as usize])
            }
        }
    }

    /// Draw of `ζ = (Δ°)^{-alpha}` given `n` rows with `k` features.
    fn stable_zeta(&mut self, alpha: f64, pstar: &ScalingLaw, n: u32, k: u64, rng: &mut RngStream) -> Result<f64> {
        let phi = stable_phi(alpha, alpha, n);
        let kf = k as f64;
        match *pstar {
            ScalingLaw::Fixed { a } => Ok(a.powf(-alpha)),
            // Λ(Δ_1) = ζ is a unit exponential
            ScalingLaw::LargestJump => Ok(gamma_draw(1.0 + kf, rng) / (1.0 + phi)),
            ScalingLaw::ZetaGamma { alpha: a2, shape, rate } if a2 == alpha => {
                Ok(gamma_draw(shape + kf, rng) / (rate + phi))
            }
            law => {
                if let Some(g) = self.zeta_grids.get(&(n, k)) {
                    return Ok(g.sample(rng));
                }
                let lv = LevyDensity::stable(alpha, alpha)?;
                let log_prior = |y: f64| {
                    let a = y.powf(-1.0 / alpha);
                    law.log_density(&lv, a).unwrap_or(f64::NEG_INFINITY) - alpha.ln() - (1.0 / alpha + 1.0) * y.ln()
                };
                let g = Arc::new(zeta_grid_posterior(log_prior, k as usize, phi)?);
                let z = g.sample(rng);
                self.zeta_grids.insert((n, k), g);
                Ok(z)
            }
        }
    }
}

/// Explicit urn: per-feature counts, one emitted row at a time.
#[derive(Debug)]
pub struct UrnState {
    engine: Engine,
    n: u32,
    counts: Vec<u32>,
    max_features: usize,
}

impl UrnState {
    pub fn new(model: UrnModel) -> Result<Self> {
        Ok(UrnState {
            engine: Engine::new(model)?,
            n: 0,
            counts: Vec::new(),
            max_features: DEFAULT_MAX_FEATURES,
        })
    }

    pub fn with_max_features(mut self, max_features: usize) -> Self {
        self.max_features = max_features;
        self
    }

    pub fn model(&self) -> &UrnModel {
        &self.engine.model
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn k_n(&self) -> usize {
        self.counts.len()
    }

    /// Emits the next row as feature ids; new features get the next free ids.
    /// Fails with a capacity error once `K_n` would exceed the feature cap.
    pub fn next_row(&mut self, rng: &mut RngStream) -> Result<Vec<u64>> {
        let n = self.n;
        let mut probs: Vec<(u32, f64)> = Vec::new();
        let mut row = Vec::new();
        for k in 0..self.counts.len() {
            let m = self.counts[k];
            let p = match probs.iter().find(|(v, _)| *v == m) {
                Some(&(_, p)) => p,
                None => {
                    let p = self.engine.inclusion(n, m)?;
                    probs.push((m, p));
                    p
                }
            };
            if rng.uniform() < p {
                row.push(k as u64);
            }
        }
        let rate = self.engine.new_rate(n, self.counts.len() as u64, rng)?;
        let fresh = poisson_count(rate, rng)?;
        let total = self.counts.len() as u64 + fresh;
        if total > self.max_features as u64 {
            return Err(Error::Capacity(format!(
                "urn would hold {total} features, cap is {}",
                self.max_features
            )));
        }
        for &k in &row {
            self.counts[k as usize] += 1;
        }
        for _ in 0..fresh {
            row.push(self.counts.len() as u64);
            self.counts.push(1);
        }
        self.n += 1;
        Ok(row)
    }

    /// Emits `rows` rows and collects them into a matrix.
    pub fn run(&mut self, rows: usize, rng: &mut RngStream) -> Result<FeatureMatrix> {
        let out = (0..rows).map(|_| self.next_row(rng)).collect::<Result<Vec<_>>>()?;
        FeatureMatrix::from_rows(&out)
    }
}

fn expect_model(state: &UrnState, name: &str) -> Result<()> {
    if state.model().name() == name {
        Ok(())
    } else {
        Err(Error::param(format!("expected a {name} urn, got {}", state.model().name())))
    }
}

pub fn ibp_next_row(state: &mut UrnState, rng: &mut RngStream) -> Result<Vec<u64>> {
    expect_model(state, "ibp")?;
    state.next_row(rng)
}

pub fn stable_jot_next_row(state: &mut UrnState, rng: &mut RngStream) -> Result<Vec<u64>> {
    expect_model(state, "stable_jot")?;
    state.next_row(rng)
}

pub fn bfry_next_row(state: &mut UrnState, rng: &mut RngStream) -> Result<Vec<u64>> {
    expect_model(state, "bfry")?;
    state.next_row(rng)
}

/// Writes `rows` rows to `out`, one line of comma-separated feature ids each.
pub fn write_rows<W: Write>(state: &mut UrnState, rows: usize, rng: &mut RngStream, mut out: W) -> Result<()> {
    for _ in 0..rows {
        let row = state.next_row(rng)?;
        let line: Vec<String> = row.iter().map(|k| k.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Compressed urn that only tracks how many features have each count, so
/// huge feature numbers cost nothing. Row sums are recorded as they go.
#[derive(Debug)]
pub struct CountUrn {
    engine: Engine,
    n: u32,
    /// Entry `m - 1` counts the features held by exactly `m` rows.
    by_count: Vec<u64>,
    row_sums: Vec<u64>,
}

impl CountUrn {
    pub fn new(model: UrnModel) -> Result<Self> {
        Ok(CountUrn {
            engine: Engine::new(model)?,
            n: 0,
            by_count: Vec::new(),
            row_sums: Vec::new(),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k_n(&self) -> u64 {
        self.by_count.iter().sum()
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn profile(&self) -> CountProfile {
        CountProfile {
            n: self.n,
            by_count: self.by_count.clone(),
        }
    }

    pub fn step(&mut self, rng: &mut RngStream) -> Result<()> {
        let n = self.n;
        let mut next = vec![0u64; n as usize + 1];
        let mut row = 0;
        for (i, &c) in self.by_count.iter().enumerate() {
            let m = i as u32 + 1;
            let moved = binomial(c, self.engine.inclusion(n, m)?, rng);
            next[i] += c - moved;
            next[i + 1] += moved;
            row += moved;
        }
        let k = self.k_n();
        let fresh = poisson_count(self.engine.new_rate(n, k, rng)?, rng)?;
        next[0] += fresh;
        self.by_count = next;
        self.row_sums.push(row + fresh);
        self.n += 1;
        Ok(())
    }

    pub fn run(&mut self, rows: usize, rng: &mut RngStream) -> Result<()> {
        (0..rows).try_for_each(|_| self.step(rng))
    }
}

/// Result of a hierarchical draw matched to an urn model.
#[derive(Clone, Debug)]
pub enum HierarchicalDraw {
    Matrix(FeatureMatrix),
    /// More than the feature cap; only `K_n` is reported.
    Overflow { k_n: u64 },
}

/// Above this expected feature count the hierarchical draw skips the jumps
/// and samples the column-sum profile of the Poisson process directly.
const AGGREGATE_ABOVE: f64 = 1e4;

/// Hierarchical counterpart of an urn: draw the random measure, then `n`
/// Bernoulli rows. When the measure carries more than [`AGGREGATE_ABOVE`]
/// expected features the columns are drawn from the exact Poisson law of
/// column patterns instead, and draws beyond `max_features` are reported as
/// overflow.
pub fn sample_hierarchical(
    model: &UrnModel,
    n: usize,
    trunc: &TruncationRule,
    max_features: usize,
    rng: &mut RngStream,
) -> Result<HierarchicalDraw> {
    model.validate()?;
    let lv = match model {
        UrnModel::Ibp { c, theta } => LevyDensity::beta_process(*c, *theta)?,
        UrnModel::StableJot { alpha, pstar } => {
            let st = LevyDensity::stable(*alpha, *alpha)?;
            let a = pstar.draw(&st, rng)?;
            st.conditional(a)?
        }
        UrnModel::Bfry { sigma, lv } => lv.scaled(sample_bfry_posterior(*sigma, 0.0, 0, rng)?)?,
    };
    let (_, hi) = lv.support();
    let rates = profile_rates(&lv, n as u32, hi)?;
    let expected: f64 = rates.iter().sum();
    let z = if expected > AGGREGATE_ABOVE {
        let k = poisson_count(expected, rng)?;
        if k > max_features as u64 {
            return Ok(HierarchicalDraw::Overflow { k_n: k });
        }
        let mut cols = Vec::with_capacity(k as usize);
        for id in 0..k {
            let mut u = rng.uniform() * expected;
            let mut m = rates.len();
            for (i, &r) in rates.iter().enumerate() {
                if u < r {
                    m = i + 1;
                    break;
                }
                u -= r;
            }
            cols.push(Column {
                id,
                rows: random_subset(n, m, rng),
            });
        }
        FeatureMatrix::new(n, cols)?
    } else {
        sample_scaled_matrix(&lv, 1.0, trunc, n, rng)?.0
    };
    let k = z.columns().len() as u64;
    if k > max_features as u64 {
        return Ok(HierarchicalDraw::Overflow { k_n: k });
    }
    Ok(HierarchicalDraw::Matrix(z))
}

// ---------------------------------------------------------------------------
// psi increments

fn check_unit_support(lv: &LevyDensity) -> Result<()> {
    let (_, hi) = lv.support();
    if hi > 1.0 {
        return Err(Error::param(format!("density must live on (0, 1], support ends at {hi}")));
    }
    Ok(())
}

/// `ψ_k = ∫_0^1 s (1-s)^{k-1} λ(s) ds` for `k = 1..n`.
pub fn psi_increments(lv: &LevyDensity, n: usize) -> Result<Vec<f64>> {
    check_unit_support(lv)?;
    (1..=n as u32).map(|k| lv.beta_moment(1, k, 1.0)).collect()
}

/// `τ_k = ψ_1 + ... + ψ_k` for `k = 1..n`.
pub fn psi_cumulative(lv: &LevyDensity, n: usize) -> Result<Vec<f64>> {
    let mut t = 0.0;
    Ok(psi_increments(lv, n)?
        .into_iter()
        .map(|p| {
            t += p;
            t
        })
        .collect())
}

// ---------------------------------------------------------------------------
// BFRY calculus

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("sigma must lie in (0, 1), got {sigma}")))
    }
}

/// `f(x, a, b) = (x a^b + (1-x)(1+a)^b)^{1/b}`.
pub fn bfry_f(x: f64, a: f64, b: f64) -> f64 {
    let l = log_add_exp(x.ln() + b * a.ln(), (1.0 - x).ln() + b * a.ln_1p());
    (l / b).exp()
}

/// `ln |Γ(x) (τ^{-x} - (1+τ)^{-x})|` for `x > -1`, `x != 0`; the product is
/// positive on that range.
fn ln_gamma_bracket(x: f64, tau: f64) -> Result<f64> {
    let b = -x;
    let ln_d = if tau == 0.0 {
        if b > 0.0 {
            0.0
        } else {
            return Err(Error::param("zero tau with features observed has no posterior"));
        }
    } else {
        b * tau.ln() + (b * (1.0 / tau).ln_1p()).exp_m1().abs().ln()
    };
    let ln_g = if x > 0.0 { lgamma(x) } else { lgamma(x + 1.0) - (-x).ln() };
    Ok(ln_g + ln_d)
}

/// Log density of `ζ | K = k` for `ζ ~ BFRY(sigma)` and `K | ζ ~ Poisson(ζ τ)`:
/// `z^{k-σ-1} e^{-zτ} (1-e^{-z}) / (Γ(k-σ)(τ^{σ-k} - (1+τ)^{σ-k}))`.
pub fn bfry_posterior_log_density(sigma: f64, tau: f64, k: u64, z: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if z <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let x = k as f64 - sigma;
    Ok((x - 1.0) * z.ln() - z * tau + (-(-z).exp_m1()).ln() - ln_gamma_bracket(x, tau)?)
}

/// Draw of `ζ | K = k` as `G / f(U, τ, σ - k)` with `G ~ Gamma(k + 1 - σ, 1)`
/// and `U` uniform; `τ = k = 0` gives `ζ ~ BFRY(σ)`.
pub fn sample_bfry_posterior(sigma: f64, tau: f64, k: u64, rng: &mut RngStream) -> Result<f64> {
    check_sigma(sigma)?;
    if !(tau >= 0.0 && tau.is_finite()) || (tau == 0.0 && k > 0) {
        return Err(Error::param(format!("need tau > 0 (or tau = 0 with k = 0), got tau={tau}, k={k}")));
    }
    let g = gamma_draw(k as f64 + 1.0 - sigma, rng);
    let u = rng.uniform();
    Ok(g / bfry_f(u, tau, sigma - k as f64))
}

fn ln_pmf_closed(sigma: f64, tau_next: f64, tau_prev: f64, j: u64, k: u64) -> Result<f64> {
    let d = tau_next - tau_prev;
    let jf = j as f64;
    let x = k as f64 - sigma;
    let lead = if j == 0 { 0.0 } else { jf * d.ln() };
    Ok(lead - lgamma(jf + 1.0) + ln_gamma_bracket(jf + x, tau_next)? - ln_gamma_bracket(x, tau_prev)?)
}

fn check_taus(tau_next: f64, tau_prev: f64, k: u64) -> Result<()> {
    if !(tau_next > tau_prev && tau_prev >= 0.0 && tau_next.is_finite()) {
        return Err(Error::param(format!(
            "need tau_next > tau_prev >= 0, got {tau_next}, {tau_prev}"
        )));
    }
    if tau_prev == 0.0 && k > 0 {
        return Err(Error::param("k > 0 requires tau_prev > 0"));
    }
    Ok(())
}

/// `P(H = j)` for `H ~ Poisson-BFRY(sigma, tau)`:
/// `P(0) = (1+τ)^σ - τ^σ` and
/// `P(j) = σ Γ(j-σ) / (Γ(1-σ) j!) τ^j (τ^{σ-j} - (1+τ)^{σ-j})`.
pub fn poisson_bfry_pmf(sigma: f64, tau: f64, j: u64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    Ok(ln_pmf_closed(sigma, tau, 0.0, j, 0)?.exp())
}

/// `P(H > j_max)` for `H ~ Poisson-BFRY(sigma, tau)`, from
/// `Σ_{j>J} Γ(j-σ)/Γ(j+1) = Γ(J+1-σ)/(σ Γ(J+1))` and a geometric series in
/// `ρ = τ/(1+τ)`.
pub fn poisson_bfry_tail(sigma: f64, tau: f64, j_max: u64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param(format!("tau must be positive, got {tau}")));
    }
    let ln_rho = (tau / (1.0 + tau)).ln();
    let pre = sigma.ln() + sigma * tau.ln() - lgamma(1.0 - sigma);
    let first = (lgamma(j_max as f64 + 1.0 - sigma) - sigma.ln() - lgamma(j_max as f64 + 1.0)).exp();
    let mut series = 0.0;
    let mut j = j_max + 1;
    loop {
        let jf = j as f64;
        let t = (lgamma(jf - sigma) - lgamma(jf + 1.0) + (jf - sigma) * ln_rho).exp();
        series += t;
        if t <= 1e-18 * series || j > j_max + 100_000_000 {
            if t > 1e-18 * series {
                return Err(Error::NonConvergence {
                    routine: "poisson_bfry_tail",
                    detail: format!("series in rho={} did not settle", ln_rho.exp()),
                });
            }
            break;
        }
        j += 1;
    }
    Ok((pre.exp() * (first - series)).max(0.0))
}

/// `P(H_{n+1} = j | K_n = k)` by integrating `Poisson(j; (τ_next - τ_prev) z)`
/// against the density of `ζ | K_n = k` at `τ_prev`.
pub fn bfry_increment_pmf(sigma: f64, tau_next: f64, tau_prev: f64, j: u64, k: u64) -> Result<f64> {
    check_sigma(sigma)?;
    check_taus(tau_next, tau_prev, k)?;
    let d = tau_next - tau_prev;
    let jf = j as f64;
    let norm = ln_gamma_bracket(k as f64 - sigma, tau_prev)?;
    let x = k as f64 - sigma;
    let f = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        let l = jf * (d * z).ln() - d * z - lgamma(jf + 1.0) + (x - 1.0) * z.ln() - z * tau_prev
            + (-(-z).exp_m1()).ln()
            - norm;
        l.exp()
    };
    quad_rel(f, 0.0, f64::INFINITY, 1e-11)
}

/// Gamma-function form of [`bfry_increment_pmf`]:
/// `Δ^j / j! Γ(j+k-σ)/Γ(k-σ) [τ'^{b} - (1+τ')^{b}] / [τ^{σ-k} - (1+τ)^{σ-k}]`
/// with `b = σ-k-j`, `τ' = tau_next`, `τ = tau_prev`, `Δ = τ' - τ`.
pub fn bfry_increment_pmf_closed(sigma: f64, tau_next: f64, tau_prev: f64, j: u64, k: u64) -> Result<f64> {
    check_sigma(sigma)?;
    check_taus(tau_next, tau_prev, k)?;
    Ok(ln_pmf_closed(sigma, tau_next, tau_prev, j, k)?.exp())
}

/// An alternative closed form for `p_{σ,a,b}(j,k)`, with a plus sign in the
/// denominator. It does not agree with the mixture integral (see
/// [`bfry_increment_pmf`]) and is kept only for comparison.
pub fn bfry_pmf_alternate(sigma: f64, a: f64, b: f64, j: u64, k: u64) -> f64 {
    use statrs::function::gamma::gamma;
    let (jf, kf) = (j as f64, k as f64);
    gamma(kf + jf - sigma) * (a - b).powf(jf) / (gamma(jf + 1.0) * gamma(-sigma))
        * (a.powf(-sigma - jf) - (1.0 + a).powf(sigma - jf))
        / (b.powf(sigma - kf) + (1.0 + b).powf(sigma - kf))
}
