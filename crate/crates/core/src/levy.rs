//! Lévy densities, their tails and inverse tails, and ranked jumps.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gk15, incomplete_beta, lbeta, quad, quad_rel, RngStream};

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Parametric families plus a user-supplied density.
#[derive(Clone)]
pub enum LevyFamily {
    /// `theta / s` on (0, 1].
    ScaleInvariant { theta: f64 },
    /// `c s^{-1-alpha}` on (0, inf).
    Stable { c: f64, alpha: f64 },
    /// `c theta s^{-1} (1-s)^{theta-1}` on (0, 1).
    BetaProcess { c: f64, theta: f64 },
    /// `coef s^{-1-alpha} (1-s)^{theta+alpha-1}` on (0, 1), `theta > -alpha`.
    StableBeta { coef: f64, theta: f64, alpha: f64 },
    /// `theta s^{-1} e^{-s}` on (0, inf).
    Gamma { theta: f64 },
    /// Arbitrary density on `(lo, hi)`; tails are computed numerically.
    Custom {
        name: String,
        density: DensityFn,
        lo: f64,
        hi: f64,
    },
}

impl fmt::Debug for LevyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevyFamily::ScaleInvariant { theta } => write!(f, "scale_invariant(theta={theta})"),
            LevyFamily::Stable { c, alpha } => write!(f, "stable(c={c}, alpha={alpha})"),
            LevyFamily::BetaProcess { c, theta } => write!(f, "beta_process(c={c}, theta={theta})"),
            LevyFamily::StableBeta { coef, theta, alpha } => {
                write!(f, "stable_beta(coef={coef}, theta={theta}, alpha={alpha})")
            }
            LevyFamily::Gamma { theta } => write!(f, "gamma(theta={theta})"),
            LevyFamily::Custom { name, lo, hi, .. } => write!(f, "custom({name}, [{lo}, {hi}])"),
        }
    }
}

#[derive(Clone)]
enum Kind {
    Family(LevyFamily),
    /// `a * base(a s)` restricted to `s <= 1`.
    Conditional { base: LevyDensity, a: f64 },
    /// `zeta * base(s)`.
    Scaled { base: LevyDensity, zeta: f64 },
    /// `h(s) * base(s)` for `0 <= h <= 1`.
    Tilted {
        base: LevyDensity,
        h: DensityFn,
        label: String,
    },
}

struct Inner {
    kind: Kind,
    lo: f64,
    hi: f64,
    table: OnceLock<std::result::Result<TailTable, Error>>,
}

/// A Lévy density on `(lo, hi]` with its tail `Λ(s) = ∫_s^hi λ`.
#[derive(Clone)]
pub struct LevyDensity(Arc<Inner>);

impl fmt::Debug for LevyDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

fn check_pos(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs()))
}

impl LevyDensity {
    pub fn new(family: LevyFamily) -> Result<Self> {
        let (lo, hi) = match &family {
            LevyFamily::ScaleInvariant { theta } => {
                check_pos("theta", *theta)?;
                (0.0, 1.0)
            }
            LevyFamily::Stable { c, alpha } => {
                check_pos("c", *c)?;
                check_alpha(*alpha)?;
                (0.0, f64::INFINITY)
            }
            LevyFamily::BetaProcess { c, theta } => {
                check_pos("c", *c)?;
                check_pos("theta", *theta)?;
                (0.0, 1.0)
            }
            LevyFamily::StableBeta { coef, theta, alpha } => {
                check_pos("coef", *coef)?;
                check_alpha(*alpha)?;
                if !(theta.is_finite() && *theta > -alpha) {
                    return Err(Error::param(format!(
                        "stable_beta needs theta > -alpha, got theta={theta}, alpha={alpha}"
                    )));
                }
                (0.0, 1.0)
            }
            LevyFamily::Gamma { theta } => {
                check_pos("theta", *theta)?;
                (0.0, f64::INFINITY)
            }
            LevyFamily::Custom { density, lo, hi, .. } => {
                if !(lo.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(Error::param(format!("custom support must satisfy 0 <= lo < hi, got [{lo}, {hi}]")));
                }
                validate_custom(density, *lo, *hi)?;
                (*lo, *hi)
            }
        };
        Ok(Self::from_kind(Kind::Family(family), lo, hi))
    }

    fn from_kind(kind: Kind, lo: f64, hi: f64) -> Self {
        LevyDensity(Arc::new(Inner {
            kind,
            lo,
            hi,
            table: OnceLock::new(),
        }))
    }

    pub fn scale_invariant(theta: f64) -> Result<Self> {
        Self::new(LevyFamily::ScaleInvariant { theta })
    }

    pub fn stable(c: f64, alpha: f64) -> Result<Self> {
        Self::new(LevyFamily::Stable { c, alpha })
    }

    pub fn beta_process(c: f64, theta: f64) -> Result<Self> {
        Self::new(LevyFamily::BetaProcess { c, theta })
    }

    /// Stable-beta with raw leading coefficient.
    pub fn stable_beta(coef: f64, theta: f64, alpha: f64) -> Result<Self> {
        Self::new(LevyFamily::StableBeta { coef, theta, alpha })
    }

    /// Stable-beta with mass parameter `c`, i.e. coefficient `c / B(theta+alpha, 1-alpha)`.
    pub fn stable_beta_normalized(c: f64, theta: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(theta > -alpha) {
            return Err(Error::param("stable_beta needs theta > -alpha"));
        }
        let coef = c / lbeta(theta + alpha, 1.0 - alpha).exp();
        Self::stable_beta(coef, theta, alpha)
    }

    /// `alpha s^{-1-alpha} (1-s)^{alpha-1}`, the image of the stable density
    /// `alpha s^{-1-alpha}` under `s -> s/(1+s)`. Its tail is `((1-s)/s)^alpha`.
    pub fn beta_process_alpha(alpha: f64) -> Result<Self> {
        Self::stable_beta(alpha, 0.0, alpha)
    }

    pub fn gamma(theta: f64) -> Result<Self> {
        Self::new(LevyFamily::Gamma { theta })
    }

    pub fn custom<F>(name: &str, density: F, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(LevyFamily::Custom {
            name: name.to_string(),
            density: Arc::new(density),
            lo,
            hi,
        })
    }

    pub fn family(&self) -> Option<&LevyFamily> {
        match &self.0.kind {
            Kind::Family(f) => Some(f),
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.0.lo, self.0.hi)
    }

    pub fn describe(&self) -> String {
        match &self.0.kind {
            Kind::Family(f) => format!("{f:?}"),
            Kind::Conditional { base, a } => format!("conditional({}, a={a})", base.describe()),
            Kind::Scaled { base, zeta } => format!("scaled({}, zeta={zeta})", base.describe()),
            Kind::Tilted { base, label, .. } => format!("tilted({}, {label})", base.describe()),
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        self.density_c(s, self.0.hi - s)
    }

    /// Density at `s` given `sc = hi - s` computed without cancellation.
    fn density_c(&self, s: f64, sc: f64) -> f64 {
        if !(s > self.0.lo && sc > 0.0) {
            return 0.0;
        }
        match &self.0.kind {
            Kind::Family(f) => match *f {
                LevyFamily::ScaleInvariant { theta } => theta / s,
                LevyFamily::Stable { c, alpha } => c * s.powf(-1.0 - alpha),
                LevyFamily::BetaProcess { c, theta } => c * theta / s * sc.powf(theta - 1.0),
                LevyFamily::StableBeta { coef, theta, alpha } => {
                    coef * s.powf(-1.0 - alpha) * sc.powf(theta + alpha - 1.0)
                }
                LevyFamily::Gamma { theta } => theta * (-s).exp() / s,
                LevyFamily::Custom { ref density, .. } => {
                    if s < self.0.hi {
                        density(s)
                    } else {
                        0.0
                    }
                }
            },
            Kind::Conditional { base, a } => {
                let bhi = base.0.hi;
                let bsc = if bhi / a <= 1.0 { a * sc } else { bhi - a * s };
                a * base.density_c(a * s, bsc)
            }
            Kind::Scaled { base, zeta } => zeta * base.density_c(s, sc),
            Kind::Tilted { base, h, .. } => {
                let d = base.density_c(s, sc);
                if d == 0.0 {
                    0.0
                } else {
                    h(s) * d
                }
            }
        }
    }

    /// `λ(s) e^{-Λ(s)}`, the density of the largest jump.
    pub fn largest_jump_pdf(&self, s: f64) -> Result<f64> {
        let d = self.density(s);
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(d * (-self.tail(s)?).exp())
    }

    pub fn has_closed_tail(&self) -> bool {
        match &self.0.kind {
            Kind::Family(f) => family_closed(f),
            Kind::Conditional { base, .. } | Kind::Scaled { base, .. } => base.has_closed_tail(),
            Kind::Tilted { .. } => false,
        }
    }

    /// `Λ(s) = ∫_s^hi λ(u) du`.
    pub fn tail(&self, s: f64) -> Result<f64> {
        if s.is_nan() {
            return Err(Error::param("tail argument is NaN"));
        }
        if s >= self.0.hi {
            return Ok(0.0);
        }
        if s <= self.0.lo {
            return Ok(self.total_mass());
        }
        match &self.0.kind {
            Kind::Family(f) => {
                if let Some(v) = family_tail(f, s) {
                    return Ok(v);
                }
                self.table()?.tail(self, s)
            }
            Kind::Conditional { base, a } => {
                let top = base.tail(a.min(base.0.hi))?;
                Ok((base.tail(a * s)? - top).max(0.0))
            }
            Kind::Scaled { base, zeta } => Ok(zeta * base.tail(s)?),
            Kind::Tilted { .. } => self.table()?.tail(self, s),
        }
    }

    /// Generalized inverse of the tail: the `s` with `Λ(s) = t`.
    /// Returns `hi` for `t = 0` and `0` once `t` reaches the total mass.
    pub fn inv_tail(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t.is_infinite() {
            return Err(Error::param(format!("inverse tail needs finite t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(self.0.hi);
        }
        if t >= self.total_mass() {
            return Ok(0.0);
        }
        match &self.0.kind {
            Kind::Family(f) => {
                if let Some(v) = family_inv(f, t) {
                    return Ok(v);
                }
                self.table()?.inv(self, t)
            }
            Kind::Conditional { base, a } => {
                let top = base.tail(a.min(base.0.hi))?;
                Ok(base.inv_tail(t + top)? / a)
            }
            Kind::Scaled { base, zeta } => base.inv_tail(t / zeta),
            Kind::Tilted { .. } => self.table()?.inv(self, t),
        }
    }

    /// `Λ(lo+)`; infinite for infinite-activity densities.
    pub fn total_mass(&self) -> f64 {
        match &self.0.kind {
            Kind::Family(LevyFamily::Custom { .. }) | Kind::Tilted { .. } => match self.table() {
                Ok(t) => t.total,
                Err(_) => f64::INFINITY,
            },
            Kind::Family(_) => f64::INFINITY,
            Kind::Conditional { base, a } => {
                let m = base.total_mass();
                if m.is_infinite() {
                    m
                } else {
                    m - base.tail(a.min(base.0.hi)).unwrap_or(0.0)
                }
            }
            Kind::Scaled { base, zeta } => zeta * base.total_mass(),
        }
    }

    /// `∫_lo^x s λ(s) ds`, the expected mass of jumps below `x`.
    pub fn mass_below(&self, x: f64) -> Result<f64> {
        if x <= self.0.lo {
            return Ok(0.0);
        }
        let x = x.min(self.0.hi);
        match &self.0.kind {
            Kind::Family(f) => match *f {
                LevyFamily::ScaleInvariant { theta } => Ok(theta * x),
                LevyFamily::Stable { c, alpha } => Ok(c * x.powf(1.0 - alpha) / (1.0 - alpha)),
                LevyFamily::BetaProcess { c, theta } => Ok(c * (1.0 - (1.0 - x).powf(theta))),
                LevyFamily::StableBeta { coef, theta, alpha } => {
                    let (p, q) = (1.0 - alpha, theta + alpha);
                    Ok(coef * lbeta(p, q).exp() * incomplete_beta(x, p, q)?)
                }
                LevyFamily::Gamma { theta } => Ok(-theta * (-x).exp_m1()),
                LevyFamily::Custom { .. } => self.mass_below_quad(x),
            },
            Kind::Conditional { base, a } => Ok(base.mass_below(a * x)? / a),
            Kind::Scaled { base, zeta } => Ok(zeta * base.mass_below(x)?),
            Kind::Tilted { .. } => self.mass_below_quad(x),
        }
    }

    /// `∫_lo^x s^m (1-s)^{n-m} λ(s) ds` for `1 <= m <= n`, with `x` capped at
    /// `min(hi, 1)`. Times `C(n, m)`, this is the rate of features whose
    /// column sum over `n` Bernoulli rows is `m`, from jumps below `x`.
    pub fn beta_moment(&self, m: u32, n: u32, x: f64) -> Result<f64> {
        if m == 0 || m > n {
            return Err(Error::param(format!("beta moment needs 1 <= m <= n, got m={m}, n={n}")));
        }
        let x = x.min(self.0.hi).min(1.0);
        if x <= self.0.lo {
            return Ok(0.0);
        }
        let (mf, rest) = (m as f64, (n - m) as f64);
        let ib = |p: f64, q: f64| -> Result<f64> { Ok(lbeta(p, q).exp() * incomplete_beta(x, p, q)?) };
        match &self.0.kind {
            Kind::Family(f) => match *f {
                LevyFamily::ScaleInvariant { theta } => Ok(theta * ib(mf, rest + 1.0)?),
                LevyFamily::Stable { c, alpha } => Ok(c * ib(mf - alpha, rest + 1.0)?),
                LevyFamily::BetaProcess { c, theta } => Ok(c * theta * ib(mf, rest + theta)?),
                LevyFamily::StableBeta { coef, theta, alpha } => Ok(coef * ib(mf - alpha, rest + theta + alpha)?),
                _ => self.beta_moment_quad(m, n, x),
            },
            Kind::Conditional { base, a } => match base.family() {
                Some(LevyFamily::Stable { c, alpha }) => Ok(c * a.powf(-alpha) * ib(mf - alpha, rest + 1.0)?),
                Some(LevyFamily::ScaleInvariant { theta }) => Ok(theta * ib(mf, rest + 1.0)?),
                _ => self.beta_moment_quad(m, n, x),
            },
            Kind::Scaled { base, zeta } => Ok(zeta * base.beta_moment(m, n, x)?),
            Kind::Tilted { .. } => self.beta_moment_quad(m, n, x),
        }
    }

    fn beta_moment_quad(&self, m: u32, n: u32, x: f64) -> Result<f64> {
        let (mi, ri) = (m as i32, (n - m) as i32);
        let f = |s: f64| {
            let d = self.density(s);
            if d == 0.0 {
                0.0
            } else {
                s.powi(mi) * (1.0 - s).powi(ri) * d
            }
        };
        quad_rel(f, self.0.lo, x, 1e-12)
    }

    fn mass_below_quad(&self, x: f64) -> Result<f64> {
        quad_rel(|s| s * self.density(s), self.0.lo, x, 1e-12)
    }

    /// `a λ(a s)` on `(0, min(1, hi/a)]`: the jumps below `a`, rescaled by `a`.
    pub fn conditional(&self, a: f64) -> Result<LevyDensity> {
        check_pos("a", a)?;
        let lo = self.0.lo / a;
        let hi = (self.0.hi / a).min(1.0);
        if !(hi > lo) {
            return Err(Error::param(format!("conditional density is empty for a={a}")));
        }
        Ok(Self::from_kind(
            Kind::Conditional {
                base: self.clone(),
                a,
            },
            lo,
            hi,
        ))
    }

    /// `zeta λ`.
    pub fn scaled(&self, zeta: f64) -> Result<LevyDensity> {
        check_pos("zeta", zeta)?;
        Ok(Self::from_kind(
            Kind::Scaled {
                base: self.clone(),
                zeta,
            },
            self.0.lo,
            self.0.hi,
        ))
    }

    /// `h λ` for a thinning function `h` with values in `[0, 1]`.
    pub fn tilted<F>(&self, label: &str, h: F) -> LevyDensity
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_kind(
            Kind::Tilted {
                base: self.clone(),
                h: Arc::new(h),
                label: label.to_string(),
            },
            self.0.lo,
            self.0.hi,
        )
    }

    fn table(&self) -> Result<&TailTable> {
        self.0
            .table
            .get_or_init(|| TailTable::build(self))
            .as_ref()
            .map_err(|e| e.clone())
    }
}

fn validate_custom(density: &DensityFn, lo: f64, hi: f64) -> Result<()> {
    for k in 1..40 {
        let s = if hi.is_finite() {
            lo + (hi - lo) * k as f64 / 40.0
        } else {
            lo + (k as f64 / 4.0).exp() * 1e-3
        };
        let v = density(s);
        if !(v >= 0.0) || v.is_infinite() {
            return Err(Error::param(format!("custom density is negative or not finite at s={s}")));
        }
    }
    let cut = 1f64.max(lo).min(hi);
    let mut ok = true;
    if cut > lo {
        ok &= matches!(quad(|s| s * density(s), lo, cut, 1e-10), Ok(r) if r.value.is_finite());
    }
    if hi > cut {
        ok &= matches!(quad(|s| density(s), cut, hi, 1e-10), Ok(r) if r.value.is_finite());
    }
    if ok {
        Ok(())
    } else {
        Err(Error::param(
            "custom density does not integrate min(s,1) against ds: not a Lévy density",
        ))
    }
}

fn family_closed(f: &LevyFamily) -> bool {
    match *f {
        LevyFamily::ScaleInvariant { .. } | LevyFamily::Stable { .. } => true,
        LevyFamily::BetaProcess { theta, .. } => close(theta, 1.0),
        LevyFamily::StableBeta { theta, alpha, .. } => theta == 0.0 || close(theta, 1.0 - alpha),
        LevyFamily::Gamma { .. } | LevyFamily::Custom { .. } => false,
    }
}

fn family_tail(f: &LevyFamily, s: f64) -> Option<f64> {
    match *f {
        LevyFamily::ScaleInvariant { theta } => Some(-theta * s.ln()),
        LevyFamily::Stable { c, alpha } => Some(c / alpha * s.powf(-alpha)),
        LevyFamily::BetaProcess { c, theta } if close(theta, 1.0) => Some(-c * s.ln()),
        LevyFamily::StableBeta { coef, theta: 0.0, alpha } => {
            Some(coef / alpha * ((1.0 - s) / s).powf(alpha))
        }
        LevyFamily::StableBeta { coef, theta, alpha } if close(theta, 1.0 - alpha) => {
            Some(coef / alpha * (s.powf(-alpha) - 1.0))
        }
        _ => None,
    }
}

fn family_inv(f: &LevyFamily, t: f64) -> Option<f64> {
    match *f {
        LevyFamily::ScaleInvariant { theta } => Some((-t / theta).exp()),
        LevyFamily::Stable { c, alpha } => Some((alpha * t / c).powf(-1.0 / alpha)),
        LevyFamily::BetaProcess { c, theta } if close(theta, 1.0) => Some((-t / c).exp()),
        LevyFamily::StableBeta { coef, theta: 0.0, alpha } => {
            Some(1.0 / (1.0 + (alpha * t / coef).powf(1.0 / alpha)))
        }
        LevyFamily::StableBeta { coef, theta, alpha } if close(theta, 1.0 - alpha) => {
            Some((alpha * t / coef + 1.0).powf(-1.0 / alpha))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// numeric tails

const X_FLOOR: f64 = -460.0;
const X_STEP: f64 = 0.25;
/// `hi - s` underflows past this logit coordinate.
const LOGIT_X_MAX: f64 = 700.0;
/// Table construction stops once the tail exceeds this.
const LAMBDA_CAP: f64 = 1e200;

#[derive(Clone, Copy)]
enum Map {
    /// `s = lo + w / (1 + e^{-x})`
    Logit { lo: f64, w: f64 },
    /// `s = lo + e^x`
    Log { lo: f64 },
}

impl Map {
    fn s(&self, x: f64) -> f64 {
        match *self {
            Map::Logit { lo, w } => lo + w / (1.0 + (-x).exp()),
            Map::Log { lo } => lo + x.exp(),
        }
    }

    /// `hi - s(x)`, exact for the logit map.
    fn sc(&self, x: f64) -> f64 {
        match *self {
            Map::Logit { w, .. } => w / (1.0 + x.exp()),
            Map::Log { .. } => f64::INFINITY,
        }
    }

    fn ds(&self, x: f64) -> f64 {
        match *self {
            Map::Logit { w, .. } => {
                let p = 1.0 / (1.0 + (-x).exp());
                let q = 1.0 / (1.0 + x.exp());
                w * p * q
            }
            Map::Log { .. } => x.exp(),
        }
    }

    fn x(&self, s: f64) -> f64 {
        match *self {
            Map::Logit { lo, w } => ((s - lo) / (lo + w - s)).ln(),
            Map::Log { lo } => (s - lo).ln(),
        }
    }
}

/// Tail values on a grid in a transformed coordinate, refined locally with a
/// single Gauss-Kronrod panel.
struct TailTable {
    map: Map,
    x_min: f64,
    x_max: f64,
    lam: Vec<f64>,
    total: f64,
}

impl TailTable {
    fn build(lv: &LevyDensity) -> std::result::Result<TailTable, Error> {
        let (lo, hi) = lv.support();
        let (map, x_max) = if hi.is_finite() {
            (Map::Logit { lo, w: hi - lo }, LOGIT_X_MAX)
        } else {
            (Map::Log { lo }, 60.0)
        };
        let g = |x: f64| {
            let d = lv.density_c(map.s(x), map.sc(x));
            if d == 0.0 {
                0.0
            } else {
                d * map.ds(x)
            }
        };
        let top = match map {
            Map::Logit { .. } => {
                // g decays like e^{-k x} near hi; integrate that tail in closed form
                let (g0, g1) = (g(x_max - X_STEP), g(x_max));
                if g1 > 0.0 && g0 > g1 {
                    g1 * X_STEP / (g0 / g1).ln()
                } else {
                    0.0
                }
            }
            Map::Log { .. } => {
                let top = map.s(x_max);
                quad(|s| lv.density(s), top, hi, 1e-13)?.value
            }
        };
        let mut lam = vec![top];
        // walk down from x_max; lam is collected top-down and reversed below
        let mut b = x_max;
        let mut capped = false;
        while b - X_STEP >= X_FLOOR {
            let a = b - X_STEP;
            let prev = *lam.last().expect("non-empty");
            let (mut v, e) = gk15(&g, a, b);
            if !v.is_finite() {
                capped = true;
                break;
            }
            if e > 1e-13 * (v.abs() + prev) {
                // fixed refinement; near hi the density is limited by rounding
                // of 1 - s and adaptive refinement would not terminate
                let h = X_STEP / 16.0;
                v = (0..16).map(|k| gk15(&g, a + k as f64 * h, a + (k + 1) as f64 * h).0).sum();
            }
            lam.push(prev + v);
            b = a;
            if prev + v > LAMBDA_CAP {
                capped = true;
                break;
            }
        }
        lam.reverse();
        let x_min = b;
        if !lam[0].is_finite() {
            return Err(Error::Numerical(format!("tail of {} is not finite", lv.describe())));
        }
        let bottom = map.s(x_min);
        let total = if capped {
            f64::INFINITY
        } else if bottom > lo {
            match quad(|s| lv.density(s), lo, bottom, 1e-10) {
                Ok(r) if r.value.is_finite() => lam[0] + r.value,
                _ => f64::INFINITY,
            }
        } else {
            lam[0]
        };
        Ok(TailTable {
            map,
            x_min,
            x_max,
            lam,
            total,
        })
    }

    fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * X_STEP
    }

    fn g(&self, lv: &LevyDensity, x: f64) -> f64 {
        let d = lv.density_c(self.map.s(x), self.map.sc(x));
        if d == 0.0 {
            0.0
        } else {
            d * self.map.ds(x)
        }
    }

    fn partial(&self, lv: &LevyDensity, x: f64, i: usize) -> f64 {
        let b = self.node(i + 1);
        if x >= b {
            return self.lam[i + 1];
        }
        let g = |u: f64| self.g(lv, u);
        self.lam[i + 1] + gk15(&g, x, b).0
    }

    fn tail(&self, lv: &LevyDensity, s: f64) -> Result<f64> {
        let (_, hi) = lv.support();
        let x = self.map.x(s);
        if x >= self.x_max {
            return Ok(quad(|u| lv.density(u), s, hi, 1e-13)?.value);
        }
        if x < self.x_min {
            let bottom = self.map.s(self.x_min);
            return Ok(self.lam[0] + quad(|u| lv.density(u), s, bottom, 1e-12)?.value);
        }
        let i = (((x - self.x_min) / X_STEP).floor() as usize).min(self.lam.len() - 2);
        Ok(self.partial(lv, x, i))
    }

    fn inv(&self, lv: &LevyDensity, t: f64) -> Result<f64> {
        let n = self.lam.len() - 1;
        let (lo, hi) = lv.support();
        if t <= self.lam[n] {
            return invert_by_bisection(|s| self.tail(lv, s), t, self.map.s(self.x_max), hi);
        }
        if t > self.lam[0] {
            return invert_by_bisection(|s| self.tail(lv, s), t, lo, self.map.s(self.x_min));
        }
        // lam is decreasing: find i with lam[i] >= t > lam[i+1]
        let (mut a, mut b) = (0usize, n);
        while b - a > 1 {
            let m = (a + b) / 2;
            if self.lam[m] >= t {
                a = m;
            } else {
                b = m;
            }
        }
        let i = a;
        let (mut xl, mut xr) = (self.node(i), self.node(i + 1));
        let span = self.lam[i] - self.lam[i + 1];
        let mut x = if span > 0.0 {
            xl + (self.lam[i] - t) / span * X_STEP
        } else {
            0.5 * (xl + xr)
        };
        for _ in 0..200 {
            let f = self.partial(lv, x, i) - t;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                xl = x;
            } else {
                xr = x;
            }
            if xr - xl < 1e-13 {
                break;
            }
            let d = self.g(lv, x);
            let mut nx = if d > 0.0 { x + f / d } else { f64::NAN };
            if !(nx > xl && nx < xr) {
                nx = 0.5 * (xl + xr);
            }
            if (nx - x).abs() < 1e-14 * (1.0 + x.abs()) {
                x = nx;
                break;
            }
            x = nx;
        }
        Ok(self.map.s(x))
    }
}

/// Solve `tail(s) = t` for a decreasing `tail` on `(lo, hi)` by bisection to
/// a relative width of `1e-12`.
pub(crate) fn invert_by_bisection<F: Fn(f64) -> Result<f64>>(
    tail: F,
    t: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut a = if lo > 0.0 { lo } else { 1e-300 };
    let mut b = if hi.is_finite() { hi } else { a.max(1.0) };
    while hi.is_infinite() && tail(b)? > t {
        b *= 2.0;
        if b > 1e300 {
            return Err(Error::NonConvergence {
                routine: "inverse tail",
                detail: format!("no upper bracket for t={t}"),
            });
        }
    }
    for _ in 0..3000 {
        if b - a <= 1e-12 * b {
            break;
        }
        let m = if a > 0.0 && b / a > 4.0 {
            (a * b).sqrt()
        } else {
            0.5 * (a + b)
        };
        if tail(m)? > t {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

// ---------------------------------------------------------------------------
// Dickman density

/// Density of the total mass of the scale-invariant process `c/s` on (0, 1].
///
/// On (0, 1] the density is proportional to `t^{c-1}`. Beyond 1 the
/// integrated form `t g(t) = c (G(t) - G(t-1))` gives
/// `G(t) = t^c (G(1) - c ∫_1^t u^{-c-1} G(u-1) du)`, which is stepped on a
/// uniform grid with one Gauss-Kronrod panel per cell and cubic Hermite
/// interpolation of the lagged cdf.
#[derive(Clone, Debug)]
pub struct Dickman {
    c: f64,
    cdf_raw: Vec<f64>,
    pdf_raw: Vec<f64>,
    norm: f64,
    horizon: f64,
}

const DICKMAN_CELLS: usize = 4096;
const DICKMAN_MAX_T: f64 = 400.0;

impl Dickman {
    pub fn new(c: f64) -> Result<Self> {
        check_pos("c", c)?;
        let n = DICKMAN_CELLS;
        let h = 1.0 / n as f64;
        let mut big = Vec::with_capacity(16 * n);
        let mut small = Vec::with_capacity(16 * n);
        for i in 0..=n {
            let t = i as f64 * h;
            big.push(t.powf(c) / c);
            small.push(if i == 0 { 0.0 } else { t.powf(c - 1.0) });
        }
        let g1 = big[n];
        let mut acc = 0.0;
        let mut peak: f64 = 1.0;
        let mut unit_max: f64 = 0.0;
        let mut i = n;
        loop {
            let (a, b) = ((i as f64) * h, (i + 1) as f64 * h);
            let f = |u: f64| u.powf(-c - 1.0) * lagged(&big, &small, c, h, u - 1.0);
            acc += gk15(&f, a, b).0;
            let big_b = b.powf(c) * (g1 - c * acc);
            let g_b = (c * (big_b - lagged(&big, &small, c, h, b - 1.0)) / b).max(0.0);
            big.push(big_b);
            small.push(g_b);
            i += 1;
            peak = peak.max(g_b);
            unit_max = unit_max.max(g_b);
            if i.is_multiple_of(n) {
                if unit_max < 1e-12 * peak {
                    break;
                }
                unit_max = 0.0;
                if b >= DICKMAN_MAX_T {
                    return Err(Error::NonConvergence {
                        routine: "dickman solver",
                        detail: format!("density still above 1e-12 of its peak at t={b}"),
                    });
                }
            }
        }
        let norm = *big.last().expect("non-empty");
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(format!("dickman normalizer {norm} for c={c}")));
        }
        Ok(Dickman {
            c,
            horizon: i as f64 * h,
            cdf_raw: big,
            pdf_raw: small,
            norm,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Point beyond which the density is treated as zero.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::param(format!("dickman density needs t > 0, got {t}")));
        }
        if t <= 1.0 {
            return Ok(t.powf(self.c - 1.0) / self.norm);
        }
        if t >= self.horizon {
            return Ok(0.0);
        }
        let h = 1.0 / DICKMAN_CELLS as f64;
        let big_t = lagged(&self.cdf_raw, &self.pdf_raw, self.c, h, t);
        let big_l = lagged(&self.cdf_raw, &self.pdf_raw, self.c, h, t - 1.0);
        Ok((self.c * (big_t - big_l) / t).max(0.0) / self.norm)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.horizon {
            return 1.0;
        }
        let h = 1.0 / DICKMAN_CELLS as f64;
        (lagged(&self.cdf_raw, &self.pdf_raw, self.c, h, t) / self.norm).min(1.0)
    }
}

/// Unnormalized cdf at `x`: closed form on [0, 1], Hermite interpolation beyond.
fn lagged(big: &[f64], small: &[f64], c: f64, h: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= 1.0 {
        return x.powf(c) / c;
    }
    let u = x / h;
    let i = (u.floor() as usize).min(big.len() - 2);
    let r = u - i as f64;
    let (y0, y1, d0, d1) = (big[i], big[i + 1], small[i] * h, small[i + 1] * h);
    let r2 = r * r;
    let r3 = r2 * r;
    (2.0 * r3 - 3.0 * r2 + 1.0) * y0 + (r3 - 2.0 * r2 + r) * d0 + (-2.0 * r3 + 3.0 * r2) * y1 + (r3 - r2) * d1
}

/// Density of the scale-invariant total mass with rate `c`, evaluated at `t`.
pub fn dickman_pdf(c: f64, t: f64) -> Result<f64> {
    Dickman::new(c)?.pdf(t)
}

// ---------------------------------------------------------------------------
// ranked jumps

/// When to stop generating ranked jumps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TruncationRule {
    /// Keep exactly `count` jumps (fewer if the measure is finite).
    FixedCount { count: usize },
    /// Keep jumps `>= eps * reference`; `reference` defaults to the first jump.
    RelativeFloor { eps: f64, reference: Option<f64> },
    /// Keep jumps `>= eps * (sum of jumps kept so far)`.
    RelativeMass { eps: f64 },
    /// Keep jumps above the level `x` with `∫_0^x s λ(s) ds = tau`.
    TailMass { tau: f64 },
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::RelativeFloor {
            eps: 1e-6,
            reference: None,
        }
    }
}

impl TruncationRule {
    pub fn relative(eps: f64) -> Self {
        TruncationRule::RelativeFloor {
            eps,
            reference: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationRule::FixedCount { count: 0 } => {
                Err(Error::param("fixed_count truncation needs count >= 1"))
            }
            TruncationRule::RelativeFloor { eps, reference } => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::param(format!("relative floor eps must lie in (0,1), got {eps}")));
                }
                if let Some(r) = reference {
                    check_pos("reference", r)?;
                }
                Ok(())
            }
            TruncationRule::RelativeMass { eps } if !(eps > 0.0 && eps < 1.0) => {
                Err(Error::param(format!("relative mass eps must lie in (0,1), got {eps}")))
            }
            TruncationRule::TailMass { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::param(format!("tail mass tau must be positive, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TruncationRule::FixedCount { count } => format!("fixed_count({count})"),
            TruncationRule::RelativeFloor { eps, .. } => format!("relative_floor({eps:e})"),
            TruncationRule::RelativeMass { eps } => format!("relative_mass({eps:e})"),
            TruncationRule::TailMass { tau } => format!("tail_mass({tau:e})"),
        }
    }
}

/// Ranked jumps with a record of where the sequence was cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedJumps {
    pub jumps: Vec<f64>,
    /// Level below which jumps were discarded.
    pub floor: f64,
    /// Expected mass of the discarded jumps.
    pub tail_mass_bound: f64,
    /// True when the measure ran out of jumps (finite activity).
    pub exhausted: bool,
}

/// Hard limit on the number of jumps in one draw.
pub const MAX_JUMPS: usize = 50_000_000;

/// Ranked jumps `M_k = Λ^{-1}(start_tail + E_1 + ... + E_k)`.
///
/// `start_tail = Λ(a)` yields the jumps strictly below `a`.
pub fn sample_ranked_jumps(
    lv: &LevyDensity,
    start_tail: f64,
    rule: &TruncationRule,
    rng: &mut RngStream,
) -> Result<RankedJumps> {
    rule.validate()?;
    if !(start_tail >= 0.0) || !start_tail.is_finite() {
        return Err(Error::param(format!("start_tail must be finite and >= 0, got {start_tail}")));
    }
    let total = lv.total_mass();
    let mut floor = match *rule {
        TruncationRule::RelativeFloor {
            eps,
            reference: Some(r),
        } => eps * r,
        TruncationRule::TailMass { tau } => tail_mass_floor(lv, tau)?,
        _ => 0.0,
    };
    let mut jumps: Vec<f64> = Vec::new();
    let mut t = start_tail;
    let mut sum = 0.0;
    let mut exhausted = false;
    loop {
        if let TruncationRule::FixedCount { count } = *rule {
            if jumps.len() >= count {
                break;
            }
        }
        t += rng.exp1();
        if t >= total {
            exhausted = true;
            break;
        }
        let m = lv.inv_tail(t)?;
        if !(m > 0.0) {
            exhausted = true;
            break;
        }
        if let TruncationRule::RelativeMass { eps } = *rule {
            floor = eps * sum;
        }
        if m < floor {
            break;
        }
        if let Some(&prev) = jumps.last() {
            if !(m < prev) {
                return Err(Error::Construction(format!(
                    "ranked jumps not strictly decreasing: {prev} then {m} at index {}",
                    jumps.len()
                )));
            }
        }
        if jumps.is_empty() {
            if let TruncationRule::RelativeFloor {
                eps,
                reference: None,
            } = *rule
            {
                floor = eps * m;
            }
        }
        jumps.push(m);
        sum += m;
        if jumps.len() > MAX_JUMPS {
            return Err(Error::Capacity(format!(
                "more than {MAX_JUMPS} jumps above floor {floor}; loosen the truncation"
            )));
        }
    }
    let cut = match *rule {
        TruncationRule::FixedCount { .. } => jumps.last().copied().unwrap_or(0.0),
        _ => floor,
    };
    let tail_mass_bound = if exhausted { 0.0 } else { lv.mass_below(cut)? };
    Ok(RankedJumps {
        jumps,
        floor: cut,
        tail_mass_bound,
        exhausted,
    })
}

/// Largest `x` with `mass_below(x) <= tau`.
fn tail_mass_floor(lv: &LevyDensity, tau: f64) -> Result<f64> {
    let (lo, hi) = lv.support();
    let top = if hi.is_finite() { hi } else { 1e12 };
    if lv.mass_below(top)? <= tau {
        return Ok(top);
    }
    let mut a = if lo > 0.0 { lo } else { 1e-300 };
    let mut b = top;
    for _ in 0..2000 {
        if b - a <= 1e-12 * b {
            break;
        }
        let m = if b / a > 4.0 { (a * b).sqrt() } else { 0.5 * (a + b) };
        if lv.mass_below(m)? <= tau {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn stable_tail_example() {
        let lv = LevyDensity::stable(1.0, 0.5).unwrap();
        assert!(rel(lv.tail(0.25).unwrap(), 4.0) < 1e-14);
    }

    #[test]
    fn scale_invariant_inverse_example() {
        let lv = LevyDensity::scale_invariant(2.0).unwrap();
        assert!(rel(lv.inv_tail(2.0 * 2f64.ln()).unwrap(), 0.5) < 1e-14);
    }

    #[test]
    fn beta_process_alpha_tail_example() {
        let lv = LevyDensity::beta_process_alpha(0.5).unwrap();
        assert!(rel(lv.tail(0.5).unwrap(), 1.0) < 1e-14);
        assert!(lv.has_closed_tail());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(LevyDensity::stable(1.0, 1.0).is_err());
        assert!(LevyDensity::stable(-1.0, 0.5).is_err());
        assert!(LevyDensity::scale_invariant(0.0).is_err());
        assert!(LevyDensity::stable_beta(1.0, -0.6, 0.5).is_err());
        assert!(LevyDensity::custom("bad", |s: f64| s.powf(-2.5), 0.0, 1.0).is_err());
        assert!(LevyDensity::custom("neg", |_s: f64| -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn numeric_tail_matches_closed_form() {
        // an identity tilt forces the table path on a density with a closed tail
        let alpha = 0.4;
        let closed = LevyDensity::beta_process_alpha(alpha).unwrap();
        let numeric = closed.tilted("one", |_| 1.0);
        for &s in &[1e-9, 1e-4, 0.01, 0.3, 0.77, 0.999] {
            let (a, b) = (closed.tail(s).unwrap(), numeric.tail(s).unwrap());
            assert!(rel(b, a) < 1e-9, "s={s}: {b} vs {a}");
        }
        for &t in &[1e-3, 0.5, 2.0, 40.0, 1e4] {
            let (a, b) = (closed.inv_tail(t).unwrap(), numeric.inv_tail(t).unwrap());
            assert!(rel(b, a) < 1e-9, "t={t}: {b} vs {a}");
        }
    }

    #[test]
    fn custom_tail_matches_closed_form() {
        let alpha = 0.3;
        let closed = LevyDensity::stable_beta(alpha, 1.0 - alpha, alpha).unwrap();
        let numeric = LevyDensity::custom("sb", move |s: f64| alpha * s.powf(-1.0 - alpha), 0.0, 1.0).unwrap();
        for &s in &[1e-9, 1e-4, 0.01, 0.3, 0.77, 0.999] {
            let (a, b) = (closed.tail(s).unwrap(), numeric.tail(s).unwrap());
            assert!(rel(b, a) < 1e-9, "s={s}: {b} vs {a}");
        }
        for &t in &[1e-3, 0.5, 2.0, 40.0, 1e4] {
            let (a, b) = (closed.inv_tail(t).unwrap(), numeric.inv_tail(t).unwrap());
            assert!(rel(b, a) < 1e-9, "t={t}: {b} vs {a}");
        }
    }

    #[test]
    fn dickman_unit_rate_is_flat_on_unit_interval() {
        let d = Dickman::new(1.0).unwrap();
        let target = (-crate::special::EULER_GAMMA).exp();
        for &t in &[1e-6, 0.1, 0.5, 0.999, 1.0] {
            assert!((d.pdf(t).unwrap() - target).abs() < 1e-9);
        }
        assert!((d.cdf(1.0) - 0.561459483566885).abs() < 1e-9);
        assert!(d.pdf(0.0).is_err());
    }

    #[test]
    fn dickman_normalizer_matches_laplace_transform() {
        // on (0,1] the density is e^{-c γ} t^{c-1} / Γ(c)
        for &c in &[0.3, 1.0, 2.5] {
            let d = Dickman::new(c).unwrap();
            let want = (-c * crate::special::EULER_GAMMA).exp() / crate::special::log_gamma(c).unwrap().exp();
            assert!(rel(d.pdf(0.5).unwrap() / 0.5f64.powf(c - 1.0), want) < 1e-7, "c={c}");
        }
    }

    #[test]
    fn dickman_integrates_to_one_and_solves_delay_equation() {
        for &c in &[0.5, 1.0, 3.0] {
            let d = Dickman::new(c).unwrap();
            let total = quad(|t| d.pdf(t).unwrap(), 0.0, 1.0, 1e-12).unwrap().value
                + quad(|t| d.pdf(t).unwrap(), 1.0, d.horizon(), 1e-10).unwrap().value;
            assert!((total - 1.0).abs() < 1e-6, "c={c}: {total}");
            for k in 1..=50 {
                let t = 0.1 * k as f64;
                let lhs = t * d.pdf(t).unwrap();
                let rhs = c * (d.cdf(t) - d.cdf(t - 1.0));
                assert!((lhs - rhs).abs() < 1e-6, "c={c} t={t}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn dickman_unit_rate_matches_rho() {
        // e^{-γ} ρ(t) with ρ(t) = 1 - ln t on [1, 2]
        let d = Dickman::new(1.0).unwrap();
        let eg = (-crate::special::EULER_GAMMA).exp();
        for &t in &[1.2, 1.5, 1.9] {
            assert!((d.pdf(t).unwrap() - eg * (1.0 - f64::ln(t))).abs() < 1e-8);
        }
        // ρ(3) from tabulated values of the Dickman function
        assert!((d.pdf(3.0).unwrap() / eg - 0.048608388291131).abs() < 1e-7);
    }

    #[test]
    fn beta_moments_match_quadrature() {
        let cases = vec![
            LevyDensity::scale_invariant(1.3).unwrap(),
            LevyDensity::stable(0.7, 0.4).unwrap().conditional(0.6).unwrap(),
            LevyDensity::scale_invariant(2.0).unwrap().conditional(2.5).unwrap(),
            LevyDensity::beta_process(1.5, 2.5).unwrap(),
            LevyDensity::stable_beta(0.3, 1.0, 0.3).unwrap(),
            LevyDensity::stable_beta(0.3, 1.0, 0.3).unwrap().scaled(4.0).unwrap(),
        ];
        for lv in &cases {
            for &(m, n) in &[(1u32, 1u32), (1, 4), (2, 4), (4, 4)] {
                for &x in &[1e-6, 0.3, 1.0] {
                    let closed = lv.beta_moment(m, n, x).unwrap();
                    let direct = lv.beta_moment_quad(m, n, x.min(lv.support().1)).unwrap();
                    assert!(rel(closed, direct) < 1e-9, "{lv:?} m={m} n={n} x={x}: {closed} vs {direct}");
                }
            }
        }
        assert!(cases[0].beta_moment(0, 2, 0.5).is_err());
    }

    #[test]
    fn stable_beta_tail_matches_direct_quadrature() {
        let lv = LevyDensity::stable_beta(0.5, 1.0, 0.5).unwrap();
        for &s in &[1e-6, 0.01, 0.5, 0.9] {
            let direct = quad(|u| 0.5 * u.powf(-1.5) * (1.0 - u).powf(0.5), s, 1.0, 1e-13)
                .unwrap()
                .value;
            assert!(rel(lv.tail(s).unwrap(), direct) < 1e-10);
        }
    }

    #[test]
    fn gamma_tail_is_exponential_integral() {
        // E1(1) = 0.21938393439552027
        let lv = LevyDensity::gamma(2.0).unwrap();
        assert!(rel(lv.tail(1.0).unwrap(), 2.0 * 0.219_383_934_395_520_27) < 1e-10);
        let s = lv.inv_tail(0.7).unwrap();
        assert!(rel(lv.tail(s).unwrap(), 0.7) < 1e-10);
    }

    #[test]
    fn conditional_stable_matches_scaled_restricted_stable() {
        // a λ(a s) = c a^{-α} s^{-1-α} on (0,1]
        let (c, alpha, a) = (0.5, 0.5, 0.3);
        let cond = LevyDensity::stable(c, alpha).unwrap().conditional(a).unwrap();
        let direct = LevyDensity::stable_beta(c * a.powf(-alpha), 1.0 - alpha, alpha).unwrap();
        for &s in &[1e-5, 0.1, 0.6] {
            assert!(rel(cond.tail(s).unwrap(), direct.tail(s).unwrap()) < 1e-12);
            assert!(rel(cond.density(s), direct.density(s)) < 1e-12);
        }
        assert_eq!(cond.density(1.5), 0.0);
    }

    #[test]
    fn mass_below_matches_quadrature() {
        let cases = vec![
            LevyDensity::stable_beta(0.3, 1.0, 0.3).unwrap(),
            LevyDensity::beta_process(2.0, 3.0).unwrap(),
            LevyDensity::gamma(1.5).unwrap(),
            LevyDensity::stable(1.0, 0.6).unwrap().conditional(2.0).unwrap(),
        ];
        for lv in cases {
            let x = 0.2;
            let q = quad(|s| s * lv.density(s), 0.0, x, 1e-13).unwrap().value;
            assert!(rel(lv.mass_below(x).unwrap(), q) < 1e-9, "{}", lv.describe());
        }
    }

    #[test]
    fn ranked_jumps_respect_relative_floor() {
        let lv = LevyDensity::stable(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(1, 0);
        let r = sample_ranked_jumps(&lv, 0.0, &TruncationRule::relative(1e-4), &mut rng).unwrap();
        let m1 = r.jumps[0];
        assert!(r.jumps.iter().all(|&m| m >= 1e-4 * m1));
        assert!(r.jumps.windows(2).all(|w| w[1] < w[0]));
        assert!((r.floor - 1e-4 * m1).abs() < 1e-15 * m1);
    }

    #[test]
    fn fixed_count_and_tail_mass_rules() {
        let lv = LevyDensity::scale_invariant(1.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let r = sample_ranked_jumps(&lv, 0.0, &TruncationRule::FixedCount { count: 7 }, &mut rng).unwrap();
        assert_eq!(r.jumps.len(), 7);
        let r = sample_ranked_jumps(&lv, 0.0, &TruncationRule::TailMass { tau: 1e-5 }, &mut rng).unwrap();
        assert!((r.tail_mass_bound - 1e-5).abs() < 1e-12);
        assert!(r.jumps.iter().all(|&m| m >= 1e-5 * 0.999_999));
    }

    #[test]
    fn finite_measure_is_exhausted() {
        let lv = LevyDensity::custom("finite", |_s: f64| 3.0, 0.0, 1.0).unwrap();
        assert!((lv.total_mass() - 3.0).abs() < 1e-9);
        let mut rng = RngStream::new(4, 0);
        let r = sample_ranked_jumps(&lv, 0.0, &TruncationRule::relative(1e-12), &mut rng).unwrap();
        assert!(r.exhausted);
        assert!(r.jumps.len() < 40);
    }

    #[test]
    fn largest_jump_pdf_integrates_to_one() {
        for lv in [
            LevyDensity::scale_invariant(1.5).unwrap(),
            LevyDensity::stable(1.0, 0.5).unwrap(),
            LevyDensity::gamma(1.0).unwrap(),
        ] {
            let (_, hi) = lv.support();
            let q = quad(|s| lv.largest_jump_pdf(s).unwrap(), 0.0, hi, 1e-9).unwrap();
            assert!((q.value - 1.0).abs() < 1e-7, "{}: {}", lv.describe(), q.value);
        }
    }

    proptest! {
        #[test]
        fn closed_tail_roundtrip(t in 1e-3f64..1e3, alpha in 0.05f64..0.95, c in 0.1f64..5.0) {
            // e^{-t/theta} underflows past t/theta ~ 700
            let si = LevyDensity::scale_invariant(c.max(t / 700.0)).unwrap();
            for lv in [
                LevyDensity::stable(c, alpha).unwrap(),
                si,
                LevyDensity::beta_process_alpha(alpha).unwrap(),
                LevyDensity::stable_beta(c, 1.0 - alpha, alpha).unwrap(),
            ] {
                let s = lv.inv_tail(t).unwrap();
                prop_assert!(rel(lv.tail(s).unwrap(), t) < 1e-10);
            }
        }

        #[test]
        fn tail_is_nonincreasing(s1 in 1e-8f64..0.999, s2 in 1e-8f64..0.999, alpha in 0.1f64..0.9) {
            let (a, b) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            let lv = LevyDensity::stable_beta(1.0, 0.7, alpha).unwrap();
            prop_assert!(lv.tail(a).unwrap() >= lv.tail(b).unwrap());
        }

        #[test]
        fn numeric_roundtrip(t in 1e-2f64..1e4, theta in 0.2f64..3.0) {
            let lv = LevyDensity::stable_beta(0.5, theta, 0.5).unwrap();
            let s = lv.inv_tail(t).unwrap();
            prop_assert!(rel(lv.tail(s).unwrap(), t) < 1e-8);
        }

        #[test]
        fn jumps_strictly_decrease(seed in 0u64..1000) {
            let lv = LevyDensity::gamma(1.0).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let r = sample_ranked_jumps(&lv, 0.0, &TruncationRule::relative(1e-6), &mut rng).unwrap();
            prop_assert!(r.jumps.windows(2).all(|w| w[1] < w[0]));
        }
    }
}
