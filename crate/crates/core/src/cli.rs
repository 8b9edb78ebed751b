//! The `jot` command line: one JSON config schema for every command, CSV or
//! JSON outputs with a reproducibility header, and fixed exit codes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::acceptance::{run_suite, AcceptOptions};
use crate::diagnostics::{chi_square_two_sample, ks_two_sample, lecam_check, tail_index, tau_beta_compare, tv_histogram};
use crate::error::{Error, Result};
use crate::featmat::{sample_jot_matrix, sample_scaled_matrix, FeatureMatrix};
use crate::levy::{Dickman, LevyDensity, TruncationRule};
use crate::measures::{sample_jot, total_mass, ScalingLaw};
use crate::pkbridge::bridge_partition;
use crate::posterior::{c_a, delta_posterior, observed_jump_law, psi_n, q_n, ObservationSummary, PredictiveSampler};
use crate::special::RngStream;
use crate::urns::{sample_hierarchical, HierarchicalDraw, UrnModel, UrnState, DEFAULT_MAX_FEATURES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ACCEPT_FAILED: i32 = 3;

/// Environment variable holding the default worker count.
pub const JOBS_ENV: &str = "JOT_JOBS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SampleMeasure,
    SampleMatrix,
    Urn,
    Posterior,
    Predictive,
    Bridge,
    Dickman,
    Diagnose,
    Accept,
}

#[derive(Debug, Parser)]
#[command(name = "jot", version, about = "Sampling, inference and acceptance checks for scaled-subordinator feature models")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config file; omitted means `{}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config replicate count.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Worker threads for replicate loops.
    #[arg(long, env = JOBS_ENV)]
    pub jobs: Option<usize>,
}

// ---------------------------------------------------------------------------
// config access with JSON pointers

/// A view into the config that knows its JSON pointer.
#[derive(Clone, Copy)]
struct Cfg<'a> {
    v: &'a Value,
    ptr: &'a str,
}

fn child_ptr(ptr: &str, key: &str) -> String {
    format!("{ptr}/{}", key.replace('~', "~0").replace('/', "~1"))
}

impl<'a> Cfg<'a> {
    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.v.get(key).filter(|v| !v.is_null())
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::config(child_ptr(self.ptr, key), msg)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| self.err(key, "expected a number")),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| self.err(key, "required number is missing"))
    }

    fn f64_or(&self, key: &str, d: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(d))
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| self.err(key, "expected a non-negative integer")),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.u64_opt(key)?
            .map(|x| x as usize)
            .ok_or_else(|| self.err(key, "required integer is missing"))
    }

    fn usize_or(&self, key: &str, d: usize) -> Result<usize> {
        Ok(self.u64_opt(key)?.map(|x| x as usize).unwrap_or(d))
    }

    fn str_opt(&self, key: &str) -> Result<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| self.err(key, "expected a string")),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self
            .raw(key)
            .ok_or_else(|| self.err(key, "required array is missing"))?
            .as_array()
            .ok_or_else(|| self.err(key, "expected an array of numbers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| Error::config(format!("{}/{i}", child_ptr(self.ptr, key)), "expected a number"))
            })
            .collect()
    }

    fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        let arr = self
            .raw(key)
            .ok_or_else(|| self.err(key, "required array is missing"))?
            .as_array()
            .ok_or_else(|| self.err(key, "expected an array of integers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_u64().ok_or_else(|| {
                    Error::config(format!("{}/{i}", child_ptr(self.ptr, key)), "expected a non-negative integer")
                })
            })
            .collect()
    }
}

/// Runs `f` on the sub-object at `key`, with pointers rooted there.
fn with_child<T>(c: Cfg, key: &str, f: impl FnOnce(Cfg) -> Result<T>) -> Result<Option<T>> {
    match c.raw(key) {
        None => Ok(None),
        Some(v) => {
            let p = child_ptr(c.ptr, key);
            f(Cfg { v, ptr: &p }).map(Some)
        }
    }
}

/// Parameter errors raised while building a model are reported at the
/// parameter they name, or at the model.
fn at<T>(c: Cfg, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter(m) => param_error(c, m),
        e => e,
    })
}

fn param_error(c: Cfg, m: String) -> Error {
    let first = m.split(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_')).next().unwrap_or("");
    if !first.is_empty() && c.raw(first).is_some() {
        Error::config(child_ptr(c.ptr, first), m)
    } else {
        Error::config(c.ptr, m)
    }
}

/// `model` is either `{family, params...}` or a family name with the
/// parameters at the top level.
fn model_view<'a>(root: Cfg<'a>, holder: &'a mut String) -> Result<(Cfg<'a>, &'a str)> {
    match root.raw("model") {
        Some(Value::String(name)) => {
            *holder = child_ptr(root.ptr, "model");
            Ok((root, name.as_str()))
        }
        Some(v @ Value::Object(_)) => {
            *holder = child_ptr(root.ptr, "model");
            let c = Cfg { v, ptr: holder.as_str() };
            let fam = c.str_opt("family")?.ok_or_else(|| c.err("family", "model family is missing"))?;
            Ok((c, fam))
        }
        Some(_) => Err(root.err("model", "expected a family name or an object")),
        None => Err(root.err("model", "required model is missing")),
    }
}

fn levy_from(c: Cfg, family: &str) -> Result<LevyDensity> {
    let r = match family {
        "scale_invariant" => LevyDensity::scale_invariant(c.f64_or("theta", 1.0)?),
        "stable" => LevyDensity::stable(c.f64_or("c", 1.0)?, c.f64("alpha")?),
        "beta_process" | "ibp" => LevyDensity::beta_process(c.f64_or("c", 1.0)?, c.f64_or("theta", 1.0)?),
        "stable_beta" => {
            let (theta, alpha) = (c.f64("theta")?, c.f64("alpha")?);
            match c.f64_opt("coef")? {
                Some(coef) => LevyDensity::stable_beta(coef, theta, alpha),
                None => LevyDensity::stable_beta_normalized(c.f64_or("c", 1.0)?, theta, alpha),
            }
        }
        "gamma" => LevyDensity::gamma(c.f64_or("theta", 1.0)?),
        other => {
            return Err(c.err(
                "family",
                format!("unknown levy family '{other}' (scale_invariant, stable, beta_process, stable_beta, gamma)"),
            ))
        }
    };
    at(c, r)
}

fn levy(root: Cfg) -> Result<LevyDensity> {
    let mut holder = String::new();
    let flat = matches!(root.raw("model"), Some(Value::String(_)));
    let (c, fam) = model_view(root, &mut holder)?;
    levy_from(c, fam).map_err(|e| match e {
        Error::Config { pointer, message } if flat && pointer == child_ptr(c.ptr, "family") => {
            Error::config(child_ptr(root.ptr, "model"), message)
        }
        e => e,
    })
}

fn scaling(root: Cfg) -> Result<ScalingLaw> {
    let law = match root.raw("pstar") {
        None => return Ok(ScalingLaw::LargestJump),
        Some(Value::String(s)) if s == "largest_jump" => return Ok(ScalingLaw::LargestJump),
        Some(Value::String(s)) => return Err(root.err("pstar", format!("unknown scaling law '{s}'"))),
        Some(_) => with_child(root, "pstar", |c| {
            Ok(match c.str_opt("kind")?.unwrap_or("") {
                "largest_jump" => ScalingLaw::LargestJump,
                "fixed" => ScalingLaw::Fixed { a: c.f64("a")? },
                "gamma" => ScalingLaw::Gamma {
                    shape: c.f64("shape")?,
                    rate: c.f64("rate")?,
                },
                "zeta_gamma" => ScalingLaw::ZetaGamma {
                    alpha: c.f64("alpha")?,
                    shape: c.f64("shape")?,
                    rate: c.f64("rate")?,
                },
                other => {
                    return Err(c.err(
                        "kind",
                        format!("unknown scaling law '{other}' (largest_jump, fixed, gamma, zeta_gamma)"),
                    ))
                }
            })
        })?
        .expect("present"),
    };
    law.validate().map_err(|e| root.err("pstar", e.to_string()))?;
    Ok(law)
}

fn truncation(root: Cfg) -> Result<TruncationRule> {
    let rule = with_child(root, "truncation", |c| {
        let mode = c.str_opt("mode")?.unwrap_or("relative_floor");
        Ok(match mode {
            "fixed_count" => TruncationRule::FixedCount { count: c.usize("value")? },
            "relative_floor" => TruncationRule::relative(c.f64_or("value", 1e-6)?),
            "relative_mass" => TruncationRule::RelativeMass { eps: c.f64("value")? },
            "tail_mass" => TruncationRule::TailMass { tau: c.f64("value")? },
            other => {
                return Err(c.err(
                    "mode",
                    format!("unknown truncation mode '{other}' (fixed_count, relative_floor, relative_mass, tail_mass)"),
                ))
            }
        })
    })?
    .unwrap_or_default();
    rule.validate().map_err(|e| root.err("truncation", e.to_string()))?;
    Ok(rule)
}

/// Urn families (`ibp`, `stable_jot`, `bfry`); `None` for plain Lévy families.
fn urn_model(root: Cfg) -> Result<Option<UrnModel>> {
    let mut holder = String::new();
    let (c, fam) = model_view(root, &mut holder)?;
    let m = match fam {
        "ibp" => UrnModel::Ibp {
            c: c.f64_or("c", 1.0)?,
            theta: c.f64_or("theta", 1.0)?,
        },
        "stable_jot" => UrnModel::StableJot {
            alpha: c.f64("alpha")?,
            pstar: scaling(c)?,
        },
        "bfry" => {
            let lv = with_child(c, "levy", |l| {
                let fam = l.str_opt("family")?.ok_or_else(|| l.err("family", "levy family is missing"))?;
                levy_from(l, fam)
            })?
            .ok_or_else(|| c.err("levy", "bfry needs a levy density on (0, 1]"))?;
            UrnModel::Bfry {
                sigma: c.f64("sigma")?,
                lv,
            }
        }
        _ => return Ok(None),
    };
    at(c, m.validate())?;
    Ok(Some(m))
}

fn need_urn(root: Cfg) -> Result<UrnModel> {
    urn_model(root)?.ok_or_else(|| root.err("model", "urn commands need family ibp, stable_jot or bfry"))
}

// ---------------------------------------------------------------------------
// output

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            n.as_f64().map(|x| json!(sig12(x))).unwrap_or(Value::Number(n))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        v => v,
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Numerical(format!("serialization failed: {e}")))
}

fn num(x: f64) -> String {
    sig12(x).to_string()
}

struct Output {
    result: Value,
    csv: Option<String>,
    seeds: Vec<u64>,
    streams: usize,
    pass: Option<bool>,
    lines: Vec<String>,
}

impl Output {
    fn json(result: Value, seed: u64, streams: usize) -> Self {
        Output {
            result,
            csv: None,
            seeds: vec![seed],
            streams,
            pass: None,
            lines: Vec::new(),
        }
    }
}

fn matrices_output(ms: &[FeatureMatrix], seed: u64) -> Result<Output> {
    let ms: Vec<FeatureMatrix> = ms.iter().map(|m| m.canonicalize()).collect();
    let stats: Vec<_> = ms.iter().map(|m| m.stats()).collect();
    let csv = ms.iter().map(|m| m.to_csv()).collect::<Vec<_>>().join("\n");
    let dense: Vec<_> = ms.iter().map(|m| m.to_dense()).collect();
    let mut o = Output::json(json!({ "stats": to_value(&stats)?, "matrices": to_value(&dense)? }), seed, ms.len());
    o.csv = Some(csv);
    Ok(o)
}

fn replicate<T: Send>(seed: u64, count: usize, f: impl Fn(&mut RngStream) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, i as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// commands

fn cmd_sample_measure(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let (lv, pstar, trunc) = (levy(c)?, scaling(c)?, truncation(c)?);
    let ms = replicate(seed, reps, |rng| sample_jot(&lv, &pstar, &trunc, rng))?;
    let mut csv = String::from("replicate,rank,weight\n");
    let mut summary = Vec::new();
    for (i, m) in ms.iter().enumerate() {
        for (k, w) in m.weights.iter().enumerate() {
            csv.push_str(&format!("{i},{},{}\n", k + 1, num(*w)));
        }
        let s = total_mass(m);
        summary.push(json!({
            "delta_ref": m.delta_ref, "count": m.weights.len(), "mass": s.sum,
            "tail_mass_bound": s.tail_mass_bound,
        }));
    }
    let mut o = Output::json(json!({ "measures": to_value(&ms)?, "summary": summary }), seed, reps);
    o.csv = Some(csv);
    Ok(o)
}

fn cmd_sample_matrix(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let n = c.usize("n")?;
    let trunc = truncation(c)?;
    let ms = match urn_model(c)? {
        Some(model) => {
            let cap = c.usize_or("max_features", DEFAULT_MAX_FEATURES)?;
            replicate(seed, reps, |rng| match sample_hierarchical(&model, n, &trunc, cap, rng)? {
                HierarchicalDraw::Matrix(z) => Ok(z),
                HierarchicalDraw::Overflow { k_n } => Err(Error::Capacity(format!(
                    "draw has {k_n} features, above max_features = {cap}"
                ))),
            })?
        }
        None => {
            let (lv, pstar) = (levy(c)?, scaling(c)?);
            if c.raw("pstar").is_none() && lv.support().1 <= 1.0 {
                // densities on (0, 1] are used unscaled unless a scaling law is given
                replicate(seed, reps, |rng| Ok(sample_scaled_matrix(&lv, 1.0, &trunc, n, rng)?.0))?
            } else {
                replicate(seed, reps, |rng| Ok(sample_jot_matrix(&lv, &pstar, &trunc, n, rng)?.0))?
            }
        }
    };
    matrices_output(&ms, seed)
}

fn cmd_urn(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let n = c.usize("n")?;
    let model = need_urn(c)?;
    let cap = c.usize_or("max_features", DEFAULT_MAX_FEATURES)?;
    let ms = replicate(seed, reps, |rng| UrnState::new(model.clone())?.with_max_features(cap).run(n, rng))?;
    matrices_output(&ms, seed)
}

fn cmd_predictive(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let n = c.usize("n")?;
    let sampler = PredictiveSampler::new(levy(c)?, scaling(c)?)?;
    let ms = replicate(seed, reps, |rng| sampler.sample_matrix(n, rng))?;
    matrices_output(&ms, seed)
}

fn cmd_posterior(c: Cfg, seed: u64) -> Result<Output> {
    let lv = levy(c)?;
    let n = c.usize("n")? as u32;
    let counts: Vec<u32> = match c.raw("counts") {
        None => Vec::new(),
        Some(_) => c.u64_list("counts")?.into_iter().map(|x| x as u32).collect(),
    };
    let obs = ObservationSummary::new(n, counts.clone()).map_err(|e| c.err("counts", e.to_string()))?;
    let mut out = Map::new();
    if let Some(a) = c.f64_opt("a")? {
        let mut distinct = counts.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let mut per = Vec::new();
        for nk in distinct {
            let law = observed_jump_law(&lv, a, n, nk)?;
            per.push(json!({
                "n_k": nk, "c_a": c_a(&lv, a, n, nk)?, "jump_mean": law.mean(),
                "jump_quantiles": [law.quantile(0.05), law.quantile(0.5), law.quantile(0.95)],
            }));
        }
        out.insert("a".into(), json!(a));
        out.insert("observed".into(), Value::Array(per));
        out.insert("psi_n".into(), json!(psi_n(&lv, a, n)?));
        out.insert("q_n".into(), json!(q_n(&lv, a, n)?));
    }
    if c.raw("pstar").is_some() {
        let prior = scaling(c)?;
        if let ScalingLaw::Fixed { .. } = prior {
            return Err(c.err("pstar", "a fixed scaling has no posterior"));
        }
        let lv2 = lv.clone();
        let g = delta_posterior(&lv, move |a| prior.log_density(&lv2, a).unwrap_or(f64::NEG_INFINITY), &obs)?;
        out.insert(
            "delta_posterior".into(),
            json!({
                "mean": g.mean(),
                "quantiles": { "0.05": g.quantile(0.05), "0.5": g.quantile(0.5), "0.95": g.quantile(0.95) },
            }),
        );
    }
    if out.is_empty() {
        return Err(c.err("a", "posterior needs a scaling value a, a pstar, or both"));
    }
    Ok(Output::json(Value::Object(out), seed, 0))
}

fn cmd_bridge(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let (lv, pstar, trunc) = (levy(c)?, scaling(c)?, truncation(c)?);
    let n = c.usize("n")?;
    let threshold = c.f64_or("threshold", 1.0)?;
    let parts = replicate(seed, reps, |rng| bridge_partition(&lv, &pstar, n, threshold, &trunc, rng))?;
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut csv = String::from("replicate");
    for i in 0..n {
        csv.push_str(&format!(",label_{i}"));
    }
    csv.push('\n');
    for (r, p) in parts.iter().enumerate() {
        *hist.entry(p.block_count()).or_default() += 1;
        let mut labels = vec![0usize; n];
        for (b, block) in p.blocks.iter().enumerate() {
            for &i in block {
                labels[i as usize] = b;
            }
        }
        csv.push_str(&r.to_string());
        for l in labels {
            csv.push_str(&format!(",{l}"));
        }
        csv.push('\n');
    }
    let hist: Vec<[u64; 2]> = hist.into_iter().map(|(k, v)| [k as u64, v]).collect();
    let mut o = Output::json(json!({ "block_count_histogram": hist, "partitions": to_value(&parts)? }), seed, reps);
    o.csv = Some(csv);
    Ok(o)
}

fn cmd_dickman(c: Cfg, seed: u64) -> Result<Output> {
    let d = Dickman::new(c.f64_or("c", 1.0)?).map_err(|e| c.err("c", e.to_string()))?;
    let grid = match c.raw("grid") {
        None => (1..=50).map(|i| i as f64 * 0.1).collect(),
        Some(_) => {
            let g = c.f64_list("grid")?;
            match g.len() {
                2 => {
                    let pts = c.usize_or("points", 50)?;
                    if pts < 2 || !(g[1] > g[0]) {
                        return Err(c.err("grid", "need start < stop and at least 2 points"));
                    }
                    (0..pts).map(|i| g[0] + (g[1] - g[0]) * i as f64 / (pts - 1) as f64).collect()
                }
                0 | 1 => return Err(c.err("grid", "give [start, stop] or an explicit list of points")),
                _ => g,
            }
        }
    };
    if let Some(i) = grid.iter().position(|t| !(*t > 0.0)) {
        return Err(Error::config(format!("{}/grid/{i}", c.ptr), "grid points must be positive"));
    }
    let mut csv = String::from("t,pdf,cdf\n");
    let mut rows = Vec::new();
    for &t in &grid {
        let (p, f) = (d.pdf(t)?, d.cdf(t));
        csv.push_str(&format!("{},{},{}\n", num(t), num(p), num(f)));
        rows.push(json!({ "t": t, "pdf": p, "cdf": f }));
    }
    let mut o = Output::json(json!({ "table": rows }), seed, 0);
    o.csv = Some(csv);
    Ok(o)
}

fn cmd_diagnose(c: Cfg, seed: u64, reps: usize) -> Result<Output> {
    let test = c.str_opt("test")?.ok_or_else(|| c.err("test", "required test name is missing"))?;
    let r = match test {
        "chi_square" => to_value(&chi_square_two_sample(&c.u64_list("a")?, &c.u64_list("b")?)?)?,
        "ks" => to_value(&ks_two_sample(&c.f64_list("a")?, &c.f64_list("b")?)?)?,
        "tv" => to_value(&tv_histogram(&c.f64_list("a")?, &c.f64_list("b")?, c.usize_or("bins", 50)?)?)?,
        "lecam" => to_value(&lecam_check(&c.f64_list("weights")?)?)?,
        "tail_index" => to_value(&tail_index(
            &c.f64_list("samples")?,
            c.f64_or("k_frac", 0.05)?,
            &mut RngStream::new(seed, 0),
        )?)?,
        "tau_beta" => {
            let w = c.f64_list("window")?;
            if w.len() != 2 {
                return Err(c.err("window", "expected [lo, hi]"));
            }
            to_value(&tau_beta_compare(
                &levy(c)?,
                c.f64("beta")?,
                (w[0], w[1]),
                reps,
                &truncation(c)?,
                &mut RngStream::new(seed, 0),
            )?)?
        }
        other => {
            return Err(c.err(
                "test",
                format!("unknown test '{other}' (chi_square, ks, tv, lecam, tail_index, tau_beta)"),
            ))
        }
    };
    Ok(Output::json(json!({ "test": test, "outcome": r }), seed, reps))
}

fn cmd_accept(c: Cfg, seed: u64) -> Result<Output> {
    let criteria = match c.raw("criteria") {
        None => Vec::new(),
        Some(_) => {
            let ids = c.u64_list("criteria")?;
            if let Some(i) = ids.iter().position(|&x| !(1..=11).contains(&x)) {
                return Err(Error::config(format!("{}/criteria/{i}", c.ptr), "criteria are numbered 1 to 11"));
            }
            ids.into_iter().map(|x| x as u8).collect()
        }
    };
    let scale = c.f64_or("scale", 1.0)?;
    if !(scale > 0.0) {
        return Err(c.err("scale", "scale must be positive"));
    }
    let report = run_suite(&AcceptOptions { seed, scale, criteria })?;
    let mut o = Output::json(to_value(&report)?, seed, 0);
    o.pass = Some(report.pass);
    o.lines = report.lines();
    o.seeds = report
        .criteria
        .iter()
        .flat_map(|cr| cr.checks.iter().flat_map(|ch| ch.seeds.iter().copied()))
        .collect();
    o.seeds.insert(0, seed);
    Ok(o)
}

// ---------------------------------------------------------------------------
// driver

fn default_format(cmd: Command) -> &'static str {
    match cmd {
        Command::SampleMeasure
        | Command::SampleMatrix
        | Command::Urn
        | Command::Predictive
        | Command::Bridge
        | Command::Dickman => "csv",
        Command::Posterior | Command::Diagnose | Command::Accept => "json",
    }
}

fn default_replicates(cmd: Command) -> usize {
    match cmd {
        Command::Bridge => 1000,
        Command::Diagnose => 10_000,
        _ => 1,
    }
}

fn config_hash(v: &Value) -> String {
    let bytes = serde_json::to_vec(v).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Applies flag overrides and returns the effective config.
fn effective_config(args: &Args) -> Result<Value> {
    let mut v: Value = match &args.config {
        None => json!({}),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::config("", format!("invalid JSON: {e}")))?
        }
    };
    let obj = v.as_object_mut().ok_or_else(|| Error::config("", "config must be a JSON object"))?;
    if let Some(s) = args.seed {
        obj.insert("seed".into(), json!(s));
    }
    if let Some(r) = args.replicates {
        obj.insert("replicates".into(), json!(r));
    }
    Ok(v)
}

fn write_to(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Executes one command and writes its outputs. Returns whether an
/// acceptance run passed (always true for other commands).
pub fn execute(args: &Args) -> Result<bool> {
    let cfg = effective_config(args)?;
    let root = Cfg { v: &cfg, ptr: "" };
    let seed = root.u64_opt("seed")?.unwrap_or(1);
    let reps = root.usize_or("replicates", default_replicates(args.command))?;
    if reps == 0 {
        return Err(root.err("replicates", "replicates must be at least 1"));
    }
    let format = with_child(root, "output", |o| Ok(o.str_opt("format")?.map(str::to_string)))?
        .flatten()
        .unwrap_or_else(|| default_format(args.command).to_string());
    if format != "csv" && format != "json" {
        return Err(Error::config("/output/format", format!("expected csv or json, got '{format}'")));
    }
    let out = match args.command {
        Command::SampleMeasure => cmd_sample_measure(root, seed, reps)?,
        Command::SampleMatrix => cmd_sample_matrix(root, seed, reps)?,
        Command::Urn => cmd_urn(root, seed, reps)?,
        Command::Posterior => cmd_posterior(root, seed)?,
        Command::Predictive => cmd_predictive(root, seed, reps)?,
        Command::Bridge => cmd_bridge(root, seed, reps)?,
        Command::Dickman => cmd_dickman(root, seed)?,
        Command::Diagnose => cmd_diagnose(root, seed, reps)?,
        Command::Accept => cmd_accept(root, seed)?,
    };
    let header = json!({
        "command": args.command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "config_hash": config_hash(&cfg),
        "seeds": out.seeds,
        "streams": out.streams,
    });
    let doc = round_json(json!({ "header": header, "result": out.result }));
    let doc_text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(e.to_string()))? + "\n";
    match (format.as_str(), &out.csv) {
        ("csv", Some(csv)) => {
            let meta = args.out.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".json");
                PathBuf::from(s)
            });
            write_to(args.out.as_deref(), csv)?;
            match meta {
                Some(m) => write_to(Some(&m), &doc_text)?,
                None => eprintln!("{}", serde_json::to_string(&doc).unwrap_or_default()),
            }
        }
        _ => write_to(args.out.as_deref(), &doc_text)?,
    }
    for l in &out.lines {
        eprintln!("{l}");
    }
    Ok(out.pass.unwrap_or(true))
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(j) = args.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        // a second initialization (tests calling main_with repeatedly) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match execute(&args) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_ACCEPT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
