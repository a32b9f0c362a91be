//! Manifold files, point sampling and JSON reports behind the `smms` binary.
//!
//! A manifold file is TOML:
//!
//! ```toml
//! dimension = 3
//! coords = ["x", "y", "z"]
//! metric = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]
//! v = "1 + x"          # or phi = "..." when m = "inf" / "-inf"
//! m = 2.0
//! mu = 1.0
//! lambda = 3.0         # optional
//! k = ["...", ...]     # optional covector field for `potential`
//!
//! [sampling]           # either `points`, or a box
//! points = [[0.1, 0.2, 0.3]]
//! min = [-0.5, -0.5, -0.5]
//! max = [0.5, 0.5, 0.5]
//! counts = [5, 5, 5]
//! jitter_seed = 0      # seed of a jitter of 10% of a grid cell
//!
//! [tolerances]         # all optional
//! generic_eps = 1e-8
//! decision_tol = 1e-6
//! identity_tol = 1e-8
//! lambda2_scale = 1.0
//! ```

use crate::expr::{parse_scalar, ScalarExpr};
use crate::obstruction::harnack::{harnack_at, random_data, random_symmetric_field};
use crate::obstruction::potential::{potential_reconstruct, CovectorField, ExprCovector, FnCovector};
use crate::obstruction::soliton::{soliton, soliton_residual};
use crate::obstruction::statics::{static_metric, static_residual};
use crate::obstruction::{obstruction_g, rank_test, Config, Decision, ObstructionError, ObstructionReport};
use crate::smms::{DimParam, Density, SmmsError, SmmsSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const SCHEMA: &str = "smms-report/1";
pub const MAX_GRID_POINTS: usize = 2000;
const DEFAULT_COUNT: usize = 5;
const JITTER: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {msg}")]
    Field { field: String, msg: String },
    #[error("{0}")]
    Mode(String),
    #[error(transparent)]
    Obstruction(#[from] ObstructionError),
    #[error(transparent)]
    Smms(#[from] SmmsError),
    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl CliError {
    fn field(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
        CliError::Field { field: field.into(), msg: msg.to_string() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    points: Option<Vec<Vec<f64>>>,
    min: Option<Vec<f64>>,
    max: Option<Vec<f64>>,
    counts: Option<Vec<usize>>,
    jitter_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    dimension: usize,
    coords: Vec<String>,
    metric: Vec<Vec<String>>,
    v: Option<String>,
    phi: Option<String>,
    m: MValue,
    mu: f64,
    lambda: Option<f64>,
    k: Option<Vec<String>>,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    tolerances: Config,
}

#[derive(Debug, Clone)]
pub struct ManifoldFile {
    pub spec: SmmsSpec,
    pub points: Vec<Vec<f64>>,
    pub config: Config,
    pub k: Option<Vec<ScalarExpr>>,
    /// sha256 of the file text
    pub digest: String,
    pub seed: u64,
}

fn expr(src: &str, coords: &[String], field: &str) -> Result<ScalarExpr, CliError> {
    parse_scalar(src, coords).map_err(|e| CliError::field(field, e))
}

/// Grid of at most [`MAX_GRID_POINTS`] points, optionally jittered.
pub fn sample_box(min: &[f64], max: &[f64], counts: &[usize], jitter_seed: Option<u64>) -> Vec<Vec<f64>> {
    let n = min.len();
    let mut counts = counts.to_vec();
    while counts.iter().product::<usize>() > MAX_GRID_POINTS {
        let i = (0..n).max_by_key(|&i| counts[i]).unwrap();
        counts[i] -= 1;
    }
    let mut rng = jitter_seed.map(ChaCha8Rng::seed_from_u64);
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut p = vec![0.0; n];
        for i in (0..n).rev() {
            let c = counts[i];
            let j = k % c;
            k /= c;
            let w = if c > 1 { (max[i] - min[i]) / (c - 1) as f64 } else { 0.0 };
            p[i] = if c > 1 { min[i] + w * j as f64 } else { 0.5 * (min[i] + max[i]) };
            if let Some(r) = rng.as_mut() {
                let cell = if c > 1 { w } else { max[i] - min[i] };
                p[i] += JITTER * cell * r.gen_range(-0.5..0.5);
            }
        }
        out.push(p);
    }
    out
}

pub fn parse_manifold(text: &str) -> Result<ManifoldFile, CliError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let n = raw.dimension;
    if raw.coords.len() != n {
        return Err(CliError::field("coords", format!("{} names for dimension {n}", raw.coords.len())));
    }
    if raw.metric.len() != n || raw.metric.iter().any(|r| r.len() != n) {
        return Err(CliError::field("metric", format!("expected a {n}×{n} array")));
    }
    let c = &raw.coords;
    let mut g = Vec::with_capacity(n * n);
    for (i, row) in raw.metric.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            g.push(expr(s, c, &format!("metric[{i}][{j}]"))?);
        }
    }
    let m = match &raw.m {
        MValue::Num(x) => DimParam::Finite(*x),
        MValue::Text(s) => match s.trim() {
            "inf" | "+inf" => DimParam::PosInf,
            "-inf" => DimParam::NegInf,
            t => DimParam::Finite(t.parse().map_err(|_| CliError::field("m", format!("expected a number or \"inf\", got {t:?}")))?),
        },
    };
    let density = match (&raw.v, &raw.phi) {
        (Some(v), None) => Density::V(expr(v, c, "v")?),
        (None, Some(p)) => Density::Phi(expr(p, c, "phi")?),
        _ => return Err(CliError::field("v/phi", "exactly one of v and phi is required")),
    };
    let spec = SmmsSpec::new(c.clone(), g, density, m, raw.mu)
        .map_err(|e| CliError::field("m", e))?
        .with_lambda(raw.lambda);
    let s = &raw.sampling;
    let points = match (&s.points, &s.min, &s.max) {
        (Some(p), None, None) => p.clone(),
        (None, min, max) => {
            let min = min.clone().unwrap_or_else(|| vec![-0.5; n]);
            let max = max.clone().unwrap_or_else(|| vec![0.5; n]);
            let counts = s.counts.clone().unwrap_or_else(|| vec![DEFAULT_COUNT; n]);
            if min.len() != n || max.len() != n || counts.len() != n || counts.contains(&0) {
                return Err(CliError::field("sampling", format!("min, max and counts need {n} entries, counts positive")));
            }
            sample_box(&min, &max, &counts, Some(s.jitter_seed.unwrap_or(0)))
        }
        _ => return Err(CliError::field("sampling", "give either points or a box, not both")),
    };
    if points.is_empty() || points.iter().any(|p| p.len() != n) {
        return Err(CliError::field("sampling.points", format!("points need {n} coordinates")));
    }
    check_symmetric(&spec, &points[0])?;
    let k = match &raw.k {
        None => None,
        Some(ks) if ks.len() == n => Some(ks.iter().enumerate().map(|(i, s)| expr(s, c, &format!("k[{i}]"))).collect::<Result<_, _>>()?),
        Some(ks) => return Err(CliError::field("k", format!("{} components for dimension {n}", ks.len()))),
    };
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(ManifoldFile { spec, points, config: raw.tolerances, k, digest, seed: s.jitter_seed.unwrap_or(0) })
}

fn check_symmetric(spec: &SmmsSpec, probe: &[f64]) -> Result<(), CliError> {
    let n = spec.n();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&spec.g[i * n + j], &spec.g[j * n + i]);
            if a == b {
                continue;
            }
            let x = a.eval(probe).map_err(|e| CliError::field(format!("metric[{i}][{j}]"), e))?;
            let y = b.eval(probe).map_err(|e| CliError::field(format!("metric[{j}][{i}]"), e))?;
            if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                return Err(CliError::field(format!("metric[{i}][{j}]"), format!("differs from metric[{j}][{i}] ({x} vs {y} at {probe:?})")));
            }
        }
    }
    Ok(())
}

pub fn load(path: &str) -> Result<ManifoldFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|err| CliError::Io { path: path.into(), err })?;
    parse_manifold(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Qe,
    Soliton,
    Static,
    Rank,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "qe" => Ok(Mode::Qe),
            "soliton" => Ok(Mode::Soliton),
            "static" => Ok(Mode::Static),
            "rank" => Ok(Mode::Rank),
            _ => Err(format!("unknown mode {s:?} (qe, soliton, static, rank)")),
        }
    }
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Qe => "qe",
            Mode::Soliton => "soliton",
            Mode::Static => "static",
            Mode::Rank => "rank",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenericityStats {
    pub weakly_generic: usize,
    pub generic: usize,
    pub sigma_min_smallest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub input_digest: String,
    pub status: String,
    pub exit_code: i32,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genericity: Option<GenericityStats>,
    pub worst: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    pub notes: Vec<String>,
    pub details: serde_json::Value,
}

impl Report {
    fn new(command: &str, file: &ManifoldFile) -> Report {
        Report {
            schema: SCHEMA,
            tool: "smms",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            mode: None,
            input_digest: file.digest.clone(),
            status: String::new(),
            exit_code: 0,
            points: file.points.len(),
            genericity: None,
            worst: BTreeMap::new(),
            witness: None,
            notes: vec![],
            details: serde_json::Value::Null,
        }
    }

    fn pass(&mut self, ok: bool) {
        self.status = if ok { "pass" } else { "fail" }.into();
        self.exit_code = if ok { 0 } else { 1 };
    }

    fn decide(&mut self, d: Decision) {
        self.status = serde_json::to_value(d).unwrap().as_str().unwrap().to_string();
        self.exit_code = exit_code(d);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn exit_code(d: Decision) -> i32 {
    match d {
        Decision::Yes => 0,
        Decision::No => 1,
        Decision::NotGeneric => 2,
        Decision::VNonpositive => 3,
    }
}

/// Exit status for errors of the input itself.
pub const EXIT_INPUT: i32 = 3;

fn fill_from(rep: &mut Report, o: &ObstructionReport) {
    let mut st = GenericityStats::default();
    for r in &o.records {
        if let Some(g) = &r.genericity {
            st.weakly_generic += g.weakly_generic as usize;
            st.generic += g.generic as usize;
            st.sigma_min_smallest = Some(st.sigma_min_smallest.map_or(g.sigma_min, |s: f64| s.min(g.sigma_min)));
        }
    }
    if o.records.iter().any(|r| r.genericity.is_some()) {
        rep.genericity = Some(st);
    }
    rep.worst = o.worst.clone();
    rep.witness = o.witness.map(|i| o.records[i].point.clone());
    rep.details = serde_json::json!({ "records": o.records });
    rep.decide(o.decision);
}

fn finite_m(file: &ManifoldFile, what: &str) -> Result<(), CliError> {
    if file.spec.m.is_infinite() {
        return Err(CliError::Mode(format!("{what} needs a finite m, the file has m = {}", file.spec.m)));
    }
    Ok(())
}

pub fn cmd_check(file: &ManifoldFile, mode: Mode) -> Result<Report, CliError> {
    let cfg = &file.config;
    let spec = &file.spec;
    let pts = &file.points;
    let mut rep = Report::new("check", file);
    rep.mode = Some(mode.name().into());
    rep.notes.push("decisions hold on the sampled set only".into());
    match mode {
        Mode::Qe => {
            finite_m(file, "qe mode")?;
            fill_from(&mut rep, &obstruction_g(spec, pts, cfg)?);
        }
        Mode::Rank => {
            finite_m(file, "rank mode")?;
            fill_from(&mut rep, &rank_test(spec, pts, cfg)?);
        }
        Mode::Soliton => {
            if !spec.m.is_infinite() {
                return Err(CliError::Mode(format!("soliton mode needs m = inf, the file has m = {}", spec.m)));
            }
            let o = soliton(spec, pts, spec.mu, cfg)?;
            fill_from(&mut rep, &o);
            let Density::Phi(f) = &spec.density else { unreachable!() };
            let res = soliton_residual(spec, f, spec.mu, pts)?;
            rep.worst.insert("supplied_potential".into(), res);
            residual_mode(&mut rep, o.decision, res <= cfg.decision_tol, "phi");
        }
        Mode::Static => {
            let lambda = spec.lambda.ok_or_else(|| CliError::Mode("static mode needs lambda".into()))?;
            let o = static_metric(spec, pts, lambda, cfg)?;
            fill_from(&mut rep, &o);
            if let Some(v) = spec.v_expr() {
                let (res, r) = static_residual(spec, &v, lambda, pts)?;
                rep.worst.insert("supplied_potential".into(), res);
                rep.worst.insert("supplied_scalar".into(), r);
                residual_mode(&mut rep, o.decision, res <= cfg.decision_tol && r <= cfg.decision_tol, "v");
            }
        }
    }
    Ok(rep)
}

fn residual_mode(rep: &mut Report, d: Decision, ok: bool, name: &str) {
    if ok {
        rep.notes.push(format!("the supplied {name} satisfies the equations at every point"));
        rep.decide(Decision::Yes);
    } else {
        rep.notes.push(format!("the supplied {name} does not satisfy the equations"));
        rep.decide(d);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct VerifyRecord {
    point: Vec<f64>,
    tr_dp: f64,
    tr_a: f64,
    div_a: f64,
    div_dp: f64,
    bach_asymmetry: f64,
    dp_cyclic: f64,
}

pub fn cmd_verify(file: &ManifoldFile) -> Result<Report, CliError> {
    finite_m(file, "verify")?;
    let tol = file.config.identity_tol;
    use rayon::prelude::*;
    let recs: Result<Vec<VerifyRecord>, CliError> = file
        .points
        .par_iter()
        .map(|p| {
            let sj = file.spec.at(p, 4)?;
            let id = sj.verify_identities()?;
            let pack = sj.curvature()?;
            Ok(VerifyRecord {
                point: p.clone(),
                tr_dp: id.tr_dp,
                tr_a: id.tr_a,
                div_a: id.div_a,
                div_dp: id.div_dp,
                bach_asymmetry: pack.bach_asymmetry(),
                dp_cyclic: pack.cyclic_residual(),
            })
        })
        .collect();
    let recs = recs?;
    let mut rep = Report::new("verify", file);
    let mut worst_all = 0.0f64;
    for r in &recs {
        for (k, v) in [
            ("tr_dp", r.tr_dp),
            ("tr_a", r.tr_a),
            ("div_a", r.div_a),
            ("div_dp", r.div_dp),
            ("bach_asymmetry", r.bach_asymmetry),
            ("dp_cyclic", r.dp_cyclic),
        ] {
            let e = rep.worst.entry(k.into()).or_insert(0.0);
            *e = e.max(v);
            worst_all = worst_all.max(v);
        }
    }
    rep.details = serde_json::json!({ "records": recs, "tolerance": tol });
    rep.pass(worst_all <= tol);
    Ok(rep)
}

/// Where `potential` takes `K` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSource {
    File,
    Pipeline(Mode),
}

/// Parses `x0,y0,z0;x1,y1,z1;…`.
pub fn parse_path(s: &str, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let pts: Result<Vec<Vec<f64>>, _> = s
        .split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.split(',').map(|x| x.trim().parse::<f64>()).collect())
        .collect();
    let pts = pts.map_err(|e| CliError::field("--path", e))?;
    if pts.is_empty() || pts.iter().any(|p| p.len() != n) {
        return Err(CliError::field("--path", format!("expected points with {n} coordinates separated by ';'")));
    }
    Ok(pts)
}

fn pipeline_k(file: &ManifoldFile, mode: Mode, p: &[f64]) -> Result<Vec<f64>, ObstructionError> {
    use crate::obstruction::{obstruction_g_at, soliton::soliton_at, statics::static_at};
    let cfg = &file.config;
    let spec = &file.spec;
    let rec = match mode {
        Mode::Qe => obstruction_g_at(spec, p, cfg)?,
        Mode::Soliton => soliton_at(spec, p, spec.mu, cfg)?,
        Mode::Static => static_at(spec, p, spec.lambda.unwrap_or(0.0), cfg)?,
        Mode::Rank => return Err(ObstructionError::Input("the rank test produces no K".into())),
    };
    rec.k.ok_or_else(|| {
        ObstructionError::Input(format!("no K at {p:?}: {}", rec.reason.unwrap_or_else(|| "pipeline stopped".into())))
    })
}

pub fn cmd_potential(file: &ManifoldFile, path: &[Vec<f64>], source: KSource, nodes: usize) -> Result<Report, CliError> {
    let mut rep = Report::new("potential", file);
    rep.points = path.len();
    let from_file;
    let from_pipe;
    let field: &dyn CovectorField = match source {
        KSource::File => {
            let k = file.k.clone().ok_or_else(|| CliError::Mode("the file has no k field; use --from".into()))?;
            from_file = ExprCovector(k);
            &from_file
        }
        KSource::Pipeline(mode) => {
            if mode == Mode::Static && file.spec.lambda.is_none() {
                return Err(CliError::Mode("static K needs lambda".into()));
            }
            from_pipe = FnCovector(move |p: &[f64]| pipeline_k(file, mode, p));
            &from_pipe
        }
    };
    let r = potential_reconstruct(field, path, nodes, &file.config)?;
    rep.worst.insert("curl".into(), r.curl_max);
    rep.worst.insert("loop".into(), r.loop_residual);
    if let (KSource::Pipeline(Mode::Static), Some(v)) = (source, file.spec.v_expr()) {
        let lv0 = v.eval(&path[0]).map_err(SmmsError::from)?.ln();
        let mut e = 0.0f64;
        for (p, f) in path.iter().zip(&r.values) {
            e = e.max((v.eval(p).map_err(SmmsError::from)?.ln() - lv0 - f).abs());
        }
        rep.worst.insert("log_v".into(), e);
    }
    rep.details = serde_json::json!({ "path": path, "f": r.values, "exact": r.exact });
    rep.pass(r.exact);
    if !r.exact {
        rep.notes.push("K is not exact along the path; no potential".into());
    }
    Ok(rep)
}

pub fn cmd_harnack(file: &ManifoldFile, m_list: &[f64], trials: usize) -> Result<Report, CliError> {
    let spec = &file.spec;
    let n = spec.n();
    let tol = file.config.identity_tol;
    use rayon::prelude::*;
    let per_point: Result<Vec<serde_json::Value>, CliError> = file
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(file.seed.wrapping_add(i as u64));
            let mut worst = BTreeMap::<String, f64>::new();
            let mut first = None;
            for t in 0..trials.max(1) {
                let data = random_data(n, &mut rng);
                let tf = random_symmetric_field(&spec.coords, rng.gen());
                let r = harnack_at(&spec.coords, &spec.g, p, m_list, &data, Some(&tf))?;
                for (k, v) in [
                    ("identity", r.identity.iter().copied().fold(0.0, f64::max)),
                    ("gauge", r.gauge.iter().copied().fold(0.0, f64::max)),
                    ("weitzenbock", r.weitzenbock.unwrap_or(0.0)),
                ] {
                    let e = worst.entry(k.into()).or_insert(0.0);
                    *e = e.max(v);
                }
                let e = worst.entry("hamilton_value_min".into()).or_insert(f64::INFINITY);
                *e = e.min(r.hamilton_value);
                if t == 0 {
                    first = Some(r);
                }
            }
            let r = first.unwrap();
            Ok(serde_json::json!({
                "point": p,
                "worst": worst,
                "asymptotic": r.asymptotic,
                "decay_exponent": r.decay_exponent,
                "hamilton_min_eigenvalue": r.hamilton_min_eigenvalue,
            }))
        })
        .collect();
    let per_point = per_point?;
    let mut rep = Report::new("harnack", file);
    let mut ok = true;
    for rec in &per_point {
        for (k, v) in rec["worst"].as_object().unwrap() {
            let v = v.as_f64().unwrap();
            if k == "hamilton_value_min" {
                let e = rep.worst.entry(k.clone()).or_insert(f64::INFINITY);
                *e = e.min(v);
            } else {
                let e = rep.worst.entry(k.clone()).or_insert(0.0);
                *e = e.max(v);
                ok &= v <= tol;
            }
        }
        let ev = rec["hamilton_min_eigenvalue"].as_f64().unwrap();
        let e = rep.worst.entry("hamilton_min_eigenvalue".into()).or_insert(f64::INFINITY);
        *e = e.min(ev);
        if let Some(d) = rec["decay_exponent"].as_f64() {
            let e = rep.worst.entry("decay_exponent_max".into()).or_insert(f64::NEG_INFINITY);
            *e = e.max(d);
        }
    }
    rep.notes.push(format!("Hamilton form uses μ = −1/2; {} random (α, Φ, φ, β, T) trials per point", trials.max(1)));
    rep.details = serde_json::json!({ "m": m_list, "records": per_point, "tolerance": tol });
    rep.pass(ok);
    Ok(rep)
}
