//! Experiment configuration: flat `key = value` files plus flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use percwalk::graph::{Point, MAX_DIM};
use percwalk::{Edge, GraphFamily, VertexId};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{source_name}:{line}: {message}")]
    Line { source_name: String, line: usize, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    CpScan,
    Boundary,
    Variance,
    Laplace,
    Sausage,
    Intersect,
    Fluctuate,
    HairyDemo,
    OracleCheck,
    Capacity,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Simulate,
        Experiment::CpScan,
        Experiment::Boundary,
        Experiment::Variance,
        Experiment::Laplace,
        Experiment::Sausage,
        Experiment::Intersect,
        Experiment::Fluctuate,
        Experiment::HairyDemo,
        Experiment::OracleCheck,
        Experiment::Capacity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::CpScan => "cp-scan",
            Experiment::Boundary => "boundary",
            Experiment::Variance => "variance",
            Experiment::Laplace => "laplace",
            Experiment::Sausage => "sausage",
            Experiment::Intersect => "intersect",
            Experiment::Fluctuate => "fluctuate",
            Experiment::HairyDemo => "hairy-demo",
            Experiment::OracleCheck => "oracle-check",
            Experiment::Capacity => "capacity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|e| e.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// CSV for `simulate`, JSON otherwise.
    Auto,
    Csv,
    Json,
}

impl Format {
    fn name(&self) -> &'static str {
        match self {
            Format::Auto => "auto",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A probability kept as written, so the oracle can read it exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Prob {
    pub text: String,
    pub value: f64,
    pub num: i64,
    pub den: i64,
}

impl Prob {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, den) = if let Some((a, b)) = s.split_once('/') {
            let a: i64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: i64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            (a, b)
        } else {
            decimal_ratio(s).ok_or_else(|| format!("{s:?} is not a decimal or a ratio a/b"))?
        };
        if den <= 0 || num < 0 || num > den {
            return Err(format!("{s:?} is not a probability in [0, 1]"));
        }
        Ok(Prob { text: s.to_string(), value: num as f64 / den as f64, num, den })
    }
}

fn decimal_ratio(s: &str) -> Option<(i64, i64)> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 15 {
        return None;
    }
    let digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return None;
    }
    let den = 10i64.pow(frac.len() as u32);
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some((int.checked_mul(den)?.checked_add(frac)?, den))
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub graph: String,
    pub p: Prob,
    pub p_values: Vec<Prob>,
    pub n: usize,
    pub n_values: Vec<usize>,
    pub replicas: u64,
    pub seed: u64,
    pub escape_radius: u64,
    pub cluster_cap: usize,
    pub walks: u64,
    pub method: String,
    pub theta: f64,
    pub transform: String,
    pub shells: Vec<i32>,
    pub windows: Vec<usize>,
    pub reference_replicas: u64,
    pub mode: String,
    pub k: usize,
    pub repeats: u64,
    pub radii: Vec<usize>,
    pub set: String,
    pub box_radius: usize,
    pub out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub format: Format,
}

/// Keys in serialization order.
pub const KEYS: [&str; 26] = [
    "experiment",
    "graph",
    "p",
    "p_values",
    "n",
    "n_values",
    "replicas",
    "seed",
    "escape_radius",
    "cluster_cap",
    "walks",
    "method",
    "theta",
    "transform",
    "shells",
    "windows",
    "reference_replicas",
    "mode",
    "k",
    "repeats",
    "radii",
    "set",
    "box_radius",
    "out",
    "trace_out",
    "format",
];

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        let p = Prob::parse("0").unwrap();
        Self {
            experiment,
            graph: "z2".into(),
            p,
            p_values: Vec::new(),
            n: 1000,
            n_values: Vec::new(),
            replicas: 100,
            seed: 0,
            escape_radius: 100,
            cluster_cap: percwalk::percolation::DEFAULT_CLUSTER_CAP,
            walks: 100,
            method: "lln".into(),
            theta: 0.5,
            transform: "negative".into(),
            shells: Vec::new(),
            windows: Vec::new(),
            reference_replicas: 50,
            mode: "desk".into(),
            k: 4,
            repeats: 0,
            radii: vec![25, 50, 100],
            set: "origin".into(),
            box_radius: 2,
            out: None,
            trace_out: None,
            format: Format::Auto,
        }
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let err = |m: String| field_err(key, m);
        match key {
            "experiment" => {
                self.experiment = Experiment::parse(v).ok_or_else(|| err(format!("unknown experiment {v:?}")))?
            }
            "graph" => {
                parse_graph(v).map_err(err)?;
                self.graph = v.to_string();
            }
            "p" => self.p = Prob::parse(v).map_err(err)?,
            "p_values" => self.p_values = split(v).map(Prob::parse).collect::<Result<_, _>>().map_err(err)?,
            "n" => self.n = parse_num(v, 0, 1_000_000_000).map_err(err)? as usize,
            "n_values" => self.n_values = parse_list(v, 1, 1_000_000_000, true).map_err(err)?,
            "replicas" => self.replicas = parse_num(v, 1, 1_000_000_000).map_err(err)?,
            "seed" => self.seed = v.parse().map_err(|_| err(format!("{v:?} is not a u64")))?,
            "escape_radius" => self.escape_radius = parse_num(v, 1, 1_000_000).map_err(err)?,
            "cluster_cap" => self.cluster_cap = parse_num(v, 1, 1_000_000_000).map_err(err)? as usize,
            "walks" => self.walks = parse_num(v, 1, 1_000_000_000).map_err(err)?,
            "method" => {
                one_of(v, &["lln", "cluster_capacity", "cluster_escape", "all", "exact", "mc", "compare"]).map_err(err)?;
                self.method = v.to_string();
            }
            "theta" => {
                let t: f64 = v.parse().map_err(|_| err(format!("{v:?} is not a number")))?;
                if !(t > 0.0 && t <= 100.0) {
                    return Err(err(format!("θ = {t} must lie in (0, 100]")));
                }
                self.theta = t;
            }
            "transform" => {
                one_of(v, &["negative", "positive"]).map_err(err)?;
                self.transform = v.to_string();
            }
            "shells" => {
                let s: Vec<usize> = if v.is_empty() { Vec::new() } else { parse_list(v, 1, 1 << 20, true).map_err(err)? };
                self.shells = s.into_iter().map(|x| x as i32).collect();
            }
            "windows" => self.windows = parse_list(v, 1, 1_000_000_000, true).map_err(err)?,
            "reference_replicas" => self.reference_replicas = parse_num(v, 2, 1_000_000_000).map_err(err)?,
            "mode" => {
                one_of(v, &["desk", "paper"]).map_err(err)?;
                self.mode = v.to_string();
            }
            "k" => self.k = parse_num(v, 1, 64).map_err(err)? as usize,
            "repeats" => self.repeats = parse_num(v, 0, 1_000_000).map_err(err)?,
            "radii" => self.radii = parse_list(v, 3, 10_000, true).map_err(err)?,
            "set" => {
                parse_set(v, 4).map_err(err)?;
                self.set = v.to_string();
            }
            "box_radius" => self.box_radius = parse_num(v, 0, 10).map_err(err)? as usize,
            "out" => self.out = (!v.is_empty()).then(|| PathBuf::from(v)),
            "trace_out" => self.trace_out = (!v.is_empty()).then(|| PathBuf::from(v)),
            "format" => {
                self.format = match v {
                    "auto" => Format::Auto,
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(err(format!("{v:?} is not one of auto, csv, json"))),
                }
            }
            _ => return Err(field_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Text form of one key.
    pub fn get(&self, key: &str) -> Option<String> {
        let join = |xs: Vec<String>| xs.join(",");
        Some(match key {
            "experiment" => self.experiment.name().into(),
            "graph" => self.graph.clone(),
            "p" => self.p.text.clone(),
            "p_values" => join(self.p_values.iter().map(|p| p.text.clone()).collect()),
            "n" => self.n.to_string(),
            "n_values" => join(self.n_values.iter().map(|x| x.to_string()).collect()),
            "replicas" => self.replicas.to_string(),
            "seed" => self.seed.to_string(),
            "escape_radius" => self.escape_radius.to_string(),
            "cluster_cap" => self.cluster_cap.to_string(),
            "walks" => self.walks.to_string(),
            "method" => self.method.clone(),
            "theta" => self.theta.to_string(),
            "transform" => self.transform.clone(),
            "shells" => join(self.shells.iter().map(|x| x.to_string()).collect()),
            "windows" => join(self.windows.iter().map(|x| x.to_string()).collect()),
            "reference_replicas" => self.reference_replicas.to_string(),
            "mode" => self.mode.clone(),
            "k" => self.k.to_string(),
            "repeats" => self.repeats.to_string(),
            "radii" => join(self.radii.iter().map(|x| x.to_string()).collect()),
            "set" => self.set.clone(),
            "box_radius" => self.box_radius.to_string(),
            "out" => self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "trace_out" => self.trace_out.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "format" => self.format.name().into(),
            _ => return None,
        })
    }

    /// Reads `key = value` lines; `#` starts a comment. Later lines override earlier ones.
    pub fn parse_str(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::new(Experiment::Simulate);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| ConfigError::Line { source_name: source_name.into(), line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(k.trim(), v).map_err(|e| at(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Cross-field checks run after all overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.experiment == Experiment::Fluctuate && self.windows.is_empty() {
            return Err(field_err("windows", "fluctuate needs at least one window"));
        }
        if matches!(self.experiment, Experiment::Boundary | Experiment::Variance) && self.n_values.is_empty() {
            return Err(field_err("n_values", "needs at least one value"));
        }
        if self.experiment == Experiment::Laplace && self.transform == "positive" && self.theta > 0.05 {
            return Err(field_err("theta", "the positive transform needs θ <= 0.05"));
        }
        if self.experiment == Experiment::Variance && self.replicas < 1000 {
            return Err(field_err("replicas", "variance scaling needs at least 1000 replicas"));
        }
        Ok(())
    }

    pub fn graph_family(&self) -> Result<GraphFamily, ConfigError> {
        parse_graph(&self.graph).map_err(|m| field_err("graph", m))
    }
}

impl fmt::Display for ExperimentConfig {
    /// One `key = value` line per key, in [`KEYS`] order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in KEYS {
            writeln!(f, "{k} = {}", self.get(k).unwrap_or_default())?;
        }
        Ok(())
    }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num(v: &str, lo: u64, hi: u64) -> Result<u64, String> {
    let x: u64 = v.replace('_', "").parse().map_err(|_| format!("{v:?} is not a nonnegative integer"))?;
    if x < lo || x > hi {
        return Err(format!("{x} is outside [{lo}, {hi}]"));
    }
    Ok(x)
}

fn parse_list(v: &str, lo: u64, hi: u64, increasing: bool) -> Result<Vec<usize>, String> {
    let xs: Vec<usize> = split(v).map(|s| parse_num(s, lo, hi).map(|x| x as usize)).collect::<Result<_, _>>()?;
    if increasing && xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err("values must be strictly increasing".into());
    }
    Ok(xs)
}

fn one_of(v: &str, options: &[&str]) -> Result<(), String> {
    if options.contains(&v) {
        Ok(())
    } else {
        Err(format!("{v:?} is not one of {}", options.join(", ")))
    }
}

fn parse_point(s: &str, d: usize) -> Result<Point, String> {
    let cs: Vec<i32> = s
        .split(',')
        .map(|c| c.trim().parse::<i32>().map_err(|_| format!("bad coordinate in {s:?}")))
        .collect::<Result<_, _>>()?;
    if cs.len() != d {
        return Err(format!("point {s:?} needs {d} coordinates"));
    }
    let mut p = [0; MAX_DIM];
    p[..d].copy_from_slice(&cs);
    Ok(p)
}

/// Graph spec: `zD`, `zlinfD`, `alt3[M1,M2,...]`, `hairy[a1,a2,...:b1,b2,...]` or
/// `fm[BASE;R;+x,y~x,y;-x,y~x,y]` (a finite modification adding `+` and removing `-` edges).
pub fn parse_graph(spec: &str) -> Result<GraphFamily, String> {
    let s = spec.trim();
    let inner = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(']'));
    if let Some(d) = s.strip_prefix("zlinf") {
        return GraphFamily::linf(d.parse().map_err(|_| format!("bad dimension in {s:?}"))?).map_err(|e| e.to_string());
    }
    if let Some(d) = s.strip_prefix('z') {
        return GraphFamily::nearest(d.parse().map_err(|_| format!("bad dimension in {s:?}"))?)
            .map_err(|e| e.to_string());
    }
    if let Some(body) = inner("alt3[") {
        let shells = split(body)
            .map(|x| x.parse::<i32>().map_err(|_| format!("bad shell radius {x:?}")))
            .collect::<Result<_, _>>()?;
        return GraphFamily::alternating(shells).map_err(|e| e.to_string());
    }
    if let Some(body) = inner("hairy[") {
        let (a, b) = body.split_once(':').ok_or("hairy spec needs anchors:hairs")?;
        let nums = |t: &str| -> Result<Vec<u64>, String> {
            split(t).map(|x| x.parse::<u64>().map_err(|_| format!("bad count {x:?}"))).collect()
        };
        return GraphFamily::hairy(nums(a)?, nums(b)?).map_err(|e| e.to_string());
    }
    if let Some(body) = inner("fm[") {
        let mut parts = body.split(';');
        let base = parse_graph(parts.next().unwrap_or(""))?;
        let d = base.lattice_dim().ok_or("finite modifications need a lattice base")?;
        let radius: usize = parts
            .next()
            .and_then(|r| r.trim().parse().ok())
            .ok_or("finite modification needs a radius")?;
        let (mut added, mut removed) = (Vec::new(), Vec::new());
        for part in parts {
            let part = part.trim();
            let (sign, rest) = part.split_at(1.min(part.len()));
            let (u, v) = rest.split_once('~').ok_or_else(|| format!("edge {part:?} needs the form +x,y~x,y"))?;
            let e = Edge::new(VertexId::Lattice(parse_point(u, d)?), VertexId::Lattice(parse_point(v, d)?))
                .map_err(|e| e.to_string())?;
            match sign {
                "+" => added.push(e),
                "-" => removed.push(e),
                _ => return Err(format!("edge {part:?} must start with + or -")),
            }
        }
        return GraphFamily::finite_modification(base, radius, added, removed).map_err(|e| e.to_string());
    }
    Err(format!("unknown graph {s:?}"))
}

/// Finite set spec: `origin`, `pair` (origin and the first unit vector), `cube:R` (ℓ∞ ball of
/// radius `R`) or `points:x,y,z;x,y,z`.
pub fn parse_set(spec: &str, d: usize) -> Result<Vec<Point>, String> {
    let s = spec.trim();
    if s == "origin" {
        return Ok(vec![[0; MAX_DIM]]);
    }
    if s == "pair" {
        let mut e = [0; MAX_DIM];
        e[0] = 1;
        return Ok(vec![[0; MAX_DIM], e]);
    }
    if let Some(r) = s.strip_prefix("cube:") {
        let r: i32 = r.parse().map_err(|_| format!("bad cube radius in {s:?}"))?;
        if !(0..=10).contains(&r) {
            return Err("cube radius must lie in [0, 10]".into());
        }
        return percwalk::union::SausageShape::linf_ball(d, r).map(|b| b.points().to_vec()).map_err(|e| e.to_string());
    }
    if let Some(body) = s.strip_prefix("points:") {
        let pts: Vec<Point> = body.split(';').map(|p| parse_point(p, d)).collect::<Result<_, _>>()?;
        if pts.is_empty() {
            return Err("empty point set".into());
        }
        return Ok(pts);
    }
    Err(format!("unknown set {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::new(Experiment::Fluctuate);
        c.set("shells", "6,20").unwrap();
        c.set("p", "1/20").unwrap();
        c.set("windows", "1000, 8000").unwrap();
        c.set("theta", "0.1").unwrap();
        c.set("out", "x.json").unwrap();
        let text = c.to_string();
        assert_eq!(ExperimentConfig::parse_str(&text, "t").unwrap(), c);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let e = ExperimentConfig::parse_str("graph = z3\n\np = 1.5\n", "cfg.txt").unwrap_err();
        let msg = e.to_string();
        assert!(msg.starts_with("cfg.txt:3:"), "{msg}");
        assert!(msg.contains("`p`"), "{msg}");
        assert!(ExperimentConfig::parse_str("nonsense\n", "c").is_err());
        assert!(ExperimentConfig::parse_str("colour = red\n", "c").is_err());
    }

    #[test]
    fn probabilities_are_exact() {
        let p = Prob::parse("0.1").unwrap();
        assert_eq!((p.num, p.den), (1, 10));
        let p = Prob::parse("2/5").unwrap();
        assert_eq!(p.value, 0.4);
        assert!(Prob::parse("3/2").is_err());
        assert!(Prob::parse("-0.1").is_err());
    }

    #[test]
    fn graph_specs() {
        for s in ["z1", "z3", "zlinf3", "alt3[6,20]", "alt3[]", "hairy[7,10:68,103]", "fm[z2;2;+0,0~1,1]"] {
            assert!(parse_graph(s).is_ok(), "{s}");
        }
        assert!(parse_graph("fm[z2;1;+0,0~1,1]").is_err());
        assert!(parse_graph("z9").is_err());
        assert!(parse_graph("torus").is_err());
        assert_eq!(parse_set("cube:1", 3).unwrap().len(), 27);
    }
}
