//! One function per subcommand, each producing a [`Report`].

use num_bigint::BigInt;
use percwalk::capacity::{capacity_compare_z3, capacity_exact, capacity_mc, CapacityEstimate, Uncertainty};
use percwalk::estimators::{
    boundary_scaling, estimate_cp_cluster, estimate_cp_lln, laplace_negative, laplace_positive_small_theta,
    replica_snapshots, variance_scaling, ClusterMethod, CpEstimate, VarianceNorm,
};
use percwalk::graph::{Point, ScheduleMode};
use percwalk::oracle::{exact_line_cluster_law, exact_mean_union};
use percwalk::parallel::map_replicas;
use percwalk::percolation::{cluster_size_tail, temperley_lower_bound, PercolationConfig};
use percwalk::rng::{WalkRng, TAG_AUX};
use percwalk::stats::{combined_se, z_quantile, BatchStats, DEFAULT_CI_LEVEL};
use percwalk::union::{intersection_volume, sausage_volume, union_volume, walk_rng, SausageShape};
use percwalk::{ExactRational, GraphFamily, VertexId};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{parse_set, ConfigError, Experiment, ExperimentConfig, Format};
use crate::demos::{fluctuation_demo, hairy_demo};
use crate::output::Report;

/// Replica offset separating cluster-estimator configurations from walk replicas.
pub const CLUSTER_REPLICA_OFFSET: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] percwalk::Error),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Rendered outputs of a run.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: Report,
    /// Main artifact in the configured format.
    pub primary: String,
    /// Per-step trace of replica 0 (`simulate` only).
    pub trace: Option<String>,
}

fn perc(cfg: &ExperimentConfig, p: f64) -> Result<PercolationConfig, RunError> {
    Ok(PercolationConfig::new(p, cfg.seed)?.with_cap(cfg.cluster_cap)?)
}

fn ci(mean: f64, se: f64) -> (f64, f64) {
    let z = z_quantile(DEFAULT_CI_LEVEL);
    (mean - z * se, mean + z * se)
}

fn temperley_warning(g: &GraphFamily, p: f64) -> Option<String> {
    let b = temperley_lower_bound(g);
    (b.note.is_none() && p >= b.value / 2.0).then(|| {
        format!("p = {p} is at least half the lower bound {:.6} on the critical point of {g}; clusters may be large", b.value)
    })
}

fn lattice_vertices(points: &[Point]) -> Vec<VertexId> {
    points.iter().map(|p| VertexId::Lattice(*p)).collect()
}

fn capacity_json(c: &CapacityEstimate<f64>) -> Value {
    let (lo, hi, se) = match c.uncertainty {
        Uncertainty::Bracket { lower, upper } => (lower, upper, f64::NAN),
        Uncertainty::StandardError(se) => (c.value - se, c.value + se, se),
        Uncertainty::Unavailable => (f64::NAN, f64::NAN, f64::NAN),
    };
    json!({
        "value": c.value,
        "method": c.method.tag(),
        "lower": lo,
        "upper": hi,
        "se": se,
        "radii": c.radii,
        "monotone": c.monotone,
        "per_radius": c.per_radius.iter().map(|r| json!({
            "radius": r.radius, "value": r.value, "conductance": r.conductance,
            "iterations": r.iterations, "residual": r.residual, "unknowns": r.unknowns,
        })).collect::<Vec<_>>(),
    })
}

fn cp_row(e: &CpEstimate) -> Vec<Value> {
    let (lo, hi) = e.ci(DEFAULT_CI_LEVEL);
    vec![
        json!(e.p),
        json!(e.method.tag()),
        json!(e.value),
        json!(e.se),
        json!(lo),
        json!(hi),
        json!(e.n),
        json!(e.replicas),
        json!(e.excluded),
        json!(e.truncation_rate),
    ]
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    cfg.validate()?;
    let mut trace = None;
    let mut report = match cfg.experiment {
        Experiment::Simulate => {
            let (r, t) = simulate(cfg)?;
            trace = t;
            r
        }
        Experiment::CpScan => cp_scan(cfg)?,
        Experiment::Boundary => boundary(cfg)?,
        Experiment::Variance => variance(cfg)?,
        Experiment::Laplace => laplace(cfg)?,
        Experiment::Sausage => sausage(cfg)?,
        Experiment::Intersect => intersect(cfg)?,
        Experiment::Fluctuate => fluctuate(cfg)?,
        Experiment::HairyDemo => hairy(cfg)?,
        Experiment::OracleCheck => oracle_check(cfg)?,
        Experiment::Capacity => capacity(cfg)?,
    };
    if !matches!(cfg.experiment, Experiment::Fluctuate | Experiment::HairyDemo) {
        let g = cfg.graph_family()?;
        let ps: Vec<f64> = if cfg.p_values.is_empty() { vec![cfg.p.value] } else { cfg.p_values.iter().map(|p| p.value).collect() };
        if let Some(w) = ps.iter().filter_map(|&p| temperley_warning(&g, p)).next() {
            report.warnings.insert(0, w);
        }
    }
    let csv = match cfg.format {
        Format::Csv => true,
        Format::Json => false,
        Format::Auto => cfg.experiment == Experiment::Simulate,
    };
    let primary = if csv { report.to_csv() } else { report.to_json(cfg) };
    Ok(Artifacts { report, primary, trace })
}

fn simulate(cfg: &ExperimentConfig) -> Result<(Report, Option<String>), RunError> {
    let g = cfg.graph_family()?;
    let pc = perc(cfg, cfg.p.value)?;
    let n = cfg.n;
    let runs = map_replicas(cfg.replicas, |r| replica_snapshots(&g, &pc.with_replica(r), &[n], true));
    let mut report = Report::new(g.to_string(), cfg.p.value, "U_n/n");
    report.n = Some(n);
    report.columns = columns(&["replica", "n", "R_n", "L_n", "U_n", "truncated"]);
    let mut st = BatchStats::<f64>::new();
    let mut truncated = 0u64;
    for (r, s) in runs.into_iter().enumerate() {
        let s = s?[0];
        st.push(s.union as f64 / n.max(1) as f64);
        truncated += s.truncated as u64;
        report.rows.push(vec![json!(r), json!(n), json!(s.range), json!(s.boundary), json!(s.union), json!(s.truncated)]);
    }
    let (m, se) = st.mean_se_f64();
    report.headline(m, se, ci(m, se));
    report.truncation_rate = truncated as f64 / cfg.replicas as f64;
    let trace = match &cfg.trace_out {
        Some(_) => {
            let run = union_volume(&g, &pc, &g.origin(), n)?;
            let rows: Vec<Vec<Value>> = (0..=n)
                .map(|k| vec![json!(k), json!(run.r_sequence[k]), json!(run.l_sequence[k]), json!(run.u_sequence[k])])
                .collect();
            Some(crate::output::csv(&columns(&["k", "R_k", "L_k", "U_k"]), &rows))
        }
        None => None,
    };
    Ok((report, trace))
}

fn cp_scan(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let ps: Vec<f64> = if cfg.p_values.is_empty() { vec![cfg.p.value] } else { cfg.p_values.iter().map(|p| p.value).collect() };
    let methods: Vec<&str> = match cfg.method.as_str() {
        "all" => vec!["lln", "cluster_capacity", "cluster_escape"],
        "lln" | "cluster_capacity" | "cluster_escape" => vec![cfg.method.as_str()],
        m => return Err(ConfigError::Field { field: "method".into(), message: format!("{m:?} does not apply to cp-scan") }.into()),
    };
    let mut report = Report::new(g.to_string(), *ps.last().unwrap_or(&0.0), cfg.method.clone());
    report.n = Some(cfg.n);
    report.columns = columns(&["p", "method", "value", "se", "ci_low", "ci_high", "n", "replicas", "excluded", "truncation_rate"]);
    let mut by_method: Vec<(String, Vec<CpEstimate>)> = Vec::new();
    for m in &methods {
        let mut ests = Vec::new();
        for &p in &ps {
            let pc = perc(cfg, p)?;
            let e = match *m {
                "lln" => estimate_cp_lln(&g, &pc, cfg.n, cfg.replicas)?,
                "cluster_capacity" => estimate_cp_cluster(
                    &g,
                    &pc.with_replica(CLUSTER_REPLICA_OFFSET),
                    cfg.replicas,
                    ClusterMethod::Capacity,
                    cfg.escape_radius,
                    cfg.walks,
                )?,
                _ => estimate_cp_cluster(
                    &g,
                    &pc.with_replica(CLUSTER_REPLICA_OFFSET),
                    cfg.replicas,
                    ClusterMethod::EscapeFormula,
                    cfg.escape_radius,
                    cfg.walks,
                )?,
            };
            if let Some(w) = &e.warning {
                report.warnings.push(format!("{} at p = {p}: {w}", e.method.tag()));
            }
            report.rows.push(cp_row(&e));
            ests.push(e);
        }
        by_method.push((m.to_string(), ests));
    }
    // Increments between successive p values, in units of the combined error.
    let mut monotone = serde_json::Map::new();
    for (m, ests) in &by_method {
        let gaps: Vec<Value> = ests
            .windows(2)
            .map(|w| {
                let gap = w[1].value - w[0].value;
                let se = combined_se(w[0].se, w[1].se);
                json!({"from": w[0].p, "to": w[1].p, "gap": gap, "se": se, "sigmas": gap / se})
            })
            .collect();
        let increasing = ests.windows(2).all(|w| w[1].value > w[0].value);
        monotone.insert(m.clone(), json!({"strictly_increasing": increasing, "gaps": gaps}));
    }
    report.detail("monotonicity", Value::Object(monotone));
    if by_method.len() > 1 {
        let (a, b) = (&by_method[0].1, &by_method[1].1);
        let agreement: Vec<Value> = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let se = combined_se(x.se, y.se);
                json!({"p": x.p, "difference": x.value - y.value, "se": se, "sigmas": (x.value - y.value) / se})
            })
            .collect();
        report.detail("agreement", json!({"methods": [by_method[0].0, by_method[1].0], "rows": agreement}));
    }
    if let Some(e) = by_method.first().and_then(|m| m.1.last()) {
        report.headline(e.value, e.se, e.ci(DEFAULT_CI_LEVEL));
        report.truncation_rate = e.truncation_rate;
    }
    Ok(report)
}

fn boundary(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let rows = boundary_scaling(&g, &cfg.n_values, cfg.replicas, cfg.seed)?;
    let mut report = Report::new(g.to_string(), 0.0, "(log n)^2/n L_n");
    report.columns = columns(&["n", "mean_L", "se_L", "mean_L2", "normalized", "normalized_se", "mean_L_over_R", "ratio_se"]);
    for r in &rows {
        report.rows.push(vec![
            json!(r.n),
            json!(r.mean_l),
            json!(r.se_l),
            json!(r.mean_l2),
            json!(r.normalized),
            json!(r.normalized_se),
            json!(r.mean_ratio),
            json!(r.ratio_se),
        ]);
    }
    if let Some(last) = rows.last() {
        report.n = Some(last.n);
        report.headline(last.normalized, last.normalized_se, ci(last.normalized, last.normalized_se));
    }
    if rows.len() >= 2 {
        report.detail("ratio_decreasing", json!(rows.windows(2).all(|w| w[1].mean_ratio < w[0].mean_ratio)));
    }
    Ok(report)
}

fn variance(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let norm = if g.lattice_dim() == Some(2) && g.is_recurrent() { VarianceNorm::Planar } else { VarianceNorm::Diffusive };
    let rows = variance_scaling(&g, &perc(cfg, cfg.p.value)?, &cfg.n_values, cfg.replicas, norm)?;
    let label = match norm {
        VarianceNorm::Planar => "(log n)^4/n^2 Var(U_n)",
        VarianceNorm::Diffusive => "Var(U_n)/n",
    };
    let mut report = Report::new(g.to_string(), cfg.p.value, label);
    report.columns = columns(&["n", "mean", "variance", "variance_se", "normalized", "normalized_se"]);
    for r in &rows {
        report.rows.push(vec![
            json!(r.n),
            json!(r.mean),
            json!(r.variance),
            json!(r.variance_se),
            json!(r.normalized),
            json!(r.normalized_se),
        ]);
    }
    if let Some(last) = rows.last() {
        report.n = Some(last.n);
        report.headline(last.normalized, last.normalized_se, ci(last.normalized, last.normalized_se));
    }
    if rows.len() >= 2 {
        let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].normalized / w[0].normalized).collect();
        report.detail("successive_ratios", json!(ratios));
    }
    Ok(report)
}

fn laplace(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let pc = perc(cfg, cfg.p.value)?;
    let ns = if cfg.n_values.is_empty() { vec![cfg.n] } else { cfg.n_values.clone() };
    if cfg.transform == "positive" {
        let l = laplace_positive_small_theta(&g, &pc, cfg.theta, &ns, cfg.replicas)?;
        let mut report = Report::new(g.to_string(), cfg.p.value, "log E exp(θU_{n-1}) / n");
        report.columns = columns(&["n", "value", "se", "jensen_floor", "running_inf"]);
        for r in &l.rows {
            report.rows.push(vec![json!(r.n), json!(r.value), json!(r.se), json!(r.jensen_floor), json!(r.running_inf)]);
        }
        if let Some(r) = l.rows.last() {
            report.n = Some(r.n);
            report.headline(r.running_inf, r.se, ci(r.running_inf, r.se));
        }
        report.truncation_rate = l.truncation_rate;
        report.detail("theta", json!(cfg.theta));
        report.detail("jensen_holds", json!(l.jensen_holds()));
        report.detail("aborted", json!(l.aborted));
        if let Some(a) = &l.aborted {
            report.warnings.push(a.clone());
        }
        return Ok(report);
    }
    let mut report = Report::new(g.to_string(), cfg.p.value, "-log E exp(-θU_n) / n^(d/(d+2))");
    report.columns = columns(&[
        "n", "u_side", "u_se", "r_side", "r_se", "scale", "u_normalized", "r_normalized", "gap_normalized", "dominated",
    ]);
    let mut last = None;
    let mut gaps = Vec::new();
    for &n in &ns {
        let l = laplace_negative(&g, &pc, cfg.theta, n, cfg.replicas)?;
        report.rows.push(vec![
            json!(l.n),
            json!(l.u_side),
            json!(l.u_se),
            json!(l.r_side),
            json!(l.r_se),
            json!(l.scale),
            json!(l.u_normalized),
            json!(l.r_normalized),
            json!(l.gap_normalized),
            json!(l.dominated),
        ]);
        report.truncation_rate = report.truncation_rate.max(l.truncation_rate);
        gaps.push(l.gap_normalized);
        last = Some(l);
    }
    if let Some(l) = last {
        report.n = Some(l.n);
        let se = l.u_se / l.scale;
        report.headline(l.u_normalized, se, ci(l.u_normalized, se));
    }
    report.detail("theta", json!(cfg.theta));
    report.detail("gap_shrinks", json!(gaps.windows(2).all(|w| w[1] < w[0])));
    Ok(report)
}

fn sausage(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let d = g.lattice_dim().filter(|_| g.is_vertex_transitive()).ok_or_else(|| ConfigError::Field {
        field: "graph".into(),
        message: "the sausage needs a pure lattice".into(),
    })?;
    let points = parse_set(&cfg.set, d).map_err(|m| ConfigError::Field { field: "set".into(), message: m })?;
    let shape = SausageShape::new(points.clone())?;
    let pc = perc(cfg, 0.0)?;
    let n = cfg.n.max(1);
    let vols = map_replicas(cfg.replicas, |r| sausage_volume(&g, &shape, &g.origin(), n, &mut walk_rng(&pc.with_replica(r))));
    let mut report = Report::new(g.to_string(), 0.0, "U_n(A)/n");
    report.n = Some(n);
    report.columns = columns(&["replica", "n", "volume", "volume_over_n"]);
    let mut st = BatchStats::<f64>::new();
    for (r, v) in vols.into_iter().enumerate() {
        let v = v?;
        st.push(v as f64 / n as f64);
        report.rows.push(vec![json!(r), json!(n), json!(v), json!(v as f64 / n as f64)]);
    }
    let (m, se) = st.mean_se_f64();
    report.headline(m, se, ci(m, se));
    report.detail("set_size", json!(points.len()));
    if !cfg.radii.is_empty() {
        let cap = capacity_exact::<f64>(&g, &lattice_vertices(&points), &cfg.radii)?;
        report.detail("capacity", capacity_json(&cap));
        report.detail("sigmas_from_capacity", json!((m - cap.value) / se));
    }
    Ok(report)
}

fn intersect(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let pc = perc(cfg, cfg.p.value)?;
    let runs = map_replicas(cfg.replicas, |r| intersection_volume(&g, &pc.with_replica(r), cfg.n));
    let mut report = Report::new(g.to_string(), cfg.p.value, "I_n");
    report.n = Some(cfg.n);
    report.columns = columns(&["replica", "n", "I_n", "U_first", "U_second", "truncated"]);
    let mut st = BatchStats::<f64>::new();
    let mut truncated = 0u64;
    for (r, x) in runs.into_iter().enumerate() {
        let x = x?;
        st.push(x.value as f64);
        truncated += x.truncated as u64;
        report.rows.push(vec![json!(r), json!(cfg.n), json!(x.value), json!(x.first), json!(x.second), json!(x.truncated)]);
    }
    let (m, se) = st.mean_se_f64();
    report.headline(m, se, ci(m, se));
    report.truncation_rate = truncated as f64 / cfg.replicas as f64;
    Ok(report)
}

fn fluctuate(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let pc = perc(cfg, cfg.p.value)?;
    let f = fluctuation_demo(&cfg.shells, &pc, &cfg.windows, cfg.replicas, cfg.reference_replicas)?;
    let g = GraphFamily::alternating(cfg.shells.clone())?;
    let mut report = Report::new(g.to_string(), cfg.p.value, "window rate gap");
    report.n = cfg.windows.last().copied();
    report.columns = columns(&["start", "end", "rate", "se", "linf_occupancy"]);
    for w in &f.windows {
        report.rows.push(vec![json!(w.start), json!(w.end), json!(w.rate), json!(w.se), json!(w.linf_occupancy)]);
    }
    report.headline(f.gap, f.gap_se, ci(f.gap, f.gap_se));
    report.truncation_rate = f.truncation_rate;
    report.detail("separation", json!(f.separation));
    report.detail("sign_matches", json!(f.sign_matches));
    report.detail("inconclusive", json!(f.inconclusive));
    report.detail(
        "reference",
        json!({
            "c_nearest": f.c_nearest, "c_nearest_se": f.c_nearest_se,
            "c_linf": f.c_linf, "c_linf_se": f.c_linf_se,
            "gap": f.reference_gap,
            "truncation_nearest": f.reference_truncation.0, "truncation_linf": f.reference_truncation.1,
        }),
    );
    if f.reference_truncation.1 > 0.0 {
        report.warnings.push("ℓ∞ reference clusters hit the cap; its c_p estimate is a lower bound".into());
    }
    if f.inconclusive {
        report.warnings.push("window confidence intervals overlap".into());
    }
    Ok(report)
}

fn hairy(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let mode = if cfg.mode == "paper" { ScheduleMode::Paper } else { ScheduleMode::Desk };
    let pc = perc(cfg, cfg.p.value)?;
    let h = hairy_demo(mode, &pc, cfg.k, cfg.replicas, cfg.repeats)?;
    let mut report = Report::new(format!("hairy[{} anchors]", h.anchors.len()), cfg.p.value, "P(U_T > p b / 2)");
    report.columns = columns(&[
        "k", "anchor", "hairs", "mean_T", "se_T", "median_T", "mean_U", "se_U", "threshold", "exceed_freq", "mean_V",
        "se_V", "expected_V", "percolation_variance", "missed",
    ]);
    for a in &h.per_anchor {
        report.rows.push(vec![
            json!(a.k),
            json!(a.anchor),
            json!(a.hairs),
            json!(a.mean_t),
            json!(a.se_t),
            json!(a.median_t),
            json!(a.mean_u),
            json!(a.se_u),
            json!(a.threshold),
            json!(a.exceed_freq),
            json!(a.mean_v),
            json!(a.se_v),
            json!(a.expected_v),
            json!(a.percolation_variance),
            json!(a.missed),
        ]);
    }
    if let Some(a) = h.per_anchor.last() {
        let se = (a.exceed_freq * (1.0 - a.exceed_freq) / cfg.replicas as f64).sqrt();
        report.headline(a.exceed_freq, se, ci(a.exceed_freq, se));
    }
    report.truncation_rate = h.truncation_rate;
    report.detail("anchors", json!(h.anchors));
    report.detail("hairs", json!(h.hairs));
    Ok(report)
}

fn oracle_check(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let p = ExactRational::new(BigInt::from(cfg.p.num), BigInt::from(cfg.p.den));
    let exact = exact_mean_union::<ExactRational>(&g, &p, &g.origin(), cfg.n, cfg.box_radius)?;
    let (lo, hi) = exact.interval_f64();
    let pc = perc(cfg, cfg.p.value)?;
    let n = cfg.n;
    let runs = map_replicas(cfg.replicas, |r| replica_snapshots(&g, &pc.with_replica(r), &[n], false));
    let mut st = BatchStats::<f64>::new();
    for s in runs {
        st.push(s?[0].union as f64);
    }
    let (m, se) = st.mean_se_f64();
    let inside = m >= lo - 4.0 * se && m <= hi + 4.0 * se;
    let mut report = Report::new(g.to_string(), cfg.p.value, "E[U_n] oracle");
    report.n = Some(n);
    report.headline(m, se, ci(m, se));
    report.detail(
        "oracle",
        json!({
            "value": exact.value.to_string(),
            "epsilon": exact.epsilon.to_string(),
            "lower": lo, "upper": hi,
            "box_radius": exact.box_radius, "box_vertices": exact.box_vertices, "box_edges": exact.box_edges,
            "paths": exact.paths as u64,
        }),
    );
    report.detail("inside_interval", json!(inside));
    report.columns = columns(&["k", "exact_tail", "mc_tail", "se", "within_3se"]);
    if matches!(g, GraphFamily::ZdNearest { d: 1 }) && cfg.p.value < 1.0 {
        let ks: Vec<u64> = (0..=5).collect();
        let tail = cluster_size_tail(&pc.with_replica(CLUSTER_REPLICA_OFFSET), &g, &ks, cfg.replicas)?;
        let mut all = true;
        for (i, &k) in ks.iter().enumerate() {
            let ex = percwalk::oracle::ExactField::as_f64(&exact_line_cluster_law(&p, k)?);
            let ok = (tail.tail[i] - ex).abs() <= 3.0 * tail.se[i].max(1e-12);
            all &= ok;
            report.rows.push(vec![json!(k), json!(ex), json!(tail.tail[i]), json!(tail.se[i]), json!(ok)]);
        }
        report.detail("cluster_law_within_3se", json!(all));
    }
    if !inside {
        report.warnings.push(format!("Monte Carlo mean {m} is outside [{lo}, {hi}] widened by 4 SE"));
    }
    Ok(report)
}

fn capacity(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let g = cfg.graph_family()?;
    let d = g.lattice_dim().unwrap_or(1);
    let points = parse_set(&cfg.set, d).map_err(|m| ConfigError::Field { field: "set".into(), message: m })?;
    let set = lattice_vertices(&points);
    let mut report = Report::new(g.to_string(), 0.0, format!("capacity ({})", cfg.method));
    report.columns = columns(&["radius", "value", "conductance", "iterations", "residual", "unknowns"]);
    let push_radii = |report: &mut Report, c: &CapacityEstimate<f64>| {
        for r in &c.per_radius {
            report.rows.push(vec![
                json!(r.radius),
                json!(r.value),
                json!(r.conductance),
                json!(r.iterations),
                json!(r.residual),
                json!(r.unknowns),
            ]);
        }
    };
    match cfg.method.as_str() {
        "compare" => {
            let c = capacity_compare_z3(&set, &cfg.radii)?;
            push_radii(&mut report, &c.nearest);
            push_radii(&mut report, &c.linf);
            report.headline(c.nearest.value, f64::NAN, c.nearest.bracket().unwrap_or((f64::NAN, f64::NAN)));
            report.detail("nearest", capacity_json(&c.nearest));
            report.detail("linf", capacity_json(&c.linf));
            report.detail("strict_less", json!(c.strict_less()));
        }
        "mc" => {
            let mut rng = WalkRng::new(cfg.seed, 0, TAG_AUX);
            let c = capacity_mc(&g, &set, cfg.escape_radius, cfg.walks, &mut rng)?;
            let se = match c.uncertainty {
                Uncertainty::StandardError(se) => se,
                _ => f64::NAN,
            };
            report.headline(c.value, se, ci(c.value, se));
            report.detail("capacity", capacity_json(&c));
            report.detail("doubling_gap", json!(c.doubling_gap));
        }
        _ => {
            let c = capacity_exact::<f64>(&g, &set, &cfg.radii)?;
            push_radii(&mut report, &c);
            report.headline(c.value, f64::NAN, c.bracket().unwrap_or((f64::NAN, f64::NAN)));
            report.detail("capacity", capacity_json(&c));
        }
    }
    report.detail("set_size", json!(set.len()));
    Ok(report)
}
