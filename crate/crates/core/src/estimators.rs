//! Estimators of the growth constant `c_p`, scaling checks for variance and boundary, Laplace
//! transforms of `U_n`, and the sandwich bounds on the mean.
//!
//! Replica `r` of an estimator run with configuration `cfg` uses
//! `cfg.with_replica(cfg.replica_index + r)`; results do not depend on the thread count.

use rustc_hash::FxHashSet;

use crate::capacity::escape_sum;
use crate::error::{Error, Result};
use crate::graph::{GraphFamily, VertexId};
use crate::parallel::map_replicas;
use crate::percolation::{cluster_size_tail, Explorer, PercolationConfig, TRUNCATION_WARNING_RATE};
use crate::rng::{WalkRng, TAG_AUX, TAG_RETURN};
use crate::stats::{block_jackknife, combined_se, log_mean_exp, sample_variance, z_quantile, BatchStats, DEFAULT_CI_LEVEL};
use crate::union::{line_union, union_snapshots, walk_rng, Snapshot};
use crate::walk::{hit_from, HitResult, Hitting, RangeTracker, StopRule};

/// Smallest walk length accepted by [`estimate_cp_lln`].
pub const LLN_MIN_STEPS: usize = 1_000;
/// Largest `θ` accepted by [`laplace_positive_small_theta`].
pub const POSITIVE_THETA_MAX: f64 = 0.05;
/// Blocks used for jackknife standard errors.
pub const JACKKNIFE_BLOCKS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CpMethod {
    Lln,
    ClusterCapacity,
    ClusterEscape,
}

impl CpMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            CpMethod::Lln => "lln",
            CpMethod::ClusterCapacity => "cluster_capacity",
            CpMethod::ClusterEscape => "cluster_escape",
        }
    }
}

/// How a sampled cluster is turned into a capacity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterMethod {
    /// Sum of escape probabilities over the cluster.
    Capacity,
    /// `|C_o|` times the escape probability from the origin.
    EscapeFormula,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpEstimate {
    pub method: CpMethod,
    pub p: f64,
    pub value: f64,
    pub se: f64,
    /// Walk length, for the law-of-large-numbers estimator.
    pub n: Option<usize>,
    pub replicas: u64,
    /// Replicas dropped because a cluster hit the cap (cluster estimators only).
    pub excluded: u64,
    pub truncation_rate: f64,
    pub warning: Option<String>,
}

impl CpEstimate {
    pub fn ci(&self, level: f64) -> (f64, f64) {
        let z = z_quantile(level);
        (self.value - z * self.se, self.value + z * self.se)
    }
}

fn truncation_warning(rate: f64, cap: usize) -> Option<String> {
    (rate > TRUNCATION_WARNING_RATE).then(|| format!("{:.2}% of replicas hit the cluster cap of {cap}", 100.0 * rate))
}

fn is_line(g: &GraphFamily) -> bool {
    matches!(g, GraphFamily::ZdNearest { d: 1 })
}

/// Snapshots of one replica at ascending times. On `Z` the closed form is used, with boundary
/// size 2 (1 at time 0).
pub fn replica_snapshots(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    checkpoints: &[usize],
    track_boundary: bool,
) -> Result<Vec<Snapshot>> {
    if is_line(g) {
        return checkpoints
            .iter()
            .map(|&k| {
                let run = line_union(cfg, k, &mut walk_rng(cfg))?;
                Ok(Snapshot {
                    k,
                    range: run.range as usize,
                    boundary: track_boundary.then_some(if k == 0 { 1 } else { 2 }),
                    union: run.union as usize,
                    truncated: run.truncated,
                })
            })
            .collect();
    }
    union_snapshots(g, cfg, &g.origin(), checkpoints, track_boundary)
}

/// Snapshots for `replicas` replicas, in replica order.
fn run_replicas(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    checkpoints: &[usize],
    replicas: u64,
    track_boundary: bool,
) -> Result<Vec<Vec<Snapshot>>> {
    cfg.validate()?;
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    map_replicas(replicas, |r| replica_snapshots(g, &cfg.with_replica(cfg.replica_index + r), checkpoints, track_boundary))
        .into_iter()
        .collect()
}

/// Mean of `U_n / n` over replicas.
pub fn estimate_cp_lln(g: &GraphFamily, cfg: &PercolationConfig, n: usize, replicas: u64) -> Result<CpEstimate> {
    if n < LLN_MIN_STEPS {
        return Err(Error::InvalidArgument(format!("n = {n} is below the floor of {LLN_MIN_STEPS}")));
    }
    let runs = run_replicas(g, cfg, &[n], replicas, false)?;
    let mut st = BatchStats::<f64>::new();
    let mut truncated = 0u64;
    for s in runs.iter().map(|r| r[0]) {
        st.push(s.union as f64 / n as f64);
        truncated += s.truncated as u64;
    }
    let rate = truncated as f64 / replicas as f64;
    let mut warning = truncation_warning(rate, cfg.cluster_cap);
    if g.is_recurrent() {
        warning = Some(format!("{g} is recurrent: c_p = 0 and U_n / n decays to 0"));
    }
    Ok(CpEstimate {
        method: CpMethod::Lln,
        p: cfg.p,
        value: st.mean(),
        se: st.se().unwrap_or(f64::NAN),
        n: Some(n),
        replicas,
        excluded: 0,
        truncation_rate: rate,
        warning,
    })
}

/// `E[ca(C_o)]` from sampled clusters of the origin, each capacity estimated by `walks` walks
/// per cluster point (or from the origin, for the escape formula) run out to `escape_radius`.
/// Clusters that hit the cap are dropped and counted.
pub fn estimate_cp_cluster(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    replicas: u64,
    method: ClusterMethod,
    escape_radius: u64,
    walks: u64,
) -> Result<CpEstimate> {
    cfg.validate()?;
    if g.is_recurrent() || !g.is_vertex_transitive() {
        return Err(Error::Unsupported { op: "estimate_cp_cluster", family: g.to_string() });
    }
    if replicas < 2 || walks == 0 {
        return Err(Error::InvalidArgument("need at least 2 replicas and 1 walk".into()));
    }
    let o = g.origin();
    let samples = map_replicas(replicas, |r| -> Result<Option<f64>> {
        let c = cfg.with_replica(cfg.replica_index + r);
        let mut ex = Explorer::default();
        let (cluster, truncated) = ex.explore(g, &c.field(), o, c.cluster_cap);
        if truncated {
            return Ok(None);
        }
        let mut rng = WalkRng::new(c.master_seed, c.replica_index, TAG_AUX);
        match method {
            ClusterMethod::Capacity => Ok(Some(escape_sum(g, cluster, escape_radius, walks, &mut rng)?.0)),
            ClusterMethod::EscapeFormula => {
                let members: FxHashSet<VertexId> = cluster.iter().copied().collect();
                let stop = StopRule::escape(escape_radius);
                let escaped = (0..walks)
                    .filter(|_| {
                        matches!(
                            hit_from(g, &o, &o, &|v| members.contains(v), Hitting::T, stop, &mut rng),
                            HitResult::Escaped(_)
                        )
                    })
                    .count();
                Ok(Some(members.len() as f64 * escaped as f64 / walks as f64))
            }
        }
    });
    let mut st = BatchStats::<f64>::new();
    let mut excluded = 0u64;
    for s in samples {
        match s? {
            Some(v) => st.push(v),
            None => excluded += 1,
        }
    }
    let rate = excluded as f64 / replicas as f64;
    Ok(CpEstimate {
        method: match method {
            ClusterMethod::Capacity => CpMethod::ClusterCapacity,
            ClusterMethod::EscapeFormula => CpMethod::ClusterEscape,
        },
        p: cfg.p,
        value: st.mean(),
        se: st.se().unwrap_or(f64::NAN),
        n: None,
        replicas,
        excluded,
        truncation_rate: rate,
        warning: truncation_warning(rate, cfg.cluster_cap),
    })
}

/// Outcome of an inequality checked with sampling noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    /// Holds with every margin outside the confidence interval.
    Satisfied,
    /// No margin is significantly negative, but some is within noise.
    Indeterminate,
    /// Some margin is negative beyond the confidence interval.
    Violated,
}

impl Check {
    /// `margins` are `(value, se)` pairs that should be nonnegative.
    pub fn from_margins(margins: &[(f64, f64)], level: f64) -> Self {
        let z = z_quantile(level);
        if margins.iter().any(|&(m, se)| m < -z * se) {
            Check::Violated
        } else if margins.iter().all(|&(m, se)| m > z * se) {
            Check::Satisfied
        } else {
            Check::Indeterminate
        }
    }

    pub fn holds(&self) -> bool {
        *self != Check::Violated
    }
}

/// `P(T_o > i)` for `i = 0..=n`, from walks started at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub n: usize,
    pub walks: u64,
    pub tail: Vec<f64>,
    /// `sum_{i=0}^{n} P(T_o > i)`, which equals `E[R_n]`.
    pub sum: f64,
    pub sum_se: f64,
}

/// Return-time survival curve from `walks` walks on the return-time stream of `seed`.
pub fn survival_curve(g: &GraphFamily, n: usize, walks: u64, seed: u64) -> Result<SurvivalCurve> {
    if walks < 2 {
        return Err(Error::InvalidArgument("need at least 2 walks".into()));
    }
    let o = g.origin();
    let times = map_replicas(walks, |r| {
        let mut rng = WalkRng::new(seed, r, TAG_RETURN);
        match hit_from(g, &o, &o, &|v| *v == o, Hitting::T, StopRule::budget(n as u64), &mut rng) {
            HitResult::Hit(k) => k as usize,
            _ => n + 1,
        }
    });
    let mut counts = vec![0u64; n + 2];
    let mut st = BatchStats::<f64>::new();
    for &t in &times {
        counts[t.min(n + 1)] += 1;
        st.push(t.min(n + 1) as f64);
    }
    let mut alive = walks;
    let mut tail = Vec::with_capacity(n + 1);
    for c in counts.iter().take(n + 1) {
        alive -= c;
        tail.push(alive as f64 / walks as f64);
    }
    Ok(SurvivalCurve { n, walks, tail, sum: st.mean(), sum_se: st.se().unwrap_or(0.0) })
}

/// `(1-p)^Δ Σ P(T_o > i) <= E[U_n] <= E|C_o| Σ P(T_o > i)`, each side estimated.
#[derive(Clone, Debug, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub lower_se: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub upper: f64,
    pub upper_se: f64,
    pub cluster_mean: f64,
    pub check: Check,
}

impl Sandwich {
    pub fn satisfied(&self) -> bool {
        self.check == Check::Satisfied
    }
}

/// Mean-growth sandwich on a vertex-transitive family. Return times use `replicas` walks on
/// their own stream; `E|C_o|` uses `replicas` configurations after the union replicas.
pub fn mean_growth_sandwich(g: &GraphFamily, cfg: &PercolationConfig, n: usize, replicas: u64) -> Result<Sandwich> {
    let curve = survival_curve(g, n, replicas, cfg.master_seed)?;
    mean_growth_sandwich_with(g, cfg, n, replicas, &curve)
}

/// As [`mean_growth_sandwich`] with a precomputed survival curve.
pub fn mean_growth_sandwich_with(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    n: usize,
    replicas: u64,
    curve: &SurvivalCurve,
) -> Result<Sandwich> {
    if !g.is_vertex_transitive() {
        return Err(Error::Unsupported { op: "mean_growth_sandwich", family: g.to_string() });
    }
    if curve.n != n {
        return Err(Error::InvalidArgument(format!("survival curve is for n = {}, not {n}", curve.n)));
    }
    let delta = g.degree(&g.origin())?;
    let runs = run_replicas(g, cfg, &[n], replicas, false)?;
    let u = BatchStats::<f64>::from_slice(&runs.iter().map(|r| r[0].union as f64).collect::<Vec<_>>());
    let clusters = cluster_size_tail(&cfg.with_replica(cfg.replica_index + replicas), g, &[], replicas)?;
    let (cm, cse) = clusters.mean_size.mean_se_f64();
    let factor = (1.0 - cfg.p).powi(delta as i32);
    let lower = factor * curve.sum;
    let lower_se = factor * curve.sum_se;
    let upper = cm * curve.sum;
    let upper_se = (cm * curve.sum_se).hypot(curve.sum * cse);
    let (mean, mean_se) = u.mean_se_f64();
    let check = Check::from_margins(
        &[(mean - lower, combined_se(mean_se, lower_se)), (upper - mean, combined_se(mean_se, upper_se))],
        DEFAULT_CI_LEVEL,
    );
    Ok(Sandwich { lower, lower_se, mean, mean_se, upper, upper_se, cluster_mean: cm, check })
}

/// Normalization applied to `Var(U_n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceNorm {
    /// `Var / n`.
    Diffusive,
    /// `(log n)^4 Var / n^2`.
    Planar,
}

impl VarianceNorm {
    pub fn factor(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            VarianceNorm::Diffusive => 1.0 / n,
            VarianceNorm::Planar => n.ln().powi(4) / (n * n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub normalized: f64,
    pub normalized_se: f64,
}

/// Sample variance of `U_n` at each `n`, with block-jackknife errors.
pub fn variance_scaling(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    n_values: &[usize],
    replicas: u64,
    norm: VarianceNorm,
) -> Result<Vec<VarianceRow>> {
    if replicas < 1000 {
        return Err(Error::InvalidArgument("variance scaling needs at least 1000 replicas".into()));
    }
    if n_values.is_empty() || n_values.windows(2).any(|w| w[0] >= w[1]) || n_values[0] == 0 {
        return Err(Error::InvalidArgument("n values must be positive and strictly increasing".into()));
    }
    let runs = run_replicas(g, cfg, n_values, replicas, false)?;
    Ok(n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let xs: Vec<f64> = runs.iter().map(|r| r[i].union as f64).collect();
            let jk = block_jackknife(&xs, JACKKNIFE_BLOCKS, sample_variance);
            let f = norm.factor(n);
            VarianceRow {
                n,
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                variance: jk.value,
                variance_se: jk.se,
                normalized: f * jk.value,
                normalized_se: f * jk.se,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryRow {
    pub n: usize,
    pub mean_l: f64,
    pub se_l: f64,
    pub mean_l2: f64,
    /// `(log n)^2 / n` times the mean on `Z^2`; the mean itself on `Z`.
    pub normalized: f64,
    pub normalized_se: f64,
    pub mean_ratio: f64,
    pub ratio_se: f64,
}

/// Inner boundary statistics of the range on `Z` or `Z^2`, walks on the replica walk streams.
pub fn boundary_scaling(g: &GraphFamily, n_values: &[usize], replicas: u64, seed: u64) -> Result<Vec<BoundaryRow>> {
    let d = match g {
        GraphFamily::ZdNearest { d } if *d <= 2 => *d,
        _ => return Err(Error::Unsupported { op: "boundary_scaling", family: g.to_string() }),
    };
    if replicas < 2 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("need 2 replicas and strictly increasing n values".into()));
    }
    let o = g.origin();
    let samples = map_replicas(replicas, |r| {
        let mut rng = WalkRng::new(seed, r, crate::rng::TAG_WALK);
        let mut t = RangeTracker::new(g, &o);
        let mut buf = Vec::new();
        let mut cur = o;
        let mut k = 0;
        n_values
            .iter()
            .map(|&n| {
                while k < n {
                    cur = g.random_neighbor(&cur, &mut rng, &mut buf);
                    t.visit(g, &cur);
                    k += 1;
                }
                (t.boundary_len() as f64, t.range() as f64)
            })
            .collect::<Vec<_>>()
    });
    Ok(n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut l = BatchStats::<f64>::new();
            let mut l2 = BatchStats::<f64>::new();
            let mut ratio = BatchStats::<f64>::new();
            for s in &samples {
                let (b, r) = s[i];
                l.push(b);
                l2.push(b * b);
                ratio.push(b / r);
            }
            let f = if d == 2 && n > 1 { (n as f64).ln().powi(2) / n as f64 } else { 1.0 };
            let (m, se) = l.mean_se_f64();
            let (rm, rse) = ratio.mean_se_f64();
            BoundaryRow {
                n,
                mean_l: m,
                se_l: se,
                mean_l2: l2.mean(),
                normalized: f * m,
                normalized_se: f * se,
                mean_ratio: rm,
                ratio_se: rse,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceNegative {
    pub n: usize,
    pub theta: f64,
    /// `-log mean exp(-θ U_n)`.
    pub u_side: f64,
    pub u_se: f64,
    /// `-log mean exp(-θ R_n)`.
    pub r_side: f64,
    pub r_se: f64,
    /// `n^(d/(d+2))`, or 1 off the lattices.
    pub scale: f64,
    pub u_normalized: f64,
    pub r_normalized: f64,
    pub gap_normalized: f64,
    /// `u_side >= r_side`, up to rounding.
    pub dominated: bool,
    pub truncation_rate: f64,
}

fn neg_log_laplace(xs: &[f64], theta: f64) -> f64 {
    -log_mean_exp(&xs.iter().map(|x| -theta * x).collect::<Vec<_>>())
}

/// Negative-exponent Laplace transforms of `U_n` and `R_n` over the same replicas.
pub fn laplace_negative(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    theta: f64,
    n: usize,
    replicas: u64,
) -> Result<LaplaceNegative> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument("θ must be positive".into()));
    }
    let runs = run_replicas(g, cfg, &[n], replicas, false)?;
    let u: Vec<f64> = runs.iter().map(|r| r[0].union as f64).collect();
    let r: Vec<f64> = runs.iter().map(|r| r[0].range as f64).collect();
    let truncated = runs.iter().filter(|r| r[0].truncated).count();
    let ju = block_jackknife(&u, JACKKNIFE_BLOCKS, |s| neg_log_laplace(s, theta));
    let jr = block_jackknife(&r, JACKKNIFE_BLOCKS, |s| neg_log_laplace(s, theta));
    let scale = match g.lattice_dim() {
        Some(d) => (n as f64).powf(d as f64 / (d as f64 + 2.0)),
        None => 1.0,
    };
    Ok(LaplaceNegative {
        n,
        theta,
        u_side: ju.value,
        u_se: ju.se,
        r_side: jr.value,
        r_se: jr.se,
        scale,
        u_normalized: ju.value / scale,
        r_normalized: jr.value / scale,
        gap_normalized: (ju.value - jr.value) / scale,
        dominated: ju.value >= jr.value - 1e-12 * jr.value.abs().max(1.0),
        truncation_rate: truncated as f64 / replicas as f64,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacePositiveRow {
    pub n: usize,
    /// `log mean exp(θ U_{n-1}) / n`.
    pub value: f64,
    pub se: f64,
    /// `θ mean(U_{n-1}) / n`.
    pub jensen_floor: f64,
    pub running_inf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplacePositive {
    pub theta: f64,
    /// Rows up to the first `n` that tripped the heavy-tail guard.
    pub rows: Vec<LaplacePositiveRow>,
    /// Set when the guard stopped the estimate early.
    pub aborted: Option<String>,
    pub truncation_rate: f64,
}

impl LaplacePositive {
    pub fn infimum(&self) -> Option<f64> {
        self.rows.last().map(|r| r.running_inf)
    }

    /// Every row at or above its Jensen floor.
    pub fn jensen_holds(&self) -> bool {
        self.rows.iter().all(|r| r.value >= r.jensen_floor - 1e-12 * r.jensen_floor.abs().max(1.0))
    }
}

/// Whether the top 1% of `values` carries more than half of their sum.
pub fn heavy_tailed(values: &[f64]) -> bool {
    if values.is_empty() {
        return false;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let top = (v.len() / 100).max(1);
    let total: f64 = v.iter().sum();
    v[..top].iter().sum::<f64>() > 0.5 * total
}

/// `log mean exp(θ U_{n-1}) / n` for each `n`, with its running infimum. Stops at the first
/// `n` whose samples trip the heavy-tail guard.
pub fn laplace_positive_small_theta(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    theta: f64,
    n_values: &[usize],
    replicas: u64,
) -> Result<LaplacePositive> {
    if !(theta > 0.0 && theta <= POSITIVE_THETA_MAX) {
        return Err(Error::InvalidArgument(format!("θ must lie in (0, {POSITIVE_THETA_MAX}]")));
    }
    if n_values.is_empty() || n_values[0] == 0 || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n values must be positive and strictly increasing".into()));
    }
    let checkpoints: Vec<usize> = n_values.iter().map(|n| n - 1).collect();
    let runs = run_replicas(g, cfg, &checkpoints, replicas, false)?;
    let truncated = runs.iter().filter(|r| r.iter().any(|s| s.truncated)).count();
    let mut rows = Vec::new();
    let mut aborted = None;
    let mut inf = f64::INFINITY;
    for (i, &n) in n_values.iter().enumerate() {
        let u: Vec<f64> = runs.iter().map(|r| r[i].union as f64).collect();
        let shift = u.iter().copied().fold(0.0, f64::max) * theta;
        if heavy_tailed(&u.iter().map(|x| (theta * x - shift).exp()).collect::<Vec<_>>()) {
            aborted = Some(format!("heavy tail at n = {n}: top 1% of exp(θU) carries over half the mean"));
            break;
        }
        let jk = block_jackknife(&u, JACKKNIFE_BLOCKS, |s| {
            log_mean_exp(&s.iter().map(|x| theta * x).collect::<Vec<_>>()) / n as f64
        });
        inf = inf.min(jk.value);
        rows.push(LaplacePositiveRow {
            n,
            value: jk.value,
            se: jk.se,
            jensen_floor: theta * u.iter().sum::<f64>() / u.len() as f64 / n as f64,
            running_inf: inf,
        });
    }
    Ok(LaplacePositive { theta, rows, aborted, truncation_rate: truncated as f64 / replicas as f64 })
}

/// `(p/Δ) E[L_n] <= E[U_n] - E[R_n] <= E|C_o| E[L_n]` on a vertex-transitive family.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySandwich {
    pub excess: f64,
    pub excess_se: f64,
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
    pub check: Check,
}

pub fn boundary_sandwich(g: &GraphFamily, cfg: &PercolationConfig, n: usize, replicas: u64) -> Result<BoundarySandwich> {
    if !g.is_vertex_transitive() {
        return Err(Error::Unsupported { op: "boundary_sandwich", family: g.to_string() });
    }
    let delta = g.degree(&g.origin())? as f64;
    let runs = run_replicas(g, cfg, &[n], replicas, true)?;
    let mut excess = BatchStats::<f64>::new();
    let mut l = BatchStats::<f64>::new();
    for s in runs.iter().map(|r| r[0]) {
        excess.push((s.union - s.range) as f64);
        l.push(s.boundary.unwrap_or(0) as f64);
    }
    let clusters = cluster_size_tail(&cfg.with_replica(cfg.replica_index + replicas), g, &[], replicas)?;
    let (cm, cse) = clusters.mean_size.mean_se_f64();
    let (lm, lse) = l.mean_se_f64();
    let (em, ese) = excess.mean_se_f64();
    let lower = cfg.p / delta * lm;
    let lower_se = cfg.p / delta * lse;
    let upper = cm * lm;
    let upper_se = (cm * lse).hypot(lm * cse);
    // The excess and L_n come from the same replicas; adding their errors is conservative.
    let check = Check::from_margins(&[(em - lower, ese + lower_se), (upper - em, ese + upper_se)], DEFAULT_CI_LEVEL);
    Ok(BoundarySandwich { excess: em, excess_se: ese, lower, lower_se, upper, upper_se, check })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessRow {
    pub n: usize,
    /// `mean U_n - ĉ_p n`.
    pub excess: f64,
    pub se: f64,
    pub nonnegative: bool,
}

/// `E[U_n] - c_p n`, which is nonnegative on transient families.
pub fn mean_excess_check(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    n_values: &[usize],
    replicas: u64,
    cp: &CpEstimate,
) -> Result<Vec<ExcessRow>> {
    let runs = run_replicas(g, cfg, n_values, replicas, false)?;
    let z = z_quantile(DEFAULT_CI_LEVEL);
    Ok(n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let st = BatchStats::<f64>::from_slice(&runs.iter().map(|r| r[i].union as f64).collect::<Vec<_>>());
            let (m, se) = st.mean_se_f64();
            let excess = m - cp.value * n as f64;
            let se = combined_se(se, cp.se * n as f64);
            ExcessRow { n, excess, se, nonnegative: excess >= -z * se }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    pub mean_u: f64,
    pub mean_r: f64,
    /// `mean U_n / mean R_n`.
    pub ratio: f64,
    pub se: f64,
}

/// `mean U_n / mean R_n` at each `n`, errors by the jackknife over replicas.
pub fn union_range_ratio(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    n_values: &[usize],
    replicas: u64,
) -> Result<Vec<RatioRow>> {
    let runs = run_replicas(g, cfg, n_values, replicas, false)?;
    Ok(n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            // Interleave (U, R) pairs so that blocks keep the pairs together.
            let pairs: Vec<f64> = runs.iter().flat_map(|r| [r[i].union as f64, r[i].range as f64]).collect();
            let ratio = |s: &[f64]| {
                let (u, r) = s.chunks(2).fold((0.0, 0.0), |acc, c| (acc.0 + c[0], acc.1 + c[1]));
                u / r
            };
            let blocks = JACKKNIFE_BLOCKS.min(runs.len());
            let jk = block_jackknife_pairs(&pairs, blocks, ratio);
            let m = runs.len() as f64;
            RatioRow {
                n,
                mean_u: pairs.iter().step_by(2).sum::<f64>() / m,
                mean_r: pairs.iter().skip(1).step_by(2).sum::<f64>() / m,
                ratio: jk.0,
                se: jk.1,
            }
        })
        .collect())
}

/// Block jackknife over a flat slice of pairs, with blocks aligned to pair boundaries.
fn block_jackknife_pairs(pairs: &[f64], blocks: usize, stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let value = stat(pairs);
    let count = pairs.len() / 2;
    if blocks < 2 || count < 2 {
        return (value, f64::NAN);
    }
    let size = count / blocks;
    let mut leave = Vec::with_capacity(blocks);
    let mut rest = Vec::with_capacity(pairs.len());
    for b in 0..blocks {
        let (lo, hi) = (2 * b * size, if b + 1 == blocks { pairs.len() } else { 2 * (b + 1) * size });
        rest.clear();
        rest.extend_from_slice(&pairs[..lo]);
        rest.extend_from_slice(&pairs[hi..]);
        leave.push(stat(&rest));
    }
    let g = blocks as f64;
    let mean = leave.iter().sum::<f64>() / g;
    (value, (leave.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (g - 1.0) / g).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(d: usize) -> GraphFamily {
        GraphFamily::nearest(d).unwrap()
    }

    fn cfg(p: f64, seed: u64) -> PercolationConfig {
        PercolationConfig::new(p, seed).unwrap()
    }

    #[test]
    fn lln_floor_and_recurrent_warning() {
        assert!(estimate_cp_lln(&z(3), &cfg(0.0, 1), 999, 4).is_err());
        let e = estimate_cp_lln(&z(2), &cfg(0.1, 1), 1000, 4).unwrap();
        assert!(e.warning.unwrap().contains("recurrent"));
    }

    #[test]
    fn line_and_generic_replicas_agree() {
        let c = cfg(0.3, 9).with_replica(4);
        let fast = replica_snapshots(&z(1), &c, &[0, 7, 100, 1000], true).unwrap();
        let slow = union_snapshots(&z(1), &c, &z(1).origin(), &[0, 7, 100, 1000], true).unwrap();
        assert_eq!(fast, slow);
    }

    #[test]
    fn cluster_estimators_at_zero_p_estimate_escape() {
        let g = z(3);
        for m in [ClusterMethod::Capacity, ClusterMethod::EscapeFormula] {
            let e = estimate_cp_cluster(&g, &cfg(0.0, 2), 400, m, 40, 20).unwrap();
            assert!((e.value - 0.6595).abs() < 4.0 * e.se + 0.01, "{e:?}");
            assert_eq!(e.excluded, 0);
        }
        assert!(estimate_cp_cluster(&z(2), &cfg(0.1, 2), 10, ClusterMethod::Capacity, 10, 2).is_err());
    }

    #[test]
    fn sandwich_at_zero_p_collapses() {
        let g = z(3);
        let s = mean_growth_sandwich(&g, &cfg(0.0, 3), 200, 4000).unwrap();
        assert_eq!(s.lower, s.upper);
        assert!(s.check.holds(), "{s:?}");
        let s = mean_growth_sandwich(&z(1), &cfg(0.3, 3), 1000, 2000).unwrap();
        assert!(s.satisfied(), "{s:?}");
    }

    #[test]
    fn survival_sum_is_the_mean_range() {
        let c = survival_curve(&z(2), 2, 200_000, 5).unwrap();
        assert_eq!(c.tail[0], 1.0);
        assert_eq!(c.tail[1], 1.0);
        assert!((c.sum - 2.75).abs() < 4.0 * c.sum_se);
    }

    #[test]
    fn line_boundary_is_two() {
        let rows = boundary_scaling(&z(1), &[1, 10, 500], 50, 1).unwrap();
        assert!(rows.iter().all(|r| r.mean_l == 2.0 && r.se_l == 0.0));
    }

    #[test]
    fn laplace_negative_at_zero_p_has_no_gap() {
        let l = laplace_negative(&z(2), &cfg(0.0, 4), 1.0, 300, 200).unwrap();
        assert_eq!(l.u_side, l.r_side);
        let l = laplace_negative(&z(2), &cfg(0.1, 4), 1.0, 300, 200).unwrap();
        assert!(l.dominated && l.u_side > l.r_side);
    }

    #[test]
    fn laplace_positive_guard_and_floor() {
        assert!(laplace_positive_small_theta(&z(1), &cfg(0.0, 5), 0.1, &[10], 10).is_err());
        let l = laplace_positive_small_theta(&z(1), &cfg(0.0, 5), 0.01, &[100, 1000], 500).unwrap();
        assert!(l.aborted.is_none());
        assert!(l.jensen_holds());
        assert!(l.infimum().unwrap() <= l.rows[0].value);
        assert!(heavy_tailed(&[1.0; 99].iter().copied().chain([1000.0]).collect::<Vec<_>>()));
        assert!(!heavy_tailed(&[1.0; 100]));
    }

    #[test]
    fn check_from_margins() {
        assert_eq!(Check::from_margins(&[(1.0, 0.1)], 0.99), Check::Satisfied);
        assert_eq!(Check::from_margins(&[(1.0, 0.1), (0.0, 0.1)], 0.99), Check::Indeterminate);
        assert_eq!(Check::from_margins(&[(-1.0, 0.1)], 0.99), Check::Violated);
    }

    #[test]
    fn ratio_at_zero_p_is_one() {
        let rows = union_range_ratio(&z(2), &cfg(0.0, 6), &[100, 1000], 100).unwrap();
        assert!(rows.iter().all(|r| r.ratio == 1.0));
    }
}
