//! Lazy Bernoulli bond percolation.
//!
//! Every edge carries a deterministic uniform `u(e)` drawn from a keyed hash of its canonical
//! endpoints; the edge is open iff `u(e) < p`. Nothing is stored, so the configuration is
//! consistent on an unbounded vertex set, and configurations at different `p` with the same
//! seed are coupled monotonically.

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::graph::{Edge, GraphFamily, MaxDegree, VertexId};
use crate::parallel::map_replicas;
use crate::rng::{derive_key, unit_f64, TAG_PERCOLATION};
use crate::stats::{BatchStats, DEFAULT_CI_LEVEL};

pub const DEFAULT_CLUSTER_CAP: usize = 1_000_000;

/// Truncation rate above which aggregates carry a warning.
pub const TRUNCATION_WARNING_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PercolationConfig {
    pub p: f64,
    pub master_seed: u64,
    pub replica_index: u64,
    pub cluster_cap: usize,
}

impl PercolationConfig {
    pub fn new(p: f64, master_seed: u64) -> Result<Self> {
        let cfg = Self { p, master_seed, replica_index: 0, cluster_cap: DEFAULT_CLUSTER_CAP };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.cluster_cap == 0 {
            return Err(Error::InvalidArgument("cluster_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn with_replica(mut self, replica_index: u64) -> Self {
        self.replica_index = replica_index;
        self
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap(mut self, cluster_cap: usize) -> Result<Self> {
        self.cluster_cap = cluster_cap;
        self.validate()?;
        Ok(self)
    }

    pub fn field(&self) -> EdgeField {
        EdgeField { key: derive_key(self.master_seed, self.replica_index, TAG_PERCOLATION), p: self.p }
    }

    pub fn edge_uniform(&self, e: &Edge) -> f64 {
        let (u, v) = e.endpoints();
        self.field().uniform(&u, &v)
    }

    pub fn edge_open(&self, e: &Edge) -> bool {
        self.edge_uniform(e) < self.p
    }
}

/// The edge-state function of one configuration, with the key precomputed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeField {
    key: u64,
    p: f64,
}

impl EdgeField {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Uniform of the edge `{u, v}`; symmetric in its arguments.
    #[inline]
    pub fn uniform(&self, u: &VertexId, v: &VertexId) -> f64 {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        unit_f64(hi.absorb_into(lo.absorb_into(self.key)))
    }

    #[inline]
    pub fn open(&self, u: &VertexId, v: &VertexId) -> bool {
        self.p > 0.0 && self.uniform(u, v) < self.p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub root: VertexId,
    /// Vertices in BFS order from the root.
    pub vertices: Vec<VertexId>,
    pub truncated: bool,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_set(&self) -> FxHashSet<VertexId> {
        self.vertices.iter().copied().collect()
    }
}

/// Reusable BFS scratch space for cluster exploration.
#[derive(Default)]
pub(crate) struct Explorer {
    seen: FxHashSet<VertexId>,
    order: Vec<VertexId>,
    buf: Vec<VertexId>,
}

impl Explorer {
    /// Explores the open cluster of `x`, keeping at most `cap` vertices. Returns the vertices
    /// in BFS order and whether the cluster was cut short.
    pub(crate) fn explore(
        &mut self,
        g: &GraphFamily,
        field: &EdgeField,
        x: VertexId,
        cap: usize,
    ) -> (&[VertexId], bool) {
        self.seen.clear();
        self.order.clear();
        self.seen.insert(x);
        self.order.push(x);
        if field.p <= 0.0 {
            return (&self.order, false);
        }
        let mut head = 0;
        let mut truncated = false;
        'bfs: while head < self.order.len() {
            let v = self.order[head];
            head += 1;
            g.neighbors_into(&v, &mut self.buf);
            for w in self.buf.iter() {
                if !self.seen.contains(w) && field.open(&v, w) {
                    if self.order.len() == cap {
                        truncated = true;
                        break 'bfs;
                    }
                    self.seen.insert(*w);
                    self.order.push(*w);
                }
            }
        }
        (&self.order, truncated)
    }
}

/// Open cluster of `x`, possibly truncated at `cfg.cluster_cap` vertices.
pub fn explore_cluster(cfg: &PercolationConfig, g: &GraphFamily, x: &VertexId) -> Result<Cluster> {
    cfg.validate()?;
    g.check_vertex(x)?;
    let mut ex = Explorer::default();
    let (vertices, truncated) = ex.explore(g, &cfg.field(), *x, cfg.cluster_cap);
    Ok(Cluster { root: *x, vertices: vertices.to_vec(), truncated })
}

#[derive(Clone, Debug)]
pub struct ClusterTail {
    pub k_values: Vec<u64>,
    /// Empirical `P(|C| > k)` for each `k`.
    pub tail: Vec<f64>,
    pub se: Vec<f64>,
    pub ci: Vec<(f64, f64)>,
    pub mean_size: BatchStats<f64>,
    pub truncation_rate: f64,
    pub warning: Option<String>,
}

/// Empirical tail of the cluster size of the family's origin over `replicas` configurations
/// (replica indices `cfg.replica_index ..`).
pub fn cluster_size_tail(
    cfg: &PercolationConfig,
    g: &GraphFamily,
    k_values: &[u64],
    replicas: u64,
) -> Result<ClusterTail> {
    cfg.validate()?;
    if cfg.p >= 1.0 {
        return Err(Error::InvalidArgument("cluster tails need p < 1".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    let origin = g.origin();
    let samples = map_replicas(replicas, |r| {
        let c = cfg.with_replica(cfg.replica_index + r);
        let mut ex = Explorer::default();
        let (v, t) = ex.explore(g, &c.field(), origin, c.cluster_cap);
        (v.len() as u64, t)
    });
    let truncated = samples.iter().filter(|s| s.1).count();
    let truncation_rate = truncated as f64 / replicas as f64;
    let mut mean_size = BatchStats::new();
    for s in &samples {
        mean_size.push(s.0 as f64);
    }
    let mut tail = Vec::new();
    let mut se = Vec::new();
    let mut ci = Vec::new();
    for &k in k_values {
        let mut st = BatchStats::<f64>::new();
        for s in &samples {
            st.push(if s.0 > k { 1.0 } else { 0.0 });
        }
        tail.push(st.mean());
        se.push(st.se().unwrap_or(0.0));
        ci.push(st.ci(DEFAULT_CI_LEVEL).unwrap_or((st.mean(), st.mean())));
    }
    let warning = (truncation_rate > TRUNCATION_WARNING_RATE)
        .then(|| format!("{:.2}% of clusters hit the cap of {}", 100.0 * truncation_rate, cfg.cluster_cap));
    Ok(ClusterTail { k_values: k_values.to_vec(), tail, se, ci, mean_size, truncation_rate, warning })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemperleyBound {
    pub value: f64,
    pub note: Option<&'static str>,
}

/// `1 / (Δ - 1)` for bounded-degree families.
pub fn temperley_lower_bound(g: &GraphFamily) -> TemperleyBound {
    match g.max_degree() {
        MaxDegree::Bounded(d) if d >= 2 => TemperleyBound { value: 1.0 / (d as f64 - 1.0), note: None },
        MaxDegree::Bounded(_) => TemperleyBound { value: 1.0, note: Some("maximal degree below 2") },
        MaxDegree::Unbounded => TemperleyBound {
            value: 0.0,
            note: Some("unbounded degree: the bound is vacuous (the hairy half-line has p_T = 1)"),
        },
    }
}
