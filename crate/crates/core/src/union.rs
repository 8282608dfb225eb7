//! The union of the open clusters met by a walk, and its relatives.
//!
//! A cluster is explored only when the walk steps on a vertex the union does not yet cover.
//! Because the union is a disjoint union of complete clusters, a covered vertex has its whole
//! cluster inside already, so membership is the only per-step cost.

use std::sync::OnceLock;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::graph::{GraphFamily, Point, VertexId, MAX_DIM};
use crate::percolation::{EdgeField, Explorer, PercolationConfig};
use crate::rng::{WalkRng, TAG_WALK, TAG_WALK_SECOND};
use crate::stats::BatchStats;
use crate::walk::RangeTracker;

/// Running union of complete clusters.
pub struct UnionState {
    field: EdgeField,
    cap: usize,
    vertices: FxHashSet<VertexId>,
    roots: Vec<VertexId>,
    any_truncated: bool,
    explorer: Explorer,
}

impl UnionState {
    pub fn new(cfg: &PercolationConfig) -> Self {
        Self {
            field: cfg.field(),
            cap: cfg.cluster_cap,
            vertices: FxHashSet::default(),
            roots: Vec::new(),
            any_truncated: false,
            explorer: Explorer::default(),
        }
    }

    /// Adds the cluster of `v` unless `v` is already covered; returns the number of new vertices.
    pub fn absorb(&mut self, g: &GraphFamily, v: &VertexId) -> usize {
        if self.vertices.contains(v) {
            return 0;
        }
        let before = self.vertices.len();
        let (cluster, truncated) = self.explorer.explore(g, &self.field, *v, self.cap);
        self.vertices.extend(cluster.iter().copied());
        self.roots.push(*v);
        self.any_truncated |= truncated;
        self.vertices.len() - before
    }

    pub fn volume(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.vertices.contains(v)
    }

    pub fn vertices(&self) -> &FxHashSet<VertexId> {
        &self.vertices
    }

    /// One representative per absorbed cluster.
    pub fn cluster_roots(&self) -> &[VertexId] {
        &self.roots
    }

    pub fn any_truncated(&self) -> bool {
        self.any_truncated
    }
}

enum Visits {
    Plain(FxHashSet<VertexId>),
    Tracked(RangeTracker),
}

impl Visits {
    fn insert(&mut self, g: &GraphFamily, v: &VertexId) -> bool {
        match self {
            Visits::Plain(s) => s.insert(*v),
            Visits::Tracked(t) => t.visit(g, v),
        }
    }

    fn range(&self) -> usize {
        match self {
            Visits::Plain(s) => s.len(),
            Visits::Tracked(t) => t.range(),
        }
    }

    fn boundary(&self) -> Option<usize> {
        match self {
            Visits::Plain(_) => None,
            Visits::Tracked(t) => Some(t.boundary_len()),
        }
    }
}

/// Observables at one time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub k: usize,
    pub range: usize,
    /// `L_k`, when boundary tracking is on.
    pub boundary: Option<usize>,
    pub union: usize,
    pub truncated: bool,
}

/// A walk dragging its union of clusters along.
pub struct UnionWalk<'g> {
    g: &'g GraphFamily,
    rng: WalkRng,
    cur: VertexId,
    k: usize,
    visits: Visits,
    state: UnionState,
    buf: Vec<VertexId>,
}

impl<'g> UnionWalk<'g> {
    pub fn new(
        g: &'g GraphFamily,
        cfg: &PercolationConfig,
        x0: &VertexId,
        rng: WalkRng,
        track_boundary: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        g.check_vertex(x0)?;
        let mut visits = if track_boundary {
            Visits::Tracked(RangeTracker::default())
        } else {
            Visits::Plain(FxHashSet::default())
        };
        visits.insert(g, x0);
        let mut state = UnionState::new(cfg);
        state.absorb(g, x0);
        Ok(Self { g, rng, cur: *x0, k: 0, visits, state, buf: Vec::new() })
    }

    #[inline]
    pub fn step(&mut self) {
        self.cur = self.g.random_neighbor(&self.cur, &mut self.rng, &mut self.buf);
        self.k += 1;
        if self.visits.insert(self.g, &self.cur) {
            self.state.absorb(self.g, &self.cur);
        }
    }

    pub fn advance_to(&mut self, k: usize) {
        while self.k < k {
            self.step();
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            k: self.k,
            range: self.visits.range(),
            boundary: self.visits.boundary(),
            union: self.state.volume(),
            truncated: self.state.any_truncated(),
        }
    }

    pub fn position(&self) -> VertexId {
        self.cur
    }

    pub fn time(&self) -> usize {
        self.k
    }

    pub fn state(&self) -> &UnionState {
        &self.state
    }

    pub fn into_state(self) -> UnionState {
        self.state
    }

    /// Boundary vertices of the range, when tracked.
    pub fn boundary_vertices(&self) -> Vec<VertexId> {
        match &self.visits {
            Visits::Plain(_) => Vec::new(),
            Visits::Tracked(t) => t.boundary().copied().collect(),
        }
    }
}

/// Walk stream of a replica.
pub fn walk_rng(cfg: &PercolationConfig) -> WalkRng {
    WalkRng::new(cfg.master_seed, cfg.replica_index, TAG_WALK)
}

/// `U_k`, `R_k` and `L_k` for `k = 0..=n`.
#[derive(Debug)]
pub struct UnionRun {
    pub u_sequence: Vec<u64>,
    pub r_sequence: Vec<u64>,
    pub l_sequence: Vec<u64>,
    pub truncated: bool,
    pub state: UnionState,
}

impl std::fmt::Debug for UnionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnionState")
            .field("volume", &self.vertices.len())
            .field("clusters", &self.roots.len())
            .field("any_truncated", &self.any_truncated)
            .finish()
    }
}

/// Full sequences of `U_k`, `R_k`, `L_k` up to `n`, with the walk drawn from the replica's
/// walk stream.
pub fn union_volume(g: &GraphFamily, cfg: &PercolationConfig, x0: &VertexId, n: usize) -> Result<UnionRun> {
    let mut w = UnionWalk::new(g, cfg, x0, walk_rng(cfg), true)?;
    let mut u = Vec::with_capacity(n + 1);
    let mut r = Vec::with_capacity(n + 1);
    let mut l = Vec::with_capacity(n + 1);
    loop {
        let s = w.snapshot();
        u.push(s.union as u64);
        r.push(s.range as u64);
        l.push(s.boundary.unwrap_or(0) as u64);
        if w.time() == n {
            break;
        }
        w.step();
    }
    let truncated = w.state().any_truncated();
    Ok(UnionRun { u_sequence: u, r_sequence: r, l_sequence: l, truncated, state: w.into_state() })
}

/// Snapshots at the ascending times `checkpoints`, on the replica's walk stream.
pub fn union_snapshots(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    x0: &VertexId,
    checkpoints: &[usize],
    track_boundary: bool,
) -> Result<Vec<Snapshot>> {
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be ascending".into()));
    }
    let mut w = UnionWalk::new(g, cfg, x0, walk_rng(cfg), track_boundary)?;
    Ok(checkpoints
        .iter()
        .map(|&k| {
            w.advance_to(k);
            w.snapshot()
        })
        .collect())
}

/// Walk positions `S_0..=S_n` on the replica's walk stream.
pub fn walk_path(g: &GraphFamily, x0: &VertexId, n: usize, rng: &mut WalkRng) -> Result<Vec<VertexId>> {
    g.check_vertex(x0)?;
    let mut path = Vec::with_capacity(n + 1);
    let mut buf = Vec::new();
    let mut cur = *x0;
    path.push(cur);
    for _ in 0..n {
        cur = g.random_neighbor(&cur, rng, &mut buf);
        path.push(cur);
    }
    Ok(path)
}

/// `|union of C_x over x in path|` and whether any cluster was truncated.
pub fn union_of_path(g: &GraphFamily, cfg: &PercolationConfig, path: &[VertexId]) -> (usize, bool) {
    let mut st = UnionState::new(cfg);
    for v in path {
        st.absorb(g, v);
    }
    (st.volume(), st.any_truncated())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowUnion {
    pub value: usize,
    pub truncated: bool,
}

/// `U_{m,n}` on the same walk and configuration as [`union_volume`].
pub fn window_union(g: &GraphFamily, cfg: &PercolationConfig, x0: &VertexId, m: usize, n: usize) -> Result<WindowUnion> {
    if m > n {
        return Err(Error::InvalidArgument(format!("window start {m} exceeds end {n}")));
    }
    cfg.validate()?;
    let path = walk_path(g, x0, n, &mut walk_rng(cfg))?;
    let (value, truncated) = union_of_path(g, cfg, &path[m..=n]);
    Ok(WindowUnion { value, truncated })
}

/// `U_n` through the last-exit decomposition: each `|C_{S_i}|` counts when no later position
/// lies in `C_{S_i}`. Kept as an independent check of the incremental union.
pub fn last_exit_union(g: &GraphFamily, cfg: &PercolationConfig, path: &[VertexId]) -> (usize, bool) {
    let field = cfg.field();
    let mut ex = Explorer::default();
    let mut total = 0;
    let mut truncated = false;
    for (i, v) in path.iter().enumerate() {
        let (cluster, t) = ex.explore(g, &field, *v, cfg.cluster_cap);
        truncated |= t;
        let members: FxHashSet<VertexId> = cluster.iter().copied().collect();
        if !path[i + 1..].iter().any(|w| members.contains(w)) {
            total += members.len();
        }
    }
    (total, truncated)
}

/// Finite subset of `Z^d` containing the origin, for the sausage volume.
#[derive(Clone, Debug, PartialEq)]
pub struct SausageShape {
    points: Vec<Point>,
}

impl SausageShape {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let mut seen = FxHashSet::default();
        let mut uniq = Vec::new();
        for p in points {
            if seen.insert(p) {
                uniq.push(p);
            }
        }
        if !seen.contains(&[0; MAX_DIM]) {
            return Err(Error::InvalidArgument("sausage shape must contain the origin".into()));
        }
        Ok(Self { points: uniq })
    }

    pub fn singleton() -> Self {
        Self { points: vec![[0; MAX_DIM]] }
    }

    /// ℓ∞ ball of radius `r` in `Z^d`.
    pub fn linf_ball(d: usize, r: i32) -> Result<Self> {
        if d == 0 || d > MAX_DIM || r < 0 {
            return Err(Error::InvalidArgument(format!("bad ball parameters d={d}, r={r}")));
        }
        let side = (2 * r + 1) as usize;
        let total = side.pow(d as u32);
        let points = (0..total)
            .map(|mut i| {
                let mut p = [0; MAX_DIM];
                for c in p.iter_mut().take(d) {
                    *c = (i % side) as i32 - r;
                    i /= side;
                }
                p
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        self.points.iter().map(|p| VertexId::Lattice(*p)).collect()
    }
}

fn step_index(delta: &Point) -> usize {
    delta.iter().fold(0, |acc, &c| acc * 3 + (c + 1) as usize)
}

/// `|union of (S_i + A), i <= n|` for a walk on a pure lattice family.
///
/// After a step by `delta`, only the points `a` of `A` with `a + delta` outside `A` can be new,
/// so each step inserts just that face.
pub fn sausage_volume(
    g: &GraphFamily,
    shape: &SausageShape,
    x0: &VertexId,
    n: usize,
    rng: &mut WalkRng,
) -> Result<usize> {
    let d = match g {
        GraphFamily::ZdNearest { d } | GraphFamily::ZdLinf { d } => *d,
        _ => return Err(Error::Unsupported { op: "sausage_volume", family: g.to_string() }),
    };
    g.check_vertex(x0)?;
    if shape.points.iter().any(|p| p[d..].iter().any(|&c| c != 0)) {
        return Err(Error::InvalidArgument(format!("sausage shape does not live in Z^{d}")));
    }
    let members: FxHashSet<Point> = shape.points.iter().copied().collect();
    let mut faces: Vec<Vec<Point>> = vec![Vec::new(); 81];
    let mut buf = Vec::new();
    g.neighbors_into(&VertexId::origin(), &mut buf);
    for nb in &buf {
        let delta = *nb.point().expect("lattice");
        faces[step_index(&delta)] =
            shape.points.iter().filter(|a| !members.contains(&add(a, &delta))).copied().collect();
    }
    let start = *x0.point().expect("lattice");
    let mut covered: FxHashSet<Point> = shape.points.iter().map(|a| add(&start, a)).collect();
    let mut cur = *x0;
    for _ in 0..n {
        let next = g.random_neighbor(&cur, rng, &mut buf);
        let (p, q) = (cur.point().expect("lattice"), next.point().expect("lattice"));
        let delta = [q[0] - p[0], q[1] - p[1], q[2] - p[2], q[3] - p[3]];
        for a in &faces[step_index(&delta)] {
            covered.insert(add(q, a));
        }
        cur = next;
    }
    Ok(covered.len())
}

#[inline]
fn add(p: &Point, q: &Point) -> Point {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]
}

/// Percolation-averaged union along one fixed walk.
#[derive(Clone, Debug)]
pub struct IntermediateEstimate {
    pub mean: f64,
    pub se: f64,
    /// `R_n` of the fixed walk.
    pub range: usize,
    pub truncation_rate: f64,
}

/// Averages `U_n` over `inner_replicas` configurations along the walk of replica
/// `cfg.replica_index`; inner configuration `j` uses replica index
/// `cfg.replica_index * inner_replicas + j`.
pub fn intermediate_volume(
    g: &GraphFamily,
    cfg: &PercolationConfig,
    x0: &VertexId,
    n: usize,
    inner_replicas: u64,
) -> Result<IntermediateEstimate> {
    if inner_replicas < 2 {
        return Err(Error::InvalidArgument("intermediate volume needs at least 2 inner replicas".into()));
    }
    cfg.validate()?;
    let path = walk_path(g, x0, n, &mut walk_rng(cfg))?;
    let range = path.iter().collect::<FxHashSet<_>>().len();
    let mut st = BatchStats::<f64>::new();
    let mut truncated = 0u64;
    for j in 0..inner_replicas {
        let inner = cfg.with_replica(cfg.replica_index.wrapping_mul(inner_replicas).wrapping_add(j));
        let (u, t) = union_of_path(g, &inner, &path);
        st.push(u as f64);
        truncated += t as u64;
    }
    Ok(IntermediateEstimate {
        mean: st.mean(),
        se: st.se().unwrap_or(0.0),
        range,
        truncation_rate: truncated as f64 / inner_replicas as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Intersection {
    pub value: usize,
    pub first: usize,
    pub second: usize,
    pub truncated: bool,
}

/// `I_n`: two independent walks from the family's origin sharing one configuration.
pub fn intersection_volume(g: &GraphFamily, cfg: &PercolationConfig, n: usize) -> Result<Intersection> {
    cfg.validate()?;
    let o = g.origin();
    let mut a = UnionWalk::new(g, cfg, &o, walk_rng(cfg), false)?;
    let mut b = UnionWalk::new(g, cfg, &o, WalkRng::new(cfg.master_seed, cfg.replica_index, TAG_WALK_SECOND), false)?;
    a.advance_to(n);
    b.advance_to(n);
    let (sa, sb) = (a.state(), b.state());
    let (small, large) = if sa.volume() <= sb.volume() { (sa, sb) } else { (sb, sa) };
    let value = small.vertices().iter().filter(|v| large.contains(v)).count();
    Ok(Intersection {
        value,
        first: sa.volume(),
        second: sb.volume(),
        truncated: sa.any_truncated() || sb.any_truncated(),
    })
}

/// Final range and union of a walk on `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineRun {
    pub min: i64,
    pub max: i64,
    pub range: u64,
    pub union: u64,
    pub truncated: bool,
}

#[derive(Clone, Copy)]
struct Block {
    disp: i8,
    low: i8,
    high: i8,
}

const BLOCK_BITS: u32 = 16;

fn blocks() -> &'static [Block] {
    static TABLE: OnceLock<Vec<Block>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..1u32 << BLOCK_BITS)
            .map(|bits| {
                let (mut pos, mut low, mut high) = (0i8, 0i8, 0i8);
                for i in 0..BLOCK_BITS {
                    pos += if (bits >> i) & 1 == 0 { 1 } else { -1 };
                    low = low.min(pos);
                    high = high.max(pos);
                }
                Block { disp: pos, low, high }
            })
            .collect()
    })
}

/// `R_n` and `U_n` on `Z` in closed form: the visited set is the interval `[min, max]`, and
/// the union extends it by the runs of open edges beyond each end.
///
/// Steps are taken sixteen at a time from a table; the walk consumes the same bits as the
/// generic walk, so both produce the same trajectory from the same stream.
pub fn line_union(cfg: &PercolationConfig, n: usize, rng: &mut WalkRng) -> Result<LineRun> {
    cfg.validate()?;
    let table = blocks();
    let (mut pos, mut min, mut max) = (0i64, 0i64, 0i64);
    for _ in 0..n / BLOCK_BITS as usize {
        let b = table[rng.next_bits(BLOCK_BITS) as usize];
        min = min.min(pos + b.low as i64);
        max = max.max(pos + b.high as i64);
        pos += b.disp as i64;
    }
    for _ in 0..n % BLOCK_BITS as usize {
        pos += if rng.next_bit() { -1 } else { 1 };
        min = min.min(pos);
        max = max.max(pos);
    }
    let field = cfg.field();
    let at = |x: i64| VertexId::lattice(&[x as i32]);
    let run = |from: i64, dir: i64| -> (u64, bool) {
        let mut len = 0u64;
        let mut x = from;
        while field.open(&at(x), &at(x + dir)) {
            len += 1;
            x += dir;
            if len as usize >= cfg.cluster_cap {
                return (len, true);
            }
        }
        (len, false)
    };
    let (left, tl) = run(min, -1);
    let (right, tr) = run(max, 1);
    let range = (max - min + 1) as u64;
    Ok(LineRun { min, max, range, union: range + left + right, truncated: tl || tr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z(d: usize) -> GraphFamily {
        GraphFamily::nearest(d).unwrap()
    }

    #[test]
    fn zero_p_union_is_the_range() {
        let g = z(2);
        let cfg = PercolationConfig::new(0.0, 1).unwrap();
        let run = union_volume(&g, &cfg, &g.origin(), 500).unwrap();
        assert_eq!(run.u_sequence, run.r_sequence);
        assert!(!run.truncated);
    }

    #[test]
    fn initial_union_is_the_origin_cluster() {
        let g = z(2);
        for r in 0..20 {
            let cfg = PercolationConfig::new(0.4, 3).unwrap().with_replica(r);
            let run = union_volume(&g, &cfg, &g.origin(), 0).unwrap();
            let c = crate::percolation::explore_cluster(&cfg, &g, &g.origin()).unwrap();
            assert_eq!(run.u_sequence, vec![c.len() as u64]);
        }
    }

    #[test]
    fn line_fast_path_agrees_with_generic_walk() {
        let g = z(1);
        for r in 0..50 {
            let cfg = PercolationConfig::new(0.3, 17).unwrap().with_replica(r);
            let n = 37 * r as usize + 5;
            let run = union_volume(&g, &cfg, &g.origin(), n).unwrap();
            let fast = line_union(&cfg, n, &mut walk_rng(&cfg)).unwrap();
            assert_eq!(fast.union, *run.u_sequence.last().unwrap());
            assert_eq!(fast.range, *run.r_sequence.last().unwrap());
        }
    }

    #[test]
    fn window_from_zero_is_the_union() {
        let g = z(2);
        let cfg = PercolationConfig::new(0.2, 5).unwrap().with_replica(2);
        let run = union_volume(&g, &cfg, &g.origin(), 300).unwrap();
        let w = window_union(&g, &cfg, &g.origin(), 0, 300).unwrap();
        assert_eq!(w.value as u64, *run.u_sequence.last().unwrap());
        assert!(window_union(&g, &cfg, &g.origin(), 5, 4).is_err());
    }

    #[test]
    fn sausage_reductions() {
        let g = z(3);
        let o = g.origin();
        let mut a = WalkRng::new(8, 0, TAG_WALK);
        let mut b = a.clone();
        let s = sausage_volume(&g, &SausageShape::singleton(), &o, 400, &mut a).unwrap();
        let t = crate::walk::simulate_trace(&g, &o, 400, &mut b).unwrap();
        assert_eq!(s, t.range());
        let ball = SausageShape::linf_ball(3, 1).unwrap();
        assert_eq!(ball.len(), 27);
        assert_eq!(sausage_volume(&g, &ball, &o, 0, &mut a).unwrap(), 27);
        let hairy = GraphFamily::hairy(vec![1], vec![1]).unwrap();
        assert!(matches!(
            sausage_volume(&hairy, &SausageShape::singleton(), &hairy.origin(), 3, &mut a),
            Err(Error::Unsupported { .. })
        ));
        assert!(SausageShape::new(vec![[1, 0, 0, 0]]).is_err());
    }

    #[test]
    fn intermediate_at_zero_p_is_the_range() {
        let g = z(2);
        let cfg = PercolationConfig::new(0.0, 4).unwrap();
        let e = intermediate_volume(&g, &cfg, &g.origin(), 100, 5).unwrap();
        assert_eq!(e.mean, e.range as f64);
        assert_eq!(e.se, 0.0);
        let cfg = cfg.with_p(0.2).unwrap();
        let e = intermediate_volume(&g, &cfg, &g.origin(), 100, 5).unwrap();
        assert!(e.mean >= e.range as f64);
        assert!(intermediate_volume(&g, &cfg, &g.origin(), 100, 1).is_err());
    }

    #[test]
    fn intersection_at_time_zero_is_the_origin_cluster() {
        let g = z(2);
        for r in 0..20 {
            let cfg = PercolationConfig::new(0.4, 6).unwrap().with_replica(r);
            let i = intersection_volume(&g, &cfg, 0).unwrap();
            let c = crate::percolation::explore_cluster(&cfg, &g, &g.origin()).unwrap();
            assert_eq!(i.value, c.len());
            let i = intersection_volume(&g, &cfg, 50).unwrap();
            assert!(i.value <= i.first.min(i.second));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn sausage_faces_match_brute_force(seed in any::<u64>(), n in 0usize..200, d in 1usize..4, linf in any::<bool>()) {
            let g = if linf { GraphFamily::linf(d).unwrap() } else { z(d) };
            let shape = SausageShape::new(vec![[0; 4], [1, 0, 0, 0], [-1, 0, 0, 0], [2, 0, 0, 0]]).unwrap();
            let mut a = WalkRng::new(seed, 0, TAG_WALK);
            let mut b = a.clone();
            let fast = sausage_volume(&g, &shape, &g.origin(), n, &mut a).unwrap();
            let path = walk_path(&g, &g.origin(), n, &mut b).unwrap();
            let brute: FxHashSet<Point> = path
                .iter()
                .flat_map(|s| shape.points().iter().map(move |p| add(s.point().unwrap(), p)))
                .collect();
            prop_assert_eq!(fast, brute.len());
        }
    }
}
