//! Simple random walk: traces, range, inner boundary and hitting times.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::graph::{GraphFamily, VertexId};
use crate::rng::WalkRng;

/// A walk path `S_0, ..., S_n` together with its visited set.
#[derive(Clone, Debug)]
pub struct Trace {
    positions: Vec<VertexId>,
    visited: FxHashSet<VertexId>,
}

impl Trace {
    pub fn start(&self) -> VertexId {
        self.positions[0]
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[VertexId] {
        &self.positions
    }

    pub fn visited(&self) -> &FxHashSet<VertexId> {
        &self.visited
    }

    pub fn range(&self) -> usize {
        self.visited.len()
    }
}

/// Walks `n` steps from `x0`, each step uniform over the current neighbours.
pub fn simulate_trace(g: &GraphFamily, x0: &VertexId, n: usize, rng: &mut WalkRng) -> Result<Trace> {
    g.check_vertex(x0)?;
    let mut positions = Vec::with_capacity(n + 1);
    let mut visited = FxHashSet::default();
    let mut buf = Vec::new();
    let mut cur = *x0;
    positions.push(cur);
    visited.insert(cur);
    for _ in 0..n {
        cur = g.random_neighbor(&cur, rng, &mut buf);
        positions.push(cur);
        visited.insert(cur);
    }
    Ok(Trace { positions, visited })
}

/// `R_n`, the number of distinct visited vertices.
pub fn range(trace: &Trace) -> usize {
    trace.range()
}

/// Visited vertices with at least one unvisited neighbour, recomputed from scratch.
pub fn inner_boundary(g: &GraphFamily, trace: &Trace) -> FxHashSet<VertexId> {
    let mut buf = Vec::new();
    trace
        .visited
        .iter()
        .filter(|v| {
            g.neighbors_into(v, &mut buf);
            buf.iter().any(|w| !trace.visited.contains(w))
        })
        .copied()
        .collect()
}

/// Incrementally maintained range and inner boundary.
///
/// Each visited vertex stores its degree and how many of its neighbours are visited; it is on
/// the boundary while the second is below the first.
#[derive(Clone, Debug, Default)]
pub struct RangeTracker {
    seen: FxHashMap<VertexId, (u32, u32)>,
    boundary: usize,
    buf: Vec<VertexId>,
}

impl RangeTracker {
    pub fn new(g: &GraphFamily, x0: &VertexId) -> Self {
        let mut t = Self::default();
        t.visit(g, x0);
        t
    }

    /// Records a visit; returns whether `v` is new.
    pub fn visit(&mut self, g: &GraphFamily, v: &VertexId) -> bool {
        if self.seen.contains_key(v) {
            return false;
        }
        g.neighbors_into(v, &mut self.buf);
        let deg = self.buf.len() as u32;
        let mut inside = 0u32;
        for w in self.buf.iter() {
            if let Some(entry) = self.seen.get_mut(w) {
                inside += 1;
                entry.1 += 1;
                if entry.1 == entry.0 {
                    self.boundary -= 1;
                }
            }
        }
        if inside < deg {
            self.boundary += 1;
        }
        self.seen.insert(*v, (deg, inside));
        true
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.seen.contains_key(v)
    }

    pub fn range(&self) -> usize {
        self.seen.len()
    }

    /// `L_n`.
    pub fn boundary_len(&self) -> usize {
        self.boundary
    }

    pub fn boundary(&self) -> impl Iterator<Item = &VertexId> {
        self.seen.iter().filter(|(_, &(d, k))| k < d).map(|(v, _)| v)
    }

    pub fn visited(&self) -> impl Iterator<Item = &VertexId> {
        self.seen.keys()
    }
}

/// Whether time 0 counts as a hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hitting {
    /// `T_A = inf{n >= 1 : S_n in A}`.
    T,
    /// `H_A = inf{n >= 0 : S_n in A}`.
    H,
}

/// When to give up on a hitting-time walk. At least one rule must be set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct StopRule {
    pub budget: Option<u64>,
    /// The walk escapes once its escape norm from the start exceeds this radius.
    pub escape_radius: Option<u64>,
}

impl StopRule {
    pub fn budget(n: u64) -> Self {
        Self { budget: Some(n), escape_radius: None }
    }

    pub fn escape(radius: u64) -> Self {
        Self { budget: None, escape_radius: Some(radius) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HitResult {
    Hit(u64),
    BudgetExceeded,
    Escaped(u64),
}

impl HitResult {
    pub fn is_hit(&self) -> bool {
        matches!(self, HitResult::Hit(_))
    }
}

/// Runs a walk from `x0` until it enters `target` or a stop rule fires.
pub fn hitting_time(
    g: &GraphFamily,
    x0: &VertexId,
    target: impl Fn(&VertexId) -> bool,
    semantics: Hitting,
    stop: StopRule,
    rng: &mut WalkRng,
) -> Result<HitResult> {
    g.check_vertex(x0)?;
    if stop.budget.is_none() && stop.escape_radius.is_none() {
        return Err(Error::InvalidArgument("hitting time needs a budget or an escape radius".into()));
    }
    Ok(hit_from(g, x0, x0, &target, semantics, stop, rng))
}

/// As [`hitting_time`], with the escape norm measured from `center` rather than `x0`.
pub(crate) fn hit_from(
    g: &GraphFamily,
    center: &VertexId,
    x0: &VertexId,
    target: &impl Fn(&VertexId) -> bool,
    semantics: Hitting,
    stop: StopRule,
    rng: &mut WalkRng,
) -> HitResult {
    if semantics == Hitting::H && target(x0) {
        return HitResult::Hit(0);
    }
    let budget = stop.budget.unwrap_or(u64::MAX);
    let radius = stop.escape_radius.unwrap_or(u64::MAX);
    let mut buf = Vec::new();
    let mut cur = *x0;
    let mut k = 0u64;
    while k < budget {
        cur = g.random_neighbor(&cur, rng, &mut buf);
        k += 1;
        if target(&cur) {
            return HitResult::Hit(k);
        }
        if g.escape_norm(center, &cur) > radius {
            return HitResult::Escaped(radius);
        }
    }
    HitResult::BudgetExceeded
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TAG_WALK;
    use crate::stats::BatchStats;
    use proptest::prelude::*;

    fn z(d: usize) -> GraphFamily {
        GraphFamily::nearest(d).unwrap()
    }

    #[test]
    fn short_traces() {
        let g = z(3);
        let mut rng = WalkRng::new(1, 0, TAG_WALK);
        assert_eq!(simulate_trace(&g, &g.origin(), 0, &mut rng).unwrap().range(), 1);
        for _ in 0..100 {
            assert_eq!(simulate_trace(&g, &g.origin(), 1, &mut rng).unwrap().range(), 2);
        }
        let h = GraphFamily::hairy(vec![1], vec![5]).unwrap();
        for _ in 0..100 {
            assert_eq!(simulate_trace(&h, &h.origin(), 1, &mut rng).unwrap().range(), 2);
        }
    }

    #[test]
    fn mean_two_step_range_on_the_square_lattice() {
        let g = z(2);
        let mut rng = WalkRng::new(2, 0, TAG_WALK);
        let mut st = BatchStats::<f64>::new();
        for _ in 0..1_000_000 {
            st.push(simulate_trace(&g, &g.origin(), 2, &mut rng).unwrap().range() as f64);
        }
        assert!((st.mean() - 2.75).abs() < 3.0 * st.se().unwrap(), "{st:?}");
    }

    #[test]
    fn line_boundary_is_the_two_ends() {
        let g = z(1);
        let mut rng = WalkRng::new(3, 0, TAG_WALK);
        let t0 = simulate_trace(&g, &g.origin(), 0, &mut rng).unwrap();
        assert_eq!(inner_boundary(&g, &t0).len(), 1);
        for n in 1..200 {
            let t = simulate_trace(&g, &g.origin(), n, &mut rng).unwrap();
            assert_eq!(inner_boundary(&g, &t).len(), 2);
        }
    }

    #[test]
    fn mean_position_is_centred() {
        let g = z(2);
        let mut rng = WalkRng::new(4, 0, TAG_WALK);
        let mut xs = BatchStats::<f64>::new();
        for _ in 0..20_000 {
            let t = simulate_trace(&g, &g.origin(), 50, &mut rng).unwrap();
            xs.push(t.positions()[50].point().unwrap()[0] as f64);
        }
        assert!(xs.mean().abs() < 4.0 * xs.se().unwrap());
    }

    #[test]
    fn hitting_semantics() {
        let g = z(1);
        let o = g.origin();
        let mut rng = WalkRng::new(5, 0, TAG_WALK);
        let at_o = |v: &VertexId| *v == o;
        assert_eq!(hitting_time(&g, &o, at_o, Hitting::H, StopRule::budget(10), &mut rng).unwrap(), HitResult::Hit(0));
        let r = hitting_time(&g, &o, at_o, Hitting::T, StopRule::budget(10), &mut rng).unwrap();
        assert!(matches!(r, HitResult::Hit(k) if k >= 2 && k % 2 == 0) || r == HitResult::BudgetExceeded);
        assert!(hitting_time(&g, &o, at_o, Hitting::T, StopRule::default(), &mut rng).is_err());
        let e = hitting_time(&g, &o, |_| false, Hitting::T, StopRule::escape(5), &mut rng).unwrap();
        assert_eq!(e, HitResult::Escaped(5));
    }

    #[test]
    fn line_walk_returns() {
        let g = z(1);
        let o = g.origin();
        let mut rng = WalkRng::new(6, 0, TAG_WALK);
        let hits = (0..1000)
            .filter(|_| {
                hitting_time(&g, &o, |v| *v == o, Hitting::T, StopRule::budget(1_000_000), &mut rng)
                    .unwrap()
                    .is_hit()
            })
            .count();
        assert!(hits as f64 / 1000.0 > 0.99);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn incremental_boundary_matches_recomputation(seed in any::<u64>(), n in 0usize..300, family in 0usize..4) {
            let g = match family {
                0 => z(1),
                1 => z(2),
                2 => GraphFamily::alternating(vec![2, 4]).unwrap(),
                _ => GraphFamily::hairy(vec![2, 5], vec![3, 4]).unwrap(),
            };
            let mut rng = WalkRng::new(seed, 0, TAG_WALK);
            let t = simulate_trace(&g, &g.origin(), n, &mut rng).unwrap();
            let mut tracker = RangeTracker::new(&g, &t.start());
            let mut last = 1;
            for v in &t.positions()[1..] {
                tracker.visit(&g, v);
                prop_assert!(tracker.range() >= last);
                last = tracker.range();
            }
            let scratch = inner_boundary(&g, &t);
            let incremental: FxHashSet<VertexId> = tracker.boundary().copied().collect();
            prop_assert_eq!(tracker.boundary_len(), scratch.len());
            prop_assert_eq!(incremental, scratch);
            prop_assert_eq!(tracker.range(), t.range());
            prop_assert!(t.range() <= n + 1);
            for w in t.positions().windows(2) {
                prop_assert!(g.adjacent(&w[0], &w[1]));
            }
        }
    }
}
