use std::collections::VecDeque;
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use super::vertex::{Edge, Point, VertexId, MAX_DIM};
use crate::error::{Error, Result};
use crate::rng::WalkRng;

/// Maximal degree of a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaxDegree {
    Bounded(usize),
    Unbounded,
}

impl MaxDegree {
    pub fn bounded(self) -> Option<usize> {
        match self {
            MaxDegree::Bounded(d) => Some(d),
            MaxDegree::Unbounded => None,
        }
    }
}

/// Adjacency rule inside an ℓ∞ shell of the alternating graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShellRule {
    Nearest,
    Linf,
}

/// An infinite graph given as a lazy adjacency oracle.
///
/// Construct through the validating constructors ([`GraphFamily::nearest`],
/// [`GraphFamily::linf`], [`GraphFamily::alternating`], [`GraphFamily::hairy`],
/// [`GraphFamily::finite_modification`]).
#[derive(Clone, Debug, PartialEq)]
pub enum GraphFamily {
    /// Nearest-neighbour lattice `Z^d`.
    ZdNearest { d: usize },
    /// `Z^d` with edges between points at ℓ∞ distance one.
    ZdLinf { d: usize },
    /// `Z^3` whose ℓ∞ shells `[M_i, M_{i+1})` alternate between nearest-neighbour (even `i`)
    /// and ℓ∞ (odd `i`) adjacency, with `M_0 = 0`; the unbounded region past the last listed
    /// radius keeps the parity rule of its index. An empty list means ℓ∞ adjacency everywhere.
    AlternatingZ3 { shells: Vec<i32> },
    /// Half-line `{0, 1, ...}` with `hairs[k]` pendant vertices attached at `anchors[k]`.
    HairyHalfLine { anchors: Vec<u64>, hairs: Vec<u64> },
    /// A base family with edges added/removed inside a finite ball around the origin.
    FiniteModification(Box<Modification>),
}

/// Payload of [`GraphFamily::FiniteModification`].
#[derive(Clone, Debug)]
pub struct Modification {
    base: GraphFamily,
    radius: usize,
    added: Vec<Edge>,
    removed: Vec<Edge>,
    patch: FxHashMap<VertexId, Patch>,
}

#[derive(Clone, Debug, Default)]
struct Patch {
    add: Vec<VertexId>,
    remove: Vec<VertexId>,
}

impl PartialEq for Modification {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base
            && self.radius == other.radius
            && self.added == other.added
            && self.removed == other.removed
    }
}

impl Modification {
    pub fn base(&self) -> &GraphFamily {
        &self.base
    }
    pub fn radius(&self) -> usize {
        self.radius
    }
    pub fn added(&self) -> &[Edge] {
        &self.added
    }
    pub fn removed(&self) -> &[Edge] {
        &self.removed
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::ZdNearest { d } => write!(f, "z{d}"),
            GraphFamily::ZdLinf { d } => write!(f, "zlinf{d}"),
            GraphFamily::AlternatingZ3 { shells } => {
                let s: Vec<String> = shells.iter().map(|m| m.to_string()).collect();
                write!(f, "alt3[{}]", s.join(","))
            }
            GraphFamily::HairyHalfLine { anchors, .. } => write!(f, "hairy[{} anchors]", anchors.len()),
            GraphFamily::FiniteModification(m) => write!(
                f,
                "fm({}, r={}, +{}, -{})",
                m.base,
                m.radius,
                m.added.len(),
                m.removed.len()
            ),
        }
    }
}

fn linf_offsets(d: usize) -> Vec<Point> {
    let total = 3usize.pow(d as u32);
    let center = (total - 1) / 2;
    (0..total)
        .filter(|&i| i != center)
        .map(|mut i| {
            let mut p = [0; MAX_DIM];
            for c in p.iter_mut().take(d) {
                *c = (i % 3) as i32 - 1;
                i /= 3;
            }
            p
        })
        .collect()
}

#[inline]
fn add(p: &Point, q: &Point) -> Point {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]
}

#[inline]
pub(crate) fn linf_norm(p: &Point) -> i32 {
    p.iter().map(|c| c.abs()).max().unwrap_or(0)
}

impl GraphFamily {
    pub fn nearest(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(GraphFamily::ZdNearest { d })
    }

    pub fn linf(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(GraphFamily::ZdLinf { d })
    }

    pub fn alternating(shells: Vec<i32>) -> Result<Self> {
        if shells.iter().any(|&m| m <= 0) {
            return Err(Error::InvalidFamily("shell radii must be positive".into()));
        }
        if shells.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFamily("shell radii must be strictly increasing".into()));
        }
        Ok(GraphFamily::AlternatingZ3 { shells })
    }

    pub fn hairy(anchors: Vec<u64>, hairs: Vec<u64>) -> Result<Self> {
        if anchors.len() != hairs.len() {
            return Err(Error::InvalidFamily("anchor and hair schedules differ in length".into()));
        }
        if anchors.first().is_some_and(|&a| a == 0) {
            return Err(Error::InvalidFamily("anchors must be positive".into()));
        }
        if anchors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFamily("anchors must be strictly increasing".into()));
        }
        if anchors.len() > u32::MAX as usize || hairs.iter().any(|&b| b > u32::MAX as u64) {
            return Err(Error::InvalidFamily("hair schedule too large".into()));
        }
        Ok(GraphFamily::HairyHalfLine { anchors, hairs })
    }

    /// Base graph with `added` and `removed` edges, every endpoint within graph distance
    /// `radius` of the base origin. The result must stay simple and connected; connectivity is
    /// checked on the induced graph of the ball of radius `radius + 1`.
    pub fn finite_modification(
        base: GraphFamily,
        radius: usize,
        added: Vec<Edge>,
        removed: Vec<Edge>,
    ) -> Result<Self> {
        if matches!(base, GraphFamily::FiniteModification(_)) {
            return Err(Error::InvalidFamily("nested finite modifications are not supported".into()));
        }
        let origin = base.origin();
        let inner: FxHashSet<VertexId> = base.ball(&origin, radius)?.into_iter().collect();
        let mut patch: FxHashMap<VertexId, Patch> = FxHashMap::default();
        let mut seen = FxHashSet::default();
        for e in added.iter().chain(removed.iter()) {
            if !seen.insert(*e) {
                return Err(Error::InvalidEdge(format!("edge {e:?} listed twice")));
            }
        }
        let mut buf = Vec::new();
        for (edges, adding) in [(&added, true), (&removed, false)] {
            for e in edges.iter() {
                let (u, v) = e.endpoints();
                if !inner.contains(&u) || !inner.contains(&v) {
                    return Err(Error::InvalidEdge(format!("{e:?} leaves the ball of radius {radius}")));
                }
                base.neighbors_into(&u, &mut buf);
                let present = buf.contains(&v);
                if adding && present {
                    return Err(Error::InvalidEdge(format!("{e:?} already exists (graph must stay simple)")));
                }
                if !adding && !present {
                    return Err(Error::InvalidEdge(format!("{e:?} is not an edge of the base")));
                }
                for (a, b) in [(u, v), (v, u)] {
                    let entry = patch.entry(a).or_default();
                    if adding {
                        entry.add.push(b);
                    } else {
                        entry.remove.push(b);
                    }
                }
            }
        }
        let g = GraphFamily::FiniteModification(Box::new(Modification { base, radius, added, removed, patch }));
        g.check_connected_ball(radius + 1)?;
        Ok(g)
    }

    fn check_connected_ball(&self, radius: usize) -> Result<()> {
        let base = match self {
            GraphFamily::FiniteModification(m) => &m.base,
            _ => self,
        };
        let members: FxHashSet<VertexId> = base.ball(&base.origin(), radius)?.into_iter().collect();
        let start = *members.iter().next().expect("balls are nonempty");
        let mut seen = FxHashSet::default();
        seen.insert(start);
        let mut queue = VecDeque::from([start]);
        let mut buf = Vec::new();
        while let Some(v) = queue.pop_front() {
            self.neighbors_into(&v, &mut buf);
            for w in buf.iter() {
                if members.contains(w) && seen.insert(*w) {
                    queue.push_back(*w);
                }
            }
        }
        if seen.len() != members.len() {
            return Err(Error::InvalidFamily(format!(
                "finite modification disconnects the ball of radius {radius}"
            )));
        }
        Ok(())
    }

    /// Distinguished root vertex `o`.
    pub fn origin(&self) -> VertexId {
        match self {
            GraphFamily::HairyHalfLine { .. } => VertexId::Spine(0),
            GraphFamily::FiniteModification(m) => m.base.origin(),
            _ => VertexId::origin(),
        }
    }

    /// Lattice dimension, if the vertex set is `Z^d`.
    pub fn lattice_dim(&self) -> Option<usize> {
        match self {
            GraphFamily::ZdNearest { d } | GraphFamily::ZdLinf { d } => Some(*d),
            GraphFamily::AlternatingZ3 { .. } => Some(3),
            GraphFamily::HairyHalfLine { .. } => None,
            GraphFamily::FiniteModification(m) => m.base.lattice_dim(),
        }
    }

    /// Whether the simple random walk is recurrent. Finite modifications inherit this from
    /// their base.
    pub fn is_recurrent(&self) -> bool {
        match self {
            GraphFamily::ZdNearest { d } | GraphFamily::ZdLinf { d } => *d <= 2,
            GraphFamily::AlternatingZ3 { .. } => false,
            GraphFamily::HairyHalfLine { .. } => true,
            GraphFamily::FiniteModification(m) => m.base.is_recurrent(),
        }
    }

    /// Whether every vertex looks alike (the pure lattices).
    pub fn is_vertex_transitive(&self) -> bool {
        matches!(self, GraphFamily::ZdNearest { .. } | GraphFamily::ZdLinf { .. })
    }

    /// Rule of the shell a vertex of the alternating graph sits in.
    pub fn shell_rule(shells: &[i32], p: &Point) -> ShellRule {
        rule_of_region(shells, region_of(shells, linf_norm(p)))
    }

    pub fn is_valid(&self, v: &VertexId) -> bool {
        match (self, v) {
            (GraphFamily::ZdNearest { d } | GraphFamily::ZdLinf { d }, VertexId::Lattice(p)) => {
                p[*d..].iter().all(|&c| c == 0)
            }
            (GraphFamily::AlternatingZ3 { .. }, VertexId::Lattice(p)) => p[3] == 0,
            (GraphFamily::HairyHalfLine { .. }, VertexId::Spine(_)) => true,
            (GraphFamily::HairyHalfLine { hairs, .. }, VertexId::Hair { anchor, index }) => {
                *anchor >= 1
                    && (*anchor as usize) <= hairs.len()
                    && *index >= 1
                    && (*index as u64) <= hairs[*anchor as usize - 1]
            }
            (GraphFamily::FiniteModification(m), v) => m.base.is_valid(v),
            _ => false,
        }
    }

    pub(crate) fn check_vertex(&self, v: &VertexId) -> Result<()> {
        if self.is_valid(v) {
            Ok(())
        } else {
            Err(Error::InvalidVertex { vertex: v.to_string(), family: self.to_string() })
        }
    }

    /// Exact neighbour list of a valid vertex.
    pub fn neighbors(&self, v: &VertexId) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        let mut out = Vec::new();
        self.neighbors_into(v, &mut out);
        Ok(out)
    }

    /// Writes the neighbours of `v` into `out` (cleared first). `v` must be valid.
    pub fn neighbors_into(&self, v: &VertexId, out: &mut Vec<VertexId>) {
        out.clear();
        match (self, v) {
            (GraphFamily::ZdNearest { d }, VertexId::Lattice(p)) => {
                for i in 0..*d {
                    let mut q = *p;
                    q[i] += 1;
                    out.push(VertexId::Lattice(q));
                    q[i] -= 2;
                    out.push(VertexId::Lattice(q));
                }
            }
            (GraphFamily::ZdLinf { d }, VertexId::Lattice(p)) => {
                for off in offsets_for(*d) {
                    out.push(VertexId::Lattice(add(p, off)));
                }
            }
            (GraphFamily::AlternatingZ3 { shells }, VertexId::Lattice(p)) => {
                let rp = region_of(shells, linf_norm(p));
                for off in offsets_for(3) {
                    let q = add(p, off);
                    if alternating_edge(shells, rp, &q, off) {
                        out.push(VertexId::Lattice(q));
                    }
                }
            }
            (GraphFamily::HairyHalfLine { anchors, hairs }, VertexId::Spine(i)) => {
                if *i > 0 {
                    out.push(VertexId::Spine(i - 1));
                }
                out.push(VertexId::Spine(i + 1));
                if let Ok(k) = anchors.binary_search(i) {
                    let anchor = k as u32 + 1;
                    out.extend((1..=hairs[k] as u32).map(|index| VertexId::Hair { anchor, index }));
                }
            }
            (GraphFamily::HairyHalfLine { anchors, .. }, VertexId::Hair { anchor, .. }) => {
                out.push(VertexId::Spine(anchors[*anchor as usize - 1]));
            }
            (GraphFamily::FiniteModification(m), v) => {
                m.base.neighbors_into(v, out);
                if let Some(patch) = m.patch.get(v) {
                    out.retain(|w| !patch.remove.contains(w));
                    out.extend_from_slice(&patch.add);
                }
            }
            _ => {}
        }
    }

    pub fn degree(&self, v: &VertexId) -> Result<usize> {
        self.check_vertex(v)?;
        Ok(self.degree_unchecked(v))
    }

    pub(crate) fn degree_unchecked(&self, v: &VertexId) -> usize {
        match (self, v) {
            (GraphFamily::ZdNearest { d }, _) => 2 * d,
            (GraphFamily::ZdLinf { d }, _) => 3usize.pow(*d as u32) - 1,
            (GraphFamily::HairyHalfLine { anchors, hairs }, VertexId::Spine(i)) => {
                let spine = if *i > 0 { 2 } else { 1 };
                spine + anchors.binary_search(i).map(|k| hairs[k] as usize).unwrap_or(0)
            }
            (GraphFamily::HairyHalfLine { .. }, VertexId::Hair { .. }) => 1,
            _ => {
                let mut buf = Vec::new();
                self.neighbors_into(v, &mut buf);
                buf.len()
            }
        }
    }

    pub fn max_degree(&self) -> MaxDegree {
        match self {
            GraphFamily::ZdNearest { d } => MaxDegree::Bounded(2 * d),
            GraphFamily::ZdLinf { d } => MaxDegree::Bounded(3usize.pow(*d as u32) - 1),
            // Every shell list contains an ℓ∞ region (shell 1, or everything when empty).
            GraphFamily::AlternatingZ3 { .. } => MaxDegree::Bounded(26),
            GraphFamily::HairyHalfLine { .. } => MaxDegree::Unbounded,
            GraphFamily::FiniteModification(m) => match m.base.max_degree() {
                MaxDegree::Unbounded => MaxDegree::Unbounded,
                MaxDegree::Bounded(base) => {
                    let patched = m
                        .patch
                        .keys()
                        .map(|v| self.degree_unchecked(v))
                        .max()
                        .unwrap_or(0);
                    MaxDegree::Bounded(base.max(patched))
                }
            },
        }
    }

    /// One step of the simple random walk from `v`: a uniformly chosen neighbour.
    /// `buf` is scratch space for families without a closed-form step.
    #[inline]
    pub fn random_neighbor(&self, v: &VertexId, rng: &mut WalkRng, buf: &mut Vec<VertexId>) -> VertexId {
        match (self, v) {
            (GraphFamily::ZdNearest { d }, VertexId::Lattice(p)) => {
                let k = rng.below(2 * *d as u32) as usize;
                let mut q = *p;
                q[k >> 1] += if k & 1 == 0 { 1 } else { -1 };
                VertexId::Lattice(q)
            }
            (GraphFamily::ZdLinf { d }, VertexId::Lattice(p)) => {
                let offs = offsets_for(*d);
                let k = rng.below(offs.len() as u32) as usize;
                VertexId::Lattice(add(p, &offs[k]))
            }
            (GraphFamily::HairyHalfLine { anchors, hairs }, VertexId::Spine(i)) => {
                let spine = if *i > 0 { 2 } else { 1 };
                let extra = anchors.binary_search(i).map(|k| (k, hairs[k] as usize));
                let deg = spine + extra.map(|(_, b)| b).unwrap_or(0);
                let k = rng.below_usize(deg);
                if k < spine {
                    if *i > 0 && k == 0 {
                        VertexId::Spine(i - 1)
                    } else {
                        VertexId::Spine(i + 1)
                    }
                } else {
                    let (anchor, _) = extra.expect("index beyond spine implies hairs");
                    VertexId::Hair { anchor: anchor as u32 + 1, index: (k - spine) as u32 + 1 }
                }
            }
            (GraphFamily::HairyHalfLine { anchors, .. }, VertexId::Hair { anchor, .. }) => {
                VertexId::Spine(anchors[*anchor as usize - 1])
            }
            _ => {
                self.neighbors_into(v, buf);
                buf[rng.below_usize(buf.len())]
            }
        }
    }

    /// Whether `{u, v}` is an edge.
    pub fn adjacent(&self, u: &VertexId, v: &VertexId) -> bool {
        let mut buf = Vec::new();
        self.neighbors_into(u, &mut buf);
        buf.contains(v)
    }

    /// Lattice-unit distance used for escape radii: ℓ∞ norm of the difference on lattice
    /// families, spine distance on the hairy half-line (hairs sit at their anchor).
    pub fn escape_norm(&self, from: &VertexId, v: &VertexId) -> u64 {
        match (from, v) {
            (VertexId::Lattice(a), VertexId::Lattice(b)) => {
                (0..MAX_DIM).map(|i| (a[i] as i64 - b[i] as i64).unsigned_abs()).max().unwrap_or(0)
            }
            _ => {
                let pos = |x: &VertexId| -> u64 {
                    match (self, x) {
                        (_, VertexId::Spine(i)) => *i,
                        (GraphFamily::HairyHalfLine { anchors, .. }, VertexId::Hair { anchor, .. }) => {
                            anchors[*anchor as usize - 1]
                        }
                        (GraphFamily::FiniteModification(m), VertexId::Hair { anchor, .. }) => {
                            match &m.base {
                                GraphFamily::HairyHalfLine { anchors, .. } => anchors[*anchor as usize - 1],
                                _ => 0,
                            }
                        }
                        _ => 0,
                    }
                };
                pos(from).abs_diff(pos(v))
            }
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidFamily(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
    }
    Ok(())
}

fn offsets_for(d: usize) -> &'static [Point] {
    use std::sync::OnceLock;
    static TABLES: OnceLock<Vec<Vec<Point>>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=MAX_DIM).map(|k| if k == 0 { Vec::new() } else { linf_offsets(k) }).collect())[d]
}

/// Index `i` of the shell `[M_i, M_{i+1})` containing ℓ∞ norm `r` (with `M_0 = 0`).
#[inline]
fn region_of(shells: &[i32], r: i32) -> usize {
    shells.partition_point(|&m| m <= r)
}

#[inline]
fn rule_of_region(shells: &[i32], region: usize) -> ShellRule {
    if shells.is_empty() || region % 2 == 1 {
        ShellRule::Linf
    } else {
        ShellRule::Nearest
    }
}

#[inline]
fn alternating_edge(shells: &[i32], region_p: usize, q: &Point, off: &Point) -> bool {
    let rq = region_of(shells, linf_norm(q));
    match rule_of_region(shells, region_p.min(rq)) {
        ShellRule::Linf => true,
        ShellRule::Nearest => off.iter().map(|c| c.abs()).sum::<i32>() == 1,
    }
}
