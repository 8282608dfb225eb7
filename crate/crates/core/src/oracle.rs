//! Exact expectations on tiny instances by exhaustive enumeration.
//!
//! Arithmetic is generic over [`ExactField`]; use [`ExactRational`](crate::ExactRational) for
//! ground truth and `f64` for quick looks.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graph::{GraphFamily, MaxDegree, VertexId};

/// Largest number of walk paths enumerated.
pub const PATH_BUDGET: u128 = 10_000_000;
/// Largest number of box edges enumerated (`2^26` configurations).
pub const EDGE_BUDGET: usize = 26;

/// A field that holds the oracle's sums exactly (or, for floats, approximately).
pub trait ExactField: Clone + Num + PartialOrd + Debug {
    fn ratio(num: u64, den: u64) -> Self;
    fn as_f64(&self) -> f64;
}

impl ExactField for BigRational {
    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl ExactField for f64 {
    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }
}

fn from_u128<F: ExactField>(x: u128) -> F {
    let hi = F::ratio((x >> 64) as u64, 1);
    let shift = F::ratio(1 << 32, 1) * F::ratio(1 << 32, 1);
    hi * shift + F::ratio(x as u64, 1)
}

fn pow<F: ExactField>(x: &F, k: usize) -> F {
    (0..k).fold(F::one(), |acc, _| acc * x.clone())
}

/// All walk paths of length `n` from `x0`, grouped by the sequence of positions, with the
/// product of degrees along the path (the inverse of its probability).
fn for_each_path(
    g: &GraphFamily,
    x0: &VertexId,
    n: usize,
    mut visit: impl FnMut(&[VertexId], u128),
) -> Result<u128> {
    g.check_vertex(x0)?;
    if let MaxDegree::Bounded(d) = g.max_degree() {
        let bound = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if bound > PATH_BUDGET {
            return Err(Error::BudgetExceeded(format!("{d}^{n} paths exceed the budget of {PATH_BUDGET}")));
        }
    }
    let mut count = 0u128;
    let mut path = vec![*x0];
    let mut stack: Vec<(Vec<VertexId>, usize, u128)> = Vec::new();
    let mut buf = Vec::new();
    g.neighbors_into(x0, &mut buf);
    stack.push((buf.clone(), 0, buf.len() as u128));
    if n == 0 {
        visit(&path, 1);
        return Ok(1);
    }
    while let Some(top) = stack.last_mut() {
        if top.1 == top.0.len() {
            stack.pop();
            path.pop();
            continue;
        }
        let next = top.0[top.1];
        top.1 += 1;
        let weight = top.2;
        path.push(next);
        if path.len() == n + 1 {
            count += 1;
            if count > PATH_BUDGET {
                return Err(Error::BudgetExceeded(format!("more than {PATH_BUDGET} paths")));
            }
            visit(&path, weight);
            path.pop();
        } else {
            g.neighbors_into(&next, &mut buf);
            let w = weight * buf.len() as u128;
            stack.push((buf.clone(), 0, w));
        }
    }
    Ok(count)
}

/// Exact `E[R_n]`.
pub fn exact_mean_range<F: ExactField>(g: &GraphFamily, x0: &VertexId, n: usize) -> Result<F> {
    let mut by_weight: FxHashMap<u128, u128> = FxHashMap::default();
    for_each_path(g, x0, n, |path, w| {
        let mut seen: Vec<VertexId> = path.to_vec();
        seen.sort_unstable();
        seen.dedup();
        *by_weight.entry(w).or_default() += seen.len() as u128;
    })?;
    let mut keys: Vec<_> = by_weight.into_iter().collect();
    keys.sort_unstable();
    Ok(keys.into_iter().fold(F::zero(), |acc, (w, s)| acc + from_u128::<F>(s) / from_u128::<F>(w)))
}

/// An exact value with a rigorous bound on what the finite box leaves out.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<F> {
    pub value: F,
    pub epsilon: F,
    pub box_radius: usize,
    pub box_vertices: usize,
    pub box_edges: usize,
    pub paths: u128,
}

impl<F: ExactField> OracleResult<F> {
    /// `[value - epsilon, value + epsilon]` as floats.
    pub fn interval_f64(&self) -> (f64, f64) {
        let (v, e) = (self.value.as_f64(), self.epsilon.as_f64());
        (v - e, v + e)
    }
}

/// `E[U_n]` with the percolation restricted to the edges of `B(x0, box_radius)`.
///
/// The box value never exceeds the true `U_n`. Given the box union `W`, every extra vertex is
/// reached through an edge from `W` to the outside of the box followed by a self-avoiding path
/// that avoids `W`; those edges are independent of the event that the box union is `W`. With
/// `k(W)` such exit edges the expected excess is at most `k(W) p / (1 - (Δ - 1) p)`, and
/// `epsilon` is the expectation of that bound.
pub fn exact_mean_union<F: ExactField>(
    g: &GraphFamily,
    p: &F,
    x0: &VertexId,
    n: usize,
    box_radius: usize,
) -> Result<OracleResult<F>> {
    if *p < F::zero() || *p > F::one() {
        return Err(Error::InvalidArgument("p must lie in [0, 1]".into()));
    }
    if n > box_radius {
        return Err(Error::InvalidArgument(format!("walk length {n} leaves the box of radius {box_radius}")));
    }
    let delta = g
        .max_degree()
        .bounded()
        .ok_or_else(|| Error::Unsupported { op: "exact_mean_union", family: g.to_string() })?;
    let ball = g.ball(x0, box_radius)?;
    if ball.len() > 64 {
        return Err(Error::BudgetExceeded(format!("box has {} vertices; at most 64 are supported", ball.len())));
    }
    let index: FxHashMap<VertexId, usize> = ball.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut edges = Vec::new();
    let mut outside = vec![0u64; ball.len()];
    let mut buf = Vec::new();
    for (i, v) in ball.iter().enumerate() {
        g.neighbors_into(v, &mut buf);
        for w in &buf {
            match index.get(w) {
                Some(&j) if i < j => edges.push((i, j)),
                Some(_) => {}
                None => outside[i] += 1,
            }
        }
    }
    let m = edges.len();
    if m > EDGE_BUDGET {
        return Err(Error::BudgetExceeded(format!("box has {m} edges; at most {EDGE_BUDGET} are enumerated")));
    }
    let branching = F::ratio(delta as u64 - 1, 1) * p.clone();
    if p.clone() > F::zero() && branching >= F::one() {
        return Err(Error::InvalidArgument("leakage bound diverges: (Δ - 1) p >= 1".into()));
    }
    let chi = F::one() / (F::one() - branching);

    // Visited sets, each with the exact probability of the paths producing it.
    let mut groups: FxHashMap<u64, FxHashMap<u128, u128>> = FxHashMap::default();
    let paths = for_each_path(g, x0, n, |path, w| {
        let mask = path.iter().fold(0u64, |acc, v| acc | 1 << index[v]);
        *groups.entry(mask).or_default().entry(w).or_default() += 1;
    })?;
    let mut groups: Vec<(u64, F)> = groups
        .into_iter()
        .map(|(mask, ws)| {
            let mut ws: Vec<_> = ws.into_iter().collect();
            ws.sort_unstable();
            (mask, ws.into_iter().fold(F::zero(), |acc, (w, c)| acc + from_u128::<F>(c) / from_u128::<F>(w)))
        })
        .collect();
    groups.sort_by_key(|g| g.0);
    let members: Vec<Vec<usize>> =
        groups.iter().map(|(mask, _)| (0..64).filter(|i| mask >> i & 1 == 1).collect()).collect();

    // Integer sums of U and of exit-edge counts, per group and per number of open edges.
    let mut sum_u = vec![vec![0u64; m + 1]; groups.len()];
    let mut sum_k = vec![vec![0u64; m + 1]; groups.len()];
    let mut parent = vec![0usize; ball.len()];
    let mut comp = vec![0u64; ball.len()];
    for config in 0u64..1 << m {
        for (i, p) in parent.iter_mut().enumerate() {
            *p = i;
        }
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (e, &(a, b)) in edges.iter().enumerate() {
            if config >> e & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        comp.iter_mut().for_each(|c| *c = 0);
        for v in 0..ball.len() {
            let r = find(&mut parent, v);
            comp[r] |= 1 << v;
        }
        let open = config.count_ones() as usize;
        for (gi, vs) in members.iter().enumerate() {
            let mut union = 0u64;
            for &v in vs {
                union |= comp[find(&mut parent, v)];
            }
            sum_u[gi][open] += union.count_ones() as u64;
            let mut k = 0;
            let mut bits = union;
            while bits != 0 {
                k += outside[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            sum_k[gi][open] += k;
        }
    }
    let q = F::one() - p.clone();
    let weights: Vec<F> = (0..=m).map(|j| pow(p, j) * pow(&q, m - j)).collect();
    let mut value = F::zero();
    let mut exits = F::zero();
    for (gi, (_, w)) in groups.iter().enumerate() {
        let mut su = F::zero();
        let mut sk = F::zero();
        for j in 0..=m {
            su = su + F::ratio(sum_u[gi][j], 1) * weights[j].clone();
            sk = sk + F::ratio(sum_k[gi][j], 1) * weights[j].clone();
        }
        value = value + w.clone() * su;
        exits = exits + w.clone() * sk;
    }
    let epsilon = exits * p.clone() * chi;
    Ok(OracleResult { value, epsilon, box_radius, box_vertices: ball.len(), box_edges: m, paths })
}

/// `P(|C_0| > k)` on `Z`: `|C_0| = s` has probability `s p^(s-1) (1-p)^2`.
pub fn exact_line_cluster_law<F: ExactField>(p: &F, k: u64) -> Result<F> {
    if *p < F::zero() || *p >= F::one() {
        return Err(Error::InvalidArgument("p must lie in [0, 1)".into()));
    }
    let q = F::one() - p.clone();
    let mut tail = F::one();
    let mut p_pow = F::one();
    for s in 1..=k {
        tail = tail - F::ratio(s, 1) * p_pow.clone() * q.clone() * q.clone();
        p_pow = p_pow * p.clone();
    }
    Ok(tail)
}

/// `E|C_0| = 1 + 2p / (1 - p)` on `Z`.
pub fn exact_line_cluster_mean<F: ExactField>(p: &F) -> Result<F> {
    if *p < F::zero() || *p >= F::one() {
        return Err(Error::InvalidArgument("p must lie in [0, 1)".into()));
    }
    Ok(F::one() + F::ratio(2, 1) * p.clone() / (F::one() - p.clone()))
}

/// Convenience: `num/den` as an exact rational.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn z(d: usize) -> GraphFamily {
        GraphFamily::nearest(d).unwrap()
    }

    #[test]
    fn mean_ranges() {
        let r: BigRational = exact_mean_range(&z(1), &z(1).origin(), 2).unwrap();
        assert_eq!(r, rational(5, 2));
        let r: BigRational = exact_mean_range(&z(2), &z(2).origin(), 2).unwrap();
        assert_eq!(r, rational(11, 4));
        for g in [z(1), z(3), GraphFamily::linf(2).unwrap(), GraphFamily::hairy(vec![1], vec![3]).unwrap()] {
            let r: BigRational = exact_mean_range(&g, &g.origin(), 1).unwrap();
            assert_eq!(r, rational(2, 1));
        }
        assert!(exact_mean_range::<f64>(&z(3), &z(3).origin(), 10).is_err());
    }

    #[test]
    fn union_at_zero_p_is_the_range() {
        for (g, n, r) in [(z(1), 2, 3), (z(2), 2, 2), (z(2), 1, 2), (z(3), 1, 1)] {
            let u = exact_mean_union::<BigRational>(&g, &rational(0, 1), &g.origin(), n, r).unwrap();
            let range: BigRational = exact_mean_range(&g, &g.origin(), n).unwrap();
            assert_eq!(u.value, range);
            assert!(u.epsilon.is_zero());
        }
    }

    #[test]
    fn pinned_line_union() {
        let g = z(1);
        let u = exact_mean_union::<BigRational>(&g, &rational(1, 2), &g.origin(), 1, 3).unwrap();
        assert_eq!(u.box_edges, 6);
        assert_eq!(u.paths, 2);
        assert_eq!(u.value, rational(29, 8));
        assert_eq!(u.epsilon, rational(3, 8));
        // On the line the bound is attained: the full mean is 4.
        assert_eq!(u.value.clone() + u.epsilon.clone(), rational(4, 1));
        // The float instantiation runs the same arithmetic.
        let f = exact_mean_union::<f64>(&g, &0.5, &g.origin(), 1, 3).unwrap();
        assert!((f.value - 29.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn budgets_are_enforced() {
        let g = z(2);
        assert!(matches!(
            exact_mean_union::<f64>(&g, &0.1, &g.origin(), 2, 3),
            Err(Error::BudgetExceeded(_))
        ));
        assert!(exact_mean_union::<f64>(&g, &0.1, &g.origin(), 3, 2).is_err());
        let u = exact_mean_union::<f64>(&g, &0.1, &g.origin(), 2, 2).unwrap();
        assert_eq!(u.box_edges, 16);
        assert!(u.epsilon > 0.0);
    }

    #[test]
    fn line_cluster_law() {
        assert_eq!(exact_line_cluster_law(&rational(0, 1), 0).unwrap(), rational(1, 1));
        assert_eq!(exact_line_cluster_law(&rational(1, 2), 1).unwrap(), rational(3, 4));
        assert_eq!(exact_line_cluster_mean(&rational(2, 5)).unwrap(), rational(7, 3));
        // Tail sums to the mean: E|C| = sum_k P(|C| > k).
        let p = rational(2, 5);
        let partial = (0..200).fold(rational(0, 1), |acc, k| acc + exact_line_cluster_law(&p, k).unwrap());
        assert!((partial.as_f64() - 7.0 / 3.0).abs() < 1e-12);
    }
}
