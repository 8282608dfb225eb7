//! Discrete capacity of finite sets.
//!
//! The exact route solves the Dirichlet problem `h = 1` on `A`, harmonic on `B(o, m) \ A`,
//! `h = 0` outside the ball, by Jacobi-preconditioned conjugate gradients, then extrapolates
//! in the radius. The Monte Carlo route estimates the escape probabilities
//! `P^x(T_A > exit)` directly.
//!
//! Two normalizations come out of one solve:
//!
//! * `value = sum_{x in A} (1/deg x) sum_{y ~ x} (1 - h(y))`, the sum of escape probabilities,
//!   which is the capacity used throughout (it equals `P^o(T_o = inf)` for a singleton), and
//! * `conductance = sum_{x in A} sum_{y ~ x} (1 - h(y))`, the inverse effective resistance
//!   with unit conductances.
//!
//! On a regular graph the two differ by the degree.

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::graph::{GraphFamily, VertexId};
use crate::rng::WalkRng;
use crate::scalar::Real;
use crate::stats::combined_se;
use crate::walk::{hit_from, HitResult, Hitting, StopRule};

pub const CG_TOLERANCE: f64 = 1e-10;
pub const CG_MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapacityMethod {
    ExactDirichlet,
    McEscape,
}

impl CapacityMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            CapacityMethod::ExactDirichlet => "exact_dirichlet",
            CapacityMethod::McEscape => "mc_escape",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Uncertainty<F> {
    StandardError(F),
    /// Deterministic bracket from the two largest radii.
    Bracket { lower: F, upper: F },
    /// A single radius gives no bracket.
    Unavailable,
}

/// One Dirichlet solve at a fixed radius.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusSolve<F> {
    pub radius: usize,
    pub value: F,
    pub conductance: F,
    /// Dirichlet energy of the solution; equals `conductance` at the exact solution.
    pub energy: F,
    pub iterations: usize,
    pub residual: F,
    pub unknowns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityEstimate<F> {
    pub value: F,
    pub uncertainty: Uncertainty<F>,
    pub method: CapacityMethod,
    pub radii: Vec<usize>,
    pub per_radius: Vec<RadiusSolve<F>>,
    /// Whether the per-radius values are nonincreasing in the radius.
    pub monotone: bool,
    /// Monte Carlo only: `|value(R) - value(2R)|`.
    pub doubling_gap: Option<F>,
}

impl<F: Real> CapacityEstimate<F> {
    pub fn bracket(&self) -> Option<(F, F)> {
        match self.uncertainty {
            Uncertainty::Bracket { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }

    /// Half-width usable as a one-sigma-like uncertainty.
    pub fn spread(&self) -> F {
        match self.uncertainty {
            Uncertainty::StandardError(s) => s,
            Uncertainty::Bracket { lower, upper } => (upper - lower) / F::of(2.0),
            Uncertainty::Unavailable => F::zero(),
        }
    }
}

/// Ball `B(o, m)` with a dense index and its interior rows in compressed form.
struct DirichletSystem {
    /// Interior vertices (the unknowns).
    interior: Vec<VertexId>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    degree: Vec<u32>,
    /// Number of neighbours in `A` per interior row.
    to_set: Vec<u32>,
    /// Number of neighbours outside the ball per interior row.
    to_outside: Vec<u32>,
    index: FxHashMap<VertexId, u32>,
}

fn set_within(g: &GraphFamily, set: &[VertexId], radius: usize) -> Result<FxHashMap<VertexId, usize>> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("capacity of the empty set".into()));
    }
    for v in set {
        g.check_vertex(v)?;
    }
    let dist: FxHashMap<VertexId, usize> = g.ball_with_distances(&g.origin(), radius)?.into_iter().collect();
    if radius < 2 {
        return Err(Error::InvalidArgument(format!("radius {radius} is too small")));
    }
    for v in set {
        match dist.get(v) {
            Some(&d) if d + 2 <= radius => {}
            _ => {
                return Err(Error::InvalidArgument(format!("{v} is not within B(o, {})", radius - 2)));
            }
        }
    }
    Ok(dist)
}

impl DirichletSystem {
    /// Unknowns are `B(o, radius)` minus `removed`.
    fn build(g: &GraphFamily, removed: &FxHashSet<VertexId>, radius: usize) -> Result<Self> {
        let ball = g.ball(&g.origin(), radius)?;
        let mut index = FxHashMap::default();
        let mut interior = Vec::new();
        for v in ball.iter() {
            if !removed.contains(v) {
                index.insert(*v, interior.len() as u32);
                interior.push(*v);
            }
        }
        let in_ball: FxHashSet<VertexId> = ball.into_iter().collect();
        let mut row_ptr = Vec::with_capacity(interior.len() + 1);
        let mut cols = Vec::new();
        let mut degree = Vec::with_capacity(interior.len());
        let mut to_set = Vec::with_capacity(interior.len());
        let mut to_outside = Vec::with_capacity(interior.len());
        let mut buf = Vec::new();
        row_ptr.push(0);
        for v in &interior {
            g.neighbors_into(v, &mut buf);
            let (mut a, mut out) = (0, 0);
            for w in &buf {
                if let Some(&j) = index.get(w) {
                    cols.push(j);
                } else if in_ball.contains(w) {
                    a += 1;
                } else {
                    out += 1;
                }
            }
            row_ptr.push(cols.len());
            degree.push(buf.len() as u32);
            to_set.push(a);
            to_outside.push(out);
        }
        Ok(Self { interior, row_ptr, cols, degree, to_set, to_outside, index })
    }

    fn apply<F: Real>(&self, x: &[F], y: &mut [F]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = F::of(self.degree[i] as f64) * x[i];
            for &j in &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]] {
                s -= x[j as usize];
            }
            *yi = s;
        }
    }

    /// Jacobi-preconditioned CG for `L x = b`.
    fn solve<F: Real>(&self, b: &[F]) -> Result<(Vec<F>, usize, F)> {
        let n = b.len();
        let tol = F::of(CG_TOLERANCE.max(10.0 * F::epsilon().to_f64_lossy()));
        let inv_diag: Vec<F> = self.degree.iter().map(|&d| F::one() / F::of(d as f64)).collect();
        let dot = |a: &[F], c: &[F]| a.iter().zip(c).fold(F::zero(), |s, (x, y)| s + *x * *y);
        let b_norm = dot(b, b).sqrt();
        let mut x = vec![F::zero(); n];
        if b_norm == F::zero() {
            return Ok((x, 0, F::zero()));
        }
        let mut r = b.to_vec();
        let mut z: Vec<F> = r.iter().zip(&inv_diag).map(|(a, d)| *a * *d).collect();
        let mut p = z.clone();
        let mut ap = vec![F::zero(); n];
        let mut rz = dot(&r, &z);
        for it in 1..=CG_MAX_ITERATIONS {
            self.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = dot(&r, &r).sqrt() / b_norm;
            if res <= tol {
                return Ok((x, it, res));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        Err(Error::NoConvergence { iterations: CG_MAX_ITERATIONS, residual: res.to_f64_lossy() })
    }
}

/// Dirichlet solve for `A` at one radius.
pub fn dirichlet_solve<F: Real>(g: &GraphFamily, set: &[VertexId], radius: usize) -> Result<RadiusSolve<F>> {
    set_within(g, set, radius)?;
    let members: FxHashSet<VertexId> = set.iter().copied().collect();
    let sys = DirichletSystem::build(g, &members, radius)?;
    let b: Vec<F> = sys.to_set.iter().map(|&k| F::of(k as f64)).collect();
    let (h, iterations, residual) = sys.solve(&b)?;
    let mut value = F::zero();
    let mut conductance = F::zero();
    let mut buf = Vec::new();
    for x in &members {
        g.neighbors_into(x, &mut buf);
        let mut flux = F::zero();
        for y in &buf {
            if let Some(&j) = sys.index.get(y) {
                flux += F::one() - h[j as usize];
            }
        }
        conductance += flux;
        value += flux / F::of(buf.len() as f64);
    }
    // Each interior-interior edge is seen from both ends.
    let mut energy = F::zero();
    for (i, &hi) in h.iter().enumerate() {
        let mut inner = F::zero();
        for &j in &sys.cols[sys.row_ptr[i]..sys.row_ptr[i + 1]] {
            let d = hi - h[j as usize];
            inner += d * d;
        }
        let to_a = F::one() - hi;
        energy += inner / F::of(2.0)
            + F::of(sys.to_set[i] as f64) * to_a * to_a
            + F::of(sys.to_outside[i] as f64) * hi * hi;
    }
    Ok(RadiusSolve { radius, value, conductance, energy, iterations, residual, unknowns: sys.interior.len() })
}

/// `P^x(walk leaves B(o, m) before returning to x)` through the Green's function of the walk
/// killed outside the ball: the expected number of visits `u(x)` solves
/// `deg(y) u(y) - sum_{z ~ y, z in B} u(z) = deg(x) 1{y = x}`, and the escape probability is
/// `1 / u(x)`.
pub fn escape_probability_green<F: Real>(g: &GraphFamily, x: &VertexId, radius: usize) -> Result<F> {
    set_within(g, std::slice::from_ref(x), radius)?;
    let sys = DirichletSystem::build(g, &FxHashSet::default(), radius)?;
    let ix = sys.index[x] as usize;
    let mut b = vec![F::zero(); sys.interior.len()];
    b[ix] = F::of(sys.degree[ix] as f64);
    let (u, _, _) = sys.solve(&b)?;
    Ok(F::one() / u[ix])
}

/// Capacity of `A` from Dirichlet solves at each radius, extrapolated in `1/m` from the two
/// largest radii: `c_inf = (m2 c(m2) - m1 c(m1)) / (m2 - m1)`, uncertainty `|c(m2) - c_inf|`.
pub fn capacity_exact<F: Real>(g: &GraphFamily, set: &[VertexId], radii: &[usize]) -> Result<CapacityEstimate<F>> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("at least one radius is required".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    set_within(g, set, radii[0])?;
    let per_radius: Vec<RadiusSolve<F>> =
        radii.par_iter().map(|&m| dirichlet_solve::<F>(g, set, m)).collect::<Result<_>>()?;
    let monotone = per_radius.windows(2).all(|w| w[1].value <= w[0].value);
    let last = per_radius.last().expect("nonempty");
    let (value, uncertainty) = if per_radius.len() >= 2 {
        let prev = &per_radius[per_radius.len() - 2];
        let (m1, m2) = (F::of(prev.radius as f64), F::of(last.radius as f64));
        let extrapolated = ((m2 * last.value - m1 * prev.value) / (m2 - m1)).max(F::zero());
        let u = (last.value - extrapolated).abs();
        (extrapolated, Uncertainty::Bracket { lower: (extrapolated - u).max(F::zero()), upper: extrapolated + u })
    } else {
        (last.value, Uncertainty::Unavailable)
    };
    Ok(CapacityEstimate {
        value,
        uncertainty,
        method: CapacityMethod::ExactDirichlet,
        radii,
        per_radius,
        monotone,
        doubling_gap: None,
    })
}

/// Monte Carlo sum of escape probabilities `P^x(T_A > exit of the box of radius R)` over
/// `x in A`, with `walks` walks per point. The escape radius is measured from the family's
/// origin.
pub fn escape_sum(
    g: &GraphFamily,
    set: &[VertexId],
    escape_radius: u64,
    walks: u64,
    rng: &mut WalkRng,
) -> Result<(f64, f64)> {
    if walks == 0 {
        return Err(Error::InvalidArgument("walks must be positive".into()));
    }
    let members: FxHashSet<VertexId> = set.iter().copied().collect();
    let o = g.origin();
    let stop = StopRule::escape(escape_radius);
    let mut value = 0.0;
    let mut var = 0.0;
    for x in set {
        g.check_vertex(x)?;
        let mut escaped = 0u64;
        for _ in 0..walks {
            if let HitResult::Escaped(_) = hit_from(g, &o, x, &|v| members.contains(v), Hitting::T, stop, rng) {
                escaped += 1;
            }
        }
        let q = escaped as f64 / walks as f64;
        value += q;
        var += q * (1.0 - q) / walks as f64;
    }
    Ok((value, var.sqrt()))
}

/// Monte Carlo capacity with a radius-doubling check.
pub fn capacity_mc(
    g: &GraphFamily,
    set: &[VertexId],
    escape_radius: u64,
    walks: u64,
    rng: &mut WalkRng,
) -> Result<CapacityEstimate<f64>> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("capacity of the empty set".into()));
    }
    let (value, se) = escape_sum(g, set, escape_radius, walks, rng)?;
    let (doubled, se2) = escape_sum(g, set, 2 * escape_radius, walks, rng)?;
    Ok(CapacityEstimate {
        value,
        uncertainty: Uncertainty::StandardError(se),
        method: CapacityMethod::McEscape,
        radii: vec![escape_radius as usize, 2 * escape_radius as usize],
        per_radius: Vec::new(),
        monotone: doubled <= value + 3.0 * combined_se(se, se2),
        doubling_gap: Some((value - doubled).abs()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering3 {
    StrictlyLess,
    /// Brackets overlap or are undefined; larger radii are needed.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacityComparison {
    pub nearest: CapacityEstimate<f64>,
    pub linf: CapacityEstimate<f64>,
    pub verdict: Ordering3,
}

impl CapacityComparison {
    pub fn strict_less(&self) -> bool {
        self.verdict == Ordering3::StrictlyLess
    }
}

/// Capacity of `A` on the nearest-neighbour and the ℓ∞ lattice `Z^3`; strictly less when the
/// two extrapolation brackets are disjoint in that order.
pub fn capacity_compare_z3(set: &[VertexId], radii: &[usize]) -> Result<CapacityComparison> {
    let nearest = capacity_exact::<f64>(&GraphFamily::nearest(3)?, set, radii)?;
    let linf = capacity_exact::<f64>(&GraphFamily::linf(3)?, set, radii)?;
    let verdict = match (nearest.bracket(), linf.bracket()) {
        (Some((_, hi)), Some((lo, _))) if hi < lo => Ordering3::StrictlyLess,
        _ => Ordering3::Indeterminate,
    };
    Ok(CapacityComparison { nearest, linf, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TAG_AUX;

    fn v(c: &[i32]) -> VertexId {
        VertexId::lattice(c)
    }

    #[test]
    fn line_conductance_is_two_series_chains() {
        let g = GraphFamily::nearest(1).unwrap();
        let s = dirichlet_solve::<f64>(&g, &[v(&[0])], 1000).unwrap();
        // Zero potential sits at distance m + 1 on either side.
        assert!((s.conductance - 2.0 / 1001.0).abs() < 1e-9, "{}", s.conductance);
        assert!((s.conductance - 0.002).abs() / 0.002 < 1e-3);
        assert!((s.value - 1.0 / 1001.0).abs() < 1e-9);
    }

    #[test]
    fn recurrent_capacity_decreases() {
        for d in [1, 2] {
            let g = GraphFamily::nearest(d).unwrap();
            let e = capacity_exact::<f64>(&g, &[g.origin()], &[8, 16, 32]).unwrap();
            assert!(e.monotone);
            assert!(e.per_radius[2].value < e.per_radius[0].value);
        }
    }

    #[test]
    fn energy_matches_flux_and_green_function_matches_dirichlet() {
        let g = GraphFamily::nearest(3).unwrap();
        let s = dirichlet_solve::<f64>(&g, &[v(&[0, 0, 0]), v(&[1, 0, 0])], 10).unwrap();
        assert!((s.energy - s.conductance).abs() < 1e-7 * s.conductance);
        let single = dirichlet_solve::<f64>(&g, &[g.origin()], 10).unwrap();
        let green: f64 = escape_probability_green(&g, &g.origin(), 10).unwrap();
        assert!((single.value - green).abs() < 1e-8, "{} vs {green}", single.value);
        let alt = GraphFamily::alternating(vec![3]).unwrap();
        let s = dirichlet_solve::<f64>(&alt, &[alt.origin()], 8).unwrap();
        assert!((s.energy - s.conductance).abs() < 1e-7 * s.conductance);
    }

    #[test]
    fn single_precision_solve_agrees_with_double() {
        let g = GraphFamily::nearest(3).unwrap();
        let a = dirichlet_solve::<f64>(&g, &[g.origin()], 8).unwrap();
        let b = dirichlet_solve::<f32>(&g, &[g.origin()], 8).unwrap();
        assert!((a.value - b.value as f64).abs() < 1e-4);
    }

    #[test]
    fn capacity_is_monotone_under_inclusion() {
        let g = GraphFamily::nearest(3).unwrap();
        let one = capacity_exact::<f64>(&g, &[g.origin()], &[8, 16]).unwrap();
        let two = capacity_exact::<f64>(&g, &[g.origin(), v(&[1, 0, 0])], &[8, 16]).unwrap();
        assert!(one.value <= two.value);
        for (a, b) in one.per_radius.iter().zip(&two.per_radius) {
            assert!(a.value <= b.value);
        }
    }

    #[test]
    fn domain_errors() {
        let g = GraphFamily::nearest(3).unwrap();
        assert!(capacity_exact::<f64>(&g, &[v(&[7, 0, 0])], &[8]).is_err());
        assert!(capacity_exact::<f64>(&g, &[], &[8]).is_err());
        let e = capacity_exact::<f64>(&g, &[g.origin()], &[8]).unwrap();
        assert_eq!(e.uncertainty, Uncertainty::Unavailable);
        let c = capacity_compare_z3(&[g.origin()], &[8]).unwrap();
        assert_eq!(c.verdict, Ordering3::Indeterminate);
    }

    #[test]
    fn monte_carlo_escape_near_exact_at_small_radius() {
        let g = GraphFamily::nearest(3).unwrap();
        let exact: f64 = escape_probability_green(&g, &g.origin(), 6).unwrap();
        let mut rng = WalkRng::new(1, 0, TAG_AUX);
        // Graph ball of radius 6 is not the ℓ∞ box, so only a loose comparison at one radius;
        // the box estimate lies between the balls it contains and is contained in.
        let inner: f64 = escape_probability_green(&g, &g.origin(), 18).unwrap();
        let (mc, se) = escape_sum(&g, &[g.origin()], 6, 20_000, &mut rng).unwrap();
        assert!(mc <= exact + 4.0 * se && mc >= inner - 4.0 * se, "{inner} <= {mc} <= {exact}");
    }
}
