use percwalk::graph::Distance;
use percwalk::{explore_cluster, Edge, GraphFamily, PercolationConfig, VertexId};
use proptest::prelude::*;
use rustc_hash::FxHashSet;

fn families() -> Vec<GraphFamily> {
    let fm = GraphFamily::finite_modification(
        GraphFamily::nearest(2).unwrap(),
        3,
        vec![Edge::new(VertexId::lattice(&[0, 0]), VertexId::lattice(&[2, 1])).unwrap()],
        vec![Edge::new(VertexId::lattice(&[1, 0]), VertexId::lattice(&[1, 1])).unwrap()],
    )
    .unwrap();
    vec![
        GraphFamily::nearest(1).unwrap(),
        GraphFamily::nearest(2).unwrap(),
        GraphFamily::nearest(3).unwrap(),
        GraphFamily::nearest(4).unwrap(),
        GraphFamily::linf(2).unwrap(),
        GraphFamily::linf(3).unwrap(),
        GraphFamily::alternating(vec![3, 7]).unwrap(),
        GraphFamily::hairy(vec![3, 7], vec![2, 5]).unwrap(),
        fm,
    ]
}

fn lattice_vertex(g: &GraphFamily, c: [i32; 4]) -> VertexId {
    let d = g.lattice_dim().unwrap_or(1);
    VertexId::lattice(&c[..d])
}

fn cases() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn adjacency_is_symmetric_and_simple(fam in 0usize..9, c in prop::array::uniform4(-9i32..10)) {
        let g = &families()[fam];
        let v = match g {
            GraphFamily::HairyHalfLine { .. } => VertexId::Spine(c[0].unsigned_abs() as u64),
            _ => lattice_vertex(g, c),
        };
        let nbrs = g.neighbors(&v).unwrap();
        let set: FxHashSet<VertexId> = nbrs.iter().copied().collect();
        prop_assert_eq!(set.len(), nbrs.len());
        prop_assert!(!set.contains(&v));
        prop_assert_eq!(g.degree(&v).unwrap(), nbrs.len());
        for u in &nbrs {
            prop_assert!(g.neighbors(u).unwrap().contains(&v));
            prop_assert!(g.adjacent(u, &v) && g.adjacent(&v, u));
        }
    }

    #[test]
    fn nearest_edges_are_linf_edges(d in 1usize..=4, c in prop::array::uniform4(-20i32..20)) {
        let near = GraphFamily::nearest(d).unwrap();
        let linf = GraphFamily::linf(d).unwrap();
        let v = VertexId::lattice(&c[..d]);
        let big: FxHashSet<VertexId> = linf.neighbors(&v).unwrap().into_iter().collect();
        prop_assert_eq!(big.len(), 3usize.pow(d as u32) - 1);
        for u in near.neighbors(&v).unwrap() {
            prop_assert!(big.contains(&u));
        }
    }

    #[test]
    fn finite_modification_agrees_with_base_outside_its_ball(c in prop::array::uniform2(-30i32..30)) {
        let fm = families().pop().unwrap();
        let base = GraphFamily::nearest(2).unwrap();
        let v = VertexId::lattice(&c);
        prop_assume!(c[0].abs() + c[1].abs() > 4);
        prop_assert_eq!(fm.neighbors(&v).unwrap(), base.neighbors(&v).unwrap());
    }

    #[test]
    fn clusters_are_deterministic_equivalence_classes(
        fam in 0usize..3, p in 0.0f64..0.24, seed in any::<u64>(), c in prop::array::uniform4(-5i32..5),
    ) {
        let g = &families()[fam];
        let cfg = PercolationConfig::new(p, seed).unwrap();
        let x = lattice_vertex(g, c);
        let a = explore_cluster(&cfg, g, &x).unwrap();
        let b = explore_cluster(&cfg, g, &x).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.vertices[0], x);
        prop_assume!(!a.truncated);
        let set = a.vertex_set();
        for y in a.vertices.iter().take(10) {
            prop_assert_eq!(explore_cluster(&cfg, g, y).unwrap().vertex_set(), set.clone());
        }
    }

    #[test]
    fn clusters_grow_with_p(fam in 0usize..3, p in 0.0f64..0.2, dp in 0.0f64..0.04, seed in any::<u64>()) {
        let g = &families()[fam];
        let o = g.origin();
        let lo = explore_cluster(&PercolationConfig::new(p, seed).unwrap(), g, &o).unwrap();
        let hi = explore_cluster(&PercolationConfig::new(p + dp, seed).unwrap(), g, &o).unwrap();
        prop_assume!(!hi.truncated);
        let hs = hi.vertex_set();
        prop_assert!(lo.vertices.iter().all(|v| hs.contains(v)));
    }
}

/// Region index of `|x|_∞` among the shell radii, and whether that region is nearest-neighbour.
fn nearest_region(shells: &[i32], x: &[i32; 3]) -> (usize, bool) {
    let r = x.iter().map(|c| c.abs()).max().unwrap();
    let i = shells.iter().filter(|&&m| m <= r).count();
    (i, !shells.is_empty() && i % 2 == 0)
}

#[test]
fn alternating_adjacency_matches_a_brute_force_table() {
    for shells in [vec![], vec![2], vec![2, 4], vec![1, 3, 4]] {
        let g = GraphFamily::alternating(shells.clone()).unwrap();
        let m = shells.last().copied().unwrap_or(0) + 2;
        let mut points = Vec::new();
        for a in -m..=m {
            for b in -m..=m {
                for c in -m..=m {
                    points.push([a, b, c]);
                }
            }
        }
        for x in &points {
            let nbrs: FxHashSet<VertexId> = g.neighbors(&VertexId::lattice(x)).unwrap().into_iter().collect();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if (dx, dy, dz) == (0, 0, 0) {
                            continue;
                        }
                        let y = [x[0] + dx, x[1] + dy, x[2] + dz];
                        let (ix, nx) = nearest_region(&shells, x);
                        let (iy, ny) = nearest_region(&shells, &y);
                        let nearest = if ix <= iy { nx } else { ny };
                        let step = dx.abs() + dy.abs() + dz.abs();
                        let expected = !nearest || step == 1;
                        assert_eq!(
                            nbrs.contains(&VertexId::lattice(&y)),
                            expected,
                            "shells {shells:?}: {x:?} ~ {y:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn balls_and_distances_agree() {
    let g = GraphFamily::nearest(2).unwrap();
    let o = g.origin();
    for (v, d) in g.ball_with_distances(&o, 6).unwrap() {
        assert_eq!(g.graph_distance(&o, &v, 10).unwrap(), Distance::Exact(d));
    }
    assert_eq!(g.ball(&o, 6).unwrap().len(), 2 * 36 + 2 * 6 + 1);
}

#[test]
fn open_fraction_matches_p() {
    let cfg = PercolationConfig::new(0.3, 11).unwrap();
    let n = 200_000;
    let open = (0..n)
        .filter(|&i| {
            let u = VertexId::lattice(&[i, 0]);
            cfg.edge_open(&Edge::new(u, VertexId::lattice(&[i + 1, 0])).unwrap())
        })
        .count();
    let frac = open as f64 / n as f64;
    assert!((frac - 0.3).abs() < 4.0 * (0.21f64 / n as f64).sqrt(), "{frac}");
}
