//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use percwalk::capacity::{capacity_compare_z3, capacity_exact, dirichlet_solve};
use percwalk::estimators::{
    boundary_scaling, estimate_cp_cluster, estimate_cp_lln, laplace_negative, replica_snapshots, ClusterMethod,
    CpEstimate,
};
use percwalk::graph::ScheduleMode;
use percwalk::oracle::{exact_line_cluster_law, exact_mean_union, ExactField};
use percwalk::parallel::map_replicas;
use percwalk::percolation::cluster_size_tail;
use percwalk::rng::{WalkRng, TAG_AUX, TAG_WALK};
use percwalk::stats::combined_se;
use percwalk::union::{
    last_exit_union, sausage_volume, union_of_path, union_snapshots, union_volume, walk_path, walk_rng, SausageShape,
    UnionState, UnionWalk,
};
use percwalk::{explore_cluster, BatchStats, ExactRational, GraphFamily, PercolationConfig, VertexId};
use percwalk_cli::demos::{fluctuation_demo, hairy_demo};

type Outcome = Result<(bool, String), percwalk::Error>;

fn z(d: usize) -> GraphFamily {
    GraphFamily::nearest(d).unwrap()
}

fn cfg(p: f64, seed: u64) -> PercolationConfig {
    PercolationConfig::new(p, seed).unwrap()
}

fn cp_grid() -> Result<Vec<(CpEstimate, CpEstimate)>, percwalk::Error> {
    [0.05, 0.10, 0.15]
        .iter()
        .map(|&p| {
            let lln = estimate_cp_lln(&z(3), &cfg(p, 3), 100_000, 200)?;
            let cl = estimate_cp_cluster(&z(3), &cfg(p, 3), 200, ClusterMethod::Capacity, 50, 50)?;
            Ok((lln, cl))
        })
        .collect()
}

fn zero_p_identity() -> Outcome {
    let g = z(2);
    let bad = map_replicas(100, |r| {
        let run = union_volume(&g, &cfg(0.0, 1).with_replica(r), &g.origin(), 10_000).unwrap();
        run.u_sequence != run.r_sequence
    });
    let failures = bad.iter().filter(|&&b| b).count();
    Ok((failures == 0, format!("{failures} of 100 replicas differ")))
}

fn z3_escape_constant() -> Outcome {
    let g = z(3);
    let exact = capacity_exact::<f64>(&g, &[g.origin()], &[25, 50, 100])?.value;
    let lln = estimate_cp_lln(&g, &cfg(0.0, 2), 100_000, 200)?;
    let rel = (exact - lln.value).abs() / exact.min(lln.value);
    Ok((rel < 0.01, format!("capacity {exact:.5}, lln {:.5} ± {:.5}, relative gap {rel:.4}", lln.value, lln.se)))
}

fn cross_estimators(grid: &[(CpEstimate, CpEstimate)]) -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for (a, b) in grid {
        let zs = (a.value - b.value).abs() / combined_se(a.se, b.se);
        ok &= zs <= 3.0;
        msg.push(format!("p={}: {:.4} vs {:.4} ({zs:.2} SE)", a.p, a.value, b.value));
    }
    Ok((ok, msg.join("; ")))
}

fn monotone_in_p(grid: &[(CpEstimate, CpEstimate)]) -> Outcome {
    let mut series = vec![estimate_cp_lln(&z(3), &cfg(0.0, 3), 100_000, 200)?];
    series.extend(grid.iter().map(|(a, _)| a.clone()));
    let mut ok = true;
    let mut msg = Vec::new();
    for w in series.windows(2) {
        let gap = w[1].value - w[0].value;
        let sig = gap / combined_se(w[0].se, w[1].se);
        ok &= sig > 2.0;
        msg.push(format!("{:.4}→{:.4} ({sig:.0} SE)", w[0].value, w[1].value));
    }
    Ok((ok, msg.join(", ")))
}

fn planar_asymptotics() -> Outcome {
    let g = z(2);
    let ns = [10_000usize, 1_000_000];
    let runs: Vec<_> = map_replicas(100, |r| union_snapshots(&g, &cfg(0.1, 5).with_replica(r), &g.origin(), &ns, false))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let norm: Vec<f64> = (0..2)
        .map(|i| {
            let n = ns[i] as f64;
            runs.iter().map(|s| s[i].union as f64).sum::<f64>() / runs.len() as f64 * n.ln() / n
        })
        .collect();
    let ok = (norm[1] - PI).abs() <= 0.25 * PI && (norm[1] - PI).abs() < (norm[0] - PI).abs();
    Ok((ok, format!("(log n/n)·U_n = {:.4} at 1e4, {:.4} at 1e6", norm[0], norm[1])))
}

fn planar_boundary() -> Outcome {
    let rows = boundary_scaling(&z(2), &[1_000, 100_000], 500, 6)?;
    let (a, b) = (&rows[0], &rows[1]);
    let pi2 = PI * PI;
    let ok = (pi2 / 3.0..=3.0 * pi2).contains(&b.normalized) && b.mean_ratio < a.mean_ratio;
    Ok((
        ok,
        format!("normalized {:.3} in [{:.2}, {:.2}]; L/R {:.4} → {:.4}", b.normalized, pi2 / 3.0, 3.0 * pi2, a.mean_ratio, b.mean_ratio),
    ))
}

fn oracle_equivalence() -> Outcome {
    let g = z(2);
    let mut ok = true;
    let mut msg = Vec::new();
    for (num, den) in [(0, 1), (1, 10)] {
        let p = ExactRational::new(BigInt::from(num), BigInt::from(den));
        let exact = exact_mean_union::<ExactRational>(&g, &p, &g.origin(), 2, 2)?;
        let (lo, hi) = exact.interval_f64();
        let pc = cfg(num as f64 / den as f64, 7);
        let mut st = BatchStats::<f64>::new();
        for s in map_replicas(1_000_000, |r| replica_snapshots(&g, &pc.with_replica(r), &[2], false)) {
            st.push(s?[0].union as f64);
        }
        let (m, se) = st.mean_se_f64();
        let inside = m >= lo - 4.0 * se && m <= hi + 4.0 * se;
        ok &= inside;
        msg.push(format!("p={num}/{den}: MC {m:.5} ± {se:.5} in [{lo:.5}, {hi:.5}]"));
    }
    let p = ExactRational::new(BigInt::from(2), BigInt::from(5));
    let ks: Vec<u64> = (0..=5).collect();
    let tail = cluster_size_tail(&cfg(0.4, 7), &z(1), &ks, 1_000_000)?;
    let mut worst = 0.0f64;
    for (i, &k) in ks.iter().enumerate() {
        let ex = exact_line_cluster_law::<ExactRational>(&p, k)?.as_f64();
        worst = worst.max((tail.tail[i] - ex).abs() / tail.se[i].max(1e-12));
    }
    ok &= worst <= 3.0;
    msg.push(format!("line cluster law worst {worst:.2} SE"));
    Ok((ok, msg.join("; ")))
}

fn capacity_strict() -> Outcome {
    let o = VertexId::lattice(&[0, 0, 0]);
    let e1 = VertexId::lattice(&[1, 0, 0]);
    let mut ok = true;
    let mut msg = Vec::new();
    for set in [vec![o], vec![o, e1]] {
        let c = capacity_compare_z3(&set, &[10, 20, 40])?;
        ok &= c.strict_less();
        let (a, b) = (c.nearest.bracket().unwrap_or_default(), c.linf.bracket().unwrap_or_default());
        msg.push(format!("|A|={}: [{:.4}, {:.4}] < [{:.4}, {:.4}]", set.len(), a.0, a.1, b.0, b.1));
    }
    Ok((ok, msg.join("; ")))
}

fn fluctuation() -> Outcome {
    let c = cfg(0.05, 9).with_cap(10_000)?;
    let r = fluctuation_demo(&[6, 20], &c, &[1_000, 8_000], 500, 20)?;
    let ok = r.sign_matches && r.separation > 3.0;
    let rates: Vec<String> = r.windows.iter().map(|w| format!("{:.3}±{:.3} (ℓ∞ {:.2})", w.rate, w.se, w.linf_occupancy)).collect();
    Ok((
        ok,
        format!(
            "windows {}; gap {:.3} ({:.1} SE); reference {:.3} (truncation {:.2}/{:.2})",
            rates.join(", "),
            r.gap,
            r.separation,
            r.reference_gap,
            r.reference_truncation.0,
            r.reference_truncation.1
        ),
    ))
}

fn hairy_singularity() -> Outcome {
    let r = hairy_demo(ScheduleMode::Desk, &cfg(0.3, 10), 4, 10_000, 0)?;
    let last = r.per_anchor.last().expect("k >= 1");
    let v_ok = (last.mean_v - last.expected_v).abs() <= 3.0 * last.se_v;
    let ok = last.exceed_freq >= 0.9 && v_ok && last.missed == 0;
    Ok((
        ok,
        format!(
            "anchor {} with {} hairs: P(U > pb/2) = {:.4}, V = {:.2} ± {:.2} vs {:.2}",
            last.anchor, last.hairs, last.exceed_freq, last.mean_v, last.se_v, last.expected_v
        ),
    ))
}

fn sausage_lln() -> Outcome {
    let g = z(3);
    let shape = SausageShape::linf_ball(3, 1)?;
    let cap = capacity_exact::<f64>(&g, &shape.vertices(), &[25, 50, 100])?.value;
    let n = 100_000;
    let runs: Vec<(f64, f64)> = map_replicas(100, |r| {
        let mut rng = WalkRng::new(11, r, TAG_WALK);
        let full = sausage_volume(&g, &shape, &g.origin(), n, &mut rng).unwrap() as f64 / n as f64;
        let mut rng = WalkRng::new(11, r, TAG_WALK);
        let quarter = sausage_volume(&g, &shape, &g.origin(), n / 4, &mut rng).unwrap() as f64 / (n / 4) as f64;
        (full, quarter)
    });
    let full = BatchStats::<f64>::from_slice(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let (m, se) = full.mean_se_f64();
    // Two-scale extrapolation assuming a c/√n correction; reported only.
    let q = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let extrapolated = 2.0 * m - q;
    let ok = (m - cap).abs() <= 3.0 * se;
    Ok((
        ok,
        format!(
            "U_n(A)/n = {m:.4} ± {se:.4} vs capacity {cap:.4} ({:.1} SE); √n-corrected {extrapolated:.4}",
            (m - cap) / se
        ),
    ))
}

fn line_scaling() -> Outcome {
    let g = z(1);
    let n = 1_000_000usize;
    let mut st = BatchStats::<f64>::new();
    for s in map_replicas(10_000, |r| replica_snapshots(&g, &cfg(0.2, 12).with_replica(r), &[n], false)) {
        st.push(s?[0].union as f64 / (n as f64).sqrt());
    }
    let target = 2.0 * (2.0 / PI).sqrt();
    let (m, se) = st.mean_se_f64();
    let rel = (m - target).abs() / target;
    Ok((rel < 0.03, format!("U_n/√n = {m:.4} ± {se:.4} vs {target:.4} ({:.2}%)", 100.0 * rel)))
}

/// Randomized cases for the invariant suite.
struct Case {
    g: GraphFamily,
    c: PercolationConfig,
    seed: u64,
    n: usize,
    rng: WalkRng,
}

fn case(i: u64, max_n: usize) -> Case {
    let mut rng = WalkRng::new(13, i, TAG_AUX);
    let (g, p_max) = match rng.below(5) {
        0 => (z(1), 0.6),
        1 => (z(2), 0.35),
        2 => (z(3), 0.18),
        3 => (GraphFamily::linf(2).unwrap(), 0.18),
        _ => (GraphFamily::alternating(vec![2, 5]).unwrap(), 0.03),
    };
    let p = rng.next_f64() * p_max;
    let seed = rng.next_u64();
    let n = rng.below_usize(max_n + 1);
    Case { g, c: cfg(p, seed).with_cap(20_000).unwrap(), seed, n, rng }
}

fn path_state(g: &GraphFamily, c: &PercolationConfig, path: &[VertexId]) -> UnionState {
    let mut st = UnionState::new(c);
    for v in path {
        st.absorb(g, v);
    }
    st
}

fn invariants() -> Outcome {
    const CASES: u64 = 1000;
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |name: &str, i: u64| failures.push(format!("{name}#{i}"));
    for i in 0..CASES {
        let Case { g, c, n, .. } = case(i, 200);
        let mut w = UnionWalk::new(&g, &c, &g.origin(), walk_rng(&c), true)?;
        w.advance_to(n);
        let s = w.snapshot();
        if !s.truncated {
            let extra: usize =
                w.boundary_vertices().iter().map(|x| explore_cluster(&c, &g, x).map(|cl| cl.len())).sum::<Result<_, _>>()?;
            if !(s.range <= s.union && s.union <= s.range + extra) {
                fail("bd-always", i);
            }
        }
    }
    for i in 0..CASES {
        let Case { g, c, seed, n, mut rng } = case(i + CASES, 200);
        let n = n.max(1);
        let m = rng.below_usize(n + 1);
        let xs = walk_path(&g, &g.origin(), n, &mut WalkRng::new(seed, 0, TAG_WALK))?;
        let (whole, _) = union_of_path(&g, &c, &xs);
        if whole > union_of_path(&g, &c, &xs[..=m]).0 + union_of_path(&g, &c, &xs[m..]).0 {
            fail("subadditivity", i);
        }
    }
    for i in 0..CASES {
        let mut rng = WalkRng::new(14, i, TAG_AUX);
        let g = z(2);
        let c = cfg(rng.next_f64() * 0.4, rng.next_u64()).with_cap(20_000)?;
        let n = rng.below_usize(51);
        let run = union_volume(&g, &c, &g.origin(), n)?;
        let xs = walk_path(&g, &g.origin(), n, &mut walk_rng(&c))?;
        let (direct, truncated) = union_of_path(&g, &c, &xs);
        if !truncated && (last_exit_union(&g, &c, &xs).0 != direct || direct as u64 != run.u_sequence[n]) {
            fail("last-exit", i);
        }
    }
    for i in 0..CASES {
        let Case { g, c, seed, n, mut rng } = case(i + 2 * CASES, 200);
        let hi_p = (c.p + rng.next_f64() * 0.05).min(1.0);
        let xs = walk_path(&g, &g.origin(), n, &mut WalkRng::new(seed, 0, TAG_WALK))?;
        let lo = path_state(&g, &c, &xs);
        let hi = path_state(&g, &c.with_p(hi_p)?, &xs);
        if !hi.any_truncated() && !(lo.volume() <= hi.volume() && lo.vertices().iter().all(|v| hi.contains(v))) {
            fail("monotone coupling", i);
        }
    }
    for i in 0..CASES {
        let Case { g, c, seed, n, .. } = case(i + 3 * CASES, 100);
        let xs = walk_path(&g, &g.origin(), n, &mut WalkRng::new(seed, 0, TAG_WALK))?;
        let st = path_state(&g, &c, &xs);
        if st.any_truncated() {
            continue;
        }
        for v in st.vertices() {
            if !explore_cluster(&c, &g, v)?.vertices.iter().all(|x| st.contains(x)) {
                fail("complete clusters", i);
                break;
            }
        }
    }
    let cube = |k: u32| VertexId::lattice(&[k as i32 % 3 - 1, (k as i32 / 3) % 3 - 1, k as i32 / 9 - 1]);
    for i in 0..CASES {
        let mut rng = WalkRng::new(15, i, TAG_AUX);
        let mask = (rng.next_u64() as u32 & ((1 << 27) - 1)).clamp(1, (1 << 27) - 2);
        let shift = rng.below(27);
        let extra = (0..27).map(|k| (k + shift) % 27).find(|k| mask & (1 << k) == 0).expect("mask is not full");
        let small: Vec<VertexId> = (0..27).filter(|k| mask & (1 << k) != 0).map(cube).collect();
        let mut large = small.clone();
        large.push(cube(extra));
        let a = dirichlet_solve::<f64>(&z(3), &small, 5)?.value;
        let b = dirichlet_solve::<f64>(&z(3), &large, 5)?.value;
        if a > b * (1.0 + 1e-9) {
            fail("capacity monotonicity", i);
        }
    }
    for i in 0..CASES {
        let Case { g, c, n, mut rng, .. } = case(i + 4 * CASES, 200);
        let theta = 2.0 * rng.next_f64();
        let run = union_volume(&g, &c, &g.origin(), n)?;
        let dominated =
            run.u_sequence.iter().zip(&run.r_sequence).all(|(u, r)| (-theta * *u as f64).exp() <= (-theta * *r as f64).exp());
        if !dominated {
            fail("negative Laplace", i);
        }
    }
    let ok = failures.is_empty();
    let msg = if ok { format!("7 × {CASES} cases, 0 failures") } else { format!("failures: {}", failures.join(", ")) };
    Ok((ok, msg))
}

fn donsker_varadhan() -> Outcome {
    let small = laplace_negative(&z(1), &cfg(0.2, 14), 0.5, 1_000, 10_000)?;
    let large = laplace_negative(&z(1), &cfg(0.2, 14), 0.5, 100_000, 10_000)?;
    let ok = large.gap_normalized < small.gap_normalized && small.dominated && large.dominated;
    Ok((ok, format!("normalized gap {:.3e} at 1e3 → {:.3e} at 1e5", small.gap_normalized, large.gap_normalized)))
}

fn main() -> ExitCode {
    percwalk::parallel::configure_threads_from_env();
    let mut grid: Option<Result<Vec<(CpEstimate, CpEstimate)>, percwalk::Error>> = None;
    let mut all = true;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let (ok, msg) = match f() {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        all &= ok;
        println!(
            "{} [{id:2}] {name}: {msg} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "p = 0 identity", &mut zero_p_identity);
    report(2, "Z^3 escape constant", &mut z3_escape_constant);
    let mut shared = || -> Result<Vec<(CpEstimate, CpEstimate)>, percwalk::Error> {
        match grid.get_or_insert_with(cp_grid) {
            Ok(g) => Ok(g.clone()),
            Err(e) => Err(percwalk::Error::InvalidArgument(e.to_string())),
        }
    };
    report(3, "cross-estimator consistency", &mut || cross_estimators(&shared()?));
    report(4, "monotone in p", &mut || monotone_in_p(&shared()?));
    report(5, "Z^2 union asymptotics", &mut planar_asymptotics);
    report(6, "Z^2 boundary bracket", &mut planar_boundary);
    report(7, "oracle equivalence", &mut oracle_equivalence);
    report(8, "capacity strict inequality", &mut capacity_strict);
    report(9, "fluctuation demo", &mut fluctuation);
    report(10, "hairy singularity", &mut hairy_singularity);
    report(11, "sausage capacity LLN", &mut sausage_lln);
    report(12, "Z scaling constant", &mut line_scaling);
    report(13, "invariant suite", &mut invariants);
    report(14, "negative Laplace regime", &mut donsker_varadhan);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
