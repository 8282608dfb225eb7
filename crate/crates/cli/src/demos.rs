//! The alternating-shell fluctuation demo and the hairy half-line demo.

use percwalk::estimators::estimate_cp_lln;
use percwalk::graph::{hairy_schedule, ScheduleMode, ShellRule};
use percwalk::parallel::map_replicas;
use percwalk::percolation::PercolationConfig;
use percwalk::stats::{combined_se, z_quantile, DEFAULT_CI_LEVEL};
use percwalk::union::{walk_rng, UnionState, UnionWalk};
use percwalk::{BatchStats, GraphFamily, Result, VertexId};

/// One window `(start, end]` of the fluctuation demo.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    /// Mean of `(U_end - U_start) / (end - start)`.
    pub rate: f64,
    pub se: f64,
    /// Mean fraction of the window's steps taken from ℓ∞ shells.
    pub linf_occupancy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationReport {
    pub windows: Vec<Window>,
    /// Rate of the most ℓ∞-occupied window minus that of the least.
    pub gap: f64,
    pub gap_se: f64,
    pub separation: f64,
    pub c_nearest: f64,
    pub c_nearest_se: f64,
    pub c_linf: f64,
    pub c_linf_se: f64,
    pub reference_gap: f64,
    pub sign_matches: bool,
    /// The two compared window CIs overlap.
    pub inconclusive: bool,
    pub truncation_rate: f64,
    pub reference_truncation: (f64, f64),
}

/// Window rates of `U_n` on the alternating graph, compared with `c_p` of the two pure
/// lattices at the last window end.
pub fn fluctuation_demo(
    shells: &[i32],
    cfg: &PercolationConfig,
    windows: &[usize],
    replicas: u64,
    reference_replicas: u64,
) -> Result<FluctuationReport> {
    let g = GraphFamily::alternating(shells.to_vec())?;
    if windows.is_empty() || windows.windows(2).any(|w| w[0] >= w[1]) || windows[0] == 0 {
        return Err(percwalk::Error::InvalidArgument("windows must be positive and strictly increasing".into()));
    }
    cfg.validate()?;
    let o = g.origin();
    let runs = map_replicas(replicas, |r| -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let c = cfg.with_replica(cfg.replica_index + r);
        let mut w = UnionWalk::new(&g, &c, &o, walk_rng(&c), false)?;
        let mut rates = Vec::with_capacity(windows.len());
        let mut occupancy = Vec::with_capacity(windows.len());
        let mut start = 0;
        let mut u0 = w.state().volume();
        for &end in windows {
            let mut linf = 0usize;
            while w.time() < end {
                if let Some(p) = w.position().point() {
                    linf += (GraphFamily::shell_rule(shells, p) == ShellRule::Linf) as usize;
                }
                w.step();
            }
            let u = w.state().volume();
            rates.push((u - u0) as f64 / (end - start) as f64);
            occupancy.push(linf as f64 / (end - start) as f64);
            start = end;
            u0 = u;
        }
        Ok((rates, occupancy, w.state().any_truncated()))
    });
    let runs: Vec<_> = runs.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &end) in windows.iter().enumerate() {
        let st = BatchStats::<f64>::from_slice(&runs.iter().map(|r| r.0[i]).collect::<Vec<_>>());
        let occ = runs.iter().map(|r| r.1[i]).sum::<f64>() / runs.len() as f64;
        let (m, se) = st.mean_se_f64();
        out.push(Window { start, end, rate: m, se, linf_occupancy: occ });
        start = end;
    }
    let hi = (0..out.len()).max_by(|&a, &b| out[a].linf_occupancy.total_cmp(&out[b].linf_occupancy)).unwrap_or(0);
    let lo = (0..out.len()).min_by(|&a, &b| out[a].linf_occupancy.total_cmp(&out[b].linf_occupancy)).unwrap_or(0);
    // Paired differences: both windows come from the same replica.
    let diff = BatchStats::<f64>::from_slice(&runs.iter().map(|r| r.0[hi] - r.0[lo]).collect::<Vec<_>>());
    let (gap, gap_se) = diff.mean_se_f64();
    let n_ref = *windows.last().unwrap_or(&1000);
    let ref_cfg = cfg.with_replica(cfg.replica_index + replicas);
    let nearest = estimate_cp_lln(&GraphFamily::nearest(3)?, &ref_cfg, n_ref.max(1000), reference_replicas)?;
    let linf = estimate_cp_lln(&GraphFamily::linf(3)?, &ref_cfg, n_ref.max(1000), reference_replicas)?;
    let reference_gap = linf.value - nearest.value;
    let z = z_quantile(DEFAULT_CI_LEVEL);
    let (a, b) = (&out[hi], &out[lo]);
    let inconclusive = hi == lo || (a.rate - b.rate).abs() <= z * (a.se + b.se);
    Ok(FluctuationReport {
        gap,
        gap_se,
        separation: if gap_se > 0.0 { gap.abs() / gap_se } else { 0.0 },
        c_nearest: nearest.value,
        c_nearest_se: nearest.se,
        c_linf: linf.value,
        c_linf_se: linf.se,
        reference_gap,
        sign_matches: gap.signum() == reference_gap.signum() && gap != 0.0,
        inconclusive,
        truncation_rate: runs.iter().filter(|r| r.2).count() as f64 / replicas as f64,
        reference_truncation: (nearest.truncation_rate, linf.truncation_rate),
        windows: out,
    })
}

/// Statistics at the `k`-th anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorStats {
    pub k: usize,
    pub anchor: u64,
    pub hairs: u64,
    pub mean_t: f64,
    pub se_t: f64,
    pub median_t: f64,
    pub mean_u: f64,
    pub se_u: f64,
    /// `p b_k / 2`.
    pub threshold: f64,
    /// Fraction of replicas with `U > threshold` at the hitting time.
    pub exceed_freq: f64,
    /// Open hair edges at the anchor.
    pub mean_v: f64,
    pub se_v: f64,
    pub expected_v: f64,
    /// Mean over walks of the variance of `U` across percolation repeats; `None` without repeats.
    pub percolation_variance: Option<f64>,
    /// Replicas whose walk hit the step budget first.
    pub missed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HairyReport {
    pub anchors: Vec<u64>,
    pub hairs: Vec<u64>,
    pub per_anchor: Vec<AnchorStats>,
    pub truncation_rate: f64,
}

/// Largest number of walk steps per replica.
pub const HAIRY_STEP_BUDGET: usize = 100_000_000;
/// Walks used for the percolation-only variance.
pub const HAIRY_VARIANCE_WALKS: u64 = 50;

fn open_hairs(cfg: &PercolationConfig, k: usize, anchor: u64, hairs: u64) -> u64 {
    let field = cfg.field();
    let a = VertexId::Spine(anchor);
    (1..=hairs).filter(|&i| field.open(&a, &VertexId::Hair { anchor: k as u32, index: i as u32 })).count() as u64
}

/// Per replica: `(time, U)` at each anchor hit, open hairs per anchor, truncation, and the
/// percolation-only variance at each anchor.
type HairyRun = (Vec<Option<(usize, usize)>>, Vec<u64>, bool, Option<Vec<f64>>);

/// Hitting times of the anchors, with the union volume at each of them.
pub fn hairy_demo(mode: ScheduleMode, cfg: &PercolationConfig, k: usize, replicas: u64, repeats: u64) -> Result<HairyReport> {
    cfg.validate()?;
    let schedule = hairy_schedule(mode, cfg.p, k)?;
    let (anchors, hairs) = (schedule.anchors.clone(), schedule.hairs.clone());
    let g = schedule.into_family()?;
    let o = g.origin();
    let targets: Vec<VertexId> = anchors.iter().map(|&a| VertexId::Spine(a)).collect();
    let runs = map_replicas(replicas, |r| -> Result<HairyRun> {
        let c = cfg.with_replica(cfg.replica_index + r);
        let mut w = UnionWalk::new(&g, &c, &o, walk_rng(&c), false)?;
        let mut hits = Vec::with_capacity(k);
        let mut path = vec![o];
        let keep_path = repeats >= 2 && r < HAIRY_VARIANCE_WALKS;
        for t in &targets {
            while w.position() != *t && w.time() < HAIRY_STEP_BUDGET {
                w.step();
                if keep_path {
                    path.push(w.position());
                }
            }
            if w.position() == *t {
                hits.push(Some((w.time(), w.state().volume())));
            } else {
                hits.push(None);
            }
        }
        let v = (0..k).map(|i| open_hairs(&c, i + 1, anchors[i], hairs[i])).collect();
        // Same walk, fresh configurations: the spread of U at each hitting time.
        let variance = keep_path.then(|| {
            let mut per_k = vec![BatchStats::<f64>::new(); k];
            for j in 0..repeats {
                let inner = cfg.with_replica(cfg.replica_index + replicas + r * repeats + j);
                let mut st = UnionState::new(&inner);
                let mut done = 0;
                for (i, hit) in hits.iter().enumerate() {
                    if let Some((time, _)) = hit {
                        while done <= *time {
                            st.absorb(&g, &path[done]);
                            done += 1;
                        }
                        per_k[i].push(st.volume() as f64);
                    }
                }
            }
            per_k.iter().map(|s| s.variance().unwrap_or(f64::NAN)).collect()
        });
        Ok((hits, v, w.state().any_truncated(), variance))
    });
    let runs: Vec<_> = runs.into_iter().collect::<Result<_>>()?;
    let per_anchor = (0..k)
        .map(|i| {
            let threshold = cfg.p * hairs[i] as f64 / 2.0;
            let mut t = BatchStats::<f64>::new();
            let mut u = BatchStats::<f64>::new();
            let mut v = BatchStats::<f64>::new();
            let mut times = Vec::new();
            let mut exceed = 0u64;
            let mut missed = 0u64;
            let mut var = BatchStats::<f64>::new();
            for r in &runs {
                match r.0[i] {
                    Some((time, vol)) => {
                        t.push(time as f64);
                        times.push(time as f64);
                        u.push(vol as f64);
                        exceed += (vol as f64 > threshold) as u64;
                    }
                    None => missed += 1,
                }
                v.push(r.1[i] as f64);
                if let Some(vs) = &r.3 {
                    if vs[i].is_finite() {
                        var.push(vs[i]);
                    }
                }
            }
            times.sort_by(f64::total_cmp);
            AnchorStats {
                k: i + 1,
                anchor: anchors[i],
                hairs: hairs[i],
                mean_t: t.mean(),
                se_t: t.se().unwrap_or(f64::NAN),
                median_t: times.get(times.len() / 2).copied().unwrap_or(f64::NAN),
                mean_u: u.mean(),
                se_u: u.se().unwrap_or(f64::NAN),
                threshold,
                exceed_freq: exceed as f64 / replicas as f64,
                mean_v: v.mean(),
                se_v: v.se().unwrap_or(f64::NAN),
                expected_v: cfg.p * hairs[i] as f64,
                percolation_variance: (var.count() > 0).then(|| var.mean()),
                missed,
            }
        })
        .collect();
    Ok(HairyReport {
        anchors,
        hairs,
        per_anchor,
        truncation_rate: runs.iter().filter(|r| r.2).count() as f64 / replicas as f64,
    })
}

/// Whether the gap is at least `sigmas` combined errors from zero.
pub fn separated(a: f64, a_se: f64, b: f64, b_se: f64, sigmas: f64) -> bool {
    (a - b).abs() > sigmas * combined_se(a_se, b_se)
}
