//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meshfwd::experiment::{compare_choices, prepare_trial, run_sweep, ExperimentConfig};
use meshfwd::forwarding::{route, RouteOptions, RouterKind};
use meshfwd::geometry::forwarding_region;
use meshfwd::network::{DriftMode, History3, LinkProcessConfig, NetworkState};
use meshfwd::predictor::{extrapolate, predict_bandwidth};
use meshfwd::report::{emit_table, Format};
use meshfwd::topology::{generate_topology, Area, NodeId, Point, Topology};
use meshfwd::Outcome;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Degree-<=2 Lagrange interpolant through `pts`, evaluated at `t`.
fn lagrange(pts: &[(f64, f64)], t: f64) -> f64 {
    pts.iter()
        .enumerate()
        .map(|(m, &(tm, bm))| {
            let basis: f64 = pts
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .map(|(_, &(tn, _))| (t - tn) / (tm - tn))
                .product();
            bm * basis
        })
        .sum()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut times: Vec<f64> = Vec::new();
        while times.len() < 3 {
            let t = rng.random_range(0.0..=100.0);
            if !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_by(f64::total_cmp);
        let pts: Vec<(f64, f64)> = times.iter().map(|&t| (t, rng.random_range(0.0..=100.0))).collect();
        let t_p = rng.random_range(times[2]..=times[2] + 100.0);
        let got = extrapolate(&History3::from_samples(&pts).unwrap(), t_p).unwrap();
        let want = lagrange(&pts, t_p);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max relative error {worst:e} > 1e-9"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("max relative error {worst:.3e}, {elapsed:?}"))
}

fn criterion_2() -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    let cases = [
        (vec![(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)], 7.0, 5.0),
        (vec![(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)], 3.0, 6.0),
    ];
    for (pts, t_p, want) in &cases {
        let got = predict_bandwidth(&History3::from_samples(pts).unwrap(), *t_p).unwrap();
        ensure(close(got, *want), || format!("{pts:?} at {t_p}: {got} != {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let c = rng.random_range(0.0..100.0);
        let slope = rng.random_range(0.0..5.0);
        let mut times = [rng.random_range(0.0..30.0), rng.random_range(30.0..60.0), rng.random_range(60.0..90.0)];
        times.sort_by(f64::total_cmp);
        let t_p = rng.random_range(90.0..150.0);
        let flat: Vec<_> = times.iter().map(|&t| (t, c)).collect();
        let line: Vec<_> = times.iter().map(|&t| (t, c + slope * t)).collect();
        let got = predict_bandwidth(&History3::from_samples(&flat).unwrap(), t_p).unwrap();
        ensure(close(got, c), || format!("constant {c}: predicted {got}"))?;
        let got = predict_bandwidth(&History3::from_samples(&line).unwrap(), t_p).unwrap();
        let want = c + slope * t_p;
        ensure(close(got, want), || format!("line: predicted {got}, want {want}"))?;
    }
    Ok("worked examples plus 1000 random constant and collinear histories".into())
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let apex = Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
    let heading = rng.random_range(0.0..TAU);
    let region = forwarding_region(apex, Point::new(apex.x + 30.0 * heading.cos(), apex.y + 30.0 * heading.sin()))
        .map_err(|e| e.to_string())?;
    let samples = 1_000_000;
    let inside = (0..samples)
        .filter(|_| {
            let a = rng.random_range(0.0..TAU);
            region.contains(Point::new(apex.x + a.cos(), apex.y + a.sin()))
        })
        .count();
    let fraction = inside as f64 / samples as f64;
    ensure((fraction - 0.25).abs() <= 0.01, || format!("in-region fraction {fraction}"))?;

    for _ in 0..10_000 {
        let s = Point::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let d = Point::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let r = forwarding_region(s, d).map_err(|e| e.to_string())?;
        ensure(r.contains(d), || format!("destination {d:?} outside region from {s:?}"))?;
    }
    Ok(format!("in-region fraction {fraction:.4}; 10^4 destinations inside their regions"))
}

/// All-pairs hop distances by Floyd-Warshall over brute-force adjacency.
fn hop_distances(t: &Topology) -> Vec<Vec<usize>> {
    let n = t.len();
    let inf = usize::MAX / 4;
    let pos = t.positions();
    let mut dist = vec![vec![inf; n]; n];
    for i in 0..n {
        dist[i][i] = 0;
        for j in 0..n {
            if i != j && pos[i].distance(pos[j]) <= t.radio_radius() {
                dist[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    dist
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut delivered = 0;
    for trial in 0..1000 {
        let n = rng.random_range(10..=120);
        let radius = rng.random_range(12.0..=25.0);
        let topo = generate_topology(n, Area::new(100.0, 100.0), radius, rng.random())
            .map_err(|e| e.to_string())?;
        let cfg = LinkProcessConfig {
            drift_mode: if trial % 2 == 0 { DriftMode::LinearDrift } else { DriftMode::ResampleUniform },
            ..Default::default()
        };
        let mut base = NetworkState::init_links(topo, cfg, rng.random()).map_err(|e| e.to_string())?;
        base.advance_to(50.0).map_err(|e| e.to_string())?;
        let s = NodeId(rng.random_range(0..n));
        let d = NodeId((s.0 + rng.random_range(1..n)) % n);
        let region = forwarding_region(base.topology().position(s).unwrap(), base.topology().position(d).unwrap())
            .map_err(|e| e.to_string())?;
        for kind in [RouterKind::MlForwarding, RouterKind::LastObservedGreedy] {
            let mut state = base.clone();
            let r = route(&mut state, s, d, kind, &RouteOptions::new(8.0)).map_err(|e| e.to_string())?;
            ensure(r.hops.len() <= n, || format!("trial {trial}: {} hops > n={n}", r.hops.len()))?;
            let mut senders = HashSet::new();
            for (i, h) in r.hops.iter().enumerate() {
                ensure(senders.insert(h.from), || format!("trial {trial}: {} forwards twice", h.from))?;
                let direct = h.to == d && i + 1 == r.hops.len();
                let p = state.topology().position(h.to).unwrap();
                ensure(direct || region.contains(p), || format!("trial {trial}: hop to {} leaves the cone", h.to))?;
            }
            if r.outcome == Outcome::Delivered {
                delivered += 1;
                ensure(r.hops.last().map(|h| h.to) == Some(d), || format!("trial {trial}: bad final hop"))?;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for g in 0..100 {
        let n = rng.random_range(10..=80);
        let topo = generate_topology(n, Area::new(100.0, 100.0), rng.random_range(15.0..=30.0), rng.random())
            .map_err(|e| e.to_string())?;
        let dist = hop_distances(&topo);
        let s = rng.random_range(0..n);
        let d = (s + rng.random_range(1..n)) % n;
        let mut state = NetworkState::with_constant_links(topo, 4.0).map_err(|e| e.to_string())?;
        let r = route(&mut state, NodeId(s), NodeId(d), RouterKind::MinHop, &RouteOptions::new(8.0))
            .map_err(|e| e.to_string())?;
        match r.outcome {
            Outcome::Delivered => ensure(r.hops.len() == dist[s][d], || {
                format!("graph {g}: min-hop {} hops, oracle {}", r.hops.len(), dist[s][d])
            })?,
            _ => ensure(dist[s][d] > n, || format!("graph {g}: min-hop failed on a reachable pair"))?,
        }
    }
    Ok(format!("2000 greedy routes sound ({delivered} delivered); 100 min-hop paths match oracle"))
}

fn criterion_5() -> Check {
    let configs = [
        ("uniform 4 MB/ms", LinkProcessConfig::constant(4.0)),
        ("per-link static", LinkProcessConfig { drift_mode: DriftMode::Static, ..Default::default() }),
    ];
    let mut hops = 0;
    for (label, link) in configs {
        let config = ExperimentConfig { link, ..Default::default() };
        for seed in 0..50 {
            let cfg = ExperimentConfig { base_seed: seed, ..config.clone() };
            let trial = prepare_trial(&cfg, 100, 0).map_err(|e| e.to_string())?;
            let opts = cfg.route_options();
            let mut a = trial.state.clone();
            let mut b = trial.state.clone();
            let ml = route(&mut a, trial.source, trial.destination, RouterKind::MlForwarding, &opts)
                .map_err(|e| e.to_string())?;
            let lo = route(&mut b, trial.source, trial.destination, RouterKind::LastObservedGreedy, &opts)
                .map_err(|e| e.to_string())?;
            ensure(ml.path() == lo.path() && ml.outcome == lo.outcome, || {
                format!("{label}, seed {seed}: {:?} vs {:?}", ml.path(), lo.path())
            })?;
            hops += ml.hops.len();
        }
    }
    Ok(format!("identical routes over 2 x 50 seeds ({hops} ml hops)"))
}

fn criterion_6() -> Check {
    let topo = Topology::new(
        vec![Point::new(0.0, 10.0), Point::new(10.0, 13.0), Point::new(10.0, 7.0), Point::new(20.0, 10.0)],
        12.0,
        Area::new(30.0, 30.0),
    )
    .map_err(|e| e.to_string())?;
    let (s, a, b, d) = (NodeId(0), NodeId(1), NodeId(2), NodeId(3));
    let mut base = NetworkState::with_constant_links(topo, 5.0).map_err(|e| e.to_string())?;
    base.advance_to(2.0).unwrap();
    let rising = History3::from_samples(&[(0.0, 2.0), (1.0, 4.0), (2.0, 6.0)]).unwrap();
    let falling = History3::from_samples(&[(0.0, 9.0), (1.0, 8.0), (2.0, 7.0)]).unwrap();
    base.set_history(s, a, rising).unwrap();
    base.set_history(s, b, falling).unwrap();
    base.advance_to(3.0).unwrap();

    let pa = predict_bandwidth(&rising, 3.0).unwrap();
    let pb = predict_bandwidth(&falling, 3.0).unwrap();
    ensure(pa == 8.0 && pb == 6.0, || format!("predictions {pa}, {pb}"))?;

    let opts = RouteOptions::new(1.0);
    let ml = route(&mut base.clone(), s, d, RouterKind::MlForwarding, &opts).map_err(|e| e.to_string())?;
    let lo = route(&mut base.clone(), s, d, RouterKind::LastObservedGreedy, &opts).map_err(|e| e.to_string())?;
    let (ml_first, lo_first) = (ml.hops[0].to, lo.hops[0].to);
    ensure(ml_first == a, || format!("ml picked {ml_first}"))?;
    ensure(lo_first == b, || format!("last-observed picked {lo_first}"))?;
    Ok(format!("ml -> {ml_first} (predicted {pa} vs {pb}); last-observed -> {lo_first} (7 vs 6)"))
}

fn criterion_7() -> Check {
    let config = ExperimentConfig::default();
    ensure(config.link.drift_mode == DriftMode::LinearDrift, || "default link mode is not linear drift".into())?;
    let q = compare_choices(&config, 100).map_err(|e| e.to_string())?;
    let ml = q[&RouterKind::MlForwarding];
    let lo = q[&RouterKind::LastObservedGreedy];
    let (ml_delay, lo_delay) = (
        ml.mean_delivered_delay().ok_or("ml delivered nothing")?,
        lo.mean_delivered_delay().ok_or("last-observed delivered nothing")?,
    );
    let detail = format!(
        "hit rate ml {:.4} ({}/{}) vs last-observed {:.4} ({}/{}); mean delivered delay ml {:.4} ms ({} delivered) vs last-observed {:.4} ms ({} delivered)",
        ml.hit_rate(),
        ml.hits,
        ml.decisions,
        lo.hit_rate(),
        lo.hits,
        lo.decisions,
        ml_delay,
        ml.delivered,
        lo_delay,
        lo.delivered
    );
    ensure(ml.hit_rate() >= lo.hit_rate() && ml_delay <= lo_delay, || detail.clone())?;
    Ok(detail)
}

fn criterion_8() -> Check {
    let config = ExperimentConfig::default();
    let expected_counts: Vec<usize> = (100..=300).step_by(25).collect();
    ensure(config.node_counts == expected_counts, || format!("grid {:?}", config.node_counts))?;
    ensure(config.repetitions == 10 && config.area == [100.0, 100.0], || "grid shape".into())?;

    let start = Instant::now();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let table = run_sweep(&config).map_err(|e| e.to_string())?;
        ensure(table.rows.len() == 270, || format!("{} rows", table.rows.len()))?;
        let (mut rows, mut summary) = (Vec::new(), Vec::new());
        emit_table(&table, Format::Csv, &mut rows, &mut summary).map_err(|e| e.to_string())?;
        outputs.push((rows, summary));
    }
    let elapsed = start.elapsed() / 2;
    ensure(elapsed < Duration::from_secs(300), || format!("sweep took {elapsed:?}"))?;
    ensure(outputs[0] == outputs[1], || "re-run produced different bytes".into())?;
    let lines = outputs[0].0.iter().filter(|&&c| c == b'\n').count();
    ensure(lines == 271, || format!("{lines} csv lines"))?;
    Ok(format!("270 rows, 271 csv lines, byte-identical re-run, {elapsed:?} per sweep"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("predictor oracle equivalence", criterion_1),
        ("predictor exactness", criterion_2),
        ("region measure", criterion_3),
        ("routing termination and soundness", criterion_4),
        ("ablation equivalence", criterion_5),
        ("divergence witness", criterion_6),
        ("directional claim", criterion_7),
        ("experiment grid reproduction", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
