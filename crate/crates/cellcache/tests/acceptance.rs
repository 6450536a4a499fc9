//! Acceptance criteria C1 to C10, one line each.
//!
//! Every criterion is evaluated and reported. The process fails when a
//! criterion outside `KNOWN_RED` fails.

use std::fs;
use std::time::Instant;

use cellcache::oracle::{check_areas, count_patches};
use cellcache::report::write_run;
use cellcache::sweep::{run_sweep, Axis, SweepResult, SweepSpec};
use cellcache_core::blocks::{BlockPiece, ByteRange, ContentKey};
use cellcache_core::{
    market_match, AllocationState, ContentBlock, CoverageMap, DataSize, DelayModel, DelayParams, HourDelay, LayoutSpec,
    RegionUserCounts, Scenario, ScenarioConfig, Strategy, ValuationMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail at desk scale with the model as specified.
/// The ω tradeoff keeps its trend but the replacement ratio at ω = 4
/// stays near 0.6 instead of below 0.5.
const KNOWN_RED: &[u32] = &[7];

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn desk() -> ScenarioConfig {
    ScenarioConfig { strategies: vec![Strategy::Mechanism], ..ScenarioConfig::desk() }
}

fn sweep(base: &ScenarioConfig, axis: Axis, values: &[f64], seeds: usize) -> SweepResult {
    run_sweep(base, &SweepSpec { axis, values: values.to_vec(), seeds }).expect("sweep runs")
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------- C1, C2

fn exhaustive_welfare(v: &ValuationMatrix) -> i64 {
    // every injective map of rows onto real storages or the virtual pool
    fn go(v: &ValuationMatrix, row: usize, used: &mut [bool], virtual_left: usize, acc: i64) -> i64 {
        if row == v.rows() {
            return acc;
        }
        let mut best = i64::MIN;
        if virtual_left > 0 {
            best = go(v, row + 1, used, virtual_left - 1, acc);
        }
        for s in 0..v.cols() {
            if !used[s] {
                used[s] = true;
                best = best.max(go(v, row + 1, used, virtual_left, acc + v.unit(row, s)));
                used[s] = false;
            }
        }
        best
    }
    go(v, 0, &mut vec![false; v.cols()], v.rows() - v.cols(), 0)
}

fn random_instances(count: usize, seed: u64) -> Vec<ValuationMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=n);
            let units = (0..n * m).map(|_| rng.random_range(0..=20)).collect();
            ValuationMatrix::from_units(n, m, units).expect("valid shape")
        })
        .collect()
}

fn c1_c2() -> (Verdict, Vec<(usize, usize, f64)>) {
    let instances = random_instances(500, 7);
    let start = Instant::now();
    let (mut optimal, mut envy_free, mut min_zero) = (0, 0, 0);
    let mut bounds = Vec::new();
    for v in &instances {
        let r = market_match(v).expect("auction runs");
        if r.welfare_units == exhaustive_welfare(v) {
            optimal += 1;
        }
        let padded = v.rows() > v.cols();
        let profit = |c: usize| match r.assignment[c] {
            Some(s) => v.unit(c, s) - r.price_units[s],
            None => -r.virtual_price_units,
        };
        let fair = (0..v.rows()).all(|c| {
            (0..v.cols()).all(|s| profit(c) >= v.unit(c, s) - r.price_units[s])
                && (!padded || profit(c) >= -r.virtual_price_units)
        });
        if fair {
            envy_free += 1;
        }
        let mut all_prices = r.price_units.clone();
        if padded {
            all_prices.push(r.virtual_price_units);
        }
        if all_prices.iter().min() == Some(&0) {
            min_zero += 1;
        }
        let alpha = v.max_unit().max(1) as usize;
        bounds.push((r.iterations, alpha * v.rows(), r.iterations as f64 / (alpha * v.rows()) as f64));
    }
    let secs = start.elapsed().as_secs_f64();
    let n = instances.len();
    let pass = optimal == n && envy_free == n && min_zero == n && secs < 5.0;
    (
        Verdict {
            id: 1,
            title: "market matching optimality",
            pass,
            detail: format!(
                "{n} instances, optimal {optimal}, envy-free {envy_free}, min price 0 {min_zero}, {secs:.3} s (limit 5 s)"
            ),
        },
        bounds,
    )
}

fn c2(random: &[(usize, usize, f64)]) -> Verdict {
    let random_ok = random.iter().all(|&(it, bound, _)| it <= bound);
    let random_worst = random.iter().map(|b| b.2).fold(0.0, f64::max);
    let res = sweep(&desk(), Axis::Alpha, &[1000.0], 2);
    let desk_worst =
        res.points.iter().filter_map(|p| p.summary(Strategy::Mechanism)).map(|s| s.max_bound_ratio).fold(0.0, f64::max);
    let mean_it = res.points[0].summary(Strategy::Mechanism).map(|s| s.mean_iterations()).unwrap_or(0.0);
    Verdict {
        id: 2,
        title: "iteration bound",
        pass: random_ok && desk_worst <= 1.0,
        detail: format!(
            "random instances max iterations/(αN) = {random_worst:.3}; desk auctions max iterations/(αN) = {desk_worst:.2e}, mean {mean_it:.1} iterations per auction"
        ),
    }
}

// ---------------------------------------------------------------- C3

fn c3() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for c in [0.6, 0.7, 0.8, 0.9] {
        let a = check_areas(50.0, c, 0.25, 200_000, 1).expect("areas");
        worst = worst.max(a.lens_error()).max(a.triple_error());
        parts.push(format!("c={c}: lens {:.3}% triple {:.3}%", 100.0 * a.lens_error(), 100.0 * a.triple_error()));
    }
    let mut ratios_ok = true;
    for c in [0.6, 0.7, 0.8] {
        let n = count_patches(10, 50.0, c, 1.0).expect("patches");
        let ok = (n.lens_to_triple() / 1.5 - 1.0).abs() <= 0.1
            && (n.lenses_per_station() / 3.0 - 1.0).abs() <= 0.1
            && (n.triples_per_station() / 2.0 - 1.0).abs() <= 0.1;
        ratios_ok &= ok;
        if c == 0.7 {
            parts.push(format!(
                "10 rings: {:.3} lenses and {:.3} triples per station, ratio {:.3}",
                n.lenses_per_station(),
                n.triples_per_station(),
                n.lens_to_triple()
            ));
        }
    }
    Verdict { id: 3, title: "geometry oracle", pass: worst < 0.01 && ratios_ok, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- C4

fn trend(res: &SweepResult, ok: impl Fn(f64, f64) -> bool) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in res.seeds() {
        let ds: Vec<f64> =
            res.delays_for_seed(Strategy::Mechanism, seed).into_iter().map(|d| d.unwrap_or(f64::NAN)).collect();
        pass &= ds.windows(2).all(|w| ok(w[0], w[1]));
        parts.push(format!("seed {seed} D {}", fmt_list(&ds)));
    }
    (pass, parts.join(", "))
}

fn c4() -> Verdict {
    let base = desk();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;

    let t = Instant::now();
    let k = sweep(&ScenarioConfig { capacity_gb: 100.0, ..base.clone() }, Axis::Contents, &[1000.0, 1500.0, 2000.0], 2);
    let (ok, d) = trend(&k, |a, b| b > a);
    slowest = slowest.max(t.elapsed().as_secs_f64());
    pass &= ok;
    parts.push(format!("K 1000/1500/2000 increasing {ok}: {d}"));

    let t = Instant::now();
    let h = sweep(&ScenarioConfig { contents: 2000, ..base.clone() }, Axis::Capacity, &[50.0, 100.0, 200.0], 2);
    let (ok, d) = trend(&h, |a, b| b < a);
    slowest = slowest.max(t.elapsed().as_secs_f64());
    pass &= ok;
    parts.push(format!("H 50/100/200 decreasing {ok}: {d}"));

    let t = Instant::now();
    let o = sweep(&base, Axis::Overlap, &[0.2, 0.35, 0.5, 0.65, 0.8], 2);
    let (ok, d) = trend(&o, |a, b| b <= a);
    slowest = slowest.max(t.elapsed().as_secs_f64());
    let cs: Vec<f64> = o.medians(|p| p.compress).into_iter().flatten().collect();
    pass &= ok;
    parts.push(format!("O 0.2..0.8 (c {}) non-increasing {ok}: {d}", fmt_list(&cs)));

    pass &= slowest < 600.0;
    parts.push(format!("slowest sweep {slowest:.1} s"));
    Verdict { id: 4, title: "monotone trends in K, H and O", pass, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- C5, C6

fn c5() -> Verdict {
    let base = ScenarioConfig {
        strategies: vec![Strategy::Mechanism, Strategy::HighestPopularity, Strategy::Greedy],
        ..ScenarioConfig::desk()
    };
    let res = sweep(&base, Axis::Alpha, &[1000.0], 10);
    let mut beats = 0;
    let mut worst_gap: f64 = 0.0;
    for p in &res.points {
        let m = p.delay(Strategy::Mechanism).unwrap();
        let h = p.delay(Strategy::HighestPopularity).unwrap();
        let g = p.delay(Strategy::Greedy).unwrap();
        if m <= h {
            beats += 1;
        }
        worst_gap = worst_gap.max((m - g).abs() / g);
    }
    Verdict {
        id: 5,
        title: "baseline ordering",
        pass: beats >= 9 && worst_gap <= 0.10,
        detail: format!(
            "mechanism <= highest popularity on {beats}/10 seeds (need 9); largest |mechanism - greedy| / greedy = {:.3}% (limit 10%)",
            100.0 * worst_gap
        ),
    }
}

fn c6() -> Verdict {
    let base = ScenarioConfig {
        capacity_gb: 200.0,
        contents: 2000,
        layout: LayoutSpec::HexOverlap { overlap: 0.54 },
        strategies: vec![Strategy::Mechanism, Strategy::NoCache],
        ..ScenarioConfig::desk()
    };
    let res = sweep(&base, Axis::Choosing, &[0.0], 3);
    let cuts: Vec<f64> = res
        .points
        .iter()
        .map(|p| 1.0 - p.delay(Strategy::Mechanism).unwrap() / p.delay(Strategy::NoCache).unwrap())
        .collect();
    Verdict {
        id: 6,
        title: "headline reduction proxy",
        pass: cuts.iter().all(|c| (0.35..=0.65).contains(c)),
        detail: format!("K=2000 H=200 O=0.54: reduction per seed {} (window 0.35..0.65)", fmt_list(&cuts)),
    }
}

// ---------------------------------------------------------------- C7

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn c7() -> Verdict {
    let base = ScenarioConfig { capacity_gb: 200.0, ..desk() };
    let omegas: Vec<f64> = (0..=8).map(|k| k as f64 / 2.0).collect();
    let res = sweep(&base, Axis::Omega, &omegas, 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in res.seeds() {
        let lambda: Vec<f64> = (0..omegas.len())
            .map(|i| {
                res.at(i).find(|p| p.seed == seed).and_then(|p| p.summary(Strategy::Mechanism)).unwrap().replacement
            })
            .collect();
        let delay: Vec<f64> = res.delays_for_seed(Strategy::Mechanism, seed).into_iter().map(Option::unwrap).collect();
        let (rl, rd) = (spearman(&omegas, &lambda), spearman(&omegas, &delay));
        let ratio = lambda[8] / lambda[0];
        pass &= rl <= -0.9 && rd >= 0.8 && ratio < 0.5;
        parts.push(format!(
            "seed {seed}: rank corr λ {rl:.3} (<= -0.9), D {rd:.3} (>= 0.8), λ(4)/λ(0) = {ratio:.3} (< 0.5), λ {}",
            fmt_list(&lambda)
        ));
    }
    Verdict { id: 7, title: "omega tradeoff", pass, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- C8

fn c8() -> Verdict {
    let res = sweep(&desk(), Axis::Alpha, &[100.0, 1000.0], 3);
    let mut worst: f64 = 0.0;
    for seed in res.seeds() {
        let d = res.delays_for_seed(Strategy::Mechanism, seed);
        let (lo, hi) = (d[0].unwrap(), d[1].unwrap());
        worst = worst.max((lo - hi).abs() / hi);
    }
    Verdict {
        id: 8,
        title: "alpha insensitivity",
        pass: worst <= 0.02,
        detail: format!("largest |D(α=100) - D(α=1000)| / D(α=1000) over 3 seeds = {:.4}% (limit 2%)", 100.0 * worst),
    }
}

// ---------------------------------------------------------------- C9

fn c9() -> Verdict {
    let cfg = ScenarioConfig { hours: 6, contents: 800, ..ScenarioConfig::desk() };
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut names = Vec::new();
    for d in &dirs {
        let scenario = Scenario::prepare(&cfg).unwrap();
        let outcome = scenario.run().unwrap();
        names = write_run(d.path(), &scenario, &outcome).unwrap();
    }
    let runs_equal =
        names.iter().all(|n| fs::read(dirs[0].path().join(n)).unwrap() == fs::read(dirs[1].path().join(n)).unwrap());

    let spec = SweepSpec { axis: Axis::Omega, values: vec![0.0, 2.0], seeds: 2 };
    let small = ScenarioConfig { hours: 3, ..cfg };
    let csv_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_sweep(&small, &spec).unwrap().to_csv().unwrap())
    };
    let one = csv_with(1);
    let threads_equal = [2, 4].iter().all(|&t| csv_with(t) == one);
    Verdict {
        id: 9,
        title: "determinism",
        pass: runs_equal && threads_equal,
        detail: format!(
            "{} run files identical across two runs: {runs_equal}; sweep.csv identical on 1, 2 and 4 threads: {threads_equal}",
            names.len()
        ),
    }
}

// ---------------------------------------------------------------- C10

struct Instance {
    stations: usize,
    regions: Vec<Vec<usize>>,
    users: Vec<u64>,
    popularity: Vec<f64>,
    cached: Vec<(usize, usize)>,
    params: DelayParams,
}

fn random_delay_instance(rng: &mut ChaCha8Rng) -> Instance {
    let stations = rng.random_range(1..=3);
    let subsets: Vec<Vec<usize>> =
        (1u32..1 << stations).map(|mask| (0..stations).filter(|i| mask & (1 << i) != 0).collect()).collect();
    let mut regions: Vec<Vec<usize>> = subsets.into_iter().filter(|_| rng.random_bool(0.7)).collect();
    if regions.is_empty() {
        regions.push(vec![0]);
    }
    let users = regions.iter().map(|_| rng.random_range(0..30)).collect();
    let blocks = rng.random_range(1..=8);
    let popularity = (0..blocks).map(|_| rng.random_range(0.0..3.0)).collect();
    let mut cached = Vec::new();
    for b in 0..blocks {
        for i in 0..stations {
            if rng.random_bool(0.3) {
                cached.push((b, i));
            }
        }
    }
    let params = DelayParams {
        backhaul: rng.random_range(0.1..3.0),
        downlink: rng.random_range(0.1..8.0),
        choosing: rng.random_range(0.0..2.0),
    };
    Instance { stations, regions, users, popularity, cached, params }
}

/// Direct evaluation of the average delay from its definition.
fn brute_force_delay(x: &Instance) -> Option<f64> {
    let total: u64 = x.users.iter().sum();
    let phi: f64 = x.popularity.iter().sum();
    if total == 0 || phi <= 0.0 {
        return None;
    }
    let backhaul = x.params.backhaul * total as f64;
    let downlink: Vec<f64> = (0..x.stations)
        .map(|i| {
            let covered: u64 = x.regions.iter().zip(&x.users).filter(|(r, _)| r.contains(&i)).map(|(_, u)| u).sum();
            x.params.downlink * covered as f64
        })
        .collect();
    let mut acc = 0.0;
    for (b, &p) in x.popularity.iter().enumerate() {
        for (region, &u) in x.regions.iter().zip(&x.users) {
            let best = region
                .iter()
                .map(|&i| downlink[i] + if x.cached.contains(&(b, i)) { 0.0 } else { backhaul })
                .fold(f64::INFINITY, f64::min);
            let delay = best + x.params.choosing * region.len() as f64;
            acc += p * delay * u as f64;
        }
    }
    Some(acc / (phi * total as f64))
}

fn library_delay(x: &Instance) -> Option<f64> {
    let map = CoverageMap::from_regions(x.stations, x.regions.iter().map(|r| (r.clone(), 1.0)).collect()).unwrap();
    let users = RegionUserCounts::from_regions(&map, 1, x.users.clone());
    let model = DelayModel::new(&map, &users, x.params).unwrap();
    let size = DataSize::from_mb(1000);
    let blocks: Vec<ContentBlock> = x
        .popularity
        .iter()
        .enumerate()
        .map(|(b, &popularity)| ContentBlock {
            sp: 0,
            index: b,
            size,
            pieces: vec![BlockPiece {
                content: ContentKey { sp: 0, id: b as u32 },
                range: ByteRange::new(0, 1000),
                fraction: 1.0,
            }],
            popularity,
        })
        .collect();
    let mut alloc = AllocationState::new(1, blocks.len(), vec![DataSize::from_mb(8000); x.stations]);
    for &(b, i) in &x.cached {
        alloc.cache(b, &blocks[b], i).unwrap();
    }
    match model.average_delay(&alloc, &blocks) {
        HourDelay::Delay(d) => Some(d),
        HourDelay::NoDemand => None,
    }
}

fn c10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut agree = 0;
    let mut worst: f64 = 0.0;
    let n = 50;
    for _ in 0..n {
        let x = random_delay_instance(&mut rng);
        match (brute_force_delay(&x), library_delay(&x)) {
            (Some(a), Some(b)) => {
                let err = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
                if err <= 1e-9 {
                    agree += 1;
                }
            }
            (None, None) => agree += 1,
            _ => {}
        }
    }
    Verdict {
        id: 10,
        title: "delay oracle equivalence",
        pass: agree == n,
        detail: format!("{agree}/{n} instances agree, largest relative error {worst:.2e} (limit 1e-9)"),
    }
}

// ----------------------------------------------------------------

fn main() {
    let start = Instant::now();
    let mut verdicts = Vec::new();
    let mut run = |v: Verdict| {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("C{} {status} {}: {}", v.id, v.title, v.detail);
        verdicts.push(v);
    };
    let (v1, bounds) = c1_c2();
    run(v1);
    run(c2(&bounds));
    run(c3());
    run(c4());
    run(c5());
    run(c6());
    run(c7());
    run(c8());
    run(c9());
    run(c10());

    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("{passed}/{} criteria pass in {:.1} s", verdicts.len(), start.elapsed().as_secs_f64());
    let unexpected: Vec<u32> =
        verdicts.iter().filter(|v| !v.pass && !KNOWN_RED.contains(&v.id)).map(|v| v.id).collect();
    let recovered: Vec<u32> = verdicts.iter().filter(|v| v.pass && KNOWN_RED.contains(&v.id)).map(|v| v.id).collect();
    if !recovered.is_empty() {
        println!("known red criteria now passing: {recovered:?}");
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
