//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use emst::cli::parse_report;
use emst::data::{self, DatasetKind, DatasetSpec, Format};
use emst::metric::compute_core_distances;
use emst::oracle::{brute_core_distances, brute_knn, prim_mst, DEFAULT_ORACLE_CAP};
use emst::{boruvka_emst, bvh::Bvh, EmstError, EmstOptions, Metric, MetricKind, MstResult, PointSet, Pruning};

const KINDS: [DatasetKind; 3] =
    [DatasetKind::Uniform, DatasetKind::Normal, DatasetKind::ClusteredBlobs { blobs: 8, spread: 0.05 }];
const SIZES: [usize; 6] = [1, 2, 10, 100, 1000, 2000];
const SEEDS: u64 = 5;

type Outcome = Result<String, String>;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_emst")
}

fn matrix(max_n: usize) -> impl Iterator<Item = DatasetSpec> {
    KINDS.into_iter().flat_map(move |kind| {
        [2, 3].into_iter().flat_map(move |dim| {
            SIZES
                .into_iter()
                .filter(move |&n| n <= max_n)
                .flat_map(move |n| (0..SEEDS).map(move |seed| DatasetSpec { kind, n, dim, seed }))
        })
    })
}

fn edge_bytes(r: &MstResult) -> Vec<u8> {
    let mut buf = Vec::new();
    data::write_edges(&mut buf, &r.edges).unwrap();
    buf
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Criteria 1 and 3 share the engine runs over the full matrix.
fn oracle_and_iterations() -> (Outcome, Outcome) {
    let start = Instant::now();
    let (mut runs, mut mismatches, mut bound_failures) = (0, Vec::new(), Vec::new());
    let mut worst_ratio = 0.0f64;
    for spec in matrix(usize::MAX) {
        let points = data::generate(&spec).unwrap();
        let got = boruvka_emst(&points, MetricKind::Euclidean, &EmstOptions::default()).unwrap();
        let want = prim_mst(&points, &Metric::Euclidean, DEFAULT_ORACLE_CAP).unwrap();
        runs += 1;
        if got.pairs() != want.pairs() || !rel_close(got.total_weight, want.total_weight) {
            mismatches.push(spec.id());
        }
        let counts = &got.stats.component_counts;
        let decreasing = counts.windows(2).all(|w| w[1] < w[0]);
        if spec.n >= 2 {
            worst_ratio = worst_ratio.max(got.iterations as f64 / ceil_log2(spec.n) as f64);
        }
        if (spec.n >= 2 && got.iterations > ceil_log2(spec.n)) || !decreasing || counts.last() != Some(&1) {
            bound_failures.push(format!("{} ({} iterations, counts {counts:?})", spec.id(), got.iterations));
        }
    }
    let elapsed = start.elapsed();
    let oracle = if mismatches.is_empty() && elapsed < Duration::from_secs(60) {
        Ok(format!("{runs} instances match Prim, {:.1} s", elapsed.as_secs_f64()))
    } else {
        Err(format!("{} mismatches {:?}, {:.1} s", mismatches.len(), mismatches, elapsed.as_secs_f64()))
    };
    let bound = if bound_failures.is_empty() {
        Ok(format!("{runs} instances, max iterations / ceil(log2 n) = {worst_ratio:.2}"))
    } else {
        Err(bound_failures.join("; "))
    };
    (oracle, bound)
}

fn mutual_reachability() -> Outcome {
    let (mut runs, mut skipped, mut failures) = (0, 0, Vec::new());
    for spec in matrix(1000) {
        let points = data::generate(&spec).unwrap();
        for k_pts in [2, 4, 16] {
            if k_pts > spec.n {
                skipped += 1;
                continue;
            }
            let got = boruvka_emst(&points, MetricKind::MutualReachability { k_pts }, &EmstOptions::default()).unwrap();
            let core = brute_core_distances(&points, k_pts).unwrap();
            let want = prim_mst(&points, &Metric::MutualReachability(core), DEFAULT_ORACLE_CAP).unwrap();
            runs += 1;
            if got.pairs() != want.pairs() || !rel_close(got.total_weight, want.total_weight) {
                failures.push(format!("{} k={k_pts}", spec.id()));
            }
        }
        let euclid = boruvka_emst(&points, MetricKind::Euclidean, &EmstOptions::default()).unwrap();
        let k1 = boruvka_emst(&points, MetricKind::MutualReachability { k_pts: 1 }, &EmstOptions::default()).unwrap();
        if edge_bytes(&euclid) != edge_bytes(&k1) {
            failures.push(format!("{} k=1 differs from euclidean", spec.id()));
        }
    }
    if failures.is_empty() {
        Ok(format!("{runs} instances match Prim, {skipped} skipped with k > n, k=1 identical to euclidean"))
    } else {
        Err(failures.join("; "))
    }
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    assert!(out.status.success(), "emst {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_dataset(dir: &Path, spec: &DatasetSpec) -> String {
    let path = dir.join(format!("{}.bin", spec.id()));
    data::write_points(&path, &data::generate(spec).unwrap(), Format::Bin).unwrap();
    path.to_string_lossy().into_owned()
}

fn mst_file(dir: &Path, input: &str, tag: &str, extra: &[&str]) -> Vec<u8> {
    let out = dir.join(format!("edges-{tag}.csv"));
    let out_s = out.to_string_lossy().into_owned();
    let mut args = vec!["mst", input, "--out", &out_s];
    args.extend_from_slice(extra);
    run_cli(&args);
    std::fs::read(out).unwrap()
}

fn optimization_admissibility(dir: &Path) -> Outcome {
    let (mut fewer, mut failures) = (0, Vec::new());
    for seed in 0..20u64 {
        let spec = DatasetSpec { kind: KINDS[seed as usize % 3], n: 1000, dim: 2 + (seed as usize / 3) % 2, seed };
        let input = write_dataset(dir, &spec);
        let default = mst_file(dir, &input, "default", &[]);
        for flags in [&["--no-opt1"][..], &["--no-opt2"], &["--no-opt1", "--no-opt2"]] {
            if mst_file(dir, &input, "variant", flags) != default {
                failures.push(format!("{} {flags:?}", spec.id()));
            }
        }
        let points = data::generate(&spec).unwrap();
        let evals = |pruning| {
            boruvka_emst(&points, MetricKind::Euclidean, &EmstOptions { pruning, threads: 0 })
                .unwrap()
                .stats
                .leaf_evaluations
        };
        let off = Pruning { subtree_skipping: false, upper_bounds: false };
        if evals(Pruning::default()) < evals(off) {
            fewer += 1;
        }
    }
    if failures.is_empty() && fewer >= 18 {
        Ok(format!("20 instances byte-identical, default does fewer leaf evaluations on {fewer}/20"))
    } else {
        Err(format!("differences {failures:?}, fewer leaf evaluations on {fewer}/20"))
    }
}

fn thread_determinism(dir: &Path) -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..10u64 {
        let spec = DatasetSpec { kind: KINDS[seed as usize % 3], n: 10_000, dim: 2 + seed as usize % 2, seed };
        let input = write_dataset(dir, &spec);
        let one = mst_file(dir, &input, "t1", &["--threads", "1"]);
        for t in ["2", "8"] {
            if mst_file(dir, &input, "tn", &["--threads", t]) != one {
                failures.push(format!("{} threads {t}", spec.id()));
            }
        }
    }
    if failures.is_empty() {
        Ok("10 instances byte-identical across 1, 2 and 8 threads".into())
    } else {
        Err(failures.join("; "))
    }
}

fn core_distances() -> Outcome {
    let (mut checked, mut failures) = (0, Vec::new());
    for kind in KINDS {
        for dim in [2, 3] {
            for n in [1, 2, 10, 100, 500] {
                for seed in 0..SEEDS {
                    let spec = DatasetSpec { kind, n, dim, seed };
                    let points = data::generate(&spec).unwrap();
                    for k in [1, 2, 4, 16].into_iter().filter(|&k| k <= n) {
                        let got = match points.view() {
                            emst::PointsRef::D2(p) => compute_core_distances(&Bvh::build(p).unwrap(), k),
                            emst::PointsRef::D3(p) => compute_core_distances(&Bvh::build(p).unwrap(), k),
                        }
                        .unwrap();
                        for i in 0..n {
                            checked += 1;
                            if got.values()[i] != brute_knn(&points, i, k).unwrap()[k - 1] {
                                failures.push(format!("{} k={k} point {i}", spec.id()));
                            }
                        }
                    }
                }
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{checked} core distances equal brute-force kNN"))
    } else {
        Err(format!("{} mismatches, first {:?}", failures.len(), failures.first()))
    }
}

fn median_seconds(points: &PointSet, repeats: usize) -> f64 {
    let mut t: Vec<f64> = (0..repeats)
        .map(|_| {
            boruvka_emst(points, MetricKind::Euclidean, &EmstOptions::default()).unwrap().timings.total.as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[t.len() / 2]
}

fn linear_scaling() -> Outcome {
    let start = Instant::now();
    let big = data::generate(&DatasetSpec { kind: DatasetKind::Uniform, n: 4_000_000, dim: 2, seed: 1 }).unwrap();
    let small = data::sample(&big, 1_000_000, 0).unwrap();
    let t_small = median_seconds(&small, 3);
    let t_big = median_seconds(&big, 3);
    let ratio = t_big / t_small;
    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!("median {t_small:.2} s at 1e6, {t_big:.2} s at 4e6, ratio {ratio:.2}, {elapsed:.0} s overall");
    if ratio <= 6.0 && elapsed < 300.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phase_accounting() -> Outcome {
    let out = run_cli(&["bench", "--kind", "uniform", "--n", "200000", "--samples", "50000,200000", "--repeats", "3"]);
    let rows = parse_report(&String::from_utf8(out.stdout).unwrap());
    let mut details = Vec::new();
    for row in &rows {
        let get = |k: &str| -> f64 {
            row.iter().find(|(name, _)| name == k).unwrap_or_else(|| panic!("column {k}")).1.parse().unwrap()
        };
        let parts = get("t_tree") + get("t_core") + get("t_mst");
        let inner = ["t_labels", "t_bounds", "t_search", "t_merge", "t_finalize"].iter().map(|k| get(k)).sum::<f64>();
        let total = get("t_total");
        let share = parts / total;
        details.push(format!("n={} t_tree={:.4} t_mst={:.4} sum/total={share:.4}", get("n"), get("t_tree"), get("t_mst")));
        if !(0.95..=1.05).contains(&share) || (inner - get("t_mst")).abs() > 1e-6 * total.max(1.0) {
            return Err(details.join(", "));
        }
    }
    if rows.len() == 2 {
        Ok(details.join(", "))
    } else {
        Err(format!("expected 2 rows, got {}", rows.len()))
    }
}

fn degenerate_inputs(dir: &Path) -> Outcome {
    let empty = PointSet::new_2d(Vec::new()).unwrap();
    if !matches!(boruvka_emst(&empty, MetricKind::Euclidean, &EmstOptions::default()), Err(EmstError::EmptyDataset)) {
        return Err("empty input did not fail with EmptyDataset".into());
    }
    let empty_file = dir.join("empty.csv");
    std::fs::write(&empty_file, "").unwrap();
    let status = Command::new(bin()).args(["mst"]).arg(&empty_file).output().unwrap().status;
    if status.success() {
        return Err("CLI accepted an empty file".into());
    }
    let one = PointSet::new_3d(vec![[0.25, 0.5, 0.75]]).unwrap();
    let r = boruvka_emst(&one, MetricKind::Euclidean, &EmstOptions::default()).unwrap();
    if !r.edges.is_empty() {
        return Err(format!("one point gave {} edges", r.edges.len()));
    }
    let same = PointSet::new_2d(vec![[0.1, 0.2]; 50]).unwrap();
    let r = boruvka_emst(&same, MetricKind::Euclidean, &EmstOptions::default()).unwrap();
    if r.edges.len() != 49 || r.edges.iter().any(|e| e.weight != 0.0) || r.iterations > ceil_log2(50) {
        return Err(format!("coincident points: {} edges, {} iterations", r.edges.len(), r.iterations));
    }
    Ok(format!(
        "empty input rejected (CLI exit {}), one point gives no edges, 50 coincident points give 49 zero-weight edges in {} iterations",
        status.code().unwrap_or(-1),
        r.iterations
    ))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (oracle, iterations) = oracle_and_iterations();
    let results = [
        ("1 oracle equivalence", oracle),
        ("2 mutual reachability", mutual_reachability()),
        ("3 iteration bound", iterations),
        ("4 optimization admissibility", optimization_admissibility(dir.path())),
        ("5 thread determinism", thread_determinism(dir.path())),
        ("6 core distances", core_distances()),
        ("7 asymptotic linearity", linear_scaling()),
        ("8 phase accounting", phase_accounting()),
        ("9 degenerate inputs", degenerate_inputs(dir.path())),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
