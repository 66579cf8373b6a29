use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bsplace::agent::checkpoint::load_checkpoint;
use bsplace::cli::RunRecord;
use bsplace::metrics::evaluate;
use bsplace::sitemap::{generate_synthetic, load_sitemap};
use bsplace::twin::{RadioConfig, Twin};

const SMALL: &str = "\
width = 8
height = 8
cell_size = 16
density = 0.2
building_min = 1
building_max = 2
train_maps = 6
test_maps = 3
calibration_samples = 10
hidden_layers = 16, 16
rollout_size = 32
minibatch_size = 16
total_env_steps = 64
learning_rate = 1e-3
";

fn bsplace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsplace")).current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.display().to_string()
}

/// Drops the elapsed_s column.
fn without_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(7);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn golden_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&bsplace(dir.path(), &["eval", "--synth", "3", "--placements", "1:1;30:30"]));
    assert_eq!(
        out,
        "scheme,n_bs,map_id,placements,coverage,capacity,pathgain_w,elapsed_s,evaluations\n\
         eval,2,f3da55242cbae847,1:1;30:30,4.77987e-1,2.51997e0,5.32085e-8,0.00000e0,1\n"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(bsplace(d, &["nonsense"]).status.code(), Some(2));
    assert_eq!(bsplace(d, &["heuristic"]).status.code(), Some(2));
    fs::write(d.join("bad.cfg"), "width = 8\nfrequency = 3\n").unwrap();
    let out = bsplace(d, &["--config", "bad.cfg", "heuristic", "--synth", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:2: unknown key"));
    let cfg = small_config(d, "");
    assert_eq!(bsplace(d, &["--config", &cfg, "bench"]).status.code(), Some(2));
    assert_eq!(bsplace(d, &["--config", &cfg, "heuristic", "--synth", "1", "--n", "1000"]).status.code(), Some(3));
    assert_eq!(bsplace(d, &["eval", "--map", "missing.pgm", "--placements", "0:0"]).status.code(), Some(3));
}

#[test]
fn twin_heatmap_of_centered_bs_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut pgm = b"P5\n15 15\n255\n".to_vec();
    pgm.extend([0u8; 225]);
    fs::write(d.join("empty.pgm"), &pgm).unwrap();
    let text = ok(&bsplace(d, &["--out", "a", "twin", "--map", "empty.pgm", "--bs", "7:7"]));
    assert!(text.starts_with("min_dbm="));
    let raster = fs::read(d.join("a/pathloss.pgm")).unwrap();
    let px = &raster[raster.len() - 225..];
    for i in 0..15 {
        for j in 0..15 {
            assert_eq!(px[i * 15 + j], px[j * 15 + i]);
        }
    }
    ok(&bsplace(d, &["--out", "b", "twin", "--map", "empty.pgm", "--bs", "7:7"]));
    for f in ["pathloss.pgm", "pathloss.ppm"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap());
    }
    let mut walled = pgm.clone();
    let n = walled.len();
    walled[n - 225] = 255;
    fs::write(d.join("walled.pgm"), &walled).unwrap();
    assert_eq!(bsplace(d, &["twin", "--map", "walled.pgm", "--bs", "0:0"]).status.code(), Some(3));
}

#[test]
fn rows_are_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, "");
    let radio = RadioConfig::for_cell_size(16.0);
    let twin = Twin::new(radio).unwrap();
    let params = bsplace::cli::ExperimentConfig::parse(SMALL, "small").unwrap().synth_params();
    let map = generate_synthetic(9, &params).unwrap();
    for args in [
        vec!["heuristic", "--n", "2"],
        vec!["exhaustive", "--n", "1", "--metric", "capacity"],
        vec!["exhaustive", "--n", "2"],
        vec!["greedy", "--n", "3"],
    ] {
        let mut full = vec!["--config", cfg.as_str()];
        full.extend(args.iter().copied());
        full.extend(["--synth", "9"]);
        let out = ok(&bsplace(d, &full));
        let row = RunRecord::parse_row(out.lines().nth(1).unwrap()).unwrap();
        assert_eq!(row.map_id, map.map_id());
        let m = evaluate(&twin, &map, &row.placements).unwrap();
        assert_eq!(
            row.metrics.coverage.to_bits(),
            bsplace::metrics::sig6(m.coverage).parse::<f64>().unwrap().to_bits()
        );
        assert_eq!(bsplace::metrics::sig6(row.metrics.capacity), bsplace::metrics::sig6(m.capacity));
        assert!(row.elapsed_s >= 0.0);
    }
}

#[test]
fn gen_maps_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, "");
    let listing = ok(&bsplace(d, &["--config", &cfg, "--out", "maps", "gen-maps", "--count", "3", "--start", "40"]));
    let params = bsplace::cli::ExperimentConfig::parse(SMALL, "small").unwrap().synth_params();
    for (line, seed) in listing.lines().skip(1).zip(40..) {
        let f: Vec<&str> = line.split(',').collect();
        let loaded = load_sitemap(&fs::read(d.join("maps").join(f[2])).unwrap(), 16.0, None, None).unwrap();
        assert_eq!(loaded, generate_synthetic(seed, &params).unwrap());
        assert_eq!(f[1], format!("{:016x}", loaded.map_id()));
    }
}

#[test]
fn train_deploy_bench_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, "schemes = heuristic, autobs, exhaustive_v, exhaustive_c, greedy\nn_bs = 1, 2\n");
    for run in ["r1", "r2"] {
        ok(&bsplace(d, &["--config", &cfg, "--deterministic", "--seed", "5", "--out", run, "train"]));
        let ck = format!("{run}/checkpoint.absp");
        ok(&bsplace(
            d,
            &["--config", &cfg, "--deterministic", "--seed", "5", "--out", run, "bench", "--checkpoint", &ck],
        ));
    }
    assert_eq!(fs::read(d.join("r1/checkpoint.absp")).unwrap(), fs::read(d.join("r2/checkpoint.absp")).unwrap());
    assert_eq!(fs::read(d.join("r1/curve.csv")).unwrap(), fs::read(d.join("r2/curve.csv")).unwrap());
    let a = fs::read_to_string(d.join("r1/bench.csv")).unwrap();
    let b = fs::read_to_string(d.join("r2/bench.csv")).unwrap();
    assert_eq!(without_elapsed(&a), without_elapsed(&b));
    // 3 maps x 5 schemes x 2 sizes
    assert_eq!(a.lines().count(), 1 + 30);

    let curve = fs::read_to_string(d.join("r1/curve.csv")).unwrap();
    let steps: Vec<u64> = curve.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(steps.len(), 2);
    assert!(steps.windows(2).all(|w| w[0] < w[1]));
    let (params, _) = load_checkpoint(&d.join("r1/checkpoint.absp")).unwrap();
    assert_eq!((params.width, params.height), (8, 8));

    let deploy = ok(&bsplace(
        d,
        &["--config", &cfg, "deploy", "--synth", "0", "--n", "2", "--checkpoint", "r1/checkpoint.absp"],
    ));
    let row = RunRecord::parse_row(deploy.lines().nth(1).unwrap()).unwrap();
    assert_eq!((row.scheme.as_str(), row.n_bs), ("autobs", 2));

    let summary = fs::read_to_string(d.join("r1/bench_summary.txt")).unwrap();
    assert!(summary.contains("time ratio exhaustive_v/autobs (n_bs=1)"));
}

#[test]
fn ablation_has_one_row_per_preset_on_one_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, "total_env_steps = 32\n");
    let out = ok(&bsplace(d, &["--config", &cfg, "--deterministic", "--out", "ab", "ablate-rewards"]));
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(
        names,
        ["capacity_only", "coverage_capacity", "pathgain_capacity", "coverage_only", "pathgain_coverage"]
    );
    assert!(rows.iter().all(|r| r[4] == rows[0][4]));
    assert_eq!(fs::read_to_string(d.join("ab/ablation.csv")).unwrap(), out);
}

#[test]
fn divergence_keeps_last_finite_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, "learning_rate = 1e300\nmax_grad_norm = 1e300\noptimizer = sgd\n");
    let out = bsplace(d, &["--config", &cfg, "--deterministic", "--out", "dv", "train"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let (params, _) = load_checkpoint(&d.join("dv/checkpoint.absp")).unwrap();
    assert!(params.all_finite());
}
