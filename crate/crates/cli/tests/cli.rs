use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evpca_cli::commands::read_spectrum_csv;
use evpca_core::data::write_csv;
use evpca_core::simulate::{replication_rng, sample_directional};
use evpca_core::{DataMatrix, KSpec, ModelSpec};
use tempfile::TempDir;

fn evpca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpca"))
        .args(args)
        .env_remove("EVPCA_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn directional_csv(
    dir: &Path,
    d: usize,
    n: usize,
    p_star: usize,
    spike: f64,
    seed: u64,
) -> PathBuf {
    let spec = ModelSpec::directional(d, n, p_star, spike, KSpec::Count(2), seed);
    let data = sample_directional(&spec, &mut replication_rng(seed, 0)).unwrap();
    let path = dir.join(format!("data_{d}_{n}.csv"));
    write_csv(&data, fs::File::create(&path).unwrap()).unwrap();
    path
}

fn hash_of(o: &Output) -> String {
    stderr(o)
        .lines()
        .find_map(|l| l.strip_prefix("config-hash: "))
        .expect("hash echoed to stderr")
        .to_string()
}

#[test]
fn estimate_fixed_regime_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 20, 10_000, 10, 20.0, 1);
    let out = evpca(&["estimate", "--input", csv.to_str().unwrap(), "--k", "1500"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("# config-hash: {}", hash_of(&out)));
    assert_eq!(
        lines[2],
        "k,c,regime,q,aic_criterion,aic_p_hat,bic_criterion,bic_p_hat"
    );
    let fields: Vec<&str> = lines[3].split(',').collect();
    assert_eq!(&fields[..5], ["1500", "0.0133", "fixed", "18", "AIC"]);
    assert_eq!(&fields[6..], ["BIC", "10"]);
    // AIC is not consistent and may overshoot
    assert!(fields[5].parse::<usize>().unwrap() >= 10);
}

#[test]
fn estimate_json_has_curves() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 20, 3000, 2, 20.0, 2);
    let out = evpca(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--k",
        "10%",
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = &v["rows"][0];
    assert_eq!(row["k"], 300);
    assert_eq!(row["regime"], "fixed");
    assert_eq!(row["aic"]["label"], "AIC");
    assert_eq!(row["bic"]["label"], "BIC");
    assert_eq!(row["aic"]["values"].as_array().unwrap().len(), 18);
    assert_eq!(v["config_hash"].as_str().unwrap(), hash_of(&out));
}

#[test]
fn k_grid_rounds_half_up_and_switches_regime() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 30, 2546, 3, 20.0, 3);
    let grid: Vec<String> = (1..=15).map(|i| format!("{i}%")).collect();
    let report = tmp.path().join("table.csv");
    let out = evpca(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--k-grid",
        &grid.join(","),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&report).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(3)
        .map(|l| l.split(',').collect())
        .collect();
    let ks: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(
        ks,
        [25, 51, 76, 102, 127, 153, 178, 204, 229, 255, 280, 306, 331, 356, 382]
    );
    assert_eq!(rows[0][1], "1.2000");
    assert_eq!(&rows[0][2..5], ["star", "15", "AIC*"]);
    assert_eq!(rows[1][2], "fixed");
    let curves = fs::read_to_string(tmp.path().join("table_curves.csv")).unwrap();
    assert!(curves.starts_with("# config-hash: "));
    assert!(curves.lines().nth(1) == Some("k,criterion,p,value"));
}

#[test]
fn estimate_error_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 10, 50, 1, 5.0, 4);
    let input = csv.to_str().unwrap();
    let code = |args: &[&str]| evpca(args).status.code().unwrap();

    assert_eq!(code(&["estimate", "--input", input, "--k", "0"]), 2);
    assert_eq!(code(&["estimate", "--input", input, "--k", "50"]), 2);
    assert_eq!(
        code(&["estimate", "--input", "/no/such/file", "--k", "5"]),
        2
    );
    // d = k
    assert_eq!(code(&["estimate", "--input", input, "--k", "10"]), 3);
    // fixed-regime criterion with d > k
    assert_eq!(
        code(&[
            "estimate",
            "--input",
            input,
            "--k",
            "5",
            "--criterion",
            "bic"
        ]),
        3
    );
    assert_eq!(
        code(&[
            "estimate",
            "--input",
            input,
            "--k",
            "5",
            "--criterion",
            "bic-star"
        ]),
        0
    );

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "a,b,c\n1,2,3\n4,x,6\n").unwrap();
    let out = evpca(&["estimate", "--input", bad.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // file line numbers, header included
    assert!(stderr(&out).contains("[3]"), "{}", stderr(&out));
}

#[test]
fn zero_eigenvalue_in_criterion_range_is_numeric_error() {
    let tmp = TempDir::new().unwrap();
    // every extreme lies in the first two coordinates, so the fixed-regime
    // criteria see zero eigenvalues
    let mut rows = Vec::new();
    for i in 0..40 {
        let t = i as f64 * 0.3;
        rows.push(vec![10.0 * t.cos(), 10.0 * t.sin(), 0.0, 0.0]);
    }
    rows.push(vec![0.1, 0.1, 0.1, 0.1]);
    let path = tmp.path().join("planar.csv");
    write_csv(
        &DataMatrix::from_rows(&rows).unwrap(),
        fs::File::create(&path).unwrap(),
    )
    .unwrap();
    let out = evpca(&["estimate", "--input", path.to_str().unwrap(), "--k", "20"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("nonpositive eigenvalue"));
}

fn spec_json(d: usize, n: usize, p_star: usize, spike: f64, k: usize, seed: u64) -> String {
    serde_json::to_string(&ModelSpec::directional(
        d,
        n,
        p_star,
        spike,
        KSpec::Count(k),
        seed,
    ))
    .unwrap()
}

#[test]
fn simulate_writes_long_csv_and_summary() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("sim");
    let spec = spec_json(20, 10_000, 10, 20.0, 1500, 9);
    let out = evpca(&[
        "simulate",
        "--model-spec",
        &spec,
        "--reps",
        "100",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("replications.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config-hash: {}", hash_of(&out))
    );
    assert_eq!(lines.next().unwrap(), "replication,kind,p_hat");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 400);
    for kind in ["aic", "bic", "aic-circ", "bic-circ"] {
        let n = body
            .iter()
            .filter(|l| l.split(',').nth(1) == Some(kind))
            .count();
        assert_eq!(n, 100);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replications"], 100);
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_single_replication_and_spec_file() {
    let tmp = TempDir::new().unwrap();
    let spec_path = tmp.path().join("spec.json");
    fs::write(&spec_path, spec_json(30, 400, 2, 10.0, 20, 1)).unwrap();
    let dir = tmp.path().join("one");
    let out = evpca(&[
        "simulate",
        "--model-spec",
        spec_path.to_str().unwrap(),
        "--reps",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("replications.csv")).unwrap();
    let body: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(body.len(), 2);
    assert!(body[0].starts_with("0,aic-star,"));
    assert!(body[1].starts_with("0,bic-star,"));
}

#[test]
fn simulate_rejects_bad_specs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("x");
    let bad = spec_json(10, 100, 10, 5.0, 20, 1);
    let out = evpca(&[
        "simulate",
        "--model-spec",
        &bad,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p_star"), "{}", stderr(&out));

    let out = evpca(&[
        "simulate",
        "--model-spec",
        "{not json",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // d = k has no regime
    let out = evpca(&[
        "simulate",
        "--model-spec",
        &spec_json(10, 100, 1, 5.0, 10, 1),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_byte_reproducible_across_workers_and_seed_overrides() {
    let tmp = TempDir::new().unwrap();
    let spec = spec_json(40, 2000, 3, 8.0, 200, 5);
    let run = |name: &str, extra: &[&str], env_seed: Option<&str>| {
        let dir = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_evpca"));
        cmd.args([
            "simulate",
            "--model-spec",
            &spec,
            "--reps",
            "12",
            "--out",
            dir.to_str().unwrap(),
        ])
        .args(extra)
        .env_remove("EVPCA_SEED");
        if let Some(s) = env_seed {
            cmd.env("EVPCA_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        (
            fs::read(dir.join("replications.csv")).unwrap(),
            fs::read(dir.join("summary.json")).unwrap(),
        )
    };
    let one = run("t1", &["--threads", "1"], None);
    let eight = run("t8", &["--threads", "8"], None);
    assert_eq!(one, eight);
    let env = run("env", &[], Some("77"));
    let flag = run("flag", &["--seed", "77"], None);
    assert_eq!(env, flag);
    assert_ne!(env.0, one.0);
}

#[test]
fn scree_counts_and_round_trip() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 500, 1000, 5, 10.0, 6);
    let dir = tmp.path().join("scree");
    let out = evpca(&[
        "scree",
        "--input",
        csv.to_str().unwrap(),
        "--k",
        "76",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let count = |name: &str| fs::read_to_string(dir.join(name)).unwrap().lines().count() - 2;
    assert_eq!(count("scaled.csv"), 75);
    assert_eq!(count("increments.csv"), 74);

    let spectrum = read_spectrum_csv(&dir.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.d(), 500);
    assert_eq!(spectrum.k(), 76);
    // recompute in-process and compare
    let data = evpca_core::read_csv_path(&csv, Default::default()).unwrap();
    let direct = evpca_core::angular_spectrum(&data, 76).unwrap();
    for (a, b) in spectrum.eigenvalues().iter().zip(direct.eigenvalues()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn scree_of_flat_spectrum_has_zero_increments() {
    let tmp = TempDir::new().unwrap();
    let mut rows = Vec::new();
    for j in 0..4 {
        for s in [5.0, -5.0] {
            let mut r = vec![0.0; 4];
            r[j] = s;
            rows.push(r);
        }
    }
    rows.push(vec![0.1, 0.0, 0.0, 0.0]);
    let path = tmp.path().join("flat.csv");
    write_csv(
        &DataMatrix::from_rows(&rows).unwrap(),
        fs::File::create(&path).unwrap(),
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = evpca(&[
        "scree",
        "--input",
        path.to_str().unwrap(),
        "--k",
        "8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let inc = fs::read_to_string(dir.join("increments.csv")).unwrap();
    let values: Vec<f64> = inc
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!(values.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn margin_transform_and_delimiter() {
    let tmp = TempDir::new().unwrap();
    let csv = directional_csv(tmp.path(), 20, 3000, 2, 20.0, 8);
    let semi = tmp.path().join("semi.csv");
    let text = fs::read_to_string(&csv).unwrap().replace(',', ";");
    fs::write(
        &semi,
        format!(
            "{}\n{text}",
            (0..20)
                .map(|i| format!("x{i}"))
                .collect::<Vec<_>>()
                .join(";")
        ),
    )
    .unwrap();
    let a = evpca(&[
        "estimate",
        "--input",
        csv.to_str().unwrap(),
        "--k",
        "300",
        "--frechet-margins",
    ]);
    let b = evpca(&[
        "estimate",
        "--input",
        semi.to_str().unwrap(),
        "--k",
        "300",
        "--frechet-margins",
        "--delimiter",
        ";",
    ]);
    assert!(a.status.success() && b.status.success(), "{}", stderr(&b));
    let rows = |o: &Output| {
        stdout(o)
            .lines()
            .skip(1)
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn gap_grid_matches_known_pattern() {
    let out = evpca(&["gap", "--xi", "3", "--c", "0.25,0.5,0.75,1.5,2,3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let satisfied: Vec<&str> = text
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(
        satisfied,
        ["true", "true", "true", "false", "false", "false"]
    );

    let out = evpca(&["gap", "--xi", "1.5", "--c", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("not a distant spike"));
}

#[test]
fn mp_tables() {
    let out = evpca(&["mp", "--c", "2", "--alpha", "0.999999", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let get = |q: &str| {
        rows.iter().find(|r| r["quantity"] == q).unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    assert!((get("point_mass") - 0.5).abs() < 1e-15);
    let edge = (1.0 + 2f64.sqrt()).powi(2);
    assert!((get("support_upper") - edge).abs() < 1e-12);
    assert!((get("quantile") - edge).abs() < 1e-2);

    assert_eq!(evpca(&["mp", "--c", "1"]).status.code(), Some(2));
    assert_eq!(
        evpca(&["mp", "--c", "0.5", "--xi", "1"]).status.code(),
        Some(3)
    );
}
