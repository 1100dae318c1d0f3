use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex;
use sparsact::linalg::Cholesky;
use sparsact::{random_stable_model, swift_hohenberg, synthetic_completion, MaskKind, Matrix, ShParams};
use sparsact_cli::problem_file::{Kind, ProblemFile};

fn sparsact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsact")).args(args).env("SPARSACT_LOG", "info").output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_problem(dir: &Path, file: &ProblemFile) -> PathBuf {
    let path = dir.join("problem.json");
    std::fs::write(&path, file.to_canonical().unwrap()).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix(v: &serde_json::Value) -> Matrix {
    let rows = v.as_array().unwrap();
    let cols = rows[0].as_array().unwrap().len();
    Matrix::from_fn(rows.len(), cols, |i, j| {
        let z = &rows[i][j];
        Complex::new(z[0].as_f64().unwrap(), z[1].as_f64().unwrap())
    })
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_swift_hohenberg_reproduces_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsact(&["gen", "swift-hohenberg", "--n", "64", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(dir.path().join("problem.json")).unwrap();
    let file = ProblemFile::parse(&text).unwrap();
    assert_eq!(file.kind, Kind::Actuator);
    assert_eq!((file.n, file.m, file.p), (64, 64, 64));
    let expected = swift_hohenberg::<f64>(&ShParams { n: 64, c: -0.2, alpha: 2.0, omega: 1.25, r: 10.0 }).unwrap();
    assert_eq!(file.model().unwrap(), expected);
    assert_eq!(file.to_canonical().unwrap(), text.as_bytes());
}

#[test]
fn canonical_round_trip_is_byte_identical() {
    let inst = synthetic_completion::<f64>(5, 4, MaskKind::RandomSym(0.5)).unwrap();
    for file in [
        ProblemFile::from_model(Kind::Actuator, &random_stable_model(3, 5, 3, 2).unwrap()),
        ProblemFile::from_completion(&inst.model, &inst.data),
    ] {
        let first = file.to_canonical().unwrap();
        let parsed = ProblemFile::parse(std::str::from_utf8(&first).unwrap()).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.to_canonical().unwrap(), first);
    }
}

#[test]
fn actuator_sweep_writes_one_row_per_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &ProblemFile::from_model(Kind::Actuator, &random_stable_model(11, 6, 4, 2).unwrap()));
    let out_dir = dir.path().join("out");
    let out = sparsact(&[
        "actuator",
        path_str(&problem),
        "--gamma-grid",
        "1e-2:1e1:20",
        "--reweight",
        "1",
        "--jobs",
        "2",
        "--out",
        path_str(&out_dir),
    ]);
    assert_code(&out, 0);
    let (header, rows) = read_csv(&out_dir.join("sweep.csv"));
    assert_eq!(header.join(","), "gamma,nnz_rows,J,J_c,degradation_pct,pg_iters,status");
    assert_eq!(rows.len(), 20);
    let gammas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(gammas.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r[6] == "converged"));

    let (pg_header, pg_rows) = read_csv(&out_dir.join("iterations/gamma_000_round_0.csv"));
    assert_eq!(pg_header.join(","), "iter,objective,f,g,alpha,r_r,r_n,backtracks,nnz_rows");
    assert!(!pg_rows.is_empty());
    assert!(out_dir.join("iterations/gamma_019_round_1.csv").exists());

    let gains = json(&out_dir.join("gains.json"));
    let results = gains["results"].as_array().unwrap();
    assert_eq!(results.len(), 20);
    let k = matrix(&results[0]["K"]);
    assert_eq!((k.nrows(), k.ncols()), (4, 6));
}

#[test]
fn zero_gamma_has_no_degradation() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &ProblemFile::from_model(Kind::Actuator, &random_stable_model(2, 5, 3, 2).unwrap()));
    let out = sparsact(&["actuator", path_str(&problem), "--gamma", "0", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "3");
    let degradation: f64 = rows[0][4].parse().unwrap();
    assert!(degradation.abs() < 1e-8, "{degradation}");
}

#[test]
fn missing_matrix_key_exits_1_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = ProblemFile::from_model(Kind::Actuator, &random_stable_model(2, 4, 2, 2).unwrap());
    file.r = None;
    let problem = write_problem(dir.path(), &file);
    let out = sparsact(&["actuator", path_str(&problem), "--gamma", "1", "--out", path_str(dir.path())]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`R`"));

    let bad_shape = dir.path().join("bad.json");
    let text = std::fs::read_to_string(&problem).unwrap().replacen("\"n\":4", "\"n\":5", 1);
    std::fs::write(&bad_shape, text).unwrap();
    let out = sparsact(&["actuator", path_str(&bad_shape), "--gamma", "1"]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `A`"));

    let out = sparsact(&["actuator", path_str(&dir.path().join("absent.json")), "--gamma", "1"]);
    assert_code(&out, 1);
}

#[test]
fn complete_converges_on_synthetic_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = synthetic_completion::<f64>(10, 10, MaskKind::Diagonal).unwrap();
    let problem = write_problem(dir.path(), &ProblemFile::from_completion(&inst.model, &inst.data));
    let out = sparsact(&["complete", path_str(&problem), "--gamma", "1", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("delta_p/||G||="));
    let (header, rows) = read_csv(&dir.path().join("outer.csv"));
    assert_eq!(header.join(","), "outer_iter,delta_p,delta_p_normalized,delta_d,rho,inner_iters,objective");
    let last = rows.last().unwrap();
    assert!(last[2].parse::<f64>().unwrap() <= 1e-2);
    assert!(last[3].parse::<f64>().unwrap() <= 1e-2);
    let sol = json(&dir.path().join("solution.json"));
    assert_eq!(sol["status"], "converged");
    assert!(Cholesky::new(&matrix(&sol["X"])).is_some());
    assert_eq!(matrix(&sol["K"]).shape(), (10, 10));
}

#[test]
fn complete_with_empty_mask_warns_and_uses_plain_pg() {
    let dir = tempfile::tempdir().unwrap();
    let inst = synthetic_completion::<f64>(4, 5, MaskKind::Diagonal).unwrap();
    let mut file = ProblemFile::from_completion(&inst.model, &inst.data);
    file.e = Some(vec![vec![0; 5]; 5]);
    let problem = write_problem(dir.path(), &file);
    let out = sparsact(&["complete", path_str(&problem), "--gamma", "0.5", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no known entries"));
    assert!(dir.path().join("iterations.csv").exists());
    assert!(!dir.path().join("outer.csv").exists());
}

#[test]
fn complete_rejects_asymmetric_mask() {
    let dir = tempfile::tempdir().unwrap();
    let inst = synthetic_completion::<f64>(4, 4, MaskKind::Diagonal).unwrap();
    let mut file = ProblemFile::from_completion(&inst.model, &inst.data);
    file.e.as_mut().unwrap()[0][1] = 1;
    let problem = write_problem(dir.path(), &file);
    let out = sparsact(&["complete", path_str(&problem), "--out", path_str(dir.path())]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `E`"));
}

#[test]
fn sensor_on_scalar_filter_returns_kalman_gain() {
    // ẋ = −x + d, y = x + η, unit covariances: P² + 2P − 1 = 0, L = P.
    let dir = tempfile::tempdir().unwrap();
    let s = |v: f64| Matrix::from_element(1, 1, Complex::new(v, 0.0));
    let problem = write_problem(dir.path(), &ProblemFile::from_sensor(&s(-1.0), &s(1.0), &s(1.0), &s(1.0)));
    let out = sparsact(&["sensor", path_str(&problem), "--gamma", "0", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    let gains = json(&dir.path().join("gains.json"));
    let l = matrix(&gains["results"][0]["L"]);
    assert!((l[(0, 0)].re - (2f64.sqrt() - 1.0)).abs() < 1e-10, "{l}");
}

#[test]
fn greedy_emits_removal_order() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &ProblemFile::from_model(Kind::Actuator, &random_stable_model(4, 6, 4, 2).unwrap()));
    let out = sparsact(&["greedy", path_str(&problem), "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    let (header, rows) = read_csv(&dir.path().join("greedy.csv"));
    assert_eq!(header.join(","), "step,removed_index,cost");
    assert_eq!(rows[0][1], "");
    // A Hurwitz plant can drop every actuator.
    assert_eq!(rows.len(), 5);
    let mut removed: Vec<usize> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    let costs: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    removed.sort();
    assert_eq!(removed, vec![0, 1, 2, 3]);
}

#[test]
fn small_swift_hohenberg_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let gen = sparsact(&["gen", "swift-hohenberg", "--n", "8", "--out", path_str(dir.path())]);
    assert_code(&gen, 0);
    let out = sparsact(&[
        "actuator",
        path_str(&dir.path().join("problem.json")),
        "--gamma-grid",
        "1e-2:1e2:20",
        "--reweight",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    let (_, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 20);
    // Points near the loss of stabilizability may stop at the iteration cap;
    // the exit code must say so.
    let all_converged = rows.iter().all(|r| r[6] == "converged");
    assert_code(&out, if all_converged { 0 } else { 2 });
    let counts: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

#[test]
fn bench_writes_timings() {
    let dir = tempfile::tempdir().unwrap();
    let out = sparsact(&["bench", "--sizes", "8,16", "--iters", "3", "--out", path_str(dir.path())]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn bad_flags_and_log_level_exit_1() {
    assert_code(&sparsact(&["actuator", "x.json", "--gamma-grid", "1:0:3"]), 1);
    assert_code(&sparsact(&["frobnicate"]), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_sparsact"))
        .args(["bench", "--sizes", "8", "--iters", "1"])
        .env("SPARSACT_LOG", "verbose")
        .output()
        .unwrap();
    assert_code(&out, 1);
}
