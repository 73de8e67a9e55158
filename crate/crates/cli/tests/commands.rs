use std::path::{Path, PathBuf};
use std::process::Command;

use mgturbo_cli::compare::{convergence, quantile};
use mgturbo_cli::config::{self, Flags, RunConfig};
use mgturbo_cli::pca::{fix_sign, project_groups, Pca};
use mgturbo_cli::run::{cmd_run, seed_dir};
use mgturbo_cli::trace::{load_groups, read_trace, trace_header, RESTARTS_FILE, TRACE_FILE};
use mgturbo_cli::CliError;

fn run_config(method: &str, extra: &[&str], out: &Path) -> RunConfig {
    let f = Flags {
        method: Some(method.into()),
        problem: Some("synthetic:dim=4,response=saturating,noise=0.05,instance_seed=3".into()),
        budget: Some(24),
        init_size: Some(8),
        seeds: Some(vec![1, 2]),
        out: Some(out.to_path_buf()),
        overrides: extra.iter().map(|s| s.to_string()).collect(),
        ..Flags::default()
    };
    config::load(None, &f).unwrap().config
}

#[test]
fn run_writes_one_full_trace_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config("turbo", &["acquisition=\"adaptive\""], &dir.path().join("turbo"));
    let summary = cmd_run(&cfg).unwrap();
    assert_eq!(summary.runs.len(), 2);
    for &seed in &[1u64, 2] {
        let sd = seed_dir(&cfg.out, seed);
        let trace = read_trace(&sd.join(TRACE_FILE)).unwrap();
        assert_eq!(trace.rows.len(), 24);
        assert_eq!(trace.seed, Some(seed));
        assert_eq!(trace.dim(), 4);
        assert_eq!(trace.rows.iter().filter(|r| r.phase == "init").count(), 8);
        let mut best = f64::INFINITY;
        for (i, r) in trace.rows.iter().enumerate() {
            assert_eq!(r.eval_index, i + 1);
            best = best.min(r.y);
            assert_eq!(r.best_so_far, best);
        }
        let s: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sd.join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["best_y"].as_f64(), Some(best));
        assert_eq!(s["evaluations"], 24);
        assert_eq!(s["config"]["trust"]["tau_fail"], 5);
        assert!(s["restart_counts"].get("random").is_some());
    }
    assert!(cfg.out.join("summary.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["bo", "mg_turbo", "ga", "random"] {
        let a = run_config(method, &[], &dir.path().join(format!("{method}_a")));
        let b = run_config(method, &[], &dir.path().join(format!("{method}_b")));
        cmd_run(&a).unwrap();
        cmd_run(&b).unwrap();
        for file in [TRACE_FILE, RESTARTS_FILE] {
            let x = std::fs::read(seed_dir(&a.out, 2).join(file)).unwrap();
            let y = std::fs::read(seed_dir(&b.out, 2).join(file)).unwrap();
            assert_eq!(x, y, "{method} {file}");
        }
    }
}

#[test]
fn parallel_seeds_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_config("multi_turbo", &[], &dir.path().join("seq"));
    let b = run_config("multi_turbo", &["parallel_seeds=true"], &dir.path().join("par"));
    cmd_run(&a).unwrap();
    cmd_run(&b).unwrap();
    for seed in [1, 2] {
        let x = std::fs::read(seed_dir(&a.out, seed).join(TRACE_FILE)).unwrap();
        let y = std::fs::read(seed_dir(&b.out, seed).join(TRACE_FILE)).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn mg_turbo_restarts_are_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let f = Flags {
        method: Some("mg_turbo".into()),
        problem: Some("standard:function=rastrigin,dim=3".into()),
        budget: Some(150),
        init_size: Some(10),
        seeds: Some(vec![5]),
        out: Some(dir.path().join("mg")),
        overrides: vec!["trust.tau_fail=2".into()],
        ..Flags::default()
    };
    let cfg = config::load(None, &f).unwrap().config;
    let summary = cmd_run(&cfg).unwrap();
    let run = &summary.runs[0];
    let total: usize = run.restart_counts.values().sum();
    assert!(total > 0);
    let mut reader = csv::Reader::from_path(seed_dir(&cfg.out, 5).join(RESTARTS_FILE)).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), total);
    for r in &rows {
        assert!(["memory_basin", "global_best"].contains(&&r[2]), "{r:?}");
        if &r[2] == "memory_basin" {
            assert!(!r[3].is_empty());
        }
    }
    let basins = std::fs::read_to_string(seed_dir(&cfg.out, 5).join("basins.json")).unwrap();
    let snaps: serde_json::Value = serde_json::from_str(&basins).unwrap();
    assert!(!snaps.as_array().unwrap().is_empty());
}

fn python_problem(script: &str) -> String {
    let escaped = script
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n");
    format!("external:command=[\"python3\",\"-c\",\"{escaped}\"],lower=[0,0],upper=[1,1],timeout=10")
}

#[test]
fn objective_failure_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let script = "import json,sys\nx=json.loads(sys.stdin.readline())['x']\nif x[0]>0.5: sys.exit(2)\nprint(json.dumps({'y': x[0]+x[1]}))";
    let f = Flags {
        method: Some("turbo".into()),
        problem: Some(python_problem(script)),
        budget: Some(20),
        init_size: Some(6),
        seeds: Some(vec![0]),
        out: Some(dir.path().join("ext")),
        ..Flags::default()
    };
    let cfg = config::load(None, &f).unwrap().config;
    let err = cmd_run(&cfg).unwrap_err();
    assert!(matches!(err, CliError::Objective(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    let trace = read_trace(&seed_dir(&cfg.out, 0).join(TRACE_FILE)).unwrap();
    assert!(trace.rows.len() < 6);
    let s: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(seed_dir(&cfg.out, 0).join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(s["status"], "failed");
    assert_eq!(s["evaluations"], trace.rows.len());
    assert!(cfg.out.join("summary.json").exists());
}

/// Writes a minimal trace whose running best follows `bests`.
fn write_trace(dir: &Path, bests: &[f64], init: usize, dim: usize) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(TRACE_FILE);
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(trace_header(dim)).unwrap();
    for (i, b) in bests.iter().enumerate() {
        let phase = if i < init { "init" } else { "optimize" };
        let mut row = vec![(i + 1).to_string(), phase.into(), String::new(), b.to_string(), b.to_string()];
        row.extend((0..dim).map(|j| ((i * 7 + j * 3) % 5).to_string()));
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    path
}

#[test]
fn quantiles_interpolate_linearly() {
    let v = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(quantile(&v, 0.5), 3.0);
    assert_eq!(quantile(&v, 0.25), 2.0);
    assert_eq!(quantile(&v, 0.75), 4.0);
    assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
    assert_eq!(quantile(&[7.0], 0.9), 7.0);
}

#[test]
fn compare_reports_median_and_iqr() {
    let dir = tempfile::tempdir().unwrap();
    let group = dir.path().join("m");
    for (s, last) in [3.0, 1.0, 5.0, 2.0, 4.0].iter().enumerate() {
        write_trace(&group.join(format!("seed_{s}")), &[9.0, 8.0, *last], 1, 2);
    }
    let same = dir.path().join("same");
    for s in 0..10 {
        write_trace(&same.join(format!("seed_{s}")), &[3.0, 2.0, 1.0], 1, 2);
    }
    let groups = load_groups(&[group, same]).unwrap();
    let rows = convergence(&groups, false).unwrap();
    assert_eq!(rows.len(), 6);
    let last = &rows[2];
    assert_eq!((last.group.as_str(), last.eval_index, last.n), ("m", 3, 5));
    assert_eq!((last.median, last.q1, last.q3), (3.0, 2.0, 4.0));
    assert!(rows[3..].iter().all(|r| r.iqr() == 0.0));

    let filtered = convergence(&groups, true).unwrap();
    assert_eq!(filtered.len(), 4);
    assert!(filtered.iter().all(|r| r.eval_index > 1));

    let mut out = Vec::new();
    mgturbo_cli::compare::write_table(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("group,eval_index,n,median,q1,q3,iqr\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn compare_rejects_mismatched_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    write_trace(&g.join("seed_0"), &[3.0, 2.0, 1.0], 1, 2);
    write_trace(&g.join("seed_1"), &[3.0, 2.0], 1, 2);
    let groups = load_groups(&[g]).unwrap();
    let err = convergence(&groups, false).unwrap_err();
    assert!(matches!(err, CliError::Analysis(_)));
    assert_eq!(err.exit_code(), 4);
    assert!(matches!(load_groups(&[dir.path().join("missing")]), Err(CliError::Analysis(_))));
}

/// Cyclic Jacobi eigenvalue iteration for a small symmetric matrix.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| fix_sign((0..n).map(|k| v[k][i]).collect())).collect();
    (values, vectors)
}

#[test]
fn pca_matches_jacobi_on_hand_points() {
    let pts = vec![
        vec![2.0, 0.0, 1.0],
        vec![0.0, 1.0, 3.0],
        vec![1.0, 3.0, 0.0],
        vec![4.0, 2.0, 2.0],
    ];
    let mean = [7.0 / 4.0, 6.0 / 4.0, 6.0 / 4.0];
    let mut cov = vec![vec![0.0; 3]; 3];
    for p in &pts {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / 3.0;
            }
        }
    }
    let (values, vectors) = jacobi_eigen(cov);
    let fit = Pca::fit(&pts).unwrap();
    let total: f64 = values.iter().sum();
    for k in 0..3 {
        assert!((fit.eigenvalues[k] - values[k]).abs() < 1e-8);
        assert!((fit.explained_ratio[k] - values[k] / total).abs() < 1e-8);
        for j in 0..3 {
            assert!((fit.components[k][j] - vectors[k][j]).abs() < 1e-8);
        }
    }
    for p in &pts {
        for k in 0..2 {
            let expected: f64 = (0..3).map(|j| vectors[k][j] * (p[j] - mean[j])).sum();
            assert!((fit.project(p, k) - expected).abs() < 1e-8);
        }
    }
}

#[test]
fn pca_on_a_line_has_one_component() {
    let pts: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            (0..14).map(|j| 0.3 + t * (j as f64 - 6.0) * 0.1 + 0.01 * j as f64).collect()
        })
        .collect();
    let fit = Pca::fit(&pts).unwrap();
    assert!((fit.explained_ratio[0] - 1.0).abs() < 1e-9);
    assert!(fit.explained_ratio[1] < 1e-9);
    assert!(fit.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
    assert!(fit.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
}

#[test]
fn pca_rejects_degenerate_inputs() {
    let same = vec![vec![1.0, 2.0]; 5];
    assert!(matches!(Pca::fit(&same), Err(CliError::Analysis(_))));
    let two = vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 2.0]];
    assert!(matches!(Pca::fit(&two), Err(CliError::Analysis(_))));
    let one_dim = vec![vec![1.0], vec![2.0], vec![3.0]];
    assert!(matches!(Pca::fit(&one_dim), Err(CliError::Analysis(_))));
}

#[test]
fn pca_projects_all_traces_and_marks_bests() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    write_trace(&a.join("seed_0"), &[3.0, 1.0, 2.0, 1.0], 1, 3);
    write_trace(&b.join("seed_4"), &[5.0, 4.0, 0.5], 1, 3);
    let groups = load_groups(&[a, b]).unwrap();
    let (fit, points) = project_groups(&groups).unwrap();
    assert_eq!(points.len(), 7);
    assert!(fit.explained_ratio[0] >= fit.explained_ratio[1]);
    let bests: Vec<(&str, usize)> = points
        .iter()
        .filter(|p| p.is_best)
        .map(|p| (p.method.as_str(), p.eval_index))
        .collect();
    assert_eq!(bests, vec![("a", 2), ("b", 3)]);
    assert_eq!(points[4].seed, Some(4));

    let c = dir.path().join("c");
    write_trace(&c.join("seed_0"), &[1.0, 2.0, 3.0], 1, 2);
    let groups = load_groups(&[dir.path().join("a"), c]).unwrap();
    assert!(project_groups(&groups).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mgturbo");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();

    let ok = status(&[
        "run", "--method", "ga", "--acquisition", "thompson", "--budget", "25", "--seeds", "1,2",
        "--problem", "synthetic:dim=3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stderr).contains("warning"));

    let bad = status(&["run", "--method", "ga", "--problem", "synthetic:dim=3", "--override", "ga.bogus=1"]);
    assert_eq!(bad.status.code(), Some(2));

    let fail = status(&[
        "run", "--method", "random", "--budget", "5", "--seeds", "0",
        "--problem", "external:command=[\"python3\",\"-c\",\"import sys; sys.exit(1)\"],lower=[0,0],upper=[1,1]",
        "--out", dir.path().join("f").to_str().unwrap(),
    ]);
    assert_eq!(fail.status.code(), Some(3));

    let cmp = status(&["compare", out.to_str().unwrap(), "--optimize-only"]);
    assert_eq!(cmp.status.code(), Some(0));
    let text = String::from_utf8_lossy(&cmp.stdout);
    assert_eq!(text.lines().count(), 1 + 25 - 20);

    let missing = status(&["compare", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(4));

    let pca_out = dir.path().join("pca");
    let pca = status(&["pca", out.to_str().unwrap(), "--out", pca_out.to_str().unwrap()]);
    assert_eq!(pca.status.code(), Some(0));
    assert!(pca_out.join("projection.csv").exists());
    assert!(pca_out.join("explained_variance.csv").exists());
}
