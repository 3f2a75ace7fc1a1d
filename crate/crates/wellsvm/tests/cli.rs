use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

fn wellsvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wellsvm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(dir: &tempfile::TempDir, name: &str) -> (PathBuf, String) {
    let p = dir.path().join(name);
    let s = p.display().to_string();
    (p, s)
}

#[test]
fn train_writes_model_and_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (model, m) = path(&dir, "m.json");
    let (trace, t) = path(&dir, "trace.csv");
    let o = wellsvm(&[
        "train",
        "--task",
        "ssl",
        "--data",
        &data("two_gaussians.txt"),
        "--model",
        &m,
        "--out",
        &t,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&model).unwrap().contains("\"wellsvm-model\""));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,objective,ws_size,violation_margin,seconds"));
    let objs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!objs.is_empty());
    assert!(objs.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{objs:?}");
}

#[test]
fn eval_and_predict_use_the_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let (_, m) = path(&dir, "m.json");
    let (report, r) = path(&dir, "report.csv");
    let (pred, p) = path(&dir, "pred.csv");
    assert_eq!(
        code(&wellsvm(&[
            "train",
            "--task",
            "ssl",
            "--data",
            &data("two_gaussians.txt"),
            "--model",
            &m
        ])),
        0
    );
    let o = wellsvm(&[
        "eval",
        "--model",
        &m,
        "--data",
        &data("two_gaussians_test.txt"),
        "--out",
        &r,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("task,metric,runs,mean,std,values\n"));
    let acc: f64 = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(acc >= 0.9, "{csv}");
    assert_eq!(
        code(&wellsvm(&[
            "predict",
            "--model",
            &m,
            "--data",
            &data("two_gaussians_test.txt"),
            "--out",
            &p
        ])),
        0
    );
    assert_eq!(std::fs::read_to_string(&pred).unwrap().lines().count(), 201);
}

#[test]
fn bags_train_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (_, m) = path(&dir, "m.json");
    assert_eq!(
        code(&wellsvm(&[
            "train",
            "--task",
            "mil",
            "--data",
            &data("bags.txt"),
            "--model",
            &m
        ])),
        0
    );
    let o = wellsvm(&["predict", "--model", &m, "--data", &data("bags.txt")]);
    assert_eq!(code(&o), 0);
    assert!(!o.stdout.is_empty());
}

#[test]
fn training_is_repeatable_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, sa) = path(&dir, "a.json");
    let (b, sb) = path(&dir, "b.json");
    for m in [&sa, &sb] {
        let args = [
            "train",
            "--task",
            "clustering",
            "--seed",
            "4",
            "--data",
            &data("two_gaussians_test.txt"),
            "--model",
            m,
        ];
        assert_eq!(code(&wellsvm(&args)), 0);
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (_, m) = path(&dir, "m.json");
    assert_eq!(code(&wellsvm(&["--help"])), 0);
    assert_eq!(code(&wellsvm(&["train", "--bogus"])), 1);
    assert_eq!(
        code(&wellsvm(&[
            "train",
            "--task",
            "ssl",
            "--data",
            "/nonexistent/x.txt",
            "--model",
            &m
        ])),
        1
    );
    let capped = wellsvm(&[
        "train",
        "--task",
        "ssl",
        "--max-outer-iters",
        "1",
        "--data",
        &data("two_gaussians.txt"),
        "--model",
        &m,
    ]);
    assert_eq!(code(&capped), 2);
    let (bad, b) = path(&dir, "bad.json");
    std::fs::write(bad, "{\"format\": \"other\"}").unwrap();
    assert_eq!(
        code(&wellsvm(&[
            "predict",
            "--model",
            &b,
            "--data",
            &data("two_gaussians.txt")
        ])),
        1
    );
}

#[test]
fn verify_reports_passing_lines() {
    let o = wellsvm(&["verify", "--repeats", "6"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{out}");
}
