use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slidescreen"))
        .args(args)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["cv", "--help"]), 0);
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    let out = s(&dir.path().join("o"));
    assert_eq!(code(&[]), 64);
    assert_eq!(code(&["cv", "--features", "x.csv", "--out", &out, "--k", "1"]), 64);
    assert_eq!(code(&["synth", "--out", &out, "--noise-rate", "1.5"]), 64);
    assert_eq!(
        code(&[
            "compare",
            "--features",
            "x.csv",
            "--out",
            &out,
            "--classifiers",
            "knn,boost"
        ]),
        64
    );
    assert_eq!(
        code(&["cv", "--features", "x.csv", "--manifest", "m.csv", "--out", &out]),
        64
    );
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_inputs_exit_2_without_writing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        code(&["extract", "--manifest", "/nonexistent/manifest.csv", "--out", &s(&out)]),
        2
    );
    assert_eq!(
        code(&[
            "predict",
            "--model",
            "/nonexistent/model.json",
            "--slide",
            "/nonexistent/s.csv"
        ]),
        2
    );
    assert!(!out.exists());
}

#[test]
fn malformed_manifest_exits_3() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(dir.path().join("a.csv"), "x,y,prob_malignant\n50,50,0.9\n").unwrap();
    std::fs::write(
        &manifest,
        "slide_id,label,predictions_path\ns1,malignant,a.csv\ns1,normal,a.csv\n",
    )
    .unwrap();
    assert_eq!(
        code(&[
            "extract",
            "--manifest",
            &s(&manifest),
            "--out",
            &s(&dir.path().join("o"))
        ]),
        3
    );

    std::fs::write(dir.path().join("bad.csv"), "x,y,prob_malignant\n50,50,1.2\n").unwrap();
    std::fs::write(&manifest, "slide_id,label,predictions_path\ns1,malignant,bad.csv\n").unwrap();
    assert_eq!(
        code(&[
            "extract",
            "--manifest",
            &s(&manifest),
            "--out",
            &s(&dir.path().join("o"))
        ]),
        3
    );
}

#[test]
fn empty_manifest_extracts_nothing_and_cv_fails() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(&manifest, "slide_id,label,predictions_path\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&["extract", "--manifest", &s(&manifest), "--out", &s(&out)]), 0);
    let features = out.join("features.csv");
    assert_eq!(std::fs::read_to_string(&features).unwrap().lines().count(), 1);
    assert_eq!(
        code(&["cv", "--features", &s(&features), "--out", &s(&dir.path().join("cv"))]),
        1
    );
}

#[test]
fn heatmap_of_three_by_three_slide() {
    let dir = TempDir::new().unwrap();
    let slide = dir.path().join("slide.csv");
    let mut text = String::from("x,y,prob_malignant\n");
    for r in 0..3 {
        for c in 0..3 {
            if (r, c) != (1, 1) {
                text += &format!("{},{},0.{}\n", 50 + 100 * c, 50 + 100 * r, 3 * r + c);
            }
        }
    }
    std::fs::write(&slide, text).unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&["heatmap", "--slide", &s(&slide), "--out", &s(&out)]), 0);
    assert_eq!(
        std::fs::read_to_string(out.join("heatmap.csv")).unwrap(),
        "0.0,0.1,0.2\n0.3,,0.5\n0.6,0.7,0.8\n"
    );

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y,prob_malignant\n").unwrap();
    assert_eq!(code(&["heatmap", "--slide", &s(&empty), "--out", &s(&out)]), 0);
    assert_eq!(std::fs::read_to_string(out.join("heatmap.csv")).unwrap(), "");
}

#[test]
fn synth_extract_train_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        code(&[
            "synth",
            "--out",
            &s(&data),
            "--n-slides",
            "10",
            "--grid",
            "12",
            "--seed",
            "4"
        ]),
        0
    );
    let manifest = data.join("manifest.csv");
    let feat = dir.path().join("feat");
    assert_eq!(
        code(&[
            "extract",
            "--manifest",
            &s(&manifest),
            "--out",
            &s(&feat),
            "--jobs",
            "2"
        ]),
        0
    );
    let features = feat.join("features.csv");
    assert_eq!(std::fs::read_to_string(&features).unwrap().lines().count(), 21);

    let model_dir = dir.path().join("model");
    let train = [
        "train",
        "--features",
        &s(&features),
        "--out",
        &s(&model_dir),
        "--epochs",
        "100",
        "--hidden",
        "16",
    ];
    assert_eq!(code(&train), 0);
    let model = model_dir.join("model.json");
    let out = run(&[
        "predict",
        "--model",
        &s(&model),
        "--slide",
        &s(&data.join("slides/mal_0000.csv")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let (label, p) = stdout.trim().split_once('\t').unwrap();
    assert_eq!(label, "malignant");
    assert!(p.parse::<f64>().unwrap() >= 0.5);

    // A corrupt model file is an I/O-class failure.
    std::fs::write(&model, "{not json").unwrap();
    assert_eq!(
        code(&[
            "predict",
            "--model",
            &s(&model),
            "--slide",
            &s(&data.join("slides/mal_0000.csv"))
        ]),
        2
    );
}

#[test]
fn compare_subset_writes_table() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    assert_eq!(
        code(&["synth", "--out", &s(&data), "--n-slides", "10", "--grid", "12"]),
        0
    );
    let out = dir.path().join("cmp");
    let args = [
        "compare",
        "--manifest",
        &s(&data.join("manifest.csv")),
        "--out",
        &s(&out),
        "--classifiers",
        "knn,rf",
        "--k",
        "3",
    ];
    assert_eq!(code(&args), 0);
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let models: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["knn", "rf"]);
    assert_eq!(
        std::fs::read_to_string(out.join("folds.csv")).unwrap().lines().count(),
        21
    );
}
