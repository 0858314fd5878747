use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use interneg::pipeline::Report;
use interneg::store::EmbeddingFile;
use interneg::synth::{read_meta, WorldSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_interneg"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn interneg");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed");
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a small world and returns (tempdir, manifest path).
fn world() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec = WorldSpec {
        dim: 16,
        classes: 4,
        images_per_class: 16,
        corpus_far: 60,
        corpus_trap: 12,
        n_test_id: 100,
        n_test_ood: 100,
        ..WorldSpec::reference()
    };
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let fx = dir.path().join("fx");
    ok(&["synth", "--config", s(&spec_path), "--out", s(&fx)]);
    (dir, fx.join("manifest.json"))
}

fn report(path: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_is_reproducible_from_echoed_config() {
    let (dir, manifest) = world();
    let out = dir.path().join("eval");
    let args = [
        "eval",
        "--profile",
        "reference",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
    ];
    ok(&args);
    let first = fs::read(out.join("report.json")).unwrap();
    ok(&args);
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());
    assert!(out.join("report.csv").exists());
    assert_eq!(
        fs::read_to_string(out.join("taxonomy.tsv"))
            .unwrap()
            .lines()
            .count(),
        22
    );

    let echoed = dir.path().join("echo.json");
    fs::write(
        &echoed,
        serde_json::to_string(&report(&out.join("report.json")).config).unwrap(),
    )
    .unwrap();
    ok(&["eval", "--config", s(&echoed)]);
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());
}

#[test]
fn saved_selection_matches_fresh_selection() {
    let (dir, manifest) = world();
    let sel = dir.path().join("sel");
    ok(&[
        "select",
        "--profile",
        "reference",
        "--manifest",
        s(&manifest),
        "--out",
        s(&sel),
    ]);
    assert!(sel.join("proxies.emb").exists());
    assert_eq!(
        fs::read_to_string(sel.join("base_distances.txt"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let fresh = dir.path().join("fresh");
    let saved = dir.path().join("saved");
    ok(&[
        "eval",
        "--profile",
        "reference",
        "--manifest",
        s(&manifest),
        "--out",
        s(&fresh),
    ]);
    ok(&[
        "eval",
        "--profile",
        "reference",
        "--manifest",
        s(&manifest),
        "--out",
        s(&saved),
        "--negatives",
        s(&sel.join("negatives.emb")),
    ]);
    let (a, b) = (
        report(&fresh.join("report.json")),
        report(&saved.join("report.json")),
    );
    assert_eq!(a.selected_negatives, b.selected_negatives);
    assert!(
        (a.auroc - b.auroc).abs() < 1e-6,
        "{} vs {}",
        a.auroc,
        b.auroc
    );
}

#[test]
fn intra_selection_contains_traps_and_inter_does_not() {
    let (dir, manifest) = world();
    let traps = read_meta(manifest.parent().unwrap()).unwrap().trap_indices;
    let selected = |mode: &str| -> Vec<usize> {
        let out = dir.path().join(mode);
        ok(&[
            "select",
            "--mode",
            mode,
            "--manifest",
            s(&manifest),
            "--out",
            s(&out),
        ]);
        fs::read_to_string(out.join("negatives.tsv"))
            .unwrap()
            .lines()
            .map(|l| l.split('\t').next().unwrap().parse().unwrap())
            .collect()
    };
    assert!(!selected("inter").iter().any(|i| traps.contains(i)));
    assert!(selected("intra").iter().any(|i| traps.contains(i)));
}

#[test]
fn score_stream_dumps_pool() {
    let (dir, manifest) = world();
    let out = dir.path().join("score");
    let pool = dir.path().join("pool").join("pool.emb");
    ok(&[
        "score",
        "--profile",
        "reference",
        "--stream",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
        "--dump-pool",
        s(&pool),
        "--threads",
        "2",
    ]);
    let tsv = fs::read_to_string(out.join("scores.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 201);
    let dumped = EmbeddingFile::read(&pool).unwrap();
    assert!(dumped.count() > 0 && dumped.count() <= 2000);
    let side = fs::read_to_string(pool.with_extension("tsv")).unwrap();
    assert_eq!(side.lines().count(), dumped.count());
}

#[test]
fn no_negatives_no_stream_gives_chance_auroc() {
    let (dir, manifest) = world();
    let out = dir.path().join("empty");
    ok(&[
        "select",
        "--m",
        "0",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
    ]);
    assert_eq!(fs::metadata(out.join("negatives.emb")).unwrap().len(), 16);
    ok(&[
        "eval",
        "--m",
        "0",
        "--no-stream",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
    ]);
    assert_eq!(report(&out.join("report.json")).auroc, 0.5);
}

#[test]
fn imbalance_writes_one_report_per_ratio() {
    let (dir, manifest) = world();
    let out = dir.path().join("imb");
    ok(&[
        "imbalance",
        "--profile",
        "reference",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
        "--ratios",
        "1:10,1:1,10:1",
    ]);
    for stem in ["1to10", "1to1", "10to1"] {
        assert!(out
            .join("imbalance")
            .join(format!("report-{stem}.json"))
            .exists());
    }
    let r = report(&out.join("imbalance").join("report-1to10.json"));
    assert_eq!((r.n_id, r.n_ood), (10, 100));
    assert_eq!(
        fs::read_to_string(out.join("imbalance").join("index.tsv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn exit_codes() {
    let (dir, manifest) = world();
    let m = s(&manifest);
    let out = dir.path().join("x");
    let o = s(&out);
    assert_eq!(
        code(&[
            "eval",
            "--manifest",
            "/nonexistent/manifest.json",
            "--out",
            o
        ]),
        3
    );
    assert_eq!(
        code(&["eval", "--manifest", m, "--beta=1.5", "--out", o]),
        2
    );
    assert_eq!(code(&["eval", "--manifest", m, "--tau=0", "--out", o]), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"m\": \"many\"}").unwrap();
    assert_eq!(code(&["eval", "--config", s(&bad)]), 2);
    assert_eq!(
        code(&[
            "imbalance",
            "--manifest",
            m,
            "--ratios",
            "1000:1",
            "--out",
            o
        ]),
        3
    );
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["invert-test", "--dim", "16", "--cases", "5"]), 0);
}
