use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ieprot::structure::write_pdb;
use ieprot::synth::{self, ResidueSpec};

fn ieprot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ieprot"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn pdb_text(names: &[&str], torsion: (f64, f64)) -> String {
    let specs: Vec<_> = names.iter().map(|n| ResidueSpec::new(n, torsion)).collect();
    write_pdb(&synth::structure("fixture", vec![synth::build_chain('A', &specs)]))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HELIX_SEQS: [&[&str]; 3] = [
    &["ALA", "LEU", "GLU", "LYS", "ALA", "LEU"],
    &["MET", "ALA", "GLN", "LEU", "ARG", "ALA"],
    &["GLU", "ALA", "LEU", "ALA", "LYS", "SER"],
];
const STRAND_SEQS: [&[&str]; 3] = [
    &["VAL", "THR", "ILE", "VAL", "TYR", "THR"],
    &["ILE", "VAL", "THR", "PHE", "VAL", "SER"],
    &["THR", "TYR", "VAL", "ILE", "THR", "VAL"],
];

/// Preprocessed toy dataset: helices are class 0, strands class 1; the last of each is
/// held out for validation and test.
fn toy_dataset(dir: &Path) -> PathBuf {
    let pdbs = dir.join("pdb");
    std::fs::create_dir_all(&pdbs).unwrap();
    for (i, seq) in HELIX_SEQS.iter().enumerate() {
        std::fs::write(pdbs.join(format!("helix{i}.pdb")), pdb_text(seq, synth::HELIX)).unwrap();
    }
    for (i, seq) in STRAND_SEQS.iter().enumerate() {
        std::fs::write(pdbs.join(format!("strand{i}.pdb")), pdb_text(seq, synth::STRAND)).unwrap();
    }
    let graphs = dir.join("graphs");
    let skeleton = dir.join("skeleton.tsv");
    let out = ieprot(&["preprocess", "--in", s(&pdbs), "--out", s(&graphs), "--manifest", s(&skeleton)]);
    assert!(out.status.success(), "{}", text(&out.stderr));

    let mut rows = String::new();
    for (class, prefix) in ["helix", "strand"].iter().enumerate() {
        for i in 0..3 {
            let split = if i == 2 { "valid" } else { "train" };
            rows.push_str(&format!("graphs/{prefix}{i}.iecg\t{class}\t{split}\n"));
            if i == 2 {
                rows.push_str(&format!("graphs/{prefix}{i}.iecg\t{class}\ttest\n"));
            }
        }
    }
    let manifest = dir.join("data.tsv");
    std::fs::write(&manifest, rows).unwrap();
    std::fs::write(dir.join("data.tsv.labels"), "helix\nstrand\n").unwrap();
    std::fs::write(
        dir.join("tiny.conf"),
        "# small model for tests\nwidth_scale = 1/16\nhead_hidden = 64\nepochs = 3\nbatch_size = 2\n",
    )
    .unwrap();
    manifest
}

fn train_into(dir: &Path, manifest: &Path, out: &str) -> Output {
    ieprot(&[
        "train",
        "--manifest",
        s(manifest),
        "--config",
        s(&dir.join("tiny.conf")),
        "--out",
        s(&dir.join(out)),
        "--seed",
        "11",
        "--workers",
        "1",
    ])
}

#[test]
fn preprocess_single_file() {
    let dir = tempfile::tempdir().unwrap();
    let pdbs = dir.path().join("in");
    std::fs::create_dir_all(&pdbs).unwrap();
    std::fs::write(pdbs.join("dipeptide.pdb"), pdb_text(&["GLY", "ALA"], synth::STRAND)).unwrap();
    let graphs = dir.path().join("out");
    let manifest = dir.path().join("m.tsv");
    let out = ieprot(&["preprocess", "--in", s(&pdbs), "--out", s(&graphs), "--manifest", s(&manifest)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("parsed 1 skipped 0"));
    assert!(graphs.join("dipeptide.iecg").is_file());
    let rows = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(rows.lines().count(), 1);
    assert!(rows.trim_end().ends_with("\t0\ttrain"));

    let out = ieprot(&["inspect", "--graph", s(&graphs.join("dipeptide.iecg"))]);
    assert!(out.status.success());
    let summary = text(&out.stdout);
    assert!(summary.contains("atoms: 9"), "{summary}");
    assert!(summary.contains("level sizes: [9, 5, 2, 1, 1]"), "{summary}");
    assert!(summary.contains("hop caps: covalent 6, hydrogen 6"), "{summary}");
}

#[test]
fn preprocess_skips_corrupt_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let pdbs = dir.path().join("in");
    std::fs::create_dir_all(&pdbs).unwrap();
    std::fs::write(pdbs.join("a.pdb"), pdb_text(&["SER", "GLY", "ALA"], synth::HELIX)).unwrap();
    std::fs::write(pdbs.join("b.pdb"), "ATOM      1  N   ALA A   1     garbage\n").unwrap();
    std::fs::write(pdbs.join("c.pdb"), pdb_text(&["TRP", "PRO"], synth::STRAND)).unwrap();
    let run = |tag: &str| {
        let graphs = dir.path().join(format!("out{tag}"));
        let manifest = dir.path().join(format!("m{tag}.tsv"));
        let out = ieprot(&["preprocess", "--in", s(&pdbs), "--out", s(&graphs), "--manifest", s(&manifest)]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert!(text(&out.stdout).contains("parsed 2 skipped 1"));
        assert!(text(&out.stderr).contains("b.pdb"));
        graphs
    };
    let first = run("1");
    let second = run("2");
    for name in ["a.iecg", "c.iecg"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap());
    }
    assert!(!first.join("b.iecg").exists());
}

#[test]
fn preprocess_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = ieprot(&["preprocess", "--in", s(&missing), "--out", s(dir.path()), "--manifest", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad");
    std::fs::create_dir_all(&bad).unwrap();
    std::fs::write(bad.join("x.pdb"), "HEADER nothing here\n").unwrap();
    let out = ieprot(&["preprocess", "--in", s(&bad), "--out", s(&dir.path().join("o")), "--manifest", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn inspect_usage_errors() {
    let out = ieprot(&["inspect"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("Usage"));
    let out = ieprot(&["inspect", "--graph", "/definitely/not/here.iecg"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_eval_embed_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_dataset(dir.path());

    let out = train_into(dir.path(), &manifest, "run1");
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("seed = 11"), "{stdout}");
    assert!(stdout.contains("num_classes = 2"), "{stdout}");
    let run1 = dir.path().join("run1");
    let log = std::fs::read_to_string(run1.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(run1.join("last.ieck").is_file());
    let best = run1.join("best.ieck");

    let again = train_into(dir.path(), &manifest, "run2");
    assert!(again.status.success());
    assert_eq!(std::fs::read(&best).unwrap(), std::fs::read(dir.path().join("run2/best.ieck")).unwrap());

    let out = ieprot(&["eval", "--manifest", s(&manifest), "--checkpoint", s(&best), "--split", "test"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["split"], "test");
    assert_eq!(metrics["count"], 2);
    let acc = metrics["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(metrics["per_class"][1]["label"], "strand");

    let vectors = dir.path().join("emb.tsv");
    let out = ieprot(&["embed", "--manifest", s(&manifest), "--checkpoint", s(&best), "--out", s(&vectors)]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rows = std::fs::read_to_string(&vectors).unwrap();
    assert_eq!(rows.lines().count(), 8);
    let width = (1024.0f64 / 16.0) as usize;
    for row in rows.lines() {
        let fields: Vec<&str> = row.split('\t').collect();
        assert_eq!(fields.len(), 1 + width);
        assert!(fields[1..].iter().all(|v| v.parse::<f32>().is_ok_and(f32::is_finite)));
    }
    let vectors2 = dir.path().join("emb2.tsv");
    let out = ieprot(&["embed", "--manifest", s(&manifest), "--checkpoint", s(&best), "--out", s(&vectors2), "--split", "test"]);
    assert!(out.status.success());
    let test_rows = std::fs::read_to_string(&vectors2).unwrap();
    assert_eq!(test_rows.lines().count(), 2);
    assert!(rows.ends_with(&test_rows));
}

#[test]
fn train_rejects_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_dataset(dir.path());
    std::fs::write(dir.path().join("tiny.conf"), "width_scale = 1/16\nlearning_speed = 3\n").unwrap();
    let out = train_into(dir.path(), &manifest, "bad");
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("learning_speed"));

    std::fs::write(dir.path().join("tiny.conf"), "epochs = 1\n").unwrap();
    let only_train = dir.path().join("train_only.tsv");
    std::fs::write(&only_train, "graphs/helix0.iecg\t0\ttrain\n").unwrap();
    let out = train_into(dir.path(), &only_train, "bad2");
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("valid"));

    let out = ieprot(&["train", "--manifest", s(&manifest), "--out", s(&dir.path().join("x")), "--set", "epochs"]);
    assert_eq!(out.status.code(), Some(2));
}
