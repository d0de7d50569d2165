use std::path::Path;
use std::process::{Command, Output};

use clap::CommandFactory;
use icd_notes::cli::Cli;
use tempfile::TempDir;

const SUBCOMMANDS: [&str; 9] = [
    "ingest",
    "stats",
    "build-vocab",
    "train",
    "evaluate",
    "predict",
    "gen-synthetic",
    "report",
    "experiment",
];

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icd-notes"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Tiny run flags: small enough for a debug-speed smoke test.
const TINY: [&str; 14] = [
    "--max-len", "80", "--embedding-dim", "8", "--filters", "4", "--hidden-dim", "8", "--attention-dim", "4",
    "--dropout", "0", "--batch-size", "8",
];

fn synthetic(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["gen-synthetic", "--output", name, "--max-words", "60"];
    args.extend_from_slice(extra);
    if !extra.contains(&"--seed") {
        args.extend(["--seed", "1"]);
    }
    let o = run(&args, dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--corpus", "syn.jsonl", "--out-dir", out, "--seed", "3"];
    args.extend_from_slice(&TINY);
    args.extend_from_slice(extra);
    run(&args, dir)
}

#[test]
fn every_subcommand_has_help() {
    let tmp = TempDir::new().unwrap();
    for sub in SUBCOMMANDS {
        let o = run(&[sub, "--help"], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{sub} --help");
        assert!(stdout(&o).contains("Usage:"), "{sub} --help prints usage");
    }
    let o = run(&["--help"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    for sub in SUBCOMMANDS {
        assert!(stdout(&o).contains(sub), "top-level help lists {sub}");
    }
}

#[test]
fn every_flag_is_documented() {
    let cmd = Cli::command();
    for sub in cmd.get_subcommands() {
        for arg in sub.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            assert!(arg.get_help().is_some(), "{} --{id} has no help text", sub.get_name());
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&[], tmp.path()).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], tmp.path()).status.code(), Some(1));
    let o = run(&["stats", "--corpus", "x", "--bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["gen-synthetic", "--output", "x", "--num-classes", "18"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn ingest_cases() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "empty.jsonl", "");
    let o = run(&["ingest", "--input", "empty.jsonl", "--output", "out.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no records"), "{}", stderr(&o));

    write(
        d,
        "three.jsonl",
        concat!(
            r#"{"note_id":"a","text":"Chest pain.","codes":["4280"]}"#, "\n",
            r#"{"note_id":"b","text":"Fever","codes":["038.9","V4581"]}"#, "\n",
            r#"{"note_id":"c","text":"","codes":[]}"#, "\n",
        ),
    );
    let o = run(&["ingest", "--input", "three.jsonl", "--output", "out.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("notes: 3"));
    assert!(stdout(&o).contains("codes: 3"));
    let out = read(d, "out.jsonl");
    assert_eq!(out.lines().count(), 3);
    assert!(out.contains("chest pain ."));
    assert!(out.contains("\"428.0\""));

    write(d, "notes.csv", "note_id,text,codes\nn1,\"BP 120/80, stable\",4280;401.9\n");
    let o = run(&["ingest", "--input", "notes.csv", "--output", "csv.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("codes: 2"));

    write(d, "dup.jsonl", "{\"note_id\":\"a\",\"text\":\"x\"}\n{\"note_id\":\"a\",\"text\":\"y\"}\n");
    let o = run(&["ingest", "--input", "dup.jsonl", "--output", "o.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    write(d, "broken.jsonl", "{\"note_id\":\"a\",\"text\":\"x\"}\n{\"note_id\":\n");
    let o = run(&["ingest", "--input", "broken.jsonl", "--output", "o.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn gen_synthetic_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "a.jsonl", &["--num-notes", "50"]);
    synthetic(d, "b.jsonl", &["--num-notes", "50"]);
    assert_eq!(read(d, "a.jsonl"), read(d, "b.jsonl"));
    synthetic(d, "c.jsonl", &["--num-notes", "50", "--seed", "2"]);
    assert_ne!(read(d, "a.jsonl"), read(d, "c.jsonl"));
    write(d, "spec.toml", "num_notes = 7\nnum_classes = 3\n");
    let o = run(&["gen-synthetic", "--spec", "spec.toml", "--output", "s.jsonl", "--num-notes", "9"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read(d, "s.jsonl").lines().count(), 9, "flags override the spec file");
}

#[test]
fn stats_and_vocab_outputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "syn.jsonl", &["--num-notes", "40"]);
    let o = run(
        &["stats", "--corpus", "syn.jsonl", "--histogram", "h.csv", "--penetration", "p.csv", "--bucket-width", "25"],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(read(d, "h.csv").starts_with("length_bucket,count\n"));
    let pen = read(d, "p.csv");
    assert!(pen.starts_with("class,count,fraction\n"));
    assert_eq!(pen.lines().count(), 18);
    let o = run(&["build-vocab", "--corpus", "syn.jsonl", "--output", "vocab.txt"], d);
    assert_eq!(o.status.code(), Some(0));
    let vocab = read(d, "vocab.txt");
    assert!(vocab.starts_with("<pad>\n<unk>\n<num>\n"));
}

#[test]
fn report_tables() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    std::fs::create_dir(d.join("empty")).unwrap();
    let o = run(&["report", "--results-dir", "empty", "--out-dir", "rep"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        read(d, "rep/results_table.csv"),
        "variant,label_mode,records,epochs,threshold,precision,recall,f1\n"
    );

    std::fs::create_dir_all(d.join("runs/one")).unwrap();
    write(
        d,
        "runs/one/result.csv",
        "variant,label_mode,records,epochs,threshold,precision,recall,f1\ncnn,level1,100,5,0.30,0.500000,0.400000,0.444444\n",
    );
    synthetic(d, "syn.jsonl", &["--num-notes", "30"]);
    let o = run(&["report", "--results-dir", "runs", "--out-dir", "rep2", "--corpus", "syn.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = read(d, "rep2/results_table.csv");
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("cnn,level1,100,5,0.30"));
    assert!(d.join("rep2/penetration.csv").exists());
    assert!(d.join("rep2/length_histogram.csv").exists());
}

#[test]
fn train_evaluate_predict_round_trip() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "syn.jsonl", &["--num-notes", "60", "--num-classes", "4"]);
    let o = train(d, "run", &["--epochs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["bundle.json", "model.ckpt", "history.csv", "result.csv", "result_val.csv"] {
        assert!(d.join("run").join(f).exists(), "{f} written");
    }
    assert_eq!(read(d, "run/history.csv").lines().count(), 3);

    // Same flags, same bytes.
    let o = train(d, "again", &["--epochs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["bundle.json", "model.ckpt", "history.csv", "result.csv", "result_val.csv"] {
        assert_eq!(std::fs::read(d.join("run").join(f)).unwrap(), std::fs::read(d.join("again").join(f)).unwrap(), "{f}");
    }

    let o = run(&["evaluate", "--run", "run", "--corpus", "syn.jsonl", "--output", "m.csv", "--per-class", "pc.csv"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = read(d, "m.csv");
    assert!(m.starts_with("partition,threshold,tp,fp,fn,precision,recall,f1\ntest,"));
    // The evaluated test row agrees with the one written at training time.
    let f1_eval = m.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_owned();
    let f1_train = read(d, "run/result.csv").lines().nth(1).unwrap().rsplit(',').next().unwrap().to_owned();
    assert_eq!(f1_eval, f1_train);
    assert_eq!(read(d, "pc.csv").lines().count(), 18);

    write(
        d,
        "new.jsonl",
        "{\"note_id\":\"empty\",\"text\":\"\"}\n{\"note_id\":\"pad\",\"text\":\"<num> zzzunseen\"}\n",
    );
    let o = run(&["predict", "--run", "run", "--input", "new.jsonl", "--output", "pred.jsonl"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let preds: Vec<serde_json::Value> = read(d, "pred.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(preds.len(), 2);
    assert_eq!(preds[0]["note_id"], "empty");
    assert!(preds[0]["codes"].is_array());

    let o = run(&["evaluate", "--run", "run", "--corpus", "syn.jsonl", "--output", "m.csv", "--partition", "dev"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_refuses_missing_or_mismatched_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "syn.jsonl", &["--num-notes", "30", "--num-classes", "3"]);
    let o = train(d, "run", &["--epochs", "1", "--variant", "lstm"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bundle = read(d, "run/bundle.json");
    write(d, "run/bundle.json", &bundle.replace("\"lstm_hidden_dim\": 8", "\"lstm_hidden_dim\": 9"));
    let o = run(&["evaluate", "--run", "run", "--corpus", "syn.jsonl", "--output", "m.csv"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not match"), "{}", stderr(&o));
    assert!(!d.join("m.csv").exists());

    write(d, "run/bundle.json", &bundle);
    std::fs::remove_file(d.join("run/model.ckpt")).unwrap();
    let o = run(&["evaluate", "--run", "run", "--corpus", "syn.jsonl", "--output", "m.csv"], d);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("model.ckpt"), "{}", stderr(&o));
    assert!(stderr(&o).contains("not found"), "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "syn.jsonl", &["--num-notes", "30", "--num-classes", "3"]);
    write(d, "run.toml", "variant = \"baseline\"\nepochs = 1\n[train]\nbatch_size = 4\n");
    let o = run(&["train", "--config", "run.toml", "--corpus", "syn.jsonl", "--out-dir", "b", "--epochs", "7"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = read(d, "b/result.csv");
    assert!(row.lines().nth(1).unwrap().starts_with("baseline,level1,30,7,"), "{row}");
    assert!(!d.join("b/model.ckpt").exists());

    write(d, "bad.toml", "varient = \"cnn\"\n");
    let o = run(&["train", "--config", "bad.toml", "--corpus", "syn.jsonl", "--out-dir", "c"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(!d.join("c").exists(), "nothing written on a config error");
}

#[test]
fn cnn_memorizes_small_noiseless_corpus() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synthetic(d, "syn.jsonl", &["--num-notes", "64", "--num-classes", "4", "--noise", "0"]);
    let o = run(
        &[
            "train", "--corpus", "syn.jsonl", "--out-dir", "run", "--seed", "1", "--epochs", "40", "--fixed-epochs",
            "--max-len", "200", "--embedding-dim", "16", "--filters", "16", "--dropout", "0", "--batch-size", "8",
            "--learning-rate", "0.01", "--l2-lambda", "0",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["evaluate", "--run", "run", "--corpus", "syn.jsonl", "--partition", "train", "--output", "m.csv"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f1: f64 = read(d, "m.csv").lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(f1 >= 0.95, "train F1 {f1}");
}
