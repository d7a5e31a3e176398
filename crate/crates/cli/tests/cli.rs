//! Subcommands driven through `run_command`.

use std::fs;
use std::path::Path;

use sentiment_cli::run_command;
use sentiment_core::corpus::{ingest, Format, RecordFlag, SentimentLabel};
use sentiment_core::eval::MetricsReport;

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("sentiment").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_for_every_subcommand() {
    assert_eq!(run(&["--help"]), 0);
    for sub in ["ingest", "clean", "translate", "prepare", "annotate-serve", "train", "eval", "report", "reproduce-tables"] {
        assert_eq!(run(&[sub, "--help"]), 0, "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["clean", "--input", "x.jsonl", "--bogus"]), 2);
    assert_eq!(run(&["eval", "--approach", "4", "--synthetic"]), 2);
    assert_eq!(run(&["eval", "--approach", "1"]), 2);
    assert_eq!(run(&["clean", "--input", "x.jsonl", "--case-fold", "sideways"]), 2);
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(run(&["clean", "--input", p(&missing)]), 1);
}

#[test]
fn ingest_clean_translate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    fs::write(
        &raw,
        "id,text,language,label,source,flags\n\
         1,خوب,fa,positive,survey,\n\
         2,,fa,,survey,\n\
         3,\"بد, خیلی\",fa,negative,survey,\n\
         4,نمی‌دانم,fa,,survey,unclear\n",
    )
    .unwrap();
    let dict = dir.path().join("dict.json");
    fs::write(&dict, r#"{"خوب": "good", "بد,": "bad,", "خیلی": "very"}"#).unwrap();
    let ingested = dir.path().join("ingested.jsonl");
    let cleaned = dir.path().join("cleaned.jsonl");
    let translated = dir.path().join("translated.jsonl");
    let cache = dir.path().join("cache.jsonl");

    assert_eq!(run(&["ingest", "--input", p(&raw), "--output", p(&ingested)]), 0);
    assert_eq!(ingest(&ingested, Format::Jsonl).unwrap().len(), 4);
    assert_eq!(run(&["clean", "--input", p(&ingested), "--output", p(&cleaned)]), 0);
    let args = ["translate", "--input", p(&cleaned), "--output", p(&translated), "--backend", "dictionary", "--dict", p(&dict), "--cache", p(&cache)];
    assert_eq!(run(&args), 0);
    let out = ingest(&translated, Format::Jsonl).unwrap();
    assert_eq!(out.iter().map(|r| r.text.as_str()).collect::<Vec<_>>(), ["good", "bad, very"]);
    assert!(out.iter().all(|r| r.language == "en" && r.has_flag(RecordFlag::Translated)));
    assert_eq!(fs::read_to_string(&cache).unwrap().lines().count(), 2);
    let first = fs::read(&translated).unwrap();
    assert_eq!(run(&args), 0);
    assert_eq!(fs::read(&translated).unwrap(), first);
}

#[test]
fn dictionary_backend_without_dict_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, "{\"id\":\"1\",\"text\":\"a\",\"language\":\"fa\"}\n").unwrap();
    assert_eq!(run(&["translate", "--input", p(&input), "--backend", "dictionary"]), 2);
}

#[test]
fn prepare_cleans_then_translates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(
        &input,
        "{\"id\":\"1\",\"text\":\"good day\",\"language\":\"fa\"}\n{\"id\":\"2\",\"text\":\"  \",\"language\":\"fa\"}\n",
    )
    .unwrap();
    let dict = dir.path().join("dict.json");
    fs::write(&dict, r#"{"GOOD": "FINE", "good": "nice"}"#).unwrap();
    let out = dir.path().join("out.jsonl");
    let base = ["prepare", "--input", p(&input), "--output", p(&out), "--backend", "dictionary", "--dict", p(&dict)];
    assert_eq!(run(&base), 0);
    assert_eq!(ingest(&out, Format::Jsonl).unwrap()[0].text, "FINE DAY");
    let mut swapped = base.to_vec();
    swapped.push("--translate-first");
    assert_eq!(run(&swapped), 0);
    assert_eq!(ingest(&out, Format::Jsonl).unwrap()[0].text, "NICE DAY");
}

#[test]
fn train_on_unlabeled_corpus_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(
        &input,
        "{\"id\":\"a\",\"text\":\"GOOD\",\"label\":\"positive\"}\n{\"id\":\"b-unlabeled\",\"text\":\"BAD\"}\n",
    )
    .unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_sentiment"))
        .args(["train", "--input", p(&input), "--checkpoint", p(&dir.path().join("m.bin"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b-unlabeled"));
}

#[test]
fn train_then_score_with_model() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let records = sentiment_core::synth::separable_corpus(40, 1);
    let mut f = fs::File::create(&corpus).unwrap();
    sentiment_core::corpus::write_records(&mut f, &records, Format::Jsonl).unwrap();
    let model = dir.path().join("models/m.bin");
    let history = dir.path().join("history.jsonl");
    let small = ["--d-model", "16", "--heads", "2", "--layers", "1", "--d-ff", "32", "--max-len", "16"];
    let mut args = vec!["train", "--input", p(&corpus), "--checkpoint", p(&model), "--epochs", "3", "--lr", "1e-3", "--warmup-steps", "0", "--history", p(&history), "--per-epoch"];
    args.extend(small);
    assert_eq!(run(&args), 0);
    assert!(model.exists() && model.with_extension("json").exists());
    assert!(dir.path().join("models/m.epoch3.bin").exists());
    let lines: Vec<String> = fs::read_to_string(&history).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("{\"epoch\":1,\"mean_loss\":"));

    let report = dir.path().join("report.json");
    assert_eq!(run(&["eval", "--approach", "1", "--input", p(&corpus), "--model", p(&model), "--output", p(&report)]), 0);
    let r: MetricsReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let cm = r.confusion.reference_negative;
    assert_eq!(cm.true_pos + cm.false_pos + cm.false_neg + cm.true_neg, 80);
}

#[test]
fn eval_is_deterministic_and_report_renders() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["--d-model", "16", "--heads", "2", "--layers", "1", "--d-ff", "32", "--max-len", "16"];
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.json"));
        let mut args = vec!["eval", "--approach", "3", "--seed", "7", "--synthetic", "--output", p(&out)];
        args.extend(small);
        assert_eq!(run(&args), 0);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let r: MetricsReport = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(r.approach.id(), 3);
    assert_eq!(r.confusion.reference_negative.total(), 70);

    let md = dir.path().join("r.md");
    assert_eq!(run(&["report", "--input", p(&dir.path().join("r0.json")), "--report", "md", "--output", p(&md)]), 0);
    let text = fs::read_to_string(&md).unwrap();
    assert!(text.contains("| Approach | Accuracy | Precision | Recall | F1 score |"));
    assert!(text.contains("| Third(data 90-10) |"));
}

#[test]
fn reproduce_tables_writes_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tables.md");
    assert_eq!(run(&["reproduce-tables", "--output", p(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.matches("| Approach | Accuracy | Precision | Recall | F1 score | Max delta |").count(), 3);
    assert!(text.contains("| Third(data 90-10) | 0.823 (0.824) | 0.818 (0.817) | 0.918 (0.918) | 0.865 (0.863) |"));
    assert!(text.contains("0.655"));
}

#[test]
fn labels_survive_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, "{\"id\":\"1\",\"text\":\"ok, fine\",\"label\":\"negative\",\"flags\":[\"translated\"]}\n").unwrap();
    let out = dir.path().join("out.csv");
    assert_eq!(run(&["ingest", "--input", p(&input), "--output", p(&out)]), 0);
    let back = ingest(&out, Format::Csv).unwrap();
    assert_eq!(back[0].label, Some(SentimentLabel::Negative));
    assert_eq!(back[0].text, "ok, fine");
}
