use std::path::Path;
use std::process::{Command, Output};

use midas::core::fixtures::{cue_corpus, toy_examples};
use serde_json::{json, Value};

fn midas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midas")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = midas(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = midas(dir, args);
    let err = String::from_utf8(out.stderr).unwrap();
    (out.status.code().unwrap(), err)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn toy_file(dir: &Path, name: &str, n: usize, seed: u64) {
    let lines: Vec<String> = toy_examples(n, seed)
        .into_iter()
        .enumerate()
        .map(|(i, (input, tags))| json!({ "id": format!("x{i}"), "input": input, "labels": tags }).to_string())
        .collect();
    write(dir, name, &(lines.join("\n") + "\n"));
}

const RAW: &str = r#"{"id":"a","turns":[{"speaker":"machine","text":"Hi! What do you want to talk about?"},{"speaker":"human","text":"hello i think it rained anyway we went there"},{"speaker":"machine","text":"Tell me more."},{"speaker":"human","text":"my dog likes to run anyway thankyou"}]}
{"id":"b","turns":[{"speaker":"human","text":"goodbye"}]}
"#;

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "raw.jsonl", RAW);
    write(d, "seg.txt", &(cue_corpus(80, 3).join("\n") + "\n"));

    let out = ok(d, &["segment", "train", "--input", "seg.txt", "--output", "seg.json"]);
    assert!(out.starts_with("training precision="), "{out}");
    let out = ok(d, &["segment", "eval", "--model", "seg.json", "--input", "seg.txt"]);
    assert!(out.contains("f1=1.0000 utterances=80"), "{out}");
    write(d, "asr.txt", "the movie was long anyway we went there\n\n");
    assert_eq!(ok(d, &["segment", "apply", "--model", "seg.json", "--input", "asr.txt"]), "the movie was long [SEG] anyway we went there\n\n");

    let out = ok(d, &["corpus", "ingest", "--input", "raw.jsonl", "--output", "corpus.jsonl", "--segmenter", "seg.json"]);
    assert_eq!(out, "conversations=2 units=8\n");
    assert_eq!(ok(d, &["corpus", "check", "--input", "corpus.jsonl"]), "conversations=2 units=8 human_units=5\n");

    ok(d, &["context", "build", "--corpus", "corpus.jsonl", "--output", "ctx.jsonl"]);
    let ctx: Vec<Value> = read(d, "ctx.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(ctx.len(), 5);
    assert_eq!(ctx[1]["input"], "what do you want to talk about <u_p> hello i think it rained <u_c> anyway we went there");
    assert_eq!(ctx[2]["input"], "tell me more <u_p> <empty> <u_c> my dog likes to run");
    assert_eq!(ctx[4]["input"], "<empty> <u_p> <empty> <u_c> goodbye");

    toy_file(d, "train.jsonl", 50, 1);
    let out = ok(d, &["da", "train", "--examples", "train.jsonl", "--output", "model.json"]);
    let f1: f64 = out.rsplit("train_f1=").next().unwrap().trim().parse().unwrap();
    assert!(f1 >= 0.95, "{out}");
    ok(d, &["da", "predict", "--model", "model.json", "--input", "ctx.jsonl", "--output", "pred.jsonl", "--scores"]);
    let preds: Vec<Value> = read(d, "pred.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(preds[0]["id"], "a:1.0");
    assert_eq!(preds[0]["labels"], json!(["opening"]));
    assert_eq!(preds[3]["labels"], json!(["thanks"]));
    assert_eq!(preds[4]["labels"], json!(["closing"]));
    assert_eq!(preds[0]["scores"].as_object().unwrap().len(), 23);

    ok(d, &["da", "predict", "--model", "model.json", "--input", "train.jsonl", "--output", "train_pred.jsonl"]);
    let out = ok(d, &["da", "eval", "prf", "--gold", "train.jsonl", "--pred", "train_pred.jsonl"]);
    assert!(out.starts_with("precision=") && out.ends_with("samples=50\n"), "{out}");
    let model_eval = ok(d, &["da", "eval", "model", "--model", "model.json", "--examples", "train.jsonl"]);
    assert_eq!(model_eval, out);
    assert_eq!(ok(d, &["eval", "prf", "--gold", "train.jsonl", "--pred", "train_pred.jsonl"]), out);

    let (code, err) = fails(d, &["da", "eval", "prf", "--gold", "train.jsonl", "--pred", "pred.jsonl"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error[data]: gold and predictions cover different ids"), "{err}");
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "seg.txt", &(cue_corpus(40, 5).join("\n") + "\n"));
    toy_file(d, "train.jsonl", 30, 2);
    for run in ["1", "2"] {
        ok(d, &["--seed", "3", "segment", "train", "--input", "seg.txt", "--output", &format!("seg{run}.json")]);
        ok(d, &["segment", "apply", "--model", "seg1.json", "--input", "seg.txt", "--output", &format!("units{run}.txt")]);
        ok(d, &["--seed", "3", "da", "train", "--examples", "train.jsonl", "--epochs", "5", "--output", &format!("m{run}.json")]);
        ok(d, &["da", "predict", "--model", "m1.json", "--input", "train.jsonl", "--scores", "--output", &format!("p{run}.jsonl")]);
    }
    for (a, b) in [("seg1.json", "seg2.json"), ("units1.txt", "units2.txt"), ("m1.json", "m2.json"), ("p1.jsonl", "p2.jsonl")] {
        assert_eq!(std::fs::read(d.join(a)).unwrap(), std::fs::read(d.join(b)).unwrap(), "{a} vs {b}");
    }
    ok(d, &["--seed", "4", "da", "train", "--examples", "train.jsonl", "--epochs", "5", "--output", "m3.json"]);
    assert_ne!(read(d, "m1.json"), read(d, "m3.json"));
}

#[test]
fn scheme_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["scheme", "show", "--output", "scheme.tsv"]);
    assert_eq!(ok(d, &["--scheme", "scheme.tsv", "scheme", "show"]), read(d, "scheme.tsv"));
    let doc = ok(d, &["scheme", "show", "--format", "doc"]);
    assert_eq!(doc.lines().filter(|l| l.starts_with("| `")).count(), 23);

    assert_eq!(ok(d, &["scheme", "validate", "general_opinion", "negative_answer"]), "{\"ok\":true,\"violations\":[]}\n");
    let (code, err) = fails(d, &["scheme", "validate", "comment", "statement_non_opinion"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error[data]: exclusive"), "{err}");
    let (code, err) = fails(d, &["scheme", "validate", "nope"]);
    assert_eq!(code, 3);
    assert!(err.contains("nope"), "{err}");

    assert_eq!(ok(d, &["scheme", "prioritize", "task_command", "opinion_question", "general_opinion"]), "general_opinion task_command\n");
    let out = ok(d, &["scheme", "prioritize", "task_command", "opinion_question", "general_opinion", "--order", "command,question"]);
    assert_eq!(out, "opinion_question task_command\n");
    let (code, _) = fails(d, &["scheme", "prioritize", "opening", "--order", "not_a_group"]);
    assert_eq!(code, 2);
}

#[test]
fn swda_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(ok(d, &["swda", "map", "sd", "b", "x", "qw", "ny^e"]), "sd\tstatement_non_opinion\nb\tback_channeling\nx\tDROP\nqw\tUNRESOLVED\nny^e\tpositive_answer\n");
    let (code, _) = fails(d, &["swda", "map", "zz"]);
    assert_eq!(code, 3);
    ok(d, &["swda", "table", "--output", "table.tsv"]);
    assert_eq!(ok(d, &["swda", "map", "sd", "--table", "table.tsv"]), "sd\tstatement_non_opinion\n");

    write(
        d,
        "sw.tsv",
        "# transcript\tspeaker\tact\ttext\n\
         s1\tA\tqy\tDo you have pets?\n\
         s1\tB\tny\tYes, <laugh> two dogs.\n\
         s1\tA\tx\t<laugh>\n\
         s1\tB\tqw\tWhat kind?\n\
         s1\tA\tsd\tThey're labs.\n",
    );
    ok(d, &["swda", "build", "--input", "sw.tsv", "--output", "sw.jsonl"]);
    let ex: Vec<Value> = read(d, "sw.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let tags: Vec<&str> = ex.iter().map(|e| e["tag"].as_str().unwrap()).collect();
    assert_eq!(tags, ["yes_no_question", "positive_answer", "statement_non_opinion"]);
    assert_eq!(ex[1]["input"], "do you have pets <u_p> <empty> <u_c> yes two dogs");
    assert_eq!(ex[2]["input"], "what kind <u_p> <empty> <u_c> they're labs");
    ok(d, &["swda", "build", "--input", "sw.tsv", "--output", "sw2.jsonl", "--unresolved", "factual_question"]);
    assert_eq!(read(d, "sw2.jsonl").lines().count(), 4);

    toy_file(d, "train.jsonl", 24, 3);
    ok(d, &["da", "transfer", "--swda", "sw.jsonl", "--examples", "train.jsonl", "--output", "t.json", "--report", "r.json", "--epochs", "3"]);
    let r: Value = serde_json::from_str(&read(d, "r.json")).unwrap();
    assert_eq!(r["stages"][0]["stage"], "pretrain");
    assert_eq!(r["stages"][1]["stage"], "fine_tune");
    ok(d, &["da", "eval", "model", "--model", "t.json", "--examples", "train.jsonl"]);
}

#[test]
fn annotation_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "raw.jsonl", RAW);
    ok(d, &["corpus", "ingest", "--input", "raw.jsonl", "--output", "corpus.jsonl"]);
    let rec = |seg: &str, who: &str, labels: &[&str]| {
        json!({ "schema_version": 1, "segment_id": seg, "annotator_id": who, "labels": labels, "created_at": 0 }).to_string()
    };
    let log = [
        rec("a:1.0", "p", &["opening"]),
        rec("a:1.0", "q", &["opening"]),
        rec("a:3.0", "p", &["statement_non_opinion"]),
        rec("a:3.0", "q", &["comment"]),
        rec("b:0.0", "p", &["closing"]),
    ]
    .join("\n");
    write(d, "log.jsonl", &log);
    let out = ok(d, &["corpus", "check", "--input", "corpus.jsonl", "--annotations", "log.jsonl"]);
    assert!(out.ends_with("records=5 annotated_segments=3\n"), "{out}");
    ok(d, &["corpus", "attach", "--corpus", "corpus.jsonl", "--annotations", "log.jsonl", "--output", "annotated.jsonl"]);
    assert!(read(d, "annotated.jsonl").contains("\"annotator_id\":\"q\""));

    let (code, err) = fails(d, &["eval", "kappa", "--annotations", "log.jsonl"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.starts_with("error[data]:"), "{err}");
    // Shared segments a:1.0 (agree) and a:3.0 (disagree): po = 1/2, pe = 1/4.
    let out = ok(d, &["eval", "kappa", "--annotations", "log.jsonl", "--shared-only"]);
    assert_eq!(out, "kappa=0.3333 segments=2\n");

    let (code, err) = fails(d, &["context", "build", "--corpus", "corpus.jsonl", "--output", "c.jsonl", "--annotations", "log.jsonl"]);
    assert_eq!(code, 2, "{err}");
    ok(d, &["context", "build", "--corpus", "corpus.jsonl", "--output", "c.jsonl", "--annotations", "log.jsonl", "--annotator", "p"]);
    let c = read(d, "c.jsonl");
    assert!(c.contains("\"labels\":[\"opening\"]"), "{c}");

    write(d, "bad.jsonl", &format!("{}\n{}", rec("a:1.0", "p", &["opening"]), rec("a:1.0", "p", &["comment", "statement_non_opinion"])));
    let (code, err) = fails(d, &["corpus", "check", "--input", "corpus.jsonl", "--annotations", "bad.jsonl"]);
    assert_eq!(code, 3);
    assert!(err.contains(":2"), "{err}");
}

#[test]
fn errors_have_categories_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (code, err) = fails(d, &["frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error[usage]: unrecognized subcommand"), "{err}");
    let (code, err) = fails(d, &["da", "train", "--examples", "x.jsonl"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");

    write(d, "model.json", "{\"not\":\"a model\"}\n");
    write(d, "in.jsonl", "{\"id\":\"1\",\"input\":\"hi\"}\n");
    let (code, err) = fails(d, &["da", "predict", "--model", "model.json", "--input", "in.jsonl"]);
    assert_eq!(code, 4);
    assert!(err.starts_with("error[model]:"), "{err}");

    write(d, "corpus.jsonl", "{\"schema_version\":1,\"id\":\"a\",\"turns\":[]}\n{\"schema_version\":1,\"id\":\n");
    let (code, err) = fails(d, &["corpus", "check", "--input", "corpus.jsonl"]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error[data]:") && err.contains(":2"), "{err}");

    toy_file(d, "train.jsonl", 8, 1);
    let (code, _) = fails(d, &["da", "train", "--examples", "train.jsonl", "--output", "m.json", "--learning-rate", "-1"]);
    assert_eq!(code, 2);
    let (code, _) = fails(d, &["da", "train", "--examples", "train.jsonl", "--output", "m.json", "--threshold", "2"]);
    assert_eq!(code, 2);
    assert!(!d.join("m.json").exists());
}

#[test]
fn every_command_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    let commands: &[&[&str]] = &[
        &[],
        &["scheme"],
        &["scheme", "show"],
        &["scheme", "validate"],
        &["scheme", "prioritize"],
        &["corpus"],
        &["corpus", "ingest"],
        &["corpus", "check"],
        &["corpus", "attach"],
        &["segment"],
        &["segment", "train"],
        &["segment", "apply"],
        &["segment", "eval"],
        &["context"],
        &["context", "build"],
        &["da"],
        &["da", "train"],
        &["da", "predict"],
        &["da", "eval"],
        &["da", "eval", "prf"],
        &["da", "eval", "model"],
        &["da", "transfer"],
        &["eval"],
        &["eval", "prf"],
        &["eval", "kappa"],
        &["swda"],
        &["swda", "map"],
        &["swda", "table"],
        &["swda", "build"],
        &["serve"],
    ];
    for c in commands {
        let mut args = c.to_vec();
        args.push("--help");
        let out = ok(tmp.path(), &args);
        assert!(out.contains("Usage: midas"), "{args:?}: {out}");
    }
    assert!(ok(tmp.path(), &["--version"]).starts_with("midas "));
}
