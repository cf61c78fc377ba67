use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const CORPUS: &[&str] = &[
    "db_workers_orig.act",
    "db_workers_mod.act",
    "empty.act",
    "mutual_get.act",
    "await_chain.act",
];

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn dlctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlctx")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const ALL: &[&str] = &[
    "--cycles",
    "--initial-tasks",
    "--contexts",
    "--explore",
    "--trace-worklist",
    "--dump-facts",
];

#[test]
fn json_output_matches_schema() {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for name in CORPUS {
        let path = corpus(name);
        let mut args = ALL.to_vec();
        args.extend(["--format", "json", "--partial", path.to_str().unwrap()]);
        let out = dlctx(&args);
        let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
        assert!(errors.is_empty(), "{name}: {errors:#?}");
        assert!(doc.get("timing_ms").is_some());
    }
    let bad = serde_json::json!({"file": "x", "cycles": {"nodes": [], "edges": [], "cycles": [[]], "text": []}});
    assert!(!validator.is_valid(&bad));
    assert!(!validator.is_valid(&serde_json::json!({"file": "x", "extra": 1})));
}

#[test]
fn exit_codes() {
    let orig = corpus("db_workers_orig.act");
    let orig = orig.to_str().unwrap();
    assert_eq!(dlctx(&["--cycles", orig]).status.code(), Some(0));
    assert_eq!(dlctx(&["--explore", orig]).status.code(), Some(10));
    let empty = corpus("empty.act");
    assert_eq!(dlctx(&["--explore", empty.to_str().unwrap()]).status.code(), Some(0));
    // no stage
    assert_eq!(dlctx(&[orig]).status.code(), Some(1));
    assert_eq!(dlctx(&["--cycles", "/nonexistent.act"]).status.code(), Some(1));
    assert_eq!(dlctx(&["--bogus", orig]).status.code(), Some(1));
    assert_eq!(dlctx(&["--help"]).status.code(), Some(0));
    assert_eq!(dlctx(&["--explore", "--max-states", "0", orig]).status.code(), Some(1));
}

#[test]
fn parse_errors_exit_one() {
    let dir = std::env::temp_dir().join(format!("dlctx-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.act");
    std::fs::write(&bad, "class A { Unit m() { x = ; } }").unwrap();
    let out = dlctx(&["--cycles", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn empty_program_has_no_cycles() {
    let out = dlctx(&["--cycles", corpus("empty.act").to_str().unwrap()]);
    assert_eq!(stdout(&out).trim(), "0 cycles");
}

#[test]
fn unknown_card_is_rejected() {
    let path = corpus("db_workers_mod.act");
    let out = dlctx(&["--contexts", "--card", "DB.nope=1:2", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = dlctx(&["--contexts", "--card", "DB.register=2:1", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn card_changes_contexts() {
    let path = corpus("db_workers_mod.act");
    let base = dlctx(&["--contexts", "--format", "json", "--no-timing", path.to_str().unwrap()]);
    let more = dlctx(&[
        "--contexts",
        "--format",
        "json",
        "--no-timing",
        "--card",
        "Worker.work=1:2",
        path.to_str().unwrap(),
    ]);
    let n = |o: &Output| {
        let v: Value = serde_json::from_str(&stdout(o)).unwrap();
        v["contexts"].as_array().unwrap().len()
    };
    assert_eq!(n(&base), 2);
    assert!(n(&more) > n(&base));
}

#[test]
fn output_is_deterministic() {
    for name in CORPUS {
        let path = corpus(name);
        for format in ["text", "json"] {
            let mut args = ALL.to_vec();
            args.extend(["--no-timing", "--format", format, path.to_str().unwrap()]);
            let a = dlctx(&args);
            let b = dlctx(&args);
            assert_eq!(a.stdout, b.stdout, "{name} {format}");
            assert!(a.stderr.is_empty(), "{name} {format}");
        }
    }
}

#[test]
fn text_and_json_agree() {
    for name in CORPUS {
        let path = corpus(name);
        let p = path.to_str().unwrap();
        let text = stdout(&dlctx(&["--cycles", "--contexts", "--no-timing", p]));
        let json: Value =
            serde_json::from_str(&stdout(&dlctx(&["--cycles", "--contexts", "--no-timing", "--format", "json", p])))
                .unwrap();
        for c in json["cycles"]["text"].as_array().unwrap() {
            assert!(text.contains(c.as_str().unwrap()), "{name}: {c}");
        }
        for c in json["contexts_text"].as_array().unwrap() {
            assert!(text.contains(c.as_str().unwrap()), "{name}: {c}");
        }
        let n = json["cycles"]["cycles"].as_array().unwrap().len();
        assert!(text.contains(&format!("{n} cycle")), "{name}");
    }
}

#[test]
fn fixture_contexts_in_text() {
    let out = dlctx(&["--contexts", corpus("db_workers_mod.act").to_str().unwrap()]);
    let text = stdout(&out);
    assert!(text.contains("{[register,makesConnection]_db1, [work]_w1}"));
    assert!(text.contains("{[register]_db1, [makesConnection]_db2, [work]_w1}"));
}
