use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_simplaug");

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Temp dir holding copies of the shared fixtures.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["tacred_sample.json", "mnli_sample.jsonl", "lexicon.tsv"] {
        fs::copy(fixtures().join(name), dir.path().join(name)).unwrap();
    }
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("SIMPLAUG_BACKEND")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn manifest(dir: &Path, output: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("{output}.manifest"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn augment_relation_writes_dataset_and_manifest() {
    let dir = workspace();
    ok(run(
        dir.path(),
        &[
            "augment",
            "--task",
            "relation",
            "--input",
            "tacred_sample.json",
            "--output",
            "out.json",
            "--backend",
            "rules:lexicon.tsv",
            "--strategy",
            "append",
            "--fraction",
            "1.0",
            "--seed",
            "7",
        ],
    ));
    let m = manifest(dir.path(), "out.json");
    assert_eq!(m["command"], "augment");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["plan"]["filter"], "entity-preservation");
    let counts = &m["counts"];
    assert_eq!(counts["input"], 5);
    assert_eq!(counts["selected"], 5);
    let appended = counts["appended"].as_u64().unwrap();
    assert!(appended > 0);
    assert_eq!(counts["output"].as_u64().unwrap(), 5 + appended);
    let text = fs::read_to_string(dir.path().join("out.json")).unwrap();
    assert!(text.contains("\"tac-0001-simp\""));
}

#[test]
fn zero_fraction_reproduces_the_input_bytes() {
    let dir = workspace();
    for (task, input) in [
        ("relation", "tacred_sample.json"),
        ("nli", "mnli_sample.jsonl"),
    ] {
        for strategy in ["append", "swap"] {
            let out = format!("{strategy}-{input}");
            ok(run(
                dir.path(),
                &[
                    "augment",
                    "--task",
                    task,
                    "--input",
                    input,
                    "--output",
                    &out,
                    "--backend",
                    "echo",
                    "--strategy",
                    strategy,
                    "--fraction",
                    "0",
                    "--seed",
                    "1",
                ],
            ));
            assert_eq!(
                fs::read(dir.path().join(&out)).unwrap(),
                fs::read(dir.path().join(input)).unwrap(),
                "{task} {strategy}"
            );
        }
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = workspace();
    let base = [
        "augment",
        "--task",
        "nli",
        "--input",
        "mnli_sample.jsonl",
        "--output",
        "o.jsonl",
        "--backend",
        "echo",
    ];
    let with = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        run(dir.path(), &args)
    };
    // No seed.
    assert_eq!(
        code(&with(&["--strategy", "append", "--fraction", "0.5"])),
        2
    );
    assert_eq!(
        code(&with(&[
            "--strategy",
            "swap",
            "--fraction",
            "1.5",
            "--seed",
            "1"
        ])),
        2
    );
    assert_eq!(code(&with(&["--strategy", "append", "--seed", "1"])), 2);
    assert_eq!(
        code(&with(&[
            "--strategy",
            "replace-if-preserved",
            "--seed",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&with(&[
            "--strategy",
            "append",
            "--fraction",
            "0.5",
            "--seed",
            "1",
            "--filter",
            "entity-preservation"
        ])),
        2
    );
    assert!(!dir.path().join("o.jsonl").exists());

    let rel = run(
        dir.path(),
        &[
            "augment",
            "--task",
            "relation",
            "--input",
            "tacred_sample.json",
            "--output",
            "o.json",
            "--backend",
            "echo",
            "--strategy",
            "replace-if-preserved",
            "--fraction",
            "0.5",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&rel), 2);
    let no_backend = run(
        dir.path(),
        &[
            "augment",
            "--task",
            "nli",
            "--input",
            "mnli_sample.jsonl",
            "--output",
            "o.jsonl",
            "--strategy",
            "swap",
            "--fraction",
            "1",
            "--seed",
            "1",
        ],
    );
    assert_eq!(code(&no_backend), 2);
}

#[test]
fn backend_from_environment() {
    let dir = workspace();
    let o = Command::new(BIN)
        .args(["simplify"])
        .current_dir(dir.path())
        .env("SIMPLAUG_BACKEND", "rules:lexicon.tsv")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            c.stdin.take().unwrap().write_all(b"We utilize it\n")?;
            c.wait_with_output()
        })
        .unwrap();
    assert_eq!(stdout(&ok(o)), "We use it\n");
}

#[test]
fn existing_output_needs_force() {
    let dir = workspace();
    let args = [
        "augment",
        "--task",
        "nli",
        "--input",
        "mnli_sample.jsonl",
        "--output",
        "o.jsonl",
        "--backend",
        "echo",
        "--strategy",
        "swap",
        "--fraction",
        "1",
        "--seed",
        "3",
    ];
    ok(run(dir.path(), &args));
    fs::write(dir.path().join("o.jsonl"), "sentinel").unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 2);
    assert_eq!(
        fs::read_to_string(dir.path().join("o.jsonl")).unwrap(),
        "sentinel"
    );

    // A stale manifest alone also blocks the run.
    fs::remove_file(dir.path().join("o.jsonl")).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 2);

    let mut forced = args.to_vec();
    forced.push("--force");
    ok(run(dir.path(), &forced));
    assert_ne!(
        fs::read_to_string(dir.path().join("o.jsonl")).unwrap(),
        "sentinel"
    );
}

#[test]
fn backend_failure_exits_4() {
    let dir = workspace();
    let o = run(
        dir.path(),
        &[
            "augment",
            "--task",
            "nli",
            "--input",
            "mnli_sample.jsonl",
            "--output",
            "o.jsonl",
            "--backend",
            "proc:sh -c 'echo READY; exit 1'",
            "--timeout",
            "2",
            "--strategy",
            "swap",
            "--fraction",
            "1",
            "--seed",
            "3",
        ],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("o.jsonl").exists());
    let o = run(
        dir.path(),
        &[
            "simplify",
            "--backend",
            "proc:/nonexistent/simplifier",
            "--input",
            "lexicon.tsv",
        ],
    );
    assert_eq!(code(&o), 4);
}

#[test]
fn invalid_input_exits_3_and_missing_file_exits_1() {
    let dir = workspace();
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"pairID\":\"x\",\"sentence1\":\"a\"}\n",
    )
    .unwrap();
    let args = |input: &'static str| {
        [
            "augment",
            "--task",
            "nli",
            "--input",
            input,
            "--output",
            "o.jsonl",
            "--backend",
            "echo",
            "--strategy",
            "swap",
            "--fraction",
            "1",
            "--seed",
            "3",
        ]
    };
    let o = run(dir.path(), &args("bad.jsonl"));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(code(&run(dir.path(), &args("absent.jsonl"))), 1);
}

#[test]
fn prepare_eval_modes() {
    let dir = workspace();
    let prep = |task: &str, input: &str, mode: &str, out: &str| {
        ok(run(
            dir.path(),
            &[
                "prepare-eval",
                "--task",
                task,
                "--input",
                input,
                "--output",
                out,
                "--mode",
                mode,
                "--backend",
                "rules:lexicon.tsv",
            ],
        ))
    };
    prep("nli", "mnli_sample.jsonl", "original", "orig.jsonl");
    assert_eq!(
        fs::read(dir.path().join("orig.jsonl")).unwrap(),
        fs::read(dir.path().join("mnli_sample.jsonl")).unwrap()
    );
    // Original mode needs no backend at all.
    ok(run(
        dir.path(),
        &[
            "prepare-eval",
            "--task",
            "nli",
            "--input",
            "mnli_sample.jsonl",
            "--output",
            "plain.jsonl",
            "--mode",
            "original",
        ],
    ));

    prep("nli", "mnli_sample.jsonl", "simplified", "simp.jsonl");
    let simp = fs::read_to_string(dir.path().join("simp.jsonl")).unwrap();
    assert_eq!(simp.lines().count(), 6);
    assert_ne!(
        simp,
        fs::read_to_string(dir.path().join("mnli_sample.jsonl")).unwrap()
    );
    assert_eq!(
        manifest(dir.path(), "simp.jsonl")["eval_mode"],
        "simplified"
    );

    prep("relation", "tacred_sample.json", "simplified", "rel.json");
    prep(
        "relation",
        "tacred_sample.json",
        "simplified-complement",
        "relc.json",
    );
    let m = manifest(dir.path(), "relc.json");
    assert_eq!(m["counts"]["output"], 5);
    let o = run(
        dir.path(),
        &[
            "prepare-eval",
            "--task",
            "nli",
            "--input",
            "mnli_sample.jsonl",
            "--output",
            "c.jsonl",
            "--mode",
            "simplified-complement",
            "--backend",
            "echo",
        ],
    );
    assert_eq!(code(&o), 2);
}

fn write_generic(dir: &Path, name: &str, rows: &[(&str, &str)]) {
    let body: String = rows
        .iter()
        .map(|(id, text)| {
            format!(
                "{}\n",
                serde_json::json!({"id": id, "text": text, "label": "x"})
            )
        })
        .collect();
    fs::write(dir.join(name), body).unwrap();
}

#[test]
fn report_matches_known_values() {
    let dir = workspace();
    let same = ok(run(
        dir.path(),
        &[
            "report",
            "--task",
            "nli",
            "--original",
            "mnli_sample.jsonl",
            "--simplified",
            "mnli_sample.jsonl",
        ],
    ));
    let text = stdout(&same);
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| l.ends_with("1.00 ± 0.00"))
        .collect();
    assert_eq!(rows.len(), 2, "{text}");
    assert!(
        rows[0].starts_with("premise") && rows[1].starts_with("hypothesis"),
        "{text}"
    );

    write_generic(
        dir.path(),
        "a.jsonl",
        &[("1", "the cat sat on the mat"), ("2", "the cat sat")],
    );
    write_generic(
        dir.path(),
        "b.jsonl",
        &[("1", "the cat sat on the mat"), ("2", "the cat")],
    );
    let o = ok(run(
        dir.path(),
        &[
            "report",
            "--task",
            "generic",
            "--original",
            "a.jsonl",
            "--simplified",
            "b.jsonl",
            "--out",
            "r.json",
        ],
    ));
    assert!(
        stdout(&o)
            .lines()
            .any(|l| l.starts_with("text") && l.ends_with("0.80 ± 0.20")),
        "{}",
        stdout(&o)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let mean = json["fields"][0]["mean"].as_f64().unwrap();
    assert!((mean - 0.803_265_329_856_316_7).abs() < 1e-9);

    write_generic(
        dir.path(),
        "c.jsonl",
        &[("1", "the cat sat on the mat"), ("3", "the cat")],
    );
    let o = run(
        dir.path(),
        &[
            "report",
            "--task",
            "generic",
            "--original",
            "a.jsonl",
            "--simplified",
            "c.jsonl",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn report_from_manifest() {
    let dir = workspace();
    ok(run(
        dir.path(),
        &[
            "augment",
            "--task",
            "nli",
            "--input",
            "mnli_sample.jsonl",
            "--output",
            "aug.jsonl",
            "--backend",
            "rules:lexicon.tsv",
            "--strategy",
            "append",
            "--fraction",
            "1",
            "--seed",
            "5",
        ],
    ));
    let o = ok(run(
        dir.path(),
        &["report", "--manifest", "aug.jsonl.manifest"],
    ));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("premise")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("hypothesis")), "{text}");
}

#[test]
fn filter_stats_prints_rate() {
    let dir = workspace();
    let o = ok(run(
        dir.path(),
        &[
            "filter-stats",
            "--input",
            "tacred_sample.json",
            "--backend",
            "echo",
            "--out",
            "fs.json",
        ],
    ));
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "attempted=5 passed=5 rate=100.00%"
    );
    assert!(text.lines().nth(1).unwrap().starts_with("changed=0 "));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fs.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], 5);
}

#[test]
fn simplify_keeps_line_structure() {
    let dir = workspace();
    fs::write(
        dir.path().join("in.txt"),
        "We utilize tools (mostly).\n\nThey declined.\n",
    )
    .unwrap();
    let o = ok(run(
        dir.path(),
        &[
            "simplify",
            "--backend",
            "rules:lexicon.tsv",
            "--input",
            "in.txt",
        ],
    ));
    assert_eq!(stdout(&o), "We use tools.\n\nThey refused.\n");
    ok(run(
        dir.path(),
        &[
            "simplify",
            "--backend",
            "echo",
            "--input",
            "in.txt",
            "--output",
            "out.txt",
        ],
    ));
    assert_eq!(
        fs::read_to_string(dir.path().join("out.txt")).unwrap(),
        "We utilize tools (mostly).\n\nThey declined.\n"
    );
}
