use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn refinery(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refinery"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn print_defaults_lists_the_threshold_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = refinery(&["filter", "--print-defaults"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Hi & [50,10000] & [3,10] & 0.22 & >4.2"), "{out}");
    assert!(out.contains("As & [49,10000] & [4,7] & 0.25 & >3.8"), "{out}");
    assert_eq!(out.lines().filter(|l| l.contains(" & ")).count(), 11);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.toml"), "input = \"x\"\nwork_dir = \"w\"\n[[stage]]\nkind = \"dedup\"\n").unwrap();
    let o = refinery(&["run", "--config", "p.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = refinery(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = refinery(&["dedup", "--in", "x", "--out", "y", "--bands", "20"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.itok"), b"ITOK garbage").unwrap();
    fs::write(dir.path().join("e.txt"), "क ख").unwrap();
    let o = refinery(&["tok-eval", "--model", "m.itok", "--in", "e.txt"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

fn hindi_lines(n: usize) -> String {
    let words = ["नमस्ते", "दुनिया", "भारत", "भाषा", "किताब", "पानी", "घर", "समय", "लोग", "काम"];
    (0..n)
        .map(|i| (0..8).map(|k| words[(i * 7 + k * 3 + i / 10) % words.len()]).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn clean_train_removes_foreign_words() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = hindi_lines(400);
    text.push_str("\nनमस्ते 中文 दुनिया 😀\n");
    text.push_str(&"घर 中文 भारत\n".repeat(20));
    fs::write(dir.path().join("c.txt"), text).unwrap();
    let o = refinery(
        &[
            "tok-clean-train",
            "--in",
            "c.txt",
            "--out",
            "m.itok",
            "--vocab-size",
            "320",
            "--cleaned-out",
            "clean.txt",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cleaned = fs::read_to_string(dir.path().join("clean.txt")).unwrap();
    assert!(!cleaned.contains('中') && !cleaned.contains('😀'));
    assert!(cleaned.contains("घर भारत"));
    let vocab = fs::read_to_string(dir.path().join("m.vocab")).unwrap();
    assert!(!vocab.contains('中'));
    let o = refinery(&["tok-eval", "--model", "m.itok", "--in", "clean.txt", "--metric", "exact"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains('1'), "{}", stdout(&o));
}

#[test]
fn pipeline_run_report_and_refused_resume() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let hi = hindi_lines(60);
    let labeled: String = hi
        .lines()
        .map(|l| serde_json::json!({"lang": "hi", "text": l}).to_string() + "\n")
        .chain((0..60).map(|i| serde_json::json!({"lang": "en", "text": format!("the cat sat on mat number {i} today")}).to_string() + "\n"))
        .collect();
    fs::write(p.join("lab.jsonl"), labeled).unwrap();
    assert!(refinery(&["langid-train", "--in", "lab.jsonl", "--out", "lid.bin"], p).status.success());
    fs::create_dir(p.join("in")).unwrap();
    for i in 0..5 {
        fs::write(p.join(format!("in/doc{i}.txt")), hindi_lines(20 + i)).unwrap();
    }
    let cfg = "input = \"in\"\nwork_dir = \"work\"\n\
               [[stage]]\nkind = \"extract\"\n\
               [[stage]]\nkind = \"langid\"\nmodel = \"lid.bin\"\n\
               [[stage]]\nkind = \"basic_filter\"\n";
    fs::write(p.join("p.toml"), cfg).unwrap();
    let o = refinery(&["run", "--config", "p.toml"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(p.join("work/reports/basic_filter.json").exists());
    let o = refinery(&["report", "--config", "p.toml", "--json"], p);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows.as_array().is_some_and(|a| !a.is_empty()));

    fs::write(p.join("p.toml"), format!("seed = 9\n{cfg}")).unwrap();
    let o = refinery(&["run", "--config", "p.toml", "--resume"], p);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_refinery"))
        .args(["run", "--config", "p.toml"])
        .env("REFINERY_WORKERS", "zero")
        .current_dir(p)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
