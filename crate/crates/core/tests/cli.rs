use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use logdag::synth::{Corpus, CorpusSpec};

const TOY: &str = "Send file file_01\nSend file file_02\nOpen user info\n";

fn logdag(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_logdag"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn logdag");
    let mut pipe = child.stdin.take().unwrap();
    if let Some(text) = stdin {
        // the child may exit on a bad argument before it reads anything
        match pipe.write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other.unwrap(),
        }
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn synthetic(n: usize) -> String {
    let mut corpus = Corpus::new(&CorpusSpec {
        templates: 30,
        ..CorpusSpec::default()
    });
    corpus.lines(n).into_iter().map(|(l, _)| l + "\n").collect()
}

#[test]
fn parse_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = logdag(&["parse", "--input", "-", "--output", out], Some(TOY));
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(
        read(dir.path(), "structured.csv"),
        "LineId,OutputId,EventTemplate\n1,1,Send file file_01\n2,1,Send file *\n3,2,Open user info\n"
    );
    assert_eq!(
        read(dir.path(), "templates.csv"),
        "OutputId,EventTemplate,Occurrences\n1,Send file *,2\n2,Open user info,1\n"
    );
    let stats: serde_json::Value = serde_json::from_str(&read(dir.path(), "stats.json")).unwrap();
    assert_eq!(stats["lines_parsed"], 3);
    assert_eq!(stats["templates_final"], 2);
    assert!(!dir.path().join("dag_state.json").exists());
}

#[test]
fn cache_toggle_does_not_change_output() {
    let input = synthetic(3000);
    let on = tempfile::tempdir().unwrap();
    let off = tempfile::tempdir().unwrap();
    for (dir, flag) in [(&on, "on"), (&off, "off")] {
        let run = logdag(
            &[
                "parse",
                "--cache",
                flag,
                "--output",
                dir.path().to_str().unwrap(),
            ],
            Some(&input),
        );
        assert!(run.status.success());
    }
    assert_eq!(
        read(on.path(), "structured.csv"),
        read(off.path(), "structured.csv")
    );
    assert_eq!(
        read(on.path(), "templates.csv"),
        read(off.path(), "templates.csv")
    );
}

#[test]
fn snapshot_then_resume_equals_one_run() {
    let input = synthetic(2000);
    let (head, tail) = input.split_at(input.match_indices('\n').nth(999).unwrap().0 + 1);
    let whole = tempfile::tempdir().unwrap();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();

    assert!(logdag(
        &["parse", "-o", whole.path().to_str().unwrap()],
        Some(&input)
    )
    .status
    .success());
    assert!(logdag(
        &["parse", "--snapshot", "-o", first.path().to_str().unwrap()],
        Some(head)
    )
    .status
    .success());
    let state = first.path().join("dag_state.json");
    let run = logdag(
        &[
            "parse",
            "--resume",
            state.to_str().unwrap(),
            "-o",
            second.path().to_str().unwrap(),
        ],
        Some(tail),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );

    assert_eq!(
        read(second.path(), "templates.csv"),
        read(whole.path(), "templates.csv")
    );
    let whole_rows: Vec<String> = read(whole.path(), "structured.csv")
        .lines()
        .skip(1001)
        .map(str::to_owned)
        .collect();
    let resumed_rows: Vec<String> = read(second.path(), "structured.csv")
        .lines()
        .skip(1)
        .map(str::to_owned)
        .collect();
    assert_eq!(whole_rows, resumed_rows);
}

#[test]
fn eval_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    fs::write(&truth, "1,E1\n2,E1\n3,E2\n").unwrap();
    let run = logdag(
        &[
            "eval",
            "--truth",
            truth.to_str().unwrap(),
            "--dataset",
            "toy",
            "-o",
            dir.path().to_str().unwrap(),
        ],
        Some(TOY),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("F-measure 1.0000"), "{stdout}");
    assert_eq!(
        read(dir.path(), "eval.csv"),
        "dataset,precision,recall,f_measure,n_lines,n_templates\ntoy,1.0,1.0,1.0,3,2\n"
    );
}

#[test]
fn eval_with_preset_on_structured_sample() {
    // Same layout as the public labeled samples: raw log plus a structured
    // CSV whose LineId/EventId columns are the ground truth.
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("HDFS_2k.log");
    fs::write(
        &log,
        "081109 203615 148 INFO dfs.DataNode$PacketResponder: PacketResponder 1 for block blk_38865049064139660 terminating\n\
         081109 203807 222 INFO dfs.DataNode$PacketResponder: PacketResponder 0 for block blk_-6952295868487656571 terminating\n\
         081109 204005 35 INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blockMap updated: 10.251.73.220:50010 is added to blk_7128370237687728475 size 67108864\n\
         081109 204015 308 INFO dfs.DataNode$PacketResponder: PacketResponder 2 for block blk_8229193803249955061 terminating\n\
         081109 204106 329 INFO dfs.DataNode$PacketResponder: PacketResponder 2 for block blk_-6670958622368987959 terminating\n\
         081109 204132 26 INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blockMap updated: 10.251.43.115:50010 is added to blk_3050920587428079149 size 67108864\n",
    )
    .unwrap();
    let truth = dir.path().join("HDFS_2k.log_structured.csv");
    fs::write(
        &truth,
        "LineId,Date,Time,Pid,Level,Component,Content,EventId,EventTemplate\n\
         1,081109,203615,148,INFO,dfs.DataNode$PacketResponder,\"PacketResponder 1 for block blk_38865049064139660 terminating\",E10,\"PacketResponder <*> for block <*> terminating\"\n\
         2,081109,203807,222,INFO,dfs.DataNode$PacketResponder,x,E10,x\n\
         3,081109,204005,35,INFO,dfs.FSNamesystem,x,E6,x\n\
         4,081109,204015,308,INFO,dfs.DataNode$PacketResponder,x,E10,x\n\
         5,081109,204106,329,INFO,dfs.DataNode$PacketResponder,x,E10,x\n\
         6,081109,204132,26,INFO,dfs.FSNamesystem,x,E6,x\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = logdag(
        &[
            "eval",
            "--preset",
            "hdfs",
            "--input",
            log.to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let eval = read(&out, "eval.csv");
    assert!(eval.ends_with(",1.0,1.0,1.0,6,2\n"), "{eval}");
    assert!(read(&out, "templates.csv")
        .contains("blockMap updated: IPAddr is added to blkID size 67108864"));
}

#[test]
fn bench_prints_a_table() {
    let run = logdag(&["bench", "--sizes", "1000,2000", "--repeats", "1"], None);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8(run.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "size,seconds,lines_per_sec,ratio");
    assert!(lines[1].starts_with("1000,") && lines[1].ends_with(','));
    assert!(lines[2].starts_with("2000,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn bench_from_a_line_pool() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.log");
    fs::write(&pool, TOY).unwrap();
    let run = logdag(
        &[
            "bench",
            "--input",
            pool.to_str().unwrap(),
            "--sizes",
            "500",
            "--repeats",
            "1",
        ],
        None,
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8(run.stdout)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("500,"));
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "line_format = [\"Level\", \"Content\"]\noutput_dir = {:?}\n\n[[preprocess]]\npattern = 'file_[0-9]+'\nreplacement = \"FILE\"\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let run = logdag(
        &["parse", "--config", cfg.to_str().unwrap()],
        Some("INFO Send file file_01\nINFO Send file file_02\nbroken\n"),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(
        read(&out, "structured.csv"),
        "LineId,OutputId,EventTemplate\n1,1,Send file FILE\n2,1,Send file FILE\n"
    );
    let stats: serde_json::Value = serde_json::from_str(&read(&out, "stats.json")).unwrap();
    assert_eq!(stats["malformed_lines"], 1);
    assert_eq!(stats["malformed_sample"], serde_json::json!([3]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[preprocess]]\npattern = '('\nreplacement = \"X\"\n").unwrap();
    let run = logdag(
        &["parse", "--config", bad.to_str().unwrap(), "-o", out],
        Some(TOY),
    );
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("error:"));

    let run = logdag(&["parse", "--merge", "1.5", "-o", out], Some(TOY));
    assert_eq!(run.status.code(), Some(1));

    let run = logdag(&["parse", "--preset", "nope", "-o", out], Some(TOY));
    assert_eq!(run.status.code(), Some(1));

    let run = logdag(&["frobnicate"], None);
    assert_eq!(run.status.code(), Some(1));

    let missing = dir.path().join("missing.log");
    let run = logdag(
        &["parse", "--input", missing.to_str().unwrap(), "-o", out],
        None,
    );
    assert_eq!(run.status.code(), Some(2));

    // output directory path occupied by a regular file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let run = logdag(&["parse", "-o", blocker.to_str().unwrap()], Some(TOY));
    assert_eq!(run.status.code(), Some(2));

    let truth = dir.path().join("dup.csv");
    fs::write(&truth, "1,E1\n1,E2\n").unwrap();
    let run = logdag(
        &["eval", "--truth", truth.to_str().unwrap(), "-o", out],
        Some(TOY),
    );
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("dup.csv:2: duplicate"));

    assert_eq!(logdag(&["--help"], None).status.code(), Some(0));
}
