//! Streaming driver: raw lines in, structured-log and template CSVs out.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InputSource, LineFormat, RunConfig};
use crate::dag::{ParseDag, StructuredRecord};
use crate::error::{Error, Result};
use crate::eval::{evaluate, load_ground_truth, Accuracy, Partition};
use crate::preprocess::{tokenize, RuleSet};
use crate::state::DagState;
use crate::synth::{Corpus, CorpusSpec};

pub const STRUCTURED_FILE: &str = "structured.csv";
pub const TEMPLATES_FILE: &str = "templates.csv";
pub const STATS_FILE: &str = "stats.json";
pub const STATE_FILE: &str = "dag_state.json";
pub const EVAL_FILE: &str = "eval.csv";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub lines_parsed: u64,
    pub templates_final: u64,
    pub wall_time: f64,
    pub cache_hits: u64,
    pub malformed_lines: u64,
    /// Physical input line numbers of the first few malformed lines.
    pub malformed_sample: Vec<u64>,
}

const MALFORMED_SAMPLE: usize = 20;

/// Preprocess, tokenize, and parse one raw line at a time.
#[derive(Debug)]
pub struct StreamParser {
    rules: RuleSet,
    format: LineFormat,
    dag: ParseDag,
    next_line_id: u64,
    physical_line: u64,
    malformed: u64,
    malformed_sample: Vec<u64>,
}

impl StreamParser {
    pub fn new(config: &RunConfig, track_members: bool) -> Self {
        Self::resume(config, ParseDag::new(config.dag_config(track_members)))
    }

    /// Continues from an existing graph; line IDs pick up after its last line.
    pub fn resume(config: &RunConfig, dag: ParseDag) -> Self {
        let seen: u64 = dag.groups().iter().map(|g| g.occurrences).sum();
        Self {
            rules: config.compiled.clone(),
            format: config.line_format.clone(),
            dag,
            next_line_id: seen + 1,
            physical_line: 0,
            malformed: 0,
            malformed_sample: Vec::new(),
        }
    }

    /// Parses one raw line (without its terminator). `None` for a line that
    /// does not fit the line format; it is counted and skipped.
    pub fn feed(&mut self, raw_line: &str) -> Option<StructuredRecord> {
        self.physical_line += 1;
        let content = match self.format.extract_content(raw_line) {
            Ok(line) => line.content,
            Err(_) => {
                self.malformed += 1;
                if self.malformed_sample.len() < MALFORMED_SAMPLE {
                    self.malformed_sample.push(self.physical_line);
                }
                return None;
            }
        };
        let content = self.rules.apply(content);
        let tokens = tokenize(&content);
        let line_id = self.next_line_id;
        self.next_line_id += 1;
        Some(self.dag.parse_line(line_id, &tokens))
    }

    pub fn dag(&self) -> &ParseDag {
        &self.dag
    }

    pub fn into_dag(self) -> ParseDag {
        self.dag
    }

    pub fn lines_parsed(&self) -> u64 {
        self.next_line_id - 1
    }

    fn stats(&self, wall_time: Duration) -> RunStats {
        RunStats {
            lines_parsed: self.lines_parsed(),
            templates_final: self.dag.outputs().len() as u64,
            wall_time: wall_time.as_secs_f64(),
            cache_hits: self.dag.cache_hits(),
            malformed_lines: self.malformed,
            malformed_sample: self.malformed_sample.clone(),
        }
    }
}

/// Reads lines until EOF, stripping `\n` / `\r\n`. Invalid UTF-8 is replaced.
pub fn for_each_line<R: BufRead>(
    mut input: R,
    mut f: impl FnMut(&str) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        f(&String::from_utf8_lossy(&buf))?;
    }
}

pub fn structured_writer<W: Write>(out: W) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["LineId", "OutputId", "EventTemplate"])?;
    Ok(w)
}

pub fn write_record<W: Write>(w: &mut csv::Writer<W>, record: &StructuredRecord) -> Result<()> {
    w.write_record([
        record.line_id.to_string().as_str(),
        record.output_id.to_string().as_str(),
        record.template_text.as_str(),
    ])?;
    Ok(())
}

pub fn write_templates<W: Write>(out: W, dag: &ParseDag) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["OutputId", "EventTemplate", "Occurrences"])?;
    for g in dag.snapshot_groups() {
        w.write_record([
            g.output_id.to_string().as_str(),
            g.template_text.as_str(),
            g.occurrences.to_string().as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn open_input(source: &InputSource) -> Result<Box<dyn BufRead>> {
    Ok(match source {
        InputSource::Stdin => Box::new(io::BufReader::new(io::stdin())),
        InputSource::File(path) => Box::new(io::BufReader::new(
            File::open(path).map_err(|e| Error::io(path, e))?,
        )),
    })
}

/// Output files of one run, all opened before any input is read.
struct RunOutputs {
    dir: PathBuf,
    structured: csv::Writer<BufWriter<File>>,
    templates: BufWriter<File>,
    stats: BufWriter<File>,
    state: Option<BufWriter<File>>,
}

impl RunOutputs {
    fn open(config: &RunConfig) -> Result<Self> {
        let dir = config.output_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            structured: structured_writer(create(&dir, STRUCTURED_FILE)?)?,
            templates: create(&dir, TEMPLATES_FILE)?,
            stats: create(&dir, STATS_FILE)?,
            state: if config.snapshot {
                Some(create(&dir, STATE_FILE)?)
            } else {
                None
            },
            dir,
        })
    }

    fn finish(mut self, dag: &ParseDag, stats: &RunStats) -> Result<()> {
        let path = |name: &str| self.dir.join(name);
        self.structured
            .flush()
            .map_err(|e| Error::io(path(STRUCTURED_FILE), e))?;
        write_templates(&mut self.templates, dag)?;
        self.templates
            .flush()
            .map_err(|e| Error::io(path(TEMPLATES_FILE), e))?;
        serde_json::to_writer_pretty(&mut self.stats, stats)
            .map_err(|e| Error::io(path(STATS_FILE), e.into()))?;
        writeln!(self.stats).map_err(|e| Error::io(path(STATS_FILE), e))?;
        self.stats
            .flush()
            .map_err(|e| Error::io(path(STATS_FILE), e))?;
        if let Some(mut w) = self.state.take() {
            w.write_all(DagState::capture(dag).to_json().as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path(STATE_FILE), e))?;
        }
        Ok(())
    }
}

/// Output of [`run_stream`]: the final graph and its statistics.
#[derive(Debug)]
pub struct StreamOutcome {
    pub dag: ParseDag,
    pub stats: RunStats,
}

/// Parses `input` into the configured output directory.
///
/// Structured records are written as they are produced; the template
/// catalog, statistics, and optional graph state are written at the end.
pub fn run_stream<R: BufRead>(config: &RunConfig, input: R) -> Result<StreamOutcome> {
    run_stream_with(config, None, input, |_| {})
}

/// As [`run_stream`], optionally resuming `dag` and observing each record.
pub fn run_stream_with<R: BufRead>(
    config: &RunConfig,
    dag: Option<ParseDag>,
    input: R,
    mut on_record: impl FnMut(&StructuredRecord),
) -> Result<StreamOutcome> {
    let mut outputs = RunOutputs::open(config)?;
    let start = Instant::now();
    let mut parser = match dag {
        Some(dag) => StreamParser::resume(config, dag),
        None => StreamParser::new(config, false),
    };
    for_each_line(input, |line| {
        if let Some(record) = parser.feed(line) {
            write_record(&mut outputs.structured, &record)?;
            on_record(&record);
        }
        Ok(())
    })?;
    let stats = parser.stats(start.elapsed());
    let dag = parser.into_dag();
    outputs.finish(&dag, &stats)?;
    Ok(StreamOutcome { dag, stats })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub n_lines: u64,
    pub n_templates: u64,
}

impl EvalReport {
    pub fn new(
        dataset: impl Into<String>,
        accuracy: Accuracy,
        n_lines: u64,
        n_templates: u64,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            precision: accuracy.precision,
            recall: accuracy.recall,
            f_measure: accuracy.f_measure,
            n_lines,
            n_templates,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.serialize(self)?;
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} lines, {} templates\n  precision {:.4}\n  recall    {:.4}\n  F-measure {:.4}",
            self.dataset,
            self.n_lines,
            self.n_templates,
            self.precision,
            self.recall,
            self.f_measure
        )
    }
}

/// Output-node membership of every parsed line.
pub fn predicted_partition(assignments: &[(u64, u64)]) -> Partition {
    assignments
        .iter()
        .map(|(line, output)| (*line, output.to_string()))
        .collect()
}

/// Parses `input`, scores output-node membership against `truth`, and adds
/// `eval.csv` to the output directory.
pub fn run_eval<R: BufRead>(
    config: &RunConfig,
    input: R,
    truth: &Path,
    dataset: &str,
) -> Result<(EvalReport, RunStats)> {
    let truth = load_ground_truth(truth)?;
    let mut assignments = Vec::new();
    let outcome = run_stream_with(config, None, input, |r| {
        assignments.push((r.line_id, r.output_id.0))
    })?;
    let accuracy = evaluate(&predicted_partition(&assignments), &truth)?;
    let report = EvalReport::new(
        dataset,
        accuracy,
        outcome.stats.lines_parsed,
        outcome.stats.templates_final,
    );
    let path = config.output_dir.join(EVAL_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    report.write_csv(file)?;
    Ok((report, outcome.stats))
}

/// Where benchmark lines are drawn from.
#[derive(Clone, Debug)]
pub enum BenchSource {
    Synthetic(CorpusSpec),
    /// Raw lines sampled with replacement.
    Lines(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub seconds: f64,
    pub lines_per_sec: f64,
    /// Time relative to the previous row; empty for the first.
    pub ratio: Option<f64>,
}

fn sample_lines(source: &BenchSource, size: usize, seed: u64) -> Vec<String> {
    match source {
        BenchSource::Synthetic(spec) => {
            let mut corpus = Corpus::new(&CorpusSpec {
                seed: spec.seed ^ seed,
                ..spec.clone()
            });
            (0..size).map(|_| corpus.line().0).collect()
        }
        BenchSource::Lines(pool) if pool.is_empty() => Vec::new(),
        BenchSource::Lines(pool) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..size)
                .map(|_| pool[rng.gen_range(0..pool.len())].clone())
                .collect()
        }
    }
}

/// Times a full parse of `lines`, structured CSV included (written to a sink).
pub fn time_parse(config: &RunConfig, lines: &[String]) -> Result<Duration> {
    let start = Instant::now();
    let mut parser = StreamParser::new(config, false);
    let mut out = structured_writer(io::sink())?;
    for line in lines {
        if let Some(r) = parser.feed(line) {
            write_record(&mut out, &r)?;
        }
    }
    write_templates(io::sink(), parser.dag())?;
    out.flush()?;
    Ok(start.elapsed())
}

/// For each size, draws that many lines and reports the fastest of `repeats`
/// timed parses.
pub fn run_bench(
    config: &RunConfig,
    sizes: &[usize],
    source: &BenchSource,
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    let mut rows: Vec<BenchRow> = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let lines = sample_lines(source, size, 0x5eed);
        let mut best = Duration::MAX;
        for _ in 0..repeats.max(1) {
            best = best.min(time_parse(config, &lines)?);
        }
        let seconds = best.as_secs_f64();
        rows.push(BenchRow {
            size,
            seconds,
            lines_per_sec: if seconds > 0.0 {
                size as f64 / seconds
            } else {
                f64::INFINITY
            },
            ratio: rows.last().map(|prev| seconds / prev.seconds),
        });
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["size", "seconds", "lines_per_sec", "ratio"])?;
    for r in rows {
        w.write_record([
            r.size.to_string(),
            format!("{:.6}", r.seconds),
            format!("{:.0}", r.lines_per_sec),
            r.ratio.map(|x| format!("{x:.3}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;

    fn config_in(dir: &Path, extra: &str) -> RunConfig {
        let mut cfg = RunConfig::from_file(ConfigFile::parse(extra).unwrap()).unwrap();
        cfg.output_dir = dir.to_owned();
        cfg
    }

    #[test]
    fn stream_toy_input() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), "");
        let input = "Send file file_01\nSend file file_02\r\nOpen user info\n";
        let out = run_stream(&cfg, input.as_bytes()).unwrap();
        assert_eq!(out.stats.lines_parsed, 3);
        assert_eq!(out.stats.templates_final, 2);
        let structured = std::fs::read_to_string(dir.path().join(STRUCTURED_FILE)).unwrap();
        assert_eq!(
            structured,
            "LineId,OutputId,EventTemplate\n1,1,Send file file_01\n2,1,Send file *\n3,2,Open user info\n"
        );
        let templates = std::fs::read_to_string(dir.path().join(TEMPLATES_FILE)).unwrap();
        assert_eq!(
            templates,
            "OutputId,EventTemplate,Occurrences\n1,Send file *,2\n2,Open user info,1\n"
        );
        let stats: RunStats =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(STATS_FILE)).unwrap())
                .unwrap();
        assert_eq!(stats.lines_parsed, 3);
        assert!(!dir.path().join(STATE_FILE).exists());
    }

    #[test]
    fn stream_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_stream(&config_in(dir.path(), ""), &b""[..]).unwrap();
        assert_eq!((out.stats.lines_parsed, out.stats.templates_final), (0, 0));
        let structured = std::fs::read_to_string(dir.path().join(STRUCTURED_FILE)).unwrap();
        assert_eq!(structured, "LineId,OutputId,EventTemplate\n");
    }

    #[test]
    fn malformed_lines_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), r#"line_format = ["Level", "Pid", "Content"]"#);
        let input = "INFO 1 started ok\nstray\nINFO 2 started ok\n";
        let out = run_stream(&cfg, input.as_bytes()).unwrap();
        assert_eq!(out.stats.lines_parsed, 2);
        assert_eq!(out.stats.malformed_lines, 1);
        assert_eq!(out.stats.malformed_sample, vec![2]);
        let structured = std::fs::read_to_string(dir.path().join(STRUCTURED_FILE)).unwrap();
        assert!(structured.ends_with("1,1,started ok\n2,1,started ok\n"));
    }

    #[test]
    fn commas_are_quoted() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_stream(&config_in(dir.path(), ""), &b"a, b c\n"[..]).unwrap();
        assert_eq!(out.stats.lines_parsed, 1);
        let structured = std::fs::read_to_string(dir.path().join(STRUCTURED_FILE)).unwrap();
        assert!(structured.ends_with("1,1,\"a, b c\"\n"));
    }

    #[test]
    fn unwritable_output_fails_before_reading() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        let cfg = config_in(&blocker.join("sub"), "");
        struct Panicky;
        impl io::Read for Panicky {
            fn read(&mut self, _: &mut [u8]) -> io::Result<usize> {
                panic!("input read before outputs were opened")
            }
        }
        let err = run_stream(&cfg, io::BufReader::new(Panicky)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn eval_on_toy_stream() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), "");
        let truth = dir.path().join("truth.csv");
        std::fs::write(&truth, "line_id,event_label\n1,A\n2,A\n3,B\n").unwrap();
        let input = "Send file file_01\nSend file file_02\nOpen user info\n";
        let (report, _) = run_eval(&cfg, input.as_bytes(), &truth, "toy").unwrap();
        assert_eq!(report.f_measure, 1.0);
        let row = std::fs::read_to_string(dir.path().join(EVAL_FILE)).unwrap();
        assert_eq!(
            row,
            "dataset,precision,recall,f_measure,n_lines,n_templates\ntoy,1.0,1.0,1.0,3,2\n"
        );
    }

    #[test]
    fn eval_with_one_fused_pair() {
        // truth splits {3,4} apart; the parser puts them together
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), "");
        let truth = dir.path().join("truth.csv");
        std::fs::write(&truth, "line_id,event_label\n1,A\n2,A\n3,B\n4,C\n").unwrap();
        let input = "Send file file_01\nSend file file_02\nOpen user info\nOpen user data\n";
        let (report, _) = run_eval(&cfg, input.as_bytes(), &truth, "toy").unwrap();
        // pairs: tp = {1,2}; fp = {3,4}; fn = none
        assert_eq!(report.precision, 0.5);
        assert_eq!(report.recall, 1.0);
        assert!((report.f_measure - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bench_rows() {
        let cfg = RunConfig::default();
        let source = BenchSource::Synthetic(CorpusSpec::default());
        assert!(run_bench(&cfg, &[], &source, 1).unwrap().is_empty());
        let rows = run_bench(&cfg, &[1000, 2000], &source, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].ratio, None);
        assert!(rows[1].ratio.is_some());
        let mut csv = Vec::new();
        write_bench_csv(&mut csv, &rows).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    #[test]
    fn bench_from_line_pool() {
        let cfg = RunConfig::default();
        let source = BenchSource::Lines(vec!["a 1".into(), "b 2".into()]);
        let rows = run_bench(&cfg, &[100], &source, 1).unwrap();
        assert_eq!(rows[0].size, 100);
        let lines = sample_lines(&source, 50, 1);
        assert!(lines.iter().all(|l| l == "a 1" || l == "b 2"));
    }

    #[test]
    fn resume_continues_line_ids() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config_in(dir.path(), "");
        cfg.snapshot = true;
        let first = run_stream(&cfg, &b"Send file file_01\nSend file file_02\n"[..]).unwrap();
        let json = std::fs::read_to_string(dir.path().join(STATE_FILE)).unwrap();
        let dag = DagState::from_json(&json).unwrap().restore().unwrap();
        assert_eq!(DagState::capture(&dag), DagState::capture(&first.dag));
        let mut ids = Vec::new();
        run_stream_with(&cfg, Some(dag), &b"Send file file_03\n"[..], |r| {
            ids.push((r.line_id, r.output_id.0))
        })
        .unwrap();
        assert_eq!(ids, vec![(3, 1)]);
    }
}
