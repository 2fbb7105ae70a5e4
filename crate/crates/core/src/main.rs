use std::io::{self, BufRead};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use logdag::config::{presets, InputSource, RunConfig};
use logdag::error::{Error, Result};
use logdag::pipeline::{self, BenchSource};
use logdag::state::DagState;
use logdag::synth::CorpusSpec;

#[derive(Parser, Debug)]
#[command(name = "logdag", version, about = "Online log template mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a log stream into structured.csv and templates.csv
    Parse(CommonArgs),
    /// Parse, then score the grouping against labeled ground truth
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Ground-truth CSV (line_id,event_label)
        #[arg(long)]
        truth: PathBuf,
        /// Dataset name for the report row
        #[arg(long, default_value = "dataset")]
        dataset: String,
    },
    /// Time parses of increasing size and print a CSV table
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated line counts
        #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 20_000, 40_000, 80_000, 160_000])]
        sizes: Vec<usize>,
        /// Timed repetitions per size; the fastest is reported
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Templates in the synthetic pool (used when no --input is given)
        #[arg(long, default_value_t = 50)]
        templates: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML configuration file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Bundled dataset preset (HDFS, BGL, Proxifier, ...), in place of --config
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Input file, or "-" for stdin
    #[arg(long, short)]
    input: Option<String>,
    /// Output directory
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Turn the length-node cache on or off
    #[arg(long, value_name = "on|off", value_parser = parse_switch)]
    cache: Option<bool>,
    /// Enable merging with this threshold
    #[arg(long, value_name = "MT")]
    merge: Option<f64>,
    /// Disable merging even if the configuration enables it
    #[arg(long, conflicts_with = "merge")]
    no_merge: bool,
    /// Also write dag_state.json
    #[arg(long)]
    snapshot: bool,
    /// Resume from a dag_state.json written by an earlier run
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => presets::load(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset `{name}` (known: {})",
                    presets::NAMES.join(", ")
                ))
            })??,
            (None, None) => RunConfig::default(),
        };
        if let Some(input) = &self.input {
            config.input = InputSource::from_arg(input);
        }
        if let Some(dir) = &self.output {
            config.output_dir = dir.clone();
        }
        if let Some(cache) = self.cache {
            config.cache = cache;
        }
        if self.no_merge {
            config.set_merge_threshold(None)?;
        } else if let Some(mt) = self.merge {
            config.set_merge_threshold(Some(mt))?;
        }
        config.snapshot |= self.snapshot;
        Ok(config)
    }

    fn reject_resume(&self, command: &str) -> Result<()> {
        match self.resume {
            Some(_) => Err(Error::Config(format!(
                "--resume only applies to parse, not {command}"
            ))),
            None => Ok(()),
        }
    }

    fn resumed_dag(&self) -> Result<Option<logdag::ParseDag>> {
        let Some(path) = &self.resume else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(Some(DagState::from_json(&text)?.restore()?))
    }
}

fn read_pool(input: Box<dyn BufRead>) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    pipeline::for_each_line(input, |l| {
        lines.push(l.to_owned());
        Ok(())
    })?;
    Ok(lines)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse(args) => {
            let config = args.config()?;
            let dag = args.resumed_dag()?;
            let input = pipeline::open_input(&config.input)?;
            let outcome = pipeline::run_stream_with(&config, dag, input, |_| {})?;
            let s = &outcome.stats;
            eprintln!(
                "parsed {} lines into {} templates in {:.3}s ({} cache hits, {} malformed lines skipped)",
                s.lines_parsed, s.templates_final, s.wall_time, s.cache_hits, s.malformed_lines
            );
            if !s.malformed_sample.is_empty() {
                eprintln!("malformed input lines: {:?}", s.malformed_sample);
            }
        }
        Command::Eval {
            common,
            truth,
            dataset,
        } => {
            common.reject_resume("eval")?;
            let config = common.config()?;
            let input = pipeline::open_input(&config.input)?;
            let (report, stats) = pipeline::run_eval(&config, input, &truth, &dataset)?;
            println!("{}", report.summary());
            if stats.malformed_lines > 0 {
                println!("  ({} malformed lines skipped)", stats.malformed_lines);
            }
            report.write_csv(io::stdout().lock())?;
        }
        Command::Bench {
            common,
            sizes,
            repeats,
            templates,
            seed,
        } => {
            common.reject_resume("bench")?;
            let config = common.config()?;
            let source = match (&common.input, &config.input) {
                (Some(_), input) | (None, input @ InputSource::File(_)) => {
                    BenchSource::Lines(read_pool(pipeline::open_input(input)?)?)
                }
                (None, InputSource::Stdin) => BenchSource::Synthetic(CorpusSpec {
                    templates,
                    seed,
                    ..CorpusSpec::default()
                }),
            };
            let rows = pipeline::run_bench(&config, &sizes, &source, repeats)?;
            pipeline::write_bench_csv(io::stdout().lock(), &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
