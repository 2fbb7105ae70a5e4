//! Run configuration, read from a TOML file.
//!
//! ```toml
//! special_chars = "#^$'*+,/<=>@_`)|~"
//! merge = true
//! mt = 0.95
//! cache = true
//! line_format = ["Date", "Time", "Level", "Content"]
//! input = "-"
//! output_dir = "out"
//! snapshot = false
//!
//! [[preprocess]]
//! pattern = 'blk_-?[0-9]+'
//! replacement = "blkID"
//! ```
//!
//! Every key is optional. `mt` must be given exactly when `merge` is true.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dag::DagConfig;
use crate::error::{Error, Result};
use crate::preprocess::{PreprocessRule, RuleSet, SpecialCharSet, DEFAULT_SPECIAL_CHARS};

/// Name of the field that receives the free-text message.
pub const CONTENT_FIELD: &str = "Content";

/// Header fields of a raw line, the last of which is the message content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineFormat {
    field_names: Vec<String>,
}

/// A line with fewer whitespace fields than the format has headers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    pub expected_fields: usize,
    pub found_fields: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedLine<'a> {
    pub fields: Vec<(&'a str, &'a str)>,
    pub content: &'a str,
}

impl LineFormat {
    pub fn new<S: Into<String>>(field_names: impl IntoIterator<Item = S>) -> Result<Self> {
        let field_names: Vec<String> = field_names.into_iter().map(Into::into).collect();
        let content_fields = field_names.iter().filter(|f| *f == CONTENT_FIELD).count();
        if content_fields != 1 || field_names.last().map(String::as_str) != Some(CONTENT_FIELD) {
            return Err(Error::Config(format!(
                "line_format must contain `{CONTENT_FIELD}` exactly once, as its last field (got {field_names:?})"
            )));
        }
        if let Some(bad) = field_names
            .iter()
            .find(|f| f.is_empty() || f.chars().any(char::is_whitespace))
        {
            return Err(Error::Config(format!(
                "line_format field name {bad:?} is empty or has whitespace"
            )));
        }
        Ok(Self { field_names })
    }

    /// A format whose whole line is the content.
    pub fn content_only() -> Self {
        Self {
            field_names: vec![CONTENT_FIELD.to_owned()],
        }
    }

    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    /// Binds the leading whitespace-separated fields to header names; the
    /// rest of the line, with its spacing intact, is the content.
    ///
    /// With header fields present the content must be non-empty too, so a
    /// line needs at least as many fields as the format names. A
    /// content-only format accepts every line, empty ones included.
    pub fn extract_content<'a>(
        &'a self,
        raw_line: &'a str,
    ) -> Result<ExtractedLine<'a>, MalformedLine> {
        let headers = &self.field_names[..self.field_names.len() - 1];
        let malformed = |found_fields| MalformedLine {
            expected_fields: self.field_names.len(),
            found_fields,
        };
        let mut rest = raw_line;
        let mut fields = Vec::with_capacity(headers.len());
        for (i, name) in headers.iter().enumerate() {
            rest = rest.trim_start();
            if rest.is_empty() {
                return Err(malformed(i));
            }
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            fields.push((name.as_str(), &rest[..end]));
            rest = &rest[end..];
        }
        if headers.is_empty() {
            return Ok(ExtractedLine {
                fields,
                content: rest,
            });
        }
        let content = rest.trim_start();
        if content.is_empty() {
            return Err(malformed(headers.len()));
        }
        Ok(ExtractedLine { fields, content })
    }
}

impl Default for LineFormat {
    fn default() -> Self {
        Self::content_only()
    }
}

/// The on-disk shape of the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub preprocess: Vec<PreprocessRule>,
    pub special_chars: Option<String>,
    pub merge: Option<bool>,
    pub mt: Option<f64>,
    pub cache: Option<bool>,
    pub line_format: Option<Vec<String>>,
    pub input: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub snapshot: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Where lines come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputSource {
    Stdin,
    File(PathBuf),
}

impl InputSource {
    pub fn from_arg(arg: &str) -> Self {
        if arg == "-" {
            InputSource::Stdin
        } else {
            InputSource::File(PathBuf::from(arg))
        }
    }
}

/// A validated configuration with compiled rules.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub rules: Vec<PreprocessRule>,
    pub compiled: RuleSet,
    pub special_chars: SpecialCharSet,
    /// `Some(mt)` when merging is enabled.
    pub merge_threshold: Option<f64>,
    pub cache: bool,
    pub line_format: LineFormat,
    pub input: InputSource,
    pub output_dir: PathBuf,
    pub snapshot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_file(ConfigFile::default()).expect("default configuration is valid")
    }
}

impl RunConfig {
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let merge_threshold = match (file.merge.unwrap_or(false), file.mt) {
            (true, Some(mt)) if mt > 0.0 && mt <= 1.0 => Some(mt),
            (true, Some(mt)) => return Err(Error::Config(format!("mt = {mt} is outside (0, 1]"))),
            (true, None) => return Err(Error::Config("merge = true requires mt".into())),
            (false, Some(_)) => {
                return Err(Error::Config("mt is set but merge is not enabled".into()))
            }
            (false, None) => None,
        };
        let line_format = match file.line_format {
            Some(fields) => LineFormat::new(fields)?,
            None => LineFormat::content_only(),
        };
        Ok(Self {
            compiled: RuleSet::compile(&file.preprocess)?,
            rules: file.preprocess,
            special_chars: SpecialCharSet::new(
                file.special_chars
                    .as_deref()
                    .unwrap_or(DEFAULT_SPECIAL_CHARS),
            ),
            merge_threshold,
            cache: file.cache.unwrap_or(true),
            line_format,
            input: InputSource::from_arg(file.input.as_deref().unwrap_or("-")),
            output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            snapshot: file.snapshot.unwrap_or(false),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file(ConfigFile::load(path)?)
    }

    pub fn dag_config(&self, track_members: bool) -> DagConfig {
        DagConfig {
            special_chars: self.special_chars.clone(),
            merge_threshold: self.merge_threshold,
            cache: self.cache,
            track_members,
        }
    }

    /// Enables or disables merging, overriding the file.
    pub fn set_merge_threshold(&mut self, mt: Option<f64>) -> Result<()> {
        if let Some(mt) = mt {
            if !(mt > 0.0 && mt <= 1.0) {
                return Err(Error::Config(format!("mt = {mt} is outside (0, 1]")));
            }
        }
        self.merge_threshold = mt;
        Ok(())
    }
}

/// Bundled per-dataset settings for the public labeled log samples.
///
/// The header layouts are this project's convention for splitting the
/// samples' raw lines on whitespace; the rules remove IP addresses, block,
/// core, and node IDs, and only Proxifier merges.
pub mod presets {
    use super::{ConfigFile, Result, RunConfig};

    pub const NAMES: &[&str] = &[
        "HDFS",
        "Hadoop",
        "Spark",
        "Zookeeper",
        "BGL",
        "HPC",
        "Thunderbird",
        "Windows",
        "Linux",
        "Apache",
        "Proxifier",
    ];

    pub fn source(name: &str) -> Option<&'static str> {
        Some(match name.to_ascii_lowercase().as_str() {
            "hdfs" => include_str!("../presets/hdfs.toml"),
            "hadoop" => include_str!("../presets/hadoop.toml"),
            "spark" => include_str!("../presets/spark.toml"),
            "zookeeper" => include_str!("../presets/zookeeper.toml"),
            "bgl" => include_str!("../presets/bgl.toml"),
            "hpc" => include_str!("../presets/hpc.toml"),
            "thunderbird" => include_str!("../presets/thunderbird.toml"),
            "windows" => include_str!("../presets/windows.toml"),
            "linux" => include_str!("../presets/linux.toml"),
            "apache" => include_str!("../presets/apache.toml"),
            "proxifier" => include_str!("../presets/proxifier.toml"),
            _ => return None,
        })
    }

    pub fn load(name: &str) -> Option<Result<RunConfig>> {
        source(name).map(|text| RunConfig::from_file(ConfigFile::parse(text)?))
    }
}
