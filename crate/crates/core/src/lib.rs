//! Online log parsing with a fixed-depth parse graph.
//!
//! Raw lines are reduced to their message content, rewritten by user
//! regexes, tokenized on whitespace, and routed by token count and a split
//! token to a short list of candidate groups. The best candidate absorbs the
//! line if it clears that group's own adaptive threshold; otherwise the line
//! starts a new group. Each group's template generalizes mismatching
//! positions to `*` as new members arrive.
//!
//! ```
//! use logdag::dag::ParseDag;
//!
//! let mut dag = ParseDag::default();
//! dag.parse_line(1, &["Send", "file", "file_01"]);
//! let record = dag.parse_line(2, &["Send", "file", "file_02"]);
//! assert_eq!(record.template_text, "Send file *");
//! ```

pub mod config;
pub mod dag;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod preprocess;
pub mod similarity;
pub mod state;
pub mod synth;

pub use config::{LineFormat, RunConfig};
pub use dag::{DagConfig, GroupId, OutputId, ParseDag, StructuredRecord};
pub use error::{Error, Result};
pub use similarity::{LogEvent, TemplateToken};
