//! Versioned JSON form of a [`ParseDag`], for resuming a stream later.
//!
//! ```json
//! {
//!   "schema": "logdag.dag-state/v1",
//!   "config": { "special_chars": "...", "merge_threshold": null, "cache": true, "track_members": false },
//!   "cache_hits": 0,
//!   "length_nodes": [
//!     { "length": 3, "cache": 1,
//!       "token_nodes": [
//!         { "key": "First:Send",
//!           "groups": [ { "group_id": 1, "output_id": 1, "template": ["Send", "file", "*"],
//!                         "eta": 1, "dig_len": 1, "seq_len": 3, "st_init": 0.333.., "base": 2,
//!                         "member_count": 2, "members": [] } ] } ] } ],
//!   "outputs": [ { "output_id": 1, "group_ids": [1], "template": ["Send", "file", "*"] } ]
//! }
//! ```
//!
//! Token nodes keep creation order; length nodes are sorted by length.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::{DagConfig, GroupId, OutputId, ParseDag};
use crate::error::{Error, Result};
use crate::preprocess::{OwnedSplitKey, SpecialCharSet};
use crate::similarity::{LogEvent, ThresholdState};

pub const STATE_SCHEMA: &str = "logdag.dag-state/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagState {
    pub schema: String,
    pub config: ConfigState,
    pub cache_hits: u64,
    pub length_nodes: Vec<LengthState>,
    pub outputs: Vec<OutputState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigState {
    pub special_chars: String,
    pub merge_threshold: Option<f64>,
    pub cache: bool,
    pub track_members: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthState {
    pub length: usize,
    pub cache: Option<GroupId>,
    pub token_nodes: Vec<TokenNodeState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenNodeState {
    pub key: String,
    pub groups: Vec<GroupState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub group_id: GroupId,
    pub output_id: OutputId,
    pub template: LogEvent,
    pub eta: u64,
    pub dig_len: u32,
    pub seq_len: u32,
    pub st_init: f64,
    pub base: u32,
    pub member_count: u64,
    #[serde(default)]
    pub members: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputState {
    pub output_id: OutputId,
    pub group_ids: Vec<GroupId>,
    /// Informational; recomputed from the member groups on load.
    pub template: LogEvent,
}

impl DagState {
    pub fn capture(dag: &ParseDag) -> Self {
        let config = dag.config();
        let caches: BTreeMap<usize, GroupId> = dag.length_caches().into_iter().collect();
        let mut lengths: BTreeMap<usize, LengthState> = BTreeMap::new();
        for (length, key, groups) in dag.similarity_nodes() {
            let entry = lengths.entry(length).or_insert_with(|| LengthState {
                length,
                cache: caches.get(&length).copied(),
                token_nodes: Vec::new(),
            });
            entry.token_nodes.push(TokenNodeState {
                key: key.to_string(),
                groups: groups
                    .iter()
                    .map(|id| {
                        let g = dag.group(*id);
                        GroupState {
                            group_id: g.id,
                            output_id: g.output,
                            template: g.event.clone(),
                            eta: g.threshold.eta,
                            dig_len: g.threshold.dig_len,
                            seq_len: g.threshold.seq_len,
                            st_init: g.threshold.st_init,
                            base: g.threshold.base,
                            member_count: g.occurrences,
                            members: g.members.clone(),
                        }
                    })
                    .collect(),
            });
        }
        DagState {
            schema: STATE_SCHEMA.to_owned(),
            config: ConfigState {
                special_chars: config.special_chars.chars(),
                merge_threshold: config.merge_threshold,
                cache: config.cache,
                track_members: config.track_members,
            },
            cache_hits: dag.cache_hits(),
            length_nodes: lengths.into_values().collect(),
            outputs: dag
                .outputs()
                .iter()
                .map(|o| OutputState {
                    output_id: o.id,
                    group_ids: o.groups.clone(),
                    template: dag.output_template(o.id).clone(),
                })
                .collect(),
        }
    }

    pub fn restore(self) -> Result<ParseDag> {
        if self.schema != STATE_SCHEMA {
            return Err(Error::Snapshot(format!(
                "unsupported schema `{}`, expected `{STATE_SCHEMA}`",
                self.schema
            )));
        }
        let config = DagConfig {
            special_chars: SpecialCharSet::new(&self.config.special_chars),
            merge_threshold: self.config.merge_threshold,
            cache: self.config.cache,
            track_members: self.config.track_members,
        };
        if let Some(mt) = config.merge_threshold {
            if !(mt > 0.0 && mt <= 1.0) {
                return Err(Error::Snapshot(format!(
                    "merge threshold {mt} outside (0, 1]"
                )));
            }
        }
        let mut sim_nodes = Vec::new();
        let mut groups = Vec::new();
        let mut caches = Vec::new();
        for length in self.length_nodes {
            if let Some(c) = length.cache {
                caches.push((length.length, c));
            }
            for node in length.token_nodes {
                let key = OwnedSplitKey::parse(&node.key)
                    .ok_or_else(|| Error::Snapshot(format!("bad split key `{}`", node.key)))?;
                let ids = node.groups.iter().map(|g| g.group_id).collect();
                for g in node.groups {
                    if g.seq_len as usize != g.template.len() {
                        return Err(Error::Snapshot(format!(
                            "group {} has seq_len {} but a {}-token template",
                            g.group_id,
                            g.seq_len,
                            g.template.len()
                        )));
                    }
                    groups.push(ParseDag::new_group_record(
                        g.group_id,
                        g.template,
                        g.members,
                        g.member_count,
                        ThresholdState {
                            st_init: g.st_init,
                            eta: g.eta,
                            base: g.base,
                            dig_len: g.dig_len,
                            seq_len: g.seq_len,
                        },
                        g.output_id,
                        key.clone(),
                    ));
                }
                sim_nodes.push((length.length, key, ids));
            }
        }
        let outputs = self
            .outputs
            .into_iter()
            .map(|o| (o.output_id, o.group_ids))
            .collect();
        ParseDag::from_parts(config, sim_nodes, groups, outputs, caches, self.cache_hits)
            .map_err(Error::Snapshot)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(dag: &mut ParseDag, start: u64, lines: &[&str]) -> Vec<u64> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let toks: Vec<&str> = l.split_whitespace().collect();
                dag.parse_line(start + i as u64, &toks).output_id.0
            })
            .collect()
    }

    const LINES: &[&str] = &[
        "Send file file_01",
        "Send file file_02",
        "Open user info user007 now",
        "Open user info user008 now",
        "<warn> disk 3 full",
        "",
        "Send file file_03",
        "job 1 done",
        "job 2 done now",
    ];

    #[test]
    fn resumed_stream_matches_uninterrupted() {
        let config = DagConfig {
            merge_threshold: Some(0.6),
            ..DagConfig::default()
        };
        let mut whole = ParseDag::new(config.clone());
        let expected = feed(&mut whole, 1, LINES);

        let mut first = ParseDag::new(config);
        let mut got = feed(&mut first, 1, &LINES[..4]);
        let json = DagState::capture(&first).to_json();
        let mut resumed = DagState::from_json(&json).unwrap().restore().unwrap();
        got.extend(feed(&mut resumed, 5, &LINES[4..]));

        assert_eq!(got, expected);
        assert_eq!(resumed.snapshot_groups(), whole.snapshot_groups());
        assert_eq!(DagState::capture(&resumed), DagState::capture(&whole));
    }

    #[test]
    fn schema_tag_checked() {
        let mut state = DagState::capture(&ParseDag::default());
        state.schema = "other/v9".into();
        assert!(matches!(state.restore(), Err(Error::Snapshot(_))));
    }

    #[test]
    fn inconsistent_state_rejected() {
        let mut dag = ParseDag::default();
        feed(&mut dag, 1, &["a b c", "x y"]);
        let mut state = DagState::capture(&dag);
        state.outputs[0].group_ids = vec![GroupId(2)];
        assert!(state.restore().is_err());
    }
}
