//! The parse graph: length nodes route to token nodes, token nodes to a
//! single similarity node holding candidate groups, and every group to an
//! output node. Paths are always length → token → similarity → output.
//!
//! A `ParseDag` has one writer at a time; every mutating method takes
//! `&mut self`, so the borrow checker enforces that. The structure is `Send`
//! and `Sync` and may be moved between threads between calls.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::preprocess::{select_split_token, OwnedSplitKey, SpecialCharSet, SplitKey};
use crate::similarity::{lcs, tem_sim, LogEvent, SimScore, TemplateToken, ThresholdState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputId(pub u64);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for OutputId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Similarity-layer settings.
#[derive(Clone, Debug)]
pub struct DagConfig {
    pub special_chars: SpecialCharSet,
    /// `Some(mt)` enables merging of new groups into output nodes whose
    /// template similarity exceeds `mt`.
    pub merge_threshold: Option<f64>,
    /// Try the length node's cached group before the full search.
    pub cache: bool,
    /// Keep every member line ID per group. Off for bounded-memory streaming.
    pub track_members: bool,
}

impl Default for DagConfig {
    fn default() -> Self {
        Self {
            special_chars: SpecialCharSet::default(),
            merge_threshold: None,
            cache: true,
            track_members: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogGroup {
    pub id: GroupId,
    pub event: LogEvent,
    /// Member line IDs in arrival order; empty unless members are tracked.
    pub members: Vec<u64>,
    pub occurrences: u64,
    pub threshold: ThresholdState,
    pub output: OutputId,
    pub split: OwnedSplitKey,
    sim_node: usize,
}

impl LogGroup {
    pub fn current_st(&self) -> f64 {
        self.threshold.current_st()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputNode {
    pub id: OutputId,
    /// Groups pointing here, in the order they joined.
    pub groups: Vec<GroupId>,
    /// Only meaningful once two or more groups share the node; a single-group
    /// node renders that group's live event instead.
    merged_template: LogEvent,
}

#[derive(Clone, Debug)]
struct SimilarityNode {
    length: usize,
    key: OwnedSplitKey,
    groups: Vec<GroupId>,
}

#[derive(Clone, Debug, Default)]
struct LengthNode {
    first: HashMap<String, usize>,
    last: HashMap<String, usize>,
    none: Option<usize>,
    cache: Option<GroupId>,
}

impl LengthNode {
    fn token_node(&self, key: SplitKey<'_>) -> Option<usize> {
        match key {
            SplitKey::First(t) => self.first.get(t).copied(),
            SplitKey::Last(t) => self.last.get(t).copied(),
            SplitKey::None => self.none,
        }
    }

    fn insert_token_node(&mut self, key: SplitKey<'_>, sim_node: usize) {
        match key {
            SplitKey::First(t) => {
                self.first.insert(t.to_owned(), sim_node);
            }
            SplitKey::Last(t) => {
                self.last.insert(t.to_owned(), sim_node);
            }
            SplitKey::None => self.none = Some(sim_node),
        }
    }
}

/// One parsed line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub line_id: u64,
    pub group_id: GroupId,
    pub output_id: OutputId,
    pub template_text: String,
}

/// How a line travelled through the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trace {
    /// Nodes visited, counting the output node.
    pub hops: u8,
    pub cache_hit: bool,
    pub created: bool,
    /// Positions turned into wildcards by this line.
    pub replaced: u32,
}

/// Output node summary for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub output_id: OutputId,
    pub template_text: String,
    /// Sorted member line IDs across all groups of the node (empty when
    /// members are not tracked).
    pub members: Vec<u64>,
    pub occurrences: u64,
}

#[derive(Debug, Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
enum Hop {
    Length,
    Token,
    Similarity,
    Output,
}

#[derive(Clone, Debug)]
pub struct ParseDag {
    config: DagConfig,
    length_nodes: HashMap<usize, LengthNode>,
    sim_nodes: Vec<SimilarityNode>,
    groups: Vec<LogGroup>,
    outputs: Vec<OutputNode>,
    cache_hits: u64,
}

impl Default for ParseDag {
    fn default() -> Self {
        Self::new(DagConfig::default())
    }
}

impl ParseDag {
    pub fn new(config: DagConfig) -> Self {
        if let Some(mt) = config.merge_threshold {
            assert!(mt > 0.0 && mt <= 1.0, "merge threshold {mt} outside (0, 1]");
        }
        Self {
            config,
            length_nodes: HashMap::new(),
            sim_nodes: Vec::new(),
            groups: Vec::new(),
            outputs: Vec::new(),
            cache_hits: 0,
        }
    }

    pub fn config(&self) -> &DagConfig {
        &self.config
    }

    pub fn groups(&self) -> &[LogGroup] {
        &self.groups
    }

    pub fn outputs(&self) -> &[OutputNode] {
        &self.outputs
    }

    pub fn group(&self, id: GroupId) -> &LogGroup {
        &self.groups[(id.0 - 1) as usize]
    }

    fn group_mut(&mut self, id: GroupId) -> &mut LogGroup {
        &mut self.groups[(id.0 - 1) as usize]
    }

    pub fn output(&self, id: OutputId) -> &OutputNode {
        &self.outputs[(id.0 - 1) as usize]
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits
    }

    /// The group currently cached on the length node for `length`, if any.
    pub fn cached_group(&self, length: usize) -> Option<GroupId> {
        self.length_nodes.get(&length).and_then(|n| n.cache)
    }

    /// Groups under the similarity node a message of this shape would reach.
    pub fn candidates<S: AsRef<str>>(&self, tokens: &[S]) -> &[GroupId] {
        let Some(node) = self.length_nodes.get(&tokens.len()) else {
            return &[];
        };
        let key = self.split_key(tokens);
        node.token_node(key)
            .map(|i| self.sim_nodes[i].groups.as_slice())
            .unwrap_or(&[])
    }

    /// Current template of an output node.
    pub fn output_template(&self, id: OutputId) -> &LogEvent {
        let node = self.output(id);
        match node.groups.as_slice() {
            [only] => &self.group(*only).event,
            _ => &node.merged_template,
        }
    }

    fn split_key<'a, S: AsRef<str>>(&self, tokens: &'a [S]) -> SplitKey<'a> {
        if tokens.is_empty() {
            SplitKey::None
        } else {
            select_split_token(tokens, &self.config.special_chars)
        }
    }

    /// Routes `tokens` to a group, creating one if nothing accepts it.
    pub fn parse_line<S: AsRef<str>>(&mut self, line_id: u64, tokens: &[S]) -> StructuredRecord {
        self.parse_line_traced(line_id, tokens).0
    }

    pub fn parse_line_traced<S: AsRef<str>>(
        &mut self,
        line_id: u64,
        tokens: &[S],
    ) -> (StructuredRecord, Trace) {
        let mut hops = Vec::with_capacity(4);
        let (group_id, cache_hit, created, replaced) = match self.search_inner(tokens, &mut hops) {
            Found { group, cache_hit } => {
                let replaced = self.update_group(group, line_id, tokens);
                (group, cache_hit, false, replaced)
            }
            NotFound => {
                hops.clear();
                let group = self.create_group_inner(line_id, tokens, &mut hops);
                (group, false, true, 0)
            }
        };
        if cache_hit {
            self.cache_hits += 1;
        }
        if let Some(node) = self.length_nodes.get_mut(&tokens.len()) {
            node.cache = Some(group_id);
        }
        hops.push(Hop::Output);
        debug_assert!(
            hops_are_well_formed(&hops, cache_hit),
            "unexpected traversal {hops:?}"
        );

        let group = self.group(group_id);
        let output_id = group.output;
        let record = StructuredRecord {
            line_id,
            group_id,
            output_id,
            template_text: self.output_template(output_id).render(),
        };
        let trace = Trace {
            hops: hops.len() as u8,
            cache_hit,
            created,
            replaced,
        };
        (record, trace)
    }

    /// Finds the group a message belongs to without changing anything.
    pub fn search<S: AsRef<str>>(&self, tokens: &[S]) -> Option<GroupId> {
        match self.search_inner(tokens, &mut Vec::new()) {
            Found { group, .. } => Some(group),
            NotFound => None,
        }
    }

    fn search_inner<S: AsRef<str>>(&self, tokens: &[S], hops: &mut Vec<Hop>) -> SearchResult {
        let Some(length_node) = self.length_nodes.get(&tokens.len()) else {
            return NotFound;
        };
        hops.push(Hop::Length);
        let key = self.split_key(tokens);

        // The cached group is only trusted when it is the sole candidate of the
        // similarity node this message routes to; the full search could not
        // pick anything else, so both paths agree.
        if self.config.cache {
            if let Some(cached) = length_node.cache {
                let group = self.group(cached);
                if group.split.as_key() == key
                    && self.sim_nodes[group.sim_node].groups.len() == 1
                    && accepts(group, tokens)
                {
                    hops.push(Hop::Similarity);
                    return Found {
                        group: cached,
                        cache_hit: true,
                    };
                }
            }
        }

        let Some(sim_node) = length_node.token_node(key) else {
            return NotFound;
        };
        hops.push(Hop::Token);
        hops.push(Hop::Similarity);
        match self.match_group(&self.sim_nodes[sim_node].groups, tokens) {
            Some(group) => Found {
                group,
                cache_hit: false,
            },
            None => NotFound,
        }
    }

    /// Best candidate by similarity, then fewest wildcards, then creation
    /// order, returned only if it clears its own threshold.
    pub fn match_group<S: AsRef<str>>(
        &self,
        candidates: &[GroupId],
        tokens: &[S],
    ) -> Option<GroupId> {
        if tokens.is_empty() {
            // the catch-all empty group takes every empty message
            return candidates.first().copied();
        }
        let mut best: Option<(GroupId, SimScore, usize)> = None;
        for &id in candidates {
            let group = self.group(id);
            let score = SimScore::compute(tokens, &group.event);
            let wildcards = group.event.wildcard_count();
            let better = match best {
                None => true,
                Some((best_id, best_score, best_wild)) => match score.cmp_value(best_score) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => (wildcards, id) < (best_wild, best_id),
                    std::cmp::Ordering::Less => false,
                },
            };
            if better {
                best = Some((id, score, wildcards));
            }
        }
        let (id, score, _) = best?;
        (score.value() >= self.group(id).current_st()).then_some(id)
    }

    /// Adds a group for a message nothing accepted. Normally reached through
    /// [`ParseDag::parse_line`].
    pub fn create_group<S: AsRef<str>>(&mut self, line_id: u64, tokens: &[S]) -> GroupId {
        self.create_group_inner(line_id, tokens, &mut Vec::new())
    }

    fn create_group_inner<S: AsRef<str>>(
        &mut self,
        line_id: u64,
        tokens: &[S],
        hops: &mut Vec<Hop>,
    ) -> GroupId {
        let length = tokens.len();
        let key = self.split_key(tokens);
        let group_id = GroupId(self.groups.len() as u64 + 1);

        let length_node = self.length_nodes.entry(length).or_default();
        hops.push(Hop::Length);
        let sim_node = match length_node.token_node(key) {
            Some(i) => i,
            None => {
                let i = self.sim_nodes.len();
                length_node.insert_token_node(key, i);
                self.sim_nodes.push(SimilarityNode {
                    length,
                    key: key.to_owned_key(),
                    groups: Vec::new(),
                });
                i
            }
        };
        hops.push(Hop::Token);
        self.sim_nodes[sim_node].groups.push(group_id);
        hops.push(Hop::Similarity);

        let event = LogEvent::from_message(tokens);
        let merge_into = match self.config.merge_threshold {
            Some(mt) if !event.is_empty() => self.merge_target(&event, mt),
            _ => None,
        };

        let output = match merge_into {
            Some(target) => target,
            None => {
                let id = OutputId(self.outputs.len() as u64 + 1);
                self.outputs.push(OutputNode {
                    id,
                    groups: Vec::new(),
                    merged_template: LogEvent::default(),
                });
                id
            }
        };

        self.groups.push(LogGroup {
            id: group_id,
            threshold: ThresholdState::from_message(tokens),
            event,
            members: if self.config.track_members {
                vec![line_id]
            } else {
                Vec::new()
            },
            occurrences: 1,
            output,
            split: key.to_owned_key(),
            sim_node,
        });
        let node = &mut self.outputs[(output.0 - 1) as usize];
        node.groups.push(group_id);
        if node.groups.len() > 1 {
            self.refresh_merged_template(output);
        }
        group_id
    }

    /// The existing output node most similar to `event`, if the similarity
    /// is strictly above `mt`. Ties go to the earliest node.
    pub fn merge_target(&self, event: &LogEvent, mt: f64) -> Option<OutputId> {
        let mut best: Option<(OutputId, f64)> = None;
        for node in &self.outputs {
            let template = self.output_template(node.id);
            if template.is_empty() {
                continue;
            }
            let sim = tem_sim(event, template);
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((node.id, sim));
            }
        }
        best.filter(|&(_, sim)| sim > mt).map(|(id, _)| id)
    }

    /// Folds the members' current events through LCS, in join order.
    fn refresh_merged_template(&mut self, output: OutputId) {
        let node = self.output(output);
        let mut iter = node.groups.iter();
        let first = iter.next().expect("output node without groups");
        let mut template = self.group(*first).event.tokens.clone();
        for id in iter {
            template = lcs(&template, &self.group(*id).event.tokens);
        }
        self.outputs[(output.0 - 1) as usize].merged_template = LogEvent { tokens: template };
    }

    /// Records `line_id` in the group and generalizes mismatching literals.
    /// Returns how many positions became wildcards.
    pub fn update_group<S: AsRef<str>>(&mut self, id: GroupId, line_id: u64, tokens: &[S]) -> u32 {
        let track = self.config.track_members;
        let group = self.group_mut(id);
        assert_eq!(
            group.event.len(),
            tokens.len(),
            "update with a message of different length"
        );
        if track {
            group.members.push(line_id);
        }
        group.occurrences += 1;
        let replaced = generalize(&mut group.event, tokens);
        group.threshold.eta += u64::from(replaced);
        let output = group.output;
        if replaced > 0 && self.output(output).groups.len() > 1 {
            self.refresh_merged_template(output);
        }
        replaced
    }

    /// All output nodes in creation order.
    pub fn snapshot_groups(&self) -> Vec<GroupSummary> {
        self.outputs
            .iter()
            .map(|node| {
                let mut members: Vec<u64> = node
                    .groups
                    .iter()
                    .flat_map(|g| self.group(*g).members.iter().copied())
                    .collect();
                members.sort_unstable();
                GroupSummary {
                    output_id: node.id,
                    template_text: self.output_template(node.id).render(),
                    members,
                    occurrences: node.groups.iter().map(|g| self.group(*g).occurrences).sum(),
                }
            })
            .collect()
    }

    pub(crate) fn similarity_nodes(
        &self,
    ) -> impl Iterator<Item = (usize, &OwnedSplitKey, &[GroupId])> {
        self.sim_nodes
            .iter()
            .map(|n| (n.length, &n.key, n.groups.as_slice()))
    }

    pub(crate) fn length_caches(&self) -> Vec<(usize, GroupId)> {
        let mut out: Vec<_> = self
            .length_nodes
            .iter()
            .filter_map(|(len, n)| n.cache.map(|c| (*len, c)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Rebuilds a graph from its parts; used by the state loader.
    pub(crate) fn from_parts(
        config: DagConfig,
        sim_nodes: Vec<(usize, OwnedSplitKey, Vec<GroupId>)>,
        mut groups: Vec<LogGroup>,
        outputs: Vec<(OutputId, Vec<GroupId>)>,
        caches: Vec<(usize, GroupId)>,
        cache_hits: u64,
    ) -> Result<Self, String> {
        groups.sort_by_key(|g| g.id);
        for (i, g) in groups.iter().enumerate() {
            if g.id.0 != i as u64 + 1 {
                return Err(format!(
                    "group ids are not 1..n (found {} at {})",
                    g.id,
                    i + 1
                ));
            }
        }
        let mut dag = ParseDag::new(config);
        let mut seen = vec![false; groups.len()];
        for (index, (length, key, members)) in sim_nodes.into_iter().enumerate() {
            let node = dag.length_nodes.entry(length).or_default();
            if node.token_node(key.as_key()).is_some() {
                return Err(format!("duplicate token node {key} under length {length}"));
            }
            node.insert_token_node(key.as_key(), index);
            for id in &members {
                let Some(g) = groups.get_mut((id.0 as usize).wrapping_sub(1)) else {
                    return Err(format!("unknown group {id}"));
                };
                if std::mem::replace(&mut seen[(id.0 - 1) as usize], true) {
                    return Err(format!("group {id} listed twice"));
                }
                if g.event.len() != length || g.split != key {
                    return Err(format!("group {id} does not belong under {length}/{key}"));
                }
                g.sim_node = index;
            }
            dag.sim_nodes.push(SimilarityNode {
                length,
                key,
                groups: members,
            });
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("group {} is not under any token node", i + 1));
        }
        dag.groups = groups;

        for (i, (id, members)) in outputs.into_iter().enumerate() {
            if id.0 != i as u64 + 1 {
                return Err(format!("output ids are not 1..n (found {id} at {})", i + 1));
            }
            if members.is_empty() {
                return Err(format!("output {id} has no groups"));
            }
            for g in &members {
                if dag
                    .groups
                    .get((g.0 as usize).wrapping_sub(1))
                    .map(|g| g.output)
                    != Some(id)
                {
                    return Err(format!("group {g} does not point at output {id}"));
                }
            }
            dag.outputs.push(OutputNode {
                id,
                groups: members,
                merged_template: LogEvent::default(),
            });
            if dag.outputs[i].groups.len() > 1 {
                dag.refresh_merged_template(id);
            }
        }
        for g in &dag.groups {
            let n = dag.outputs.get((g.output.0 as usize).wrapping_sub(1));
            if !n.is_some_and(|n| n.groups.contains(&g.id)) {
                return Err(format!(
                    "group {} points at missing output {}",
                    g.id, g.output
                ));
            }
        }
        for (length, id) in caches {
            if dag
                .groups
                .get((id.0 as usize).wrapping_sub(1))
                .map(|g| g.event.len())
                != Some(length)
            {
                return Err(format!("cache of length {length} names foreign group {id}"));
            }
            dag.length_nodes.entry(length).or_default().cache = Some(id);
        }
        dag.cache_hits = cache_hits;
        Ok(dag)
    }

    pub(crate) fn new_group_record(
        id: GroupId,
        event: LogEvent,
        members: Vec<u64>,
        occurrences: u64,
        threshold: ThresholdState,
        output: OutputId,
        split: OwnedSplitKey,
    ) -> LogGroup {
        LogGroup {
            id,
            event,
            members,
            occurrences,
            threshold,
            output,
            split,
            sim_node: usize::MAX,
        }
    }
}

enum SearchResult {
    Found { group: GroupId, cache_hit: bool },
    NotFound,
}
use SearchResult::{Found, NotFound};

fn accepts<S: AsRef<str>>(group: &LogGroup, tokens: &[S]) -> bool {
    tokens.is_empty() || SimScore::compute(tokens, &group.event).value() >= group.current_st()
}

/// Turns every literal that disagrees with `tokens` into a wildcard.
fn generalize<S: AsRef<str>>(event: &mut LogEvent, tokens: &[S]) -> u32 {
    let mut replaced = 0;
    for (slot, token) in event.tokens.iter_mut().zip(tokens) {
        if let TemplateToken::Literal(s) = slot {
            if s != token.as_ref() {
                *slot = TemplateToken::Wildcard;
                replaced += 1;
            }
        }
    }
    replaced
}

fn hops_are_well_formed(hops: &[Hop], cache_hit: bool) -> bool {
    use Hop::*;
    if cache_hit {
        hops == [Length, Similarity, Output]
    } else {
        hops == [Length, Token, Similarity, Output]
    }
}
