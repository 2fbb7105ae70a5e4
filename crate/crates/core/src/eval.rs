//! Pairwise clustering accuracy.
//!
//! Every unordered pair of lines is a decision: grouped together or not.
//! A pair is a true positive when both the prediction and the ground truth
//! group it, a false positive when only the prediction does, and a false
//! negative when only the truth does.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Line ID → cluster label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    assignments: BTreeMap<u64, String>,
}

impl Partition {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assigns a line; returns the previous label if the line was already present.
    pub fn insert(&mut self, line_id: u64, label: impl Into<String>) -> Option<String> {
        self.assignments.insert(line_id, label.into())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn label(&self, line_id: u64) -> Option<&str> {
        self.assignments.get(&line_id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &str)> {
        self.assignments.iter().map(|(k, v)| (*k, v.as_str()))
    }

    /// Clusters as sorted ID lists, ordered by their smallest member.
    pub fn clusters(&self) -> Vec<Vec<u64>> {
        let mut by_label: HashMap<&str, Vec<u64>> = HashMap::new();
        for (id, label) in self.iter() {
            by_label.entry(label).or_default().push(id);
        }
        let mut out: Vec<Vec<u64>> = by_label.into_values().collect();
        out.sort_unstable_by_key(|c| c[0]);
        out
    }

    pub fn from_clusters<I, C>(clusters: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = u64>,
    {
        let mut p = Partition::new();
        for (label, cluster) in clusters.into_iter().enumerate() {
            for id in cluster {
                p.insert(id, label.to_string());
            }
        }
        p
    }
}

impl<L: Into<String>> FromIterator<(u64, L)> for Partition {
    fn from_iter<I: IntoIterator<Item = (u64, L)>>(iter: I) -> Self {
        let mut p = Partition::new();
        for (id, label) in iter {
            p.insert(id, label);
        }
        p
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Accuracy {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn check_universe(predicted: &Partition, truth: &Partition) -> Result<()> {
    let missing: Vec<u64> = truth
        .assignments
        .keys()
        .filter(|id| !predicted.assignments.contains_key(id))
        .copied()
        .collect();
    let extra: Vec<u64> = predicted
        .assignments
        .keys()
        .filter(|id| !truth.assignments.contains_key(id))
        .copied()
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    Err(Error::UniverseMismatch {
        missing: missing.len(),
        missing_sample: missing.into_iter().take(10).collect(),
        extra: extra.len(),
        extra_sample: extra.into_iter().take(10).collect(),
    })
}

/// Pair counts from the contingency table of the two partitions.
pub fn pair_counts(predicted: &Partition, truth: &Partition) -> Result<PairCounts> {
    check_universe(predicted, truth)?;
    let mut cells: HashMap<(&str, &str), u64> = HashMap::new();
    let mut pred_sizes: HashMap<&str, u64> = HashMap::new();
    let mut truth_sizes: HashMap<&str, u64> = HashMap::new();
    for (id, p) in predicted.iter() {
        let t = truth.label(id).expect("universe checked");
        *cells.entry((p, t)).or_default() += 1;
        *pred_sizes.entry(p).or_default() += 1;
        *truth_sizes.entry(t).or_default() += 1;
    }
    let tp: u64 = cells.values().map(|&n| pairs(n)).sum();
    let pred_pairs: u64 = pred_sizes.values().map(|&n| pairs(n)).sum();
    let truth_pairs: u64 = truth_sizes.values().map(|&n| pairs(n)).sum();
    Ok(PairCounts {
        tp,
        fp: pred_pairs - tp,
        fn_: truth_pairs - tp,
    })
}

/// All-pairs enumeration. Quadratic; meant as a cross-check for small inputs.
pub fn pair_counts_brute_force(predicted: &Partition, truth: &Partition) -> Result<PairCounts> {
    check_universe(predicted, truth)?;
    let rows: Vec<(&str, &str)> = predicted
        .iter()
        .map(|(id, p)| (p, truth.label(id).expect("universe checked")))
        .collect();
    let mut counts = PairCounts::default();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let same_pred = rows[i].0 == rows[j].0;
            let same_truth = rows[i].1 == rows[j].1;
            match (same_pred, same_truth) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

/// Precision, recall, and their harmonic mean. Any zero denominator yields 0.
pub fn f_measure(counts: PairCounts) -> Accuracy {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let f_measure = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Accuracy {
        precision,
        recall,
        f_measure,
    }
}

pub fn evaluate(predicted: &Partition, truth: &Partition) -> Result<Accuracy> {
    Ok(f_measure(pair_counts(predicted, truth)?))
}

const ID_COLUMNS: &[&str] = &["line_id", "lineid", "id"];
const LABEL_COLUMNS: &[&str] = &["event_label", "eventid", "event_id", "label"];

/// Reads a `line_id,event_label` CSV.
///
/// A header row is expected; headers naming `LineId` and `EventId` columns
/// (as in structured-log exports) are also understood. A file whose first
/// row starts with an integer is read headerless.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ground_truth(file, path)
}

pub fn read_ground_truth<R: std::io::Read>(reader: R, path: &Path) -> Result<Partition> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut partition = Partition::new();
    let mut columns: Option<(usize, usize)> = None;
    let bad = |line: u64, message: String| Error::GroundTruth {
        path: path.to_owned(),
        line,
        message,
    };

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let (id_col, label_col) = match columns {
            Some(c) => c,
            None => {
                let first = record.get(0).unwrap_or("");
                if first.parse::<u64>().is_ok() {
                    columns = Some((0, 1));
                    (0, 1)
                } else {
                    let find = |names: &[&str]| {
                        record
                            .iter()
                            .position(|h| names.contains(&h.to_ascii_lowercase().as_str()))
                    };
                    let id_col = find(ID_COLUMNS).unwrap_or(0);
                    let label_col = find(LABEL_COLUMNS).unwrap_or(1);
                    columns = Some((id_col, label_col));
                    continue;
                }
            }
        };
        let id_text = record
            .get(id_col)
            .ok_or_else(|| bad(line, "missing line id".into()))?;
        let id: u64 = id_text.parse().map_err(|_| {
            bad(
                line,
                format!("line id `{id_text}` is not a non-negative integer"),
            )
        })?;
        let label = record
            .get(label_col)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| bad(line, "missing event label".into()))?;
        if partition.insert(id, label).is_some() {
            return Err(bad(line, format!("duplicate line id {id}")));
        }
    }
    Ok(partition)
}
