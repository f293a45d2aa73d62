//! Interaction-log I/O: the `user_id,item_id,timestamp,state_label,feat...`
//! CSV layout, plus the split manifest written next to training runs.
//!
//! Users and items live in separate id spaces and are remapped to a single
//! contiguous range in first-appearance order: users take `0..U`, items
//! `U..U+I`. Rows out of time order are counted and re-sorted.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{GraphError, Splits, TemporalGraph};

/// What the loader saw, for logging and sanity checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub num_users: usize,
    pub num_items: usize,
    /// Count of rows whose timestamp was smaller than the previous row's.
    pub non_monotone: usize,
    pub header_skipped: bool,
    pub edge_feat_dim: usize,
}

fn parse_u64(field: &str, line: u64, what: &str) -> Result<u64, GraphError> {
    field.parse().map_err(|_| GraphError::Parse {
        line,
        msg: format!("bad {what} {field:?}"),
    })
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64, GraphError> {
    field.parse().map_err(|_| GraphError::Parse {
        line,
        msg: format!("bad {what} {field:?}"),
    })
}

fn looks_like_header(record: &csv::StringRecord) -> bool {
    record
        .iter()
        .take(3)
        .any(|field| field.parse::<f64>().is_err())
}

/// First-appearance remap shared by the loader and the synthetic
/// generator: users take `0..U`, items `U..U+I`, in order of first
/// appearance. Using the same remap on both sides means a generated graph
/// written with [`write_jodie_csv`] reloads into identical node ids.
pub(crate) fn remap_bipartite(
    rows: Vec<(u64, u64, f64, Vec<f64>)>,
) -> (Vec<(usize, usize, f64, Vec<f64>)>, usize, usize) {
    let mut users: HashMap<u64, usize> = HashMap::new();
    let mut items: HashMap<u64, usize> = HashMap::new();
    let mut mapped = Vec::with_capacity(rows.len());
    for (user_raw, item_raw, t, att) in rows {
        let next_user = users.len();
        let uid = *users.entry(user_raw).or_insert(next_user);
        let next_item = items.len();
        let iid = *items.entry(item_raw).or_insert(next_item);
        mapped.push((uid, iid, t, att));
    }
    let num_users = users.len();
    for row in &mut mapped {
        row.1 += num_users;
    }
    (mapped, num_users, items.len())
}

/// Reads an interaction log. When `has_edge_features` is false, or the file
/// has no feature columns, every event gets the constant attribute `[1.0]`.
pub fn load_jodie_csv(
    path: impl AsRef<Path>,
    has_edge_features: bool,
) -> Result<(TemporalGraph, LoadReport), GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<(u64, u64, f64, Vec<f64>)> = Vec::new();
    let mut non_monotone = 0usize;
    let mut header_skipped = false;
    let mut expected_fields: Option<usize> = None;
    let mut prev_t = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if i == 0 && looks_like_header(&record) {
            header_skipped = true;
            continue;
        }
        if record.len() < 4 {
            return Err(GraphError::Parse {
                line,
                msg: format!("expected at least 4 fields, found {}", record.len()),
            });
        }
        let expected = *expected_fields.get_or_insert(record.len());
        if record.len() != expected {
            return Err(GraphError::Parse {
                line,
                msg: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let user_raw = parse_u64(&record[0], line, "user id")?;
        let item_raw = parse_u64(&record[1], line, "item id")?;
        let t = parse_f64(&record[2], line, "timestamp")?;
        if !t.is_finite() || t < 0.0 {
            return Err(GraphError::Parse {
                line,
                msg: format!("timestamp {t} out of range"),
            });
        }
        let att = if has_edge_features && expected > 4 {
            record
                .iter()
                .skip(4)
                .map(|f| parse_f64(f, line, "feature"))
                .collect::<Result<Vec<f64>, _>>()?
        } else {
            vec![1.0]
        };
        if t < prev_t {
            non_monotone += 1;
        }
        prev_t = t;
        rows.push((user_raw, item_raw, t, att));
    }
    let edge_feat_dim = rows.first().map(|r| r.3.len()).unwrap_or(1);
    let (raw, num_users, num_items) = remap_bipartite(rows);
    let graph = TemporalGraph::from_events(num_users + num_items, edge_feat_dim, raw)?;
    let report = LoadReport {
        rows: graph.num_events(),
        num_users,
        num_items,
        non_monotone,
        header_skipped,
        edge_feat_dim,
    };
    Ok((graph, report))
}

/// Writes the graph back out in the same layout the loader accepts; the
/// state label column is always 0.
pub fn write_jodie_csv(path: impl AsRef<Path>, g: &TemporalGraph) -> Result<(), GraphError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write!(out, "user_id,item_id,timestamp,state_label")?;
    for j in 0..g.edge_feat_dim() {
        write!(out, ",f{j}")?;
    }
    writeln!(out)?;
    for e in g.events() {
        write!(out, "{},{},{},0", e.u, e.v, e.t)?;
        for a in &e.att {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    event_id: usize,
    partition: &'a str,
}

/// One JSON object per line, sorted by event id, naming each event's
/// partition.
pub fn write_split_manifest(path: impl AsRef<Path>, splits: &Splits) -> Result<(), GraphError> {
    let mut rows: Vec<(usize, &str)> = splits
        .train
        .iter()
        .map(|id| (*id, "train"))
        .chain(splits.val.iter().map(|id| (*id, "val")))
        .chain(splits.test.iter().map(|id| (*id, "test")))
        .collect();
    rows.sort_unstable();
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for (event_id, partition) in rows {
        serde_json::to_writer(&mut out, &ManifestRow { event_id, partition })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
