//! Aggregation of classifications into per-condition rate tables.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::classify::{
    AnchoringShift, AttributeCategory, Classification, DeletionCategory, FunctionalCategory, MathEqCategory,
};
use crate::transforms::gpt3::{AnchorRole, FractionRange};
use crate::transforms::{AnchorKind, Condition, Experiment, FramingLine, TransformedPrompt};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no classifications for {0}")]
    Empty(Experiment),
    #[error("{backend}: missing classifications for probes: {ids}")]
    Missing { backend: String, ids: String },
    #[error("classification for unknown probe {0}")]
    UnknownProbe(String),
    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// A rate as integer counts; percentages are derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Metric {
    pub count: usize,
    pub total: usize,
}

impl Metric {
    pub fn new(count: usize, total: usize) -> Self {
        Self { count, total }
    }

    /// Percentage at full precision; absent for an empty denominator.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.count as f64 / self.total as f64)
    }

    /// Percentage rounded half-up to one decimal, computed exactly.
    pub fn rate_1dp(&self) -> Option<String> {
        if self.total == 0 {
            return None;
        }
        let num = self.count as u128 * 1000;
        let den = self.total as u128;
        let tenths = num / den + u128::from(2 * (num % den) >= den);
        Some(format!("{}.{}", tenths / 10, tenths % 10))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub backend: String,
    pub keys: Vec<(String, String)>,
    pub records: usize,
    pub metrics: Vec<(String, Metric)>,
}

impl ReportRow {
    pub fn key(&self, name: &str) -> Option<&str> {
        self.keys.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn metric(&self, name: &str) -> Option<Metric> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, m)| *m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn find(&self, backend: &str, keys: &[(&str, &str)]) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.backend == backend && keys.iter().all(|(k, v)| r.key(k) == Some(*v)))
    }
}

type Joined<'a> = Vec<(&'a TransformedPrompt, &'a Classification)>;

fn count(items: &[(&TransformedPrompt, &Classification)], pred: impl Fn(&Classification) -> bool) -> Metric {
    Metric::new(items.iter().filter(|(_, c)| pred(c)).count(), items.len())
}

fn keys(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Aggregates one experiment. Every probe must have a classification from
/// every backend that appears in `classifications`.
pub fn aggregate(
    experiment: Experiment,
    probes: &[TransformedPrompt],
    classifications: &[Classification],
) -> Result<ExperimentReport, ReportError> {
    let probes: Vec<&TransformedPrompt> = probes.iter().filter(|p| p.experiment == experiment).collect();
    let classes: Vec<&Classification> = classifications.iter().filter(|c| c.experiment == experiment).collect();
    if classes.is_empty() || probes.is_empty() {
        return Err(ReportError::Empty(experiment));
    }
    let probe_by_id: HashMap<&str, &TransformedPrompt> = probes.iter().map(|p| (p.probe_id.as_str(), *p)).collect();
    let mut by_backend: BTreeMap<&str, HashMap<&str, &Classification>> = BTreeMap::new();
    for c in &classes {
        if !probe_by_id.contains_key(c.probe_id.as_str()) {
            return Err(ReportError::UnknownProbe(c.probe_id.clone()));
        }
        by_backend.entry(c.backend.as_str()).or_default().insert(c.probe_id.as_str(), c);
    }

    let mut rows = Vec::new();
    for (backend, found) in &by_backend {
        let missing: Vec<&str> = probes
            .iter()
            .map(|p| p.probe_id.as_str())
            .filter(|id| !found.contains_key(id))
            .collect();
        if !missing.is_empty() {
            return Err(ReportError::Missing {
                backend: backend.to_string(),
                ids: missing.join(", "),
            });
        }
        let joined: Joined = probes.iter().map(|p| (*p, found[p.probe_id.as_str()])).collect();
        let mut add = |k: Vec<(String, String)>, records: usize, metrics: Vec<(&str, Metric)>| {
            rows.push(ReportRow {
                backend: backend.to_string(),
                keys: k,
                records,
                metrics: metrics.into_iter().map(|(n, m)| (n.to_string(), m)).collect(),
            })
        };
        match experiment {
            Experiment::Framing => framing_rows(&joined, &mut add),
            Experiment::Anchoring => anchoring_rows(&joined, &mut add),
            Experiment::MathEq => matheq_rows(&joined, &mut add),
            Experiment::Attribute => attribute_rows(&joined, &mut add),
            Experiment::Deletion => deletion_rows(&joined, &mut add),
            Experiment::Gpt3Anchoring => gpt3_anchoring_rows(&joined, &mut add),
            Experiment::Gpt3Framing => gpt3_framing_rows(&joined, &mut add),
        }
    }
    Ok(ExperimentReport { experiment, rows })
}

type AddRow<'a> = dyn FnMut(Vec<(String, String)>, usize, Vec<(&str, Metric)>) + 'a;

fn group<'a, K: Ord>(
    joined: &[(&'a TransformedPrompt, &'a Classification)],
    key: impl Fn(&TransformedPrompt) -> Option<K>,
) -> BTreeMap<K, Joined<'a>> {
    let mut out: BTreeMap<K, Joined<'a>> = BTreeMap::new();
    for &(p, c) in joined {
        if let Some(k) = key(p) {
            out.entry(k).or_default().push((p, c));
        }
    }
    out
}

fn framing_rows(joined: &Joined, add: &mut AddRow) {
    let originals: Joined = joined
        .iter()
        .filter(|(p, _)| matches!(p.condition, Condition::FramingOriginal))
        .copied()
        .collect();
    let framed = group(joined, |p| match &p.condition {
        Condition::Framing(c) => Some(c.framing_line),
        _ => None,
    });
    for &line in FramingLine::ALL {
        let items = framed.get(&line).map(Vec::as_slice).unwrap_or_default();
        add(
            keys(&[("framing_line", line.to_string())]),
            items.len(),
            vec![
                ("original_accuracy", count(&originals, Classification::passed)),
                ("framed_accuracy", count(items, Classification::passed)),
                ("original_line_rate", count(&originals, |c| c.flag(line.as_str()))),
                ("framing_line_rate", count(items, |c| c.flag("framing_line"))),
            ],
        );
    }
}

fn anchoring_rows(joined: &Joined, add: &mut AddRow) {
    let baselines = group(joined, |p| match p.condition {
        Condition::AnchoringBaseline { n_lines } => Some(n_lines),
        _ => None,
    });
    let anchored = group(joined, |p| match p.condition {
        Condition::Anchoring(c) => Some((c.anchor_kind, c.renamed, c.n_lines)),
        _ => None,
    });
    for ((kind, renamed, n), items) in &anchored {
        let base = baselines.get(n).map(Vec::as_slice).unwrap_or_default();
        let both = |f: &'static str| move |c: &Classification| c.flag(f) && c.passed();
        let mut metrics = vec![("anchored_accuracy", count(items, Classification::passed))];
        match kind {
            AnchorKind::PrintVar => metrics.extend([
                ("print_var", count(items, |c| c.flag("print_var"))),
                ("print_var_and_pass", count(items, both("print_var"))),
                ("for_var", count(items, |c| c.flag("for_var"))),
                ("for_var_and_pass", count(items, both("for_var"))),
            ]),
            AnchorKind::AddVar => metrics.extend([
                ("returns_tmp", count(items, |c| c.flag("returns_tmp"))),
                ("returns_tmp_and_pass", count(items, both("returns_tmp"))),
            ]),
        }
        metrics.push(("exact_copy", count(items, |c| c.flag("exact_copy"))));
        metrics.push(("no_anchor_accuracy", count(base, Classification::passed)));
        add(
            keys(&[
                ("anchor_kind", kind.to_string()),
                ("renamed", renamed.to_string()),
                ("n_lines", n.to_string()),
            ]),
            items.len(),
            metrics,
        );
    }
}

fn is(cat: impl ToString) -> impl Fn(&Classification) -> bool {
    let cat = cat.to_string();
    move |c| c.category == cat
}

fn matheq_rows(joined: &Joined, add: &mut AddRow) {
    let groups = group(joined, |p| match p.condition {
        Condition::MathEq(c) => Some((c.style, c.order)),
        _ => None,
    });
    for ((style, order), items) in &groups {
        let correct = count(items, is(MathEqCategory::Correct));
        let swapped = count(items, is(MathEqCategory::SwappedOrder));
        add(
            keys(&[("style", style.to_string()), ("order", order.to_string())]),
            items.len(),
            vec![
                ("accuracy", correct),
                ("swapped_order", swapped),
                ("other", count(items, is(MathEqCategory::Other))),
                ("swapped_share_of_errors", Metric::new(swapped.count, items.len() - correct.count)),
            ],
        );
    }
}

fn attribute_rows(joined: &Joined, add: &mut AddRow) {
    let groups = group(joined, |p| match p.condition {
        Condition::Attribute(c) => Some(c.placement),
        _ => None,
    });
    for (placement, items) in &groups {
        let conflicting: Joined = items.iter().filter(|(_, c)| c.flag("conflict")).copied().collect();
        for (subset, rows) in [("conflicting", &conflicting), ("all", items)] {
            add(
                keys(&[("placement", placement.to_string()), ("subset", subset.to_string())]),
                rows.len(),
                AttributeCategory::ALL
                    .iter()
                    .map(|&cat| (cat.as_str(), count(rows, is(cat))))
                    .collect(),
            );
        }
    }
}

fn deletion_rows(joined: &Joined, add: &mut AddRow) {
    let groups = group(joined, |p| match &p.condition {
        Condition::Deletion(c) => Some((c.style, c.packages.len())),
        _ => None,
    });
    for ((style, k), items) in &groups {
        add(
            keys(&[("style", style.to_string()), ("package_count", k.to_string())]),
            items.len(),
            DeletionCategory::ALL
                .iter()
                .map(|&cat| (cat.as_str(), count(items, is(cat))))
                .collect(),
        );
    }
}

fn gpt3_anchoring_rows(joined: &Joined, add: &mut AddRow) {
    let groups = group(joined, |p| match p.condition {
        Condition::Gpt3Anchoring(c) if c.role != AnchorRole::Baseline => Some(c.p),
        _ => None,
    });
    for (p, items) in &groups {
        let lower: Joined = items
            .iter()
            .filter(|(pr, _)| matches!(pr.condition, Condition::Gpt3Anchoring(c) if c.role == AnchorRole::Lower))
            .copied()
            .collect();
        let upper: Joined = items
            .iter()
            .filter(|(pr, _)| matches!(pr.condition, Condition::Gpt3Anchoring(c) if c.role == AnchorRole::Upper))
            .copied()
            .collect();
        for (direction, rows) in [("lower", &lower), ("upper", &upper), ("all", items)] {
            let toward = count(rows, is(AnchoringShift::TowardAnchor));
            let exact = count(rows, |c| c.flag("matches_anchor"));
            let mut metrics: Vec<(&str, Metric)> = AnchoringShift::ALL
                .iter()
                .map(|&s| (s.as_str(), count(rows, is(s))))
                .collect();
            metrics.push(("matches_anchor", exact));
            metrics.push(("matches_anchor_of_toward", Metric::new(exact.count, toward.count)));
            add(
                keys(&[("p", p.to_string()), ("direction", direction.to_string())]),
                rows.len(),
                metrics,
            );
        }
    }
}

fn gpt3_framing_rows(joined: &Joined, add: &mut AddRow) {
    let groups = group(joined, |p| match p.condition {
        Condition::Gpt3Framing(s) => Some(s.framing),
        _ => None,
    });
    for (framing, items) in &groups {
        let ranges: Vec<(String, Joined)> = FractionRange::ALL
            .iter()
            .map(|&r| {
                let subset = items
                    .iter()
                    .filter(|(p, _)| matches!(p.condition, Condition::Gpt3Framing(s) if FractionRange::of(s.save_fraction) == r))
                    .copied()
                    .collect();
                (r.to_string(), subset)
            })
            .chain([("all".to_string(), items.clone())])
            .collect();
        for (range, rows) in &ranges {
            add(
                keys(&[("framing", framing.to_string()), ("save_fraction_range", range.clone())]),
                rows.len(),
                vec![
                    ("risky", count(rows, |c| c.flag("risky"))),
                    ("gibberish", count(rows, |c| c.category == "gibberish")),
                ],
            );
        }
    }
}

/// Functional pass rate over a set of classifications.
pub fn accuracy(classifications: &[Classification]) -> Metric {
    let passed = classifications
        .iter()
        .filter(|c| c.category == FunctionalCategory::Passed.as_str())
        .count();
    Metric::new(passed, classifications.len())
}

// ------------------------------------------------------------------ output

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// One row per group: backend, group keys, record count, then each metric's
/// rate rounded to one decimal.
pub fn write_csv(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Rows of one experiment may carry different metrics (anchor kinds
    // detect different lines); columns are the union in first-seen order.
    let mut columns: Vec<&str> = Vec::new();
    for row in &report.rows {
        for (name, _) in &row.metrics {
            if !columns.contains(&name.as_str()) {
                columns.push(name);
            }
        }
    }
    if let Some(first) = report.rows.first() {
        let mut header = vec!["backend".to_string()];
        header.extend(first.keys.iter().map(|(k, _)| k.clone()));
        header.push("records".into());
        header.extend(columns.iter().map(|c| c.to_string()));
        w.write_record(&header).map_err(csv_err(path))?;
    }
    for row in &report.rows {
        let mut rec = vec![row.backend.clone()];
        rec.extend(row.keys.iter().map(|(_, v)| v.clone()));
        rec.push(row.records.to_string());
        rec.extend(
            columns
                .iter()
                .map(|c| row.metric(c).and_then(|m| m.rate_1dp()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    write_out(path, w)
}

/// Plot-ready long format: one line per (group, metric).
pub fn write_long_csv(report: &ExperimentReport, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = report.rows.first() {
        let mut header = vec!["experiment".to_string(), "backend".to_string()];
        header.extend(first.keys.iter().map(|(k, _)| k.clone()));
        header.extend(["metric", "count", "total", "rate"].map(String::from));
        w.write_record(&header).map_err(csv_err(path))?;
    }
    for row in &report.rows {
        for (name, m) in &row.metrics {
            let mut rec = vec![report.experiment.to_string(), row.backend.clone()];
            rec.extend(row.keys.iter().map(|(_, v)| v.clone()));
            rec.push(name.clone());
            rec.push(m.count.to_string());
            rec.push(m.total.to_string());
            rec.push(m.rate_1dp().unwrap_or_default());
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    write_out(path, w)
}

fn write_out(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<(), ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Write {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    crate::jsonl::write_bytes(path, &bytes).map_err(|e| ReportError::Write {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })
}

/// Structured rows with full-precision rates.
pub fn to_json(report: &ExperimentReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            let keys: serde_json::Map<String, Value> =
                r.keys.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
            let metrics: serde_json::Map<String, Value> = r
                .metrics
                .iter()
                .map(|(n, m)| (n.clone(), json!({ "count": m.count, "total": m.total, "rate": m.rate() })))
                .collect();
            json!({ "backend": r.backend, "keys": keys, "records": r.records, "metrics": metrics })
        })
        .collect();
    json!({ "experiment": report.experiment, "rows": rows })
}
