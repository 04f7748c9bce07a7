//! Token-level precision/recall/F1 per key class, macro aggregates over old
//! and new classes, forgetting deltas and the side-by-side comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::synthdocs::{Document, KeyClass};
use crate::trainer::{predict, Checkpoint, HeadKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// `(precision, recall, f1)`; every 0/0 is 0.
pub fn prf(c: ClassCounts) -> (f64, f64, f64) {
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(c.tp, c.tp + c.fp);
    let r = ratio(c.tp, c.tp + c.fn_);
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f1)
}

/// Adds one (gold, predicted) token pair to `counts`. OTHER is never a key
/// of the map.
pub fn tally(counts: &mut BTreeMap<KeyClass, ClassCounts>, gold: KeyClass, pred: KeyClass) {
    if gold == pred {
        if !gold.is_other() {
            counts.entry(gold).or_default().tp += 1;
        }
        return;
    }
    if !pred.is_other() {
        counts.entry(pred).or_default().fp += 1;
    }
    if !gold.is_other() {
        counts.entry(gold).or_default().fn_ += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassMetrics {
    pub fn from_counts(c: ClassCounts) -> Self {
        let (precision, recall, f1) = prf(c);
        Self {
            precision,
            recall,
            f1,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<KeyClass, ClassMetrics>,
    pub macro_f1: f64,
    /// Over the model's base classes.
    pub macro_f1_old: Option<f64>,
    /// Over classes added incrementally; `None` for a base model.
    pub macro_f1_new: Option<f64>,
    pub model: String,
    pub head: HeadKind,
}

impl MetricsReport {
    /// Builds a report over `classes` (OTHER is skipped).
    pub fn from_counts(
        counts: &BTreeMap<KeyClass, ClassCounts>,
        classes: &[KeyClass],
        old: &[KeyClass],
        new: &[KeyClass],
        model: impl Into<String>,
        head: HeadKind,
    ) -> Self {
        let per_class: BTreeMap<KeyClass, ClassMetrics> = classes
            .iter()
            .filter(|k| !k.is_other())
            .map(|&k| {
                (
                    k,
                    ClassMetrics::from_counts(counts.get(&k).copied().unwrap_or_default()),
                )
            })
            .collect();
        let mut report = Self {
            per_class,
            macro_f1: 0.0,
            macro_f1_old: None,
            macro_f1_new: None,
            model: model.into(),
            head,
        };
        let all: Vec<KeyClass> = report.per_class.keys().copied().collect();
        report.macro_f1 = report.macro_f1_over(&all).unwrap_or(0.0);
        report.macro_f1_old = report.macro_f1_over(old);
        report.macro_f1_new = report.macro_f1_over(new);
        report
    }

    /// Mean F1 over those of `classes` present in the report.
    pub fn macro_f1_over(&self, classes: &[KeyClass]) -> Option<f64> {
        let f1s: Vec<f64> = classes
            .iter()
            .filter_map(|k| self.per_class.get(k).map(|m| m.f1))
            .collect();
        (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn evaluate(
    ckpt: &Checkpoint,
    docs: &[Document],
    head: HeadKind,
    model: &str,
) -> Result<MetricsReport> {
    evaluate_with(ckpt, docs, head, model, Execution::default())
}

pub fn evaluate_with(
    ckpt: &Checkpoint,
    docs: &[Document],
    head: HeadKind,
    model: &str,
    exec: Execution,
) -> Result<MetricsReport> {
    if docs.is_empty() {
        return Err(Error::Config("evaluation corpus is empty".into()));
    }
    let space = &ckpt.label_space;
    let per_doc = exec.map_slice(
        docs,
        |doc| -> Result<(BTreeMap<KeyClass, ClassCounts>, usize)> {
            let preds = predict(ckpt, doc, head)?;
            let mut counts = BTreeMap::new();
            let mut unknown = 0;
            for (tok, &pred) in doc.tokens.iter().zip(&preds) {
                let gold = if space.contains(tok.label) {
                    tok.label
                } else {
                    unknown += 1;
                    KeyClass::Other
                };
                tally(&mut counts, gold, pred);
            }
            Ok((counts, unknown))
        },
    );
    let mut counts: BTreeMap<KeyClass, ClassCounts> = BTreeMap::new();
    let mut unknown = 0;
    for r in per_doc {
        let (c, u) = r?;
        unknown += u;
        for (k, v) in c {
            let e = counts.entry(k).or_default();
            e.tp += v.tp;
            e.fp += v.fp;
            e.fn_ += v.fn_;
        }
    }
    if unknown > 0 {
        log::warn!("{unknown} gold tokens outside the label space were counted as OTHER");
    }
    Ok(MetricsReport::from_counts(
        &counts,
        space.key_classes(),
        space.base_classes(),
        space.new_classes(),
        model,
        head,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub class: KeyClass,
    pub base_f1: f64,
    pub incremental_f1: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgettingReport {
    pub per_class: Vec<ClassDelta>,
    pub macro_delta_old: f64,
}

/// F1 change of every class in `base` after incremental training.
pub fn forgetting_report(base: &MetricsReport, incr: &MetricsReport) -> Result<ForgettingReport> {
    let mut per_class = Vec::with_capacity(base.per_class.len());
    for (&class, b) in &base.per_class {
        let i = incr.per_class.get(&class).ok_or_else(|| {
            Error::Label(format!("{class} is missing from the incremental report"))
        })?;
        per_class.push(ClassDelta {
            class,
            base_f1: b.f1,
            incremental_f1: i.f1,
            delta: i.f1 - b.f1,
        });
    }
    if per_class.is_empty() {
        return Err(Error::Label("base report has no classes".into()));
    }
    let macro_delta_old = per_class.iter().map(|d| d.delta).sum::<f64>() / per_class.len() as f64;
    Ok(ForgettingReport {
        per_class,
        macro_delta_old,
    })
}

fn title(k: KeyClass) -> String {
    k.name()
        .split('_')
        .map(|w| match w {
            "PO" => "PO".to_string(),
            _ => {
                let mut c = w.chars();
                let first = c.next().map(|f| f.to_string()).unwrap_or_default();
                first + &c.as_str().to_lowercase()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Aligned text table: one Prec/Rec/F1 column group per report, one row per
/// key class, then the macro rows.
pub fn compare(reports: &[MetricsReport]) -> String {
    const KW: usize = 24;
    const CW: usize = 6;
    let mut classes: Vec<KeyClass> = reports
        .iter()
        .flat_map(|r| r.per_class.keys().copied())
        .collect();
    classes.sort();
    classes.dedup();
    let group = 3 * CW + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<KW$}", "");
    for r in reports {
        let name = format!("{} ({})", r.model, r.head);
        let _ = write!(out, " | {:^group$}", name);
    }
    out.push('\n');
    let _ = write!(out, "{:<KW$}", "Key Classes");
    for _ in reports {
        let _ = write!(out, " | {:>CW$} {:>CW$} {:>CW$}", "Prec", "Rec", "F1");
    }
    out.push('\n');
    out.push_str(&"-".repeat(KW + reports.len() * (group + 3)));
    out.push('\n');
    for k in classes {
        let _ = write!(out, "{:<KW$}", title(k));
        for r in reports {
            match r.per_class.get(&k) {
                Some(m) => {
                    let _ = write!(
                        out,
                        " | {:>CW$.2} {:>CW$.2} {:>CW$.2}",
                        m.precision, m.recall, m.f1
                    );
                }
                None => {
                    let _ = write!(out, " | {:>CW$} {:>CW$} {:>CW$}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push_str(&"-".repeat(KW + reports.len() * (group + 3)));
    out.push('\n');
    type Getter = fn(&MetricsReport) -> Option<f64>;
    let rows: [(&str, Getter); 3] = [
        ("Macro F1 (old)", |r| r.macro_f1_old),
        ("Macro F1 (new)", |r| r.macro_f1_new),
        ("Macro F1 (all)", |r| Some(r.macro_f1)),
    ];
    for (label, get) in rows {
        let _ = write!(out, "{label:<KW$}");
        for r in reports {
            let cell = get(r).map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = write!(out, " | {:>CW$} {:>CW$} {:>CW$}", "", "", cell);
        }
        out.push('\n');
    }
    out
}
