use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bss::{sdr_sir_sar, Metrics, ReferenceSet};
use crate::data::atomic_write;
use crate::error::{Error, Result};

/// References and estimates of one track, keyed by source name.
#[derive(Clone, Debug, Default)]
pub struct TrackPair {
    pub name: String,
    pub references: BTreeMap<String, Vec<f32>>,
    pub estimates: BTreeMap<String, Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub name: String,
    pub sources: BTreeMap<String, Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Row label used when reports are compared side by side.
    pub label: String,
    pub filter_length: usize,
    pub tracks: Vec<TrackReport>,
    /// Per source, the median over tracks of each metric.
    pub medians: BTreeMap<String, Metrics>,
}

/// Median; an even count averages the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

/// Scores every reference source of one track against its estimate.
pub fn evaluate_track(pair: &TrackPair, filter_length: usize) -> Result<TrackReport> {
    if pair.references.is_empty() {
        return Err(Error::Report(format!("track `{}` has no references", pair.name)));
    }
    let names: Vec<&String> = pair.references.keys().collect();
    for n in &names {
        if !pair.estimates.contains_key(*n) {
            return Err(Error::Report(format!("track `{}` has no estimate for `{n}`", pair.name)));
        }
    }
    let refs = ReferenceSet::new(pair.references.values().map(|r| to_f64(r)).collect(), filter_length)
        .map_err(|e| match e {
            Error::DegenerateReference(m) => Error::DegenerateReference(format!("track `{}`: {m}", pair.name)),
            other => other,
        })?;
    let mut sources = BTreeMap::new();
    for (j, name) in names.iter().enumerate() {
        let d = refs.decompose(&to_f64(&pair.estimates[*name]), j)?;
        sources.insert((*name).clone(), sdr_sir_sar(&d));
    }
    Ok(TrackReport {
        name: pair.name.clone(),
        sources,
    })
}

/// Per-track metrics plus per-source medians. Tracks are reported in name order.
pub fn evaluate_dataset(label: &str, pairs: &[TrackPair], filter_length: usize) -> Result<EvalReport> {
    let mut tracks: Vec<TrackReport> = pairs
        .par_iter()
        .map(|p| evaluate_track(p, filter_length))
        .collect::<Result<_>>()?;
    tracks.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));

    let sources: BTreeSet<&String> = tracks.iter().flat_map(|t| t.sources.keys()).collect();
    let mut medians = BTreeMap::new();
    for s in sources {
        let column = |f: fn(&Metrics) -> f64| -> Vec<f64> {
            tracks.iter().filter_map(|t| t.sources.get(s).map(f)).collect()
        };
        let sdr = median(&column(|m| m.sdr)).unwrap_or(f64::NAN);
        let sir = median(&column(|m| m.sir)).unwrap_or(f64::NAN);
        let sar = median(&column(|m| m.sar)).unwrap_or(f64::NAN);
        medians.insert(s.clone(), Metrics { sdr, sir, sar });
    }
    Ok(EvalReport {
        label: label.to_string(),
        filter_length,
        tracks,
        medians,
    })
}

const SOURCE_ORDER: [&str; 5] = ["vocals", "drums", "bass", "other", "accompaniment"];

fn ordered_sources<'a>(names: impl IntoIterator<Item = &'a String>) -> Vec<String> {
    let set: BTreeSet<&String> = names.into_iter().collect();
    let mut out: Vec<String> = SOURCE_ORDER
        .iter()
        .filter(|s| set.iter().any(|n| n.as_str() == **s))
        .map(|s| s.to_string())
        .collect();
    out.extend(set.into_iter().filter(|n| !SOURCE_ORDER.contains(&n.as_str())).cloned());
    out
}

/// One row per report, one `source_METRIC` column per source and metric,
/// holding the median scores.
pub fn comparison_csv(reports: &[EvalReport]) -> Result<String> {
    let sources = ordered_sources(reports.iter().flat_map(|r| r.medians.keys()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string()];
    for s in &sources {
        for m in ["SDR", "SIR", "SAR"] {
            header.push(format!("{s}_{m}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![r.label.clone()];
        for s in &sources {
            match r.medians.get(s) {
                Some(m) => row.extend([m.sdr, m.sir, m.sar].map(|v| format!("{v:.2}"))),
                None => row.extend(["", "", ""].map(String::from)),
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Report(e.to_string())
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Report(format!("invalid report: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), comparison_csv(std::slice::from_ref(self))?.as_bytes())
    }
}
