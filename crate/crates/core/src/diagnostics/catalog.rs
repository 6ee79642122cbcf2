//! Deduplicated chord catalog with lossless JSON-lines persistence.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::integrator::IntegrationSettings;
use crate::shooting::{Branch, Chord, Side};

pub const ARTIFACT_VERSION: &str = concat!("reebchord ", env!("CARGO_PKG_VERSION"));

/// Default tolerance in `tau` and in endpoint coordinates.
pub const DEDUPE_TOL: f64 = 1e-6;

/// One persisted chord.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub mu: f64,
    pub jacobi: f64,
    pub branch: Branch,
    pub side: Side,
    pub pericenter_index: usize,
    pub s0: f64,
    pub tau_reeb: f64,
    pub action: f64,
    pub flight_time: f64,
    pub r_peri: f64,
    pub endpoint_start_b: [f64; 2],
    pub endpoint_end_b: [f64; 2],
    pub symmetric: bool,
    pub periodic_candidate: bool,
    pub integrator_tolerances: IntegrationSettings,
    pub artifact_version: String,
    /// `dm/ds` at the root, a conditioning proxy for the shot.
    #[serde(default)]
    pub dm_ds: Option<f64>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub run_config: Value,
}

impl CatalogEntry {
    pub fn from_chord(chord: &Chord) -> Self {
        let b = |p: &crate::regularization::MoserChartPoint| [p.b.x, p.b.y];
        Self {
            mu: chord.mu(),
            jacobi: chord.jacobi(),
            branch: chord.spec.branch,
            side: chord.spec.side(),
            pericenter_index: chord.pericenter_index,
            s0: chord.spec.s,
            tau_reeb: chord.tau_reeb,
            action: chord.action,
            flight_time: chord.flight_time,
            r_peri: chord.r_peri,
            endpoint_start_b: b(&chord.endpoint_start),
            endpoint_end_b: b(&chord.endpoint_end),
            symmetric: chord.symmetric,
            periodic_candidate: chord.periodic_candidate,
            integrator_tolerances: *chord.forward.settings(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            dm_ds: chord.dm_ds.is_finite().then_some(chord.dm_ds),
            run_config: Value::Null,
        }
    }

    fn endpoint_distance(&self, other: &Self) -> f64 {
        let d = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs().max((x[1] - y[1]).abs());
        d(self.endpoint_start_b, other.endpoint_start_b).max(d(self.endpoint_end_b, other.endpoint_end_b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(usize),
    /// Index of the entry the chord duplicates.
    Duplicate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordCatalog {
    entries: Vec<CatalogEntry>,
    pub dedupe_tol: f64,
}

impl Default for ChordCatalog {
    fn default() -> Self {
        Self::new(DEDUPE_TOL)
    }
}

impl ChordCatalog {
    pub fn new(dedupe_tol: f64) -> Self {
        Self {
            entries: Vec::new(),
            dedupe_tol,
        }
    }

    /// Entries sorted by `tau_reeb`.
    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Attaches the configuration of the producing run to every entry.
    pub fn set_run_config(&mut self, config: &Value) {
        for e in &mut self.entries {
            e.run_config = config.clone();
        }
    }

    /// Finds an entry within the dedupe tolerance.
    pub fn find_duplicate(&self, entry: &CatalogEntry) -> Option<usize> {
        self.entries.iter().position(|e| {
            (e.tau_reeb - entry.tau_reeb).abs() < self.dedupe_tol && e.endpoint_distance(entry) < self.dedupe_tol
        })
    }

    /// Inserts an entry that has already been validated, keeping `tau`
    /// order, then refreshes the periodic flags.
    pub fn insert_entry(&mut self, entry: CatalogEntry) -> Result<InsertOutcome> {
        if !(entry.tau_reeb > 0.0) {
            return Err(Error::Integrity(format!("non-positive Reeb period {}", entry.tau_reeb)));
        }
        if let Some(i) = self.find_duplicate(&entry) {
            return Ok(InsertOutcome::Duplicate(i));
        }
        let at = self.entries.partition_point(|e| e.tau_reeb <= entry.tau_reeb);
        self.entries.insert(at, entry);
        self.mark_cycles();
        Ok(InsertOutcome::Inserted(at))
    }

    /// Marks entries lying on a cycle of chords whose end matches the next
    /// start within the dedupe tolerance. A self-loop is a single chord that
    /// closes up.
    fn mark_cycles(&mut self) {
        let n = self.entries.len();
        let tol = self.dedupe_tol;
        let close = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs().max((x[1] - y[1]).abs()) < tol;
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| close(self.entries[i].endpoint_end_b, self.entries[j].endpoint_start_b))
                    .collect()
            })
            .collect();
        for i in 0..n {
            // i lies on a cycle iff it is reachable from one of its successors.
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = succ[i].clone();
            let mut on_cycle = false;
            while let Some(j) = stack.pop() {
                if j == i {
                    on_cycle = true;
                    break;
                }
                if !std::mem::replace(&mut seen[j], true) {
                    stack.extend(&succ[j]);
                }
            }
            if on_cycle {
                self.entries[i].periodic_candidate = true;
            }
        }
    }
}

/// Validates `chord` and inserts its summary unless it duplicates an entry.
pub fn catalog_insert(catalog: &mut ChordCatalog, chord: &Chord) -> Result<InsertOutcome> {
    chord.check_invariants()?;
    catalog.insert_entry(CatalogEntry::from_chord(chord))
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn normalize_floats(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                if let Ok(fixed) = Number::from_str(&format!("{x:.16e}")) {
                    *n = fixed;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_floats),
        Value::Object(map) => map.values_mut().for_each(normalize_floats),
        _ => {}
    }
}

/// Serializes `value` as one line of JSON with every float printed to 17
/// significant digits.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    normalize_floats(&mut v);
    Ok(serde_json::to_string(&v)?)
}

/// Writes one entry per line.
pub fn write_jsonl<W: Write>(catalog: &ChordCatalog, out: &mut W) -> Result<()> {
    for e in catalog.entries() {
        writeln!(out, "{}", to_json_line(e)?)?;
    }
    Ok(())
}

/// Reads a catalog written by [`write_jsonl`]. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(input: R, dedupe_tol: f64) -> Result<ChordCatalog> {
    let mut entries = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str::<CatalogEntry>(&line)?);
    }
    entries.sort_by(|a, b| a.tau_reeb.total_cmp(&b.tau_reeb));
    Ok(ChordCatalog { entries, dedupe_tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tau: f64, start: [f64; 2], end: [f64; 2]) -> CatalogEntry {
        CatalogEntry {
            mu: 0.1,
            jacobi: -1.9,
            branch: Branch::Plus,
            side: Side::Positive,
            pericenter_index: 1,
            s0: 0.3,
            tau_reeb: tau,
            action: tau,
            flight_time: 1.0,
            r_peri: 1e-20,
            endpoint_start_b: start,
            endpoint_end_b: end,
            symmetric: true,
            periodic_candidate: false,
            integrator_tolerances: IntegrationSettings::default(),
            artifact_version: ARTIFACT_VERSION.into(),
            dm_ds: Some(-3.5),
            run_config: Value::Null,
        }
    }

    #[test]
    fn duplicates_and_near_neighbours() {
        let mut cat = ChordCatalog::default();
        let e = entry(1.0, [1.8, 0.1], [1.8, -0.1]);
        assert_eq!(cat.insert_entry(e.clone()).unwrap(), InsertOutcome::Inserted(0));
        assert_eq!(cat.insert_entry(e.clone()).unwrap(), InsertOutcome::Duplicate(0));
        let mut far = e.clone();
        far.tau_reeb += 10.0 * DEDUPE_TOL;
        assert_eq!(cat.insert_entry(far).unwrap(), InsertOutcome::Inserted(1));
        assert_eq!(cat.len(), 2);
    }

    #[test]
    fn entries_stay_sorted() {
        let mut cat = ChordCatalog::default();
        for tau in [3.0, 1.0, 2.0] {
            cat.insert_entry(entry(tau, [tau, 0.0], [0.0, tau])).unwrap();
        }
        let taus: Vec<f64> = cat.entries().iter().map(|e| e.tau_reeb).collect();
        assert_eq!(taus, vec![1.0, 2.0, 3.0]);
        assert!(cat.insert_entry(entry(-1.0, [9.0, 9.0], [9.0, 9.0])).is_err());
    }

    #[test]
    fn closed_chains_are_flagged() {
        let mut cat = ChordCatalog::default();
        let (x, y) = ([1.8, 0.3], [1.8, -0.3]);
        cat.insert_entry(entry(1.0, x, y)).unwrap();
        assert!(!cat.entries()[0].periodic_candidate);
        cat.insert_entry(entry(2.0, y, x)).unwrap();
        assert!(cat.entries().iter().all(|e| e.periodic_candidate));
        cat.insert_entry(entry(3.0, [1.0, 1.0], [1.0, 1.0])).unwrap();
        assert!(cat.entries()[2].periodic_candidate);
    }

    #[test]
    fn seventeen_digits_on_disk() {
        let e = entry(0.1 + 0.2, [1.0 / 3.0, -2.0], [1e-300, 5e-324]);
        let line = to_json_line(&e).unwrap();
        assert!(line.contains("\"tau_reeb\":3.0000000000000004e-1"), "{line}");
        assert!(line.contains("\"pericenter_index\":1"));
        let back: CatalogEntry = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
    }
}
