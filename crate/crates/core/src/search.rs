//! The full chord search: scan every requested (branch, side) family,
//! refine every sign-change bracket, and collect the results in a catalog.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{catalog_insert, ChordCatalog, InsertOutcome};
use crate::dynamics::{lagrange_points, SystemParams};
use crate::error::{Error, Result};
use crate::integrator::IntegrationSettings;
use crate::regularization::RegularizedLevel;
use crate::shooting::{
    brackets_from_samples, hill_interval_if_bounded, refine_chord, scan_samples, Bracket, Branch, Chord,
    ShootingOptions, Side,
};

/// Default scan grid points per family.
pub const DEFAULT_GRID: usize = 200;
/// Default scans start this fraction of the way out from `O`.
pub const DEFAULT_INNER_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mu: f64,
    pub jacobi: f64,
    pub branches: Vec<Branch>,
    pub sides: Vec<Side>,
    /// Explicit scan range; must not contain `0`. When absent each side is
    /// scanned across its Hill interval.
    pub s_range: Option<(f64, f64)>,
    pub grid: usize,
    pub shooting: ShootingOptions,
    pub integrator: IntegrationSettings,
    /// Allows levels at or above the first critical value, where the Hill
    /// interval is unbounded and an explicit range is required.
    pub force: bool,
}

impl SearchConfig {
    pub fn new(mu: f64, jacobi: f64) -> Self {
        Self {
            mu,
            jacobi,
            branches: vec![Branch::Plus, Branch::Minus],
            sides: vec![Side::Negative, Side::Positive],
            s_range: None,
            grid: DEFAULT_GRID,
            shooting: ShootingOptions::default(),
            integrator: IntegrationSettings::default(),
            force: false,
        }
    }

    pub fn level(&self) -> Result<RegularizedLevel> {
        Ok(RegularizedLevel::from_jacobi(SystemParams::new(self.mu)?, self.jacobi))
    }

    /// The scanned families with their ranges, in a fixed order.
    pub fn families(&self) -> Result<Vec<Family>> {
        let level = self.level()?;
        let critical = lagrange_points(&level.params)?.first_critical_value;
        let below = self.jacobi < critical;
        if !below && !self.force {
            return Err(Error::AboveCritical {
                jacobi: self.jacobi,
                critical,
            });
        }
        if self.grid < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        let ranges: Vec<(Side, (f64, f64))> = match self.s_range {
            Some((lo, hi)) => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidParameter(format!("empty s-range {lo}:{hi}")));
                }
                if lo <= 0.0 && hi >= 0.0 {
                    return Err(Error::InvalidParameter(format!("s-range {lo}:{hi} contains O")));
                }
                if below {
                    let hill = hill_interval_if_bounded(&level)?.expect("bounded below the critical value");
                    if !(hill.contains(lo) && hill.contains(hi)) {
                        return Err(Error::OutsideHill {
                            s: if hill.contains(lo) { hi } else { lo },
                            lo: hill.s_min,
                            hi: hill.s_max,
                        });
                    }
                }
                let side = Side::of(lo);
                if self.sides.contains(&side) {
                    vec![(side, (lo, hi))]
                } else {
                    Vec::new()
                }
            }
            None => {
                let Some(hill) = hill_interval_if_bounded(&level)? else {
                    return Err(Error::InvalidParameter(
                        "above the first critical value an explicit s-range is required".into(),
                    ));
                };
                let edge = 1.0 - 1e-9;
                self.sides
                    .iter()
                    .map(|&side| match side {
                        Side::Negative => (side, (hill.s_min * edge, hill.s_min * DEFAULT_INNER_FRACTION)),
                        Side::Positive => (side, (hill.s_max * DEFAULT_INNER_FRACTION, hill.s_max * edge)),
                    })
                    .collect()
            }
        };
        let mut out = Vec::new();
        for &branch in &self.branches {
            for &(side, range) in &ranges {
                out.push(Family { branch, side, range });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub branch: Branch,
    pub side: Side,
    pub range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionKind {
    /// The orbit collides at an earlier pericenter; the shorter chord is
    /// found under that index.
    Concatenation,
    /// No sign change; needs a minimization of `|m|` instead.
    Tangential,
    /// A refined chord failed its invariants.
    Invariant,
    /// Bisection or integration broke down.
    Numerical,
}

impl RejectionKind {
    fn of(e: &Error) -> Self {
        match e {
            Error::IntermediateCollision { .. } => RejectionKind::Concatenation,
            Error::TangentialRoot { .. } => RejectionKind::Tangential,
            Error::Integrity(_) => RejectionKind::Invariant,
            _ => RejectionKind::Numerical,
        }
    }
}

/// A bracket that did not produce a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub family: Family,
    pub bracket: Bracket,
    pub kind: RejectionKind,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub catalog: ChordCatalog,
    /// Refined chords in family, pericenter-index and grid order; duplicates
    /// included.
    pub chords: Vec<(Family, Chord, InsertOutcome)>,
    pub rejections: Vec<Rejection>,
    pub brackets: usize,
}

/// Runs the search on the current rayon pool. The outcome does not depend on
/// the number of threads.
pub fn run_search(config: &SearchConfig) -> Result<SearchOutcome> {
    let level = config.level()?;
    let families = config.families()?;
    let opts = config.shooting;
    let settings = config.integrator;
    settings.validate()?;

    let mut jobs: Vec<(Family, Bracket)> = Vec::new();
    for fam in &families {
        let rows = scan_samples(fam.range, config.grid, fam.branch, &level, &opts, &settings);
        for br in brackets_from_samples(&rows, &opts) {
            jobs.push((*fam, br));
        }
    }
    let brackets = jobs.len();
    let refined: Vec<(Family, Bracket, Result<Chord>)> = jobs
        .into_par_iter()
        .map(|(fam, br)| {
            let r = refine_chord(&br, &opts, &settings, &level);
            (fam, br, r)
        })
        .collect();

    let mut catalog = ChordCatalog::default();
    let mut chords = Vec::new();
    let mut rejections = Vec::new();
    for (family, bracket, r) in refined {
        match r.and_then(|chord| catalog_insert(&mut catalog, &chord).map(|o| (chord, o))) {
            Ok((chord, outcome)) => chords.push((family, chord, outcome)),
            Err(e) => rejections.push(Rejection {
                family,
                bracket,
                kind: RejectionKind::of(&e),
                reason: e.to_string(),
            }),
        }
    }
    Ok(SearchOutcome {
        catalog,
        chords,
        rejections,
        brackets,
    })
}
