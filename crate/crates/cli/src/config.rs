use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context};
use reebchord::diagnostics::{normalize_floats, ARTIFACT_VERSION};
use reebchord::dynamics::{lagrange_points, SystemParams};
use reebchord::integrator::IntegrationSettings;
use reebchord::search::SearchConfig;
use serde::Serialize;
use serde_json::Value;

/// `--jacobi` value: a number, or `auto-X` for `first_critical_value - X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobiArg {
    Value(f64),
    BelowCritical(f64),
}

impl FromStr for JacobiArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
        let v = match s.strip_prefix("auto-") {
            Some(rest) => JacobiArg::BelowCritical(parse(rest)?),
            None => JacobiArg::Value(parse(s)?),
        };
        match v {
            JacobiArg::Value(x) | JacobiArg::BelowCritical(x) if !x.is_finite() => {
                Err(format!("non-finite value {s:?}"))
            }
            _ => Ok(v),
        }
    }
}

impl fmt::Display for JacobiArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JacobiArg::Value(x) => write!(f, "{x}"),
            JacobiArg::BelowCritical(x) => write!(f, "auto-{x}"),
        }
    }
}

impl JacobiArg {
    pub fn resolve(&self, params: &SystemParams) -> reebchord::Result<f64> {
        Ok(match *self {
            JacobiArg::Value(c) => c,
            JacobiArg::BelowCritical(x) => lagrange_points(params)?.first_critical_value - x,
        })
    }
}

/// `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
        Ok(Range(p(lo)?, p(hi)?))
    }
}

/// Comma-separated `q1,q2,p1,p2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateArg(pub [f64; 4]);

impl FromStr for StateArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("expected q1,q2,p1,p2, got {s:?}"));
        }
        let mut out = [0.0; 4];
        for (slot, t) in out.iter_mut().zip(parts) {
            *slot = t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"))?;
        }
        Ok(StateArg(out))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StarshapeGrid {
    pub base_grid: usize,
    pub ray_grid: usize,
}

/// Everything needed to reproduce a run; embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub artifact_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobi_arg: Option<String>,
    pub integrator: IntegrationSettings,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starshape: Option<StarshapeGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn new(command: &str, integrator: IntegrationSettings, k_max: usize) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            command: command.to_string(),
            mu: None,
            jacobi: None,
            jacobi_arg: None,
            integrator,
            k_max,
            search: None,
            starshape: None,
            initial: None,
            regularized: None,
            catalog: None,
            index: None,
            out: None,
        }
    }

    pub fn to_value(&self) -> anyhow::Result<Value> {
        let mut v = serde_json::to_value(self).context("serializing the run configuration")?;
        normalize_floats(&mut v);
        Ok(v)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string(&self.to_value()?)?)
    }
}

pub fn settings(rel_tol: f64, abs_tol: f64, t_max: f64) -> anyhow::Result<IntegrationSettings> {
    let s = IntegrationSettings::default()
        .with_tolerances(rel_tol, abs_tol)
        .with_t_max(t_max);
    if let Err(e) = s.validate() {
        bail!(crate::UsageError(e.to_string()));
    }
    Ok(s)
}
