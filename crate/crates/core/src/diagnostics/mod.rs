//! Contact-geometric checks and the chord catalog.

mod action;
mod catalog;
mod starshape;

pub use self::action::{
    chord_action, chord_action_resampled, gauss_legendre, half_action, liouville_integral, liouville_integral_on,
    step_breaks, RESOLUTION_TOL,
};
pub use self::catalog::{
    catalog_insert, normalize_floats, read_jsonl, to_json_line, write_jsonl, CatalogEntry, ChordCatalog, InsertOutcome,
    ARTIFACT_VERSION, DEDUPE_TOL,
};
pub use self::starshape::{base_points, ray_directions, starshape_scan, RayFailure, StarshapeReport};
