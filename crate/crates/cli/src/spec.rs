//! Command-line spec strings for gain distributions: the closed-form
//! families plus `table:<path>` for tabulated CDFs.

use fadcap_core::fading::{FadingDistribution, TabulatedCdf};

use crate::error::CliError;

/// `rayleigh`, `nakagami:m=<m>,omega=<omega>`, or `table:<path>`.
pub fn parse_dist(spec: &str) -> Result<FadingDistribution, CliError> {
    if let Some(path) = spec.strip_prefix("table:") {
        // A malformed or unreadable table file is a data problem, not a
        // flag problem: exit 1, not 2.
        let table = TabulatedCdf::from_path(path)
            .map_err(|e| CliError::Failure(format!("cannot load table {path:?}: {e}")))?;
        return Ok(FadingDistribution::Tabulated(table));
    }
    spec.parse().map_err(|e| CliError::Usage(format!("{e}")))
}
