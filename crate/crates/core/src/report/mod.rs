//! Reporting: closed-form rate bounds, empirical rate fits and the
//! benchmark suite driver.

mod fit;
mod suite;
mod theory;

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use fit::{fit_power_law, fit_rates, LineFit, RateReport, MIN_FIT_POINTS, ZERO_METRIC};
pub use suite::{
    run_suite, run_suite_file, ProblemSource, RunSummary, SuiteConfig, SuiteOutcome, SuiteSummary, OUT_DIR_ENV,
};
pub use theory::{check_bounds, BoundViolation, BoundsContext};

/// Writes `bytes` to a temporary sibling and renames it over `path`, creating
/// parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
