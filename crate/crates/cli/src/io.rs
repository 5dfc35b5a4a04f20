//! Small TSV helpers shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Reads a two-column TSV, skipping `#` comments and an optional header row
/// matching `header`.
pub fn read_two_col(path: &Path, header: [&str; 2]) -> Result<Vec<(String, String)>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 2 {
            bail!(
                "{}:{}: expected 2 tab-separated fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            );
        }
        if rows.is_empty() && fields == header {
            continue;
        }
        rows.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(rows)
}

/// Writes per-instance estimates as `instance<TAB>z_hat`.
pub fn write_estimates(path: &Path, ids: &[String], z_hat: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(w, "instance\tz_hat")?;
    for (id, z) in ids.iter().zip(z_hat) {
        writeln!(w, "{id}\t{z}")?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path for an output file: the same path with `.json` appended.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
