use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mtsf::{ComplexSignal, ConnectionGraph};
use serde::Serialize;

pub fn read_graph(path: &Path) -> Result<ConnectionGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConnectionGraph::parse_edge_list(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_signal(path: &Path) -> Result<ComplexSignal> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ComplexSignal::parse_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_omega(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    mtsf::synthetic::parse_omega_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Prints one JSON record on its own line.
pub fn emit<T: Serialize>(record: &T) -> Result<()> {
    println!("{}", serde_json::to_string(record)?);
    Ok(())
}
