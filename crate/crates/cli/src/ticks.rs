use std::path::Path;

use anyhow::{bail, Context, Result};
use renewal_pricer::calibration::TickSeries;
use serde::Deserialize;

pub const HEADER: [&str; 2] = ["t_seconds", "price"];

#[derive(Debug, Deserialize)]
struct Row {
    t_seconds: f64,
    price: f64,
}

/// Reads a `t_seconds,price` tick file.
pub fn read_ticks(path: &Path) -> Result<TickSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open tick file {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        bail!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut epochs = Vec::new();
    let mut prices = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?;
        epochs.push(row.t_seconds);
        prices.push(row.price);
    }
    TickSeries::new(epochs, prices).with_context(|| format!("{}", path.display()))
}
