//! Plot-ready export of metric scores against DMOS.

use std::fmt::Write as _;
use std::path::Path;

use super::{linear_fit, zscore};
use crate::cli::fmt_num;
use crate::error::{Error, Result};

/// Per-pair scores of one model, aligned with the pair list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub label: String,
    pub scores: Vec<f64>,
}

/// Least-squares line `dmos ≈ slope·score + intercept` on the exported axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterFit {
    pub label: String,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub used: usize,
    /// Rows dropped because a log axis met a non-positive value.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSummary {
    pub rows: usize,
    pub fits: Vec<ScatterFit>,
}

fn validate(series: &[ScoreSeries], dmos: &[f64]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("scatter export needs at least one score series".into()));
    }
    for s in series {
        if s.scores.len() != dmos.len() {
            return Err(Error::Shape(format!(
                "series {} has {} scores for {} pairs",
                s.label,
                s.scores.len(),
                dmos.len()
            )));
        }
        if let Some(i) = s.scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("series {} has a non-finite score at row {}", s.label, i + 1)));
        }
    }
    if dmos.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("dmos contains non-finite values".into()));
    }
    Ok(())
}

/// Renders the scatter table and fits.
///
/// Columns are `row,dmos,<label>...`, plus `<label>_excluded` flags when
/// `log_axes` is set. Fits are listed in leading `#` comment lines. With
/// `zscore` each score column is standardized separately before export.
pub fn render_scatter(series: &[ScoreSeries], dmos: &[f64], zscore_scores: bool, log_axes: bool) -> Result<(String, ScatterSummary)> {
    validate(series, dmos)?;
    let columns: Vec<Vec<f64>> = series
        .iter()
        .map(|s| if zscore_scores { zscore(&s.scores) } else { Ok(s.scores.clone()) })
        .collect::<Result<_>>()?;

    let mut fits = Vec::with_capacity(series.len());
    let mut flags: Vec<Vec<bool>> = Vec::with_capacity(series.len());
    for (s, col) in series.iter().zip(&columns) {
        let keep: Vec<bool> = col
            .iter()
            .zip(dmos)
            .map(|(x, y)| !log_axes || (*x > 0.0 && *y > 0.0))
            .collect();
        let axis = |v: f64| if log_axes { v.log10() } else { v };
        let (xs, ys): (Vec<f64>, Vec<f64>) = col
            .iter()
            .zip(dmos)
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|((x, y), _)| (axis(*x), axis(*y)))
            .unzip();
        let fit = linear_fit(&xs, &ys).ok();
        fits.push(ScatterFit {
            label: s.label.clone(),
            slope: fit.map(|f| f.0),
            intercept: fit.map(|f| f.1),
            used: xs.len(),
            excluded: dmos.len() - xs.len(),
        });
        flags.push(keep);
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# axes: {}{}",
        if log_axes { "log10" } else { "linear" },
        if zscore_scores { ", scores z-scored per model" } else { "" }
    );
    for f in &fits {
        let _ = writeln!(
            out,
            "# fit {}: slope={} intercept={} used={} excluded={}",
            f.label,
            f.slope.map(fmt_num).unwrap_or_else(|| "-".into()),
            f.intercept.map(fmt_num).unwrap_or_else(|| "-".into()),
            f.used,
            f.excluded
        );
    }
    let mut header = vec!["row".to_string(), "dmos".to_string()];
    header.extend(series.iter().map(|s| s.label.replace(',', ";")));
    if log_axes {
        header.extend(series.iter().map(|s| format!("{}_excluded", s.label.replace(',', ";"))));
    }
    let _ = writeln!(out, "{}", header.join(","));
    for (i, y) in dmos.iter().enumerate() {
        let mut line = vec![(i + 1).to_string(), fmt_num(*y)];
        line.extend(columns.iter().map(|c| fmt_num(c[i])));
        if log_axes {
            line.extend(flags.iter().map(|f| u8::from(!f[i]).to_string()));
        }
        let _ = writeln!(out, "{}", line.join(","));
    }
    Ok((
        out,
        ScatterSummary {
            rows: dmos.len(),
            fits,
        },
    ))
}

pub fn export_scatter(
    series: &[ScoreSeries],
    dmos: &[f64],
    zscore_scores: bool,
    log_axes: bool,
    path: impl AsRef<Path>,
) -> Result<ScatterSummary> {
    let path = path.as_ref();
    let (text, summary) = render_scatter(series, dmos, zscore_scores, log_axes)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(summary)
}
