//! Per-epoch weight-adaptation statistics and their CSV form.
//!
//! CSV columns: `epoch,layer,clip_bound,switch_fraction,mean_quant_error,hist_bin_0,…,hist_bin_100`.
//! Histograms span each layer's clip range in 101 equal bins; weights outside
//! the range (possible only without clipping) saturate into the edge bins, so
//! every histogram sums to the layer's weight count.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::quant::{quantization_mse, ModeMap, QuantPlan};

pub const HISTOGRAM_BINS: usize = 101;

const HEADER: [&str; 5] = ["epoch", "layer", "clip_bound", "switch_fraction", "mean_quant_error"];

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTelemetry {
    pub layer: String,
    /// Histogram range is `[−clip_bound, clip_bound]`.
    pub clip_bound: f64,
    /// Fraction of weights whose mode code changed since the previous snapshot.
    pub switch_fraction: f64,
    pub mean_quant_error: f64,
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    /// 0 for the snapshot taken before training, `e` after epoch `e`.
    pub epoch: usize,
    pub layers: Vec<LayerTelemetry>,
}

/// 101-bin histogram of `weights` over `[−bound, bound]`, edges saturating.
pub fn histogram(weights: &[f64], bound: f64) -> Vec<u64> {
    let mut bins = vec![0u64; HISTOGRAM_BINS];
    let width = 2.0 * bound / HISTOGRAM_BINS as f64;
    for &w in weights {
        let idx = ((w + bound) / width).floor();
        let idx = if idx.is_nan() { 0.0 } else { idx.clamp(0.0, (HISTOGRAM_BINS - 1) as f64) };
        bins[idx as usize] += 1;
    }
    bins
}

/// Center of histogram bin `i` for a layer with clip bound `bound`.
pub fn bin_center(i: usize, bound: f64) -> f64 {
    let width = 2.0 * bound / HISTOGRAM_BINS as f64;
    -bound + (i as f64 + 0.5) * width
}

/// Takes a telemetry snapshot, comparing mode codes against `previous`.
pub fn snapshot(net: &Network, plan: &QuantPlan, epoch: usize, previous: Option<&ModeMap>) -> Result<(TelemetryRecord, ModeMap)> {
    let modes = plan.mode_map(net)?;
    let mut layers = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let Some(spec) = plan.for_layer(net, i)? else {
            continue;
        };
        let w = layer.weights.data();
        layers.push(LayerTelemetry {
            layer: layer.name().to_string(),
            clip_bound: spec.clip_bound(),
            switch_fraction: previous.map_or(0.0, |p| modes.switch_fraction(p, i)),
            mean_quant_error: quantization_mse(w, &spec),
            histogram: histogram(w, spec.clip_bound()),
        });
    }
    Ok((TelemetryRecord { epoch, layers }, modes))
}

pub fn write_csv<W: Write>(records: &[TelemetryRecord], mut out: W) -> std::io::Result<()> {
    write!(out, "{}", HEADER.join(","))?;
    for i in 0..HISTOGRAM_BINS {
        write!(out, ",hist_bin_{i}")?;
    }
    writeln!(out)?;
    for record in records {
        for l in &record.layers {
            write!(out, "{},{},{},{},{}", record.epoch, l.layer, l.clip_bound, l.switch_fraction, l.mean_quant_error)?;
            for c in &l.histogram {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Parses telemetry CSV back into records (grouped by consecutive epoch).
/// Errors carry the 1-based line number.
pub fn read_csv<R: BufRead>(input: R, source: &str) -> Result<Vec<TelemetryRecord>> {
    let bad = |line: usize, msg: String| Error::format(source, format!("line {line}: {msg}"));
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad(1, "missing header".into()))?
        .map_err(|e| Error::io(source, e))?;
    let columns = HEADER.len() + HISTOGRAM_BINS;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != columns || fields[..HEADER.len()] != HEADER {
        return Err(bad(1, "unexpected telemetry header".into()));
    }

    let mut records: Vec<TelemetryRecord> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != columns {
            return Err(bad(line_no, format!("expected {columns} fields, found {}", f.len())));
        }
        let epoch: usize = f[0].parse().map_err(|e| bad(line_no, format!("epoch: {e}")))?;
        let clip_bound: f64 = f[2].parse().map_err(|e| bad(line_no, format!("clip_bound: {e}")))?;
        if !(clip_bound > 0.0 && clip_bound.is_finite()) {
            return Err(bad(line_no, format!("clip_bound {clip_bound} must be positive")));
        }
        let switch_fraction: f64 = f[3].parse().map_err(|e| bad(line_no, format!("switch_fraction: {e}")))?;
        if !(0.0..=1.0).contains(&switch_fraction) {
            return Err(bad(line_no, format!("switch_fraction {switch_fraction} outside [0, 1]")));
        }
        let mean_quant_error: f64 = f[4].parse().map_err(|e| bad(line_no, format!("mean_quant_error: {e}")))?;
        let histogram = f[HEADER.len()..]
            .iter()
            .map(|s| s.parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(line_no, format!("histogram: {e}")))?;
        let entry = LayerTelemetry {
            layer: f[1].to_string(),
            clip_bound,
            switch_fraction,
            mean_quant_error,
            histogram,
        };
        match records.last_mut() {
            Some(r) if r.epoch == epoch => r.layers.push(entry),
            Some(r) if r.epoch > epoch => {
                return Err(bad(line_no, format!("epoch {epoch} after epoch {}", r.epoch)));
            }
            _ => records.push(TelemetryRecord {
                epoch,
                layers: vec![entry],
            }),
        }
    }
    Ok(records)
}

/// Mean switch fraction over the epochs in `epochs` (1-based, inclusive range),
/// averaged over the layers of each record.
pub fn mean_switch_fraction(records: &[TelemetryRecord], epochs: std::ops::RangeInclusive<usize>) -> f64 {
    let selected: Vec<f64> = records
        .iter()
        .filter(|r| epochs.contains(&r.epoch))
        .map(|r| r.layers.iter().map(|l| l.switch_fraction).sum::<f64>() / r.layers.len().max(1) as f64)
        .collect();
    selected.iter().sum::<f64>() / selected.len().max(1) as f64
}
