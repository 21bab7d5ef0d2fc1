//! Per-batch metric series, summaries, histograms and their CSV forms.
//!
//! CSV dialect: comma separator, `\n` line endings, one header row. Count
//! columns are bare integers; time columns carry fixed 6-decimal formatting
//! so re-runs with the same seed are byte-identical.

use thiserror::Error;

use crate::exec::BatchStats;
use crate::ledger::Slot;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarize an empty series")]
    EmptySeries,
    #[error("histogram bins must have positive width and max")]
    BadBins,
    #[error("malformed csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
}

/// Batch metric columns in file order. The flag marks time-valued columns
/// (6-decimal formatting); the rest are exact counts.
pub const BATCH_COLUMNS: [(&str, bool); 8] = [
    ("hits", false),
    ("misses", false),
    ("evictions", false),
    ("pc_time_us", true),
    ("prune_time_us", true),
    ("executed", false),
    ("deferred", false),
    ("cu", false),
];

/// Metrics that get per-batch histogram output.
pub const HISTOGRAM_METRICS: [&str; 4] = ["misses", "evictions", "pc_time_us", "prune_time_us"];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sum: f64,
    pub count: u64,
}

/// Exact min/max/sum over a series; the mean is sum/count.
pub fn summarize(series: &MetricSeries) -> Result<SummaryRow, MetricsError> {
    if series.values.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    for &v in &series.values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let count = series.values.len() as u64;
    Ok(SummaryRow {
        name: series.name.clone(),
        min,
        max,
        mean: sum / count as f64,
        sum,
        count,
    })
}

/// Half-open bins `[start, start + width)` from zero up to `max_value`;
/// values at or above `max_value` pool into a final overflow bin starting
/// there. Bins are emitted even when empty so histograms line up across
/// runs.
pub fn histogram(
    values: &[f64],
    bin_width: f64,
    max_value: f64,
) -> Result<Vec<(f64, u64)>, MetricsError> {
    if bin_width <= 0.0 || max_value <= 0.0 || bin_width.is_nan() || max_value.is_nan() {
        return Err(MetricsError::BadBins);
    }
    let regular_bins = (max_value / bin_width).ceil() as usize;
    let mut counts = vec![0u64; regular_bins + 1];
    for &v in values {
        if v >= max_value {
            counts[regular_bins] += 1;
        } else {
            let idx = ((v.max(0.0)) / bin_width).floor() as usize;
            counts[idx.min(regular_bins - 1)] += 1;
        }
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let start = if i == regular_bins {
                max_value
            } else {
                i as f64 * bin_width
            };
            (start, c)
        })
        .collect())
}

/// Histogram bin parameters for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub bin_width: f64,
    pub max_value: f64,
}

/// Bin parameters for the four per-batch histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub misses: HistogramSpec,
    pub evictions: HistogramSpec,
    pub pc_time_us: HistogramSpec,
    pub prune_time_us: HistogramSpec,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            misses: HistogramSpec {
                bin_width: 1.0,
                max_value: 50.0,
            },
            evictions: HistogramSpec {
                bin_width: 1.0,
                max_value: 50.0,
            },
            pc_time_us: HistogramSpec {
                bin_width: 10_000.0,
                max_value: 400_000.0,
            },
            prune_time_us: HistogramSpec {
                bin_width: 100.0,
                max_value: 5_000.0,
            },
        }
    }
}

impl MetricsConfig {
    pub fn spec_for(&self, metric: &str) -> Option<&HistogramSpec> {
        match metric {
            "misses" => Some(&self.misses),
            "evictions" => Some(&self.evictions),
            "pc_time_us" => Some(&self.pc_time_us),
            "prune_time_us" => Some(&self.prune_time_us),
            _ => None,
        }
    }
}

/// All per-batch series of one run, in batch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesStore {
    pub slots: Vec<Slot>,
    pub batch_indices: Vec<u64>,
    pub series: Vec<MetricSeries>,
}

impl SeriesStore {
    pub fn new() -> Self {
        Self {
            slots: Vec::new(),
            batch_indices: Vec::new(),
            series: BATCH_COLUMNS
                .iter()
                .map(|(name, _)| MetricSeries {
                    name: (*name).to_string(),
                    values: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn record_batch(&mut self, stats: &BatchStats) {
        self.slots.push(stats.slot);
        self.batch_indices.push(stats.batch_index);
        let values = [
            stats.hits as f64,
            stats.misses as f64,
            stats.evictions as f64,
            stats.pc_time_us,
            stats.prune_time_us,
            stats.executed as f64,
            stats.deferred as f64,
            stats.cu as f64,
        ];
        for (series, value) in self.series.iter_mut().zip(values) {
            series.values.push(value);
        }
    }

    pub fn batch_count(&self) -> usize {
        self.slots.len()
    }

    pub fn series_named(&self, name: &str) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn summaries(&self) -> Result<Vec<SummaryRow>, MetricsError> {
        self.series.iter().map(summarize).collect()
    }
}

fn is_time_column(name: &str) -> bool {
    BATCH_COLUMNS
        .iter()
        .find(|(col, _)| *col == name)
        .map(|(_, time)| *time)
        .unwrap_or(true)
}

fn format_value(value: f64, time: bool) -> String {
    if time {
        format!("{value:.6}")
    } else {
        format!("{}", value as u64)
    }
}

pub fn batches_csv(store: &SeriesStore) -> String {
    let mut out = String::from("slot,batch_index");
    for (name, _) in BATCH_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for row in 0..store.batch_count() {
        out.push_str(&format!(
            "{},{}",
            store.slots[row], store.batch_indices[row]
        ));
        for (column, (_, time)) in store.series.iter().zip(BATCH_COLUMNS) {
            out.push(',');
            out.push_str(&format_value(column.values[row], time));
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("metric,min,max,mean,sum,count\n");
    for row in rows {
        let time = is_time_column(&row.name);
        out.push_str(&format!(
            "{},{},{},{:.6},{},{}\n",
            row.name,
            format_value(row.min, time),
            format_value(row.max, time),
            row.mean,
            format_value(row.sum, time),
            row.count,
        ));
    }
    out
}

pub fn histograms_csv(store: &SeriesStore, config: &MetricsConfig) -> Result<String, MetricsError> {
    let mut out = String::from("metric,bin_start,count\n");
    for metric in HISTOGRAM_METRICS {
        let series = store.series_named(metric).expect("known metric");
        let spec = config.spec_for(metric).expect("known metric");
        let time = is_time_column(metric);
        for (start, count) in histogram(&series.values, spec.bin_width, spec.max_value)? {
            out.push_str(&format!(
                "{},{},{}\n",
                metric,
                format_value(start, time),
                count
            ));
        }
    }
    Ok(out)
}

/// Summary rows for one cache size of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub cache_size: usize,
    pub rows: Vec<SummaryRow>,
    pub batch_count: u64,
}

/// Per-size summaries over the same workload and seed, ordered by cache
/// size descending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn stat(&self, cache_size: usize, metric: &str) -> Option<&SummaryRow> {
        self.entries
            .iter()
            .find(|e| e.cache_size == cache_size)?
            .rows
            .iter()
            .find(|r| r.name == metric)
    }

    pub fn mean(&self, cache_size: usize, metric: &str) -> Option<f64> {
        self.stat(cache_size, metric).map(|r| r.mean)
    }

    pub fn sum(&self, cache_size: usize, metric: &str) -> Option<f64> {
        self.stat(cache_size, metric).map(|r| r.sum)
    }
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("metric");
    for entry in &report.entries {
        out.push_str(&format!(",{}", entry.cache_size));
    }
    out.push('\n');
    let metrics = ["misses", "evictions", "pc_time_us", "prune_time_us"];
    for metric in metrics {
        for stat in ["sum", "mean"] {
            out.push_str(&format!("{metric}_{stat}"));
            for entry in &report.entries {
                let row = entry
                    .rows
                    .iter()
                    .find(|r| r.name == metric)
                    .expect("metric present");
                let value = if stat == "sum" { row.sum } else { row.mean };
                out.push(',');
                if stat == "mean" {
                    out.push_str(&format!("{value:.6}"));
                } else {
                    out.push_str(&format_value(value, is_time_column(metric)));
                }
            }
            out.push('\n');
        }
    }
    out.push_str("batches");
    for entry in &report.entries {
        out.push_str(&format!(",{}", entry.batch_count));
    }
    out.push('\n');
    out
}

/// Parses a batches.csv back into a series store, for re-aggregation.
pub fn parse_batches_csv(text: &str) -> Result<SeriesStore, MetricsError> {
    let mut lines = text.lines().enumerate();
    let expected_header = batches_csv(&SeriesStore::new());
    let expected_header = expected_header.trim_end();
    match lines.next() {
        Some((_, header)) if header == expected_header => {}
        Some((_, other)) => {
            return Err(MetricsError::MalformedCsv {
                line: 1,
                reason: format!("unexpected header {other:?}"),
            })
        }
        None => {
            return Err(MetricsError::MalformedCsv {
                line: 1,
                reason: "empty file".to_string(),
            })
        }
    }
    let mut store = SeriesStore::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + BATCH_COLUMNS.len() {
            return Err(MetricsError::MalformedCsv {
                line: line_no,
                reason: format!("expected {} fields", 2 + BATCH_COLUMNS.len()),
            });
        }
        let parse = |field: &str| -> Result<f64, MetricsError> {
            field
                .parse::<f64>()
                .map_err(|_| MetricsError::MalformedCsv {
                    line: line_no,
                    reason: format!("bad number {field:?}"),
                })
        };
        store.slots.push(parse(fields[0])? as Slot);
        store.batch_indices.push(parse(fields[1])? as u64);
        for (column, field) in store.series.iter_mut().zip(&fields[2..]) {
            column.values.push(parse(field)?);
        }
    }
    Ok(store)
}

/// Mean-consistency check used by re-aggregation: mean * count must equal
/// the sum within 1e-9 relative tolerance.
pub fn mean_consistent(row: &SummaryRow) -> bool {
    let lhs = row.mean * row.count as f64;
    let scale = row.sum.abs().max(1.0);
    (lhs - row.sum).abs() <= 1e-9 * scale
}
