use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::WorkloadError;
use crate::metric::PointId;
use crate::navnet::Mode;

/// `exp(mean(ln v))`.
pub fn geometric_mean(values: &[f64]) -> Result<f64, WorkloadError> {
    if values.is_empty() {
        return Err(WorkloadError::EmptyMean);
    }
    if let Some(&bad) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(WorkloadError::NonPositive(bad));
    }
    let s: f64 = values.iter().map(|v| v.ln()).sum();
    Ok((s / values.len() as f64).exp())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub count: usize,
    pub total_ns: u64,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
}

impl TimingSummary {
    /// Nearest-rank percentiles over the samples.
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let rank =
            |q: f64| sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        let total: u64 = sorted.iter().sum();
        TimingSummary {
            count: sorted.len(),
            total_ns: total,
            mean_ns: total as f64 / sorted.len() as f64,
            p50_ns: rank(0.5),
            p99_ns: rank(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Names the dataset/trace pair; repeats of one instance share it.
    pub instance: String,
    pub epsilon: f64,
    pub k: usize,
    pub alpha: f64,
    pub m: u32,
    pub psi: f64,
    pub mode: Mode,
    pub trace_seed: u64,
    pub rng: String,
    pub repeat: u32,
    pub events: usize,
}

/// Everything measured in one replay of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub config: RunConfig,
    pub insert: TimingSummary,
    pub delete: TimingSummary,
    pub query: TimingSummary,
    /// Objective of the returned centers at each query, evaluated after the replay.
    pub phi: Vec<f64>,
    pub cost_bound: Vec<f64>,
    pub centers: Vec<Vec<PointId>>,
    /// Objective of a fresh greedy recompute on the same live set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gonzalez_phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gonzalez_ns: Option<Vec<u64>>,
}

impl RunMetrics {
    /// Engine time: all updates plus all queries.
    pub fn engine_ns(&self) -> u64 {
        self.insert.total_ns + self.delete.total_ns + self.query.total_ns
    }

    pub fn update_ns_per_op(&self) -> f64 {
        let n = self.insert.count + self.delete.count;
        if n == 0 {
            0.0
        } else {
            (self.insert.total_ns + self.delete.total_ns) as f64 / n as f64
        }
    }

    /// Per-query `φ(engine) / φ(greedy)`; 1 where both are 0.
    pub fn phi_ratios(&self) -> Option<Vec<f64>> {
        let g = self.gonzalez_phi.as_ref()?;
        Some(
            self.phi
                .iter()
                .zip(g)
                .map(|(&e, &g)| {
                    if g == 0.0 {
                        if e == 0.0 {
                            1.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        e / g
                    }
                })
                .collect(),
        )
    }
}

/// One `(mode, ε, k)` cell: arithmetic means over repeats of an instance, then
/// geometric means across instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub mode: Mode,
    pub epsilon: f64,
    pub k: usize,
    pub instances: usize,
    pub runs: usize,
    pub engine_ns: f64,
    pub update_ns_per_op: f64,
    pub query_ns_per_op: f64,
    pub gonzalez_ns: Option<f64>,
    /// Greedy recompute time divided by engine time.
    pub speedup: Option<f64>,
    pub phi_ratio: Option<f64>,
    pub phi_ratio_max: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Positive entries only; `None` if nothing remains.
fn gmean_positive(v: &[f64]) -> Option<f64> {
    let pos: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && x.is_finite())
        .collect();
    geometric_mean(&pos).ok()
}

/// Pure function of the per-run records; cells come out sorted by mode, ε, k.
pub fn aggregate(runs: &[RunMetrics]) -> Vec<CellAggregate> {
    type CellKey = (String, u64, usize);
    let mut cells: BTreeMap<CellKey, BTreeMap<String, Vec<&RunMetrics>>> = BTreeMap::new();
    for r in runs {
        let c = &r.config;
        cells
            .entry((c.mode.to_string(), c.epsilon.to_bits(), c.k))
            .or_default()
            .entry(c.instance.clone())
            .or_default()
            .push(r);
    }
    let mut out: Vec<CellAggregate> = cells
        .into_values()
        .map(|instances| {
            let first = &instances.values().next().expect("nonempty")[0].config;
            let mut engine = Vec::new();
            let mut update = Vec::new();
            let mut query = Vec::new();
            let mut greedy = Vec::new();
            let mut speedup = Vec::new();
            let mut ratio = Vec::new();
            let mut ratio_max = f64::NEG_INFINITY;
            let mut runs = 0;
            for reps in instances.values() {
                runs += reps.len();
                let e = mean(
                    &reps
                        .iter()
                        .map(|r| r.engine_ns() as f64)
                        .collect::<Vec<_>>(),
                );
                engine.push(e);
                update.push(mean(
                    &reps
                        .iter()
                        .map(|r| r.update_ns_per_op())
                        .collect::<Vec<_>>(),
                ));
                query.push(mean(
                    &reps.iter().map(|r| r.query.mean_ns).collect::<Vec<_>>(),
                ));
                let g: Vec<f64> = reps
                    .iter()
                    .filter_map(|r| r.gonzalez_ns.as_ref().map(|v| v.iter().sum::<u64>() as f64))
                    .collect();
                if !g.is_empty() {
                    let g = mean(&g);
                    greedy.push(g);
                    if e > 0.0 {
                        speedup.push(g / e);
                    }
                }
                let ratios: Vec<f64> = reps
                    .iter()
                    .filter_map(|r| r.phi_ratios())
                    .flatten()
                    .collect();
                ratio_max = ratios.iter().copied().fold(ratio_max, f64::max);
                if let Some(gm) = gmean_positive(&ratios) {
                    ratio.push(gm);
                }
            }
            CellAggregate {
                mode: first.mode,
                epsilon: first.epsilon,
                k: first.k,
                instances: instances.len(),
                runs,
                engine_ns: gmean_positive(&engine).unwrap_or(0.0),
                update_ns_per_op: gmean_positive(&update).unwrap_or(0.0),
                query_ns_per_op: gmean_positive(&query).unwrap_or(0.0),
                gonzalez_ns: gmean_positive(&greedy),
                speedup: gmean_positive(&speedup),
                phi_ratio: gmean_positive(&ratio),
                phi_ratio_max: ratio_max.is_finite().then_some(ratio_max),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.mode.to_string(), a.epsilon, a.k)
            .partial_cmp(&(b.mode.to_string(), b.epsilon, b.k))
            .expect("finite epsilon")
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Speedup,
    PhiRatio,
    UpdateMicros,
    EngineMillis,
}

impl TableMetric {
    fn title(self) -> &'static str {
        match self {
            TableMetric::Speedup => "speedup vs greedy recompute",
            TableMetric::PhiRatio => "phi ratio vs greedy recompute (geometric mean)",
            TableMetric::UpdateMicros => "mean update time (us)",
            TableMetric::EngineMillis => "engine time (ms)",
        }
    }

    fn value(self, c: &CellAggregate) -> Option<f64> {
        match self {
            TableMetric::Speedup => c.speedup,
            TableMetric::PhiRatio => c.phi_ratio,
            TableMetric::UpdateMicros => Some(c.update_ns_per_op / 1e3),
            TableMetric::EngineMillis => Some(c.engine_ns / 1e6),
        }
    }
}

/// Markdown table for one mode: rows are k, columns are ε.
pub fn format_table(cells: &[CellAggregate], metric: TableMetric, mode: Mode) -> String {
    let cells: Vec<&CellAggregate> = cells.iter().filter(|c| c.mode == mode).collect();
    let mut eps: Vec<f64> = cells.iter().map(|c| c.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut ks: Vec<usize> = cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut s = String::new();
    let _ = writeln!(s, "{} ({mode} mode)\n", metric.title());
    let _ = write!(s, "| k |");
    for e in &eps {
        let _ = write!(s, " eps={e} |");
    }
    let _ = write!(s, "\n|---|");
    for _ in &eps {
        let _ = write!(s, "---|");
    }
    s.push('\n');
    for k in ks {
        let _ = write!(s, "| {k} |");
        for e in &eps {
            let v = cells
                .iter()
                .find(|c| c.k == k && c.epsilon == *e)
                .and_then(|c| metric.value(c));
            match v {
                Some(v) => {
                    let _ = write!(s, " {v:.3} |");
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s
}
