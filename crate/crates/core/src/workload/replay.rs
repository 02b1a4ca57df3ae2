use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use super::metrics::{RunConfig, RunMetrics, TimingSummary};
use super::trace::{Event, Trace};
use super::{unknown_id, WorkloadError, RNG_ALGORITHM};
use crate::engine::{Engine, Solution};
use crate::metric::{PointId, PointRecord};
use crate::navnet::ValidationReport;
use crate::oracles::{eval_cost, gonzalez};

#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    pub instance: String,
    pub repeat: u32,
    /// Also time a fresh greedy solution on the live set at every query.
    pub compare_gonzalez: bool,
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Replays `trace` on a fresh engine, answering every query for `k`.
///
/// Timings cover only engine calls. The objective of each answer is evaluated
/// after the replay, by walking the trace a second time to rebuild the live set
/// at each query.
pub fn replay(
    trace: &Trace,
    engine: &mut Engine,
    k: usize,
    opts: &ReplayOptions,
) -> Result<RunMetrics, WorkloadError> {
    if !engine.is_empty() {
        return Err(WorkloadError::InvalidParam(
            "replay needs an empty engine".into(),
        ));
    }
    let mut ins = Vec::new();
    let mut dels = Vec::new();
    let mut qs = Vec::new();
    let mut answers: Vec<Arc<Solution>> = Vec::new();
    for (i, event) in trace.events.iter().enumerate() {
        match event {
            Event::Insert(p) => {
                let p = p.clone();
                let t = Instant::now();
                let r = engine.insert(p);
                ins.push(elapsed_ns(t));
                r.map_err(|e| WorkloadError::trace(i, e.to_string()))?;
            }
            Event::Delete(id) => {
                let t = Instant::now();
                let r = engine.delete(*id);
                dels.push(elapsed_ns(t));
                if !r.map_err(|e| WorkloadError::trace(i, e.to_string()))? {
                    return Err(unknown_id(i, *id));
                }
            }
            Event::Query => {
                let t = Instant::now();
                let r = engine.solution(k);
                qs.push(elapsed_ns(t));
                answers.push(r.map_err(|e| WorkloadError::trace(i, e.to_string()))?);
            }
        }
    }

    let mut phi = Vec::with_capacity(answers.len());
    let mut greedy_phi = Vec::new();
    let mut greedy_ns = Vec::new();
    let mut answer = answers.iter();
    for_each_query_live_set(trace, |live| {
        let sol = answer.next().expect("one answer per query");
        phi.push(eval_cost(live, &sol.centers)?.phi);
        if opts.compare_gonzalez {
            let t = Instant::now();
            let centers = gonzalez(live, k)?;
            greedy_ns.push(elapsed_ns(t));
            greedy_phi.push(eval_cost(live, &centers)?.phi);
        }
        Ok(())
    })?;

    let cfg = engine.config();
    Ok(RunMetrics {
        config: RunConfig {
            instance: opts.instance.clone(),
            epsilon: cfg.epsilon,
            k,
            alpha: cfg.alpha,
            m: cfg.m,
            psi: cfg.psi,
            mode: cfg.mode,
            trace_seed: trace.seed,
            rng: RNG_ALGORITHM.into(),
            repeat: opts.repeat,
            events: trace.events.len(),
        },
        insert: TimingSummary::from_samples(&ins),
        delete: TimingSummary::from_samples(&dels),
        query: TimingSummary::from_samples(&qs),
        phi,
        cost_bound: answers.iter().map(|s| s.cost_bound).collect(),
        centers: answers.iter().map(|s| s.centers.clone()).collect(),
        gonzalez_phi: opts.compare_gonzalez.then_some(greedy_phi),
        gonzalez_ns: opts.compare_gonzalez.then_some(greedy_ns),
    })
}

/// Calls `f` with the live points (id order) at every query of the trace.
fn for_each_query_live_set(
    trace: &Trace,
    mut f: impl FnMut(&[PointRecord]) -> Result<(), WorkloadError>,
) -> Result<(), WorkloadError> {
    let mut live: BTreeMap<PointId, PointRecord> = BTreeMap::new();
    for (i, event) in trace.events.iter().enumerate() {
        match event {
            Event::Insert(p) => {
                live.insert(p.id, p.clone());
            }
            Event::Delete(id) => {
                live.remove(id).ok_or_else(|| unknown_id(i, *id))?;
            }
            Event::Query => {
                let pts: Vec<PointRecord> = live.values().cloned().collect();
                f(&pts)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Validate after every `every`-th event (and after the last one); 0 or 1
    /// means after every event.
    pub every: usize,
    /// Query sizes checked at each query event: the returned centers must be
    /// within the reported bound of every live point.
    pub ks: Vec<usize>,
    /// Corrupts one stored counter of the first net after this event index.
    pub inject_fault_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ValidationFailure {
    pub event_index: usize,
    /// Failing nets as `(p, report)`; empty when a query check failed.
    pub nets: Vec<(u32, ValidationReport)>,
    pub detail: String,
}

/// Replays `trace` and checks every net after each event. Returns the first
/// failure, if any.
pub fn replay_validated(
    trace: &Trace,
    engine: &mut Engine,
    opts: &ValidateOptions,
) -> Result<Option<ValidationFailure>, WorkloadError> {
    let every = opts.every.max(1);
    let last = trace.events.len().saturating_sub(1);
    for (i, event) in trace.events.iter().enumerate() {
        match event {
            Event::Insert(p) => engine
                .insert(p.clone())
                .map_err(|e| WorkloadError::trace(i, e.to_string()))?,
            Event::Delete(id) => {
                if !engine.delete(*id)? {
                    return Err(unknown_id(i, *id));
                }
            }
            Event::Query => {
                let live = engine.live_points();
                for &k in &opts.ks {
                    let sol = engine.solution(k)?;
                    let phi = eval_cost(&live, &sol.centers)?.phi;
                    if sol.centers.len() > k || phi > sol.cost_bound {
                        return Ok(Some(ValidationFailure {
                            event_index: i,
                            nets: Vec::new(),
                            detail: format!(
                                "k={k}: {} centers, phi {phi} against bound {}",
                                sol.centers.len(),
                                sol.cost_bound
                            ),
                        }));
                    }
                }
            }
        }
        if opts.inject_fault_at == Some(i) {
            let net = &engine.nets()[0];
            let level = net.bounds().map(|b| b.0).unwrap_or(0);
            let value = net.count_at(level) + 1;
            log::warn!("injecting a counter fault at event {i}");
            engine.corrupt_counter(1, level, value);
        }
        if i % every == 0 || i == last {
            let nets = engine.validate();
            if !nets.is_empty() {
                let detail = nets
                    .iter()
                    .map(|(p, r)| format!("net {p}: {} violation(s)", r.len()))
                    .collect::<Vec<_>>()
                    .join(", ");
                return Ok(Some(ValidationFailure {
                    event_index: i,
                    nets,
                    detail,
                }));
            }
        }
    }
    Ok(None)
}
