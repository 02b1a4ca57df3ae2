//! Shared fixtures for the benchmarks.

use dynkc_core::workload::{gen_random, sliding_window_trace, Event, Trace};
use dynkc_core::{Engine, Mode, PointRecord};

/// Clustered points: `seeds` centers in the unit square, 200 points each.
pub fn clustered(seeds: usize, rng_seed: u64) -> Vec<PointRecord> {
    gen_random(seeds, 200, 0.001, rng_seed).expect("valid parameters")
}

pub fn sliding(points: &[PointRecord], window: usize) -> Trace {
    sliding_window_trace(points, window, 0, 0).expect("valid window")
}

/// An engine holding the first `n` points, updated on the calling thread.
pub fn warm_engine(points: &[PointRecord], n: usize, epsilon: f64, mode: Mode) -> Engine {
    let mut engine = Engine::new(epsilon, None, mode).expect("feasible epsilon");
    engine.set_parallel(false);
    for p in &points[..n] {
        engine.insert(p.clone()).expect("distinct points");
    }
    engine
}

/// Applies every update of `trace`, skipping queries.
pub fn apply(engine: &mut Engine, trace: &Trace) {
    for event in &trace.events {
        match event {
            Event::Insert(p) => engine.insert(p.clone()).expect("fresh point"),
            Event::Delete(id) => {
                engine.delete(*id).expect("live point");
            }
            Event::Query => {}
        }
    }
}
