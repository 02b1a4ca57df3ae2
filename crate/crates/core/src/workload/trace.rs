use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::WorkloadError;
use crate::metric::{PointId, PointRecord};

/// Chance that a random-mix step is a query.
pub const QUERY_PROBABILITY: f64 = 0.0005;

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Insert(PointRecord),
    Delete(PointId),
    Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    pub inserts: usize,
    pub deletes: usize,
    pub queries: usize,
    pub max_live: usize,
}

impl Trace {
    pub fn stats(&self) -> TraceStats {
        let mut s = TraceStats::default();
        let mut live = 0usize;
        for e in &self.events {
            match e {
                Event::Insert(_) => {
                    s.inserts += 1;
                    live += 1;
                    s.max_live = s.max_live.max(live);
                }
                Event::Delete(_) => {
                    s.deletes += 1;
                    live = live.saturating_sub(1);
                }
                Event::Query => s.queries += 1,
            }
        }
        s
    }

    /// Deletes must name live points, ids are never reused and queries need a
    /// live point.
    pub fn check(&self) -> Result<(), WorkloadError> {
        let mut live = HashSet::new();
        let mut used = HashSet::new();
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Insert(p) => {
                    if !used.insert(p.id) {
                        return Err(WorkloadError::trace(i, format!("id {} reused", p.id)));
                    }
                    live.insert(p.id);
                }
                Event::Delete(id) => {
                    if !live.remove(id) {
                        return Err(super::unknown_id(i, *id));
                    }
                }
                Event::Query => {
                    if live.is_empty() {
                        return Err(WorkloadError::trace(i, "query with no live points"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "#seed {}", self.seed)?;
        for e in &self.events {
            match e {
                Event::Insert(p) => {
                    write!(w, "+ {}", p.id)?;
                    for c in p.coords() {
                        write!(w, " {c}")?;
                    }
                    writeln!(w)?;
                }
                Event::Delete(id) => writeln!(w, "- {id}")?,
                Event::Query => writeln!(w, "?")?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, WorkloadError> {
        let mut seed = None;
        let mut events = Vec::new();
        for (n, line) in BufReader::new(r).lines().enumerate() {
            let line_no = n as u64 + 1;
            let line = line.map_err(|e| WorkloadError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let bad = |message: String| WorkloadError::Parse {
                line: line_no,
                message,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#seed") {
                seed = Some(
                    rest.trim()
                        .parse()
                        .map_err(|_| bad(format!("bad seed `{rest}`")))?,
                );
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = |s: Option<&str>| -> Result<PointId, WorkloadError> {
                let s = s.ok_or_else(|| bad("missing point id".into()))?;
                s.parse::<u64>()
                    .map(PointId)
                    .map_err(|_| bad(format!("bad point id `{s}`")))
            };
            match parts.next() {
                Some("?") => events.push(Event::Query),
                Some("-") => events.push(Event::Delete(id(parts.next())?)),
                Some("+") => {
                    let id = id(parts.next())?;
                    let coords = parts
                        .map(|c| {
                            c.parse::<f64>()
                                .map_err(|_| bad(format!("bad coordinate `{c}`")))
                        })
                        .collect::<Result<Vec<f64>, _>>()?;
                    let p = PointRecord::new(id, coords).map_err(|e| bad(e.to_string()))?;
                    events.push(Event::Insert(p));
                }
                Some(other) => return Err(bad(format!("unknown event `{other}`"))),
                None => {}
            }
        }
        let seed = seed.ok_or(WorkloadError::Parse {
            line: 1,
            message: "missing `#seed` header".into(),
        })?;
        Ok(Trace { seed, events })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
        let path = path.as_ref();
        let io = |e| WorkloadError::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorkloadError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| WorkloadError::io(path, e))?;
        Self::read_from(file)
    }
}

/// Point `t` is inserted at step `t` and deleted right before point `t + W`
/// arrives, so at most `W` points are ever live. A query follows every
/// `query_every` insertions (never, if 0).
pub fn sliding_window_trace(
    points: &[PointRecord],
    window: usize,
    query_every: usize,
    seed: u64,
) -> Result<Trace, WorkloadError> {
    if window == 0 {
        return Err(WorkloadError::InvalidParam(
            "window must be at least 1".into(),
        ));
    }
    let mut events = Vec::with_capacity(points.len() * 2);
    for (t, p) in points.iter().enumerate() {
        if t >= window {
            events.push(Event::Delete(points[t - window].id));
        }
        events.push(Event::Insert(p.clone()));
        if query_every > 0 && (t + 1) % query_every == 0 {
            events.push(Event::Query);
        }
    }
    Ok(Trace { seed, events })
}

/// Random interleaving over a shuffled point supply. Each step deletes a
/// uniformly random live point with probability `delete_frac`, queries with
/// probability `query_prob`, and inserts the next supply point otherwise.
/// Deletes and queries with nothing live become inserts. Stops when the supply
/// runs out or after `max_events` events.
pub fn random_mix_trace(
    points: &[PointRecord],
    delete_frac: f64,
    query_prob: f64,
    rng_seed: u64,
    max_events: Option<usize>,
) -> Result<Trace, WorkloadError> {
    if !(0.0..1.0).contains(&delete_frac)
        || !(0.0..1.0).contains(&query_prob)
        || delete_frac + query_prob >= 1.0
    {
        return Err(WorkloadError::InvalidParam(format!(
            "delete fraction {delete_frac} and query probability {query_prob} must be in [0, 1) with sum < 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut supply: Vec<PointRecord> = points.to_vec();
    supply.shuffle(&mut rng);
    let mut supply = supply.into_iter();
    let cap = max_events.unwrap_or(usize::MAX);
    let mut live: Vec<PointId> = Vec::new();
    let mut events = Vec::new();
    while events.len() < cap {
        let u: f64 = rng.random();
        if u < delete_frac && !live.is_empty() {
            let i = rng.random_range(0..live.len());
            events.push(Event::Delete(live.swap_remove(i)));
        } else if u >= delete_frac && u < delete_frac + query_prob && !live.is_empty() {
            events.push(Event::Query);
        } else {
            let Some(p) = supply.next() else { break };
            live.push(p.id);
            events.push(Event::Insert(p));
        }
    }
    Ok(Trace {
        seed: rng_seed,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: u64) -> Vec<PointRecord> {
        (0..n)
            .map(|i| PointRecord::new(i, vec![i as f64, 0.0]).unwrap())
            .collect()
    }

    #[test]
    fn sliding_window_unrolled() {
        let t = sliding_window_trace(&line(5), 2, 0, 1).unwrap();
        use Event::*;
        let ids: Vec<String> = t
            .events
            .iter()
            .map(|e| match e {
                Insert(p) => format!("+{}", p.id),
                Delete(id) => format!("-{id}"),
                Query => "?".into(),
            })
            .collect();
        assert_eq!(ids, ["+0", "+1", "-0", "+2", "-1", "+3", "-2", "+4"]);
        assert_eq!(t.stats().max_live, 2);
        t.check().unwrap();
        assert!(sliding_window_trace(&line(5), 0, 1, 1).is_err());
    }

    #[test]
    fn full_scale_query_count() {
        let pts = line(200_000);
        let t = sliding_window_trace(&pts, 60_000, 2_000, 0).unwrap();
        let s = t.stats();
        assert_eq!(s.queries, 100);
        assert_eq!(s.max_live, 60_000);
    }

    #[test]
    fn pure_insertion_mix() {
        let t = random_mix_trace(&line(300), 0.0, 0.0, 5, None).unwrap();
        assert_eq!(t.events.len(), 300);
        assert!(t.events.iter().all(|e| matches!(e, Event::Insert(_))));
    }

    #[test]
    fn mix_is_valid_and_capped() {
        let t = random_mix_trace(&line(2000), 0.3, 0.01, 11, None).unwrap();
        t.check().unwrap();
        assert_eq!(t.stats().inserts, 2000);
        let capped = random_mix_trace(&line(2000), 0.3, 0.01, 11, Some(100)).unwrap();
        assert_eq!(capped.events.len(), 100);
        assert_eq!(capped.events[..], t.events[..100]);
        assert!(random_mix_trace(&line(5), 0.7, 0.4, 1, None).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut t = random_mix_trace(&line(50), 0.2, 0.05, 3, None).unwrap();
        t.events.push(Event::Insert(
            PointRecord::new(999, vec![0.1, -2.5e-7]).unwrap(),
        ));
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = Trace::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = Trace::read_from("#seed 1\n+ 0 1 2\n* 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Parse { line: 3, .. }), "{err}");
        assert!(Trace::read_from("+ 0 1 2\n".as_bytes()).is_err());
        let err = Trace::read_from("#seed 1\n- x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Parse { line: 2, .. }));
    }

    #[test]
    fn check_catches_bad_traces() {
        let p = PointRecord::new(0, vec![1.0]).unwrap();
        let dead = Trace {
            seed: 0,
            events: vec![
                Event::Insert(p.clone()),
                Event::Delete(PointId(0)),
                Event::Delete(PointId(0)),
            ],
        };
        assert!(dead.check().is_err());
        let empty_query = Trace {
            seed: 0,
            events: vec![Event::Query],
        };
        assert!(empty_query.check().is_err());
        let reuse = Trace {
            seed: 0,
            events: vec![
                Event::Insert(p.clone()),
                Event::Delete(PointId(0)),
                Event::Insert(p),
            ],
        };
        assert!(reuse.check().is_err());
    }
}
