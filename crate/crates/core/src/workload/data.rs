use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::WorkloadError;
use crate::metric::PointRecord;

/// Identifier of the generator behind every seeded draw, recorded in metrics.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Reads `x,y[,...]` lines. Only the first two columns are used; repeated
/// coordinate pairs keep their first occurrence. Ids follow line order.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<PointRecord>, WorkloadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| WorkloadError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(WorkloadError::Parse {
                line,
                message: format!("expected two columns, found {}", record.len()),
            });
        }
        let mut coords = [0.0; 2];
        for (c, field) in coords.iter_mut().zip(record.iter()) {
            *c = field.parse().map_err(|_| WorkloadError::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
        }
        let point = PointRecord::new(out.len() as u64, coords.to_vec()).map_err(|e| {
            WorkloadError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if seen.insert(point.coord_key()) {
            out.push(point);
        }
    }
    Ok(out)
}

pub fn load_points_csv(path: impl AsRef<Path>) -> Result<Vec<PointRecord>, WorkloadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| WorkloadError::io(path, e))?;
    read_points_csv(file)
}

/// Writes one point per line, all coordinates comma separated. Values round-trip exactly.
pub fn write_points_csv(
    path: impl AsRef<Path>,
    points: &[PointRecord],
) -> Result<(), WorkloadError> {
    let path = path.as_ref();
    let io = |e| WorkloadError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for p in points {
        let line: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Gaussian blobs: `n_seeds` centers uniform in `[-1, 1]²`, then `per_seed`
/// points around each with the given per-coordinate variance. Exact repeats
/// are redrawn.
pub fn gen_random(
    n_seeds: usize,
    per_seed: usize,
    variance: f64,
    rng_seed: u64,
) -> Result<Vec<PointRecord>, WorkloadError> {
    if n_seeds == 0 || per_seed == 0 {
        return Err(WorkloadError::InvalidParam(
            "seed count and points per seed must be at least 1".into(),
        ));
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(WorkloadError::InvalidParam(format!(
            "variance must be positive, got {variance}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = Normal::new(0.0, variance.sqrt())
        .map_err(|e| WorkloadError::InvalidParam(e.to_string()))?;
    let seeds: Vec<[f64; 2]> = (0..n_seeds)
        .map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
        .collect();
    let mut seen = HashSet::with_capacity(n_seeds * per_seed);
    let mut out = Vec::with_capacity(n_seeds * per_seed);
    for s in &seeds {
        let mut made = 0;
        while made < per_seed {
            let coords = vec![s[0] + noise.sample(&mut rng), s[1] + noise.sample(&mut rng)];
            let p = PointRecord::new(out.len() as u64, coords)?;
            if seen.insert(p.coord_key()) {
                out.push(p);
                made += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{distance, pairwise_extremes};

    #[test]
    fn two_lines() {
        let pts = read_points_csv("0,0\n3,4\n".as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(distance(&pts[0], &pts[1]).unwrap(), 5.0);
    }

    #[test]
    fn duplicates_and_extra_columns() {
        let pts = read_points_csv("1,2,x\n3, 4\n1,2\n5,6,7,8\n".as_bytes()).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].coords(), &[5.0, 6.0]);
        assert_eq!(pts[2].id.0, 2);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = read_points_csv("0,0\n1,2\nfoo,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Parse { line: 3, .. }), "{err}");
        let err = read_points_csv("0,0\n7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let pts = gen_random(3, 50, 0.001, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_points_csv(&path, &pts).unwrap();
        assert_eq!(load_points_csv(&path).unwrap(), pts);
        assert!(matches!(
            load_points_csv(dir.path().join("missing.csv")),
            Err(WorkloadError::Io { .. })
        ));
    }

    #[test]
    fn generator_shape_and_determinism() {
        let a = gen_random(100, 200, 0.001, 7).unwrap();
        assert_eq!(a.len(), 20_000);
        assert_eq!(a, gen_random(100, 200, 0.001, 7).unwrap());
        assert_ne!(a, gen_random(100, 200, 0.001, 8).unwrap());
        let keys: HashSet<_> = a.iter().map(|p| p.coord_key()).collect();
        assert_eq!(keys.len(), a.len());
        assert!(gen_random(0, 1, 0.1, 0).is_err());
        assert!(gen_random(1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn loaded_sample_aspect_ratio_matches_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sample.csv");
        write_points_csv(&path, &gen_random(10, 100, 0.001, 3).unwrap()).unwrap();
        let pts = load_points_csv(&path).unwrap();
        assert_eq!(pts.len(), 1000);
        let stats = pairwise_extremes(&pts).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d = distance(a, b).unwrap();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        assert_eq!(stats.aspect_ratio, hi / lo);
    }
}
