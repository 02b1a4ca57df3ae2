use super::*;
use crate::oracles::check_rnet;
use proptest::prelude::*;

fn cfg(alpha: f64, p: u32, m: u32, mode: Mode) -> NetConfig {
    NetConfig::new(alpha, p, m, 4.0, mode)
}

fn pt(id: u64, c: &[f64]) -> PointRecord {
    PointRecord::new(id, c.to_vec()).unwrap()
}

fn assert_valid(net: &NavigatingNet, live: &[PointRecord]) {
    let report = net.validate(live);
    assert!(report.is_valid(), "{report}");
}

fn assert_rnets(net: &NavigatingNet, live: &[PointRecord]) {
    let Some((lo, hi)) = net.bounds() else { return };
    for i in lo - 1..=hi + 1 {
        let ground: Vec<PointRecord> = net
            .centers_at_scale(i - 1)
            .iter()
            .map(|id| net.point(*id).unwrap().clone())
            .collect();
        let check = check_rnet(&net.centers_at_scale(i), &ground, net.scale(i));
        assert!(check.is_valid(), "level {i}: {check:?}");
    }
    assert_eq!(net.centers_at_scale(lo).len(), live.len());
}

#[test]
fn scale_values() {
    let a = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
    assert_eq!(a.scale(3), 8.0);
    let b = NavigatingNet::new(cfg(2.0, 2, 2, Mode::List)).unwrap();
    assert_eq!(b.scale(3), 8.0);
    let c = NavigatingNet::new(cfg(2.0, 1, 2, Mode::List)).unwrap();
    assert!((c.scale(0) - 2f64.powf(-0.5)).abs() < 1e-15);
    assert!(a.is_empty());
    assert_eq!(a.bounds(), None);
    assert!(a.centers_at_scale(0).is_empty());
}

#[test]
fn level_for_is_tight() {
    let net = NavigatingNet::new(cfg(3.0, 2, 5, Mode::List)).unwrap();
    for d in [1e-9, 0.01, 0.5, 1.0, 2.999, 3.0, 7.5, 1e6] {
        let i = net.level_for(d);
        assert!(net.scale(i) >= d);
        assert!(net.scale(i - 1) < d);
    }
}

#[test]
fn bad_configs() {
    assert!(NavigatingNet::new(cfg(1.0, 1, 1, Mode::List)).is_err());
    assert!(NavigatingNet::new(cfg(2.0, 0, 1, Mode::List)).is_err());
    assert!(NavigatingNet::new(cfg(2.0, 3, 2, Mode::List)).is_err());
    assert!(NavigatingNet::new(NetConfig::new(2.0, 1, 1, 3.0, Mode::List)).is_err());
    assert!(NavigatingNet::new(NetConfig::new(2.0, 1, 1, 3.0, Mode::Tree)).is_ok());
}

#[test]
fn first_point_is_root() {
    let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
    net.insert(pt(7, &[1.0, 1.0])).unwrap();
    assert_eq!(net.root(), Some(PointId(7)));
    assert_eq!(net.bounds(), Some((0, 0)));
    assert_eq!(net.centers_at_scale(-40), vec![PointId(7)]);
    assert!(net.is_center_at(PointId(7), 1000));
    assert!(!net.is_center_at(PointId(8), 0));
    assert_valid(&net, &[pt(7, &[1.0, 1.0])]);
    net.delete(PointId(7)).unwrap();
    assert!(net.is_empty());
    assert!(net.validate(&[]).is_valid());
}

#[test]
fn two_points_split_below_their_distance() {
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(2.0, 1, 1, mode)).unwrap();
        let a = pt(0, &[0.0, 0.0]);
        let b = pt(1, &[0.0, 5.0]);
        net.insert(a.clone()).unwrap();
        net.insert(b.clone()).unwrap();
        assert_eq!(net.centers_at_scale(2).len(), 2);
        assert_eq!(net.centers_at_scale(3).len(), 1);
        assert_eq!(net.bounds(), Some((2, 3)));
        assert_valid(&net, &[a.clone(), b.clone()]);
        assert_rnets(&net, &[a, b]);
    }
}

#[test]
fn duplicates_rejected() {
    let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
    net.insert(pt(0, &[0.0, 0.0])).unwrap();
    net.insert(pt(1, &[3.0, 0.0])).unwrap();
    assert_eq!(
        net.insert(pt(1, &[9.0, 0.0])),
        Err(NetError::DuplicateId(PointId(1)))
    );
    assert_eq!(
        net.insert(pt(2, &[3.0, 0.0])),
        Err(NetError::DuplicatePoint {
            id: PointId(2),
            existing: PointId(1)
        })
    );
    assert!(matches!(
        net.insert(pt(3, &[1.0])),
        Err(NetError::Dimension { .. })
    ));
    assert_eq!(net.len(), 2);
}

#[test]
fn delete_of_pair_leaves_single_root() {
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(2.0, 1, 1, mode)).unwrap();
        net.insert(pt(0, &[0.0])).unwrap();
        net.insert(pt(1, &[6.0])).unwrap();
        assert!(net.delete(PointId(0)).unwrap());
        let mut only = NavigatingNet::new(cfg(2.0, 1, 1, mode)).unwrap();
        only.insert(pt(1, &[6.0])).unwrap();
        assert_eq!(net.root(), only.root());
        assert_eq!(net.bounds(), only.bounds());
        assert_eq!(net.centers_at_scale(0), only.centers_at_scale(0));
        assert!(!net.delete(PointId(0)).unwrap());
        assert_valid(&net, &[pt(1, &[6.0])]);
    }
}

#[test]
fn collinear_scale_query() {
    let pts = [pt(0, &[0.0]), pt(1, &[1.0]), pt(2, &[10.0])];
    let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
    for p in &pts {
        net.insert(p.clone()).unwrap();
    }
    let i = net.smallest_scale_with_at_most(2).unwrap();
    assert!(net.count_at(i) <= 2);
    assert!(net.count_at(i - 1) > 2);
    assert_eq!(
        net.smallest_scale_with_at_most(3).unwrap(),
        net.bounds().unwrap().0
    );
    assert_eq!(net.smallest_scale_with_at_most(0), Err(NetError::InvalidK));
    assert_eq!(net.count_at(1000), 1);
    assert_eq!(net.count_at(-1000), 3);
}

#[test]
fn climb_stays_within_geometric_bound() {
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(2.0, 1, 1, mode)).unwrap();
        let mut rng = 12345u64;
        let mut live = Vec::new();
        for id in 0..100u64 {
            rng = rng
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let x = (rng >> 33) as f64 / (1u64 << 31) as f64;
            rng = rng
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let y = (rng >> 33) as f64 / (1u64 << 31) as f64;
            let p = pt(id, &[x * 100.0, y * 100.0]);
            net.insert(p.clone()).unwrap();
            live.push(p);
        }
        assert_valid(&net, &live);
        let (lo, hi) = net.bounds().unwrap();
        let a = net.config().alpha;
        for target in lo..=hi {
            let bound = a / (a - 1.0) * net.scale(target);
            for p in &live {
                let c = net.climb_to_scale(p.id, target).unwrap();
                assert!(net.is_center_at(c, target));
                let d = crate::metric::distance(p, net.point(c).unwrap()).unwrap();
                assert!(d <= bound, "{d} > {bound}");
            }
        }
        let centers = net.centers_at_scale(hi - 1);
        assert_eq!(net.climb_to_scale(centers[0], hi - 1).unwrap(), centers[0]);
    }
}

#[test]
fn corrupted_counter_is_reported_once() {
    let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
    let live: Vec<PointRecord> = (0..20).map(|i| pt(i, &[(i * i) as f64, 0.0])).collect();
    for p in &live {
        net.insert(p.clone()).unwrap();
    }
    let (lo, _) = net.bounds().unwrap();
    let real = net.count_at(lo + 1);
    net.corrupt_counter(lo + 1, real + 3);
    let report = net.validate(&live);
    assert_eq!(report.len(), 1, "{report}");
    assert!(matches!(report.violations[0], Violation::Counter { .. }));
}

#[test]
fn membership_mismatch_is_reported() {
    let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::Tree)).unwrap();
    net.insert(pt(0, &[0.0])).unwrap();
    net.insert(pt(1, &[4.0])).unwrap();
    let report = net.validate(&[pt(0, &[0.0]), pt(2, &[1.0])]);
    assert!(matches!(
        &report.violations[0],
        Violation::PointSet { missing, unexpected, .. }
            if missing == &vec![PointId(2)] && unexpected == &vec![PointId(1)]
    ));
}

#[test]
fn top_down_matches_buckets() {
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(3.0, 1, 2, mode)).unwrap();
        for i in 0..60u64 {
            let x = (i as f64 * 0.37).sin() * 40.0;
            let y = (i as f64 * 1.91).cos() * 40.0;
            net.insert(pt(i, &[x, y])).unwrap();
        }
        let (lo, hi) = net.bounds().unwrap();
        for i in lo - 2..=hi + 2 {
            assert_eq!(net.centers_top_down(i), net.centers_at_scale(i));
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Insert(i16, i16),
    Delete(usize),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            3 => (-60i16..60, -60i16..60).prop_map(|(x, y)| Op::Insert(x, y)),
            2 => any::<usize>().prop_map(Op::Delete),
        ],
        1..70,
    )
}

fn run_ops(mode: Mode, alpha: f64, p: u32, m: u32, ops: Vec<Op>) -> Result<(), TestCaseError> {
    let mut net = NavigatingNet::new(cfg(alpha, p, m, mode)).unwrap();
    let mut live: Vec<PointRecord> = Vec::new();
    let mut next = 0u64;
    for op in ops {
        match op {
            Op::Insert(x, y) => {
                let p = pt(next, &[x as f64 / 4.0, y as f64 / 4.0]);
                next += 1;
                match net.insert(p.clone()) {
                    Ok(()) => live.push(p),
                    Err(NetError::DuplicatePoint { .. }) => {}
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            }
            Op::Delete(i) => {
                if live.is_empty() {
                    continue;
                }
                let p = live.swap_remove(i % live.len());
                prop_assert!(net.delete(p.id).unwrap());
            }
        }
        let report = net.validate(&live);
        prop_assert!(report.is_valid(), "{}", report);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn list_mode_invariants(ops in ops(), alpha in 1.5f64..6.0, m in 1u32..4, p in 0u32..4) {
        run_ops(Mode::List, alpha, p % m + 1, m, ops)?;
    }

    #[test]
    fn tree_mode_invariants(ops in ops(), alpha in 1.5f64..6.0, m in 1u32..4, p in 0u32..4) {
        run_ops(Mode::Tree, alpha, p % m + 1, m, ops)?;
    }

    #[test]
    fn is_center_matches_centers(ops in ops()) {
        let mut net = NavigatingNet::new(cfg(2.0, 1, 1, Mode::List)).unwrap();
        for (i, op) in ops.into_iter().enumerate() {
            if let Op::Insert(x, y) = op {
                let _ = net.insert(pt(i as u64, &[x as f64, y as f64]));
            }
        }
        if let Some((lo, hi)) = net.bounds() {
            for level in lo - 1..=hi + 1 {
                let centers = net.centers_at_scale(level);
                for id in net.ids() {
                    prop_assert_eq!(net.is_center_at(id, level), centers.contains(&id));
                }
            }
        }
    }
}

#[test]
fn thirty_inserts_then_ten_deletes() {
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(2.0, 1, 1, mode)).unwrap();
        let mut live: Vec<PointRecord> = (0..30u64)
            .map(|i| pt(i, &[((i * 7919) % 101) as f64, ((i * 104729) % 97) as f64]))
            .collect();
        for p in &live {
            net.insert(p.clone()).unwrap();
        }
        for k in 0..10 {
            let p = live.remove((k * 7) % live.len());
            net.delete(p.id).unwrap();
            assert_valid(&net, &live);
        }
        assert_eq!(live.len(), 20);
        assert_rnets(&net, &live);
    }
}

#[test]
fn grid_ties_on_repair_radius() {
    // on this grid a promoted point has a list member exactly ψ·scale away,
    // which sits exactly on the repair search radius around the deleted point
    let grid = [
        (2, 13),
        (7, 7),
        (0, 7),
        (2, 5),
        (3, 0),
        (10, 5),
        (3, 7),
        (8, 2),
        (0, 10),
        (9, 1),
        (14, 5),
        (15, 4),
        (1, 15),
        (0, 1),
        (7, 3),
        (6, 9),
        (8, 0),
        (9, 6),
        (11, 15),
        (4, 0),
        (4, 12),
        (15, 7),
        (5, 13),
        (7, 10),
        (8, 7),
        (10, 6),
    ];
    let alpha = 2.9858154565825297;
    for mode in [Mode::List, Mode::Tree] {
        let mut net = NavigatingNet::new(cfg(alpha, 2, 2, mode)).unwrap();
        let mut live: Vec<PointRecord> = Vec::new();
        for (i, &(x, y)) in grid.iter().enumerate() {
            if i >= 20 {
                let gone = live.remove(0);
                net.delete(gone.id).unwrap();
                assert_valid(&net, &live);
            }
            let p = pt(i as u64, &[x as f64, y as f64]);
            net.insert(p.clone()).unwrap();
            live.push(p);
            assert_valid(&net, &live);
        }
    }
}
