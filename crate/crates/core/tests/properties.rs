mod common;

use coexplore::frontier::{detect_frontiers, filter_frontiers, is_frontier_cell, FilterOptions, FilterOrder};
use coexplore::metrics::{cosine, mse, ncc, ssim};
use coexplore::overlap::compute_iou;
use coexplore::planner::{plan_path, PlanOptions};
use coexplore::server::{info_gain, merge_points, select_goal, Request, ServerConfig, ServerMode};
use coexplore::world::{merge_maps, merge_value};
use coexplore::{CellIndex, FrontierPoint, FrontierSource, OccupancyGrid, Point2, Pose2D};
use proptest::prelude::*;

fn cell_value() -> impl Strategy<Value = i8> {
    prop_oneof![Just(-1i8), Just(0i8), Just(100i8)]
}

fn grid(w: usize, h: usize) -> impl Strategy<Value = OccupancyGrid> {
    prop::collection::vec(cell_value(), w * h)
        .prop_map(move |cells| OccupancyGrid::from_cells(w, h, 0.5, Point2::new(0.0, 0.0), cells).unwrap())
}

fn points(n: usize) -> impl Strategy<Value = Vec<FrontierPoint>> {
    prop::collection::vec((0.0..10.0f64, 0.0..10.0f64), 0..n)
        .prop_map(|v| v.into_iter().map(|(x, y)| FrontierPoint::local(0, x, y)).collect())
}

fn image(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..255.0f64, n)
}

proptest! {
    #[test]
    fn merge_value_is_a_semilattice(a in cell_value(), b in cell_value(), c in cell_value()) {
        prop_assert_eq!(merge_value(a, b), merge_value(b, a));
        prop_assert_eq!(merge_value(a, a), a);
        prop_assert_eq!(merge_value(merge_value(a, b), c), merge_value(a, merge_value(b, c)));
    }

    #[test]
    fn merge_maps_is_cellwise(m1 in grid(6, 5), m2 in grid(6, 5)) {
        let m = merge_maps(&[&m1, &m2], 0).unwrap();
        for (i, v) in m.cells().iter().enumerate() {
            prop_assert_eq!(*v, merge_value(m1.cells()[i], m2.cells()[i]));
        }
        let again = merge_maps(&[&m, &m2], 0).unwrap();
        prop_assert_eq!(again.cells(), m.cells());
    }

    #[test]
    fn iou_is_symmetric(m1 in grid(7, 6), m2 in grid(7, 6)) {
        match (compute_iou(&m1, &m2), compute_iou(&m2, &m1)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.map().cells(), b.map().cells());
                prop_assert!((a.area() - b.area()).abs() < 1e-12);
            }
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn frontier_points_are_frontier_cells(m in grid(8, 8), min_cluster in 1usize..4) {
        let pts = detect_frontiers(&m, min_cluster, FrontierSource::Local(0));
        let total = m.cells().iter().enumerate().filter(|(i, _)| is_frontier_cell(&m, m.cell_at(*i))).count();
        prop_assert!(pts.len() * min_cluster <= total);
        for p in &pts {
            let c = m.world_to_grid_pt(p.position).unwrap();
            prop_assert!(is_frontier_cell(&m, c));
        }
    }

    #[test]
    fn filter_spacing(local in points(30), iou in points(10), d in 0.1..3.0f64, literal in any::<bool>()) {
        let iou: Vec<FrontierPoint> = iou.iter().map(|p| FrontierPoint::iou(p.position.x, p.position.y)).collect();
        let order = if literal { FilterOrder::Literal } else { FilterOrder::IouFirst };
        let out = filter_frontiers(&local, &iou, d, FilterOptions { order, keep_iou: false });
        for (i, a) in out.iter().enumerate() {
            prop_assert!(local.contains(a));
            for b in &out[i + 1..] {
                prop_assert!(a.position.dist(&b.position) >= d);
            }
            if !literal {
                prop_assert!(iou.iter().all(|q| q.position.dist(&a.position) >= d));
            }
        }
    }

    #[test]
    fn info_gain_is_a_fraction(m in grid(8, 8), x in -1.0..5.0f64, y in -1.0..5.0f64, rad in 0.3..2.0f64) {
        let g = info_gain(&m, Point2::new(x, y), rad);
        prop_assert!((0.0..=1.0).contains(&g));
        let blank = OccupancyGrid::new(8, 8, 0.5, Point2::new(0.0, 0.0)).unwrap();
        prop_assert_eq!(info_gain(&blank, Point2::new(x, y), rad), 1.0);
    }

    #[test]
    fn merged_points_are_sorted_spaced_and_bounded(m in grid(10, 10), cands in points(25)) {
        let cands: Vec<FrontierPoint> = cands.iter().map(|p| FrontierPoint::local(0, p.position.x / 2.0, p.position.y / 2.0)).collect();
        let cfg = ServerConfig::default();
        let out = merge_points(&cands, &m, &cfg);
        prop_assert!(out.len() <= cfg.params.max_pts);
        for w in out.windows(2) {
            prop_assert!(w[0].info_gain >= w[1].info_gain);
        }
        for (i, a) in out.iter().enumerate() {
            prop_assert!(a.info_gain > 0.0);
            for b in &out[i + 1..] {
                prop_assert!(a.position.dist(&b.position) >= cfg.params.dist_thres);
            }
        }
        let plain = merge_points(&cands, &m, &ServerConfig { mode: ServerMode::Plain, ..cfg });
        prop_assert!(plain.len() >= out.len());
    }

    #[test]
    fn select_goal_ignores_reward_scale(
        pts in points(12),
        rewards in prop::collection::vec(0.0..1.0f64, 12),
        k in 0.01..100.0f64,
        spaced in points(3),
    ) {
        let spaced: Vec<Point2> = spaced.iter().map(|p| p.position).collect();
        let r = &rewards[..pts.len()];
        let scaled: Vec<f64> = r.iter().map(|v| v * k).collect();
        let a = select_goal(&pts, r, &spaced, &[], 1.0);
        let b = select_goal(&pts, &scaled, &spaced, &[], 1.0);
        prop_assert_eq!(a, b);
        if let Some(i) = a {
            prop_assert!(spaced.iter().all(|s| s.dist(&pts[i].position) >= 1.0));
        }
    }

    #[test]
    fn quality_identities(a in image(100), b in image(100), k in 0.1..10.0f64) {
        prop_assert_eq!(mse(&a, &a), 0.0);
        prop_assert!((ssim(&a, &a, 10, 10) - 1.0).abs() < 1e-9);
        prop_assert!((ncc(&a, &a) - 1.0).abs() < 1e-9);
        prop_assert!((mse(&a, &b) - mse(&b, &a)).abs() < 1e-9);
        prop_assert!((ssim(&a, &b, 10, 10) - ssim(&b, &a, 10, 10)).abs() < 1e-9);
        prop_assert!((ncc(&a, &b) - ncc(&b, &a)).abs() < 1e-9);
        let ka: Vec<f64> = a.iter().map(|v| v * k).collect();
        prop_assert!((cosine(&ka, &b) - cosine(&a, &b)).abs() < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ncc(&a, &b)));
    }

    #[test]
    fn cell_center_round_trips(w in 1usize..30, h in 1usize..30, res in 0.05..2.0f64, ox in -10.0..10.0f64, oy in -10.0..10.0f64, fx in 0.0..1.0f64, fy in 0.0..1.0f64) {
        let m = OccupancyGrid::new(w, h, res, Point2::new(ox, oy)).unwrap();
        let c = CellIndex::new(((w as f64 * fx) as usize).min(w - 1), ((h as f64 * fy) as usize).min(h - 1));
        let p = m.cell_center(c);
        prop_assert_eq!(m.world_to_grid_pt(p), Some(c));
        prop_assert_eq!(m.grid_to_world(c.x, c.y).unwrap(), p);
    }

    #[test]
    fn planned_paths_are_valid(m in grid(10, 10), s in 0usize..100, t in 0usize..100) {
        let (sc, tc) = (m.cell_at(s), m.cell_at(t));
        prop_assume!(m.get(sc) == 0);
        let path = plan_path(&m, m.cell_center(sc), m.cell_center(tc), PlanOptions::default()).unwrap();
        let Some(path) = path else { return Ok(()) };
        prop_assert_eq!(path.cells.first(), Some(&sc));
        prop_assert_eq!(path.cells.last(), Some(&tc));
        let mut len = 0.0;
        for w in path.cells.windows(2) {
            let (dx, dy) = (w[0].x.abs_diff(w[1].x), w[0].y.abs_diff(w[1].y));
            prop_assert!(dx <= 1 && dy <= 1 && dx + dy > 0);
            len += if dx + dy == 2 { std::f64::consts::SQRT_2 } else { 1.0 };
        }
        prop_assert!(path.cells.iter().all(|c| m.get(*c) == 0));
        prop_assert!((path.length - len * m.resolution()).abs() < 1e-9);
        let straight = sc.x.abs_diff(tc.x).max(sc.y.abs_diff(tc.y)) as f64;
        prop_assert!(path.length + 1e-9 >= straight * m.resolution());
    }

    #[test]
    fn requests_round_trip(robot in 0usize..8, xs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..6), th in -3.1..3.1f64, kind in 0u8..5) {
        let pts: Vec<Point2> = xs.iter().map(|&(x, y)| Point2::new(x, y)).collect();
        let req = match kind {
            0 => Request::SubmitPoints { robot, points: pts },
            1 => Request::RequestGoal { robot, pose: Pose2D::new(xs.first().map_or(0.0, |p| p.0), 1.5, th) },
            2 => Request::ReportReached { robot, at: Point2::new(0.25, -7.125) },
            3 => Request::Release { robot },
            _ => Request::Cancel { robot },
        };
        let back: Request = req.to_string().parse().unwrap();
        prop_assert_eq!(back, req);
    }
}
