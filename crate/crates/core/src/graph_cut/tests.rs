use super::*;
use crate::point::Point2;
use crate::template::{NodeGrid, SeedPoint, Template};
use crate::volume::Slice2D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn grid_from_grey(k: usize, n: usize, seed_grey: f64, grey: Vec<f64>) -> NodeGrid {
    let positions = (0..k)
        .flat_map(|i| {
            (0..n).map(move |j| Point2::from_polar(Point2::default(), (j + 1) as f64, TAU * i as f64 / k as f64))
        })
        .collect();
    NodeGrid {
        k,
        n,
        seed: Point2::default(),
        seed_grey,
        positions,
        grey,
    }
}

// every boundary vector in [0, n)^k, filtered by the cyclic constraint
fn brute_force_optimum(costs: &CostMatrix, delta: usize) -> f64 {
    let (k, n) = (costs.k(), costs.n());
    let mut b = vec![0usize; k];
    let mut best = f64::INFINITY;
    loop {
        if is_feasible(&b, n, delta) {
            best = best.min(costs.objective(&b));
        }
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            b[pos] += 1;
            if b[pos] < n {
                break;
            }
            b[pos] = 0;
            pos += 1;
        }
    }
}

fn random_costs(rng: &mut ChaCha8Rng, k: usize, n: usize) -> CostMatrix {
    CostMatrix::new(k, n, (0..k * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn costs_of_constant_slice_are_one() {
    let grid = grid_from_grey(4, 3, 9.0, vec![9.0; 12]);
    assert!(node_costs(&grid, 0.2).values().iter().all(|&c| c == 1.0));
}

#[test]
fn cost_of_contrast_step() {
    // seed 0, nodes 0 -> 10 -> 10
    let grid = grid_from_grey(3, 3, 0.0, [0.0, 10.0, 10.0].repeat(3));
    let c = node_costs(&grid, 0.2);
    assert_eq!(c.get(0, 0), 1.0);
    assert!((c.get(0, 1) - 0.1353352832366127).abs() < 1e-15);
    assert_eq!(c.get(0, 2), 1.0);
    assert!((c.get(1, 1) - (-2.0f64).exp()).abs() < 1e-15);
}

#[test]
fn small_graph_arc_census() {
    let costs = CostMatrix::new(3, 2, vec![0.5, 0.2, 0.9, 1.0, 0.3, 0.3]).unwrap();
    let g = FlowGraph::build(&costs, 0).unwrap();
    let count = |kind: ArcKind| g.arcs().iter().filter(|a| a.kind == kind).count();
    assert_eq!(count(ArcKind::SeedAnchor), 3);
    assert_eq!(count(ArcKind::IntraRay), 3);
    assert_eq!(count(ArcKind::InterRay), 12);
    assert_eq!(count(ArcKind::Terminal), 6);
    assert_eq!(g.arcs().len(), 24);
    assert_eq!(g.node_count(), 8);
    assert!(g
        .arcs()
        .iter()
        .filter(|a| a.kind != ArcKind::Terminal)
        .all(|a| a.capacity.is_infinite()));
    // ray 0: w = 0.2 - 0.5 < 0 -> source arc; ray 1: w = 0.1 -> sink arc
    assert!(g.arcs().contains(&FlowArc {
        from: 6,
        to: 1,
        capacity: Capacity::Finite(0.3),
        kind: ArcKind::Terminal
    }));
    let w = 1.0 - 0.9;
    assert!(g.arcs().contains(&FlowArc {
        from: 3,
        to: 7,
        capacity: Capacity::Finite(w),
        kind: ArcKind::Terminal
    }));
}

#[test]
fn infinity_dominates_finite_capacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let costs = random_costs(&mut rng, 5, 6);
    let g = FlowGraph::build(&costs, 1).unwrap();
    let inf = g.infinity().unwrap();
    assert!(inf > (5 * 6) as f64 * costs.values().iter().cloned().fold(0.0, f64::max) + 1.0);
}

#[test]
fn max_flow_small_examples() {
    let arc = |from, to, c| FlowArc {
        from,
        to,
        capacity: Capacity::Finite(c),
        kind: ArcKind::Other,
    };
    let g = FlowGraph::from_arcs(2, 0, 1, vec![arc(0, 1, 5.0)]).unwrap();
    let cut = g.max_flow().unwrap();
    assert_eq!(cut.flow_value, 5.0);
    assert_eq!(cut.source_side, vec![true, false]);
    let g = FlowGraph::from_arcs(
        4,
        0,
        3,
        vec![arc(0, 1, 3.0), arc(0, 2, 2.0), arc(1, 3, 2.0), arc(2, 3, 3.0)],
    )
    .unwrap();
    assert_eq!(g.max_flow().unwrap().flow_value, 4.0);
    assert!(FlowGraph::from_arcs(2, 0, 1, vec![arc(0, 1, -1.0)]).is_err());
    assert!(FlowGraph::from_arcs(2, 0, 0, vec![]).is_err());
}

#[test]
fn max_flow_matches_cut_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let inner = rng.random_range(0..=6usize);
        let nodes = inner + 2;
        let (s, t) = (inner, inner + 1);
        let arcs: Vec<FlowArc> = (0..rng.random_range(0..3 * nodes))
            .map(|_| FlowArc {
                from: rng.random_range(0..nodes),
                to: rng.random_range(0..nodes),
                capacity: Capacity::Finite(rng.random_range(0..=10) as f64),
                kind: ArcKind::Other,
            })
            .collect();
        let g = FlowGraph::from_arcs(nodes, s, t, arcs).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << inner) {
            let mut side: Vec<bool> = (0..inner).map(|v| mask >> v & 1 == 1).collect();
            side.extend([true, false]);
            best = best.min(g.cut_capacity(&side).unwrap());
        }
        let cut = g.max_flow().unwrap();
        assert_eq!(cut.flow_value, best);
        assert_eq!(g.cut_capacity(&cut.source_side), Some(best));
    }
}

#[test]
fn min_cut_matches_exhaustive_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..300 {
        let k = rng.random_range(3..=5);
        let n = rng.random_range(2..=5);
        let delta = rng.random_range(0..=2);
        let costs = random_costs(&mut rng, k, n);
        let (b, _) = solve_boundary(&costs, delta).unwrap();
        assert!(is_feasible(&b, n, delta), "case {case}: {b:?}");
        let opt = brute_force_optimum(&costs, delta);
        assert!(
            (costs.objective(&b) - opt).abs() < 1e-9,
            "case {case}: {} vs {opt}",
            costs.objective(&b)
        );
    }
}

#[test]
fn zero_delta_forces_flat_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let costs = random_costs(&mut rng, 7, 9);
        let (b, _) = solve_boundary(&costs, 0).unwrap();
        assert!(b.iter().all(|&x| x == b[0]), "{b:?}");
    }
}

#[test]
fn delta_two_bounds_neighbour_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let costs = random_costs(&mut rng, 12, 15);
        let (b, _) = solve_boundary(&costs, 2).unwrap();
        assert!((0..12).all(|i| b[i].abs_diff(b[(i + 1) % 12]) <= 2), "{b:?}");
    }
}

#[test]
fn boundary_extraction_edges() {
    let grid = grid_from_grey(3, 4, 0.0, vec![0.0; 12]);
    let costs = node_costs(&grid, 1.0);
    let mut all = vec![true; 12];
    all.extend([true, false]);
    let cut = extract_cut(
        &grid,
        &costs,
        &MinCut {
            flow_value: 0.0,
            source_side: all,
        },
    )
    .unwrap();
    assert_eq!(cut.boundary, vec![3, 3, 3]);
    assert_eq!(cut.contour[1], grid.position(1, 3));

    let mut first: Vec<bool> = (0..12).map(|v| v % 4 == 0).collect();
    first.extend([true, false]);
    let cut = extract_cut(
        &grid,
        &costs,
        &MinCut {
            flow_value: 0.0,
            source_side: first,
        },
    )
    .unwrap();
    assert_eq!(cut.boundary, vec![0, 0, 0]);

    let mut holes: Vec<bool> = (0..12).map(|v| v % 4 != 1).collect();
    holes.extend([true, false]);
    assert!(matches!(boundary_from_partition(3, 4, &holes), Err(Error::Internal(_))));
}

fn disk_slice(size: usize, center: Point2, radius: f64, inside: f64, outside: f64) -> Slice2D {
    let values = (0..size * size)
        .map(|i| {
            let p = Point2::new((i % size) as f64, (i / size) as f64);
            if p.distance(center) <= radius {
                inside
            } else {
                outside
            }
        })
        .collect();
    Slice2D::new(0, [size, size], [1.0, 1.0], values).unwrap()
}

fn circle_template(center: Point2, radius: f64, z: usize) -> Template {
    Template::new(
        (0..64)
            .map(|i| Point2::from_polar(center, radius, TAU * i as f64 / 64.0))
            .collect(),
        z,
    )
    .unwrap()
}

#[test]
fn disk_boundary_locks_to_edge() {
    let center = Point2::new(32.0, 32.0);
    let r = 10.0;
    let slice = disk_slice(64, center, r, 200.0, 50.0);
    let seed = SeedPoint {
        position: Point2::new(33.5, 31.0),
        z_index: 0,
    };
    let seg = SliceSegmentation::run(
        &slice,
        &circle_template(center, 2.0 * r, 0),
        seed,
        &GraphParams::default(),
    )
    .unwrap();
    // oracle: the object edge along each ray is where the analytic disk ends
    for i in 0..40 {
        let p = seg.cut.contour[i];
        let spacing = seg.grid.position(i, 1).distance(seg.grid.position(i, 0));
        let dist_from_edge = (p.distance(center) - r).abs();
        assert!(
            dist_from_edge <= spacing + 0.75,
            "ray {i}: {dist_from_edge} > {spacing}"
        );
    }
}

#[test]
fn constant_slice_gives_flat_boundary() {
    let slice = Slice2D::new(0, [40, 40], [1.0, 1.0], vec![5.0; 1600]).unwrap();
    let params = GraphParams {
        delta: 0,
        ..GraphParams::default()
    };
    let seed = SeedPoint {
        position: Point2::new(20.0, 20.0),
        z_index: 0,
    };
    let cut = segment_one_slice(
        &slice,
        &circle_template(Point2::new(20.0, 20.0), 10.0, 0),
        seed,
        &params,
    )
    .unwrap();
    assert!(cut.boundary.iter().all(|&b| b == cut.boundary[0]));
}

#[test]
fn operating_point_on_full_size_slice_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let values = (0..256 * 256).map(|_| rng.random_range(0.0..400.0)).collect();
    let slice = Slice2D::new(0, [256, 256], [0.8, 0.8], values).unwrap();
    let t = circle_template(Point2::new(128.0, 120.0), 30.0, 0);
    let seed = SeedPoint {
        position: Point2::new(126.0, 122.0),
        z_index: 0,
    };
    let a = segment_one_slice(&slice, &t, seed, &GraphParams::default()).unwrap();
    let b = segment_one_slice(&slice, &t, seed, &GraphParams::default()).unwrap();
    assert_eq!(a, b);
    assert!(is_feasible(&a.boundary, 40, 2));
    assert_eq!(a.cut_cost, a.flow_value);
}

#[test]
fn mismatched_slice_is_rejected() {
    let slice = Slice2D::new(3, [40, 40], [1.0, 1.0], vec![5.0; 1600]).unwrap();
    let seed = SeedPoint {
        position: Point2::new(20.0, 20.0),
        z_index: 3,
    };
    let t = circle_template(Point2::new(20.0, 20.0), 10.0, 2);
    assert!(matches!(
        segment_one_slice(&slice, &t, seed, &GraphParams::default()),
        Err(Error::Argument(_))
    ));
}

#[test]
fn params_validation() {
    assert!(GraphParams::default().validate().is_ok());
    for bad in [
        GraphParams {
            k: 2,
            ..Default::default()
        },
        GraphParams {
            n: 1,
            ..Default::default()
        },
        GraphParams {
            delta: 3,
            ..Default::default()
        },
        GraphParams {
            t_weight: 0.0,
            ..Default::default()
        },
        GraphParams {
            sf: -1.0,
            ..Default::default()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

proptest::proptest! {
    #[test]
    fn cut_structure_on_random_costs(
        k in 3usize..12,
        n in 2usize..12,
        delta in 0usize..=2,
        seed in proptest::prelude::any::<u64>(),
    ) {
        let costs = random_costs(&mut ChaCha8Rng::seed_from_u64(seed), k, n);
        let graph = FlowGraph::build(&costs, delta).unwrap();
        let cut = graph.max_flow().unwrap();
        for a in graph.arcs() {
            proptest::prop_assert!(!(a.capacity.is_infinite() && cut.source_side[a.from] && !cut.source_side[a.to]));
        }
        for i in 0..k {
            let ray = &cut.source_side[i * n..(i + 1) * n];
            let inside = ray.iter().take_while(|&&x| x).count();
            proptest::prop_assert!(inside >= 1 && ray[inside..].iter().all(|&x| !x));
        }
        let (b, _) = solve_boundary(&costs, delta).unwrap();
        proptest::prop_assert!(b.iter().all(|&x| x < n) && is_feasible(&b, n, delta));
        proptest::prop_assert_eq!(graph.max_flow().unwrap(), cut);
    }
}
