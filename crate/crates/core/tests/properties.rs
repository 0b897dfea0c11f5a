use cdfem::decompose::{decompose_mesh, interface_residual, DecomposeOptions};
use cdfem::levelset::{classify_cut, detect_cut, CutReport, ElementField, LevelSetField, Shape, Validity};
use cdfem::mesh::io::NativeMesh;
use cdfem::mesh::{build_cartesian, deform};
use cdfem::reconstruct::{reconstruct, NewtonOptions};
use cdfem::refelem::{Family, ReferenceElement};
use cdfem::{BoundingBox, Point2};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Triangle), Just(Family::Quadrilateral)]
}

/// Point inside the reference element from two unit-interval draws.
fn reference_point(family: Family, a: f64, b: f64) -> Point2<f64> {
    match family {
        Family::Triangle => {
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            Point2::new(a, b)
        }
        _ => Point2::new(2.0 * a - 1.0, 2.0 * b - 1.0),
    }
}

/// Gently curved field whose zero set passes through `p0` with normal `n`.
fn bent_line(p0: Point2<f64>, angle: f64, kappa: f64) -> impl Fn(Point2<f64>) -> f64 {
    let n = Point2::new(angle.cos(), angle.sin());
    move |p: Point2<f64>| {
        let d = p - p0;
        n.dot(d) + kappa * d.norm_squared()
    }
}

fn nodal(re: &ReferenceElement<f64>, f: impl Fn(Point2<f64>) -> f64) -> Vec<f64> {
    re.nodes().iter().map(|&p| f(p)).collect()
}

fn two_crossings(r: &CutReport<f64>) -> bool {
    r.validity == Validity::Valid && r.crossing_count() == 2
}

const SQUARE_SYMMETRIES: [fn(Point2<f64>) -> Point2<f64>; 8] = [
    |p| p,
    |p| Point2::new(-p.y, p.x),
    |p| Point2::new(-p.x, -p.y),
    |p| Point2::new(p.y, -p.x),
    |p| Point2::new(-p.x, p.y),
    |p| Point2::new(p.x, -p.y),
    |p| Point2::new(p.y, p.x),
    |p| Point2::new(-p.y, -p.x),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shape_functions_partition_unity(family in family(), order in 1usize..=8, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let re = ReferenceElement::<f64>::new(family, order).unwrap();
        let sv = re.eval(reference_point(family, a, b));
        let sum: f64 = sv.values.iter().sum();
        let gx: f64 = sv.gradients.iter().map(|g| g[0]).sum();
        let gy: f64 = sv.gradients.iter().map(|g| g[1]).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(gx.abs() < 1e-10 && gy.abs() < 1e-10, "{gx} {gy}");
    }

    #[test]
    fn detect_cut_ignores_positive_scaling(
        family in family(),
        order in 1usize..=4,
        seed in prop::collection::vec(-1.0..1.0f64, 25),
        scale in 1e-6..1e6f64,
    ) {
        let re = ReferenceElement::<f64>::new(family, order).unwrap();
        let values: Vec<f64> = seed.iter().cycle().take(re.node_count()).copied().collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let a = detect_cut(&ElementField::new(&re, values), 3);
        let b = detect_cut(&ElementField::new(&re, scaled), 3);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn crossing_count_matches_dense_sampling(
        family in family(),
        order in 1usize..=4,
        a in 0.2..0.8f64,
        b in 0.2..0.8f64,
        angle in 0.0..std::f64::consts::TAU,
        kappa in -1.5..1.5f64,
    ) {
        let re = ReferenceElement::<f64>::new(family, order).unwrap();
        let f = bent_line(reference_point(family, a, b), angle, kappa);
        let ef = ElementField::new(&re, nodal(&re, &f));
        let field = LevelSetField::from_nodal(ef.values.clone());
        let report = classify_cut(&ef, &field).unwrap();
        let verts: Vec<Point2<f64>> = family.reference_vertices();
        let n = verts.len();
        let mut dense = 0;
        let mut close_pair = false;
        for e in 0..n {
            let (p, q) = (verts[e], verts[(e + 1) % n]);
            let samples: Vec<f64> = (0..=1000).map(|k| ef.value(p.lerp(q, k as f64 / 1000.0))).collect();
            let changes: Vec<usize> = (0..1000).filter(|&k| samples[k] * samples[k + 1] < 0.0).collect();
            close_pair |= changes.windows(2).any(|w| w[1] - w[0] < 1000 / (4 * order));
            dense += changes.len();
        }
        prop_assume!(!close_pair);
        prop_assert!(report.cut_nodes.is_empty());
        prop_assert_eq!(report.crossing_count(), dense);
    }

    #[test]
    fn reconstruction_commutes_with_square_symmetries(
        order in 1usize..=4,
        a in 0.25..0.75f64,
        b in 0.25..0.75f64,
        angle in 0.0..std::f64::consts::TAU,
        kappa in -0.25..0.25f64,
        sym in 0usize..8,
    ) {
        let re = ReferenceElement::<f64>::new(Family::Quadrilateral, order).unwrap();
        let f = bent_line(reference_point(Family::Quadrilateral, a, b), angle, kappa);
        let opts = NewtonOptions::default();
        let values = nodal(&re, &f);
        let ef = ElementField::new(&re, values.clone());
        let report = classify_cut(&ef, &LevelSetField::from_nodal(values.clone())).unwrap();
        prop_assume!(two_crossings(&report));
        let base = reconstruct(&ef, 0, &report, order, &opts).unwrap();

        // node i of the image carries the value at the preimage of node i
        let s = SQUARE_SYMMETRIES[sym];
        let inverse = (0..8).map(|k| SQUARE_SYMMETRIES[k]).find(|g| {
            let p = Point2::new(0.3, 0.7);
            (g(s(p)) - p).norm() < 1e-15
        }).unwrap();
        let moved: Vec<f64> = re.nodes().iter().map(|&p| {
            let q = inverse(p);
            let j = re.nodes().iter().position(|&r| (r - q).norm() < 1e-14).unwrap();
            values[j]
        }).collect();
        let ef2 = ElementField::new(&re, moved.clone());
        let report2 = classify_cut(&ef2, &LevelSetField::from_nodal(moved)).unwrap();
        prop_assert!(two_crossings(&report2));
        let image = reconstruct(&ef2, 0, &report2, order, &opts).unwrap();
        let expected: Vec<Point2<f64>> = base.nodes.iter().map(|&p| s(p)).collect();
        let dist = |xs: &[Point2<f64>], ys: &[Point2<f64>]| xs.iter().zip(ys).map(|(x, y)| (*x - *y).norm()).fold(0.0, f64::max);
        let mut reversed = image.nodes.clone();
        reversed.reverse();
        let d = dist(&expected, &image.nodes).min(dist(&expected, &reversed));
        prop_assert!(d <= 1e-12, "deviation {d:e}");
    }

    #[test]
    fn straight_chord_is_reproduced(
        family in family(),
        order in 1usize..=6,
        a in 0.2..0.8f64,
        b in 0.2..0.8f64,
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let re = ReferenceElement::<f64>::new(family, order).unwrap();
        let p0 = reference_point(family, a, b);
        let f = bent_line(p0, angle, 0.0);
        let values = nodal(&re, &f);
        let ef = ElementField::new(&re, values.clone());
        let report = classify_cut(&ef, &LevelSetField::from_nodal(values)).unwrap();
        prop_assume!(two_crossings(&report));
        let iface = reconstruct(&ef, 0, &report, order, &NewtonOptions::default()).unwrap();
        let (ra, rb) = (iface.nodes[0], iface.nodes[order]);
        for (k, &p) in iface.nodes.iter().enumerate() {
            prop_assert!(f(p).abs() <= 1e-12);
            let chord = ra.lerp(rb, k as f64 / order as f64);
            prop_assert!((p - chord).norm() <= 1e-12);
        }
    }

    #[test]
    fn interface_nodes_sit_on_the_zero_level(
        family in family(),
        order in 1usize..=5,
        a in 0.2..0.8f64,
        b in 0.2..0.8f64,
        angle in 0.0..std::f64::consts::TAU,
        kappa in -0.25..0.25f64,
    ) {
        let re = ReferenceElement::<f64>::new(family, order).unwrap();
        let f = bent_line(reference_point(family, a, b), angle, kappa);
        let values = nodal(&re, &f);
        let ef = ElementField::new(&re, values.clone());
        let report = classify_cut(&ef, &LevelSetField::from_nodal(values)).unwrap();
        prop_assume!(two_crossings(&report));
        let iface = reconstruct(&ef, 0, &report, order, &NewtonOptions::default()).unwrap();
        for &p in &iface.nodes {
            prop_assert!(ef.value(p).abs() <= 1e-10);
        }
        // endpoints are the edge roots of the report, bit for bit
        let verts: Vec<Point2<f64>> = re.vertex_nodes().iter().map(|&k| re.nodes()[k]).collect();
        let n = verts.len();
        let roots: Vec<Point2<f64>> = report.cut_edges.iter()
            .flat_map(|c| c.roots.iter().map(move |&t| (c.edge, t)))
            .map(|(e, t)| verts[e].lerp(verts[(e + 1) % n], t))
            .collect();
        for end in [iface.nodes[0], iface.nodes[order]] {
            prop_assert!(roots.contains(&end));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposed_circles_tile_and_conform(
        family in family(),
        order in 1usize..=4,
        cells in 3usize..=9,
        cx in -0.3..0.3f64,
        cy in -0.3..0.3f64,
        radius in 0.2..0.6f64,
        delta in 0.0..0.2f64,
    ) {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), cells, family, order).unwrap();
        let mesh = deform(&mesh, delta).unwrap();
        let field = LevelSetField::from_fn(&mesh, |p: Point2<f64>| (p - Point2::new(cx, cy)).norm() - radius);
        let d = decompose_mesh(&mesh, &field, &DecomposeOptions::default()).unwrap();
        let rep = d.mesh.conformity().unwrap();
        prop_assert!(rep.is_conforming(1e-12), "{rep:?}");
        prop_assert!(d.mesh.max_tiling_error().unwrap() <= 1e-10);
        prop_assert!(d.mesh.min_jacobian().unwrap().unwrap().1 > 0.0);
        prop_assert!(interface_residual(&mesh, &field, &d.mesh) <= 1e-10);
    }

    #[test]
    fn native_mesh_round_trip_is_bit_exact(family in family(), order in 1usize..=4, cells in 2usize..=5, delta in 0.0..0.2f64) {
        let mesh = build_cartesian(BoundingBox::symmetric_unit(), cells, family, order).unwrap();
        let mesh = deform(&mesh, delta).unwrap();
        let field = LevelSetField::from_fn(&mesh, Shape::circle(0.45).as_fn());
        let native = NativeMesh::from_background(&mesh, Some(field.values()));
        let mut buf = Vec::new();
        native.write(&mut buf).unwrap();
        let back = NativeMesh::<f64>::read(buf.as_slice()).unwrap();
        let mesh2 = back.to_background().unwrap();
        prop_assert_eq!(mesh2.nodes.len(), mesh.nodes.len());
        for (a, b) in mesh.nodes.iter().zip(&mesh2.nodes) {
            prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
            prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        prop_assert_eq!(&mesh.elements, &mesh2.elements);
    }
}
