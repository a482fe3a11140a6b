use multizip::catalog;
use multizip::multizipper::Multizipper;
use multizip::transversality::{cell_tolerance, direction_scan, invariant_hyperplanes, NormalGrid, Scan};

fn zipper(spec: multizip::specfile::SystemSpec) -> Multizipper {
    spec.load().unwrap().zipper.unwrap()
}

fn sample_with_tolerance(z: &Multizipper, depth: usize) -> (Vec<multizip::geometry::Vector>, f64) {
    let sample = z.sample_arc(0, depth, 1 << 22).unwrap();
    (sample.points, cell_tolerance(z, 0, depth).unwrap())
}

#[test]
fn no_monotone_direction_for_curved_catalog_arcs() {
    let grid = NormalGrid::planar(720).unwrap();
    for spec in [catalog::koch(), catalog::levy(), catalog::cesaro(85.0), catalog::reflectzip()] {
        let name = spec.name.clone().unwrap();
        let z = zipper(spec);
        for depth in [4, 6] {
            let points = z.sample_arc(0, depth, 1 << 22).unwrap().points;
            assert!(direction_scan(&points, &grid).unwrap().monotone.is_empty(), "{name} depth {depth}");
        }
    }
}

#[test]
fn straight_catalog_arcs_miss_only_the_perpendicular() {
    let grid = NormalGrid::planar(720).unwrap();
    for spec in [catalog::segment(), catalog::skew_segment()] {
        let z = zipper(spec);
        let points = z.sample_arc(0, 6, 1 << 22).unwrap().points;
        assert_eq!(direction_scan(&points, &grid).unwrap().monotone.len(), 718);
    }
}

#[test]
fn koch_transverse_points_are_nowhere_dense_at_depth_six() {
    let z = zipper(catalog::koch());
    let (points, tol) = sample_with_tolerance(&z, 6);
    let grid = NormalGrid::planar(720).unwrap();
    let report = Scan::new(&points, &grid, tol).unwrap().density_report(4).unwrap();
    assert!(report.verdict);
    assert_eq!(report.dyadic_table.len(), 30);
}

#[test]
fn koch_depth_four_is_too_coarse_for_the_density_certificate() {
    let z = zipper(catalog::koch());
    let (points, tol) = sample_with_tolerance(&z, 4);
    let grid = NormalGrid::planar(720).unwrap();
    let report = Scan::new(&points, &grid, tol).unwrap().density_report(3).unwrap();
    assert!(!report.verdict);
}

#[test]
fn levy_certificate_needs_depth_eight() {
    let z = zipper(catalog::levy());
    let grid = NormalGrid::planar(720).unwrap();
    let (points, tol) = sample_with_tolerance(&z, 7);
    assert!(!Scan::new(&points, &grid, tol).unwrap().density_report(3).unwrap().verdict);
    let (points, tol) = sample_with_tolerance(&z, 8);
    assert!(Scan::new(&points, &grid, tol).unwrap().density_report(3).unwrap().verdict);
}

#[test]
fn limit_and_semicontinuity_hold_at_every_interior_index() {
    let grid = NormalGrid::planar(720).unwrap();
    for spec in [catalog::koch(), catalog::segment()] {
        let name = spec.name.clone().unwrap();
        let z = zipper(spec);
        let (points, tol) = sample_with_tolerance(&z, 6);
        let scan = Scan::new(&points, &grid, tol).unwrap();
        for i in 1..points.len() - 1 {
            let limit = scan.limit_check(i, 16).unwrap();
            assert!(limit.pass, "{name} index {i}: {:?}", &limit.counterexamples[..limit.counterexamples.len().min(4)]);
            let semi = scan.semicontinuity_check(i, 8).unwrap();
            assert!(semi.pass, "{name} index {i}");
        }
    }
}

#[test]
fn weak_to_strong_on_segment_like_systems() {
    let grid = NormalGrid::planar(720).unwrap();
    for spec in [catalog::segment(), catalog::skew_segment(), catalog::two_vertex()] {
        let z = zipper(spec);
        assert!(!invariant_hyperplanes(z.system()).is_empty());
        for u in 0..z.vertex_count() {
            let points = z.sample_arc(u, 5, 1 << 22).unwrap().points;
            let tol = cell_tolerance(&z, u, 5).unwrap();
            let scan = Scan::new(&points, &grid, tol).unwrap();
            assert!((1..points.len() - 1).all(|i| scan.field().has_transverse_normal(i)));
            assert!(!multizip::transversality::uniform_transverse_normals(&points, &grid).unwrap().is_empty());
        }
    }
}
