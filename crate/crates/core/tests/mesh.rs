use amge::mesh::{in_box, Mesh};
use amge::topology::{euler_characteristic, Topology};
use proptest::prelude::*;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn counts(m: &Mesh) -> [usize; 4] {
    [m.n_vertices(), m.n_edges(), m.n_facets(), m.n_elements()]
}

fn check_orientations(m: &Mesh) {
    for (e, facets) in m.element_facets().iter().enumerate() {
        assert!(m.element_volume(e) > 0.0);
        let c = m.element_centroid(e);
        let mut closed = [0.0; 3];
        for &(f, s) in facets {
            let n = m.facet_area_normal(f);
            let fc = m.facets()[f].iter().fold([0.0; 3], |acc, &v| {
                let p = m.vertex(v);
                [
                    acc[0] + p[0] / 3.0,
                    acc[1] + p[1] / 3.0,
                    acc[2] + p[2] / 3.0,
                ]
            });
            assert!(
                s as f64 * dot(n, sub(fc, c)) > 0.0,
                "element {e} facet {f} not outward"
            );
            for k in 0..3 {
                closed[k] += s as f64 * n[k];
            }
        }
        assert!(closed.iter().all(|x| x.abs() < 1e-14));
    }
    for f in 0..m.n_facets() {
        let els = m.facet_elements(f);
        assert!(els.len() == 1 || els.len() == 2);
        assert_eq!(m.is_boundary_facet(f), els.len() == 1);
        if els.len() == 2 {
            let sign = |e: usize| m.element_facets()[e].iter().find(|x| x.0 == f).unwrap().1;
            assert_eq!(sign(els[0]), -sign(els[1]));
        }
    }
    for (f, edges) in m.facet_edges().iter().enumerate() {
        let mut acc = std::collections::HashMap::new();
        for &(e, s) in edges {
            let [a, b] = m.edges()[e];
            assert!(a < b);
            *acc.entry(b).or_insert(0i32) += s as i32;
            *acc.entry(a).or_insert(0i32) -= s as i32;
        }
        assert!(acc.values().all(|&v| v == 0), "facet {f}");
    }
}

#[test]
fn cube_and_refinements_are_consistently_oriented() {
    let m = Mesh::cube(2);
    check_orientations(&m);
    check_orientations(&m.refine());
    check_orientations(&Mesh::cube(3));
}

#[test]
fn two_tets_have_one_interior_facet() {
    let text = "amge-mesh v1\ndim 3\nvertices 5\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\nelements 2\n1 0 1 2 3\n1 1 2 3 4\nboundary 0\n";
    let m = Mesh::parse(text).unwrap();
    assert_eq!(m.n_facets(), 7);
    assert_eq!((0..7).filter(|&f| !m.is_boundary_facet(f)).count(), 1);
    check_orientations(&m);
}

#[test]
fn inner_box_matches_centroid_enumeration() {
    let n = 4;
    let m = Mesh::cube(n).with_region_attribute(|p| in_box(p, 0.25, 0.75), 2);
    let expected = m
        .elements()
        .iter()
        .filter(|el| {
            let c = el.iter().fold([0.0; 3], |acc, &v| {
                let p = m.vertex(v);
                [
                    acc[0] + p[0] / 4.0,
                    acc[1] + p[1] / 4.0,
                    acc[2] + p[2] / 4.0,
                ]
            });
            c.iter().all(|&x| (0.25..=0.75).contains(&x))
        })
        .count();
    assert_eq!(expected, 48);
    assert_eq!(
        m.element_attrs().iter().filter(|&&a| a == 2).count(),
        expected
    );
    let all = Mesh::cube(2).with_region_attribute(|_| true, 3);
    assert!(all.element_attrs().iter().all(|&a| a == 3));
}

#[test]
fn topology_incidence_is_nilpotent() {
    let t = Topology::from_mesh(&Mesh::cube(2).refine());
    for d in 1..3 {
        let prod = t.incidence(d + 1).matmul(t.incidence(d)).unwrap();
        assert!(prod.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn file_round_trip_preserves_everything() {
    let m = Mesh::cube(2)
        .refine()
        .with_region_attribute(|p| p[0] < 0.5, 4);
    let mut buf = Vec::new();
    m.write(&mut buf).unwrap();
    let back = Mesh::read(&buf[..]).unwrap();
    assert_eq!(back.vertices(), m.vertices());
    assert_eq!(back.elements(), m.elements());
    assert_eq!(back.element_attrs(), m.element_attrs());
    assert_eq!(counts(&back), counts(&m));
}

#[test]
fn facets_shared_by_three_elements_are_rejected() {
    let text = "amge-mesh v1\ndim 3\nvertices 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 0 -1\n1 1 1\nelements 3\n1 0 1 2 3\n1 0 1 2 4\n1 0 2 1 5\nboundary 0\n";
    assert!(Mesh::parse(text).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn refinement_preserves_volume_attributes_and_euler(n in 1usize..3, attr in 2u32..9, cut in 0.1f64..0.9) {
        let m = Mesh::cube(n).with_region_attribute(|p| p[2] < cut, attr);
        let r = m.refine();
        prop_assert_eq!(r.n_elements(), 8 * m.n_elements());
        prop_assert!((r.total_volume() - m.total_volume()).abs() < 1e-14);
        prop_assert_eq!(r.boundary_facets().len(), 4 * m.boundary_facets().len());
        prop_assert_eq!(euler_characteristic(&counts(&r)), 1);
        prop_assert_eq!(euler_characteristic(&counts(&m)), 1);
        for e in 0..r.n_elements() {
            prop_assert_eq!(r.element_attrs()[e], m.element_attrs()[e / 8]);
        }
    }
}
