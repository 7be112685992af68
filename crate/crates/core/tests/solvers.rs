use std::sync::Arc;

use amge::fem::Coefficient;
use amge::hierarchy::{masked_galerkin, Hierarchy, HierarchyOptions, Partitioner};
use amge::la::{sparse_direct_solve, CsrMatrix};
use amge::mesh::Mesh;
use amge::solvers::{pcg, AuxSpace, Direct, Hybrid, L1Sgs, Solver, SolverLibrary, VCycle};
use amge::verify::symmetry_and_positivity;
use amge::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hierarchy(mesh: &Mesh, form: usize, levels: usize, partitioner: Partitioner) -> Hierarchy {
    let coef = Coefficient::unit(mesh.element_attrs().iter().copied());
    let opts = HierarchyOptions {
        levels,
        partitioner,
        ..Default::default()
    };
    Hierarchy::build(mesh, form, &coef, &opts).unwrap()
}

fn energy(a: &CsrMatrix, e: &[f64]) -> f64 {
    a.mul_vec(e).iter().zip(e).map(|(x, y)| x * y).sum::<f64>()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn tridiagonal(n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.5));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

#[test]
fn l1_sgs_solves_diagonal_systems_in_one_sweep() {
    let a = Arc::new(CsrMatrix::diagonal(&[2.0, 5.0, 0.5]));
    let s = L1Sgs::new(a, 1).unwrap();
    assert_eq!(s.apply(&[2.0, 5.0, 0.5]), vec![1.0, 1.0, 1.0]);
    assert_eq!(s.apply(&[0.0; 3]), vec![0.0; 3]);
}

#[test]
fn l1_sgs_energy_error_is_non_increasing() {
    let a = Arc::new(tridiagonal(40));
    let s = L1Sgs::new(a.clone(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let b = vec![0.0; 40];
    let mut x = random_vec(&mut rng, 40);
    let mut prev = energy(&a, &x);
    for _ in 0..10 {
        s.iterate(&b, &mut x);
        let e = energy(&a, &x);
        assert!(e <= prev * (1.0 + 1e-14));
        prev = e;
    }
}

fn hybrid_parts(h: &Hierarchy) -> (Arc<CsrMatrix>, Arc<CsrMatrix>, Arc<CsrMatrix>) {
    let a = h.a[0].clone();
    let d = Arc::new(h.masked_derivative(0, h.form - 1));
    let a_aux = Arc::new(masked_galerkin(&a, &d, h.boundary(0, h.form - 1)).unwrap());
    (a, d, a_aux)
}

#[test]
fn hybrid_beats_primary_on_kernel_errors() {
    let mesh = Mesh::cube(2);
    for form in [2, 3] {
        let h = hierarchy(&mesh, form, 1, Partitioner::Growing);
        let (a, d, a_aux) = hybrid_parts(&h);
        let hybrid = Hybrid::new(
            a.clone(),
            Box::new(L1Sgs::new(a.clone(), 1).unwrap()),
            d.clone(),
            Box::new(L1Sgs::new(a_aux, 1).unwrap()),
        );
        let primary = L1Sgs::new(a.clone(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(form as u64);
        let e0 = d.mul_vec(&random_vec(&mut rng, d.n_cols()));
        let b = vec![0.0; e0.len()];
        let (mut xh, mut xp) = (e0.clone(), e0.clone());
        hybrid.iterate(&b, &mut xh);
        primary.iterate(&b, &mut xp);
        let (e, eh, ep) = (energy(&a, &e0), energy(&a, &xh), energy(&a, &xp));
        assert!(
            eh / e < ep / e,
            "form {form}: hybrid {} primary {}",
            eh / e,
            ep / e
        );
    }
}

#[test]
fn hybrid_is_the_product_of_its_two_steps() {
    let mesh = Mesh::cube(2);
    let h = hierarchy(&mesh, 2, 1, Partitioner::Growing);
    let (a, d, a_aux) = hybrid_parts(&h);
    let primary = L1Sgs::new(a.clone(), 2).unwrap();
    let aux = L1Sgs::new(a_aux.clone(), 2).unwrap();
    let hybrid = Hybrid::new(
        a.clone(),
        Box::new(L1Sgs::new(a.clone(), 2).unwrap()),
        d.clone(),
        Box::new(aux),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = random_vec(&mut rng, a.n_rows());
    let x0 = random_vec(&mut rng, a.n_rows());
    let mut x = x0.clone();
    hybrid.iterate(&b, &mut x);
    let mut y = x0;
    primary.iterate(&b, &mut y);
    let ax = a.mul_vec(&y);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let aux = L1Sgs::new(a_aux, 2).unwrap();
    let corr = d.mul_vec(&aux.apply(&d.mul_vec_transpose(&r)));
    for i in 0..y.len() {
        y[i] += corr[i];
        assert!((x[i] - y[i]).abs() <= 1e-13 * (1.0 + y[i].abs()));
    }
    let mut z = vec![0.0; b.len()];
    hybrid.iterate(&vec![0.0; b.len()], &mut z);
    assert!(z.iter().all(|&v| v == 0.0));
}

#[test]
fn two_level_cycle_with_exact_components_is_exact() {
    let mesh = Mesh::cube(2);
    let h = hierarchy(&mesh, 3, 2, Partitioner::Growing);
    let v = VCycle::new(
        h.a.clone(),
        h.p_form.clone(),
        vec![Box::new(Direct::new(h.a[0].clone()).unwrap())],
        Box::new(Direct::new(h.a[1].clone()).unwrap()),
    );
    let b = h.load_vector(&mesh, |p| [p[1], p[2], p[0]]);
    let x = v.apply(&b);
    let r = h.a[0].mul_vec(&x);
    let err = r
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    assert!(v.apply(&vec![0.0; b.len()]).iter().all(|&z| z == 0.0));
}

#[test]
fn vcycle_contracts_the_energy_error() {
    let mesh = Mesh::cube(2).refine();
    for form in [2, 3] {
        let h = hierarchy(&mesh, form, 2, Partitioner::Refinement);
        let lib = SolverLibrary::default_library();
        let v = lib.build("amge-direct-coarse", &h, 0).unwrap();
        let a = &h.a[0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = vec![0.0; a.n_rows()];
        for _ in 0..10 {
            let mut x = random_vec(&mut rng, a.n_rows());
            let before = energy(a, &x);
            v.iterate(&b, &mut x);
            assert!(energy(a, &x) < before);
        }
    }
}

#[test]
fn vcycle_and_aux_space_are_symmetric_positive() {
    let mesh = Mesh::cube(2);
    for form in [2, 3] {
        let h = hierarchy(&mesh, form, 2, Partitioner::Growing);
        let lib = SolverLibrary::default_library();
        let v = lib.build("amge-direct-coarse", &h, 0).unwrap();
        let (asym, nonpos) = symmetry_and_positivity(v.as_ref(), 20, 5);
        assert!(asym < 1e-10 && nonpos == 0, "form {form}: {asym} {nonpos}");
        for l in 0..2 {
            let aux = AuxSpace::for_level(&h, l, 2).unwrap();
            let (asym, nonpos) = symmetry_and_positivity(&aux, 20, 6);
            assert!(
                asym < 1e-10 && nonpos == 0,
                "form {form} level {l}: {asym} {nonpos}"
            );
            assert!(aux.apply(&vec![0.0; aux.size()]).iter().all(|&z| z == 0.0));
        }
    }
}

#[test]
fn coarse_pcg_reduces_the_preconditioned_residual_monotonically() {
    let mesh = Mesh::cube(2);
    for form in [2, 3] {
        let h = hierarchy(&mesh, form, 2, Partitioner::Growing);
        let aux = AuxSpace::for_level(&h, 1, 2).unwrap();
        let b = vec![1.0; h.a[1].n_rows()];
        let res = pcg(&h.a[1], &aux, &b, &vec![0.0; b.len()], 0.0, 5).unwrap();
        assert!(
            res.history.windows(2).all(|w| w[1] <= w[0]),
            "{:?}",
            res.history
        );
    }
}

#[test]
fn direct_coarse_solve_is_exact() {
    let mesh = Mesh::cube(2);
    let h = hierarchy(&mesh, 2, 2, Partitioner::Growing);
    let a = &h.a[1];
    let b: Vec<f64> = (0..a.n_rows()).map(|i| (i % 7) as f64).collect();
    let x = Direct::new(a.clone()).unwrap().apply(&b);
    let r = a.mul_vec(&x);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(r
        .iter()
        .zip(&b)
        .all(|(p, q)| (p - q).abs() <= 1e-12 * scale));
}

#[test]
fn configured_pcg_vcycle_hybrid_direct_solves_div_problem() {
    let text = r#"{"solvers": {
        "main": {"type": "pcg", "rel_tol": 1e-8, "max_iterations": 100, "preconditioner": "mg"},
        "mg": {"type": "vcycle", "smoother": "hyb", "coarse": "lu"},
        "hyb": {"type": "hybrid", "sweeps": 2},
        "lu": {"type": "direct"}}}"#;
    let lib = SolverLibrary::from_json(text).unwrap();
    let mesh = Mesh::cube(2);
    let h = hierarchy(&mesh, 3, 2, Partitioner::Growing);
    let b = h.load_vector(&mesh, |p| [1.0 + p[0], p[1] * p[2], 0.5]);
    let res = lib.solve("main", &h, &b, None).unwrap();
    assert!(res.converged);
    let exact = sparse_direct_solve(&h.a[0], &b).unwrap();
    let diff = res
        .x
        .iter()
        .zip(&exact)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = exact.iter().map(|q| q * q).sum::<f64>().sqrt();
    assert!(diff / norm < 1e-6);
}

#[test]
fn unknown_solver_types_are_config_errors() {
    let err = SolverLibrary::from_json(r#"{"solvers": {"c": {"type": "amg"}}}"#).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let err = SolverLibrary::from_json(r#"{"solvers": {"c": {"type": "direct", "tolerance": 1}}}"#)
        .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn every_shipped_entry_builds_and_converges() {
    let mesh = Mesh::cube(2).refine();
    let lib = SolverLibrary::default_library();
    for form in [2, 3] {
        let h = hierarchy(&mesh, form, 2, Partitioner::Refinement);
        let b = h.load_vector(&mesh, |p| [p[2], 1.0, p[0]]);
        for name in ["main", "main-primary", "main-direct-coarse"] {
            let res = lib.solve(name, &h, &b, None).unwrap();
            assert!(res.converged, "{name} form {form}");
        }
    }
}

#[test]
fn complexities_of_trivial_hierarchies() {
    let mesh = Mesh::cube(2);
    let h = hierarchy(&mesh, 3, 1, Partitioner::Growing);
    assert_eq!(h.complexities(), (1.0, 1.0));
    let h = hierarchy(&mesh, 3, 2, Partitioner::Trivial);
    let (gc, oc) = h.complexities();
    assert!(
        (gc - 2.0).abs() < 1e-15 && (oc - 2.0).abs() < 1e-15,
        "{gc} {oc}"
    );
}
