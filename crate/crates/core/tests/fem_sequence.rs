use amge::fem::sequence::{build_pi_hat, vector_nodal};
use amge::fem::{interpolate, Coefficient, SequenceLevel};
use amge::la::CsrMatrix;
use amge::mesh::Mesh;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.n_rows(), a.n_cols(), |i, j| d[(i, j)])
}

fn rank(a: &CsrMatrix) -> usize {
    let s = dense(a).singular_values();
    let tol = 1e-10 * s.max().max(1.0);
    s.iter().filter(|&&x| x > tol).count()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Affine vector field `c + G x`.
#[derive(Debug, Clone, Copy)]
struct Affine {
    c: [f64; 3],
    g: [[f64; 3]; 3],
}

impl Affine {
    fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.c[i] + (0..3).map(|j| self.g[i][j] * p[j]).sum::<f64>())
    }
    fn curl(&self) -> [f64; 3] {
        let g = &self.g;
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }
    fn div(&self) -> f64 {
        self.g[0][0] + self.g[1][1] + self.g[2][2]
    }
}

fn affine() -> impl Strategy<Value = Affine> {
    (
        prop::array::uniform3(-2.0f64..2.0),
        prop::array::uniform3(prop::array::uniform3(-2.0f64..2.0)),
    )
        .prop_map(|(c, g)| Affine { c, g })
}

#[test]
fn fine_sequence_is_an_exact_complex() {
    for mesh in [Mesh::cube(1), Mesh::cube(2)] {
        let s = SequenceLevel::fine(&mesh, None, 1).unwrap();
        let d = &s.derivatives;
        for i in 0..2 {
            let prod = d[i + 1].matmul(&d[i]).unwrap();
            assert!(prod.values().iter().all(|&v| v == 0.0));
        }
        let dims = s.dims();
        let r: Vec<usize> = d.iter().map(rank).collect();
        assert_eq!(dims[0] - r[0], 1);
        assert_eq!(r[0], dims[1] - r[1]);
        assert_eq!(r[1], dims[2] - r[2]);
        assert_eq!(r[2], dims[3]);
    }
    let s = SequenceLevel::fine(&Mesh::cube(1), None, 0).unwrap();
    assert_eq!(rank(s.derivative(1)), 7);
}

#[test]
fn forms_are_symmetric_positive_definite() {
    let mesh = Mesh::cube(1).with_region_attribute(|p| p[0] < 0.5, 2);
    let mut coef = Coefficient::unit([1, 2]);
    coef.alpha.insert(2, 100.0);
    coef.beta.insert(2, 0.01);
    for form in [2, 3] {
        let w = coef.element_weights(mesh.element_attrs(), form).unwrap();
        let s = SequenceLevel::fine(&mesh, Some(&w), 1).unwrap();
        for a in [
            s.assemble_form(form).unwrap(),
            s.assemble_form_natural(form).unwrap(),
        ] {
            assert_eq!(a.transpose(), a);
            let eig = dense(&a).symmetric_eigen().eigenvalues;
            assert!(eig.min() > 0.0, "form {form}: {}", eig.min());
        }
    }
}

#[test]
fn constant_fields_have_pure_mass_energy() {
    let mesh = Mesh::cube(2);
    let c = [1.0, -0.5, 2.0];
    let beta = 3.0;
    let mut coef = Coefficient::unit([1]);
    coef.beta.insert(1, beta);
    coef.alpha.insert(1, 7.0);
    for form in [2, 3] {
        let w = coef.element_weights(mesh.element_attrs(), form).unwrap();
        let s = SequenceLevel::fine(&mesh, Some(&w), 1).unwrap();
        let x = interpolate(&mesh, form, |_| c);
        let a = s.assemble_form_natural(form).unwrap();
        let e: f64 = a.mul_vec(&x).iter().zip(&x).map(|(p, q)| p * q).sum();
        let expected = beta * c.iter().map(|v| v * v).sum::<f64>();
        assert!(
            (e - expected).abs() < 1e-12 * expected,
            "form {form}: {e} vs {expected}"
        );
    }
}

#[test]
fn mass_is_linear_in_the_weight() {
    let mesh = Mesh::cube(1);
    let one = SequenceLevel::fine(&mesh, None, 0).unwrap();
    let w: [Vec<f64>; 4] = std::array::from_fn(|_| vec![2.0; mesh.n_elements()]);
    let two = SequenceLevel::fine(&mesh, Some(&w), 0).unwrap();
    for space in 1..=4 {
        assert_eq!(
            two.assemble_mass(space),
            one.assemble_mass(space).scale(2.0)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interpolation_commutes_with_derivatives(f in affine(), phi0 in -1.0f64..1.0) {
        let mesh = Mesh::cube(2);
        let s = SequenceLevel::fine(&mesh, None, 0).unwrap();
        // scalar potential with gradient f.c + sym part of G
        let h = |p: [f64; 3]| {
            let q: f64 = (0..3).map(|i| (0..3).map(|j| 0.5 * (f.g[i][j] + f.g[j][i]) * p[i] * p[j]).sum::<f64>()).sum();
            phi0 + (0..3).map(|i| f.c[i] * p[i]).sum::<f64>() + 0.5 * q
        };
        let sym = Affine { c: f.c, g: std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (f.g[i][j] + f.g[j][i]))) };
        // h is quadratic, which the edge rule integrates exactly along straight edges
        let d1 = s.derivative(1).mul_vec(&interpolate(&mesh, 1, |p| [h(p), 0.0, 0.0]));
        prop_assert!(max_diff(&d1, &interpolate(&mesh, 2, |p| sym.eval(p))) < 1e-12);

        let d2 = s.derivative(2).mul_vec(&interpolate(&mesh, 2, |p| f.eval(p)));
        prop_assert!(max_diff(&d2, &interpolate(&mesh, 3, |_| f.curl())) < 1e-12);

        let d3 = s.derivative(3).mul_vec(&interpolate(&mesh, 3, |p| f.eval(p)));
        prop_assert!(max_diff(&d3, &interpolate(&mesh, 4, |_| [f.div(), 0.0, 0.0])) < 1e-11);
    }

    #[test]
    fn pi_hat_interpolates_affine_fields(f in affine()) {
        let mesh = Mesh::cube(2).with_region_attribute(|p| p[1] > 0.3, 2);
        let nodal = vector_nodal(&mesh, |p| f.eval(p));
        for space in [2, 3] {
            let got = build_pi_hat(&mesh, space).mul_vec(&nodal);
            prop_assert!(max_diff(&got, &interpolate(&mesh, space, |p| f.eval(p))) < 1e-12);
        }
    }
}
