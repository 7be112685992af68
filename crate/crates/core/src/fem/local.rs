//! Lowest-order local bases and exact local mass matrices on simplices.
//!
//! Space 1 is P1 (vertex dofs), space 2 lowest-order Nédélec (edge dofs,
//! unit tangential integral along the global edge orientation), space 3
//! lowest-order Raviart-Thomas (facet dofs, unit flux through the canonical
//! facet normal) and space 4 piecewise constants (element indicator).
//! Every product of two basis functions is at most quadratic, so the
//! quadrature rules below integrate the mass matrices exactly.

use crate::la::DenseMatrix;
use crate::mesh::{cross, dot3, sub, Mesh, Point, TET_EDGES};

/// Degree-2 rule on the reference tetrahedron: barycentric points, weights sum to 1.
pub fn tet_quadrature() -> [([f64; 4], f64); 4] {
    const A: f64 = 0.585_410_196_624_968_5;
    const B: f64 = 0.138_196_601_125_010_5;
    [
        ([A, B, B, B], 0.25),
        ([B, A, B, B], 0.25),
        ([B, B, A, B], 0.25),
        ([B, B, B, A], 0.25),
    ]
}

/// Degree-2 rule on a triangle (edge midpoints), weights sum to 1.
pub fn triangle_quadrature() -> [([f64; 3], f64); 3] {
    let t = 1.0 / 3.0;
    [
        ([0.5, 0.5, 0.0], t),
        ([0.0, 0.5, 0.5], t),
        ([0.5, 0.0, 0.5], t),
    ]
}

/// Three-point Gauss rule on [0, 1].
pub fn line_quadrature() -> [(f64, f64); 3] {
    let r = (0.6f64).sqrt() / 2.0;
    [
        (0.5 - r, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + r, 5.0 / 18.0),
    ]
}

pub fn barycentric_point<const N: usize>(points: &[Point; N], lambda: &[f64; N]) -> Point {
    let mut x = [0.0; 3];
    for (p, &l) in points.iter().zip(lambda) {
        for d in 0..3 {
            x[d] += l * p[d];
        }
    }
    x
}

/// Gradients of the barycentric coordinates of a simplex with `N` vertices,
/// tangential to the simplex when `N < 4`.
pub fn barycentric_gradients<const N: usize>(points: &[Point; N]) -> [Point; N] {
    let k = N - 1;
    let j: Vec<Point> = (1..N).map(|i| sub(points[i], points[0])).collect();
    // G = Jᵀ J, gradients of λ_1..λ_k are the columns of J G⁻¹.
    let mut g = DenseMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            g[(a, b)] = dot3(j[a], j[b]);
        }
    }
    let ginv = crate::la::Lu::factor(&g)
        .expect("non-degenerate simplex")
        .inverse();
    let mut grads = [[0.0; 3]; N];
    for i in 0..k {
        let mut v = [0.0; 3];
        for a in 0..k {
            for d in 0..3 {
                v[d] += j[a][d] * ginv[(a, i)];
            }
        }
        grads[i + 1] = v;
    }
    for i in 1..N {
        for d in 0..3 {
            grads[0][d] -= grads[i][d];
        }
    }
    grads
}

fn whitney(lambda_a: f64, lambda_b: f64, ga: Point, gb: Point) -> Point {
    [
        lambda_a * gb[0] - lambda_b * ga[0],
        lambda_a * gb[1] - lambda_b * ga[1],
        lambda_a * gb[2] - lambda_b * ga[2],
    ]
}

/// Values of the global basis functions of `space` on element `e` at the
/// barycentric point `lambda`, in local dof order (vertices in element order,
/// edges in [`TET_EDGES`] order, facets opposite each vertex, one indicator).
/// Scalar spaces store their value in the first component.
pub fn element_basis(mesh: &Mesh, e: usize, space: usize, lambda: &[f64; 4]) -> Vec<Point> {
    let pts = mesh.element_points(e);
    let el = mesh.elements()[e];
    match space {
        1 => lambda.iter().map(|&l| [l, 0.0, 0.0]).collect(),
        2 => {
            let g = barycentric_gradients(&pts);
            TET_EDGES
                .iter()
                .map(|&[i, j]| {
                    let (a, b) = if el[i] < el[j] { (i, j) } else { (j, i) };
                    whitney(lambda[a], lambda[b], g[a], g[b])
                })
                .collect()
        }
        3 => {
            let vol = mesh.element_volume(e);
            let x = barycentric_point(&pts, lambda);
            mesh.element_facets()[e]
                .iter()
                .enumerate()
                .map(|(k, &(_, s))| {
                    let r = sub(x, pts[k]);
                    let c = s as f64 / (3.0 * vol);
                    [c * r[0], c * r[1], c * r[2]]
                })
                .collect()
        }
        4 => vec![[1.0, 0.0, 0.0]],
        _ => panic!("space must be 1..=4"),
    }
}

/// Divergence (space 3) or curl (space 2) of the element basis, constant on the element.
pub fn element_derivative(mesh: &Mesh, e: usize, space: usize) -> Vec<Point> {
    let pts = mesh.element_points(e);
    let el = mesh.elements()[e];
    match space {
        2 => {
            let g = barycentric_gradients(&pts);
            TET_EDGES
                .iter()
                .map(|&[i, j]| {
                    let (a, b) = if el[i] < el[j] { (i, j) } else { (j, i) };
                    cross(g[a], g[b]).map(|x| 2.0 * x)
                })
                .collect()
        }
        3 => {
            let vol = mesh.element_volume(e);
            mesh.element_facets()[e]
                .iter()
                .map(|&(_, s)| [s as f64 / vol, 0.0, 0.0])
                .collect()
        }
        _ => panic!("derivative defined for spaces 2 and 3"),
    }
}

/// Exact element mass matrix of `space`, scaled by `weight`.
pub fn element_mass(mesh: &Mesh, e: usize, space: usize, weight: f64) -> DenseMatrix {
    let vol = mesh.element_volume(e);
    if space == 4 {
        return DenseMatrix::from_row_major(1, 1, vec![weight * vol]);
    }
    let mut m: Option<DenseMatrix> = None;
    for (lambda, w) in tet_quadrature() {
        let phi = element_basis(mesh, e, space, &lambda);
        let n = phi.len();
        let mm = m.get_or_insert_with(|| DenseMatrix::zeros(n, n));
        for i in 0..n {
            for j in 0..n {
                mm[(i, j)] += weight * w * vol * dot3(phi[i], phi[j]);
            }
        }
    }
    m.expect("quadrature is non-empty")
}

/// Global dof ids of `space` on element `e` in local dof order.
pub fn element_dofs(mesh: &Mesh, e: usize, space: usize) -> Vec<usize> {
    match space {
        1 => mesh.elements()[e].to_vec(),
        2 => mesh.element_edges()[e].to_vec(),
        3 => mesh.element_facets()[e].iter().map(|x| x.0).collect(),
        4 => vec![e],
        _ => panic!("space must be 1..=4"),
    }
}

/// Traces of the global basis functions of `space` (1..=3) on facet `f` at
/// barycentric point `lambda` of the sorted facet vertices. Space 2 gives the
/// tangential trace; space 3 the normal component along the unit canonical normal.
pub fn facet_basis(mesh: &Mesh, f: usize, space: usize, lambda: &[f64; 3]) -> Vec<Point> {
    let verts = mesh.facets()[f];
    let pts = verts.map(|v| mesh.vertex(v));
    match space {
        1 => lambda.iter().map(|&l| [l, 0.0, 0.0]).collect(),
        2 => {
            let g = barycentric_gradients(&pts);
            // Facet edges (a,b), (b,c), (a,c) with a < b < c.
            [(0, 1), (1, 2), (0, 2)]
                .iter()
                .map(|&(a, b)| whitney(lambda[a], lambda[b], g[a], g[b]))
                .collect()
        }
        3 => vec![[1.0 / mesh.facet_area(f), 0.0, 0.0]],
        _ => panic!("facet spaces are 1..=3"),
    }
}

pub fn facet_mass(mesh: &Mesh, f: usize, space: usize) -> DenseMatrix {
    let area = mesh.facet_area(f);
    if space == 3 {
        return DenseMatrix::from_row_major(1, 1, vec![1.0 / area]);
    }
    let mut m: Option<DenseMatrix> = None;
    for (lambda, w) in triangle_quadrature() {
        let phi = facet_basis(mesh, f, space, &lambda);
        let n = phi.len();
        let mm = m.get_or_insert_with(|| DenseMatrix::zeros(n, n));
        for i in 0..n {
            for j in 0..n {
                mm[(i, j)] += w * area * dot3(phi[i], phi[j]);
            }
        }
    }
    m.expect("quadrature is non-empty")
}

pub fn facet_dofs(mesh: &Mesh, f: usize, space: usize) -> Vec<usize> {
    match space {
        1 => mesh.facets()[f].to_vec(),
        2 => mesh.facet_edges()[f].iter().map(|x| x.0).collect(),
        3 => vec![f],
        _ => panic!("facet spaces are 1..=3"),
    }
}

pub fn edge_mass(mesh: &Mesh, e: usize, space: usize) -> DenseMatrix {
    let len = mesh.edge_length(e);
    match space {
        1 => DenseMatrix::from_row_major(2, 2, vec![len / 3.0, len / 6.0, len / 6.0, len / 3.0]),
        2 => DenseMatrix::from_row_major(1, 1, vec![1.0 / len]),
        _ => panic!("edge spaces are 1 and 2"),
    }
}

pub fn edge_dofs(mesh: &Mesh, e: usize, space: usize) -> Vec<usize> {
    match space {
        1 => mesh.edges()[e].to_vec(),
        2 => vec![e],
        _ => panic!("edge spaces are 1 and 2"),
    }
}

/// Local mass of `space` on a dimension-`dim` entity, with its dofs.
pub fn entity_mass(
    mesh: &Mesh,
    dim: usize,
    id: usize,
    space: usize,
    weight: f64,
) -> (Vec<usize>, DenseMatrix) {
    match dim {
        0 => (vec![id], DenseMatrix::from_row_major(1, 1, vec![1.0])),
        1 => (edge_dofs(mesh, id, space), edge_mass(mesh, id, space)),
        2 => (facet_dofs(mesh, id, space), facet_mass(mesh, id, space)),
        3 => (
            element_dofs(mesh, id, space),
            element_mass(mesh, id, space, weight),
        ),
        _ => panic!("dimension must be 0..=3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Mesh {
        Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            vec![[0, 1, 2, 3]],
            vec![1],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn p1_mass_of_reference_tet() {
        let m = element_mass(&reference(), 0, 1, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 / 60.0 } else { 1.0 / 120.0 };
                assert!((m[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn l2_mass_is_volume() {
        let m = element_mass(&reference(), 0, 4, 1.0);
        assert!((m[(0, 0)] - 1.0 / 6.0).abs() < 1e-16);
        let m2 = element_mass(&reference(), 0, 4, 2.0);
        assert!((m2[(0, 0)] - 2.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn nedelec_tangential_moments_are_kronecker() {
        let mesh = Mesh::cube(1);
        for e in 0..mesh.n_elements() {
            let dofs = element_dofs(&mesh, e, 2);
            for (k, &ge) in dofs.iter().enumerate() {
                let [a, b] = mesh.edges()[ge];
                let el = mesh.elements()[e];
                let la = el.iter().position(|&v| v == a).unwrap();
                let lb = el.iter().position(|&v| v == b).unwrap();
                let t = mesh.edge_vector(ge);
                // The tangential component is constant along the edge.
                let mut lambda = [0.0; 4];
                lambda[la] = 0.3;
                lambda[lb] = 0.7;
                let phi = element_basis(&mesh, e, 2, &lambda);
                for (j, p) in phi.iter().enumerate() {
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((dot3(*p, t) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn raviart_thomas_fluxes_are_kronecker() {
        let mesh = Mesh::cube(1);
        for e in 0..mesh.n_elements() {
            for (k, &(f, _)) in mesh.element_facets()[e].iter().enumerate() {
                let n = mesh.facet_area_normal(f);
                let mut lambda = [1.0 / 3.0; 4];
                lambda[k] = 0.0;
                let phi = element_basis(&mesh, e, 3, &lambda);
                for (j, p) in phi.iter().enumerate() {
                    let flux = dot3(*p, n);
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!(
                        (flux - want).abs() < 1e-12,
                        "element {e} facet {k} basis {j}: {flux}"
                    );
                }
            }
        }
    }

    #[test]
    fn facet_gradients_are_tangential() {
        let pts = [[0.0, 0.0, 0.0], [2.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let g = barycentric_gradients(&pts);
        let n = cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]));
        for (i, gi) in g.iter().enumerate() {
            assert!(dot3(*gi, n).abs() < 1e-14);
            // Directional derivatives along the facet edges.
            let d1 = dot3(*gi, sub(pts[1], pts[0]));
            let d2 = dot3(*gi, sub(pts[2], pts[0]));
            let want =
                |j: usize| (if i == j { 1.0 } else { 0.0 }) - (if i == 0 { 1.0 } else { 0.0 });
            assert!((d1 - want(1)).abs() < 1e-14);
            assert!((d2 - want(2)).abs() < 1e-14);
        }
    }
}
