//! The discrete de Rham sequence of one level: dofs, exterior derivatives,
//! entity-local mass matrices, targets and vector-H1 interpolators.
//!
//! Spaces are numbered 1..=4 (H1, H(curl), H(div), L2); arrays indexed by
//! space use `space - 1`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fem::local;
use crate::la::{CsrMatrix, DenseMatrix};
use crate::mesh::{dot3, Mesh, Point};
use crate::topology::Topology;

/// Dense matrix on a subset of global dofs (rows and columns share `dofs`).
#[derive(Debug, Clone)]
pub struct LocalMatrix {
    pub dofs: Vec<usize>,
    pub mat: DenseMatrix,
}

/// Piecewise-constant coefficients per element attribute.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coefficient {
    pub alpha: BTreeMap<u32, f64>,
    pub beta: BTreeMap<u32, f64>,
}

impl Coefficient {
    /// α = β = 1 on the given attributes.
    pub fn unit(attrs: impl IntoIterator<Item = u32>) -> Self {
        let mut c = Self::default();
        for a in attrs {
            c.alpha.insert(a, 1.0);
            c.beta.insert(a, 1.0);
        }
        c
    }

    /// Per-element mass weights for every space when solving the form on
    /// `form` (2 or 3): space `form` gets β, space `form + 1` gets α, the
    /// others weight 1.
    pub fn element_weights(&self, attrs: &[u32], form: usize) -> Result<[Vec<f64>; 4]> {
        assert!(form == 2 || form == 3, "form must be 2 or 3");
        let lookup = |map: &BTreeMap<u32, f64>, a: u32| -> Result<f64> {
            match map.get(&a) {
                Some(&v) if v > 0.0 => Ok(v),
                Some(_) => Err(Error::Config(format!(
                    "coefficient on attribute {a} must be positive"
                ))),
                None => Err(Error::UnknownAttribute(a)),
            }
        };
        let mut w: [Vec<f64>; 4] = std::array::from_fn(|_| vec![1.0; attrs.len()]);
        for (e, &a) in attrs.iter().enumerate() {
            w[form - 1][e] = lookup(&self.beta, a)?;
            w[form][e] = lookup(&self.alpha, a)?;
        }
        Ok(w)
    }
}

/// Parses `ATTR:VAL`.
pub fn parse_attr_value(s: &str) -> Result<(u32, f64)> {
    let (a, v) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected ATTR:VAL, got `{s}`")))?;
    let a: u32 = a
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad attribute in `{s}`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value in `{s}`")))?;
    if a == 0 {
        return Err(Error::Config("attribute 0 is reserved".into()));
    }
    Ok((a, v))
}

#[derive(Debug, Clone)]
pub struct SequenceLevel {
    pub topology: Topology,
    /// Owning entity `(dim, id)` of every dof, per space.
    pub dof_entity: [Vec<(usize, usize)>; 4],
    /// `entity_dofs[space-1][dim][id]`: dofs owned by an entity, ascending.
    pub entity_dofs: [[Vec<Vec<usize>>; 4]; 4],
    /// Integral functional of each dof over its owning entity; nonzero only
    /// for the dofs carrying the entity's unit-integral (PV) function.
    pub iota: [Vec<f64>; 4],
    /// D_1, D_2, D_3.
    pub derivatives: [CsrMatrix; 3],
    /// Dofs with a nonzero trace on the domain boundary.
    pub boundary: [Vec<bool>; 4],
    /// Approximation targets per space, one column per target.
    pub targets: [DenseMatrix; 4],
    /// Vector-H1 (3 components, component-major) to spaces 2 and 3.
    pub pi_hat: [CsrMatrix; 2],
    /// `local_mass[dim][space-1][id]` for `space <= dim + 1`.
    pub local_mass: [[Vec<LocalMatrix>; 4]; 4],
}

impl SequenceLevel {
    pub fn dim(&self, space: usize) -> usize {
        self.dof_entity[space - 1].len()
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.dim(1), self.dim(2), self.dim(3), self.dim(4)]
    }

    /// Derivative out of `space` (1..=3).
    pub fn derivative(&self, space: usize) -> &CsrMatrix {
        &self.derivatives[space - 1]
    }

    /// Finest-level sequence of `mesh`. `weights[space-1][element]` scales the
    /// element mass matrices (lower-dimensional entity masses are unweighted);
    /// `target_order` is the monomial degree of targets.
    pub fn fine(mesh: &Mesh, weights: Option<&[Vec<f64>; 4]>, target_order: usize) -> Result<Self> {
        let topology = Topology::from_mesh(mesh);
        let counts = topology.counts();
        let dof_entity: [Vec<(usize, usize)>; 4] =
            std::array::from_fn(|s| (0..counts[s]).map(|i| (s, i)).collect());
        let entity_dofs: [[Vec<Vec<usize>>; 4]; 4] = std::array::from_fn(|s| {
            std::array::from_fn(|d| {
                if d == s {
                    (0..counts[d]).map(|i| vec![i]).collect()
                } else {
                    vec![Vec::new(); counts[d]]
                }
            })
        });
        let iota = [
            vec![1.0; counts[0]],
            vec![1.0; counts[1]],
            vec![1.0; counts[2]],
            (0..counts[3]).map(|e| mesh.element_volume(e)).collect(),
        ];

        let inv_vol: Vec<f64> = (0..counts[3])
            .map(|e| 1.0 / mesh.element_volume(e))
            .collect();
        let derivatives = [
            topology.incidence(1).clone(),
            topology.incidence(2).clone(),
            topology.incidence(3).scale_rows_cols(Some(&inv_vol), None),
        ];

        let bflags = topology.boundary_flags();
        let boundary = [
            bflags[0].clone(),
            bflags[1].clone(),
            bflags[2].clone(),
            vec![false; counts[3]],
        ];

        let mut local_mass: [[Vec<LocalMatrix>; 4]; 4] = Default::default();
        for dim in 0..4 {
            for space in 1..=(dim + 1).min(4) {
                local_mass[dim][space - 1] = (0..counts[dim])
                    .map(|id| {
                        let w = match weights {
                            Some(w) if dim == 3 => w[space - 1][id],
                            _ => 1.0,
                        };
                        let (dofs, mat) = local::entity_mass(mesh, dim, id, space, w);
                        sort_local(dofs, mat)
                    })
                    .collect();
            }
        }

        let targets = build_targets(mesh, target_order);
        let pi_hat = [build_pi_hat(mesh, 2), build_pi_hat(mesh, 3)];
        Ok(Self {
            topology,
            dof_entity,
            entity_dofs,
            iota,
            derivatives,
            boundary,
            targets,
            pi_hat,
            local_mass,
        })
    }

    /// Global mass matrix of `space` assembled from the element matrices.
    pub fn assemble_mass(&self, space: usize) -> CsrMatrix {
        let n = self.dim(space);
        let mut trip = Vec::new();
        for lm in &self.local_mass[3][space - 1] {
            for (a, &i) in lm.dofs.iter().enumerate() {
                for (b, &j) in lm.dofs.iter().enumerate() {
                    trip.push((i, j, lm.mat[(a, b)]));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &trip)
    }

    /// `D_iᵀ M_{i+1} D_i + M_i` without boundary conditions, symmetric to
    /// the last bit.
    pub fn assemble_form_natural(&self, space: usize) -> Result<CsrMatrix> {
        let d = self.derivative(space);
        let m_next = self.assemble_mass(space + 1);
        let a = d
            .transpose()
            .matmul(&m_next)?
            .matmul(d)?
            .add(&self.assemble_mass(space), 1.0)?;
        a.add(&a.transpose(), 1.0).map(|s| s.scale(0.5))
    }

    /// The form with essential boundary dofs eliminated symmetrically (unit
    /// diagonal, zero off-diagonal).
    pub fn assemble_form(&self, space: usize) -> Result<CsrMatrix> {
        Ok(eliminate_dofs(
            &self.assemble_form_natural(space)?,
            &self.boundary[space - 1],
        ))
    }
}

fn sort_local(dofs: Vec<usize>, mat: DenseMatrix) -> LocalMatrix {
    let mut order: Vec<usize> = (0..dofs.len()).collect();
    order.sort_by_key(|&i| dofs[i]);
    let n = dofs.len();
    let mut m = DenseMatrix::zeros(n, n);
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            m[(a, b)] = mat[(i, j)];
        }
    }
    LocalMatrix {
        dofs: order.iter().map(|&i| dofs[i]).collect(),
        mat: m,
    }
}

/// Replaces rows and columns of flagged dofs by the identity.
pub fn eliminate_dofs(a: &CsrMatrix, flags: &[bool]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        if flags[i] {
            trip.push((i, i, 1.0));
            continue;
        }
        for (j, v) in a.row(i) {
            if !flags[j] {
                trip.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), &trip)
}

/// Canonical dof interpolation of `f` into `space` on the fine mesh: vertex
/// values, tangential edge integrals, normal facet fluxes, element averages.
/// Scalar fields use the first component.
pub fn interpolate(mesh: &Mesh, space: usize, f: impl Fn(Point) -> [f64; 3]) -> Vec<f64> {
    match space {
        1 => mesh.vertices().iter().map(|&p| f(p)[0]).collect(),
        2 => (0..mesh.n_edges())
            .map(|e| {
                let [a, b] = mesh.edges()[e];
                let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
                let t = mesh.edge_vector(e);
                local::line_quadrature()
                    .iter()
                    .map(|&(s, w)| {
                        w * dot3(f(local::barycentric_point(&[pa, pb], &[1.0 - s, s])), t)
                    })
                    .sum()
            })
            .collect(),
        3 => (0..mesh.n_facets())
            .map(|fid| {
                let pts = mesh.facets()[fid].map(|v| mesh.vertex(v));
                let n = mesh.facet_area_normal(fid);
                facet_rule()
                    .iter()
                    .map(|(l, w)| w * dot3(f(local::barycentric_point(&pts, l)), n))
                    .sum()
            })
            .collect(),
        4 => (0..mesh.n_elements())
            .map(|e| {
                let pts = mesh.element_points(e);
                tet_rule()
                    .iter()
                    .map(|(l, w)| w * f(local::barycentric_point(&pts, l))[0])
                    .sum()
            })
            .collect(),
        _ => panic!("space must be 1..=4"),
    }
}

/// Degree-5 seven-point triangle rule (weights sum to 1).
fn facet_rule() -> Vec<([f64; 3], f64)> {
    let s15 = 15f64.sqrt();
    let (a1, b1) = ((6.0 - s15) / 21.0, (9.0 + 2.0 * s15) / 21.0);
    let (a2, b2) = ((6.0 + s15) / 21.0, (9.0 - 2.0 * s15) / 21.0);
    let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
    vec![
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// Degree-3 five-point tetrahedron rule (weights sum to 1).
fn tet_rule() -> Vec<([f64; 4], f64)> {
    vec![
        ([0.25; 4], -0.8),
        ([0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 0.45),
        ([1.0 / 6.0, 0.5, 1.0 / 6.0, 1.0 / 6.0], 0.45),
        ([1.0 / 6.0, 1.0 / 6.0, 0.5, 1.0 / 6.0], 0.45),
        ([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5], 0.45),
    ]
}

/// Monomial exponents of total degree at most `p`, lowest degree first.
pub fn monomials(p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for deg in 0..=p {
        for i in (0..=deg).rev() {
            for j in (0..=deg - i).rev() {
                out.push([i, j, deg - i - j]);
            }
        }
    }
    out
}

fn eval_monomial(m: [usize; 3], x: Point) -> f64 {
    x[0].powi(m[0] as i32) * x[1].powi(m[1] as i32) * x[2].powi(m[2] as i32)
}

/// Interpolated monomial targets: none for space 1, vector monomials for
/// spaces 2 and 3, scalar monomials for space 4.
pub fn build_targets(mesh: &Mesh, p: usize) -> [DenseMatrix; 4] {
    let mons = monomials(p);
    let vector = |space: usize| -> DenseMatrix {
        let mut cols = Vec::new();
        for c in 0..3 {
            for &m in &mons {
                cols.push(interpolate(mesh, space, |x| {
                    let mut v = [0.0; 3];
                    v[c] = eval_monomial(m, x);
                    v
                }));
            }
        }
        DenseMatrix::from_columns(mesh.n_entities(space - 1), &cols)
    };
    let scalar: Vec<Vec<f64>> = mons
        .iter()
        .map(|&m| interpolate(mesh, 4, |x| [eval_monomial(m, x), 0.0, 0.0]))
        .collect();
    [
        DenseMatrix::zeros(mesh.n_vertices(), 0),
        vector(2),
        vector(3),
        DenseMatrix::from_columns(mesh.n_elements(), &scalar),
    ]
}

/// Canonical space-2/3 functional applied to the piecewise-linear vector
/// field with the given nodal values. Columns are ordered component-major
/// (`c * n_vertices + v`).
pub fn build_pi_hat(mesh: &Mesh, space: usize) -> CsrMatrix {
    let nv = mesh.n_vertices();
    let mut trip = Vec::new();
    match space {
        2 => {
            for e in 0..mesh.n_edges() {
                let t = mesh.edge_vector(e);
                for &v in &mesh.edges()[e] {
                    for c in 0..3 {
                        trip.push((e, c * nv + v, 0.5 * t[c]));
                    }
                }
            }
            CsrMatrix::from_triplets(mesh.n_edges(), 3 * nv, &trip)
        }
        3 => {
            for f in 0..mesh.n_facets() {
                let n = mesh.facet_area_normal(f);
                for &v in &mesh.facets()[f] {
                    for c in 0..3 {
                        trip.push((f, c * nv + v, n[c] / 3.0));
                    }
                }
            }
            CsrMatrix::from_triplets(mesh.n_facets(), 3 * nv, &trip)
        }
        _ => panic!("vector-H1 interpolators exist for spaces 2 and 3"),
    }
}

/// Nodal interpolant of a vector field in the component-major layout.
pub fn vector_nodal(mesh: &Mesh, f: impl Fn(Point) -> [f64; 3]) -> Vec<f64> {
    let nv = mesh.n_vertices();
    let mut out = vec![0.0; 3 * nv];
    for (v, &p) in mesh.vertices().iter().enumerate() {
        let val = f(p);
        for c in 0..3 {
            out[c * nv + v] = val[c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Mesh {
        Mesh::parse("amge-mesh v1\ndim 3\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements 1\n1 0 1 2 3\nboundary 0\n")
            .unwrap()
    }

    #[test]
    fn reference_tet_gradient_row() {
        let s = SequenceLevel::fine(&reference(), None, 1).unwrap();
        let d1 = s.derivative(1);
        assert_eq!((d1.n_rows(), d1.n_cols()), (6, 4));
        let m = reference();
        let e01 = m.edge_id(0, 1).unwrap();
        assert_eq!(d1.row(e01).collect::<Vec<_>>(), vec![(0, -1.0), (1, 1.0)]);
        let dd = s.derivative(2).matmul(d1).unwrap();
        assert_eq!(dd.max_abs(), 0.0);
    }

    #[test]
    fn target_counts() {
        let m = Mesh::cube(2);
        let t0 = build_targets(&m, 0);
        assert_eq!(t0[2].n_cols(), 3);
        assert_eq!(t0[3].n_cols(), 1);
        assert!(t0[3].column(0).iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let t1 = build_targets(&m, 1);
        assert_eq!(t1[3].n_cols(), 4);
        assert_eq!(t1[3].rank(1e-12), 4);
        assert_eq!(t1[1].n_cols(), 12);
    }

    #[test]
    fn interpolation_examples() {
        let m = Mesh::cube(2);
        let x1 = interpolate(&m, 1, |p| [p[0], 0.0, 0.0]);
        assert!(m.vertices().iter().zip(&x1).all(|(p, &v)| p[0] == v));
        let x2 = interpolate(&m, 2, |_| [1.0, 0.0, 0.0]);
        for (e, &v) in x2.iter().enumerate() {
            let [a, b] = m.edges()[e];
            assert!((v - (m.vertex(b)[0] - m.vertex(a)[0])).abs() < 1e-14);
        }
        assert!(interpolate(&m, 4, |_| [1.0, 0.0, 0.0])
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn pi_hat_reproduces_constants() {
        let m = Mesh::cube(2);
        let c = [0.3, -1.2, 2.0];
        let nodal = vector_nodal(&m, |_| c);
        for space in [2, 3] {
            let got = build_pi_hat(&m, space).mul_vec(&nodal);
            let want = interpolate(&m, space, |_| c);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn attr_value_parsing() {
        assert_eq!(parse_attr_value("2:0.5").unwrap(), (2, 0.5));
        assert!(parse_attr_value("0:1").is_err());
        assert!(parse_attr_value("x").is_err());
    }
}
