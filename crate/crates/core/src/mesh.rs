//! Tetrahedral meshes with canonically oriented edges and facets.
//!
//! Edges run from the lower to the higher vertex id. A facet `(a, b, c)` with
//! `a < b < c` carries the normal `(x_b - x_a) × (x_c - x_a)`; its boundary is
//! `+(a,b) + (b,c) - (a,c)`. An element sees a facet with sign `+1` when the
//! facet normal points out of the element.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 4]>,
    element_attrs: Vec<u32>,
    edges: Vec<[usize; 2]>,
    facets: Vec<[usize; 3]>,
    element_facets: Vec<[(usize, i8); 4]>,
    element_edges: Vec<[usize; 6]>,
    facet_edges: Vec<[(usize, i8); 3]>,
    facet_elements: Vec<Vec<usize>>,
    /// Boundary attribute per facet, 0 for interior facets.
    facet_boundary_attr: Vec<u32>,
    edge_index: HashMap<[usize; 2], usize>,
    /// Number of uniform refinements that produced this mesh; the children
    /// of element `e` of the parent mesh are `8e..8e+8`.
    refinements: usize,
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot3(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

/// Local facets of a tet, each listed by the three local vertices it contains.
/// Facet `i` is opposite local vertex `i`.
pub const TET_FACETS: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

impl Mesh {
    /// Builds a mesh and derives edges, facets and incidence tables.
    ///
    /// Boundary facets not listed in `boundary` get attribute 1.
    pub fn new(
        vertices: Vec<Point>,
        elements: Vec<[usize; 4]>,
        element_attrs: Vec<u32>,
        boundary: &[([usize; 3], u32)],
    ) -> Result<Self> {
        if elements.len() != element_attrs.len() {
            return Err(Error::DimensionMismatch("element attribute count".into()));
        }
        let nv = vertices.len();
        for (e, el) in elements.iter().enumerate() {
            if el.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!(
                    "element {e} references a missing vertex"
                )));
            }
            if element_attrs[e] == 0 {
                return Err(Error::UnknownAttribute(0));
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut facet_index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut facets = Vec::new();
        let mut facet_elements: Vec<Vec<usize>> = Vec::new();
        let mut element_facets = Vec::with_capacity(elements.len());
        let mut element_edges = Vec::with_capacity(elements.len());

        for (e, el) in elements.iter().enumerate() {
            let x: Vec<Point> = el.iter().map(|&v| vertices[v]).collect();
            let vol = dot3(sub(x[1], x[0]), cross(sub(x[2], x[0]), sub(x[3], x[0])));
            if vol.abs() <= f64::EPSILON * 1e-3 || !vol.is_finite() {
                return Err(Error::ZeroMeasureEntity(format!("element {e}")));
            }
            let mut eids = [0; 6];
            for (k, le) in TET_EDGES.iter().enumerate() {
                let (a, b) = (el[le[0]], el[le[1]]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                eids[k] = id;
            }
            element_edges.push(eids);
            let mut fl = [(0, 0i8); 4];
            for (k, lf) in TET_FACETS.iter().enumerate() {
                let key = sorted3([el[lf[0]], el[lf[1]], el[lf[2]]]);
                let id = *facet_index.entry(key).or_insert_with(|| {
                    facets.push(key);
                    facet_elements.push(Vec::new());
                    facets.len() - 1
                });
                facet_elements[id].push(e);
                if facet_elements[id].len() > 2 {
                    return Err(Error::Topology(format!(
                        "facet {key:?} shared by more than two elements"
                    )));
                }
                let [a, b, c] = key;
                let n = cross(sub(vertices[b], vertices[a]), sub(vertices[c], vertices[a]));
                let outward = sub(vertices[a], x[k]);
                let s = if dot3(n, outward) > 0.0 { 1 } else { -1 };
                fl[k] = (id, s);
            }
            element_facets.push(fl);
        }

        let facet_edges = facets
            .iter()
            .map(|&[a, b, c]| {
                [
                    (edge_index[&[a, b]], 1),
                    (edge_index[&[b, c]], 1),
                    (edge_index[&[a, c]], -1),
                ]
            })
            .collect();

        let mut facet_boundary_attr: Vec<u32> = facet_elements
            .iter()
            .map(|els| if els.len() == 1 { 1 } else { 0 })
            .collect();
        for (verts, attr) in boundary {
            let key = sorted3(*verts);
            let id = facet_index
                .get(&key)
                .copied()
                .filter(|&f| facet_elements[f].len() == 1)
                .ok_or_else(|| {
                    Error::Topology(format!(
                        "listed boundary facet {key:?} is not on the boundary"
                    ))
                })?;
            if *attr == 0 {
                return Err(Error::UnknownAttribute(0));
            }
            facet_boundary_attr[id] = *attr;
        }

        Ok(Self {
            vertices,
            elements,
            element_attrs,
            edges,
            facets,
            element_facets,
            element_edges,
            facet_edges,
            facet_elements,
            facet_boundary_attr,
            edge_index,
            refinements: 0,
        })
    }

    /// Number of uniform refinements applied since the mesh was built.
    pub fn refinements(&self) -> usize {
        self.refinements
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Entity count by dimension (0 = vertices, ..., 3 = elements).
    pub fn n_entities(&self, dim: usize) -> usize {
        [
            self.n_vertices(),
            self.n_edges(),
            self.n_facets(),
            self.n_elements(),
        ][dim]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }
    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }
    pub fn element_attrs(&self) -> &[u32] {
        &self.element_attrs
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn facets(&self) -> &[[usize; 3]] {
        &self.facets
    }
    /// Facet ids and orientation signs of each element, facet `k` opposite local vertex `k`.
    pub fn element_facets(&self) -> &[[(usize, i8); 4]] {
        &self.element_facets
    }
    /// Edge ids of each element in [`TET_EDGES`] order.
    pub fn element_edges(&self) -> &[[usize; 6]] {
        &self.element_edges
    }
    pub fn facet_edges(&self) -> &[[(usize, i8); 3]] {
        &self.facet_edges
    }
    pub fn facet_elements(&self, f: usize) -> &[usize] {
        &self.facet_elements[f]
    }
    pub fn facet_boundary_attrs(&self) -> &[u32] {
        &self.facet_boundary_attr
    }
    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_elements[f].len() == 1
    }
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&[a.min(b), a.max(b)]).copied()
    }

    /// Boundary facets as `(sorted vertices, attribute)`.
    pub fn boundary_facets(&self) -> Vec<([usize; 3], u32)> {
        (0..self.n_facets())
            .filter(|&f| self.is_boundary_facet(f))
            .map(|f| (self.facets[f], self.facet_boundary_attr[f]))
            .collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let x = self.element_points(e);
        dot3(sub(x[1], x[0]), cross(sub(x[2], x[0]), sub(x[3], x[0]))).abs() / 6.0
    }

    pub fn element_points(&self, e: usize) -> [Point; 4] {
        self.elements[e].map(|v| self.vertices[v])
    }

    pub fn element_centroid(&self, e: usize) -> Point {
        let x = self.element_points(e);
        let mut c = [0.0; 3];
        for p in x {
            for d in 0..3 {
                c[d] += 0.25 * p[d];
            }
        }
        c
    }

    /// Canonical facet normal scaled by the facet area.
    pub fn facet_area_normal(&self, f: usize) -> Point {
        let [a, b, c] = self.facets[f];
        let n = cross(
            sub(self.vertices[b], self.vertices[a]),
            sub(self.vertices[c], self.vertices[a]),
        );
        n.map(|x| 0.5 * x)
    }

    pub fn facet_area(&self, f: usize) -> f64 {
        dot3(self.facet_area_normal(f), self.facet_area_normal(f)).sqrt()
    }

    /// Edge vector from the lower to the higher vertex.
    pub fn edge_vector(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        sub(self.vertices[b], self.vertices[a])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let t = self.edge_vector(e);
        dot3(t, t).sqrt()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_volume(e)).sum()
    }

    /// Unit cube split into `n³` subcubes of six Kuhn tetrahedra each.
    pub fn cube(n: usize) -> Self {
        assert!(n >= 1, "cube mesh needs at least one cell per axis");
        let m = n + 1;
        let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                }
            }
        }
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut elements = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for p in PERMS {
                        let mut c = [i, j, k];
                        let mut tet = [id(c[0], c[1], c[2]); 4];
                        for (s, &axis) in p.iter().enumerate() {
                            c[axis] += 1;
                            tet[s + 1] = id(c[0], c[1], c[2]);
                        }
                        elements.push(tet);
                    }
                }
            }
        }
        let attrs = vec![1; elements.len()];
        Self::new(vertices, elements, attrs, &[]).expect("Kuhn cube mesh is valid")
    }

    /// Splits every tet into eight by edge midpoints, always cutting along the
    /// diagonal between the midpoints of local edges (0,2) and (1,3).
    pub fn refine(&self) -> Self {
        let nv = self.n_vertices();
        let mut vertices = self.vertices.clone();
        for &[a, b] in &self.edges {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            vertices.push([
                0.5 * (p[0] + q[0]),
                0.5 * (p[1] + q[1]),
                0.5 * (p[2] + q[2]),
            ]);
        }
        let mid = |a: usize, b: usize| nv + self.edge_index[&[a.min(b), a.max(b)]];
        let mut elements = Vec::with_capacity(8 * self.n_elements());
        let mut attrs = Vec::with_capacity(8 * self.n_elements());
        for (e, &[x0, x1, x2, x3]) in self.elements.iter().enumerate() {
            let (x01, x02, x03, x12, x13, x23) = (
                mid(x0, x1),
                mid(x0, x2),
                mid(x0, x3),
                mid(x1, x2),
                mid(x1, x3),
                mid(x2, x3),
            );
            let children = [
                [x0, x01, x02, x03],
                [x01, x1, x12, x13],
                [x02, x12, x2, x23],
                [x03, x13, x23, x3],
                [x01, x02, x03, x13],
                [x01, x02, x12, x13],
                [x02, x03, x13, x23],
                [x02, x12, x13, x23],
            ];
            elements.extend_from_slice(&children);
            attrs.extend(std::iter::repeat(self.element_attrs[e]).take(8));
        }
        let mut boundary = Vec::new();
        for ([a, b, c], attr) in self.boundary_facets() {
            let (ab, bc, ac) = (mid(a, b), mid(b, c), mid(a, c));
            for t in [[a, ab, ac], [ab, b, bc], [ac, bc, c], [ab, bc, ac]] {
                boundary.push((t, attr));
            }
        }
        let mut fine = Self::new(vertices, elements, attrs, &boundary)
            .expect("refinement of a valid mesh is valid");
        fine.refinements = self.refinements + 1;
        fine
    }

    /// Copy of the mesh where elements whose centroid satisfies `pred` get attribute `attr`.
    pub fn with_region_attribute(&self, pred: impl Fn(Point) -> bool, attr: u32) -> Self {
        assert!(attr >= 1, "attributes are positive");
        let mut m = self.clone();
        for e in 0..m.n_elements() {
            if pred(m.element_centroid(e)) {
                m.element_attrs[e] = attr;
            }
        }
        m
    }

    /// Reads the `amge-mesh v1` text format.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens: Vec<(usize, String)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(|t| (i + 1, t.to_string())));
        }
        let mut it = tokens.into_iter().peekable();
        let last_line = std::cell::Cell::new(1);
        let mut next = |what: &str| -> Result<(usize, String)> {
            let t = it.next().ok_or(Error::Parse {
                line: last_line.get(),
                msg: format!("unexpected end of input, expected {what}"),
            })?;
            last_line.set(t.0);
            Ok(t)
        };
        fn expect_kw(t: (usize, String), kw: &str) -> Result<()> {
            if t.1 == kw {
                Ok(())
            } else {
                Err(Error::Parse {
                    line: t.0,
                    msg: format!("expected `{kw}`, found `{}`", t.1),
                })
            }
        }
        fn num<T: std::str::FromStr>(t: (usize, String), what: &str) -> Result<T> {
            t.1.parse().map_err(|_| Error::Parse {
                line: t.0,
                msg: format!("invalid {what} `{}`", t.1),
            })
        }

        expect_kw(next("header")?, "amge-mesh")?;
        expect_kw(next("version")?, "v1")?;
        expect_kw(next("dim")?, "dim")?;
        let t = next("dimension")?;
        let line = t.0;
        if num::<usize>(t, "dimension")? != 3 {
            return Err(Error::Parse {
                line,
                msg: "only dim 3 is supported".into(),
            });
        }
        expect_kw(next("vertices")?, "vertices")?;
        let nv: usize = num(next("vertex count")?, "vertex count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let mut p = [0.0; 3];
            for x in &mut p {
                *x = num(next("coordinate")?, "coordinate")?;
            }
            vertices.push(p);
        }
        expect_kw(next("elements")?, "elements")?;
        let ne: usize = num(next("element count")?, "element count")?;
        let mut elements = Vec::with_capacity(ne);
        let mut attrs = Vec::with_capacity(ne);
        for _ in 0..ne {
            let t = next("attribute")?;
            let line = t.0;
            let attr: u32 = num(t, "attribute")?;
            if attr == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "attribute 0 is reserved".into(),
                });
            }
            let mut el = [0; 4];
            for v in &mut el {
                let t = next("vertex id")?;
                let line = t.0;
                *v = num(t, "vertex id")?;
                if *v >= nv {
                    return Err(Error::Parse {
                        line,
                        msg: format!("vertex id {v} out of range"),
                    });
                }
            }
            elements.push(el);
            attrs.push(attr);
        }
        expect_kw(next("boundary")?, "boundary")?;
        let nb: usize = num(next("boundary count")?, "boundary count")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let t = next("attribute")?;
            let line = t.0;
            let attr: u32 = num(t, "attribute")?;
            if attr == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "attribute 0 is reserved".into(),
                });
            }
            let mut f = [0; 3];
            for v in &mut f {
                let t = next("vertex id")?;
                let line = t.0;
                *v = num(t, "vertex id")?;
                if *v >= nv {
                    return Err(Error::Parse {
                        line,
                        msg: format!("vertex id {v} out of range"),
                    });
                }
            }
            boundary.push((f, attr));
        }
        if let Some((line, tok)) = it.next() {
            return Err(Error::Parse {
                line,
                msg: format!("trailing token `{tok}`"),
            });
        }
        Self::new(vertices, elements, attrs, &boundary)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    /// Writes the `amge-mesh v1` text format; coordinates round-trip exactly.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "amge-mesh v1")?;
        writeln!(out, "dim 3")?;
        writeln!(out, "vertices {}", self.n_vertices())?;
        for p in &self.vertices {
            writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2])?;
        }
        writeln!(out, "elements {}", self.n_elements())?;
        for (el, a) in self.elements.iter().zip(&self.element_attrs) {
            writeln!(out, "{} {} {} {} {}", a, el[0], el[1], el[2], el[3])?;
        }
        let b = self.boundary_facets();
        writeln!(out, "boundary {}", b.len())?;
        for (f, a) in b {
            writeln!(out, "{} {} {} {}", a, f[0], f[1], f[2])?;
        }
        Ok(())
    }
}

/// Whether a point lies in the closed box `[lo, hi]³`.
pub fn in_box(p: Point, lo: f64, hi: f64) -> bool {
    p.iter().all(|&x| (lo..=hi).contains(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF_TET: &str = "amge-mesh v1\ndim 3\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\nelements 1\n1 0 1 2 3\nboundary 0\n";

    #[test]
    fn reference_tet_counts() {
        let m = Mesh::parse(REF_TET).unwrap();
        assert_eq!(
            (m.n_vertices(), m.n_edges(), m.n_facets(), m.n_elements()),
            (4, 6, 4, 1)
        );
        assert!((m.element_volume(0) - 1.0 / 6.0).abs() < 1e-15);
        assert!(m.element_facets()[0]
            .iter()
            .all(|&(f, _)| m.is_boundary_facet(f)));
    }

    #[test]
    fn two_tets_share_one_facet() {
        let text = "amge-mesh v1\ndim 3\nvertices 5\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\nelements 2\n1 0 1 2 3\n1 1 2 3 4\nboundary 0\n";
        let m = Mesh::parse(text).unwrap();
        assert_eq!(m.n_facets(), 7);
        let interior: Vec<_> = (0..7).filter(|&f| !m.is_boundary_facet(f)).collect();
        assert_eq!(interior.len(), 1);
        let f = interior[0];
        let signs: Vec<i8> = (0..2)
            .map(|e| m.element_facets()[e].iter().find(|x| x.0 == f).unwrap().1)
            .collect();
        assert_eq!(signs[0], -signs[1]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "amge-mesh v1\ndim 3\nvertices 1\n0 0 x\n";
        match Mesh::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_are_ignored() {
        let text = REF_TET.replace("dim 3", "dim 3 # three dimensions\n# blank");
        assert!(Mesh::parse(&text).is_ok());
    }

    #[test]
    fn cube_counts() {
        let m = Mesh::cube(1);
        assert_eq!((m.n_elements(), m.n_vertices()), (6, 8));
        assert_eq!(Mesh::cube(2).n_elements(), 48);
        assert!((Mesh::cube(3).total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn refine_scales_counts() {
        let m = Mesh::cube(1);
        let r = m.refine();
        assert_eq!(r.n_elements(), 48);
        assert!((r.total_volume() - 1.0).abs() < 1e-14);
        assert_eq!(r.boundary_facets().len(), 4 * m.boundary_facets().len());
    }

    #[test]
    fn region_attribute() {
        let m = Mesh::cube(4).with_region_attribute(|p| in_box(p, 0.25, 0.75), 2);
        assert_eq!(m.element_attrs().iter().filter(|&&a| a == 2).count(), 48);
        let m = Mesh::cube(2).with_region_attribute(|_| false, 2);
        assert!(m.element_attrs().iter().all(|&a| a == 1));
    }

    #[test]
    fn write_read_round_trip() {
        let m = Mesh::cube(2).refine();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = Mesh::read(&buf[..]).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.elements(), m.elements());
        assert_eq!(back.facet_boundary_attrs(), m.facet_boundary_attrs());
    }
}
