//! Level-independent cell-complex description used by every level of the
//! hierarchy: signed incidence between consecutive dimensions plus attributes.

use crate::error::{Error, Result};
use crate::la::CsrMatrix;
use crate::mesh::{dot3, Mesh};

#[derive(Debug, Clone)]
pub struct Topology {
    counts: [usize; 4],
    /// `incidence[d - 1]`: dimension-`d` entities × dimension-`(d-1)` entities, entries ±1.
    incidence: [CsrMatrix; 3],
    element_attrs: Vec<u32>,
    /// Boundary attribute per facet, 0 for interior facets.
    facet_boundary_attrs: Vec<u32>,
    /// Boundary patch label per facet (0 for interior facets). Coarse facets
    /// never extend across two patches.
    facet_patches: Vec<u32>,
    facet_elements: Vec<Vec<(usize, i8)>>,
}

impl Topology {
    pub fn new(
        counts: [usize; 4],
        incidence: [CsrMatrix; 3],
        element_attrs: Vec<u32>,
        facet_boundary_attrs: Vec<u32>,
        facet_patches: Vec<u32>,
    ) -> Result<Self> {
        for d in 1..=3 {
            let b = &incidence[d - 1];
            if b.n_rows() != counts[d] || b.n_cols() != counts[d - 1] {
                return Err(Error::DimensionMismatch(format!(
                    "incidence {d}->{}",
                    d - 1
                )));
            }
        }
        if element_attrs.len() != counts[3]
            || facet_boundary_attrs.len() != counts[2]
            || facet_patches.len() != counts[2]
        {
            return Err(Error::DimensionMismatch("attribute tables".into()));
        }
        let mut facet_elements = vec![Vec::new(); counts[2]];
        for t in 0..counts[3] {
            for (f, s) in incidence[2].row(t) {
                facet_elements[f].push((t, s.signum() as i8));
            }
        }
        for (f, els) in facet_elements.iter().enumerate() {
            let boundary = facet_boundary_attrs[f] != 0;
            let ok = match els.len() {
                1 => boundary,
                2 => !boundary && els[0].1 == -els[1].1,
                _ => false,
            };
            if !ok {
                return Err(Error::Topology(format!(
                    "facet {f} has inconsistent element incidence"
                )));
            }
        }
        Ok(Self {
            counts,
            incidence,
            element_attrs,
            facet_boundary_attrs,
            facet_patches,
            facet_elements,
        })
    }

    pub fn from_mesh(m: &Mesh) -> Self {
        let b1 = CsrMatrix::from_triplets(
            m.n_edges(),
            m.n_vertices(),
            &m.edges()
                .iter()
                .enumerate()
                .flat_map(|(e, &[a, b])| [(e, a, -1.0), (e, b, 1.0)])
                .collect::<Vec<_>>(),
        );
        let b2 = CsrMatrix::from_triplets(
            m.n_facets(),
            m.n_edges(),
            &m.facet_edges()
                .iter()
                .enumerate()
                .flat_map(|(f, fe)| fe.map(|(e, s)| (f, e, s as f64)))
                .collect::<Vec<_>>(),
        );
        let b3 = CsrMatrix::from_triplets(
            m.n_elements(),
            m.n_facets(),
            &m.element_facets()
                .iter()
                .enumerate()
                .flat_map(|(t, tf)| tf.map(|(f, s)| (t, f, s as f64)))
                .collect::<Vec<_>>(),
        );
        let counts = [m.n_vertices(), m.n_edges(), m.n_facets(), m.n_elements()];
        Self::new(
            counts,
            [b1, b2, b3],
            m.element_attrs().to_vec(),
            m.facet_boundary_attrs().to_vec(),
            planar_patches(m),
        )
        .expect("mesh topology is consistent")
    }

    pub fn n(&self, dim: usize) -> usize {
        self.counts[dim]
    }

    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    /// Signed incidence from dimension `d` to dimension `d - 1`, `d` in 1..=3.
    pub fn incidence(&self, d: usize) -> &CsrMatrix {
        &self.incidence[d - 1]
    }

    pub fn element_attrs(&self) -> &[u32] {
        &self.element_attrs
    }

    pub fn facet_boundary_attrs(&self) -> &[u32] {
        &self.facet_boundary_attrs
    }

    pub fn facet_patches(&self) -> &[u32] {
        &self.facet_patches
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_boundary_attrs[f] != 0
    }

    /// Elements adjacent to facet `f` with their incidence signs.
    pub fn facet_elements(&self, f: usize) -> &[(usize, i8)] {
        &self.facet_elements[f]
    }

    /// Sub-entities of dimension `d - 1` of entity `i` of dimension `d`, with signs.
    pub fn faces(&self, d: usize, i: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.incidence[d - 1]
            .row(i)
            .map(|(j, s)| (j, s.signum() as i8))
    }

    /// Entities of every dimension `<= dim` in the closure of the given
    /// dimension-`dim` entities, each list sorted.
    pub fn closure(&self, dim: usize, ids: &[usize]) -> [Vec<usize>; 4] {
        let mut out: [Vec<usize>; 4] = Default::default();
        let mut current: Vec<usize> = ids.to_vec();
        current.sort_unstable();
        current.dedup();
        for d in (0..=dim).rev() {
            if d < dim {
                let mut next: Vec<usize> = out[d + 1]
                    .iter()
                    .flat_map(|&i| self.incidence[d].row_cols(i).iter().copied())
                    .collect();
                next.sort_unstable();
                next.dedup();
                current = next;
            }
            out[d] = std::mem::take(&mut current);
        }
        out
    }

    /// Flags per dimension 0..=2 for entities in the closure of boundary facets.
    pub fn boundary_flags(&self) -> [Vec<bool>; 3] {
        let bf: Vec<usize> = (0..self.n(2))
            .filter(|&f| self.is_boundary_facet(f))
            .collect();
        let cl = self.closure(2, &bf);
        let mut flags: [Vec<bool>; 3] = [
            vec![false; self.n(0)],
            vec![false; self.n(1)],
            vec![false; self.n(2)],
        ];
        for d in 0..3 {
            for &i in &cl[d] {
                flags[d][i] = true;
            }
        }
        flags
    }

    /// Element adjacency through interior facets, neighbor lists sorted.
    pub fn dual_graph(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n(3)];
        for els in &self.facet_elements {
            if let [(a, _), (b, _)] = els[..] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }
}

/// Labels boundary facets by the plane they lie in (outward normal and
/// offset), so that coarse boundary facets do not fold over domain corners.
fn planar_patches(m: &Mesh) -> Vec<u32> {
    let mut labels = std::collections::HashMap::new();
    (0..m.n_facets())
        .map(|f| {
            if !m.is_boundary_facet(f) {
                return 0;
            }
            let t = m.facet_elements(f)[0];
            let s = m.element_facets()[t]
                .iter()
                .find(|x| x.0 == f)
                .map_or(1.0, |x| x.1 as f64);
            let n = m.facet_area_normal(f);
            let len = dot3(n, n).sqrt();
            let n = n.map(|x| s * x / len);
            let offset = dot3(n, m.vertex(m.facets()[f][0]));
            let q = |x: f64| (x * 1e8).round() as i64;
            let key = (q(n[0]), q(n[1]), q(n[2]), q(offset));
            let next = labels.len() as u32 + 1;
            *labels.entry(key).or_insert(next)
        })
        .collect()
}

/// Alternating sum of entity counts.
pub fn euler_characteristic(counts: &[usize]) -> i64 {
    counts
        .iter()
        .enumerate()
        .map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_of_boundary_vanishes() {
        let t = Topology::from_mesh(&Mesh::cube(2));
        for d in 2..=3 {
            let bb = t.incidence(d).matmul(t.incidence(d - 1)).unwrap();
            assert_eq!(bb.max_abs(), 0.0);
        }
    }

    #[test]
    fn cube_euler_characteristic() {
        let t = Topology::from_mesh(&Mesh::cube(2));
        assert_eq!(euler_characteristic(&t.counts()), 1);
        let all: Vec<usize> = (0..t.n(3)).collect();
        let cl = t.closure(3, &all);
        assert_eq!(
            cl.iter().map(|c| c.len()).collect::<Vec<_>>(),
            t.counts().to_vec()
        );
    }

    #[test]
    fn dual_graph_of_kuhn_cube() {
        let m = Mesh::cube(1);
        let t = Topology::from_mesh(&m);
        let g = t.dual_graph();
        let edges: usize = g.iter().map(|l| l.len()).sum::<usize>() / 2;
        let interior = (0..m.n_facets())
            .filter(|&f| !m.is_boundary_facet(f))
            .count();
        assert_eq!(edges, interior);
    }
}
