//! Multilevel hierarchy of de Rham sequences and the Galerkin system
//! matrices of one form, with essential boundary conditions.
//!
//! Boundary dofs are eliminated on every level: the coarse matrix is
//! `P̃ᵀ A P̃` with `P̃` the prolongator whose boundary rows and columns are
//! zeroed, plus a unit diagonal on the coarse boundary dofs.

use std::sync::Arc;

use crate::agglomeration::{
    coarsen_by_refinement, coarsen_recursive, coarsen_topology, trivial_partition,
    AgglomeratedTopology,
};
use crate::coarsen::{coarsen_sequence, rap_level};
use crate::error::{Error, Result};
use crate::fem::{interpolate, Coefficient, SequenceLevel};
use crate::la::CsrMatrix;
use crate::mesh::{Mesh, Point};

/// How agglomerates are formed on each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partitioner {
    /// Seeded greedy region growing on the dual graph.
    Growing,
    /// Reverts uniform refinements of the mesh (agglomerates are the
    /// elements of the parent meshes).
    Refinement,
    /// One agglomerate per element (identity coarsening).
    Trivial,
}

#[derive(Debug, Clone)]
pub struct HierarchyOptions {
    /// Total number of levels including the finest.
    pub levels: usize,
    /// Target number of elements per agglomerate.
    pub factor: usize,
    pub target_order: usize,
    pub seed: u64,
    pub partitioner: Partitioner,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            levels: 2,
            factor: 8,
            target_order: 1,
            seed: 0,
            partitioner: Partitioner::Growing,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    /// 2 for H(curl), 3 for H(div).
    pub form: usize,
    pub levels: Vec<SequenceLevel>,
    pub topologies: Vec<AgglomeratedTopology>,
    /// `p[l][s-1]`: level `l+1` to level `l`, natural (unmasked).
    pub p: Vec<[CsrMatrix; 4]>,
    pub pi: Vec<[CsrMatrix; 4]>,
    /// Masked prolongators of the form space.
    pub p_form: Vec<Arc<CsrMatrix>>,
    /// System matrices per level.
    pub a: Vec<Arc<CsrMatrix>>,
}

/// `XᵀAX` plus a unit diagonal on the `flags` columns (which `x` must have
/// zeroed).
pub fn masked_galerkin(a: &CsrMatrix, x: &CsrMatrix, flags: &[bool]) -> Result<CsrMatrix> {
    let g = rap_level(a, x)?;
    let unit: Vec<f64> = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    g.add(&CsrMatrix::diagonal(&unit), 1.0)
}

/// Zeroes the flagged rows and columns.
pub fn mask(m: &CsrMatrix, row_flags: &[bool], col_flags: &[bool]) -> CsrMatrix {
    let rows = (0..m.n_rows())
        .map(|r| {
            if row_flags[r] {
                Vec::new()
            } else {
                m.row(r).filter(|&(c, _)| !col_flags[c]).collect()
            }
        })
        .collect();
    CsrMatrix::from_rows(m.n_cols(), rows)
}

impl Hierarchy {
    /// Builds the fine sequence of `mesh` (masses weighted by `coef` for
    /// `form`), coarsens it, and assembles the system matrices.
    pub fn build(
        mesh: &Mesh,
        form: usize,
        coef: &Coefficient,
        opts: &HierarchyOptions,
    ) -> Result<Self> {
        if form != 2 && form != 3 {
            return Err(Error::Config(format!(
                "form must be curl (2) or div (3), got {form}"
            )));
        }
        if opts.levels == 0 {
            return Err(Error::Config("at least one level is required".into()));
        }
        if opts.partitioner == Partitioner::Refinement && mesh.refinements() + 1 < opts.levels {
            return Err(Error::Config(format!(
                "{} levels need {} mesh refinements to revert, the mesh has {}",
                opts.levels,
                opts.levels - 1,
                mesh.refinements()
            )));
        }
        let weights = coef.element_weights(mesh.element_attrs(), form)?;
        let fine = SequenceLevel::fine(mesh, Some(&weights), opts.target_order)?;
        Self::from_fine(fine, form, opts)
    }

    pub fn from_fine(fine: SequenceLevel, form: usize, opts: &HierarchyOptions) -> Result<Self> {
        let n_coarse = opts.levels - 1;
        let topologies = match opts.partitioner {
            Partitioner::Trivial => {
                let mut out: Vec<AgglomeratedTopology> = Vec::with_capacity(n_coarse);
                for _ in 0..n_coarse {
                    let t = out.last().map_or(&fine.topology, |a| &a.coarse);
                    out.push(coarsen_topology(t, &trivial_partition(t.n(3)))?);
                }
                out
            }
            Partitioner::Refinement => coarsen_by_refinement(&fine.topology, n_coarse)?,
            Partitioner::Growing => {
                coarsen_recursive(&fine.topology, &vec![opts.factor; n_coarse], opts.seed)?
            }
        };
        let a0 = fine.assemble_form(form)?;
        let mut levels = vec![fine];
        let mut p = Vec::with_capacity(n_coarse);
        let mut pi = Vec::with_capacity(n_coarse);
        let mut p_form = Vec::with_capacity(n_coarse);
        let mut a = vec![Arc::new(a0)];
        for agg in &topologies {
            let c = coarsen_sequence(levels.last().unwrap(), agg)?;
            let fine_flags = &levels.last().unwrap().boundary[form - 1];
            let coarse_flags = &c.level.boundary[form - 1];
            let pm = mask(&c.p[form - 1], fine_flags, coarse_flags);
            let ac = masked_galerkin(a.last().unwrap(), &pm, coarse_flags)?;
            a.push(Arc::new(ac));
            p_form.push(Arc::new(pm));
            p.push(c.p);
            pi.push(c.pi);
            levels.push(c.level);
        }
        Ok(Self {
            form,
            levels,
            topologies,
            p,
            pi,
            p_form,
            a,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn boundary(&self, l: usize, space: usize) -> &[bool] {
        &self.levels[l].boundary[space - 1]
    }

    /// `D_space` on level `l` with boundary rows and columns zeroed.
    pub fn masked_derivative(&self, l: usize, space: usize) -> CsrMatrix {
        mask(
            self.levels[l].derivative(space),
            self.boundary(l, space + 1),
            self.boundary(l, space),
        )
    }

    /// Vector-H1 interpolator into `space` (2 or 3) on level `l`, with
    /// boundary rows and boundary vertex components zeroed.
    pub fn masked_pi_hat(&self, l: usize, space: usize) -> CsrMatrix {
        let vb = self.boundary(l, 1);
        let col_flags: Vec<bool> = (0..3).flat_map(|_| vb.iter().copied()).collect();
        mask(
            &self.levels[l].pi_hat[space - 2],
            self.boundary(l, space),
            &col_flags,
        )
    }

    /// Boundary flags of the vector-H1 space on level `l`.
    pub fn vector_boundary(&self, l: usize) -> Vec<bool> {
        let vb = self.boundary(l, 1);
        (0..3).flat_map(|_| vb.iter().copied()).collect()
    }

    /// Right-hand side `M Π f` of the form space on the finest level, zero on
    /// boundary dofs. `mesh` must be the mesh the hierarchy was built on.
    pub fn load_vector(&self, mesh: &Mesh, f: impl Fn(Point) -> [f64; 3]) -> Vec<f64> {
        let m = self.levels[0].assemble_mass(self.form);
        let mut b = m.mul_vec(&interpolate(mesh, self.form, f));
        for (bi, &flag) in b.iter_mut().zip(self.boundary(0, self.form)) {
            if flag {
                *bi = 0.0;
            }
        }
        b
    }

    pub fn form_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|lv| lv.dim(self.form)).collect()
    }

    /// Grid and operator complexity.
    pub fn complexities(&self) -> (f64, f64) {
        let dims = self.form_dims();
        let gc = dims.iter().sum::<usize>() as f64 / dims[0] as f64;
        let nnz: Vec<usize> = self.a.iter().map(|a| a.nnz()).collect();
        let oc = nnz.iter().sum::<usize>() as f64 / nnz[0] as f64;
        (gc, oc)
    }
}
