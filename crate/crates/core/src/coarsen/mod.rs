//! One coarsening step of a de Rham sequence: coarse shape functions on the
//! agglomerated topology, prolongators `P`, commuting projectors `Π` and
//! coarse exterior derivatives.
//!
//! Spaces are built from L2 down to H1. For every coarse entity `X` of
//! dimension `k` and space `s` (`k >= s - 1`), the coarse dofs interior to
//! `X` are:
//!
//! * `k == s - 1`: the unit-integral (PV) trace and the filtered targets;
//! * `k >= s`: derivative bubbles (zero trace, derivative equal to one
//!   next-space interior function of `X`) followed by D-free bubbles.
//!
//! Every coarse function owned by a proper face of `X` is extended into the
//! interior of `X` by a local saddle-point solve.

pub mod local;

use std::collections::HashMap;

use crate::agglomeration::AgglomeratedTopology;
use crate::error::{Error, Result};
use crate::fem::{LocalMatrix, SequenceLevel};
use crate::la::{triple_product, CsrMatrix, DenseMatrix, Lu};
use crate::topology::Topology;

use local::LocalExtension;

/// Fine dofs grouped by the coarse entity whose interior contains them.
#[derive(Debug, Clone)]
pub struct DofAgglomeration {
    /// `interior[space-1][dim][x]`, ascending.
    pub interior: [[Vec<Vec<usize>>; 4]; 4],
}

impl DofAgglomeration {
    pub fn new(level: &SequenceLevel, agg: &AgglomeratedTopology) -> Result<Self> {
        let counts = agg.coarse.counts();
        let mut interior: [[Vec<Vec<usize>>; 4]; 4] =
            std::array::from_fn(|_| std::array::from_fn(|d| vec![Vec::new(); counts[d]]));
        for s in 0..4 {
            for (dof, &(m, e)) in level.dof_entity[s].iter().enumerate() {
                let owner = agg.owner[m]
                    .get(e)
                    .copied()
                    .filter(|&(k, x)| k < 4 && k >= s && x < counts[k]);
                let (k, x) = owner.ok_or_else(|| {
                    Error::Topology(format!(
                        "space {} dof {dof} maps to no coarse entity",
                        s + 1
                    ))
                })?;
                interior[s][k][x].push(dof);
            }
        }
        Ok(Self { interior })
    }

    /// Fine dofs of `space` on the closure of coarse entity `(dim, x)`, ascending.
    pub fn closure(&self, coarse: &Topology, space: usize, dim: usize, x: usize) -> Vec<usize> {
        let cl = coarse.closure(dim, &[x]);
        let mut out = Vec::new();
        for (d, ids) in cl.iter().enumerate().take(dim + 1) {
            for &y in ids {
                out.extend_from_slice(&self.interior[space - 1][d][y]);
            }
        }
        out.sort_unstable();
        out
    }
}

/// The result of one coarsening step.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    /// Prolongators, fine x coarse, per space.
    pub p: [CsrMatrix; 4],
    /// Commuting projectors, coarse x fine, per space.
    pub pi: [CsrMatrix; 4],
    pub level: SequenceLevel,
}

/// Galerkin product `Pᵀ A P` of a symmetric `A`, symmetrized so that the
/// result is symmetric to the last bit.
pub fn rap_level(a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if a.n_rows() != p.n_rows() || a.n_cols() != p.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "RAP: A is {}x{}, P is {}x{}",
            a.n_rows(),
            a.n_cols(),
            p.n_rows(),
            p.n_cols()
        )));
    }
    let c = triple_product(&p.transpose(), a, p)?;
    Ok(c.add(&c.transpose(), 1.0)?.scale(0.5))
}

struct EntityBasis {
    first: usize,
    n: usize,
    /// Leading derivative bubbles; the rest are D-free bubbles (or traces on
    /// lowest entities).
    n_deriv: usize,
    /// Fine closure dofs.
    closure: Vec<usize>,
    /// Local projector onto the interior coarse dofs (`n x closure.len()`).
    r: DenseMatrix,
}

impl EntityBasis {
    fn range(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.n
    }
}

#[derive(Default)]
struct SpaceBasis {
    ents: [Vec<EntityBasis>; 4],
    /// Coarse shape functions as sparse fine columns.
    cols: Vec<Vec<(usize, f64)>>,
    owner: Vec<(usize, usize)>,
    iota: Vec<f64>,
}

struct Ctx<'a> {
    level: &'a SequenceLevel,
    agg: &'a AgglomeratedTopology,
    dofs: &'a DofAgglomeration,
}

impl Ctx<'_> {
    fn closure(&self, space: usize, dim: usize, x: usize) -> Vec<usize> {
        self.dofs.closure(&self.agg.coarse, space, dim, x)
    }

    /// Mass of `space` on coarse entity `(dim, x)` restricted to the sorted
    /// fine dofs `dofs`.
    fn mass(&self, space: usize, dim: usize, x: usize, dofs: &[usize]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(dofs.len(), dofs.len());
        for &(e, _) in &self.agg.entities[dim][x] {
            let lm = &self.level.local_mass[dim][space - 1][e];
            let pos: Vec<Option<usize>> =
                lm.dofs.iter().map(|d| dofs.binary_search(d).ok()).collect();
            for (a, pa) in pos.iter().enumerate() {
                let Some(pa) = *pa else { continue };
                for (b, pb) in pos.iter().enumerate() {
                    if let Some(pb) = *pb {
                        m[(pa, pb)] += lm.mat[(a, b)];
                    }
                }
            }
        }
        m
    }

    /// Coarse dofs of `sb` owned by proper faces of `(dim, x)`, ascending.
    fn boundary_coarse(&self, sb: &SpaceBasis, space: usize, dim: usize, x: usize) -> Vec<usize> {
        let cl = self.agg.coarse.closure(dim, &[x]);
        let mut out = Vec::new();
        for d in (space - 1)..dim {
            for &y in &cl[d] {
                out.extend(sb.ents[d][y].range());
            }
        }
        out
    }

    fn closure_coarse(&self, sb: &SpaceBasis, space: usize, dim: usize, x: usize) -> Vec<usize> {
        let mut out = self.boundary_coarse(sb, space, dim, x);
        out.extend(sb.ents[dim][x].range());
        out
    }

    /// Stacked local projectors of the faces of `(dim, x)`, as rows over `closure`.
    fn boundary_projector(
        &self,
        sb: &SpaceBasis,
        space: usize,
        dim: usize,
        x: usize,
        closure: &[usize],
    ) -> (Vec<usize>, DenseMatrix) {
        let cl = self.agg.coarse.closure(dim, &[x]);
        let mut dofs = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for d in (space - 1)..dim {
            for &y in &cl[d] {
                let eb = &sb.ents[d][y];
                let pos: Vec<usize> = eb
                    .closure
                    .iter()
                    .map(|f| {
                        closure
                            .binary_search(f)
                            .expect("face closure inside entity closure")
                    })
                    .collect();
                for i in 0..eb.n {
                    let mut row = vec![0.0; closure.len()];
                    for (j, &p) in pos.iter().enumerate() {
                        row[p] = eb.r[(i, j)];
                    }
                    rows.push(row);
                    dofs.push(eb.first + i);
                }
            }
        }
        let mut m = DenseMatrix::zeros(rows.len(), closure.len());
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        (dofs, m)
    }
}

/// Values of the coarse columns `coarse` on the sorted fine dofs `rows`.
fn local_block(cols: &[Vec<(usize, f64)>], rows: &[usize], coarse: &[usize]) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows.len(), coarse.len());
    for (j, &g) in coarse.iter().enumerate() {
        for &(r, v) in &cols[g] {
            if let Ok(i) = rows.binary_search(&r) {
                m[(i, j)] = v;
            }
        }
    }
    m
}

fn select_rows(m: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows.len(), m.n_cols());
    for (i, &r) in rows.iter().enumerate() {
        for j in 0..m.n_cols() {
            out[(i, j)] = m[(r, j)];
        }
    }
    out
}

fn select_cols(m: &DenseMatrix, cols: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.n_rows(), cols.len());
    for i in 0..m.n_rows() {
        for (j, &c) in cols.iter().enumerate() {
            out[(i, j)] = m[(i, c)];
        }
    }
    out
}

/// Columns given on `pos` (positions within a closure of size `n`) expanded
/// to the whole closure.
fn expand(cols: &[Vec<f64>], pos: &[usize], n: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (&p, &v) in pos.iter().zip(c) {
            m[(p, j)] = v;
        }
    }
    m
}

fn push_column(
    sb: &mut SpaceBasis,
    dofs: &[usize],
    values: &[f64],
    owner: (usize, usize),
    iota: f64,
) {
    sb.cols.push(
        dofs.iter()
            .zip(values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(&d, &v)| (d, v))
            .collect(),
    );
    sb.owner.push(owner);
    sb.iota.push(iota);
}

fn build_space(ctx: &Ctx, s: usize, next: Option<&SpaceBasis>) -> Result<SpaceBasis> {
    let level = ctx.level;
    let counts = ctx.agg.coarse.counts();
    let targets = &level.targets[s - 1];
    let mut sb = SpaceBasis::default();
    for k in (s - 1)..4 {
        let mut ents = Vec::with_capacity(counts[k]);
        for x in 0..counts[k] {
            let name = format!("space {s}, dimension-{k} entity {x}");
            let closure = ctx.closure(s, k, x);
            let interior = &ctx.dofs.interior[s - 1][k][x];
            let mass = ctx.mass(s, k, x, &closure);
            let first = sb.cols.len();

            if k == s - 1 {
                let sign: HashMap<usize, i8> = ctx.agg.entities[k][x].iter().copied().collect();
                let iota: Vec<f64> = closure
                    .iter()
                    .map(|&d| {
                        let (_, e) = level.dof_entity[s - 1][d];
                        level.iota[s - 1][d] * f64::from(sign.get(&e).copied().unwrap_or(0))
                    })
                    .collect();
                let pv = local::pv_trace(&mass, &iota, &name)?;
                let filtered =
                    local::filter_targets(&mass, Some(&pv), &select_rows(targets, &closure))?;
                let mut basis = vec![pv];
                basis.extend(filtered.columns());
                let r = local::mass_projector(
                    &DenseMatrix::from_columns(closure.len(), &basis),
                    &mass,
                )?;
                for (j, col) in basis.iter().enumerate() {
                    push_column(
                        &mut sb,
                        &closure,
                        col,
                        (k, x),
                        if j == 0 { 1.0 } else { 0.0 },
                    );
                }
                ents.push(EntityBasis {
                    first,
                    n: basis.len(),
                    n_deriv: 0,
                    closure,
                    r,
                });
                continue;
            }

            let next = next.expect("next space is built first");
            let nc = closure.len();
            let int_pos: Vec<usize> = interior
                .iter()
                .map(|d| closure.binary_search(d).unwrap())
                .collect();
            let bnd_pos: Vec<usize> = (0..nc)
                .filter(|p| int_pos.binary_search(p).is_err())
                .collect();
            let (bdofs, rb) = ctx.boundary_projector(&sb, s, k, x, &closure);
            let pb = local_block(&sb.cols, &closure, &bdofs);

            let int1 = &ctx.dofs.interior[s][k][x];
            let d = level.derivative(s).submatrix_dense(int1, &closure);
            let m1 = ctx.mass(s + 1, k, x, int1);
            let next_eb = &next.ents[k][x];
            let lowest = k == s;
            let stab = if s < k {
                let int2 = &ctx.dofs.interior[s + 1][k][x];
                let m2 = ctx.mass(s + 2, k, x, int2);
                let d2 = level.derivative(s + 1).submatrix_dense(int2, int1);
                Some(d2.transpose().matmul(&m2).matmul(&d2))
            } else {
                None
            };
            let pv1 = lowest.then(|| local_block(&next.cols, int1, &[next_eb.first]).column(0));
            let ext = LocalExtension::new(
                &mass,
                &int_pos,
                &bnd_pos,
                &d,
                m1.clone(),
                stab.as_ref(),
                pv1.as_deref(),
                &name,
            )?;

            // Derivatives of the boundary functions, extended into X by the
            // next space's construction.
            let s_int = if lowest {
                DenseMatrix::zeros(int1.len(), bdofs.len())
            } else {
                let closure1 = ctx.closure(s + 1, k, x);
                let (bdofs1, rb1) = ctx.boundary_projector(next, s + 1, k, x, &closure1);
                let deta = level
                    .derivative(s)
                    .submatrix_dense(&closure1, &closure)
                    .matmul(&pb);
                local_block(&next.cols, int1, &bdofs1).matmul(&rb1.matmul(&deta))
            };
            for (j, &g) in bdofs.iter().enumerate() {
                let eta: Vec<f64> = bnd_pos.iter().map(|&p| pb[(p, j)]).collect();
                let (xv, _) = ext.extend(&eta, &s_int.column(j));
                sb.cols[g].extend(
                    interior
                        .iter()
                        .zip(&xv)
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(&dd, &v)| (dd, v)),
                );
            }

            // Derivative bubbles.
            let drivers: Vec<usize> = if lowest {
                (next_eb.first + 1..next_eb.first + next_eb.n).collect()
            } else {
                (next_eb.first + next_eb.n_deriv..next_eb.first + next_eb.n).collect()
            };
            let phi = local_block(&next.cols, int1, &drivers);
            let zero_eta = vec![0.0; bnd_pos.len()];
            let deriv: Vec<Vec<f64>> = (0..drivers.len())
                .map(|j| ext.extend(&zero_eta, &phi.column(j)).0)
                .collect();

            // D-free bubbles.
            let m_int = select_cols(&select_rows(&mass, &int_pos), &int_pos);
            let dfree = local::dfree_bubbles(
                &select_cols(&d, &int_pos),
                &m_int,
                &select_rows(targets, interior),
            )?;

            // Local projector: subtract the boundary interpolant, fit the
            // derivative bubbles through the derivative, then the D-free
            // bubbles in the mass inner product.
            let mut w = DenseMatrix::identity(nc);
            if !bdofs.is_empty() {
                let pr = local_block(&sb.cols, &closure, &bdofs).matmul(&rb);
                for i in 0..nc {
                    for j in 0..nc {
                        w[(i, j)] -= pr[(i, j)];
                    }
                }
            }
            let bd = expand(&deriv, &int_pos, nc);
            let mut r_rows: Vec<Vec<f64>> = Vec::new();
            if !deriv.is_empty() {
                let m1phi = m1.matmul(&phi);
                let gram = phi.transpose().matmul(&m1phi);
                let beta = Lu::factor_with_context(&gram, Some(&name))?
                    .solve_matrix(&m1phi.transpose().matmul(&d).matmul(&w));
                let corr = bd.matmul(&beta);
                for i in 0..nc {
                    for j in 0..nc {
                        w[(i, j)] -= corr[(i, j)];
                    }
                }
                r_rows.extend((0..beta.n_rows()).map(|i| beta.row(i).to_vec()));
            }
            if dfree.n_cols() > 0 {
                let gamma =
                    local::mass_projector(&dfree, &m_int)?.matmul(&select_rows(&w, &int_pos));
                r_rows.extend((0..gamma.n_rows()).map(|i| gamma.row(i).to_vec()));
            }
            let mut r = DenseMatrix::zeros(r_rows.len(), nc);
            for (i, row) in r_rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    r[(i, j)] = v;
                }
            }
            for col in deriv.iter().chain(&dfree.columns()) {
                push_column(&mut sb, interior, col, (k, x), 0.0);
            }
            ents.push(EntityBasis {
                first,
                n: deriv.len() + dfree.n_cols(),
                n_deriv: deriv.len(),
                closure,
                r,
            });
        }
        sb.ents[k] = ents;
    }
    Ok(sb)
}

fn csr_times_dense(a: &CsrMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
    for i in 0..a.n_rows() {
        for (k, v) in a.row(i) {
            for j in 0..b.n_cols() {
                out[(i, j)] += v * b[(k, j)];
            }
        }
    }
    out
}

/// `I_3 ⊗ P` in the component-major layout.
fn vector_prolongator(p: &CsrMatrix) -> CsrMatrix {
    let (n, m) = (p.n_rows(), p.n_cols());
    let mut trip = Vec::with_capacity(3 * p.nnz());
    for c in 0..3 {
        for i in 0..n {
            for (j, v) in p.row(i) {
                trip.push((c * n + i, c * m + j, v));
            }
        }
    }
    CsrMatrix::from_triplets(3 * n, 3 * m, &trip)
}

/// Builds the next coarser sequence on the agglomerated topology `agg`.
pub fn coarsen_sequence(level: &SequenceLevel, agg: &AgglomeratedTopology) -> Result<CoarseLevel> {
    let dofs = DofAgglomeration::new(level, agg)?;
    let ctx = Ctx {
        level,
        agg,
        dofs: &dofs,
    };
    let b4 = build_space(&ctx, 4, None)?;
    let b3 = build_space(&ctx, 3, Some(&b4))?;
    let b2 = build_space(&ctx, 2, Some(&b3))?;
    let b1 = build_space(&ctx, 1, Some(&b2))?;
    let bases = [b1, b2, b3, b4];
    let coarse_counts = agg.coarse.counts();

    let p: [CsrMatrix; 4] = std::array::from_fn(|s| {
        let b = &bases[s];
        let trip: Vec<(usize, usize, f64)> = b
            .cols
            .iter()
            .enumerate()
            .flat_map(|(g, c)| c.iter().map(move |&(r, v)| (r, g, v)))
            .collect();
        CsrMatrix::from_triplets(level.dim(s + 1), b.cols.len(), &trip)
    });
    let pi: [CsrMatrix; 4] = std::array::from_fn(|s| {
        let b = &bases[s];
        let mut rows = vec![Vec::new(); b.cols.len()];
        for ents in &b.ents {
            for eb in ents {
                for i in 0..eb.n {
                    rows[eb.first + i] = eb
                        .closure
                        .iter()
                        .enumerate()
                        .map(|(j, &c)| (c, eb.r[(i, j)]))
                        .filter(|&(_, v)| v != 0.0)
                        .collect();
                }
            }
        }
        CsrMatrix::from_rows(level.dim(s + 1), rows)
    });

    // Coarse derivatives from local pieces: row h of D^H_s is the local
    // projection of the derivative of the coarse functions on h's entity.
    let mut derivatives: Vec<CsrMatrix> = Vec::with_capacity(3);
    for s in 1..=3 {
        let (bs, bn) = (&bases[s - 1], &bases[s]);
        let mut rows = vec![Vec::new(); bn.cols.len()];
        for k in s..4 {
            for w in 0..coarse_counts[k] {
                let eb = &bn.ents[k][w];
                if eb.n == 0 {
                    continue;
                }
                let closure_s = ctx.closure(s, k, w);
                let cdofs = ctx.closure_coarse(bs, s, k, w);
                let dl = level.derivative(s).submatrix_dense(&eb.closure, &closure_s);
                let loc =
                    eb.r.matmul(&dl)
                        .matmul(&local_block(&bs.cols, &closure_s, &cdofs));
                for i in 0..eb.n {
                    let rmax = (0..cdofs.len()).fold(0.0f64, |m, j| m.max(loc[(i, j)].abs()));
                    rows[eb.first + i] = cdofs
                        .iter()
                        .enumerate()
                        .map(|(j, &g)| (g, loc[(i, j)]))
                        .filter(|&(_, v)| v.abs() > 1e-13 * rmax)
                        .collect();
                }
            }
        }
        derivatives.push(CsrMatrix::from_rows(bs.cols.len(), rows));
    }
    let derivatives: [CsrMatrix; 3] = derivatives.try_into().expect("three derivatives");
    for s in 0..2 {
        let dd = derivatives[s + 1].matmul(&derivatives[s])?;
        let scale = derivatives[s + 1].max_abs() * derivatives[s].max_abs();
        if dd.max_abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::ExactnessViolation(format!(
                "|D{} D{}| = {:.3e} on the coarse level",
                s + 2,
                s + 1,
                dd.max_abs()
            )));
        }
    }

    let bflags = agg.coarse.boundary_flags();
    let boundary: [Vec<bool>; 4] = std::array::from_fn(|s| {
        bases[s]
            .owner
            .iter()
            .map(|&(k, x)| k < 3 && bflags[k][x])
            .collect()
    });
    let dof_entity: [Vec<(usize, usize)>; 4] = std::array::from_fn(|s| bases[s].owner.clone());
    let entity_dofs: [[Vec<Vec<usize>>; 4]; 4] = std::array::from_fn(|s| {
        std::array::from_fn(|d| {
            if d + 1 < s + 1 {
                vec![Vec::new(); coarse_counts[d]]
            } else {
                bases[s].ents[d]
                    .iter()
                    .map(|eb| eb.range().collect())
                    .collect()
            }
        })
    });
    let iota: [Vec<f64>; 4] = std::array::from_fn(|s| bases[s].iota.clone());
    let targets: [DenseMatrix; 4] =
        std::array::from_fn(|s| csr_times_dense(&pi[s], &level.targets[s]));
    let phat = vector_prolongator(&p[0]);
    let pi_hat = [
        pi[1].matmul(&level.pi_hat[0])?.matmul(&phat)?,
        pi[2].matmul(&level.pi_hat[1])?.matmul(&phat)?,
    ];

    let mut local_mass: [[Vec<LocalMatrix>; 4]; 4] = Default::default();
    for k in 0..4 {
        for s in 1..=(k + 1).min(4) {
            local_mass[k][s - 1] = (0..coarse_counts[k])
                .map(|x| {
                    let closure = ctx.closure(s, k, x);
                    let cdofs = ctx.closure_coarse(&bases[s - 1], s, k, x);
                    let px = local_block(&bases[s - 1].cols, &closure, &cdofs);
                    let mat = px
                        .transpose()
                        .matmul(&ctx.mass(s, k, x, &closure))
                        .matmul(&px);
                    LocalMatrix { dofs: cdofs, mat }
                })
                .collect();
        }
    }

    let level = SequenceLevel {
        topology: agg.coarse.clone(),
        dof_entity,
        entity_dofs,
        iota,
        derivatives,
        boundary,
        targets,
        pi_hat,
        local_mass,
    };
    Ok(CoarseLevel { p, pi, level })
}
