//! Invariant checks for sequences and coarsening steps.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agglomeration::AgglomeratedTopology;
use crate::error::Result;
use crate::fem::SequenceLevel;
use crate::hierarchy::{masked_galerkin, Hierarchy};
use crate::la::{CsrMatrix, DenseMatrix};
use crate::solvers::{AuxSpace, Direct, Hybrid, L1Sgs, Solver, VCycle, DEFAULT_SWEEPS};

/// One measured invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tol
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {} value={:.3e} tol={:.1e}",
            self.name, self.value, self.tol
        )
    }
}

/// Largest dense size for which rank checks are run.
pub const DENSE_CHECK_LIMIT: usize = 500;

/// `max|a - b| / max(max|a|, max|b|)`, or 0 when both vanish.
pub fn relative_difference(a: &CsrMatrix, b: &CsrMatrix) -> Result<f64> {
    let diff = a.add(b, -1.0)?.max_abs();
    let scale = a.max_abs().max(b.max_abs());
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

fn product_ratio(d2: &CsrMatrix, d1: &CsrMatrix) -> Result<f64> {
    let scale = d2.max_abs() * d1.max_abs();
    let v = d2.matmul(d1)?.max_abs();
    Ok(if scale == 0.0 { v } else { v / scale })
}

/// Complex property and exactness of one sequence.
pub fn check_sequence(level: &SequenceLevel, tag: &str, complex_tol: f64) -> Result<Vec<Check>> {
    let d = &level.derivatives;
    let mut out = vec![
        Check::new(
            format!("{tag} complex D2*D1"),
            product_ratio(&d[1], &d[0])?,
            complex_tol,
        ),
        Check::new(
            format!("{tag} complex D3*D2"),
            product_ratio(&d[2], &d[1])?,
            complex_tol,
        ),
    ];
    if level.dims().iter().all(|&n| n <= DENSE_CHECK_LIMIT) {
        out.extend(exactness(level, tag));
    }
    Ok(out)
}

/// Rank/nullity equalities of a sequence on a contractible domain.
pub fn exactness(level: &SequenceLevel, tag: &str) -> Vec<Check> {
    let dims = level.dims();
    let ranks: Vec<usize> = level
        .derivatives
        .iter()
        .map(|d| d.to_dense().rank(1e-9))
        .collect();
    let nullity = |i: usize| (dims[i] - ranks[i]) as f64;
    vec![
        Check::new(
            format!("{tag} exactness nullity(D1)=1"),
            (nullity(0) - 1.0).abs(),
            0.0,
        ),
        Check::new(
            format!("{tag} exactness rank(D1)=nullity(D2)"),
            (ranks[0] as f64 - nullity(1)).abs(),
            0.0,
        ),
        Check::new(
            format!("{tag} exactness rank(D2)=nullity(D3)"),
            (ranks[1] as f64 - nullity(2)).abs(),
            0.0,
        ),
        Check::new(
            format!("{tag} exactness rank(D3)=dim4"),
            (ranks[2] as f64 - dims[3] as f64).abs(),
            0.0,
        ),
    ]
}

/// Largest deviation from 1 of the integral of a coarse unit-integral
/// function over its entity, measured in fine dofs.
pub fn pv_integral_error(
    fine: &SequenceLevel,
    agg: &AgglomeratedTopology,
    p: &[CsrMatrix; 4],
    coarse: &SequenceLevel,
) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..4 {
        let pt = p[s].transpose();
        for (g, &iota) in coarse.iota[s].iter().enumerate() {
            if iota == 0.0 {
                continue;
            }
            let (k, x) = coarse.dof_entity[s][g];
            let mut integral = 0.0;
            for &(e, sign) in &agg.entities[k][x] {
                for &d in &fine.entity_dofs[s][k][e] {
                    integral += f64::from(sign) * fine.iota[s][d] * pt.get(g, d);
                }
            }
            worst = worst.max((integral - iota).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of the column-normalized coarse Gram matrix `PᵀMP`.
pub fn normalized_gram_min_eigenvalue(m: &CsrMatrix, p: &CsrMatrix) -> Result<f64> {
    let g = crate::la::triple_product(&p.transpose(), m, p)?.to_dense();
    let n = g.n_rows();
    if n == 0 {
        return Ok(1.0);
    }
    let s: Vec<f64> = (0..n).map(|i| 1.0 / g[(i, i)].sqrt()).collect();
    let mut h = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = s[i] * g[(i, j)] * s[j];
        }
    }
    Ok(h.symmetric_eigenvalues()[0])
}

/// Off-diagonal size of the coarse trace mass matrices on lowest entities,
/// relative to the diagonal.
pub fn trace_mass_offdiagonal(coarse: &SequenceLevel) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..4 {
        for lm in &coarse.local_mass[k][k] {
            let n = lm.dofs.len();
            let dmax = (0..n).fold(0.0f64, |m, i| m.max(lm.mat[(i, i)].abs()));
            for i in 0..n {
                for j in 0..n {
                    if i != j && dmax > 0.0 {
                        worst = worst.max(lm.mat[(i, j)].abs() / dmax);
                    }
                }
            }
        }
    }
    worst
}

/// Full invariant suite of one coarsening step with prolongators `p` and
/// projectors `pi`.
pub fn check_coarsening(
    fine: &SequenceLevel,
    agg: &AgglomeratedTopology,
    p: &[CsrMatrix; 4],
    pi: &[CsrMatrix; 4],
    coarse: &SequenceLevel,
    tag: &str,
) -> Result<Vec<Check>> {
    let mut out = check_sequence(coarse, tag, 1e-12)?;
    for s in 0..4 {
        let pp = pi[s].matmul(&p[s])?;
        let eye = CsrMatrix::identity(pp.n_rows());
        out.push(Check::new(
            format!("{tag} right inverse Pi{}*P{}", s + 1, s + 1),
            pp.add(&eye, -1.0)?.max_abs(),
            1e-10,
        ));
    }
    for s in 0..3 {
        let dh = &coarse.derivatives[s];
        let dl = &fine.derivatives[s];
        let lhs = dh.matmul(&pi[s])?;
        let rhs = pi[s + 1].matmul(dl)?;
        out.push(Check::new(
            format!("{tag} commutativity D{} Pi", s + 1),
            relative_difference(&lhs, &rhs)?,
            1e-10,
        ));
        let lhs = dl.matmul(&p[s])?;
        let rhs = p[s + 1].matmul(dh)?;
        out.push(Check::new(
            format!("{tag} prolongator compatibility D{} P", s + 1),
            relative_difference(&lhs, &rhs)?,
            1e-10,
        ));
    }
    out.push(Check::new(
        format!("{tag} PV unit integrals"),
        pv_integral_error(fine, agg, p, coarse),
        1e-12,
    ));
    out.push(Check::new(
        format!("{tag} trace mass diagonal"),
        trace_mass_offdiagonal(coarse),
        1e-12,
    ));
    if coarse.dims().iter().all(|&n| n <= DENSE_CHECK_LIMIT) {
        for s in 0..4 {
            let lmin = normalized_gram_min_eigenvalue(&fine.assemble_mass(s + 1), &p[s])?;
            let deficient = if lmin > 1e-12 { 0.0 } else { 1.0 };
            out.push(Check::new(
                format!("{tag} full column rank P{}", s + 1),
                deficient,
                0.0,
            ));
        }
    }
    Ok(out)
}

/// Largest `|r1ᵀBr2 - r2ᵀBr1| / sqrt(r1ᵀBr1 · r2ᵀBr2)` and the number of
/// non-positive `rᵀBr` over `pairs` random pairs.
pub fn symmetry_and_positivity(b: &dyn Solver, pairs: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.size();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut asym = 0.0f64;
    let mut nonpositive = 0;
    for _ in 0..pairs {
        let r1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (z1, z2) = (b.apply(&r1), b.apply(&r2));
        let (q1, q2) = (dot(&r1, &z1), dot(&r2, &z2));
        nonpositive += usize::from(q1 <= 0.0) + usize::from(q2 <= 0.0);
        let scale = (q1.abs() * q2.abs()).sqrt().max(f64::MIN_POSITIVE);
        asym = asym.max((dot(&r1, &z2) - dot(&r2, &z1)).abs() / scale);
    }
    (asym, nonpositive)
}

/// Checks of the assembled hierarchy: every coarsening step, Galerkin
/// consistency and symmetry of the system matrices, and symmetry and
/// positivity of the V-cycle (direct coarse solve) and of the aux-space
/// preconditioner on the coarsest level.
pub fn check_hierarchy(h: &Hierarchy) -> Result<Vec<Check>> {
    let mut out = check_sequence(&h.levels[0], "l1", 0.0)?;
    for l in 0..h.n_levels() - 1 {
        let tag = format!("l{}", l + 2);
        out.extend(check_coarsening(
            &h.levels[l],
            &h.topologies[l],
            &h.p[l],
            &h.pi[l],
            &h.levels[l + 1],
            &tag,
        )?);
        let galerkin = masked_galerkin(&h.a[l], &h.p_form[l], h.boundary(l + 1, h.form))?;
        out.push(Check::new(
            format!("{tag} Galerkin A"),
            relative_difference(&galerkin, &h.a[l + 1])?,
            1e-12,
        ));
    }
    for (l, a) in h.a.iter().enumerate() {
        let asym = relative_difference(a, &a.transpose())?;
        out.push(Check::new(format!("l{} symmetric A", l + 1), asym, 1e-12));
    }
    let last = h.n_levels() - 1;
    let smoothers = (0..last)
        .map(|l| -> Result<Box<dyn Solver>> {
            let a = h.a[l].clone();
            let d = Arc::new(h.masked_derivative(l, h.form - 1));
            let a_aux = Arc::new(masked_galerkin(&a, &d, h.boundary(l, h.form - 1))?);
            Ok(Box::new(Hybrid::new(
                a.clone(),
                Box::new(L1Sgs::new(a, DEFAULT_SWEEPS)?),
                d,
                Box::new(L1Sgs::new(a_aux, DEFAULT_SWEEPS)?),
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    let coarse = Box::new(Direct::new(h.a[last].clone())?);
    let v = VCycle::new(h.a.clone(), h.p_form.clone(), smoothers, coarse);
    let (asym, nonpos) = symmetry_and_positivity(&v, 20, 1);
    out.push(Check::new("V-cycle symmetry", asym, 1e-10));
    out.push(Check::new("V-cycle positivity", nonpos as f64, 0.0));
    let aux = AuxSpace::for_level(h, last, DEFAULT_SWEEPS)?;
    let (asym, nonpos) = symmetry_and_positivity(&aux, 20, 2);
    out.push(Check::new("aux-space symmetry", asym, 1e-10));
    out.push(Check::new("aux-space positivity", nonpos as f64, 0.0));
    Ok(out)
}
