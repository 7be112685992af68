//! Entity-local dense kernels used while building coarse shape functions.

use crate::error::{Error, Result};
use crate::la::{dense::svd_orthonormal_complement, DenseMatrix, Lu};

/// Relative singular-value threshold below which filtered targets count as
/// linearly dependent.
pub const FILTER_TOL: f64 = 1e-6;

/// Relative singular-value threshold for numerical null spaces.
pub const NULL_TOL: f64 = 1e-10;

/// The unit-integral function of an entity: the mass Riesz representer of
/// the integral functional `iota`, scaled so that `iota . pv = 1`.
pub fn pv_trace(mass: &DenseMatrix, iota: &[f64], entity: &str) -> Result<Vec<f64>> {
    let lu = Lu::factor_with_context(mass, Some(entity))?;
    let y = lu.solve(iota);
    let denom: f64 = iota.iter().zip(&y).map(|(a, b)| a * b).sum();
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::ZeroMeasureEntity(entity.to_string()));
    }
    Ok(y.iter().map(|v| v / denom).collect())
}

/// Columns of `targets` made mass-orthogonal to `pv`, orthonormalized in the
/// mass inner product, with (near) dependent directions dropped.
pub fn filter_targets(
    mass: &DenseMatrix,
    pv: Option<&[f64]>,
    targets: &DenseMatrix,
) -> Result<DenseMatrix> {
    let n = mass.n_rows();
    if targets.n_cols() == 0 || n == 0 {
        return Ok(DenseMatrix::zeros(n, 0));
    }
    let l = mass.cholesky()?;
    let lt = l.transpose();
    let v = lt.matmul(targets);
    let w = match pv {
        Some(p) => DenseMatrix::from_columns(n, &[lt.mul_vec(p)]),
        None => DenseMatrix::zeros(n, 0),
    };
    let q = svd_orthonormal_complement(&v, &w, FILTER_TOL);
    let cols: Vec<Vec<f64>> = q
        .columns()
        .iter()
        .map(|c| l.solve_lower_transpose(c))
        .collect();
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// Orthonormal basis (Euclidean) of the null space of `d`.
pub fn null_space(d: &DenseMatrix) -> DenseMatrix {
    let n = d.n_cols();
    if d.n_rows() == 0 || d.frobenius_norm() == 0.0 {
        return DenseMatrix::identity(n);
    }
    let svd = d.svd();
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cols: Vec<Vec<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= NULL_TOL * smax)
        .map(|(j, _)| svd.v.column(j))
        .collect();
    DenseMatrix::from_columns(n, &cols)
}

/// Targets projected (in the mass inner product) onto the null space of the
/// interior derivative block `d_int`, then filtered and orthonormalized.
pub fn dfree_bubbles(
    d_int: &DenseMatrix,
    mass_int: &DenseMatrix,
    targets_int: &DenseMatrix,
) -> Result<DenseMatrix> {
    let n = mass_int.n_rows();
    if targets_int.n_cols() == 0 || n == 0 {
        return Ok(DenseMatrix::zeros(n, 0));
    }
    let z = null_space(d_int);
    if z.n_cols() == 0 {
        return Ok(DenseMatrix::zeros(n, 0));
    }
    let mz = mass_int.matmul(&z);
    let gram = z.transpose().matmul(&mz);
    let coef = Lu::factor(&gram)?.solve_matrix(&mz.transpose().matmul(targets_int));
    filter_targets(mass_int, None, &z.matmul(&coef))
}

/// `(XᵀMX)⁻¹ XᵀM`: coefficients of the mass projection onto the columns of `x`.
pub fn mass_projector(x: &DenseMatrix, mass: &DenseMatrix) -> Result<DenseMatrix> {
    let xtm = x.transpose().matmul(mass);
    let gram = xtm.matmul(x);
    Ok(Lu::factor(&gram)?.solve_matrix(&xtm))
}

/// Symmetric Ruiz equilibration: scales `k` in place to `T k T` with every
/// row of unit max-norm (approximately) and returns the diagonal of `T`.
fn equilibrate(k: &mut DenseMatrix) -> Vec<f64> {
    let n = k.n_rows();
    let mut t = vec![1.0; n];
    for _ in 0..20 {
        let r: Vec<f64> = (0..n)
            .map(|i| {
                let m = k.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if m > 0.0 && m.is_finite() {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        if r.iter().all(|&v| (v - 1.0).abs() < 1e-3) {
            break;
        }
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] *= r[i] * r[j];
            }
            t[i] *= r[i];
        }
    }
    t
}

/// Factored saddle-point system extending traces from the boundary of an
/// entity into its interior.
///
/// Unknowns: interior dofs `x` of space `i`, a multiplier `y` on the
/// interior dofs of space `i + 1` and, for the lowest extension, a scalar
/// `c` scaling the entity's space-`(i+1)` unit-integral function `p`:
///
/// ```text
/// [ M_II       D_Iᵀ M1   0     ] [x]   [ -M_IB η               ]
/// [ M1 D_I     -S        -M1 p ] [y] = [ M1 (s - D_B η)        ]
/// [ 0          -pᵀ M1    0     ] [c]   [ 0                     ]
/// ```
///
/// `S = D2ᵀ M2 D2` stabilizes the higher extensions. The computed function
/// satisfies `D φ = s + c p` on the entity. The system is equilibrated so
/// that large coefficient contrasts between the two masses do not make it
/// numerically singular.
pub struct LocalExtension {
    lu: Lu,
    scale: Vec<f64>,
    n_int: usize,
    n_next: usize,
    lowest: bool,
    m_ib: DenseMatrix,
    m1: DenseMatrix,
    d_b: DenseMatrix,
}

impl LocalExtension {
    /// `mass` is the space-`i` entity mass on the closure dofs, `d` the
    /// derivative block (interior next-space rows, closure columns).
    pub fn new(
        mass: &DenseMatrix,
        int_pos: &[usize],
        bnd_pos: &[usize],
        d: &DenseMatrix,
        m1: DenseMatrix,
        stab: Option<&DenseMatrix>,
        pv: Option<&[f64]>,
        context: &str,
    ) -> Result<Self> {
        let ni = int_pos.len();
        let n1 = m1.n_rows();
        let lowest = pv.is_some();
        let n = ni + n1 + usize::from(lowest);
        let sub = |m: &DenseMatrix, rows: &[usize], cols: &[usize]| {
            let mut s = DenseMatrix::zeros(rows.len(), cols.len());
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    s[(a, b)] = m[(r, c)];
                }
            }
            s
        };
        let all1: Vec<usize> = (0..n1).collect();
        let d_i = sub(d, &all1, int_pos);
        let d_b = sub(d, &all1, bnd_pos);
        let m_ii = sub(mass, int_pos, int_pos);
        let m_ib = sub(mass, int_pos, bnd_pos);
        let m1d = m1.matmul(&d_i);
        let mut k = DenseMatrix::zeros(n, n);
        for a in 0..ni {
            for b in 0..ni {
                k[(a, b)] = m_ii[(a, b)];
            }
        }
        for a in 0..n1 {
            for b in 0..ni {
                k[(ni + a, b)] = m1d[(a, b)];
                k[(b, ni + a)] = m1d[(a, b)];
            }
        }
        if let Some(s) = stab {
            for a in 0..n1 {
                for b in 0..n1 {
                    k[(ni + a, ni + b)] = -s[(a, b)];
                }
            }
        }
        if let Some(p) = pv {
            let m1p = m1.mul_vec(p);
            for a in 0..n1 {
                k[(ni + a, n - 1)] = -m1p[a];
                k[(n - 1, ni + a)] = -m1p[a];
            }
        }
        let scale = equilibrate(&mut k);
        let lu = Lu::factor_with_context(&k, Some(context))?;
        Ok(Self {
            lu,
            scale,
            n_int: ni,
            n_next: n1,
            lowest,
            m_ib,
            m1,
            d_b,
        })
    }

    /// Extension of boundary values `eta` with derivative target `s` (interior
    /// next-space dofs). Returns the interior values and `c` (0 unless lowest).
    pub fn extend(&self, eta: &[f64], s: &[f64]) -> (Vec<f64>, f64) {
        let n = self.n_int + self.n_next + usize::from(self.lowest);
        let mut rhs = vec![0.0; n];
        let top = self.m_ib.mul_vec(eta);
        for a in 0..self.n_int {
            rhs[a] = -top[a];
        }
        let db = self.d_b.mul_vec(eta);
        let r: Vec<f64> = s.iter().zip(&db).map(|(a, b)| a - b).collect();
        let mid = self.m1.mul_vec(&r);
        for a in 0..self.n_next {
            rhs[self.n_int + a] = mid[a];
        }
        for (r, t) in rhs.iter_mut().zip(&self.scale) {
            *r *= t;
        }
        let mut sol = self.lu.solve(&rhs);
        for (x, t) in sol.iter_mut().zip(&self.scale) {
            *x *= t;
        }
        let c = if self.lowest { sol[n - 1] } else { 0.0 };
        (sol[..self.n_int].to_vec(), c)
    }

    pub fn n_interior(&self) -> usize {
        self.n_int
    }
}
