//! Real-space sparse stiffness assembly shared by torus and bounded solves.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::lattice::Metamaterial;

/// Pivots below this fraction of the largest diagonal entry flag a mechanism.
pub const PIVOT_TOL: f64 = 1e-12;
/// Relative residual accepted after a direct solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// `ε^{n−2} S K_β S` in global components, local order `(u⁻, u⁺)`.
pub fn scaled_element(mm: &Metamaterial, beta: usize, eps: f64) -> Result<DMatrix<f64>> {
    let bar = mm.bar(beta)?;
    let k = mm.kinematics().element_stiffness(&bar.section, bar.length, &bar.directors, beta)?;
    let layout = mm.layout();
    let du = layout.per_joint();
    let scale = eps.powi(mm.dimension() as i32 - 2);
    let s = |i: usize| if i % du < layout.deflections { 1.0 } else { eps };
    Ok(DMatrix::from_fn(2 * du, 2 * du, |i, j| k.matrix[(i, j)] * s(i) * s(j) * scale))
}

/// Sums element matrices over `(joint⁻, joint⁺, β)` triples.
pub fn assemble(
    mm: &Metamaterial,
    eps: f64,
    joints: usize,
    connectivity: impl Iterator<Item = (usize, usize, usize)>,
) -> Result<CscMatrix<f64>> {
    let du = mm.dofs_per_joint();
    let elements = (0..mm.bar_count()).map(|b| scaled_element(mm, b, eps)).collect::<Result<Vec<_>>>()?;
    let mut coo = CooMatrix::new(joints * du, joints * du);
    for (jm, jp, beta) in connectivity {
        let ke = &elements[beta];
        let dof = |i: usize| if i < du { jm * du + i } else { jp * du + i - du };
        for i in 0..2 * du {
            for j in 0..2 * du {
                let v = ke[(i, j)];
                if v != 0.0 {
                    coo.push(dof(i), dof(j), v);
                }
            }
        }
    }
    Ok(CscMatrix::from(&coo))
}

/// Solves `K u = f` with the flagged dofs held at zero.
pub fn solve_fixed(k: &CscMatrix<f64>, f: &DVector<f64>, fixed: &[bool]) -> Result<DVector<f64>> {
    let n = k.nrows();
    let mut map = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !fixed[i] {
            map[i] = free.len();
            free.push(i);
        }
    }
    let m = free.len();
    if m == 0 {
        return Ok(DVector::zeros(n));
    }
    let mut coo = CooMatrix::new(m, m);
    let mut max_diag = 0.0f64;
    for (i, j, &v) in k.triplet_iter() {
        if map[i] != usize::MAX && map[j] != usize::MAX {
            coo.push(map[i], map[j], v);
            if i == j {
                max_diag = max_diag.max(v.abs());
            }
        }
    }
    let reduced = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&reduced)
        .map_err(|e| Error::SingularSystem(format!("factorization failed ({e:?}); insufficient constraints or mechanism")))?;
    let l = chol.l();
    let min_pivot = (0..m)
        .map(|j| {
            let col = l.col(j);
            col.row_indices().iter().zip(col.values()).find(|(&r, _)| r == j).map_or(0.0, |(_, &v)| v * v)
        })
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOL * max_diag) {
        return Err(Error::SingularSystem(format!(
            "pivot {min_pivot:e} relative to max diagonal {max_diag:e}; insufficient constraints or mechanism"
        )));
    }
    let rhs = DVector::from_iterator(m, free.iter().map(|&i| f[i]));
    let x = chol.solve(&rhs);
    let x = x.column(0);
    let residual = (&reduced * x.clone_owned() - &rhs).norm();
    if residual > RESIDUAL_TOL * rhs.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::SingularSystem(format!("direct solve residual {residual:e}")));
    }
    let mut u = DVector::zeros(n);
    for (r, &i) in free.iter().enumerate() {
        u[i] = x[r];
    }
    Ok(u)
}
