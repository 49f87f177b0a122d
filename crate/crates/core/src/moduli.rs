//! Micropolar moduli fitted to the continuum dynamical matrix.
//!
//! The energy density is parametrized as
//! `W_0 = ½ C e·e + ½ H r·r + e·G r`, with `e` the engineering Voigt vector
//! of `sym β` and `r = θ − *skw β`. Evaluated on plane waves
//! (`β = i ξ ⊗ k`, `θ = η`) it must reproduce `½ ζᵀ D_0(k) ζ̄`; sampling
//! directions and polarization probes gives an overdetermined linear system
//! for the entries of `A = [[C, G], [Gᵀ, H]]`.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{quadratic_form, CMatrix, CVector};
use crate::limit::{continuum_dynamical_matrix, polarization_probes, LimitConfig};
use crate::lattice::Metamaterial;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    Isotropic,
    Cubic,
    None,
}

impl SymmetryClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SymmetryClass::Isotropic => "isotropic",
            SymmetryClass::Cubic => "cubic",
            SymmetryClass::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModuli {
    pub dimension: usize,
    /// Voigt matrix; shear order `(12)` in 2D, `(12, 13, 23)` in 3D.
    pub c: DMatrix<f64>,
    /// Coupling on the rotation mismatch `r = θ − *skw β`.
    pub h: DMatrix<f64>,
    /// Cross block between `e` and `r`.
    pub g: DMatrix<f64>,
    /// `‖Ax − b‖ / ‖b‖` of the fit (0 for closed forms).
    pub residual: f64,
    /// Condition number of the normal equations (column-equilibrated).
    pub condition: f64,
    pub symmetry: SymmetryClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// Uniform angles (2D) or axes, face and body diagonals (3D).
    Standard,
    /// The standard design under a fixed generic rotation; disjoint from it.
    Rotated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuliConfig {
    pub limit: LimitConfig,
    pub tol_fit: f64,
    pub tol_symmetry: f64,
    pub max_condition: f64,
    pub design: Design,
}

impl Default for ModuliConfig {
    fn default() -> Self {
        Self {
            limit: LimitConfig::default(),
            tol_fit: 1e-6,
            tol_symmetry: 1e-8,
            max_condition: 1e10,
            design: Design::Standard,
        }
    }
}

pub fn voigt_size(n: usize) -> usize {
    n * (n + 1) / 2
}

pub fn rotation_size(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Voigt index pairs `(i, j)` in storage order.
pub fn voigt_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        1 => vec![(0, 0)],
        2 => vec![(0, 0), (1, 1), (0, 1)],
        3 => vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)],
        _ => panic!("dimension {n}"),
    }
}

/// Engineering Voigt vector of `sym β`.
pub fn voigt_strain<T>(beta: &DMatrix<T>) -> DVector<T>
where
    T: nalgebra::Scalar + Copy + std::ops::Add<Output = T>,
{
    let pairs = voigt_pairs(beta.nrows());
    DVector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| if i == j { beta[(i, i)] } else { beta[(i, j)] + beta[(j, i)] }),
    )
}

/// Axial vector `*skw β`.
pub fn axial_of_skew<T>(beta: &DMatrix<T>) -> DVector<T>
where
    T: nalgebra::Scalar + Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    match beta.nrows() {
        1 => DVector::from_vec(vec![]),
        2 => DVector::from_vec(vec![(beta[(1, 0)] - beta[(0, 1)]) * 0.5]),
        3 => DVector::from_vec(vec![
            (beta[(2, 1)] - beta[(1, 2)]) * 0.5,
            (beta[(0, 2)] - beta[(2, 0)]) * 0.5,
            (beta[(1, 0)] - beta[(0, 1)]) * 0.5,
        ]),
        n => panic!("dimension {n}"),
    }
}

/// `W_0(β, θ)` for real arguments.
pub fn continuum_energy_density(m: &EffectiveModuli, beta: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    let e = voigt_strain(beta);
    let r = theta - axial_of_skew(beta);
    0.5 * e.dot(&(&m.c * &e)) + 0.5 * r.dot(&(&m.h * &r)) + e.dot(&(&m.g * &r))
}

fn rotation_about(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let a = nalgebra::Unit::new_normalize(nalgebra::Vector3::from(axis));
    *nalgebra::Rotation3::from_axis_angle(&a, angle).matrix()
}

fn design_directions(n: usize, design: Design) -> Vec<DVector<f64>> {
    match n {
        1 => vec![DVector::from_vec(vec![1.0])],
        2 => {
            let offset = if design == Design::Rotated { std::f64::consts::PI / 16.0 } else { 0.0 };
            (0..8)
                .map(|j| {
                    let t = offset + std::f64::consts::PI * j as f64 / 8.0;
                    DVector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect()
        }
        _ => {
            let mut dirs: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                for s in [1.0, -1.0] {
                    let mut d = [0.0; 3];
                    d[a] = 1.0;
                    d[b] = s;
                    dirs.push(d);
                }
            }
            for (s, t) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                dirs.push([1.0, s, t]);
            }
            let q = if design == Design::Rotated { rotation_about([0.3, -0.5, 0.8], 0.61) } else { Matrix3::identity() };
            dirs.into_iter()
                .map(|d| {
                    let v = q * nalgebra::Vector3::from(d).normalize();
                    DVector::from_column_slice(v.as_slice())
                })
                .collect()
        }
    }
}

/// Full ansatz vector `z = (e, r)` of a plane-wave probe.
fn ansatz_vector(n: usize, k: &DVector<f64>, zeta: &CVector) -> CVector {
    let i = Complex64::new(0.0, 1.0);
    let beta = DMatrix::from_fn(n, n, |a, b| i * zeta[a] * k[b]);
    let e = voigt_strain(&beta);
    let skw = axial_of_skew(&beta);
    let nr = rotation_size(n);
    let mut z = CVector::zeros(e.len() + nr);
    z.rows_mut(0, e.len()).copy_from(&e);
    for a in 0..nr {
        z[e.len() + a] = zeta[n + a] - skw[a];
    }
    z
}

fn upper_pairs(size: usize) -> Vec<(usize, usize)> {
    (0..size).flat_map(|a| (a..size).map(move |b| (a, b))).collect()
}

fn fit_row(z: &CVector, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(a, b)| if a == b { 0.5 * z[a].norm_sqr() } else { (z[a].conj() * z[b]).re })
        .collect()
}

/// Least-squares extraction of `C`, `H`, `G` from `D_0(k)`.
pub fn extract_effective_moduli(mm: &Metamaterial, cfg: &ModuliConfig) -> Result<EffectiveModuli> {
    let n = mm.dimension();
    let layout = mm.layout();
    if layout.deflections != n || layout.rotations != rotation_size(n) {
        return Err(Error::UnsupportedKinematics(mm.kinematics().name().into()));
    }
    let (nv, nr) = (voigt_size(n), rotation_size(n));
    let size = nv + nr;
    let pairs = upper_pairs(size);
    let magnitude = mm.basis().bz_radius();
    let probes = polarization_probes(layout.per_joint());

    let blocks: Vec<(Vec<Vec<f64>>, Vec<f64>)> = design_directions(n, cfg.design)
        .par_iter()
        .map(|dir| {
            let k = dir * magnitude;
            let d0 = continuum_dynamical_matrix(mm, &k, &cfg.limit)?.matrix;
            let mut rows = Vec::with_capacity(probes.len());
            let mut rhs = Vec::with_capacity(probes.len());
            for zeta in &probes {
                rows.push(fit_row(&ansatz_vector(n, &k, zeta), &pairs));
                rhs.push(0.5 * quadratic_form(&d0, zeta));
            }
            Ok((rows, rhs))
        })
        .collect::<Result<_>>()?;

    let nrows: usize = blocks.iter().map(|b| b.1.len()).sum();
    let mut a = DMatrix::zeros(nrows, pairs.len());
    let mut b = DVector::zeros(nrows);
    let mut r = 0;
    for (rows, rhs) in &blocks {
        for (row, v) in rows.iter().zip(rhs) {
            for (c, x) in row.iter().enumerate() {
                a[(r, c)] = *x;
            }
            b[r] = *v;
            r += 1;
        }
    }

    // column equilibration before measuring conditioning
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    for (j, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(condition <= cfg.max_condition) {
        return Err(Error::IllConditionedFit(condition));
    }
    let x = svd.solve(&b, 0.0).map_err(|_| Error::IllConditionedFit(f64::INFINITY))?;
    let bnorm = b.norm();
    let residual = if bnorm > 0.0 { (&a * &x - &b).norm() / bnorm } else { 0.0 };
    if !(residual <= cfg.tol_fit) {
        return Err(Error::RepresentationFailure { residual, tolerance: cfg.tol_fit });
    }
    let mut full = DMatrix::zeros(size, size);
    for (j, &(p, q)) in pairs.iter().enumerate() {
        let v = if norms[j] > 0.0 { x[j] / norms[j] } else { 0.0 };
        full[(p, q)] = v;
        full[(q, p)] = v;
    }
    let c = full.view((0, 0), (nv, nv)).into_owned();
    let h = full.view((nv, nv), (nr, nr)).into_owned();
    let g = full.view((0, nv), (nv, nr)).into_owned();
    let symmetry = classify_symmetry(&c, cfg.tol_symmetry);
    Ok(EffectiveModuli { dimension: n, c, h, g, residual, condition, symmetry })
}

/// `D_0(k) = Zᵀ A Z̄` for the plane-wave ansatz `z = Z ζ`, so that
/// `½ ζᵀ D_0 ζ̄ = W_0(i ξ ⊗ k, η)`.
pub fn continuum_matrix_from_moduli(m: &EffectiveModuli, k: &DVector<f64>) -> CMatrix {
    let n = m.dimension;
    let (nv, nr) = (voigt_size(n), rotation_size(n));
    let du = n + nr;
    let mut a = DMatrix::<f64>::zeros(nv + nr, nv + nr);
    a.view_mut((0, 0), (nv, nv)).copy_from(&m.c);
    a.view_mut((nv, nv), (nr, nr)).copy_from(&m.h);
    a.view_mut((0, nv), (nv, nr)).copy_from(&m.g);
    a.view_mut((nv, 0), (nr, nv)).copy_from(&m.g.transpose());
    let mut z = CMatrix::zeros(nv + nr, du);
    for j in 0..du {
        let mut e = CVector::zeros(du);
        e[j] = Complex64::from(1.0);
        z.set_column(j, &ansatz_vector(n, k, &e));
    }
    let a = a.map(Complex64::from);
    z.transpose() * a * z.map(|v| v.conj())
}

/// Fourth-order tensor `C_ijkl` from a Voigt matrix.
fn voigt_to_tensor(c: &DMatrix<f64>, n: usize) -> Vec<f64> {
    let pairs = voigt_pairs(n);
    let index = |i: usize, j: usize| pairs.iter().position(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)).unwrap();
    let mut t = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    t[((i * n + j) * n + k) * n + l] = c[(index(i, j), index(k, l))];
                }
            }
        }
    }
    t
}

fn rotate_tensor(t: &[f64], q: &DMatrix<f64>, n: usize) -> Vec<f64> {
    // one index at a time
    let mut cur = t.to_vec();
    for slot in 0..4 {
        let mut next = vec![0.0; cur.len()];
        let stride = n.pow(3 - slot as u32);
        for (idx, out) in next.iter_mut().enumerate() {
            let a = (idx / stride) % n;
            let base = idx - a * stride;
            *out = (0..n).map(|p| q[(a, p)] * cur[base + p * stride]).sum();
        }
        cur = next;
    }
    cur
}

fn invariant_under(c: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> bool {
    let n = q.nrows();
    let t = voigt_to_tensor(c, n);
    let r = rotate_tensor(&t, q, n);
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = t.iter().zip(&r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    scale == 0.0 || diff <= tol * scale
}

fn planar_rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn spatial_rotation(axis: [f64; 3], angle: f64) -> DMatrix<f64> {
    let r = rotation_about(axis, angle);
    DMatrix::from_column_slice(3, 3, r.as_slice())
}

/// Isotropic if invariant under generic rotations, cubic if invariant
/// under quarter turns about the coordinate axes.
pub fn classify_symmetry(c: &DMatrix<f64>, tol: f64) -> SymmetryClass {
    let n = match c.nrows() {
        3 => 2,
        6 => 3,
        _ => return SymmetryClass::None,
    };
    let quarter = std::f64::consts::FRAC_PI_2;
    let cubic = if n == 2 {
        invariant_under(c, &planar_rotation(quarter), tol)
    } else {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .all(|&axis| invariant_under(c, &spatial_rotation(axis, quarter), tol))
    };
    let generic = if n == 2 {
        invariant_under(c, &planar_rotation(0.37), tol) && invariant_under(c, &planar_rotation(1.1), tol)
    } else {
        invariant_under(c, &spatial_rotation([0.3, -0.5, 0.8], 0.61), tol)
            && invariant_under(c, &spatial_rotation([-0.7, 0.2, 0.4], 1.3), tol)
    };
    match (generic, cubic) {
        (true, _) => SymmetryClass::Isotropic,
        (false, true) => SymmetryClass::Cubic,
        _ => SymmetryClass::None,
    }
}

/// Largest entrywise relative difference of two moduli sets, scaled by the
/// largest entry of either.
pub fn moduli_difference(a: &EffectiveModuli, b: &EffectiveModuli) -> f64 {
    let entries = |m: &EffectiveModuli| -> Vec<f64> { m.c.iter().chain(m.h.iter()).chain(m.g.iter()).copied().collect() };
    let (ea, eb) = (entries(a), entries(b));
    let scale = ea.iter().chain(&eb).fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = ea.iter().zip(&eb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
