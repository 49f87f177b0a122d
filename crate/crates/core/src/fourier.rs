//! Discrete Fourier transform of lattice functions and assembly of the
//! Hermitian dynamical matrix `D(k)`.
//!
//! Amplitude convention: `û(k, α)` multiplies `e^{ik·x(l,α)}`, so joint shifts
//! live in the plane-wave phase and bar functionals use the half-phases
//! `e^{±(i/2) k·dx_β}`. The matrix satisfies `D_ij = Σ (c/V) r_i r̄_j`, where
//! `r·ζ` is the value of one energy term; the energy density is therefore
//! `½ ζᵀ D ζ̄` (see [`quadratic_form`]).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::{centered_indices, Metamaterial};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance for positive semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMatrix {
    pub k: DVector<f64>,
    pub matrix: CMatrix,
}

/// `Re(ζᵀ D ζ̄)`, the physical quadratic form of a dynamical matrix.
pub fn quadratic_form(d: &CMatrix, zeta: &CVector) -> f64 {
    let conj = zeta.map(|z| z.conj());
    (zeta.transpose() * d * conj)[(0, 0)].re
}

/// Row functionals of one bar acting on the stacked amplitudes `û(k)`.
/// Each entry is a complex vector `r` with `r·û` the value of the functional.
#[derive(Debug, Clone)]
pub struct BarFunctionals {
    pub dv: Vec<CVector>,
    pub dtheta: Vec<CVector>,
    pub mean_theta: Vec<CVector>,
}

pub fn bar_difference_functionals(mm: &Metamaterial, beta: usize, k: &DVector<f64>) -> Result<BarFunctionals> {
    let bar = mm.bar(beta)?;
    let layout = mm.layout();
    let du = layout.per_joint();
    let size = mm.dofs_per_cell();
    let phi = 0.5 * k.dot(&bar.span);
    let plus = Complex64::from_polar(1.0, phi);
    let minus = Complex64::from_polar(1.0, -phi);
    let (bp, bm) = (bar.end.joint * du, bar.begin.joint * du);
    let row = |c_plus: Complex64, c_minus: Complex64, comp: usize| {
        let mut r = CVector::zeros(size);
        r[bp + comp] += c_plus;
        r[bm + comp] += c_minus;
        r
    };
    let nv = layout.deflections;
    Ok(BarFunctionals {
        dv: (0..nv).map(|i| row(plus, -minus, i)).collect(),
        dtheta: (0..layout.rotations).map(|i| row(plus, -minus, nv + i)).collect(),
        mean_theta: (0..layout.rotations).map(|i| row(0.5 * plus, 0.5 * minus, nv + i)).collect(),
    })
}

fn combine(acc: &mut CVector, coeffs: &DVector<f64>, rows: &[CVector]) {
    for (c, r) in coeffs.iter().zip(rows) {
        if *c != 0.0 {
            acc.axpy(Complex64::from(*c), r, Complex64::from(1.0));
        }
    }
}

/// `D(k)`, ordered joint class major, then deflections, then rotations.
pub fn assemble_dynamical_matrix(mm: &Metamaterial, k: &DVector<f64>) -> Result<DynamicalMatrix> {
    if k.len() != mm.dimension() {
        return Err(Error::InvalidParameter(format!(
            "wavevector has {} components, lattice dimension is {}",
            k.len(),
            mm.dimension()
        )));
    }
    let size = mm.dofs_per_cell();
    let v = mm.volume();
    let mut d = CMatrix::zeros(size, size);
    for (beta, bar) in mm.bars().iter().enumerate() {
        let f = bar_difference_functionals(mm, beta, k)?;
        for term in mm.kinematics().bar_terms(&bar.section, bar.length, &bar.directors) {
            if term.stiffness == 0.0 {
                continue;
            }
            let mut r = CVector::zeros(size);
            combine(&mut r, &term.dv, &f.dv);
            combine(&mut r, &term.dtheta, &f.dtheta);
            combine(&mut r, &term.mean_theta, &f.mean_theta);
            let rc = r.map(|z| z.conj());
            d.ger(Complex64::from(term.stiffness / v), &r, &rc, Complex64::from(1.0));
        }
    }
    Ok(DynamicalMatrix { k: k.clone(), matrix: d })
}

/// Diagonal of `S_ε`: 1 on deflections, `ε` on rotations.
pub fn rotation_scaling(mm: &Metamaterial, eps: f64) -> DVector<f64> {
    let layout = mm.layout();
    let du = layout.per_joint();
    DVector::from_fn(mm.dofs_per_cell(), |i, _| if i % du < layout.deflections { 1.0 } else { eps })
}

/// `D_ε(k) = ε⁻² S_ε D(εk) S_ε`, requiring `εk` inside the dual cell.
pub fn scaled_dynamical_matrix(mm: &Metamaterial, k: &DVector<f64>, eps: f64) -> Result<DynamicalMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {eps}")));
    }
    let c = mm.basis().dual_coordinates(&(k * eps));
    if c.iter().any(|v| v.abs() > 0.5 + 1e-12) {
        return Err(Error::WavevectorOutsideBZ(k.iter().copied().collect()));
    }
    scaled_dynamical_matrix_unchecked(mm, k, eps)
}

/// Same formula without range checks; negative `ε` is allowed, which gives
/// `D_{-ε} = J D̄_ε J` with `J` flipping the rotation signs.
pub fn scaled_dynamical_matrix_unchecked(mm: &Metamaterial, k: &DVector<f64>, eps: f64) -> Result<DynamicalMatrix> {
    let base = assemble_dynamical_matrix(mm, &(k * eps))?;
    let s = rotation_scaling(mm, eps);
    let inv = 1.0 / (eps * eps);
    let m = DMatrix::from_fn(base.matrix.nrows(), base.matrix.ncols(), |i, j| base.matrix[(i, j)] * (s[i] * s[j] * inv));
    Ok(DynamicalMatrix { k: k.clone(), matrix: m })
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Ascending eigenvalues of `D(k)` for each wavevector, evaluated in parallel.
pub fn dispersion(mm: &Metamaterial, path: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
    path.par_iter()
        .map(|k| assemble_dynamical_matrix(mm, k).map(|d| hermitian_eigenvalues(&d.matrix)))
        .collect()
}

/// Real lattice function on a torus with `P_j` cells per axis; values are
/// stored cell-major (last axis fastest), then joint class, then component.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    pub periods: Vec<usize>,
    pub joints: usize,
    pub components: usize,
    pub values: Vec<f64>,
}

/// Fourier coefficients on the centered dual grid, in the same order as
/// [`crate::lattice::brillouin_zone_sampler`] with `resolution = periods`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub periods: Vec<usize>,
    pub joints: usize,
    pub components: usize,
    pub values: Vec<Complex64>,
}

impl LatticeFunction {
    pub fn zeros(periods: &[usize], joints: usize, components: usize) -> Self {
        let cells: usize = periods.iter().product();
        Self { periods: periods.to_vec(), joints, components, values: vec![0.0; cells * joints * components] }
    }

    pub fn cells(&self) -> usize {
        self.periods.iter().product()
    }

    pub fn index(&self, cell: usize, alpha: usize, comp: usize) -> usize {
        (cell * self.joints + alpha) * self.components + comp
    }

    pub fn value(&self, cell: usize, alpha: usize) -> &[f64] {
        let s = self.index(cell, alpha, 0);
        &self.values[s..s + self.components]
    }
}

impl Spectrum {
    pub fn modes(&self) -> usize {
        self.periods.iter().product()
    }

    pub fn amplitude(&self, mode: usize, alpha: usize) -> &[Complex64] {
        let s = (mode * self.joints + alpha) * self.components;
        &self.values[s..s + self.components]
    }

    /// Stacked amplitude vector `û(k)` of one mode.
    pub fn stacked(&self, mode: usize) -> CVector {
        let w = self.joints * self.components;
        CVector::from_column_slice(&self.values[mode * w..(mode + 1) * w])
    }
}

/// Integer cell coordinates of a flat cell index (last axis fastest).
pub fn cell_coordinates(periods: &[usize], mut flat: usize) -> Vec<i64> {
    let mut l = vec![0i64; periods.len()];
    for j in (0..periods.len()).rev() {
        l[j] = (flat % periods[j]) as i64;
        flat /= periods[j];
    }
    l
}

pub fn cell_flat_index(periods: &[usize], l: &[i64]) -> usize {
    l.iter().zip(periods).fold(0, |acc, (&v, &p)| acc * p + v.rem_euclid(p as i64) as usize)
}

/// Centered dual indices `m` of each mode, in spectrum order.
pub fn mode_indices(periods: &[usize]) -> Vec<Vec<i64>> {
    let axes: Vec<Vec<i64>> = periods.iter().map(|&p| centered_indices(p).collect()).collect();
    let total: usize = periods.iter().product();
    (0..total)
        .map(|flat| {
            let pos = cell_coordinates(periods, flat);
            pos.iter().enumerate().map(|(j, &q)| axes[j][q as usize]).collect()
        })
        .collect()
}

/// Wavevectors `k = Σ (m_j / P_j) g_j` of each mode.
pub fn mode_wavevectors(mm: &Metamaterial, periods: &[usize]) -> Vec<DVector<f64>> {
    mode_indices(periods)
        .iter()
        .map(|m| {
            let c: Vec<f64> = m.iter().zip(periods).map(|(&a, &p)| a as f64 / p as f64).collect();
            mm.basis().from_dual_coordinates(&c)
        })
        .collect()
}

/// In-place n-dimensional FFT over a row-major array of the given shape.
fn fft_nd(buf: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for axis in (0..shape.len()).rev() {
        let p = shape[axis];
        let fft = if inverse { planner.plan_fft_inverse(p) } else { planner.plan_fft_forward(p) };
        let mut line = vec![Complex64::default(); p];
        let outer = total / (p * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * p * stride + s;
                for i in 0..p {
                    line[i] = buf[base + i * stride];
                }
                fft.process(&mut line);
                for i in 0..p {
                    buf[base + i * stride] = line[i];
                }
            }
        }
        stride *= p;
    }
}

/// Maps a centered mode position to its FFT storage index.
fn fft_position(periods: &[usize], m: &[i64]) -> usize {
    cell_flat_index(periods, m)
}

/// `û(k, α) = V Σ_l u(l, α) e^{−ik·x(l,α)}`
pub fn dft_forward(mm: &Metamaterial, f: &LatticeFunction) -> Result<Spectrum> {
    check_shape(mm, &f.periods, f.joints, f.components)?;
    let periods = &f.periods;
    let cells = f.cells();
    let mut out = vec![Complex64::default(); f.values.len()];
    let modes = mode_indices(periods);
    let ks = mode_wavevectors(mm, periods);
    let mut buf = vec![Complex64::default(); cells];
    for alpha in 0..f.joints {
        let b = mm.shift(alpha)?;
        for comp in 0..f.components {
            for (cell, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::from(f.values[f.index(cell, alpha, comp)]);
            }
            fft_nd(&mut buf, periods, false);
            for (mode, m) in modes.iter().enumerate() {
                let phase = Complex64::from_polar(mm.volume(), -ks[mode].dot(b));
                out[(mode * f.joints + alpha) * f.components + comp] = buf[fft_position(periods, m)] * phase;
            }
        }
    }
    Ok(Spectrum { periods: periods.clone(), joints: f.joints, components: f.components, values: out })
}

/// `u(l, α) = (1 / (V Πp)) Σ_k û(k, α) e^{ik·x(l,α)}`; the imaginary part is
/// discarded (it vanishes for spectra of real functions).
pub fn dft_inverse(mm: &Metamaterial, s: &Spectrum) -> Result<LatticeFunction> {
    check_shape(mm, &s.periods, s.joints, s.components)?;
    let periods = &s.periods;
    let cells: usize = periods.iter().product();
    let modes = mode_indices(periods);
    let ks = mode_wavevectors(mm, periods);
    let mut out = LatticeFunction::zeros(periods, s.joints, s.components);
    let norm = 1.0 / (mm.volume() * cells as f64);
    let mut buf = vec![Complex64::default(); cells];
    for alpha in 0..s.joints {
        let b = mm.shift(alpha)?;
        for comp in 0..s.components {
            for (mode, m) in modes.iter().enumerate() {
                let phase = Complex64::from_polar(norm, ks[mode].dot(b));
                buf[fft_position(periods, m)] = s.values[(mode * s.joints + alpha) * s.components + comp] * phase;
            }
            fft_nd(&mut buf, periods, true);
            for (cell, z) in buf.iter().enumerate() {
                let idx = out.index(cell, alpha, comp);
                out.values[idx] = z.re;
            }
        }
    }
    Ok(out)
}

fn check_shape(mm: &Metamaterial, periods: &[usize], joints: usize, components: usize) -> Result<()> {
    if periods.len() != mm.dimension() || periods.contains(&0) || joints != mm.joint_count() {
        return Err(Error::InvalidParameter(format!(
            "torus shape {periods:?} with {joints} joint classes does not fit the lattice"
        )));
    }
    if components == 0 {
        return Err(Error::InvalidParameter("lattice function needs at least one component".into()));
    }
    Ok(())
}

/// Both sides of the discrete Parseval identity
/// `V Σ_l f·g = (1 / (V Πp)) Σ_k f̂·ĝ*`.
pub fn parseval_sides(mm: &Metamaterial, f: &LatticeFunction, g: &LatticeFunction) -> Result<(f64, f64)> {
    let lhs = mm.volume() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>();
    let (fh, gh) = (dft_forward(mm, f)?, dft_forward(mm, g)?);
    let cells = f.cells() as f64;
    let rhs: Complex64 = fh.values.iter().zip(&gh.values).map(|(a, b)| a * b.conj()).sum();
    Ok((lhs, rhs.re / (mm.volume() * cells)))
}

/// Torus energy `(1 / (V Πp)) Σ_k ½ ûᵀ D(k) ū`.
pub fn spectral_energy(mm: &Metamaterial, u: &LatticeFunction) -> Result<f64> {
    let spec = dft_forward(mm, u)?;
    let ks = mode_wavevectors(mm, &u.periods);
    let total: f64 = ks
        .par_iter()
        .enumerate()
        .map(|(mode, k)| {
            let d = assemble_dynamical_matrix(mm, k)?;
            Ok(0.5 * quadratic_form(&d.matrix, &spec.stacked(mode)))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / (mm.volume() * u.cells() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::BeamSection;
    use crate::lattice::{validate, BarSpec, JointRef, MetamaterialSpec};
    use approx::assert_relative_eq;

    fn chain(ea: f64, l: f64) -> Metamaterial {
        validate(&MetamaterialSpec {
            dimension: 1,
            kinematics: None,
            basis: vec![vec![l]],
            joints: vec![vec![0.0]],
            bars: vec![BarSpec {
                begin: JointRef::new(0, &[0]),
                end: JointRef::new(0, &[1]),
                section: BeamSection::axial(ea),
                directors: None,
                span: None,
            }],
        })
        .unwrap()
    }

    #[test]
    fn functionals_at_zero_wavevector() {
        let mm = chain(1.0, 1.0);
        let f = bar_difference_functionals(&mm, 0, &DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(f.dv[0][0], Complex64::new(0.0, 0.0));
        assert!(f.dtheta.is_empty());
    }

    #[test]
    fn chain_closed_form() {
        let (ea, l) = (2.5, 0.7);
        let mm = chain(ea, l);
        for k in [-3.0, 0.4, 1.9] {
            let d = assemble_dynamical_matrix(&mm, &DVector::from_vec(vec![k])).unwrap();
            let expect = 4.0 * ea / (l * l) * (k * l / 2.0).sin().powi(2);
            assert_relative_eq!(d.matrix[(0, 0)].re, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaled_chain_and_bz_check() {
        let mm = chain(1.0, 1.0);
        let k = DVector::from_vec(vec![2.0]);
        let d = scaled_dynamical_matrix(&mm, &k, 0.25).unwrap();
        assert_relative_eq!(d.matrix[(0, 0)].re, 16.0 * 4.0 * (0.25f64).sin().powi(2), max_relative = 1e-12);
        assert!(matches!(scaled_dynamical_matrix(&mm, &k, 2.0), Err(Error::WavevectorOutsideBZ(_))));
        let one = scaled_dynamical_matrix(&mm, &k, 1.0).unwrap();
        assert_eq!(one.matrix, assemble_dynamical_matrix(&mm, &k).unwrap().matrix);
    }

    #[test]
    fn dft_round_trip_and_constant() {
        let mm = chain(1.0, 1.3);
        let mut f = LatticeFunction::zeros(&[5], 1, 1);
        f.values.iter_mut().for_each(|v| *v = 2.0);
        let s = dft_forward(&mm, &f).unwrap();
        let origin = mode_indices(&[5]).iter().position(|m| m[0] == 0).unwrap();
        for mode in 0..5 {
            let a = s.amplitude(mode, 0)[0].norm();
            if mode == origin {
                assert_relative_eq!(a, 2.0 * 5.0 * 1.3, max_relative = 1e-14);
            } else {
                assert!(a < 1e-12);
            }
        }
        let mut g = LatticeFunction::zeros(&[6], 1, 1);
        for (i, v) in g.values.iter_mut().enumerate() {
            *v = (i as f64 * 1.7).cos();
        }
        let back = dft_inverse(&mm, &dft_forward(&mm, &g).unwrap()).unwrap();
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_energy_matches_direct_sum() {
        let (ea, l) = (1.5, 0.8);
        let mm = chain(ea, l);
        let p = 7;
        let mut u = LatticeFunction::zeros(&[p], 1, 1);
        for (i, v) in u.values.iter_mut().enumerate() {
            *v = (i as f64 * 0.9 + 0.3).sin() + 0.1 * i as f64 * i as f64;
        }
        let direct: f64 = (0..p).map(|i| 0.5 * ea / l * (u.values[(i + 1) % p] - u.values[i]).powi(2)).sum();
        assert_relative_eq!(spectral_energy(&mm, &u).unwrap(), direct, max_relative = 1e-12);
    }
}
