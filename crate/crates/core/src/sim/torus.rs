//! Periodic metastructures: `P_j` cells per axis at scale `ε`, solved per
//! Fourier mode or by direct sparse assembly.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::beam::{bar_energy_global, BarEnergy};
use crate::error::{Error, Result};
use crate::fourier::{
    assemble_dynamical_matrix, cell_coordinates, cell_flat_index, dft_forward, dft_inverse, mode_indices,
    mode_wavevectors, quadratic_form, rotation_scaling, scaled_dynamical_matrix_unchecked, CMatrix, CVector,
    LatticeFunction, Spectrum,
};
use crate::lattice::Metamaterial;
use crate::limit::{continuum_dynamical_matrix, hermitian_inverse, localization_operator, LimitConfig};
use crate::sim::load::LoadField;
use crate::sim::sparse;

/// Eigenvalues below this fraction of the largest one count as zero modes.
pub const MODE_SINGULAR_TOL: f64 = 1e-12;
/// Relative size of the mean force accepted as balanced.
pub const BALANCE_TOL: f64 = 1e-10;

/// Torus of `Π P_j` cells. Joint positions are `ε x(l, α)`, so with
/// `ε = 1/P` the torus always covers one macroscopic period cell.
#[derive(Debug)]
pub struct TorusMetastructure {
    mm: Metamaterial,
    periods: Vec<usize>,
    eps: f64,
    modes: OnceLock<Vec<CMatrix>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusSolution {
    pub displacement: LatticeFunction,
    /// `m = −½ ⟨f, u⟩`
    pub energy: f64,
}

impl TorusMetastructure {
    pub fn new(mm: &Metamaterial, periods: &[usize], eps: f64) -> Result<Self> {
        if periods.len() != mm.dimension() || periods.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "torus periods {periods:?} do not fit a {}-dimensional lattice",
                mm.dimension()
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {eps}")));
        }
        Ok(Self { mm: mm.clone(), periods: periods.to_vec(), eps, modes: OnceLock::new() })
    }

    /// `P` cells per axis at `ε = 1/P`.
    pub fn scaled(mm: &Metamaterial, p: usize) -> Result<Self> {
        Self::new(mm, &vec![p; mm.dimension()], 1.0 / p as f64)
    }

    pub fn metamaterial(&self) -> &Metamaterial {
        &self.mm
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cells(&self) -> usize {
        self.periods.iter().product()
    }

    pub fn joint_count(&self) -> usize {
        self.cells() * self.mm.joint_count()
    }

    pub fn bar_count(&self) -> usize {
        self.cells() * self.mm.bar_count()
    }

    /// Torus length along `a_j` in units of `a_j`.
    pub fn extent(&self) -> Vec<f64> {
        self.periods.iter().map(|&p| self.eps * p as f64).collect()
    }

    /// Volume of the torus domain.
    pub fn domain_volume(&self) -> f64 {
        self.extent().iter().product::<f64>() * self.mm.volume()
    }

    /// Volume carried by one joint, `ε^n V / N`.
    pub fn joint_weight(&self) -> f64 {
        self.eps.powi(self.mm.dimension() as i32) * self.mm.volume() / self.mm.joint_count() as f64
    }

    pub fn joint_position(&self, cell: usize, alpha: usize) -> Result<DVector<f64>> {
        let l = cell_coordinates(&self.periods, cell);
        Ok(self.mm.joint_position(&l, alpha)? * self.eps)
    }

    /// Joint forces `(ε^n V/N) f_0(ε x(l, α))`.
    pub fn apply_loads(&self, load: &LoadField) -> Result<LatticeFunction> {
        let du = self.mm.dofs_per_joint();
        let n = self.mm.joint_count();
        let mut f = LatticeFunction::zeros(&self.periods, n, du);
        if load.is_empty() {
            return Ok(f);
        }
        if load.modes()[0].amplitude.len() != du {
            return Err(Error::InvalidParameter(format!("load has {} components, lattice has {du}", load.modes()[0].amplitude.len())));
        }
        let extent = self.extent();
        let w = self.joint_weight();
        for cell in 0..self.cells() {
            for alpha in 0..n {
                let x = self.joint_position(cell, alpha)?;
                let value = load.evaluate(self.mm.basis(), &extent, &x);
                for c in 0..du {
                    let idx = f.index(cell, alpha, c);
                    f.values[idx] = w * value[c];
                }
            }
        }
        self.check_balance(&f)?;
        Ok(f)
    }

    /// Rejects forces with a net translation component.
    pub fn check_balance(&self, f: &LatticeFunction) -> Result<()> {
        let nv = self.mm.layout().deflections;
        let du = self.mm.dofs_per_joint();
        let mut net = vec![0.0; nv];
        let mut scale = 0.0;
        for (i, v) in f.values.iter().enumerate() {
            if i % du < nv {
                net[i % du] += v;
                scale += v.abs();
            }
        }
        let size = net.iter().map(|v| v * v).sum::<f64>().sqrt();
        if size > BALANCE_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::UnbalancedLoad(size / scale));
        }
        Ok(())
    }

    /// `K̂(κ) = ε^{n−2} S D(κ) S` for every torus mode, assembled once.
    pub fn mode_matrices(&self) -> Result<&[CMatrix]> {
        if let Some(m) = self.modes.get() {
            return Ok(m);
        }
        let ks = mode_wavevectors(&self.mm, &self.periods);
        let s = rotation_scaling(&self.mm, self.eps);
        let scale = self.eps.powi(self.mm.dimension() as i32 - 2);
        let built = ks
            .par_iter()
            .map(|k| {
                let d = assemble_dynamical_matrix(&self.mm, k)?.matrix;
                Ok(DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * (s[i] * s[j] * scale)))
            })
            .collect::<Result<Vec<CMatrix>>>()?;
        Ok(self.modes.get_or_init(|| built))
    }

    /// `u ↦ ε^{n−2} E(S u)` split into axial, bending and coupling parts.
    pub fn energy_breakdown(&self, u: &LatticeFunction) -> Result<BarEnergy> {
        let du = self.mm.dofs_per_joint();
        let nv = self.mm.layout().deflections;
        let scale = self.eps.powi(self.mm.dimension() as i32 - 2);
        let mut total = BarEnergy {
            total: 0.0,
            axial: 0.0,
            bending: 0.0,
            coupling: 0.0,
            axial_strain: 0.0,
            bending_strain: DVector::zeros(0),
        };
        let mut local = vec![0.0; 2 * du];
        for cell in 0..self.cells() {
            let m = cell_coordinates(&self.periods, cell);
            for (beta, bar) in self.mm.bars().iter().enumerate() {
                for (slot, end) in [&bar.begin, &bar.end].into_iter().enumerate() {
                    let l: Vec<i64> = m.iter().zip(&end.offset).map(|(a, b)| a + b).collect();
                    let c = cell_flat_index(&self.periods, &l);
                    for i in 0..du {
                        let s = if i < nv { 1.0 } else { self.eps };
                        local[slot * du + i] = s * u.value(c, end.joint)[i];
                    }
                }
                let e = bar_energy_global(&self.mm, beta, &local)?;
                total.total += scale * e.total;
                total.axial += scale * e.axial;
                total.bending += scale * e.bending;
                total.coupling += scale * e.coupling;
            }
        }
        Ok(total)
    }

    /// Real-space stiffness `K_ε` of the whole torus (joint index `cell·N + α`).
    pub fn sparse_stiffness(&self) -> Result<nalgebra_sparse::CscMatrix<f64>> {
        let n = self.mm.joint_count();
        let mut conn = Vec::with_capacity(self.bar_count());
        for cell in 0..self.cells() {
            let m = cell_coordinates(&self.periods, cell);
            for (beta, bar) in self.mm.bars().iter().enumerate() {
                let joint = |end: &crate::lattice::JointRef| {
                    let l: Vec<i64> = m.iter().zip(&end.offset).map(|(a, b)| a + b).collect();
                    cell_flat_index(&self.periods, &l) * n + end.joint
                };
                conn.push((joint(&bar.begin), joint(&bar.end), beta));
            }
        }
        sparse::assemble(&self.mm, self.eps, self.joint_count(), conn.into_iter())
    }

    /// Closed-form minimum energy of a mode load,
    /// `−|Ω| Σ Re((Lq)ᵀ D_ε(k)⁻¹ (L̄q̄))`.
    pub fn mode_sum_energy(&self, load: &LoadField) -> Result<f64> {
        let l = localization_operator(&self.mm).map(Complex64::from);
        let extent = self.extent();
        let mut total = 0.0;
        for mode in load.modes() {
            let k = LoadField::wavevector(self.mm.basis(), mode, &extent);
            let d = scaled_dynamical_matrix_unchecked(&self.mm, &k, self.eps)?;
            let inv = hermitian_inverse(&d.matrix, MODE_SINGULAR_TOL).ok_or_else(|| Error::SingularMode(k.iter().copied().collect()))?;
            total += quadratic_form(&inv, &(&l * LoadField::amplitude(mode)));
        }
        Ok(-self.domain_volume() * total)
    }

    pub fn energy_of(&self, forces: &LatticeFunction, u: &LatticeFunction) -> f64 {
        -0.5 * forces.values.iter().zip(&u.values).map(|(f, v)| f * v).sum::<f64>()
    }
}

/// Continuum minimum energy `−|Ω| Σ Re(qᵀ D_0(k)⁻¹ q̄)` of a mode load on the
/// macroscopic period cell.
pub fn continuum_min_energy(mm: &Metamaterial, load: &LoadField, cfg: &LimitConfig) -> Result<f64> {
    continuum_min_energy_with(mm, load, &vec![1.0; mm.dimension()], |k| {
        Ok(continuum_dynamical_matrix(mm, k, cfg)?.matrix)
    })
}

/// Same mode sum with `D_0(k)` supplied by fitted or closed-form moduli.
pub fn continuum_min_energy_from_moduli(
    mm: &Metamaterial,
    moduli: &crate::moduli::EffectiveModuli,
    load: &LoadField,
) -> Result<f64> {
    continuum_min_energy_with(mm, load, &vec![1.0; mm.dimension()], |k| {
        Ok(crate::moduli::continuum_matrix_from_moduli(moduli, k))
    })
}

fn continuum_min_energy_with(
    mm: &Metamaterial,
    load: &LoadField,
    extent: &[f64],
    d0: impl Fn(&DVector<f64>) -> Result<CMatrix>,
) -> Result<f64> {
    let volume = extent.iter().product::<f64>() * mm.volume();
    let mut total = 0.0;
    for mode in load.modes() {
        let k = LoadField::wavevector(mm.basis(), mode, extent);
        let d = d0(&k)?;
        let inv = hermitian_inverse(&d, MODE_SINGULAR_TOL).ok_or_else(|| Error::SingularLimit {
            k: k.iter().copied().collect(),
            reason: "D_0(k) is singular".into(),
        })?;
        total += quadratic_form(&inv, &LoadField::amplitude(mode));
    }
    Ok(-volume * total)
}

/// Strategy for solving torus equilibrium.
pub trait TorusSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, torus: &TorusMetastructure, forces: &LatticeFunction) -> Result<TorusSolution>;
}

/// Exact per-mode solve `K̂(κ)ᵀ û = f̂ / V` followed by the inverse DFT.
/// The mean translation is fixed to zero.
#[derive(Debug, Default)]
pub struct FourierSolver;

/// Direct sparse Cholesky solve of `K_ε u = f` with one joint's
/// translations pinned, then shifted to zero mean translation.
#[derive(Debug, Default)]
pub struct SparseSolver;

fn check_forces(torus: &TorusMetastructure, forces: &LatticeFunction) -> Result<()> {
    let mm = torus.metamaterial();
    if forces.periods != torus.periods || forces.joints != mm.joint_count() || forces.components != mm.dofs_per_joint() {
        return Err(Error::InvalidParameter("force array does not match the torus".into()));
    }
    torus.check_balance(forces)
}

/// `rhs = Σ f`; `scale = Σ |f|` sets the balance threshold.
fn solve_zero_mode(torus: &TorusMetastructure, k: &CMatrix, rhs: &CVector, scale: f64) -> Result<CVector> {
    let nv = torus.metamaterial().layout().deflections;
    let eig = k.map(|z| z.conj()).symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = CVector::zeros(rhs.len());
    let mut dropped = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let q = eig.eigenvectors.column(i);
        let c = q.adjoint() * rhs;
        if lambda <= MODE_SINGULAR_TOL * max {
            dropped += 1;
            if c[(0, 0)].norm() > BALANCE_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::UnbalancedLoad(c[(0, 0)].norm() / scale));
            }
            continue;
        }
        out += q * (c[(0, 0)] / lambda);
    }
    if dropped > nv {
        return Err(Error::SingularMode(vec![0.0; torus.metamaterial().dimension()]));
    }
    Ok(out)
}

impl TorusSolver for FourierSolver {
    fn name(&self) -> &'static str {
        "fourier"
    }

    fn solve(&self, torus: &TorusMetastructure, forces: &LatticeFunction) -> Result<TorusSolution> {
        check_forces(torus, forces)?;
        let mm = torus.metamaterial();
        let spec = dft_forward(mm, forces)?;
        let mats = torus.mode_matrices()?;
        let ks = mode_wavevectors(mm, torus.periods());
        let indices = mode_indices(torus.periods());
        let inv_v = Complex64::from(1.0 / mm.volume());
        let scale = forces.values.iter().map(|v| v.abs()).sum::<f64>();
        let amplitudes = (0..spec.modes())
            .into_par_iter()
            .map(|mode| {
                let rhs = spec.stacked(mode) * inv_v;
                if indices[mode].iter().all(|&m| m == 0) {
                    return solve_zero_mode(torus, &mats[mode], &rhs, scale);
                }
                // K̂ᵀ = conj(K̂) is Hermitian
                let kt = mats[mode].map(|z| z.conj());
                let inv = hermitian_inverse(&kt, MODE_SINGULAR_TOL)
                    .ok_or_else(|| Error::SingularMode(ks[mode].iter().copied().collect()))?;
                Ok(inv * rhs)
            })
            .collect::<Result<Vec<CVector>>>()?;
        let values = amplitudes.iter().flat_map(|a| a.iter().copied()).collect();
        let u = dft_inverse(mm, &Spectrum { values, ..spec })?;
        let energy = torus.energy_of(forces, &u);
        Ok(TorusSolution { displacement: u, energy })
    }
}

impl TorusSolver for SparseSolver {
    fn name(&self) -> &'static str {
        "sparse"
    }

    fn solve(&self, torus: &TorusMetastructure, forces: &LatticeFunction) -> Result<TorusSolution> {
        check_forces(torus, forces)?;
        let mm = torus.metamaterial();
        let nv = mm.layout().deflections;
        let du = mm.dofs_per_joint();
        let k = torus.sparse_stiffness()?;
        let f = DVector::from_column_slice(&forces.values);
        let fixed: Vec<bool> = (0..f.len()).map(|i| i < nv).collect();
        let mut u = sparse::solve_fixed(&k, &f, &fixed)?;
        let joints = torus.joint_count() as f64;
        for c in 0..nv {
            let mean = (0..torus.joint_count()).map(|j| u[j * du + c]).sum::<f64>() / joints;
            for j in 0..torus.joint_count() {
                u[j * du + c] -= mean;
            }
        }
        let displacement = LatticeFunction { values: u.iter().copied().collect(), ..forces.clone() };
        let energy = torus.energy_of(forces, &displacement);
        Ok(TorusSolution { displacement, energy })
    }
}

pub fn solver_registry() -> [&'static dyn TorusSolver; 2] {
    [&FourierSolver, &SparseSolver]
}

pub fn solver(name: &str) -> Option<&'static dyn TorusSolver> {
    solver_registry().into_iter().find(|s| s.name() == name)
}

/// Loads and solves in one step.
pub fn solve_equilibrium_torus(
    torus: &TorusMetastructure,
    load: &LoadField,
    solver: &dyn TorusSolver,
) -> Result<TorusSolution> {
    let f = torus.apply_loads(load)?;
    solver.solve(torus, &f)
}
