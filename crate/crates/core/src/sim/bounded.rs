//! Finite metastructures cut from the scaled lattice by a convex domain.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lattice::Metamaterial;
use crate::sim::sparse;

/// Relative slack of the inclusion test.
pub const INCLUSION_TOL: f64 = 1e-12;
/// Relative size of a rigid-mode force component accepted as balanced.
pub const RIGID_BALANCE_TOL: f64 = 1e-10;

/// Convex domain. Half-spaces are `n·x ≤ c`; their bounding box must
/// contain the domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Convex { half_spaces: Vec<(Vec<f64>, f64)>, lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            Domain::Box { lo, hi } | Domain::Convex { lo, hi, .. } => (lo, hi),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let (lo, hi) = self.bounds();
        if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter(format!("domain box {lo:?}..{hi:?} has no interior in dimension {n}")));
        }
        if let Domain::Convex { half_spaces, .. } = self {
            if half_spaces.iter().any(|(normal, _)| normal.len() != n) {
                return Err(Error::InvalidParameter("half-space normal has the wrong dimension".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let (lo, hi) = self.bounds();
        let size = lo.iter().zip(hi).fold(0.0f64, |m, (a, b)| m.max(b - a));
        let slack = INCLUSION_TOL * size;
        let in_box = x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= a - slack && *v <= b + slack);
        match self {
            Domain::Box { .. } => in_box,
            Domain::Convex { half_spaces, .. } => {
                in_box
                    && half_spaces.iter().all(|(normal, c)| {
                        let dot: f64 = normal.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                        dot <= c + slack * norm
                    })
            }
        }
    }
}

/// Bars `(m, β)` whose scaled endpoints lie in the domain, and their joints.
#[derive(Debug, Clone)]
pub struct BoundedMetastructure {
    mm: Metamaterial,
    domain: Domain,
    eps: f64,
    bars: Vec<(Vec<i64>, usize)>,
    joints: Vec<(Vec<i64>, usize)>,
    connectivity: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintPolicy {
    /// Hold every dof of the given joint at zero.
    Pin(usize),
    /// Require a balanced load and return the solution orthogonal to the
    /// rigid motions.
    Project,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSolution {
    /// Joint-major, `d_u` components per joint.
    pub displacement: DVector<f64>,
    /// `m = −½ ⟨f, u⟩`
    pub energy: f64,
}

/// Cells overlapping the bounding box of `Ω/ε`, padded by the largest bar offset.
fn candidate_cells(mm: &Metamaterial, domain: &Domain, eps: f64) -> Vec<Vec<i64>> {
    let n = mm.dimension();
    let (lo, hi) = domain.bounds();
    let mut fmin = vec![f64::INFINITY; n];
    let mut fmax = vec![f64::NEG_INFINITY; n];
    for corner in 0..(1usize << n) {
        let x = DVector::from_fn(n, |i, _| if corner >> i & 1 == 1 { hi[i] } else { lo[i] } / eps);
        let f = mm.basis().fractional(&x);
        for i in 0..n {
            fmin[i] = fmin[i].min(f[i]);
            fmax[i] = fmax[i].max(f[i]);
        }
    }
    let pad = mm
        .bars()
        .iter()
        .flat_map(|b| b.begin.offset.iter().chain(&b.end.offset))
        .fold(0i64, |m, v| m.max(v.abs()))
        + 1;
    let ranges: Vec<(i64, i64)> =
        (0..n).map(|i| (fmin[i].floor() as i64 - pad, fmax[i].ceil() as i64 + pad)).collect();
    let mut cells = vec![vec![]];
    for &(a, b) in &ranges {
        cells = cells.into_iter().flat_map(|c: Vec<i64>| (a..=b).map(move |v| [c.clone(), vec![v]].concat())).collect();
    }
    cells
}

/// Builds the metastructure `J_{Ω/ε}`; convexity makes the endpoint test exact.
pub fn build_bounded(mm: &Metamaterial, domain: &Domain, eps: f64) -> Result<BoundedMetastructure> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {eps}")));
    }
    domain.check(mm.dimension())?;
    let mut bars = Vec::new();
    let mut joints = Vec::new();
    let mut index: HashMap<(Vec<i64>, usize), usize> = HashMap::new();
    let mut connectivity = Vec::new();
    for m in candidate_cells(mm, domain, eps) {
        for (beta, bar) in mm.bars().iter().enumerate() {
            let (xm, xp) = mm.bar_endpoints(&m, beta)?;
            if !(domain.contains(&(xm * eps)) && domain.contains(&(xp * eps))) {
                continue;
            }
            let mut joint = |end: &crate::lattice::JointRef| {
                let l: Vec<i64> = m.iter().zip(&end.offset).map(|(a, b)| a + b).collect();
                *index.entry((l.clone(), end.joint)).or_insert_with(|| {
                    joints.push((l, end.joint));
                    joints.len() - 1
                })
            };
            let (jm, jp) = (joint(&bar.begin), joint(&bar.end));
            connectivity.push((jm, jp, beta));
            bars.push((m.clone(), beta));
        }
    }
    if bars.is_empty() {
        return Err(Error::EmptyStructure);
    }
    Ok(BoundedMetastructure { mm: mm.clone(), domain: domain.clone(), eps, bars, joints, connectivity })
}

impl BoundedMetastructure {
    pub fn metamaterial(&self) -> &Metamaterial {
        &self.mm
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn bar_count(&self) -> usize {
        self.bars.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// `(m, β)` for every included bar.
    pub fn bars(&self) -> &[(Vec<i64>, usize)] {
        &self.bars
    }

    /// `(l, α)` for every joint, in dof order.
    pub fn joints(&self) -> &[(Vec<i64>, usize)] {
        &self.joints
    }

    pub fn joint_index(&self, l: &[i64], alpha: usize) -> Option<usize> {
        self.joints.iter().position(|(jl, ja)| jl == l && *ja == alpha)
    }

    /// Scaled position `ε x(l, α)` of joint `j`.
    pub fn joint_position(&self, j: usize) -> Result<DVector<f64>> {
        let (l, alpha) = &self.joints[j];
        Ok(self.mm.joint_position(l, *alpha)? * self.eps)
    }

    pub fn dofs(&self) -> usize {
        self.joints.len() * self.mm.dofs_per_joint()
    }

    /// Joint forces `(ε^n V/N) f_0(ε x)` for a load density `f_0`.
    pub fn apply_loads(&self, f0: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<DVector<f64>> {
        let du = self.mm.dofs_per_joint();
        let w = self.eps.powi(self.mm.dimension() as i32) * self.mm.volume() / self.mm.joint_count() as f64;
        let mut f = DVector::zeros(self.dofs());
        for j in 0..self.joints.len() {
            let value = f0(&self.joint_position(j)?);
            if value.len() != du {
                return Err(Error::InvalidParameter(format!("load has {} components, lattice has {du}", value.len())));
            }
            f.rows_mut(j * du, du).copy_from(&(value * w));
        }
        Ok(f)
    }

    /// Stacked rigid motions of the whole structure.
    pub fn rigid_modes(&self) -> Result<Vec<DVector<f64>>> {
        let du = self.mm.dofs_per_joint();
        let kin = self.mm.kinematics();
        let count = kin.rigid_motions(&DVector::zeros(self.mm.dimension())).len();
        let mut modes = vec![DVector::zeros(self.dofs()); count];
        for j in 0..self.joints.len() {
            for (mode, local) in modes.iter_mut().zip(kin.rigid_motions(&self.joint_position(j)?)) {
                mode.rows_mut(j * du, du).copy_from(&local);
            }
        }
        Ok(modes)
    }

    pub fn stiffness(&self) -> Result<nalgebra_sparse::CscMatrix<f64>> {
        sparse::assemble(&self.mm, self.eps, self.joints.len(), self.connectivity.iter().copied())
    }
}

fn orthonormalize(vectors: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mut v in vectors {
        for q in &out {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

/// Sparse equilibrium solve `K_ε u = f` on a bounded metastructure.
pub fn solve_equilibrium_bounded(
    s: &BoundedMetastructure,
    forces: &DVector<f64>,
    policy: ConstraintPolicy,
) -> Result<BoundedSolution> {
    if forces.len() != s.dofs() {
        return Err(Error::InvalidParameter(format!("force vector has {} entries, structure has {} dofs", forces.len(), s.dofs())));
    }
    let du = s.mm.dofs_per_joint();
    let k = s.stiffness()?;
    let (pinned, modes) = match policy {
        ConstraintPolicy::Pin(j) => {
            if j >= s.joints.len() {
                return Err(Error::IndexOutOfRange { what: "joint", index: j, count: s.joints.len() });
            }
            (j, None)
        }
        ConstraintPolicy::Project => {
            let modes = orthonormalize(s.rigid_modes()?);
            let fnorm = forces.norm();
            let worst = modes.iter().fold(0.0f64, |m, q| m.max(q.dot(forces).abs()));
            if worst > RIGID_BALANCE_TOL * fnorm.max(f64::MIN_POSITIVE) {
                return Err(Error::UnbalancedLoad(worst / fnorm));
            }
            (0, Some(modes))
        }
    };
    // pinning every dof of one joint removes all rigid motions
    let fixed: Vec<bool> = (0..s.dofs()).map(|i| i / du == pinned).collect();
    let mut u = sparse::solve_fixed(&k, forces, &fixed)?;
    if let Some(modes) = modes {
        for q in &modes {
            let c = q.dot(&u);
            u.axpy(-c, q, 1.0);
        }
    }
    let energy = -0.5 * forces.dot(&u);
    Ok(BoundedSolution { displacement: u, energy })
}
