//! Beam sections, reference stiffness matrices and per-bar energies.
//!
//! Local degrees of freedom of a bar are ordered `U = (v⁻, θ⁻, v⁺, θ⁺)`.
//! Two independent routes produce the same quadratic form: the matrix
//! route (`reference_stiffness_*` followed by [`transform_stiffness`]) and
//! the director route ([`bar_energy_global`]), which evaluates the energy
//! term by term from the bar directors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::TermKind;
use crate::lattice::Metamaterial;

/// Rigidities of a straight prismatic bar.
///
/// Planar and one-dimensional bending models use `ei3` (bending about the
/// out-of-plane axis); `gi1` and `ei2` only enter spatial frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamSection {
    #[serde(rename = "EA", default)]
    pub ea: f64,
    #[serde(rename = "GI1", default)]
    pub gi1: f64,
    #[serde(rename = "EI2", default)]
    pub ei2: f64,
    #[serde(rename = "EI3", default)]
    pub ei3: f64,
}

impl BeamSection {
    pub fn axial(ea: f64) -> Self {
        Self { ea, ..Self::default() }
    }

    /// In-plane section; both bending rigidities are set so the section
    /// also reads sensibly when embedded in 3D.
    pub fn planar(ea: f64, ei: f64) -> Self {
        Self { ea, gi1: 0.0, ei2: ei, ei3: ei }
    }

    pub fn spatial(ea: f64, gi1: f64, ei2: f64, ei3: f64) -> Self {
        Self { ea, gi1, ei2, ei3 }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let all = [self.ea, self.gi1, self.ei2, self.ei3];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite rigidity".into());
        }
        if all.iter().any(|&v| v < 0.0) {
            return Err("negative rigidity".into());
        }
        if all.iter().all(|&v| v == 0.0) {
            return Err("all rigidities are zero".into());
        }
        Ok(())
    }
}

/// Orthonormal director frame of a bar, stored row-wise: row `i` is `d_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Directors {
    frame: DMatrix<f64>,
}

pub const ORTHONORMALITY_TOL: f64 = 1e-12;

impl Directors {
    pub fn new(frame: DMatrix<f64>) -> Result<Self> {
        let deviation = orthonormality_deviation(&frame);
        if !(deviation <= ORTHONORMALITY_TOL) {
            return Err(Error::NonOrthonormalDirectors(deviation));
        }
        if frame.nrows() == 3 && frame.determinant() < 0.0 {
            return Err(Error::NonOrthonormalDirectors(2.0));
        }
        Ok(Self { frame })
    }

    pub fn identity(dimension: usize) -> Self {
        Self { frame: DMatrix::identity(dimension, dimension) }
    }

    /// Default frame for an axis: `d2 = d1^⊥` in 2D, `d2 ∝ d1 × e3` in 3D
    /// (falling back to `e1` when the axis is parallel to `e3`).
    pub fn from_axis(axis: &DVector<f64>) -> Self {
        let n = axis.len();
        let d1 = axis.normalize();
        let frame = match n {
            1 => DMatrix::from_element(1, 1, d1[0].signum()),
            2 => DMatrix::from_row_slice(2, 2, &[d1[0], d1[1], -d1[1], d1[0]]),
            3 => {
                let d1v = nalgebra::Vector3::new(d1[0], d1[1], d1[2]);
                let mut d2 = d1v.cross(&nalgebra::Vector3::z());
                if d2.norm() < 1e-8 {
                    d2 = d1v.cross(&nalgebra::Vector3::x());
                }
                let d2 = d2.normalize();
                let d3 = d1v.cross(&d2);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[d1v.x, d1v.y, d1v.z, d2.x, d2.y, d2.z, d3.x, d3.y, d3.z],
                )
            }
            _ => panic!("dimension {n} not supported"),
        };
        Self { frame }
    }

    /// Frame with a user-supplied second director; the third follows as `d1 × d2`.
    pub fn with_second(axis: &DVector<f64>, d2: &DVector<f64>) -> Result<Self> {
        let d1 = axis.normalize();
        let n = d1.len();
        if d2.len() != n || n < 2 {
            return Err(Error::NonOrthonormalDirectors(f64::INFINITY));
        }
        let frame = if n == 2 {
            DMatrix::from_row_slice(2, 2, &[d1[0], d1[1], d2[0], d2[1]])
        } else {
            let a = nalgebra::Vector3::new(d1[0], d1[1], d1[2]);
            let b = nalgebra::Vector3::new(d2[0], d2[1], d2[2]);
            let c = a.cross(&b);
            DMatrix::from_row_slice(3, 3, &[a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z])
        };
        let out = Self::new(frame)?;
        if n == 2 && out.frame.determinant() < 0.0 {
            return Err(Error::NonOrthonormalDirectors(2.0));
        }
        Ok(out)
    }

    pub fn dimension(&self) -> usize {
        self.frame.nrows()
    }

    pub fn get(&self, i: usize) -> DVector<f64> {
        self.frame.row(i).transpose()
    }

    /// Rotation taking global components to director components.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.frame
    }
}

/// Largest entry of `|F Fᵀ − I|`.
pub fn orthonormality_deviation(frame: &DMatrix<f64>) -> f64 {
    if !frame.is_square() {
        return f64::INFINITY;
    }
    let gram = frame * frame.transpose();
    let eye = DMatrix::<f64>::identity(frame.nrows(), frame.nrows());
    (gram - eye).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Reference,
    Global { bar: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix {
    pub matrix: DMatrix<f64>,
    pub frame: Frame,
}

impl StiffnessMatrix {
    pub fn energy(&self, u: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        0.5 * u.dot(&(&self.matrix * &u))
    }
}

fn add_rank_one(s: &mut DMatrix<f64>, c: f64, g: &DVector<f64>) {
    s.ger(c, g, g, 1.0);
}

fn unit(len: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(len);
    e[i] = 1.0;
    e
}

/// 6×6 reference stiffness of a planar beam lying on `[0, L]` along `x₁`.
pub fn reference_stiffness_2d(section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
    if !(length > 0.0) {
        return Err(Error::NonpositiveLength(length));
    }
    let l = length;
    let ei = section.ei3;
    let e = |i| unit(6, i);
    let mut s = DMatrix::zeros(6, 6);
    add_rank_one(&mut s, section.ea / l, &(e(3) - e(0)));
    add_rank_one(&mut s, ei / l, &(e(5) - e(2)));
    let shear = (e(4) - e(1)) / l - (e(2) + e(5)) * 0.5;
    add_rank_one(&mut s, 12.0 * ei / l, &shear);
    Ok(StiffnessMatrix { matrix: s, frame: Frame::Reference })
}

/// 12×12 reference stiffness of a spatial beam lying on `[0, L]` along `x₁`.
pub fn reference_stiffness_3d(section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
    if !(length > 0.0) {
        return Err(Error::NonpositiveLength(length));
    }
    let l = length;
    let e = |i| unit(12, i);
    let mut s = DMatrix::zeros(12, 12);
    add_rank_one(&mut s, section.ea / l, &(e(6) - e(0)));
    add_rank_one(&mut s, section.gi1 / l, &(e(9) - e(3)));
    add_rank_one(&mut s, section.ei2 / l, &(e(10) - e(4)));
    add_rank_one(&mut s, section.ei3 / l, &(e(11) - e(5)));
    // note the opposite signs of the two shear-rotation couplings
    let shear2 = (e(8) - e(2)) / l + (e(4) + e(10)) * 0.5;
    let shear3 = (e(7) - e(1)) / l - (e(5) + e(11)) * 0.5;
    add_rank_one(&mut s, 12.0 * section.ei2 / l, &shear2);
    add_rank_one(&mut s, 12.0 * section.ei3 / l, &shear3);
    Ok(StiffnessMatrix { matrix: s, frame: Frame::Reference })
}

/// `S_β = Tᵀ S_ref T`, with `T` rotating every deflection block (and, in 3D,
/// every rotation block) into the director frame.
pub fn transform_stiffness(
    reference: &StiffnessMatrix,
    directors: &Directors,
    bar: usize,
) -> Result<StiffnessMatrix> {
    let r = directors.matrix();
    let deviation = orthonormality_deviation(r);
    if !(deviation <= ORTHONORMALITY_TOL) {
        return Err(Error::NonOrthonormalDirectors(deviation));
    }
    let n = r.nrows();
    let size = reference.matrix.nrows();
    let du = size / 2;
    let rotations = du - n;
    let mut t = DMatrix::zeros(size, size);
    for joint in 0..2 {
        let base = joint * du;
        t.view_mut((base, base), (n, n)).copy_from(r);
        match rotations {
            0 => {}
            1 => t[(base + n, base + n)] = 1.0,
            3 => t.view_mut((base + n, base + n), (3, 3)).copy_from(r),
            _ => unreachable!("unsupported rotation count {rotations}"),
        }
    }
    let matrix = t.transpose() * &reference.matrix * &t;
    Ok(StiffnessMatrix { matrix, frame: Frame::Global { bar } })
}

/// Energy of one bar split along the axial/bending/coupling decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct BarEnergy {
    pub total: f64,
    pub axial: f64,
    /// Torsion plus the two flexural curvature terms.
    pub bending: f64,
    pub coupling: f64,
    /// `dv·d₁ / L`
    pub axial_strain: f64,
    /// `dθ / L`
    pub bending_strain: DVector<f64>,
}

/// Director-form energy of bar class `bar` for local dofs `u = (u⁻; u⁺)`.
pub fn bar_energy_global(mm: &Metamaterial, bar: usize, u: &[f64]) -> Result<BarEnergy> {
    let geometry = mm.bar(bar)?;
    let layout = mm.layout();
    let du = layout.per_joint();
    assert_eq!(u.len(), 2 * du, "local dof array must have length 2·d_u");
    let (nv, nr) = (layout.deflections, layout.rotations);
    let (minus, plus) = u.split_at(du);
    let dv = DVector::from_iterator(nv, (0..nv).map(|i| plus[i] - minus[i]));
    let dtheta = DVector::from_iterator(nr, (0..nr).map(|i| plus[nv + i] - minus[nv + i]));
    let mean = DVector::from_iterator(nr, (0..nr).map(|i| 0.5 * (plus[nv + i] + minus[nv + i])));

    let mut out = BarEnergy {
        total: 0.0,
        axial: 0.0,
        bending: 0.0,
        coupling: 0.0,
        axial_strain: 0.0,
        bending_strain: &dtheta / geometry.length,
    };
    for term in mm.kinematics().bar_terms(&geometry.section, geometry.length, &geometry.directors) {
        let g = term.dv.dot(&dv) + term.dtheta.dot(&dtheta) + term.mean_theta.dot(&mean);
        let e = 0.5 * term.stiffness * g * g;
        match term.kind {
            TermKind::Axial => {
                out.axial += e;
                out.axial_strain = g / geometry.length;
            }
            TermKind::Torsion | TermKind::Bending => out.bending += e,
            TermKind::Coupling => out.coupling += e,
        }
    }
    out.total = out.axial + out.bending + out.coupling;
    Ok(out)
}
