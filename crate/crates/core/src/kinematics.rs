//! Beam kinematics registry.
//!
//! A kinematics model fixes the per-joint degrees of freedom and the list of
//! quadratic energy terms contributed by one bar. Models are registered by
//! name and selected at runtime from lattice definitions.

use nalgebra::{DMatrix, DVector};

use crate::beam::{self, BeamSection, Directors, StiffnessMatrix};
use crate::error::Result;

/// Per-joint degree-of-freedom layout: deflections first, then rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub deflections: usize,
    pub rotations: usize,
}

impl DofLayout {
    pub fn per_joint(&self) -> usize {
        self.deflections + self.rotations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    Axial,
    Torsion,
    Bending,
    Coupling,
}

/// One quadratic energy term `½ c g²` with
/// `g = a_dv·dv + a_dθ·dθ + a_θ̄·θ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTerm {
    pub kind: TermKind,
    pub stiffness: f64,
    pub dv: DVector<f64>,
    pub dtheta: DVector<f64>,
    pub mean_theta: DVector<f64>,
}

pub trait Kinematics: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn dimension(&self) -> usize;
    fn layout(&self) -> DofLayout;
    /// Energy terms of a bar in director form.
    fn bar_terms(&self, section: &BeamSection, length: f64, directors: &Directors) -> Vec<EnergyTerm>;
    /// Stiffness of a bar aligned with `x₁`, local order `(v⁻, θ⁻, v⁺, θ⁺)`.
    fn reference_stiffness(&self, section: &BeamSection, length: f64) -> Result<StiffnessMatrix>;
    /// Basis of infinitesimal rigid motions evaluated at point `x`, one
    /// `d_u` vector per motion.
    fn rigid_motions(&self, x: &DVector<f64>) -> Vec<DVector<f64>>;

    fn element_stiffness(
        &self,
        section: &BeamSection,
        length: f64,
        directors: &Directors,
        bar: usize,
    ) -> Result<StiffnessMatrix> {
        let reference = self.reference_stiffness(section, length)?;
        beam::transform_stiffness(&reference, directors, bar)
    }
}

fn v(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

fn term(kind: TermKind, stiffness: f64, dv: DVector<f64>, dtheta: DVector<f64>, mean_theta: DVector<f64>) -> EnergyTerm {
    EnergyTerm { kind, stiffness, dv, dtheta, mean_theta }
}

/// Pure axial springs on a line: one deflection per joint.
#[derive(Debug)]
pub struct Axial;

impl Kinematics for Axial {
    fn name(&self) -> &'static str {
        "axial"
    }
    fn dimension(&self) -> usize {
        1
    }
    fn layout(&self) -> DofLayout {
        DofLayout { deflections: 1, rotations: 0 }
    }
    fn bar_terms(&self, section: &BeamSection, length: f64, directors: &Directors) -> Vec<EnergyTerm> {
        vec![term(TermKind::Axial, section.ea / length, directors.get(0), v(&[]), v(&[]))]
    }
    fn reference_stiffness(&self, section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
        if !(length > 0.0) {
            return Err(crate::Error::NonpositiveLength(length));
        }
        let c = section.ea / length;
        Ok(StiffnessMatrix {
            matrix: DMatrix::from_row_slice(2, 2, &[c, -c, -c, c]),
            frame: beam::Frame::Reference,
        })
    }
    fn rigid_motions(&self, _x: &DVector<f64>) -> Vec<DVector<f64>> {
        vec![v(&[1.0])]
    }
}

/// Transverse deflection and rotation on a line (Euler-Bernoulli bending only).
#[derive(Debug)]
pub struct Bending;

impl Kinematics for Bending {
    fn name(&self) -> &'static str {
        "bending"
    }
    fn dimension(&self) -> usize {
        1
    }
    fn layout(&self) -> DofLayout {
        DofLayout { deflections: 1, rotations: 1 }
    }
    fn bar_terms(&self, section: &BeamSection, length: f64, directors: &Directors) -> Vec<EnergyTerm> {
        let s = directors.get(0)[0];
        let ei = section.ei3;
        vec![
            term(TermKind::Bending, ei / length, v(&[0.0]), v(&[1.0]), v(&[0.0])),
            term(TermKind::Coupling, 12.0 * ei / length, v(&[s / length]), v(&[0.0]), v(&[-1.0])),
        ]
    }
    fn reference_stiffness(&self, section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
        if !(length > 0.0) {
            return Err(crate::Error::NonpositiveLength(length));
        }
        let l = length;
        let ei = section.ei3;
        let mut s = DMatrix::zeros(4, 4);
        let g1 = v(&[0.0, -1.0, 0.0, 1.0]);
        let g2 = v(&[-1.0 / l, -0.5, 1.0 / l, -0.5]);
        s.ger(ei / l, &g1, &g1, 1.0);
        s.ger(12.0 * ei / l, &g2, &g2, 1.0);
        Ok(StiffnessMatrix { matrix: s, frame: beam::Frame::Reference })
    }
    fn rigid_motions(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        vec![v(&[1.0, 0.0]), v(&[x[0], 1.0])]
    }
}

/// In-plane frames: two deflections and one rotation per joint.
#[derive(Debug)]
pub struct Planar;

impl Kinematics for Planar {
    fn name(&self) -> &'static str {
        "planar"
    }
    fn dimension(&self) -> usize {
        2
    }
    fn layout(&self) -> DofLayout {
        DofLayout { deflections: 2, rotations: 1 }
    }
    fn bar_terms(&self, section: &BeamSection, length: f64, directors: &Directors) -> Vec<EnergyTerm> {
        let (d1, d2) = (directors.get(0), directors.get(1));
        let ei = section.ei3;
        let zero2 = DVector::zeros(2);
        vec![
            term(TermKind::Axial, section.ea / length, d1, v(&[0.0]), v(&[0.0])),
            term(TermKind::Bending, ei / length, zero2, v(&[1.0]), v(&[0.0])),
            term(TermKind::Coupling, 12.0 * ei / length, d2 / length, v(&[0.0]), v(&[-1.0])),
        ]
    }
    fn reference_stiffness(&self, section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
        beam::reference_stiffness_2d(section, length)
    }
    fn rigid_motions(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[-x[1], x[0], 1.0])]
    }
}

/// Space frames: three deflections and three rotations per joint.
#[derive(Debug)]
pub struct Spatial;

impl Kinematics for Spatial {
    fn name(&self) -> &'static str {
        "spatial"
    }
    fn dimension(&self) -> usize {
        3
    }
    fn layout(&self) -> DofLayout {
        DofLayout { deflections: 3, rotations: 3 }
    }
    fn bar_terms(&self, section: &BeamSection, length: f64, directors: &Directors) -> Vec<EnergyTerm> {
        let (d1, d2, d3) = (directors.get(0), directors.get(1), directors.get(2));
        let z = DVector::zeros(3);
        let l = length;
        vec![
            term(TermKind::Axial, section.ea / l, d1.clone(), z.clone(), z.clone()),
            term(TermKind::Torsion, section.gi1 / l, z.clone(), d1, z.clone()),
            term(TermKind::Bending, section.ei2 / l, z.clone(), d2.clone(), z.clone()),
            term(TermKind::Bending, section.ei3 / l, z.clone(), d3.clone(), z.clone()),
            term(TermKind::Coupling, 12.0 * section.ei2 / l, &d3 / l, z.clone(), d2.clone()),
            term(TermKind::Coupling, 12.0 * section.ei3 / l, &d2 / l, z, -d3),
        ]
    }
    fn reference_stiffness(&self, section: &BeamSection, length: f64) -> Result<StiffnessMatrix> {
        beam::reference_stiffness_3d(section, length)
    }
    fn rigid_motions(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let p = nalgebra::Vector3::new(x[0], x[1], x[2]);
        let mut out = Vec::with_capacity(6);
        for i in 0..3 {
            let mut t = DVector::zeros(6);
            t[i] = 1.0;
            out.push(t);
        }
        for j in 0..3 {
            let mut e = nalgebra::Vector3::zeros();
            e[j] = 1.0;
            let w = e.cross(&p);
            let mut r = DVector::zeros(6);
            r.rows_mut(0, 3).copy_from_slice(w.as_slice());
            r[3 + j] = 1.0;
            out.push(r);
        }
        out
    }
}

static AXIAL: Axial = Axial;
static BENDING: Bending = Bending;
static PLANAR: Planar = Planar;
static SPATIAL: Spatial = Spatial;

/// All registered kinematics models.
pub fn registry() -> [&'static dyn Kinematics; 4] {
    [&AXIAL, &BENDING, &PLANAR, &SPATIAL]
}

pub fn lookup(name: &str) -> Option<&'static dyn Kinematics> {
    registry().into_iter().find(|k| k.name() == name)
}

/// Default model for a lattice dimension (axial in 1D, frames otherwise).
pub fn default_for(dimension: usize) -> Option<&'static dyn Kinematics> {
    match dimension {
        1 => Some(&AXIAL),
        2 => Some(&PLANAR),
        3 => Some(&SPATIAL),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn director_energy(k: &dyn Kinematics, sec: &BeamSection, l: f64, d: &Directors, u: &[f64]) -> f64 {
        let du = k.layout().per_joint();
        let nv = k.layout().deflections;
        let nr = k.layout().rotations;
        let (m, p) = u.split_at(du);
        k.bar_terms(sec, l, d)
            .iter()
            .map(|t| {
                let mut g = 0.0;
                for i in 0..nv {
                    g += t.dv[i] * (p[i] - m[i]);
                }
                for i in 0..nr {
                    g += t.dtheta[i] * (p[nv + i] - m[nv + i]);
                    g += t.mean_theta[i] * 0.5 * (p[nv + i] + m[nv + i]);
                }
                0.5 * t.stiffness * g * g
            })
            .sum()
    }

    #[test]
    fn registry_lookup() {
        for k in registry() {
            assert_eq!(lookup(k.name()).unwrap().name(), k.name());
        }
        assert!(lookup("timoshenko").is_none());
        assert_eq!(default_for(2).unwrap().name(), "planar");
        assert!(default_for(4).is_none());
    }

    #[test]
    fn matrix_and_director_forms_agree() {
        let sec = BeamSection::spatial(1.3, 0.2, 0.05, 0.07);
        let cases: [(&dyn Kinematics, Vec<f64>); 4] = [
            (&AXIAL, vec![-1.0]),
            (&BENDING, vec![-1.0]),
            (&PLANAR, vec![0.6, -0.8]),
            (&SPATIAL, vec![0.2, -0.6, 0.77]),
        ];
        for (k, axis) in cases {
            let axis = DVector::from_vec(axis);
            let l = 0.9;
            let d = Directors::from_axis(&axis);
            let s = k.element_stiffness(&sec, l, &d, 0).unwrap();
            let n = 2 * k.layout().per_joint();
            for seed in 0..20 {
                let u: Vec<f64> = (0..n).map(|i| ((seed * 31 + i * 7) as f64 * 0.37).sin()).collect();
                let a = s.energy(&u);
                let b = director_energy(k, &sec, l, &d, &u);
                assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rigid_motions_are_energy_free() {
        let sec = BeamSection::spatial(1.0, 0.3, 0.1, 0.2);
        let cases: [(&dyn Kinematics, Vec<f64>, Vec<f64>); 4] = [
            (&AXIAL, vec![0.3], vec![1.2]),
            (&BENDING, vec![0.3], vec![-0.9]),
            (&PLANAR, vec![0.3, 1.0], vec![1.1, 0.4]),
            (&SPATIAL, vec![0.3, 1.0, -0.2], vec![0.5, 0.4, 0.9]),
        ];
        for (k, a, b) in cases {
            let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
            let dx = &b - &a;
            let d = Directors::from_axis(&dx);
            let s = k.element_stiffness(&sec, dx.norm(), &d, 0).unwrap();
            for (ra, rb) in k.rigid_motions(&a).into_iter().zip(k.rigid_motions(&b)) {
                let u: Vec<f64> = ra.iter().chain(rb.iter()).copied().collect();
                assert!(s.energy(&u).abs() < 1e-14, "{} rigid motion has energy", k.name());
            }
        }
    }
}
