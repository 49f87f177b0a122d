//! Periodic lattice geometry: Bravais basis, joint classes, oriented bar
//! classes and the dual description.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beam::{self, BeamSection, Directors};
use crate::error::{Error, Result, Violation, Warning};
use crate::kinematics::{self, DofLayout, Kinematics};

/// Relative tolerance on spans and reciprocal identities.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BravaisBasis {
    /// Columns are the basis vectors `a_i`.
    direct: DMatrix<f64>,
    /// Columns are the reciprocal vectors `g_j`, `a_i·g_j = 2π δ_ij`.
    reciprocal: DMatrix<f64>,
    volume: f64,
}

impl BravaisBasis {
    /// Builds a basis from its vectors (one per row).
    pub fn new(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        if n == 0 || vectors.iter().any(|a| a.len() != n) {
            return Err(Error::InvalidParameter(format!("basis must be square, got {n} vectors")));
        }
        let direct = DMatrix::from_fn(n, n, |i, j| vectors[j][i]);
        Self::from_columns(direct)
    }

    pub fn from_columns(direct: DMatrix<f64>) -> Result<Self> {
        let det = direct.determinant();
        let scale: f64 = direct.column_iter().map(|c| c.norm()).product();
        if !det.is_finite() || det.abs() <= 1e-12 * scale || scale == 0.0 {
            return Err(Error::SingularBasis(det.abs()));
        }
        let inv = direct.clone().try_inverse().ok_or(Error::SingularBasis(det.abs()))?;
        let reciprocal = inv.transpose() * (2.0 * PI);
        Ok(Self { direct, reciprocal, volume: det.abs() })
    }

    pub fn dimension(&self) -> usize {
        self.direct.nrows()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.direct.column(i).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.direct
    }

    pub fn reciprocal(&self) -> &DMatrix<f64> {
        &self.reciprocal
    }

    pub fn reciprocal_vector(&self, j: usize) -> DVector<f64> {
        self.reciprocal.column(j).into_owned()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `Σ l^i a_i`
    pub fn point(&self, l: &[i64]) -> DVector<f64> {
        let l = DVector::from_iterator(l.len(), l.iter().map(|&v| v as f64));
        &self.direct * l
    }

    /// Fractional coordinates of a point in the direct basis.
    pub fn fractional(&self, x: &DVector<f64>) -> DVector<f64> {
        self.reciprocal.transpose() * x / (2.0 * PI)
    }

    /// Dual coordinates `c_j = k·a_j / 2π`, so that `k = Σ c_j g_j`.
    pub fn dual_coordinates(&self, k: &DVector<f64>) -> DVector<f64> {
        self.direct.transpose() * k / (2.0 * PI)
    }

    pub fn from_dual_coordinates(&self, c: &[f64]) -> DVector<f64> {
        &self.reciprocal * DVector::from_column_slice(c)
    }

    /// Radius of the largest ball centred at 0 inside the dual box
    /// `{Σ c_j g_j : |c_j| ≤ 1/2}` along the reciprocal axes.
    pub fn bz_radius(&self) -> f64 {
        self.reciprocal.column_iter().map(|g| g.norm()).fold(f64::INFINITY, f64::min) / 2.0
    }
}

pub fn cell_volume(basis: &BravaisBasis) -> f64 {
    basis.volume()
}

/// Endpoint of a bar: joint class plus lattice offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointRef {
    pub joint: usize,
    #[serde(default)]
    pub offset: Vec<i64>,
}

impl JointRef {
    pub fn new(joint: usize, offset: &[i64]) -> Self {
        Self { joint, offset: offset.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectorOverride {
    pub d2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSpec {
    pub begin: JointRef,
    pub end: JointRef,
    pub section: BeamSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directors: Option<DirectorOverride>,
    /// Stored geometric span; when present it must agree with the span
    /// rebuilt from shifts and offsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Vec<f64>>,
}

/// Unvalidated lattice definition (also the JSON input schema).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetamaterialSpec {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematics: Option<String>,
    pub basis: Vec<Vec<f64>>,
    pub joints: Vec<Vec<f64>>,
    pub bars: Vec<BarSpec>,
}

impl MetamaterialSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A bar class with derived geometry.
#[derive(Debug, Clone)]
pub struct Bar {
    pub begin: JointRef,
    pub end: JointRef,
    pub section: BeamSection,
    pub span: DVector<f64>,
    pub length: f64,
    pub directors: Directors,
}

/// Validated, immutable lattice.
#[derive(Debug, Clone)]
pub struct Metamaterial {
    basis: BravaisBasis,
    kinematics: &'static dyn Kinematics,
    shifts: Vec<DVector<f64>>,
    bars: Vec<Bar>,
    warnings: Vec<Warning>,
}

fn offset_or_zero(offset: &[i64], n: usize) -> Vec<i64> {
    if offset.is_empty() {
        vec![0; n]
    } else {
        offset.to_vec()
    }
}

/// Checks every structural invariant and derives bar geometry.
///
/// Shifts are reduced to fractional coordinates in `[0, 1)`; bar offsets are
/// compensated so every span is unchanged.
pub fn validate(spec: &MetamaterialSpec) -> Result<Metamaterial> {
    let n = spec.dimension;
    let mut violations = Vec::new();
    let mismatch = |what: String, found: usize| Violation::DimensionMismatch { what, expected: n, found };

    let kin = match &spec.kinematics {
        Some(name) => kinematics::lookup(name),
        None => kinematics::default_for(n),
    };
    let kin = match kin {
        Some(k) if k.dimension() == n => Some(k),
        _ => {
            violations.push(Violation::UnsupportedKinematics {
                name: spec.kinematics.clone().unwrap_or_else(|| "default".into()),
                dimension: n,
            });
            None
        }
    };

    if spec.basis.len() != n {
        violations.push(mismatch("basis".into(), spec.basis.len()));
    }
    for (i, a) in spec.basis.iter().enumerate() {
        if a.len() != n {
            violations.push(mismatch(format!("basis vector {i}"), a.len()));
        }
    }
    if spec.joints.is_empty() {
        violations.push(Violation::DimensionMismatch { what: "joint class list".into(), expected: 1, found: 0 });
    }
    for (i, b) in spec.joints.iter().enumerate() {
        if b.len() != n {
            violations.push(mismatch(format!("shift of joint {i}"), b.len()));
        }
    }
    if spec.bars.is_empty() {
        violations.push(Violation::DimensionMismatch { what: "bar class list".into(), expected: 1, found: 0 });
    }
    for (b, bar) in spec.bars.iter().enumerate() {
        for end in [&bar.begin, &bar.end] {
            if end.joint >= spec.joints.len() {
                violations.push(Violation::UnknownJoint { bar: b, joint: end.joint });
            }
            if !end.offset.is_empty() && end.offset.len() != n {
                violations.push(mismatch(format!("offset of bar {b}"), end.offset.len()));
            }
        }
        if let Some(d) = &bar.directors {
            if d.d2.len() != n {
                violations.push(mismatch(format!("director override of bar {b}"), d.d2.len()));
            }
        }
        if let Some(s) = &bar.span {
            if s.len() != n {
                violations.push(mismatch(format!("stored span of bar {b}"), s.len()));
            }
        }
        if let Err(reason) = bar.section.check() {
            violations.push(Violation::InvalidSection { bar: b, reason });
        }
    }
    let square = spec.basis.len() == n && spec.basis.iter().all(|a| a.len() == n);
    if square {
        if let Err(Error::SingularBasis(det)) = BravaisBasis::new(&spec.basis) {
            violations.insert(0, Violation::SingularBasis { det });
        }
    }
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }

    let basis = match BravaisBasis::new(&spec.basis) {
        Ok(b) => b,
        Err(Error::SingularBasis(det)) => {
            return Err(Error::Validation(vec![Violation::SingularBasis { det }]));
        }
        Err(e) => return Err(e),
    };

    // canonical shifts and the lattice translations removed from them
    let mut shifts = Vec::with_capacity(spec.joints.len());
    let mut moved = Vec::with_capacity(spec.joints.len());
    for b in &spec.joints {
        let b = DVector::from_column_slice(b);
        let f = basis.fractional(&b);
        let t: Vec<i64> = f.iter().map(|&c| (c + GEOMETRY_TOL).floor() as i64).collect();
        shifts.push(&b - basis.point(&t));
        moved.push(t);
    }

    let kin = kin.expect("checked above");
    let mut bars = Vec::with_capacity(spec.bars.len());
    for (b, bar) in spec.bars.iter().enumerate() {
        let compensate = |end: &JointRef| {
            let o = offset_or_zero(&end.offset, n);
            JointRef { joint: end.joint, offset: o.iter().zip(&moved[end.joint]).map(|(a, t)| a + t).collect() }
        };
        let begin = compensate(&bar.begin);
        let end = compensate(&bar.end);
        let span = (&shifts[end.joint] + basis.point(&end.offset)) - (&shifts[begin.joint] + basis.point(&begin.offset));
        let length = span.norm();
        let scale = basis.matrix().column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(length > GEOMETRY_TOL * scale) {
            violations.push(Violation::ZeroLengthBar { bar: b });
            continue;
        }
        if let Some(stored) = &bar.span {
            let stored = DVector::from_column_slice(stored);
            let deviation = (&stored - &span).norm() / stored.norm().max(f64::MIN_POSITIVE);
            if !(deviation <= GEOMETRY_TOL) {
                violations.push(Violation::SpanMismatch { bar: b, deviation });
            }
        }
        let directors = match &bar.directors {
            Some(d) if n >= 2 => Directors::with_second(&span, &DVector::from_column_slice(&d.d2)),
            _ => Ok(Directors::from_axis(&span)),
        };
        let directors = match directors {
            Ok(d) => d,
            Err(Error::NonOrthonormalDirectors(deviation)) => {
                violations.push(Violation::NonOrthonormalDirectors { bar: b, deviation });
                continue;
            }
            Err(e) => return Err(e),
        };
        debug_assert!(beam::orthonormality_deviation(directors.matrix()) <= beam::ORTHONORMALITY_TOL);
        bars.push(Bar { begin, end, section: bar.section, span, length, directors });
    }
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }

    let warnings = (0..spec.joints.len())
        .filter(|&a| !bars.iter().any(|bar| bar.begin.joint == a || bar.end.joint == a))
        .map(|joint| Warning::DanglingJointClass { joint })
        .collect();

    Ok(Metamaterial { basis, kinematics: kin, shifts, bars, warnings })
}

impl Metamaterial {
    pub fn basis(&self) -> &BravaisBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn kinematics(&self) -> &'static dyn Kinematics {
        self.kinematics
    }

    pub fn layout(&self) -> DofLayout {
        self.kinematics.layout()
    }

    /// `d_u`
    pub fn dofs_per_joint(&self) -> usize {
        self.layout().per_joint()
    }

    /// `N`
    pub fn joint_count(&self) -> usize {
        self.shifts.len()
    }

    /// `M`
    pub fn bar_count(&self) -> usize {
        self.bars.len()
    }

    /// `N·d_u`
    pub fn dofs_per_cell(&self) -> usize {
        self.joint_count() * self.dofs_per_joint()
    }

    pub fn volume(&self) -> f64 {
        self.basis.volume()
    }

    pub fn shift(&self, alpha: usize) -> Result<&DVector<f64>> {
        self.shifts
            .get(alpha)
            .ok_or(Error::IndexOutOfRange { what: "joint class", index: alpha, count: self.shifts.len() })
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn bar(&self, beta: usize) -> Result<&Bar> {
        self.bars.get(beta).ok_or(Error::IndexOutOfRange { what: "bar class", index: beta, count: self.bars.len() })
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// `x(l, α) = b_α + Σ l^i a_i`
    pub fn joint_position(&self, l: &[i64], alpha: usize) -> Result<DVector<f64>> {
        Ok(self.shift(alpha)? + self.basis.point(l))
    }

    /// `(x⁻(m, β), x⁺(m, β))`
    pub fn bar_endpoints(&self, m: &[i64], beta: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let bar = self.bar(beta)?;
        let at = |end: &JointRef| {
            let l: Vec<i64> = m.iter().zip(&end.offset).map(|(a, b)| a + b).collect();
            self.joint_position(&l, end.joint)
        };
        Ok((at(&bar.begin)?, at(&bar.end)?))
    }

    /// Canonical spec equivalent to this lattice, with stored spans.
    pub fn to_spec(&self) -> MetamaterialSpec {
        let n = self.dimension();
        MetamaterialSpec {
            dimension: n,
            kinematics: Some(self.kinematics.name().to_string()),
            basis: (0..n).map(|i| self.basis.vector(i).iter().copied().collect()).collect(),
            joints: self.shifts.iter().map(|b| b.iter().copied().collect()).collect(),
            bars: self
                .bars
                .iter()
                .map(|b| BarSpec {
                    begin: b.begin.clone(),
                    end: b.end.clone(),
                    section: b.section,
                    directors: (n >= 2).then(|| DirectorOverride { d2: b.directors.get(1).iter().copied().collect() }),
                    span: Some(b.span.iter().copied().collect()),
                })
                .collect(),
        }
    }
}

/// One sample of the dual grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSample {
    /// Integer grid index `m_j` with `c_j = m_j / P_j`.
    pub index: Vec<i64>,
    pub fractional: Vec<f64>,
    pub k: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrillouinGrid {
    pub resolution: Vec<usize>,
    pub samples: Vec<DualSample>,
    /// Position of the exact `k = 0` sample in `samples`.
    pub origin: usize,
}

/// Centered grid indices `−⌊P/2⌋ … P−1−⌊P/2⌋` for one axis.
pub fn centered_indices(p: usize) -> impl Iterator<Item = i64> {
    let lo = -((p / 2) as i64);
    (0..p as i64).map(move |i| lo + i)
}

/// Regular grid over `{Σ c_j g_j : c_j ∈ [−1/2, 1/2)}`, last axis fastest.
pub fn brillouin_zone_sampler(basis: &BravaisBasis, resolution: &[usize]) -> Result<BrillouinGrid> {
    let n = basis.dimension();
    if resolution.len() != n || resolution.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "resolution must have {n} positive entries, got {resolution:?}"
        )));
    }
    let mut samples = Vec::with_capacity(resolution.iter().product());
    let mut origin = 0;
    let axes: Vec<Vec<i64>> = resolution.iter().map(|&p| centered_indices(p).collect()).collect();
    let total: usize = resolution.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut index = vec![0i64; n];
        for j in (0..n).rev() {
            index[j] = axes[j][rem % resolution[j]];
            rem /= resolution[j];
        }
        let fractional: Vec<f64> = index.iter().zip(resolution).map(|(&m, &p)| m as f64 / p as f64).collect();
        if index.iter().all(|&m| m == 0) {
            origin = samples.len();
        }
        let k = basis.from_dual_coordinates(&fractional);
        samples.push(DualSample { index, fractional, k });
    }
    Ok(BrillouinGrid { resolution: resolution.to_vec(), samples, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square_spec() -> MetamaterialSpec {
        MetamaterialSpec {
            dimension: 2,
            kinematics: None,
            basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            joints: vec![vec![0.0, 0.0]],
            bars: vec![
                BarSpec {
                    begin: JointRef::new(0, &[0, 0]),
                    end: JointRef::new(0, &[1, 0]),
                    section: BeamSection::planar(1.0, 0.1),
                    directors: None,
                    span: None,
                },
                BarSpec {
                    begin: JointRef::new(0, &[0, 0]),
                    end: JointRef::new(0, &[0, 1]),
                    section: BeamSection::planar(1.0, 0.1),
                    directors: None,
                    span: None,
                },
            ],
        }
    }

    #[test]
    fn reciprocal_identity() {
        let b = BravaisBasis::new(&[vec![1.5, -0.8], vec![1.5, 0.8]]).unwrap();
        let prod = b.matrix().transpose() * b.reciprocal();
        assert_relative_eq!(prod, DMatrix::identity(2, 2) * 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn singular_basis_rejected() {
        assert!(matches!(BravaisBasis::new(&[vec![1.0, 2.0], vec![2.0, 4.0]]), Err(Error::SingularBasis(_))));
        let mut spec = square_spec();
        spec.basis = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        let Err(Error::Validation(v)) = validate(&spec) else { panic!() };
        assert!(matches!(v[0], Violation::SingularBasis { .. }));
    }

    #[test]
    fn identity_volume() {
        let b = BravaisBasis::new(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(cell_volume(&b), 1.0);
    }

    #[test]
    fn shifts_are_canonicalized_without_moving_bars() {
        let mut spec = square_spec();
        spec.joints = vec![vec![2.25, -0.5]];
        let mm = validate(&spec).unwrap();
        assert_relative_eq!(mm.shift(0).unwrap(), &DVector::from_vec(vec![0.25, 0.5]), epsilon = 1e-15);
        assert_relative_eq!(mm.bar(0).unwrap().span, DVector::from_vec(vec![1.0, 0.0]));
        let (a, b) = mm.bar_endpoints(&[0, 0], 0).unwrap();
        assert_relative_eq!(a, DVector::from_vec(vec![2.25, -0.5]), epsilon = 1e-15);
        assert_relative_eq!(b, DVector::from_vec(vec![3.25, -0.5]), epsilon = 1e-15);
    }

    #[test]
    fn structural_violations_are_collected() {
        let mut spec = square_spec();
        spec.bars[0].end.joint = 4;
        spec.bars[1].section = BeamSection::default();
        let Err(Error::Validation(v)) = validate(&spec) else { panic!() };
        assert!(v.contains(&Violation::UnknownJoint { bar: 0, joint: 4 }));
        assert!(v.iter().any(|x| matches!(x, Violation::InvalidSection { bar: 1, .. })));
    }

    #[test]
    fn zero_length_and_directors() {
        let mut spec = square_spec();
        spec.bars[0].end.offset = vec![0, 0];
        spec.bars[1].directors = Some(DirectorOverride { d2: vec![0.0, 1.0] });
        let Err(Error::Validation(v)) = validate(&spec) else { panic!() };
        assert!(v.contains(&Violation::ZeroLengthBar { bar: 0 }));
        assert!(v.iter().any(|x| matches!(x, Violation::NonOrthonormalDirectors { bar: 1, .. })));
    }

    #[test]
    fn left_handed_planar_override_rejected() {
        let mut spec = square_spec();
        spec.bars[0].directors = Some(DirectorOverride { d2: vec![0.0, -1.0] });
        assert!(validate(&spec).is_err());
        spec.bars[0].directors = Some(DirectorOverride { d2: vec![0.0, 1.0] });
        assert!(validate(&spec).is_ok());
    }

    #[test]
    fn kinematics_dimension_checked() {
        let mut spec = square_spec();
        spec.kinematics = Some("spatial".into());
        let Err(Error::Validation(v)) = validate(&spec) else { panic!() };
        assert!(matches!(v[0], Violation::UnsupportedKinematics { .. }));
    }

    #[test]
    fn dangling_joint_warns() {
        let mut spec = square_spec();
        spec.joints.push(vec![0.5, 0.5]);
        let mm = validate(&spec).unwrap();
        assert_eq!(mm.warnings(), &[Warning::DanglingJointClass { joint: 1 }]);
    }

    #[test]
    fn json_round_trip() {
        let mm = validate(&square_spec()).unwrap();
        let text = serde_json::to_string(&mm.to_spec()).unwrap();
        let back = validate(&MetamaterialSpec::from_json(&text).unwrap()).unwrap();
        assert_eq!(back.bar_count(), 2);
        assert!(text.contains("\"EA\""));
    }

    #[test]
    fn sampler_centered_grid() {
        let b = BravaisBasis::new(&[vec![1.0]]).unwrap();
        let g = brillouin_zone_sampler(&b, &[4]).unwrap();
        let ks: Vec<f64> = g.samples.iter().map(|s| s.k[0]).collect();
        let expect = [-PI, -PI / 2.0, 0.0, PI / 2.0];
        for (a, e) in ks.iter().zip(expect) {
            assert_relative_eq!(*a, e, epsilon = 1e-15);
        }
        assert_eq!(g.origin, 2);
        assert!(brillouin_zone_sampler(&b, &[0]).is_err());
    }

    #[test]
    fn sampler_counts_and_bounds() {
        let b = BravaisBasis::new(&[vec![1.5, -0.8], vec![1.5, 0.8]]).unwrap();
        for res in [1usize, 2, 3, 5] {
            let g = brillouin_zone_sampler(&b, &[res, res]).unwrap();
            assert_eq!(g.samples.len(), res * res);
            assert!(g.samples[g.origin].k.norm() == 0.0);
            for s in &g.samples {
                let c = b.dual_coordinates(&s.k);
                assert!(c.iter().all(|v| v.abs() <= 0.5 + 1e-12));
            }
        }
    }
}
