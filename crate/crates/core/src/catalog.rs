//! Built-in lattice families and their closed-form oracles.
//!
//! Families are registered by name and looked up at runtime (`--lattice`).
//! Each family builds a [`MetamaterialSpec`] from named parameters and may
//! supply closed forms for `D(k)`, `D_ε(k)`, `D_0(k)` and the moduli.

use std::collections::BTreeMap;
use std::f64::consts::{SQRT_2, FRAC_1_SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::beam::BeamSection;
use crate::error::{Error, Result};
use crate::fourier::CMatrix;
use crate::lattice::{BarSpec, JointRef, MetamaterialSpec};
use crate::moduli::{classify_symmetry, EffectiveModuli};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Strictly positive.
    Length,
    /// Nonnegative.
    Rigidity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub kind: ParamKind,
}

const fn length(name: &'static str, default: f64) -> ParamSpec {
    ParamSpec { name, default, kind: ParamKind::Length }
}

const fn rigidity(name: &'static str, default: f64) -> ParamSpec {
    ParamSpec { name, default, kind: ParamKind::Rigidity }
}

/// Parameter values of one family, defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: BTreeMap<String, f64>,
}

impl Params {
    pub fn defaults(family: &dyn LatticeFamily) -> Self {
        Self { values: family.parameters().iter().map(|p| (p.name.to_string(), p.default)).collect() }
    }

    /// Parses `name=value,name=value` over the family defaults.
    pub fn parse(family: &dyn LatticeFamily, text: &str) -> Result<Self> {
        let mut out = Self::defaults(family);
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected name=value, got '{item}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("'{}' is not a number", value.trim())))?;
            out.set(family, name.trim(), value)?;
        }
        Ok(out)
    }

    pub fn set(&mut self, family: &dyn LatticeFamily, name: &str, value: f64) -> Result<()> {
        let spec = family.parameters().iter().find(|p| p.name == name).ok_or_else(|| {
            let known: Vec<&str> = family.parameters().iter().map(|p| p.name).collect();
            Error::InvalidParameter(format!("unknown parameter '{name}' for {} (known: {})", family.name(), known.join(", ")))
        })?;
        let ok = value.is_finite()
            && match spec.kind {
                ParamKind::Length => value > 0.0,
                ParamKind::Rigidity => value >= 0.0,
            };
        if !ok {
            return Err(Error::InvalidParameter(format!("{name} = {value} is outside its domain")));
        }
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> f64 {
        *self.values.get(name).unwrap_or_else(|| panic!("parameter {name} not declared"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub trait LatticeFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn parameters(&self) -> &'static [ParamSpec];
    fn build(&self, p: &Params) -> Result<MetamaterialSpec>;

    /// Closed-form `D(k)`.
    fn dynamical_matrix(&self, _p: &Params, _k: &DVector<f64>) -> Option<CMatrix> {
        None
    }
    /// Closed-form `D_ε(k)`.
    fn scaled_dynamical_matrix(&self, _p: &Params, _k: &DVector<f64>, _eps: f64) -> Option<CMatrix> {
        None
    }
    /// Closed-form `D_0(k)`.
    fn continuum_matrix(&self, _p: &Params, _k: &DVector<f64>) -> Option<CMatrix> {
        None
    }
    /// Closed-form moduli; `Ok(None)` when the family has none.
    fn oracle_moduli(&self, _p: &Params) -> Result<Option<EffectiveModuli>> {
        Ok(None)
    }
}

fn bar(begin: (usize, &[i64]), end: (usize, &[i64]), section: BeamSection, span: Vec<f64>) -> BarSpec {
    BarSpec {
        begin: JointRef::new(begin.0, begin.1),
        end: JointRef::new(end.0, end.1),
        section,
        directors: None,
        span: Some(span),
    }
}

fn scalar(z: f64) -> CMatrix {
    CMatrix::from_element(1, 1, Complex64::from(z))
}

fn closed_form(dimension: usize, c: DMatrix<f64>, h: DMatrix<f64>) -> EffectiveModuli {
    let g = DMatrix::zeros(c.nrows(), h.nrows());
    let symmetry = classify_symmetry(&c, 1e-12);
    EffectiveModuli { dimension, c, h, g, residual: 0.0, condition: 1.0, symmetry }
}

pub fn chain_1d(ea: f64, l: f64) -> MetamaterialSpec {
    MetamaterialSpec {
        dimension: 1,
        kinematics: Some("axial".into()),
        basis: vec![vec![l]],
        joints: vec![vec![0.0]],
        bars: vec![bar((0, &[0]), (0, &[1]), BeamSection::axial(ea), vec![l])],
    }
}

pub fn beam_chain_1d(ei: f64, l: f64) -> MetamaterialSpec {
    MetamaterialSpec {
        dimension: 1,
        kinematics: Some("bending".into()),
        basis: vec![vec![l]],
        joints: vec![vec![0.0]],
        bars: vec![bar((0, &[0]), (0, &[1]), BeamSection::planar(0.0, ei), vec![l])],
    }
}

pub fn two_bar_chain(ea1: f64, ea2: f64, l1: f64, l2: f64) -> MetamaterialSpec {
    MetamaterialSpec {
        dimension: 1,
        kinematics: Some("axial".into()),
        basis: vec![vec![l1 + l2]],
        joints: vec![vec![0.0], vec![l1]],
        bars: vec![
            bar((0, &[0]), (1, &[0]), BeamSection::axial(ea1), vec![l1]),
            bar((1, &[0]), (0, &[1]), BeamSection::axial(ea2), vec![l2]),
        ],
    }
}

pub fn honeycomb(ea: f64, ei: f64, l: f64) -> MetamaterialSpec {
    let h = SQRT_3 / 2.0;
    let s = BeamSection::planar(ea, ei);
    MetamaterialSpec {
        dimension: 2,
        kinematics: Some("planar".into()),
        basis: vec![vec![1.5 * l, -h * l], vec![1.5 * l, h * l]],
        joints: vec![vec![0.0, 0.0], vec![l, 0.0]],
        bars: vec![
            bar((0, &[0, 0]), (1, &[0, 0]), s, vec![l, 0.0]),
            bar((0, &[0, 0]), (1, &[-1, 0]), s, vec![-0.5 * l, h * l]),
            bar((0, &[0, 0]), (1, &[0, -1]), s, vec![-0.5 * l, -h * l]),
        ],
    }
}

/// Octet truss on the basis `a_i = (L/√2)·(0,1,1)` and permutations; the
/// bars join nearest neighbours, so their length is `|a_i| = L`.
pub fn octet(ea: f64, gi1: f64, ei: f64, l: f64) -> MetamaterialSpec {
    let c = l * FRAC_1_SQRT_2;
    let a = [[0.0, c, c], [c, 0.0, c], [c, c, 0.0]];
    let s = BeamSection::spatial(ea, gi1, ei, ei);
    let span = |o: [i64; 3]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|j| o[j] as f64 * a[j][i]).sum()).collect() };
    let offsets: [[i64; 3]; 6] = [[0, 0, -1], [-1, 1, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 1], [0, -1, 1]];
    MetamaterialSpec {
        dimension: 3,
        kinematics: Some("spatial".into()),
        basis: a.iter().map(|v| v.to_vec()).collect(),
        joints: vec![vec![0.0; 3]],
        bars: offsets.iter().map(|o| bar((0, &[0, 0, 0]), (0, o), s, span(*o))).collect(),
    }
}

/// Honeycomb moduli. The rotational coefficient is `8√3 EI / L³`; the
/// dimensionally consistent power of `L` was confirmed numerically.
pub fn honeycomb_moduli(ea: f64, ei: f64, l: f64) -> Result<EffectiveModuli> {
    if ei == 0.0 {
        return Err(Error::SingularOracle("honeycomb moduli are singular for EI = 0 (mechanism)".into()));
    }
    let den = ea * l.powi(3) + 12.0 * ei * l;
    let c11 = ea * (ea * l * l + 36.0 * ei) / (2.0 * SQRT_3 * den);
    let c12 = ea * (ea * l * l - 12.0 * ei) / (2.0 * SQRT_3 * den);
    let c33 = 4.0 * SQRT_3 * ea * ei / den;
    let c = DMatrix::from_row_slice(3, 3, &[c11, c12, 0.0, c12, c11, 0.0, 0.0, 0.0, c33]);
    let h = DMatrix::from_element(1, 1, 8.0 * SQRT_3 * ei / l.powi(3));
    Ok(closed_form(2, c, h))
}

pub fn octet_moduli(ea: f64, ei: f64, l: f64) -> EffectiveModuli {
    let l2 = l * l;
    let l4 = l2 * l2;
    let c11 = (4.0 * ea * l2 + 24.0 * ei) / (SQRT_2 * l4);
    let c12 = SQRT_2 * (ea * l2 - 6.0 * ei) / l4;
    let c44 = (2.0 * ea * l2 + 12.0 * ei) / (SQRT_2 * l4);
    let mut c = DMatrix::zeros(6, 6);
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = if i == j { c11 } else { c12 };
        }
        c[(3 + i, 3 + i)] = c44;
    }
    let h = DMatrix::identity(3, 3) * (48.0 * SQRT_2 * ei / l4);
    closed_form(3, c, h)
}

/// Series (harmonic-mean) modulus of the two-bar chain.
pub fn two_bar_modulus(ea1: f64, ea2: f64, l1: f64, l2: f64) -> f64 {
    let v = l1 + l2;
    1.0 / ((l1 / v) / ea1 + (l2 / v) / ea2)
}

struct Chain;
struct BeamChain;
struct TwoBarChain;
struct Honeycomb;
struct Octet;

impl LatticeFamily for Chain {
    fn name(&self) -> &'static str {
        "chain"
    }
    fn summary(&self) -> &'static str {
        "harmonic monatomic chain of axial bars"
    }
    fn parameters(&self) -> &'static [ParamSpec] {
        const P: [ParamSpec; 2] = [rigidity("EA", 1.0), length("L", 1.0)];
        &P
    }
    fn build(&self, p: &Params) -> Result<MetamaterialSpec> {
        Ok(chain_1d(p.get("EA"), p.get("L")))
    }
    fn dynamical_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        let (ea, l) = (p.get("EA"), p.get("L"));
        Some(scalar(4.0 * ea / (l * l) * (k[0] * l / 2.0).sin().powi(2)))
    }
    fn scaled_dynamical_matrix(&self, p: &Params, k: &DVector<f64>, eps: f64) -> Option<CMatrix> {
        let (ea, l) = (p.get("EA"), p.get("L"));
        Some(scalar(4.0 * ea / (eps * eps * l * l) * (eps * k[0] * l / 2.0).sin().powi(2)))
    }
    fn continuum_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        Some(scalar(p.get("EA") * k[0] * k[0]))
    }
    fn oracle_moduli(&self, p: &Params) -> Result<Option<EffectiveModuli>> {
        Ok(Some(closed_form(1, DMatrix::from_element(1, 1, p.get("EA")), DMatrix::zeros(0, 0))))
    }
}

fn beam_chain_matrix(ei: f64, l: f64, kl: f64, eps: f64) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    let d11 = Complex64::from(24.0 * ei * (1.0 - kl.cos()) / (eps * eps * l.powi(4)));
    let d12 = -i * 12.0 * ei * kl.sin() / (eps * l.powi(3));
    let d22 = Complex64::from(4.0 * ei * (2.0 + kl.cos()) / (l * l));
    CMatrix::from_row_slice(2, 2, &[d11, d12, d12.conj(), d22])
}

impl LatticeFamily for BeamChain {
    fn name(&self) -> &'static str {
        "beam-chain"
    }
    fn summary(&self) -> &'static str {
        "chain of beams in pure bending (deflection and rotation per joint)"
    }
    fn parameters(&self) -> &'static [ParamSpec] {
        const P: [ParamSpec; 2] = [rigidity("EI", 1.0), length("L", 1.0)];
        &P
    }
    fn build(&self, p: &Params) -> Result<MetamaterialSpec> {
        Ok(beam_chain_1d(p.get("EI"), p.get("L")))
    }
    fn dynamical_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        let l = p.get("L");
        Some(beam_chain_matrix(p.get("EI"), l, k[0] * l, 1.0))
    }
    fn scaled_dynamical_matrix(&self, p: &Params, k: &DVector<f64>, eps: f64) -> Option<CMatrix> {
        let l = p.get("L");
        Some(beam_chain_matrix(p.get("EI"), l, eps * k[0] * l, eps))
    }
    fn continuum_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        let (ei, l) = (p.get("EI"), p.get("L"));
        let c = 12.0 * ei / (l * l);
        let i = Complex64::new(0.0, 1.0);
        let kk = k[0];
        Some(CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::from(c * kk * kk), -i * c * kk, i * c * kk, Complex64::from(c)],
        ))
    }
}

impl LatticeFamily for TwoBarChain {
    fn name(&self) -> &'static str {
        "two-bar-chain"
    }
    fn summary(&self) -> &'static str {
        "chain alternating two axial bar types"
    }
    fn parameters(&self) -> &'static [ParamSpec] {
        const P: [ParamSpec; 4] = [rigidity("EA1", 1.0), rigidity("EA2", 2.0), length("L1", 1.0), length("L2", 1.0)];
        &P
    }
    fn build(&self, p: &Params) -> Result<MetamaterialSpec> {
        Ok(two_bar_chain(p.get("EA1"), p.get("EA2"), p.get("L1"), p.get("L2")))
    }
    fn dynamical_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        let (ea1, ea2, l1, l2) = (p.get("EA1"), p.get("EA2"), p.get("L1"), p.get("L2"));
        let v = l1 + l2;
        let (s1, s2) = (ea1 / (l1 * v), ea2 / (l2 * v));
        let kk = k[0];
        let off = -Complex64::from_polar(s1, -kk * l1) - Complex64::from_polar(s2, kk * l2);
        let diag = Complex64::from(s1 + s2);
        Some(CMatrix::from_row_slice(2, 2, &[diag, off, off.conj(), diag]))
    }
    fn continuum_matrix(&self, p: &Params, k: &DVector<f64>) -> Option<CMatrix> {
        let c = two_bar_modulus(p.get("EA1"), p.get("EA2"), p.get("L1"), p.get("L2"));
        Some(scalar(c * k[0] * k[0]))
    }
    fn oracle_moduli(&self, p: &Params) -> Result<Option<EffectiveModuli>> {
        let c = two_bar_modulus(p.get("EA1"), p.get("EA2"), p.get("L1"), p.get("L2"));
        Ok(Some(closed_form(1, DMatrix::from_element(1, 1, c), DMatrix::zeros(0, 0))))
    }
}

impl LatticeFamily for Honeycomb {
    fn name(&self) -> &'static str {
        "honeycomb"
    }
    fn summary(&self) -> &'static str {
        "planar hexagonal frame, two joint classes, three bar classes"
    }
    fn parameters(&self) -> &'static [ParamSpec] {
        const P: [ParamSpec; 3] = [rigidity("EA", 1.0), rigidity("EI", 0.01), length("L", 1.0)];
        &P
    }
    fn build(&self, p: &Params) -> Result<MetamaterialSpec> {
        Ok(honeycomb(p.get("EA"), p.get("EI"), p.get("L")))
    }
    fn oracle_moduli(&self, p: &Params) -> Result<Option<EffectiveModuli>> {
        honeycomb_moduli(p.get("EA"), p.get("EI"), p.get("L")).map(Some)
    }
}

impl LatticeFamily for Octet {
    fn name(&self) -> &'static str {
        "octet"
    }
    fn summary(&self) -> &'static str {
        "octet-truss space frame, one joint class, six bar classes"
    }
    fn parameters(&self) -> &'static [ParamSpec] {
        const P: [ParamSpec; 4] =
            [rigidity("EA", 1.0), rigidity("GI1", 0.01), rigidity("EI", 0.01), length("L", 1.0)];
        &P
    }
    fn build(&self, p: &Params) -> Result<MetamaterialSpec> {
        Ok(octet(p.get("EA"), p.get("GI1"), p.get("EI"), p.get("L")))
    }
    fn oracle_moduli(&self, p: &Params) -> Result<Option<EffectiveModuli>> {
        Ok(Some(octet_moduli(p.get("EA"), p.get("EI"), p.get("L"))))
    }
}

static CHAIN: Chain = Chain;
static BEAM_CHAIN: BeamChain = BeamChain;
static TWO_BAR: TwoBarChain = TwoBarChain;
static HONEYCOMB: Honeycomb = Honeycomb;
static OCTET: Octet = Octet;

pub fn registry() -> [&'static dyn LatticeFamily; 5] {
    [&CHAIN, &BEAM_CHAIN, &TWO_BAR, &HONEYCOMB, &OCTET]
}

pub fn family(name: &str) -> Option<&'static dyn LatticeFamily> {
    registry().into_iter().find(|f| f.name() == name)
}

/// Validated lattice of a named family, parameters given as `k=v,...`.
pub fn build_validated(name: &str, params: &str) -> Result<(crate::lattice::Metamaterial, Params)> {
    let f = family(name).ok_or_else(|| {
        let known: Vec<&str> = registry().iter().map(|f| f.name()).collect();
        Error::InvalidParameter(format!("unknown lattice '{name}' (known: {})", known.join(", ")))
    })?;
    let p = Params::parse(f, params)?;
    let mm = crate::lattice::validate(&f.build(&p)?)?;
    Ok((mm, p))
}
