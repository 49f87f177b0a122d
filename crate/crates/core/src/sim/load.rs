//! Macroscopic loads given as finite lists of Fourier half-modes.

use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::BravaisBasis;

/// One half-mode `2 Re(q e^{ik·x})` with `k = Σ n_j g_j / extent_j`, where
/// `extent_j` is the torus length along `a_j` in units of `a_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMode {
    pub index: Vec<i64>,
    /// Force components followed by moment components (`d_u` entries).
    pub amplitude: Vec<Complex64>,
}

/// Real load `f_0(x) = Σ 2 Re(q_j e^{ik_j·x})`, without a `k = 0` part.
///
/// Modes are canonicalized on construction: `(−n, q)` is stored as
/// `(n, q̄)` and repeated indices are merged, so distinct entries are
/// orthogonal on the torus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadField {
    modes: Vec<LoadMode>,
}

fn is_canonical(index: &[i64]) -> bool {
    index.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

impl LoadField {
    pub fn new(dimension: usize, components: usize, modes: Vec<LoadMode>) -> Result<Self> {
        let mut out: Vec<LoadMode> = Vec::new();
        for mut mode in modes {
            if mode.index.len() != dimension || mode.amplitude.len() != components {
                return Err(Error::InvalidParameter(format!(
                    "load mode {:?} needs {dimension} indices and {components} amplitudes, got {} and {}",
                    mode.index,
                    mode.index.len(),
                    mode.amplitude.len()
                )));
            }
            if mode.amplitude.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("load mode {:?} has a non-finite amplitude", mode.index)));
            }
            if mode.index.iter().all(|&v| v == 0) {
                let size = mode.amplitude.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
                if size > 0.0 {
                    return Err(Error::UnbalancedLoad(2.0 * size));
                }
                continue;
            }
            if !is_canonical(&mode.index) {
                mode.index.iter_mut().for_each(|v| *v = -*v);
                mode.amplitude.iter_mut().for_each(|q| *q = q.conj());
            }
            match out.iter_mut().find(|m| m.index == mode.index) {
                Some(m) => m.amplitude.iter_mut().zip(&mode.amplitude).for_each(|(a, b)| *a += b),
                None => out.push(mode),
            }
        }
        Ok(Self { modes: out })
    }

    /// Parses `n1,n2@q1,q2,q3;...`; amplitudes accept complex literals such
    /// as `0.5`, `2i` or `1-0.5i`.
    pub fn parse(text: &str, dimension: usize, components: usize) -> Result<Self> {
        let bad = |what: &str| Error::InvalidParameter(format!("load '{text}': {what}"));
        let mut modes = Vec::new();
        for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (idx, amp) = part.split_once('@').ok_or_else(|| bad("expected 'indices@amplitudes'"))?;
            let index = idx
                .split(',')
                .map(|s| s.trim().parse::<i64>().map_err(|_| bad(&format!("bad index '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            let amplitude = amp
                .split(',')
                .map(|s| Complex64::from_str(s.trim()).map_err(|_| bad(&format!("bad amplitude '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            modes.push(LoadMode { index, amplitude });
        }
        Self::new(dimension, components, modes)
    }

    pub fn modes(&self) -> &[LoadMode] {
        &self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Same load multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| LoadMode { index: m.index.clone(), amplitude: m.amplitude.iter().map(|q| q * lambda).collect() })
            .collect();
        Self { modes }
    }

    pub fn wavevector(basis: &BravaisBasis, mode: &LoadMode, extent: &[f64]) -> DVector<f64> {
        let c: Vec<f64> = mode.index.iter().zip(extent).map(|(&n, &e)| n as f64 / e).collect();
        basis.from_dual_coordinates(&c)
    }

    pub fn amplitude(mode: &LoadMode) -> crate::fourier::CVector {
        crate::fourier::CVector::from_column_slice(&mode.amplitude)
    }

    /// `f_0(x)` on a torus of the given extent.
    pub fn evaluate(&self, basis: &BravaisBasis, extent: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let size = self.modes.first().map_or(0, |m| m.amplitude.len());
        let mut f = DVector::zeros(size);
        for mode in &self.modes {
            let phase = Complex64::from_polar(1.0, Self::wavevector(basis, mode, extent).dot(x));
            for (fi, q) in f.iter_mut().zip(&mode.amplitude) {
                *fi += 2.0 * (q * phase).re;
            }
        }
        f
    }
}
