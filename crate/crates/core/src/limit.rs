//! Continuum limit `D_0(k)` by scaling and localization, equicoercivity and
//! homogeneity checks, and the higher-order expansion `D_{ε,α}`.
//!
//! The limit is taken on `M(ε) = Lᵀ D_ε⁻¹ L`, which stays bounded as `ε ↓ 0`.
//! Samples are symmetrized, `(M(ε) + M(−ε)) / 2`, so the extrapolated
//! quantity is even in `ε` and Richardson elimination proceeds in powers of
//! `ε²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{
    quadratic_form, scaled_dynamical_matrix, scaled_dynamical_matrix_unchecked, CMatrix, CVector,
};
use crate::lattice::Metamaterial;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConfig {
    /// Largest scale; by default `ε₀|k|` is `bz_fraction` times the dual-cell radius.
    pub eps0: Option<f64>,
    pub bz_fraction: f64,
    pub levels: usize,
    /// Relative residual allowed between the two finest extrapolants.
    pub tol_extrap: f64,
    /// Relative threshold below which an eigenvalue counts as zero.
    pub singular_tol: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self { eps0: None, bz_fraction: 0.1, levels: 6, tol_extrap: 1e-8, singular_tol: 1e-10 }
    }
}

impl LimitConfig {
    pub fn scales(&self, mm: &Metamaterial, k: &DVector<f64>) -> Vec<f64> {
        let eps0 = self.eps0.unwrap_or_else(|| self.bz_fraction * mm.basis().bz_radius() / k.norm());
        (0..self.levels).map(|j| eps0 * 0.5f64.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitRoute {
    /// Inverse of the extrapolated `Lᵀ D_ε⁻¹ L`.
    Compliance,
    /// Direct limit of `D_ε` (single joint class only).
    Pointwise,
}

#[derive(Debug, Clone)]
pub struct ContinuumDynamicalMatrix {
    pub k: DVector<f64>,
    pub matrix: CMatrix,
    pub route: LimitRoute,
    pub epsilons: Vec<f64>,
    pub residual: f64,
    /// Relative mismatch between the two routes when both are available.
    pub route_mismatch: Option<f64>,
}

/// `L`: `N` stacked copies of `I / N`.
pub fn localization_operator(mm: &Metamaterial) -> DMatrix<f64> {
    let n = mm.joint_count();
    let du = mm.dofs_per_joint();
    DMatrix::from_fn(n * du, du, |i, j| if i % du == j { 1.0 / n as f64 } else { 0.0 })
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// Inverse of a Hermitian positive definite matrix through its
/// eigendecomposition; `None` if the spectrum is not bounded away from 0.
pub fn hermitian_inverse(m: &CMatrix, singular_tol: f64) -> Option<CMatrix> {
    let eig = hermitian_part(m).symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > singular_tol * max) {
        return None;
    }
    let inv = eig.eigenvalues.map(|v| Complex64::from(1.0 / v));
    let q = &eig.eigenvectors;
    Some(q * CMatrix::from_diagonal(&inv) * q.adjoint())
}

fn kvec(k: &DVector<f64>) -> Vec<f64> {
    k.iter().copied().collect()
}

/// `Lᵀ D_ε(k)⁻¹ L` for any nonzero (possibly negative) `ε`.
pub fn compliance_sample(mm: &Metamaterial, k: &DVector<f64>, eps: f64, singular_tol: f64) -> Result<CMatrix> {
    let d = scaled_dynamical_matrix_unchecked(mm, k, eps)?;
    let inv = hermitian_inverse(&d.matrix, singular_tol).ok_or_else(|| Error::SingularLimit {
        k: kvec(k),
        reason: format!("D_ε(k) is singular at ε = {eps:e} (zero-energy mode)"),
    })?;
    let l = localization_operator(mm).map(Complex64::from);
    Ok(l.transpose() * inv * l)
}

/// Richardson table in powers of `ε²` over `ε_j = ε₀ 2^{−j}`; returns the
/// finest extrapolant and the relative change from the previous diagonal.
pub fn richardson_even(samples: &[CMatrix]) -> (CMatrix, f64) {
    let n = samples.len();
    assert!(n >= 2, "extrapolation needs at least two samples");
    let mut prev: Vec<CMatrix> = samples.to_vec();
    let mut diagonal = vec![samples[0].clone()];
    for m in 1..n {
        let factor = 4f64.powi(m as i32) - 1.0;
        let next: Vec<CMatrix> = (1..prev.len())
            .map(|j| &prev[j] + (&prev[j] - &prev[j - 1]) * Complex64::from(1.0 / factor))
            .collect();
        diagonal.push(next[next.len() - 1].clone());
        prev = next;
    }
    let best = diagonal[n - 1].clone();
    let scale = best.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let diff = (&best - &diagonal[n - 2]).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let residual = if scale > 0.0 { diff / scale } else { diff };
    (best, residual)
}

fn extrapolate<F>(scales: &[f64], mut sample: F) -> Result<(CMatrix, f64)>
where
    F: FnMut(f64) -> Result<CMatrix>,
{
    let mut values = Vec::with_capacity(scales.len());
    for &e in scales {
        let plus = sample(e)?;
        let minus = sample(-e)?;
        values.push((plus + minus) * Complex64::from(0.5));
    }
    Ok(richardson_even(&values))
}

fn compliance_route(mm: &Metamaterial, k: &DVector<f64>, cfg: &LimitConfig, scales: &[f64]) -> Result<(CMatrix, f64)> {
    let (m0, residual) = extrapolate(scales, |e| compliance_sample(mm, k, e, cfg.singular_tol))?;
    if residual > cfg.tol_extrap {
        return Err(Error::NoConvergence { residual, tolerance: cfg.tol_extrap });
    }
    let d0 = hermitian_inverse(&m0, cfg.singular_tol).ok_or_else(|| Error::SingularLimit {
        k: kvec(k),
        reason: "extrapolated Lᵀ D_ε⁻¹ L is not invertible".into(),
    })?;
    Ok((hermitian_part(&d0), residual))
}

/// `lim D_ε(k)` directly; meaningful for a single joint class.
pub fn pointwise_limit(mm: &Metamaterial, k: &DVector<f64>, cfg: &LimitConfig) -> Result<(CMatrix, f64)> {
    if mm.joint_count() != 1 {
        return Err(Error::UnsupportedJointCount(mm.joint_count()));
    }
    let scales = cfg.scales(mm, k);
    let (d0, residual) = extrapolate(&scales, |e| Ok(scaled_dynamical_matrix_unchecked(mm, k, e)?.matrix))?;
    Ok((hermitian_part(&d0), residual))
}

fn relative_difference(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = a.iter().chain(b.iter()).fold(0.0f64, |m, z| m.max(z.norm()));
    let diff = (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `D_0(k) = (lim_{ε↓0} Lᵀ D_ε(k)⁻¹ L)⁻¹`.
///
/// With one joint class the pointwise limit of `D_ε` is also computed: it is
/// returned when the compliance route is unavailable (singular limit, as for
/// a bending-only chain) and otherwise serves as a cross-check.
pub fn continuum_dynamical_matrix(
    mm: &Metamaterial,
    k: &DVector<f64>,
    cfg: &LimitConfig,
) -> Result<ContinuumDynamicalMatrix> {
    if k.norm() == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let scales = cfg.scales(mm, k);
    scaled_dynamical_matrix(mm, k, scales[0])?;
    let compliance = compliance_route(mm, k, cfg, &scales);
    if mm.joint_count() != 1 {
        let (matrix, residual) = compliance?;
        return Ok(ContinuumDynamicalMatrix {
            k: k.clone(),
            matrix,
            route: LimitRoute::Compliance,
            epsilons: scales,
            residual,
            route_mismatch: None,
        });
    }
    let (pointwise, pw_residual) = pointwise_limit(mm, k, cfg)?;
    if pw_residual > cfg.tol_extrap {
        return Err(Error::NoConvergence { residual: pw_residual, tolerance: cfg.tol_extrap });
    }
    match compliance {
        Ok((matrix, residual)) => {
            let mismatch = relative_difference(&matrix, &pointwise);
            if mismatch > cfg.tol_extrap {
                return Err(Error::NoConvergence { residual: mismatch, tolerance: cfg.tol_extrap });
            }
            Ok(ContinuumDynamicalMatrix {
                k: k.clone(),
                matrix,
                route: LimitRoute::Compliance,
                epsilons: scales,
                residual: residual.max(pw_residual),
                route_mismatch: Some(mismatch),
            })
        }
        // a compliance that blows up as ε ↓ 0 leaves only the direct limit
        Err(Error::NoConvergence { .. }) => Ok(ContinuumDynamicalMatrix {
            k: k.clone(),
            matrix: pointwise,
            route: LimitRoute::Pointwise,
            epsilons: scales,
            residual: pw_residual,
            route_mismatch: None,
        }),
        Err(e) => Err(e),
    }
}

/// Norm weights of the coercivity condition: `|k|²` on deflections, 1 on rotations.
fn coercivity_weights(mm: &Metamaterial, k: &DVector<f64>) -> DVector<f64> {
    let layout = mm.layout();
    let du = layout.per_joint();
    let k2 = k.norm_squared();
    DVector::from_fn(mm.dofs_per_cell(), |i, _| if i % du < layout.deflections { k2 } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivitySample {
    pub k: DVector<f64>,
    pub eps: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquicoercivityReport {
    /// Minimum over all samples; `> 0` means the check passes.
    pub constant: f64,
    pub samples: Vec<CoercivitySample>,
}

impl EquicoercivityReport {
    pub fn passes(&self) -> bool {
        self.constant > 0.0
    }

    /// Minimum constant for each `ε` in the order given.
    pub fn by_scale(&self, scales: &[f64]) -> Vec<f64> {
        scales
            .iter()
            .map(|&e| self.samples.iter().filter(|s| s.eps == e).map(|s| s.constant).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// Estimates `C` in `ζᵀ D_ε ζ̄ ≥ C (|k|²|ξ|² + |η|²)` as the smallest
/// generalized eigenvalue over all `(k, ε)` samples. Values at or below
/// `1e-12` times the largest generalized eigenvalue are reported as 0.
pub fn check_equicoercivity(mm: &Metamaterial, ks: &[DVector<f64>], scales: &[f64]) -> Result<EquicoercivityReport> {
    let mut samples = Vec::with_capacity(ks.len() * scales.len());
    for k in ks {
        if k.norm() == 0.0 {
            return Err(Error::ZeroWavevector);
        }
        let w = coercivity_weights(mm, k).map(|v| 1.0 / v.sqrt());
        for &eps in scales {
            let d = scaled_dynamical_matrix(mm, k, eps)?.matrix;
            let scaled = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * (w[i] * w[j]));
            let ev = crate::fourier::hermitian_eigenvalues(&scaled);
            let max = ev.last().copied().unwrap_or(0.0);
            let min = ev[0];
            let constant = if min <= 1e-12 * max { 0.0 } else { min };
            samples.push(CoercivitySample { k: k.clone(), eps, constant });
        }
    }
    let constant = samples.iter().map(|s| s.constant).fold(f64::INFINITY, f64::min);
    Ok(EquicoercivityReport { constant, samples })
}

/// Probe amplitudes: basis vectors, `e_a + e_b` and `e_a + i e_b`.
pub fn polarization_probes(size: usize) -> Vec<CVector> {
    let mut out = Vec::new();
    let unit = |a: usize| {
        let mut v = CVector::zeros(size);
        v[a] = Complex64::from(1.0);
        v
    };
    for a in 0..size {
        out.push(unit(a));
    }
    for a in 0..size {
        for b in a + 1..size {
            out.push(unit(a) + unit(b));
            let mut v = unit(a);
            v[b] = Complex64::new(0.0, 1.0);
            out.push(v);
        }
    }
    out
}

/// Largest relative mismatch of `D_0(λk) ζ·ζ* = D_0(k)(λξ; η)·(λξ; η)*`
/// over the probe set.
pub fn check_homogeneity(mm: &Metamaterial, k: &DVector<f64>, lambda: f64, cfg: &LimitConfig) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("λ must be positive, got {lambda}")));
    }
    let base = continuum_dynamical_matrix(mm, k, cfg)?.matrix;
    let scaled = if lambda == 1.0 { base.clone() } else { continuum_dynamical_matrix(mm, &(k * lambda), cfg)?.matrix };
    let layout = mm.layout();
    let du = layout.per_joint();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut pairs = Vec::new();
    for z in polarization_probes(du) {
        let lhs = quadratic_form(&scaled, &z);
        let zs = CVector::from_fn(du, |i, _| if i < layout.deflections { z[i] * lambda } else { z[i] });
        let rhs = quadratic_form(&base, &zs);
        scale = scale.max(lhs.abs()).max(rhs.abs());
        pairs.push((lhs, rhs));
    }
    for (lhs, rhs) in pairs {
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Taylor coefficients `a_m = (1/m!) dᵐ/dεᵐ (D_ε⁻¹)|_{ε=0}`, `m = 0..=4`, of a
/// single-joint lattice, from symmetric samples at `±h 2^{−j}`, `j = 0..3`.
///
/// The even part `(M(h) + M(−h))/2` and the odd part `(M(h) − M(−h))/(2h)`
/// are interpolated by cubics in `h²`, which is the same as central
/// differences refined by Richardson elimination.
pub fn compliance_taylor_coefficients(mm: &Metamaterial, k: &DVector<f64>, cfg: &LimitConfig) -> Result<Vec<CMatrix>> {
    if mm.joint_count() != 1 {
        return Err(Error::UnsupportedJointCount(mm.joint_count()));
    }
    if k.norm() == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let h0 = 1e-2 * mm.basis().bz_radius() / k.norm();
    let hs: Vec<f64> = (0..4).map(|j| h0 * 0.5f64.powi(j)).collect();
    let vander = DMatrix::from_fn(4, 4, |i, p| (hs[i] * hs[i]).powi(p as i32));
    let lu = vander.lu();
    let du = mm.dofs_per_joint();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for &h in &hs {
        let plus = compliance_sample(mm, k, h, cfg.singular_tol)?;
        let minus = compliance_sample(mm, k, -h, cfg.singular_tol)?;
        even.push((&plus + &minus) * Complex64::from(0.5));
        odd.push((&plus - &minus) * Complex64::from(0.5 / h));
    }
    let fit = |values: &[CMatrix]| -> Vec<CMatrix> {
        let mut coeffs = vec![CMatrix::zeros(du, du); 4];
        for i in 0..du {
            for j in 0..du {
                for part in 0..2 {
                    let rhs = DVector::from_fn(4, |s, _| {
                        let z = values[s][(i, j)];
                        if part == 0 {
                            z.re
                        } else {
                            z.im
                        }
                    });
                    let c = lu.solve(&rhs).expect("distinct nodes");
                    for p in 0..4 {
                        if part == 0 {
                            coeffs[p][(i, j)].re = c[p];
                        } else {
                            coeffs[p][(i, j)].im = c[p];
                        }
                    }
                }
            }
        }
        coeffs
    };
    let e = fit(&even);
    let o = fit(&odd);
    Ok(vec![e[0].clone(), o[0].clone(), e[1].clone(), o[1].clone(), e[2].clone()])
}

/// `D_{ε,α}(k) = (Σ_{m≤α} a_m εᵐ)⁻¹` for a single joint class, `α ≤ 4`.
pub fn higher_order_matrix(mm: &Metamaterial, k: &DVector<f64>, eps: f64, alpha: usize, cfg: &LimitConfig) -> Result<CMatrix> {
    if alpha > 4 {
        return Err(Error::InvalidParameter(format!("expansion order {alpha} exceeds 4")));
    }
    let coeffs = compliance_taylor_coefficients(mm, k, cfg)?;
    // the zeroth coefficient must invert to D_0(k)
    let d0 = continuum_dynamical_matrix(mm, k, cfg)?.matrix;
    let du = mm.dofs_per_joint();
    let check = relative_difference(&(&coeffs[0] * &d0), &CMatrix::identity(du, du));
    if !(check <= 1e-6) {
        return Err(Error::SingularLimit { k: kvec(k), reason: "D_ε⁻¹ has no regular expansion at ε = 0".into() });
    }
    let mut series = CMatrix::zeros(du, du);
    for (m, a) in coeffs.iter().enumerate().take(alpha + 1) {
        series += a * Complex64::from(eps.powi(m as i32));
    }
    if alpha == 0 {
        return Ok(d0);
    }
    hermitian_inverse(&series, cfg.singular_tol)
        .map(|m| hermitian_part(&m))
        .ok_or_else(|| Error::SingularLimit { k: kvec(k), reason: "truncated series is not invertible".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{family, Params};
    use approx::assert_relative_eq;

    fn build(name: &str, params: &str) -> Metamaterial {
        let f = family(name).unwrap();
        let p = Params::parse(f, params).unwrap();
        crate::lattice::validate(&f.build(&p).unwrap()).unwrap()
    }

    #[test]
    fn localization_operator_normalization() {
        let mm = build("honeycomb", "");
        let l = localization_operator(&mm);
        assert_relative_eq!(l.transpose() * &l, DMatrix::identity(3, 3) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn richardson_recovers_polynomial_limit() {
        let f = |e: f64| CMatrix::from_element(1, 1, Complex64::from(2.0 + 3.0 * e * e - 5.0 * e.powi(4)));
        let samples: Vec<CMatrix> = (0..4).map(|j| f(0.1 * 0.5f64.powi(j))).collect();
        let (v, res) = richardson_even(&samples);
        assert_relative_eq!(v[(0, 0)].re, 2.0, epsilon = 1e-13);
        assert!(res < 1e-12);
    }

    #[test]
    fn chain_limit() {
        let mm = build("chain", "EA=2,L=0.5");
        let k = DVector::from_vec(vec![1.3]);
        let d0 = continuum_dynamical_matrix(&mm, &k, &LimitConfig::default()).unwrap();
        assert_relative_eq!(d0.matrix[(0, 0)].re, 2.0 * 1.69, max_relative = 1e-10);
        assert!(d0.route_mismatch.unwrap() < 1e-8);
    }

    #[test]
    fn zero_wavevector_rejected() {
        let mm = build("chain", "");
        let k = DVector::from_vec(vec![0.0]);
        assert!(matches!(continuum_dynamical_matrix(&mm, &k, &LimitConfig::default()), Err(Error::ZeroWavevector)));
    }

    #[test]
    fn homogeneity_trivial_scale() {
        let mm = build("honeycomb", "");
        let k = DVector::from_vec(vec![0.3, -0.7]);
        assert_eq!(check_homogeneity(&mm, &k, 1.0, &LimitConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn probes_count() {
        assert_eq!(polarization_probes(3).len(), 3 + 2 * 3);
    }

    #[test]
    fn higher_order_requires_single_joint() {
        let mm = build("two-bar-chain", "");
        let k = DVector::from_vec(vec![1.0]);
        let err = higher_order_matrix(&mm, &k, 0.1, 2, &LimitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedJointCount(2)));
    }
}
