//! Discrete-to-continuum convergence of minimum energies on scaled tori.

use crate::error::{Error, Result};
use crate::lattice::Metamaterial;
use crate::limit::LimitConfig;
use crate::sim::load::LoadField;
use crate::sim::torus::{continuum_min_energy, solve_equilibrium_torus, TorusMetastructure, TorusSolver};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub p: usize,
    pub discrete: f64,
    pub continuum: f64,
    pub gap: f64,
    /// `log(gap_i / gap_{i−1}) / log(ε_i / ε_{i−1})`; none on the first row.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log gap` against `log ε` over all rows.
    pub slope: Option<f64>,
    /// Gaps decrease from the third level on.
    pub monotone_tail: bool,
}

/// `P` with `ε = 1/P`, rejecting scales that are not reciprocal integers.
pub fn period_of(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("scale {eps} must lie in (0, 1]")));
    }
    let p = (1.0 / eps).round();
    if ((1.0 / eps) - p).abs() > 1e-9 * p {
        return Err(Error::InvalidParameter(format!("scale {eps} is not 1/P for an integer P")));
    }
    Ok(p as usize)
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Torus solves at `P = 1/ε` for a fixed mode load, compared with the
/// continuum minimum energy.
pub fn convergence_study(
    mm: &Metamaterial,
    load: &LoadField,
    epsilons: &[f64],
    solver: &dyn TorusSolver,
    cfg: &LimitConfig,
) -> Result<ConvergenceTable> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty scale list".into()));
    }
    if load.is_empty() {
        return Err(Error::InvalidParameter("convergence study needs a nonzero load".into()));
    }
    let continuum = continuum_min_energy(mm, load, cfg)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let p = period_of(eps)?;
        let torus = TorusMetastructure::scaled(mm, p)?;
        let discrete = solve_equilibrium_torus(&torus, load, solver)?.energy;
        let gap = (discrete - continuum).abs();
        let slope = rows.last().and_then(|prev| {
            (gap > 0.0 && prev.gap > 0.0).then(|| (gap / prev.gap).ln() / (eps / prev.eps).ln())
        });
        rows.push(ConvergenceRow { eps, p, discrete, continuum, gap, slope });
    }
    let points: Vec<(f64, f64)> = rows.iter().filter(|r| r.gap > 0.0).map(|r| (r.eps.ln(), r.gap.ln())).collect();
    let slope = fit_slope(&points);
    let monotone_tail = rows.windows(2).skip(1).all(|w| w[1].gap < w[0].gap);
    Ok(ConvergenceTable { rows, slope, monotone_tail })
}
