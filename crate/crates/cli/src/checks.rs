//! Oracle checks run by `validate`: assembled and limit quantities against
//! the closed forms shipped with the catalog.

use lattice_homog::catalog::{build_validated, family, octet_moduli, LatticeFamily, ParamKind, Params};
use lattice_homog::fourier::{assemble_dynamical_matrix, CMatrix};
use lattice_homog::limit::{continuum_dynamical_matrix, higher_order_matrix, LimitConfig};
use lattice_homog::moduli::{extract_effective_moduli, moduli_difference, EffectiveModuli, ModuliConfig, SymmetryClass};
use lattice_homog::report::{Cell, Format, Table};
use lattice_homog::{Error, Metamaterial, Result};
use nalgebra::DVector;

use crate::{Common, Outcome};

/// Relative size of the oracle perturbation applied by `--inject-mismatch`.
const MISMATCH: f64 = 1e-2;
const TOL_ASSEMBLY: f64 = 1e-12;
const TOL_LIMIT: f64 = 1e-8;
const TOL_MODULI: f64 = 1e-6;
const TOL_IDENTITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Fails against the printed closed form but matches its documented correction.
    KnownDiscrepancy,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::KnownDiscrepancy => "known-discrepancy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub rel_error: f64,
    pub tolerance: f64,
    pub status: Status,
}

fn check(name: &'static str, rel_error: f64, tolerance: f64) -> Check {
    let status = if rel_error <= tolerance { Status::Pass } else { Status::Fail };
    Check { name, rel_error, tolerance, status }
}

/// Every check name, in report order.
pub const CHECK_NAMES: [&str; 22] = [
    "chain.dynamical-matrix",
    "beam-chain.dynamical-matrix",
    "two-bar-chain.dynamical-matrix",
    "chain.continuum-matrix",
    "beam-chain.continuum-matrix",
    "two-bar-chain.continuum-matrix",
    "chain.higher-order",
    "chain.modulus",
    "two-bar-chain.modulus",
    "honeycomb.C11",
    "honeycomb.C22",
    "honeycomb.C12",
    "honeycomb.C33",
    "honeycomb.H",
    "honeycomb.isotropy",
    "honeycomb.mechanism",
    "octet.C11",
    "octet.C12",
    "octet.C44",
    "octet.H",
    "octet.cubic",
    "octet.GI1-invariance",
];

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

struct Ctx<'a> {
    inject: Option<&'a str>,
}

impl Ctx<'_> {
    /// Oracle parameters; every stiffness scaled by `1 + MISMATCH` for the injected check.
    fn oracle_params(&self, name: &str, f: &dyn LatticeFamily, p: &Params) -> Params {
        let mut q = p.clone();
        if self.inject == Some(name) {
            for spec in f.parameters().iter().filter(|s| s.kind == ParamKind::Rigidity) {
                q.set(f, spec.name, p.get(spec.name) * (1.0 + MISMATCH)).expect("scaled stiffness stays valid");
            }
        }
        q
    }

    fn injected(&self, name: &str) -> bool {
        self.inject == Some(name)
    }
}

fn lattice(name: &str, params: &str) -> Result<(Metamaterial, Params, &'static dyn LatticeFamily)> {
    let (mm, p) = build_validated(name, params)?;
    Ok((mm, p, family(name).expect("catalog family")))
}

/// Deterministic wavevectors spread over the dual cell, avoiding k = 0.
fn sample_ks(mm: &Metamaterial, count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| {
            let c = -0.5 + (i as f64 + 0.5) / count as f64;
            mm.basis().from_dual_coordinates(&[c])
        })
        .collect()
}

fn dynamical_matrix_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    for (check_name, lat, params) in [
        ("chain.dynamical-matrix", "chain", "EA=1.7,L=1.3"),
        ("beam-chain.dynamical-matrix", "beam-chain", "EI=0.8,L=1.1"),
        ("two-bar-chain.dynamical-matrix", "two-bar-chain", ""),
    ] {
        let (mm, p, f) = lattice(lat, params)?;
        let q = ctx.oracle_params(check_name, f, &p);
        let mut worst = 0.0f64;
        for k in sample_ks(&mm, 50) {
            let d = assemble_dynamical_matrix(&mm, &k)?.matrix;
            worst = worst.max(rel(&d, &f.dynamical_matrix(&q, &k).expect("closed form")));
        }
        out.push(check(check_name, worst, TOL_ASSEMBLY));
    }
    Ok(())
}

fn continuum_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let cfg = LimitConfig::default();
    for (check_name, lat, params) in [
        ("chain.continuum-matrix", "chain", "EA=1.7,L=1.3"),
        ("beam-chain.continuum-matrix", "beam-chain", "EI=0.8,L=1.1"),
        ("two-bar-chain.continuum-matrix", "two-bar-chain", "EA1=1,EA2=2,L1=1,L2=1"),
    ] {
        let (mm, p, f) = lattice(lat, params)?;
        let q = ctx.oracle_params(check_name, f, &p);
        let mut worst = 0.0f64;
        for kx in [0.3, 1.0, 1.5] {
            let k = DVector::from_vec(vec![kx]);
            let d0 = continuum_dynamical_matrix(&mm, &k, &cfg)?.matrix;
            worst = worst.max(rel(&d0, &f.continuum_matrix(&q, &k).expect("closed form")));
        }
        out.push(check(check_name, worst, TOL_LIMIT));
    }

    let name = "chain.higher-order";
    let (mm, p, f) = lattice("chain", "EA=1.7,L=1.3")?;
    let q = ctx.oracle_params(name, f, &p);
    let (ea, l) = (q.get("EA"), q.get("L"));
    let mut worst = 0.0f64;
    for (kx, eps) in [(0.3, 0.9), (1.0, 0.5), (1.7, 0.2), (0.6, 0.05)] {
        let d = higher_order_matrix(&mm, &DVector::from_vec(vec![kx]), eps, 2, &cfg)?[(0, 0)].re;
        worst = worst.max(rel_scalar(d, ea * kx * kx / (1.0 + eps * eps * kx * kx * l * l / 12.0)));
    }
    out.push(check(name, worst, TOL_MODULI));
    Ok(())
}

fn fit(mm: &Metamaterial) -> Result<EffectiveModuli> {
    extract_effective_moduli(mm, &ModuliConfig::default())
}

fn oracle_moduli(f: &dyn LatticeFamily, p: &Params) -> Result<EffectiveModuli> {
    f.oracle_moduli(p)?.ok_or_else(|| Error::SingularOracle(format!("{} has no closed-form moduli", f.name())))
}

fn chain_moduli_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    for (name, lat, params) in
        [("chain.modulus", "chain", "EA=1.7,L=1.3"), ("two-bar-chain.modulus", "two-bar-chain", "EA1=1,EA2=2,L1=1,L2=1")]
    {
        let (mm, p, f) = lattice(lat, params)?;
        let oracle = oracle_moduli(f, &ctx.oracle_params(name, f, &p))?;
        out.push(check(name, rel_scalar(fit(&mm)?.c[(0, 0)], oracle.c[(0, 0)]), TOL_MODULI));
    }
    Ok(())
}

fn honeycomb_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let (mm, p, f) = lattice("honeycomb", "EA=1,EI=0.01,L=1")?;
    let m = fit(&mm)?;
    for (name, i, j) in
        [("honeycomb.C11", 0, 0), ("honeycomb.C22", 1, 1), ("honeycomb.C12", 0, 1), ("honeycomb.C33", 2, 2)]
    {
        let oracle = oracle_moduli(f, &ctx.oracle_params(name, f, &p))?;
        out.push(check(name, rel_scalar(m.c[(i, j)], oracle.c[(i, j)]), TOL_MODULI));
    }
    let name = "honeycomb.H";
    let oracle = oracle_moduli(f, &ctx.oracle_params(name, f, &p))?;
    out.push(check(name, rel_scalar(m.h[(0, 0)], oracle.h[(0, 0)]), TOL_MODULI));

    let name = "honeycomb.isotropy";
    let mut c = m.c.clone();
    if ctx.injected(name) {
        c[(2, 2)] *= 1.0 + MISMATCH;
    }
    let gap = (c[(0, 0)] - c[(0, 1)] - 2.0 * c[(2, 2)]).abs().max((c[(0, 0)] - c[(1, 1)]).abs());
    out.push(check(name, gap / c[(0, 0)].abs(), TOL_IDENTITY));

    // EI = 0 is a mechanism; the limit must be reported singular.
    let name = "honeycomb.mechanism";
    let ei = if ctx.injected(name) { MISMATCH } else { 0.0 };
    let (mech, _, _) = lattice("honeycomb", &format!("EA=1,EI={ei},L=1"))?;
    let singular = matches!(fit(&mech), Err(Error::SingularLimit { .. }));
    out.push(check(name, if singular { 0.0 } else { 1.0 }, 0.0));
    Ok(())
}

fn octet_checks(ctx: &Ctx, out: &mut Vec<Check>) -> Result<()> {
    let (mm, p, f) = lattice("octet", "EA=1,GI1=0.01,EI=0.01,L=1")?;
    let m = fit(&mm)?;
    let symmetric = m.symmetry == SymmetryClass::Cubic;
    for (name, i, j) in [("octet.C11", 0, 0), ("octet.C12", 0, 1), ("octet.C44", 3, 3)] {
        let q = ctx.oracle_params(name, f, &p);
        let printed = oracle_moduli(f, &q)?;
        let mut c = check(name, rel_scalar(m.c[(i, j)], printed.c[(i, j)]), TOL_MODULI);
        // The printed axial part is twice what the printed geometry yields.
        let corrected = octet_moduli(q.get("EA") / 2.0, q.get("EI"), q.get("L"));
        if c.status == Status::Fail && symmetric && rel_scalar(m.c[(i, j)], corrected.c[(i, j)]) <= TOL_MODULI {
            c.status = Status::KnownDiscrepancy;
        }
        out.push(c);
    }
    let name = "octet.H";
    let oracle = oracle_moduli(f, &ctx.oracle_params(name, f, &p))?;
    out.push(check(name, (&m.h - &oracle.h).norm() / oracle.h.norm(), TOL_MODULI));

    let name = "octet.cubic";
    let expected = if ctx.injected(name) { SymmetryClass::Isotropic } else { SymmetryClass::Cubic };
    out.push(check(name, if m.symmetry == expected { 0.0 } else { 1.0 }, 0.0));

    let name = "octet.GI1-invariance";
    let gi1 = if ctx.injected(name) { 0.1 * (1.0 + MISMATCH) } else { 0.1 };
    let (stiff, _, _) = lattice("octet", &format!("EA=1,GI1={gi1},EI=0.01,L=1"))?;
    let mut perturbed = fit(&stiff)?;
    if ctx.injected(name) {
        perturbed.c *= 1.0 + MISMATCH;
    }
    out.push(check(name, moduli_difference(&m, &perturbed), TOL_IDENTITY));
    Ok(())
}

pub fn run_checks(inject: Option<&str>) -> Result<Vec<Check>> {
    if let Some(name) = inject {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::InvalidParameter(format!(
                "unknown check '{name}' (known: {})",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    let ctx = Ctx { inject };
    let mut out = Vec::with_capacity(CHECK_NAMES.len());
    dynamical_matrix_checks(&ctx, &mut out)?;
    continuum_checks(&ctx, &mut out)?;
    chain_moduli_checks(&ctx, &mut out)?;
    honeycomb_checks(&ctx, &mut out)?;
    octet_checks(&ctx, &mut out)?;
    Ok(out)
}

pub fn validate(c: &Common, inject: Option<&str>) -> Result<Outcome> {
    if c.lattice.is_some() || c.input.is_some() {
        return Err(Error::InvalidParameter("validate runs the whole catalog; drop --lattice/--input".into()));
    }
    let checks = run_checks(inject)?;
    let mut t = Table::new(&["check", "status", "rel_error", "tolerance"]);
    for ch in &checks {
        t.push(vec![ch.name.into(), ch.status.as_str().into(), Cell::Num(ch.rel_error), Cell::Num(ch.tolerance)]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name).collect();
    let text = t.render(c.format.map(Format::from).unwrap_or(Format::Csv));
    Ok(Outcome {
        text,
        failed: (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", "))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_order_matches_names() {
        let names: Vec<&str> = run_checks(None).unwrap().iter().map(|c| c.name).collect();
        assert_eq!(names, CHECK_NAMES);
    }
}
