use approx::assert_relative_eq;
use lattice_homog::catalog::{build_validated, chain_1d, honeycomb, two_bar_chain};
use lattice_homog::fourier::{cell_coordinates, cell_flat_index, LatticeFunction};
use lattice_homog::limit::LimitConfig;
use lattice_homog::sim::*;
use lattice_homog::{validate, Error, Metamaterial};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

fn chain(ea: f64, l: f64) -> Metamaterial {
    validate(&chain_1d(ea, l)).unwrap()
}

fn random_balanced(torus: &TorusMetastructure, seed: u64) -> LatticeFunction {
    let mm = torus.metamaterial();
    let (n, du, nv) = (mm.joint_count(), mm.dofs_per_joint(), mm.layout().deflections);
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut f = LatticeFunction::zeros(torus.periods(), n, du);
    f.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let joints = torus.joint_count() as f64;
    for c in 0..nv {
        let mean = f.values.iter().skip(c).step_by(du).sum::<f64>() / joints;
        f.values.iter_mut().skip(c).step_by(du).for_each(|v| *v -= mean);
    }
    f
}

#[test]
fn chain_mode_matches_closed_form_amplitude() {
    let (ea, l, p) = (2.0, 1.5, 8usize);
    let mm = chain(ea, l);
    let torus = TorusMetastructure::new(&mm, &[p], 1.0).unwrap();
    let q = Complex64::new(0.3, -0.1);
    let load = LoadField::new(1, 1, vec![LoadMode { index: vec![1], amplitude: vec![q] }]).unwrap();
    let sol = solve_equilibrium_torus(&torus, &load, &FourierSolver).unwrap();
    // oracle: û = q / ((4EA/L²) sin²(kL/2)) on the unscaled torus
    let k = 2.0 * PI / (p as f64 * l);
    let amp = q / (4.0 * ea / (l * l) * (k * l / 2.0).sin().powi(2));
    for cell in 0..p {
        let x = cell as f64 * l;
        let expected = 2.0 * (amp * Complex64::from_polar(1.0, k * x)).re;
        assert_relative_eq!(sol.displacement.values[cell], expected, epsilon = 1e-12);
    }
    assert_relative_eq!(sol.energy, torus.mode_sum_energy(&load).unwrap(), max_relative = 1e-12);
}

#[test]
fn zero_load_gives_zero_response() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let torus = TorusMetastructure::scaled(&mm, 4).unwrap();
    for s in solver_registry() {
        let sol = solve_equilibrium_torus(&torus, &LoadField::default(), s).unwrap();
        assert!(sol.displacement.values.iter().all(|v| *v == 0.0));
        assert_eq!(sol.energy, 0.0);
    }
}

#[test]
fn fourier_and_sparse_agree_on_all_catalog_lattices() {
    for (name, p) in [("chain", 6), ("beam-chain", 6), ("two-bar-chain", 5), ("honeycomb", 4), ("octet", 3)] {
        let (mm, _) = build_validated(name, "").unwrap();
        let torus = TorusMetastructure::scaled(&mm, p).unwrap();
        let f = random_balanced(&torus, 7);
        let a = FourierSolver.solve(&torus, &f).unwrap();
        let b = SparseSolver.solve(&torus, &f).unwrap();
        let scale = a.displacement.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = a.displacement.values.iter().zip(&b.displacement.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-9 * scale, "{name}: displacement mismatch {diff:e} vs {scale:e}");
        assert_relative_eq!(a.energy, b.energy, max_relative = 1e-9);
    }
}

#[test]
fn solution_satisfies_real_space_equilibrium() {
    let mm = validate(&honeycomb(1.0, 0.02, 1.3)).unwrap();
    let torus = TorusMetastructure::scaled(&mm, 4).unwrap();
    let f = random_balanced(&torus, 11);
    let sol = FourierSolver.solve(&torus, &f).unwrap();
    let k = torus.sparse_stiffness().unwrap();
    let u = DVector::from_column_slice(&sol.displacement.values);
    let r = &k * &u - DVector::from_column_slice(&f.values);
    assert!(r.norm() <= 1e-10 * DVector::from_column_slice(&f.values).norm());
}

#[test]
fn honeycomb_mode_load_matches_mode_sum() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let load = LoadField::parse("1,0@0.2,0.1i,0.05; 0,1@0,0.3,-0.02i", 2, 3).unwrap();
    for p in [4, 8] {
        let torus = TorusMetastructure::scaled(&mm, p).unwrap();
        let sol = solve_equilibrium_torus(&torus, &load, &FourierSolver).unwrap();
        assert_relative_eq!(sol.energy, torus.mode_sum_energy(&load).unwrap(), max_relative = 1e-10);
        assert!(sol.energy < 0.0);
    }
}

#[test]
fn joint_forces_carry_volume_per_joint() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let torus = TorusMetastructure::new(&mm, &[3, 3], 1.0).unwrap();
    assert_relative_eq!(torus.joint_weight(), mm.volume() / 2.0, max_relative = 1e-15);
    let load = LoadField::parse("1,0@0.5,0,0", 2, 3).unwrap();
    let f = torus.apply_loads(&load).unwrap();
    let extent = torus.extent();
    for cell in 0..torus.cells() {
        for alpha in 0..2 {
            let x = torus.joint_position(cell, alpha).unwrap();
            let g = mm.basis().reciprocal_vector(0) / extent[0];
            let expected = mm.volume() / 2.0 * (g.dot(&x)).cos();
            assert_relative_eq!(f.value(cell, alpha)[0], expected, epsilon = 1e-12);
        }
    }
}

#[test]
fn unbalanced_forces_are_rejected() {
    let mm = chain(1.0, 1.0);
    let torus = TorusMetastructure::scaled(&mm, 4).unwrap();
    let mut f = LatticeFunction::zeros(&[4], 1, 1);
    f.values[0] = 1.0;
    for s in solver_registry() {
        assert!(matches!(s.solve(&torus, &f), Err(Error::UnbalancedLoad(_))));
    }
    // a mode that aliases onto k = 0 on a coarse torus
    let load = LoadField::parse("4@1", 1, 1).unwrap();
    assert!(matches!(torus.apply_loads(&load), Err(Error::UnbalancedLoad(_))));
}

#[test]
fn mechanism_is_reported_as_singular_mode() {
    let (mm, _) = build_validated("honeycomb", "EI=0").unwrap();
    let torus = TorusMetastructure::scaled(&mm, 4).unwrap();
    let f = random_balanced(&torus, 3);
    assert!(matches!(FourierSolver.solve(&torus, &f), Err(Error::SingularMode(_))));
    assert!(matches!(SparseSolver.solve(&torus, &f), Err(Error::SingularSystem(_))));
}

#[test]
fn energy_is_quadratic_in_load_scale() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let torus = TorusMetastructure::scaled(&mm, 6).unwrap();
    let load = LoadField::parse("1,1@0.2,0.1,0.05i", 2, 3).unwrap();
    let m1 = solve_equilibrium_torus(&torus, &load, &FourierSolver).unwrap().energy;
    for lambda in [0.5, 3.0, -2.0] {
        let m = solve_equilibrium_torus(&torus, &load.scaled(lambda), &FourierSolver).unwrap().energy;
        assert_relative_eq!(m, lambda * lambda * m1, max_relative = 1e-12);
    }
}

#[test]
fn energy_breakdown_adds_up() {
    let (mm, _) = build_validated("octet", "").unwrap();
    let torus = TorusMetastructure::scaled(&mm, 3).unwrap();
    let f = random_balanced(&torus, 5);
    let sol = FourierSolver.solve(&torus, &f).unwrap();
    let e = torus.energy_breakdown(&sol.displacement).unwrap();
    assert!(e.axial >= 0.0 && e.bending >= 0.0 && e.coupling >= 0.0);
    assert_relative_eq!(e.axial + e.bending + e.coupling, e.total, max_relative = 1e-14);
    // at equilibrium the stored energy is −m
    assert_relative_eq!(e.total, -sol.energy, max_relative = 1e-9);
}

#[test]
fn continuum_energy_of_chain_mode() {
    let (ea, l) = (2.0, 1.5);
    let mm = chain(ea, l);
    let q = Complex64::new(0.4, 0.3);
    let load = LoadField::new(1, 1, vec![LoadMode { index: vec![1], amplitude: vec![q] }]).unwrap();
    let k = 2.0 * PI / l;
    let expected = -l * q.norm_sqr() / (ea * k * k);
    let m0 = continuum_min_energy(&mm, &load, &LimitConfig::default()).unwrap();
    assert_relative_eq!(m0, expected, max_relative = 1e-8);
    assert_eq!(continuum_min_energy(&mm, &LoadField::default(), &LimitConfig::default()).unwrap(), 0.0);
}

#[test]
fn continuum_energy_of_two_bar_chain_uses_series_modulus() {
    let mm = validate(&two_bar_chain(1.0, 2.0, 1.0, 1.0)).unwrap();
    let load = LoadField::parse("1@0.5", 1, 1).unwrap();
    let k = 2.0 * PI / 2.0;
    let expected = -2.0 * 0.25 / (4.0 / 3.0 * k * k);
    let m0 = continuum_min_energy(&mm, &load, &LimitConfig::default()).unwrap();
    assert_relative_eq!(m0, expected, max_relative = 1e-8);
}

#[test]
fn continuum_energy_from_fitted_and_oracle_moduli() {
    let (mm, p) = build_validated("honeycomb", "").unwrap();
    let load = LoadField::parse("1,0@0.2,0.1i,0.05; 0,1@0,0.3,-0.02i", 2, 3).unwrap();
    let direct = continuum_min_energy(&mm, &load, &LimitConfig::default()).unwrap();
    let oracle = lattice_homog::catalog::honeycomb_moduli(p.get("EA"), p.get("EI"), p.get("L")).unwrap();
    let via = continuum_min_energy_from_moduli(&mm, &oracle, &load).unwrap();
    assert_relative_eq!(direct, via, max_relative = 1e-8);
}

#[test]
fn chain_convergence_is_second_order() {
    let mm = chain(1.0, 1.0);
    let load = LoadField::parse("1@0.5; 2@0.2i", 1, 1).unwrap();
    let eps = [0.25, 0.125, 0.0625, 0.03125];
    let table = convergence_study(&mm, &load, &eps, &FourierSolver, &LimitConfig::default()).unwrap();
    assert!(table.monotone_tail);
    assert!(table.rows.windows(2).all(|w| w[1].gap < w[0].gap));
    let last = table.rows.last().unwrap().slope.unwrap();
    assert!((last - 2.0).abs() < 0.05, "running slope {last}");
    let single = convergence_study(&mm, &load, &eps[..1], &FourierSolver, &LimitConfig::default()).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.slope.is_none() && single.rows[0].slope.is_none());
}

#[test]
fn bounded_chain_counts() {
    let mm = chain(1.0, 1.0);
    let s = build_bounded(&mm, &Domain::Box { lo: vec![0.0], hi: vec![5.0] }, 1.0).unwrap();
    assert_eq!((s.bar_count(), s.joint_count()), (5, 6));
    let empty = build_bounded(&mm, &Domain::Box { lo: vec![0.2], hi: vec![0.8] }, 1.0);
    assert!(matches!(empty, Err(Error::EmptyStructure)));
}

#[test]
fn bounded_bar_count_scales_with_volume() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let domain = Domain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
    let a = build_bounded(&mm, &domain, 0.05).unwrap().bar_count() as f64;
    let b = build_bounded(&mm, &domain, 0.025).unwrap().bar_count() as f64;
    assert!((b / a / 4.0 - 1.0).abs() < 0.1, "ratio {}", b / a);
}

#[test]
fn convex_domain_matches_equivalent_box() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let boxed = Domain::Box { lo: vec![0.0, 0.0], hi: vec![4.0, 3.0] };
    let convex = Domain::Convex {
        half_spaces: vec![(vec![1.0, 0.0], 4.0), (vec![0.0, 1.0], 3.0)],
        lo: vec![0.0, 0.0],
        hi: vec![10.0, 10.0],
    };
    let a = build_bounded(&mm, &boxed, 1.0).unwrap();
    let b = build_bounded(&mm, &convex, 1.0).unwrap();
    assert_eq!(a.bars(), b.bars());
}

#[test]
fn single_bar_elongation() {
    let (ea, l, force) = (3.0, 2.0, 0.7);
    let mm = chain(ea, l);
    let s = build_bounded(&mm, &Domain::Box { lo: vec![0.0], hi: vec![l] }, 1.0).unwrap();
    assert_eq!(s.bar_count(), 1);
    let mut f = DVector::zeros(2);
    f[s.joint_index(&[0], 0).unwrap()] = -force;
    f[s.joint_index(&[1], 0).unwrap()] = force;
    for policy in [ConstraintPolicy::Project, ConstraintPolicy::Pin(0)] {
        let sol = solve_equilibrium_bounded(&s, &f, policy).unwrap();
        let (a, b) = (s.joint_index(&[0], 0).unwrap(), s.joint_index(&[1], 0).unwrap());
        assert_relative_eq!(sol.displacement[b] - sol.displacement[a], force * l / ea, max_relative = 1e-12);
    }
    let uniform = DVector::from_element(2, 1.0);
    assert!(matches!(
        solve_equilibrium_bounded(&s, &uniform, ConstraintPolicy::Project),
        Err(Error::UnbalancedLoad(_))
    ));
}

#[test]
fn projected_solution_is_orthogonal_to_rigid_motions() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let s = build_bounded(&mm, &Domain::Box { lo: vec![0.0, -3.0], hi: vec![6.0, 3.0] }, 1.0).unwrap();
    let modes = s.rigid_modes().unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    let mut f = DVector::from_fn(s.dofs(), |_, _| rng.gen_range(-1.0..1.0));
    // remove the rigid components with a Gram matrix solve
    let r = nalgebra::DMatrix::from_columns(&modes);
    let c = (r.transpose() * &r).lu().solve(&(r.transpose() * &f)).unwrap();
    f -= &r * c;
    let sol = solve_equilibrium_bounded(&s, &f, ConstraintPolicy::Project).unwrap();
    for m in &modes {
        assert!(m.dot(&sol.displacement).abs() < 1e-9 * m.norm() * sol.displacement.norm());
    }
    let pinned = solve_equilibrium_bounded(&s, &f, ConstraintPolicy::Pin(3)).unwrap();
    assert_relative_eq!(pinned.energy, sol.energy, max_relative = 1e-9);
}

#[test]
fn bounded_mechanism_is_singular() {
    let (mm, _) = build_validated("honeycomb", "EI=0").unwrap();
    let s = build_bounded(&mm, &Domain::Box { lo: vec![0.0, -3.0], hi: vec![6.0, 3.0] }, 1.0).unwrap();
    let f = DVector::zeros(s.dofs());
    assert!(matches!(solve_equilibrium_bounded(&s, &f, ConstraintPolicy::Pin(0)), Err(Error::SingularSystem(_))));
}

#[test]
fn dipole_energy_matches_large_torus() {
    let mm = validate(&honeycomb(1.0, 0.01, 1.0)).unwrap();
    let p = 40usize;
    let torus = TorusMetastructure::new(&mm, &[p, p], 1.0).unwrap();
    let centre = [20i64, 20];
    let force = 0.1;
    let mut f = LatticeFunction::zeros(&[p, p], 2, 3);
    let cell = cell_flat_index(&[p, p], &centre);
    assert_eq!(cell_coordinates(&[p, p], cell), centre.to_vec());
    let i0 = f.index(cell, 0, 0);
    let i1 = f.index(cell, 1, 0);
    f.values[i0] = -force;
    f.values[i1] = force;
    let periodic = FourierSolver.solve(&torus, &f).unwrap().energy;

    let mid = mm.joint_position(&centre, 0).unwrap() + DVector::from_vec(vec![0.5, 0.0]);
    let r = 25.0;
    let domain = Domain::Box { lo: vec![mid[0] - r, mid[1] - r], hi: vec![mid[0] + r, mid[1] + r] };
    let s = build_bounded(&mm, &domain, 1.0).unwrap();
    let mut g = DVector::zeros(s.dofs());
    g[s.joint_index(&centre, 0).unwrap() * 3] = -force;
    g[s.joint_index(&centre, 1).unwrap() * 3] = force;
    let bounded = solve_equilibrium_bounded(&s, &g, ConstraintPolicy::Project).unwrap().energy;
    assert!((bounded / periodic - 1.0).abs() < 0.02, "bounded {bounded} vs torus {periodic}");
}
