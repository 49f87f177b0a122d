use lattice_homog::catalog::build_validated;
use lattice_homog::fourier::dispersion as dispersion_branches;
use lattice_homog::limit::LimitConfig;
use lattice_homog::moduli::{extract_effective_moduli, ModuliConfig};
use lattice_homog::report::{convergence_table, fmt_e12, moduli_json, moduli_table, Cell, Format, Table};
use lattice_homog::sim::{convergence_study, solver, solver_registry, LoadField, LoadMode};
use lattice_homog::{validate, Error, Metamaterial, MetamaterialSpec, Result};
use nalgebra::DVector;
use num_complex::Complex64;

use crate::json;
use crate::{Common, Outcome};

/// The lattice named by exactly one of `--lattice` / `--input`.
pub fn load_lattice(c: &Common) -> Result<(Metamaterial, String)> {
    let mm = match (&c.lattice, &c.input) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter("give exactly one of --lattice and --input".into()))
        }
        (None, None) => return Err(Error::InvalidParameter("a lattice is required (--lattice or --input)".into())),
        (Some(name), None) => (build_validated(name, c.param.as_deref().unwrap_or(""))?.0, name.clone()),
        (None, Some(path)) => {
            if c.param.is_some() {
                return Err(Error::InvalidParameter("--param applies only to --lattice".into()));
            }
            let text = std::fs::read_to_string(path)?;
            (validate(&MetamaterialSpec::from_json(&text)?)?, path.display().to_string())
        }
    };
    for w in mm.0.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(mm)
}

fn format_or(c: &Common, default: Format) -> Format {
    c.format.map(Format::from).unwrap_or(default)
}

fn limit_config(c: &Common) -> LimitConfig {
    LimitConfig { tol_extrap: c.tol_extrap, ..LimitConfig::default() }
}

pub fn describe(c: &Common) -> Result<Outcome> {
    let (mm, source) = load_lattice(c)?;
    let basis = mm.basis();
    let text = match format_or(c, Format::Json) {
        Format::Json => {
            let shifts = (0..mm.joint_count()).map(|a| mm.shift(a).map(json::vector)).collect::<Result<Vec<_>>>()?;
            let bars = mm.bars().iter().enumerate().map(|(beta, b)| {
                let endpoint = |r: &lattice_homog::lattice::JointRef| {
                    json::object(&[("joint", r.joint.to_string()), ("offset", json::ints(&r.offset))])
                };
                let s = &b.section;
                json::object(&[
                    ("index", beta.to_string()),
                    ("begin", endpoint(&b.begin)),
                    ("end", endpoint(&b.end)),
                    ("length", json::num(b.length)),
                    ("span", json::vector(&b.span)),
                    (
                        "section",
                        json::object(&[
                            ("EA", json::num(s.ea)),
                            ("GI1", json::num(s.gi1)),
                            ("EI2", json::num(s.ei2)),
                            ("EI3", json::num(s.ei3)),
                        ]),
                    ),
                    ("directors", json::columns(b.directors.matrix())),
                ])
            });
            let body = json::object(&[
                ("source", json::string(&source)),
                ("dimension", mm.dimension().to_string()),
                ("kinematics", json::string(mm.kinematics().name())),
                ("dofs_per_joint", mm.dofs_per_joint().to_string()),
                ("joint_classes", mm.joint_count().to_string()),
                ("bar_classes", mm.bar_count().to_string()),
                ("volume", json::num(mm.volume())),
                ("basis", json::columns(basis.matrix())),
                ("reciprocal", json::columns(basis.reciprocal())),
                ("shifts", json::array(shifts)),
                ("bars", json::array(bars)),
                ("warnings", json::array(mm.warnings().iter().map(|w| json::string(&w.to_string())))),
            ]);
            body + "\n"
        }
        Format::Csv => {
            let mut t = Table::new(&["quantity", "value"]);
            t.push(vec!["source".into(), source.as_str().into()]);
            t.push(vec!["dimension".into(), mm.dimension().into()]);
            t.push(vec!["kinematics".into(), mm.kinematics().name().into()]);
            t.push(vec!["dofs_per_joint".into(), mm.dofs_per_joint().into()]);
            t.push(vec!["joint_classes".into(), mm.joint_count().into()]);
            t.push(vec!["bar_classes".into(), mm.bar_count().into()]);
            t.push(vec!["volume".into(), mm.volume().into()]);
            for (beta, b) in mm.bars().iter().enumerate() {
                t.push(vec![format!("bar{beta}.length").into(), b.length.into()]);
            }
            for w in mm.warnings() {
                t.push(vec!["warning".into(), w.to_string().into()]);
            }
            t.to_csv()
        }
    };
    Ok(Outcome::ok(text))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("{what}: '{s}' is not a number"))))
        .collect()
}

fn default_kpath(n: usize) -> String {
    let point = |c: &[f64]| c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut corners = vec![vec![0.0; n]];
    for j in 0..n {
        let mut next = corners.last().unwrap().clone();
        next[j] = 0.5;
        corners.push(next);
    }
    if n > 1 {
        corners.push(vec![0.0; n]);
    }
    corners.iter().map(|c| point(c)).collect::<Vec<_>>().join(";")
}

/// Samples on the path through `waypoints`, uniform in the segment parameter.
fn sample_path(waypoints: &[Vec<f64>], resolution: usize) -> Vec<Vec<f64>> {
    let segments = waypoints.len() - 1;
    if segments == 0 || resolution == 1 {
        return vec![waypoints[0].clone()];
    }
    (0..resolution)
        .map(|i| {
            let t = segments as f64 * i as f64 / (resolution - 1) as f64;
            let s = (t.floor() as usize).min(segments - 1);
            let u = t - s as f64;
            waypoints[s].iter().zip(&waypoints[s + 1]).map(|(a, b)| a + u * (b - a)).collect()
        })
        .collect()
}

pub fn dispersion(c: &Common, kpath: Option<&str>, resolution: usize) -> Result<Outcome> {
    let (mm, _) = load_lattice(c)?;
    let n = mm.dimension();
    if resolution == 0 {
        return Err(Error::InvalidParameter("--resolution must be at least 1".into()));
    }
    let spec = kpath.map(str::to_string).unwrap_or_else(|| default_kpath(n));
    let waypoints = spec
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let c = parse_list(p, "--kpath")?;
            if c.len() == n {
                Ok(c)
            } else {
                Err(Error::InvalidParameter(format!("--kpath point '{p}' needs {n} dual coordinates")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if waypoints.is_empty() {
        return Err(Error::InvalidParameter("--kpath has no points".into()));
    }
    let duals = sample_path(&waypoints, resolution);
    let ks: Vec<DVector<f64>> = duals.iter().map(|d| mm.basis().from_dual_coordinates(d)).collect();
    let branches = dispersion_branches(&mm, &ks)?;

    let mut header: Vec<String> = vec!["sample".into()];
    header.extend((0..n).map(|j| format!("c{j}")));
    header.extend((0..n).map(|j| format!("k{j}")));
    header.extend((0..mm.dofs_per_cell()).map(|b| format!("branch{b}")));
    let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, ((d, k), ev)) in duals.iter().zip(&ks).zip(&branches).enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(d.iter().map(|x| Cell::from(*x)));
        row.extend(k.iter().map(|x| Cell::from(*x)));
        row.extend(ev.iter().map(|x| Cell::from(*x)));
        t.push(row);
    }
    Ok(Outcome::ok(t.render(format_or(c, Format::Csv))))
}

pub fn homogenize(c: &Common) -> Result<Outcome> {
    let (mm, _) = load_lattice(c)?;
    let cfg = ModuliConfig { limit: limit_config(c), tol_fit: c.tol_fit, ..ModuliConfig::default() };
    let m = extract_effective_moduli(&mm, &cfg)?;
    Ok(Outcome::ok(match format_or(c, Format::Json) {
        Format::Json => moduli_json(&m),
        Format::Csv => moduli_table(&m).to_csv(),
    }))
}

/// One mode per lattice axis, pushing along that axis.
fn default_load(mm: &Metamaterial) -> Result<LoadField> {
    let n = mm.dimension();
    let du = mm.dofs_per_joint();
    let modes = (0..n)
        .map(|j| {
            let mut index = vec![0i64; n];
            index[j] = 1;
            let mut amplitude = vec![Complex64::new(0.0, 0.0); du];
            amplitude[j] = Complex64::new(0.1, 0.0);
            LoadMode { index, amplitude }
        })
        .collect();
    LoadField::new(n, du, modes)
}

pub fn converge(c: &Common, epsilons: &str, load: Option<&str>, solver_name: &str) -> Result<Outcome> {
    let (mm, _) = load_lattice(c)?;
    let eps = parse_list(epsilons, "--epsilons")?;
    let load = match load {
        Some(text) => LoadField::parse(text, mm.dimension(), mm.dofs_per_joint())?,
        None => default_load(&mm)?,
    };
    let strategy = solver(solver_name).ok_or_else(|| {
        let known: Vec<&str> = solver_registry().iter().map(|s| s.name()).collect();
        Error::InvalidParameter(format!("unknown solver '{solver_name}' (known: {})", known.join(", ")))
    })?;
    let study = convergence_study(&mm, &load, &eps, strategy, &limit_config(c))?;
    let mut table = convergence_table(&study);
    if study.rows.len() == 1 {
        table.header.pop();
        for row in &mut table.rows {
            row.pop();
        }
    }
    if let Some(s) = study.slope {
        eprintln!("least-squares log-log slope: {}", fmt_e12(s));
    }
    if study.rows.len() >= 3 && !study.monotone_tail {
        eprintln!("warning: energy gaps do not decrease monotonically");
    }
    Ok(Outcome::ok(table.render(format_or(c, Format::Csv))))
}
