//! Deterministic CSV/JSON output with fixed `%.12e` float formatting.

use std::fmt::Write;

use crate::error::Result;
use crate::fourier::{cell_coordinates, LatticeFunction};
use crate::moduli::EffectiveModuli;
use crate::sim::{ConvergenceTable, TorusMetastructure};

/// `%.12e`: 12 fractional digits, signed two-digit exponent.
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_e12(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) if t.contains([',', '"', '\n']) => format!("\"{}\"", t.replace('"', "\"\"")),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => fmt_e12(*x),
            Cell::Num(_) | Cell::Empty => "null".into(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => serde_json::to_string(t).expect("string serializes"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Rows with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Array of objects, keys in header order.
    pub fn to_json(&self) -> String {
        let mut out = String::from("[");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i == 0 { "\n  {" } else { ",\n  {" });
            for (j, (key, cell)) in self.header.iter().zip(row).enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}: {}", serde_json::to_string(key).expect("key"), cell.json());
            }
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n" } else { "\n]\n" });
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn json_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| format!("[{}]", (0..m.ncols()).map(|j| fmt_e12(m[(i, j)])).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Moduli as a JSON object with matrices in row-major nested arrays.
pub fn moduli_json(m: &EffectiveModuli) -> String {
    format!(
        "{{\n  \"dimension\": {},\n  \"symmetry\": \"{}\",\n  \"residual\": {},\n  \"condition\": {},\n  \"C\": {},\n  \"H\": {},\n  \"G\": {}\n}}\n",
        m.dimension,
        m.symmetry.as_str(),
        fmt_e12(m.residual),
        fmt_e12(m.condition),
        json_matrix(&m.c),
        json_matrix(&m.h),
        json_matrix(&m.g)
    )
}

/// One row per matrix entry: `block, i, j, value`.
pub fn moduli_table(m: &EffectiveModuli) -> Table {
    let mut t = Table::new(&["block", "i", "j", "value"]);
    for (name, mat) in [("C", &m.c), ("H", &m.h), ("G", &m.g)] {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                t.push(vec![name.into(), i.into(), j.into(), mat[(i, j)].into()]);
            }
        }
    }
    t.push(vec!["residual".into(), Cell::Empty, Cell::Empty, m.residual.into()]);
    t.push(vec!["condition".into(), Cell::Empty, Cell::Empty, m.condition.into()]);
    t.push(vec!["symmetry".into(), Cell::Empty, Cell::Empty, m.symmetry.as_str().into()]);
    t
}

pub fn convergence_table(c: &ConvergenceTable) -> Table {
    let mut t = Table::new(&["eps", "P", "discrete_energy", "continuum_energy", "gap", "running_slope"]);
    for r in &c.rows {
        t.push(vec![r.eps.into(), r.p.into(), r.discrete.into(), r.continuum.into(), r.gap.into(), r.slope.into()]);
    }
    t
}

/// `(l, α, x, v, θ)` for every torus joint.
pub fn displacement_table(torus: &TorusMetastructure, u: &LatticeFunction) -> Result<Table> {
    let mm = torus.metamaterial();
    let n = mm.dimension();
    let layout = mm.layout();
    let mut header: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
    header.push("alpha".into());
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..layout.deflections).map(|i| format!("v{i}")));
    header.extend((0..layout.rotations).map(|i| format!("theta{i}")));
    let mut t = Table { header, rows: Vec::new() };
    for cell in 0..u.cells() {
        let l = cell_coordinates(&u.periods, cell);
        for alpha in 0..u.joints {
            let x = torus.joint_position(cell, alpha)?;
            let mut row: Vec<Cell> = l.iter().map(|&v| Cell::Int(v)).collect();
            row.push(alpha.into());
            row.extend(x.iter().map(|&v| Cell::Num(v)));
            row.extend(u.value(cell, alpha).iter().map(|&v| Cell::Num(v)));
            t.push(row);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printf_style_exponent() {
        assert_eq!(fmt_e12(0.350535), "3.505350000000e-01");
        assert_eq!(fmt_e12(-1234.5), "-1.234500000000e+03");
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(1e-120), "1.000000000000e-120");
    }

    #[test]
    fn csv_and_json_render_the_same_rows() {
        let mut t = Table::new(&["name", "value", "slope"]);
        t.push(vec!["a,b".into(), 1.5.into(), Cell::Empty]);
        assert_eq!(t.to_csv(), "name,value,slope\n\"a,b\",1.500000000000e+00,\n");
        let parsed: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(parsed[0]["name"], "a,b");
        assert_eq!(parsed[0]["value"], 1.5);
        assert!(parsed[0]["slope"].is_null());
    }
}
