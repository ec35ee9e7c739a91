//! File output: legacy VTK snapshots, CSV error tables, run summaries, and
//! the flat `key = value` configuration format.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::timestep::Method;

/// One row of an error table.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub method: Method,
    /// Element count.
    pub n_elements: usize,
    pub dt: f64,
    pub eps: f64,
    /// H¹-seminorm error, or the seminorm when there is no exact solution.
    pub h1: f64,
    pub seconds: f64,
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Legacy ASCII VTK unstructured grid with the point field `u`.
pub fn write_vtk(mesh: &TriMesh, u: &[f64], path: &Path) -> Result<()> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} vertices",
            u.len(),
            mesh.n_vertices()
        )));
    }
    write_file(path, |w| {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "mmsupg solution")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", mesh.n_vertices())?;
        for p in mesh.vertices() {
            writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y)?;
        }
        let ne = mesh.n_elements();
        writeln!(w, "CELLS {} {}", ne, 4 * ne)?;
        for t in mesh.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {ne}")?;
        for _ in 0..ne {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        writeln!(w, "SCALARS u double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in u {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    })
}

/// Contents of a legacy VTK file written by [`write_vtk`].
#[derive(Clone, Debug, PartialEq)]
pub struct VtkData {
    pub points: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub cell_types: Vec<u8>,
    pub u: Vec<f64>,
}

/// Reads back the subset of legacy VTK produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |what: &str| Error::Config(format!("{}: malformed VTK ({what})", path.display()));
    let mut tokens = text.lines().skip(4).flat_map(str::split_whitespace);
    let mut next = |what: &str| tokens.next().ok_or_else(|| bad(what));
    let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
    let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| bad(what));

    if next("POINTS")? != "POINTS" {
        return Err(bad("POINTS"));
    }
    let np = int(next("count")?, "count")?;
    next("type")?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        let x = num(next("x")?, "x")?;
        let y = num(next("y")?, "y")?;
        num(next("z")?, "z")?;
        points.push(Point::new(x, y));
    }
    if next("CELLS")? != "CELLS" {
        return Err(bad("CELLS"));
    }
    let nc = int(next("count")?, "count")?;
    next("size")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        if int(next("arity")?, "arity")? != 3 {
            return Err(bad("non-triangle cell"));
        }
        cells.push([
            int(next("v")?, "v")?,
            int(next("v")?, "v")?,
            int(next("v")?, "v")?,
        ]);
    }
    if next("CELL_TYPES")? != "CELL_TYPES" {
        return Err(bad("CELL_TYPES"));
    }
    int(next("count")?, "count")?;
    let mut cell_types = Vec::with_capacity(nc);
    for _ in 0..nc {
        cell_types.push(next("type")?.parse::<u8>().map_err(|_| bad("type"))?);
    }
    for expected in ["POINT_DATA"] {
        if next(expected)? != expected {
            return Err(bad(expected));
        }
    }
    int(next("count")?, "count")?;
    for _ in 0..6 {
        next("header")?;
    }
    let mut u = Vec::with_capacity(np);
    for _ in 0..np {
        u.push(num(next("u")?, "u")?);
    }
    Ok(VtkData {
        points,
        cells,
        cell_types,
        u,
    })
}

/// Sorts rows into table order: method, then ascending element count.
pub fn sort_results(results: &mut [ExperimentResult]) {
    results.sort_by(|a, b| {
        (a.method, a.n_elements)
            .cmp(&(b.method, b.n_elements))
            .then(a.dt.total_cmp(&b.dt))
    });
}

/// Writes `method,N,dt,eps,h1,seconds` rows in table order.
pub fn write_csv(results: &[ExperimentResult], path: &Path) -> Result<()> {
    let mut rows = results.to_vec();
    sort_results(&mut rows);
    write_file(path, |w| {
        writeln!(w, "method,N,dt,eps,h1,seconds")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{:.10e},{:.3}",
                r.method, r.n_elements, r.dt, r.eps, r.h1, r.seconds
            )?;
        }
        Ok(())
    })
}

/// Plain `key: value` summary of a run.
pub fn write_summary(entries: &[(&str, String)], path: &Path) -> Result<()> {
    write_file(path, |w| {
        for (k, v) in entries {
            writeln!(w, "{k}: {v}")?;
        }
        Ok(())
    })
}

/// Parses flat `key = value` text. Blank lines and `#` comments are
/// skipped; keys are case-sensitive and may not repeat.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got {raw:?}",
                i + 1
            ))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {k:?}",
                i + 1
            )));
        }
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_two_triangles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vtk");
        let mesh = TriMesh::uniform(1).unwrap();
        write_vtk(&mesh, &[0.0, 0.1, 0.2, 1.0 / 3.0], &path).unwrap();
        let data = read_vtk(&path).unwrap();
        assert_eq!(data.points.len(), 4);
        assert_eq!(data.cells.len(), 2);
        assert_eq!(data.cell_types, vec![5, 5]);
        assert_eq!(data.points, mesh.vertices());
        assert_eq!(data.u[3], 1.0 / 3.0);
        assert!(matches!(
            write_vtk(&mesh, &[0.0], &path),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&[], &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "method,N,dt,eps,h1,seconds\n"
        );
        let row = |method, n_elements| ExperimentResult {
            method,
            n_elements,
            dt: 1e-3,
            eps: 1e-4,
            h1: 1.5,
            seconds: 0.0,
        };
        write_csv(&[row(Method::MmSupg, 512)], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
        let rows = [
            row(Method::MmSupg, 512),
            row(Method::FmFem, 2048),
            row(Method::MmFem, 512),
            row(Method::FmFem, 512),
            row(Method::FmSupg, 512),
        ];
        write_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let order: Vec<(&str, &str)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut f = l.split(',');
                (f.next().unwrap(), f.next().unwrap())
            })
            .collect();
        assert_eq!(
            order,
            [
                ("FM-FEM", "512"),
                ("FM-FEM", "2048"),
                ("FM-SUPG", "512"),
                ("MM-FEM", "512"),
                ("MM-SUPG", "512")
            ]
        );
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_config("# comment\nmethod = mm-supg\n\n dt=0.001 # trailing\n").unwrap();
        assert_eq!(cfg["method"], "mm-supg");
        assert_eq!(cfg["dt"], "0.001");
        assert!(parse_config("novalue").is_err());
        assert!(parse_config("a = 1\na = 2").is_err());
        assert!(parse_config(" = 2").is_err());
    }
}
