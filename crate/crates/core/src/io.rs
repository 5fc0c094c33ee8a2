//! Flat CSV layout for nodal fields: one row per node with coordinates,
//! boundary distance, then one column per field.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, ScalarField};

fn coord_headers(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

/// Writes `fields` (all on `mesh`) as columns after `x[, y], dist`.
pub fn write_fields<W: Write>(out: W, mesh: &Mesh, fields: &[(&str, &ScalarField)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = coord_headers(mesh.dim()).to_vec();
    header.push("dist");
    header.extend(fields.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for i in 0..mesh.num_nodes() {
        let x = mesh.coords(i);
        let mut row: Vec<String> = x[..mesh.dim()].iter().map(|v| v.to_string()).collect();
        row.push(mesh.dist()[i].to_string());
        row.extend(fields.iter().map(|(_, f)| f.values()[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the column `name` of a field CSV written on a mesh of the same shape.
/// Rows must follow the mesh's node order.
pub fn read_field<R: Read>(input: R, mesh: &Arc<Mesh>, name: &str) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let col = r
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse(format!("no column `{name}` in field file")))?;
    let mut values = Vec::with_capacity(mesh.num_nodes());
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad value in row {}", values.len() + 1)))?;
        values.push(v);
    }
    if values.len() != mesh.num_nodes() {
        return Err(Error::Parse(format!("field file has {} rows, mesh has {} nodes", values.len(), mesh.num_nodes())));
    }
    ScalarField::new(mesh.clone(), values)
}

/// Generic table writer: a header and rows of already-formatted cells.
pub fn write_table<W: Write, S: AsRef<str>>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}
