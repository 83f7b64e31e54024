//! Plain-text grid files.
//!
//! ```text
//! heightfield <rows> <cols> <cell_size> <origin_x> <origin_y>
//! <cols heights>            # one line per row, row 0 first
//! ```
//!
//! Traversability maps use the same layout with a `traversability` header,
//! the tile size in place of the cell size, and 0/1 entries. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{HeightField, TraversabilityMap};
use crate::error::{Error, Result};

fn write_grid<T: std::fmt::Display>(kind: &str, rows: usize, cols: usize, size: f64, origin: [f64; 2], values: &[T]) -> String {
    let mut out = format!("{kind} {rows} {cols} {size:?} {:?} {:?}\n", origin[0], origin[1]);
    for r in 0..rows {
        let row: Vec<String> = values[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_heightfield(path: &Path, field: &HeightField) -> Result<()> {
    let values: Vec<String> = field.heights.iter().map(|h| format!("{h:?}")).collect();
    std::fs::write(path, write_grid("heightfield", field.rows, field.cols, field.cell_size, field.origin, &values))?;
    Ok(())
}

pub fn write_traversability(path: &Path, map: &TraversabilityMap) -> Result<()> {
    std::fs::write(path, write_grid("traversability", map.rows, map.cols, map.tile_size, map.origin, &map.cells))?;
    Ok(())
}

struct Grid {
    rows: usize,
    cols: usize,
    size: f64,
    origin: [f64; 2],
    values: Vec<f64>,
}

fn parse_grid(text: &str, kind: &str) -> Result<Grid> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != kind {
        return Err(err(hline, format!("expected `{kind} <rows> <cols> <size> <origin_x> <origin_y>`")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| err(hline, format!("bad number `{s}`: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| err(hline, format!("bad count `{s}`: {e}")));
    let (rows, cols) = (int(fields[1])?, int(fields[2])?);
    let size = num(fields[3])?;
    let origin = [num(fields[4])?, num(fields[5])?];

    let mut values = Vec::with_capacity(rows * cols);
    let mut last = hline;
    for (ln, line) in lines {
        last = ln;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| err(ln, format!("bad value `{s}`: {e}"))))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(err(ln, format!("expected {cols} values, found {}", row.len())));
        }
        if values.len() / cols.max(1) >= rows {
            return Err(err(ln, format!("more than {rows} rows")));
        }
        values.extend(row);
    }
    if values.len() != rows * cols {
        return Err(err(last, format!("expected {rows} rows, found {}", values.len() / cols.max(1))));
    }
    Ok(Grid { rows, cols, size, origin, values })
}

pub fn read_heightfield(path: &Path) -> Result<HeightField> {
    let g = parse_grid(&std::fs::read_to_string(path)?, "heightfield")?;
    HeightField::new(g.origin, g.size, g.rows, g.cols, g.values)
}

pub fn read_traversability(path: &Path) -> Result<TraversabilityMap> {
    let g = parse_grid(&std::fs::read_to_string(path)?, "traversability")?;
    let cells = g
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(0u8),
            1.0 => Ok(1u8),
            _ => Err(Error::Parse { line: 2 + i / g.cols, msg: format!("non-binary value {v}") }),
        })
        .collect::<Result<Vec<_>>>()?;
    TraversabilityMap::new(g.rows, g.cols, g.size, g.origin, cells)
}
