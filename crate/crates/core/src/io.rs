//! Grid CSV files and atomic report output.
//!
//! A grid file has the header `i,j,x,y,<columns>` and one row per node, in
//! row-major order over `i` then `j`. Values use 17 significant digits, so
//! binary64 data round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, StateTriple};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Pretty JSON with a trailing newline; field order follows the struct.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders named field groups, e.g. `[("g", &g), ("z", &z)]`, as a grid CSV.
pub fn grid_csv(columns: &[(&str, &GridField)]) -> Result<String> {
    let first = columns
        .first()
        .ok_or_else(|| Error::Parameter("a grid file needs at least one field".into()))?
        .1;
    for (_, f) in columns {
        if f.grid() != first.grid() {
            return Err(Error::Shape("grid file columns live on different grids".into()));
        }
    }
    let grid = first.grid();
    let mut out = String::from("i,j,x,y");
    for (name, f) in columns {
        for k in 1..=f.dim() {
            out.push_str(&format!(",{name}_{k}"));
        }
    }
    out.push('\n');
    for i in 0..grid.points() {
        for j in 0..grid.points() {
            out.push_str(&format!(
                "{i},{j},{},{}",
                format_value(grid.coord(i)),
                format_value(grid.coord(j))
            ));
            for (_, f) in columns {
                for v in f.at(i, j) {
                    out.push(',');
                    out.push_str(&format_value(*v));
                }
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// The solution file: `g`, `z`, `zx`, `zy` per node.
pub fn solution_csv(g: &GridField, state: &StateTriple) -> Result<String> {
    grid_csv(&[("g", g), ("z", &state.z), ("zx", &state.zx), ("zy", &state.zy)])
}

pub fn write_solution(path: &Path, g: &GridField, state: &StateTriple) -> Result<()> {
    write_atomic(path, solution_csv(g, state)?.as_bytes())
}

/// Reads the columns `<prefix>_1..<prefix>_n` of a grid file.
pub fn read_grid_columns(path: &Path, prefix: &str) -> Result<GridField> {
    let text = fs::read_to_string(path)?;
    parse_grid_columns(&text, prefix).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads a right-hand side file with columns `v_1..v_n`.
pub fn read_rhs_grid(path: &Path) -> Result<GridField> {
    read_grid_columns(path, "v")
}

pub fn parse_grid_columns(text: &str, prefix: &str) -> Result<GridField> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let fixed: Vec<&str> = headers.iter().take(4).collect();
    if fixed != ["i", "j", "x", "y"] {
        return Err(Error::Schema("grid file must start with the columns i,j,x,y".into()));
    }
    let mut columns = Vec::new();
    for k in 1.. {
        match headers.iter().position(|h| h == format!("{prefix}_{k}")) {
            Some(c) => columns.push(c),
            None => break,
        }
    }
    if columns.is_empty() {
        return Err(Error::Schema(format!("grid file has no `{prefix}_1` column")));
    }

    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |c: usize| Error::Schema(format!("row {}: column {} is malformed", row + 1, c + 1));
        let index = |c: usize| {
            record
                .get(c)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| bad(c))
        };
        nodes.push((index(0)?, index(1)?));
        for &c in &columns {
            values.push(
                record
                    .get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(c))?,
            );
        }
    }

    let rows = nodes.len();
    let side = (rows as f64).sqrt().round() as usize;
    if side * side != rows || side < 3 {
        return Err(Error::Schema(format!(
            "grid file has {rows} rows, not a square grid of at least 3x3 nodes"
        )));
    }
    for (row, &node) in nodes.iter().enumerate() {
        let expected = (row / side, row % side);
        if node != expected {
            return Err(Error::Schema(format!(
                "row {}: expected node ({}, {}), rows must be ordered by i then j",
                row + 1,
                expected.0,
                expected.1
            )));
        }
    }
    GridField::from_values(Grid::new(side - 1)?, columns.len(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::reconstruct_state;

    #[test]
    fn solution_round_trip_is_exact() {
        let grid = Grid::new(4).unwrap();
        let g = GridField::from_fn(grid, 2, |x, y, o| {
            o[0] = (x * 3.1).sin() / 7.0;
            o[1] = x * y + 1e-300;
        });
        let state = reconstruct_state(&g);
        let text = solution_csv(&g, &state).unwrap();
        assert!(text.starts_with("i,j,x,y,g_1,g_2,z_1,z_2,zx_1,zx_2,zy_1,zy_2\n"));
        assert_eq!(parse_grid_columns(&text, "g").unwrap(), g);
        assert_eq!(parse_grid_columns(&text, "zx").unwrap(), state.zx);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(parse_grid_columns("a,b\n1,2\n", "v"), Err(Error::Schema(_))));
        let grid = Grid::new(2).unwrap();
        let v = GridField::constant(grid, &[1.0]);
        let text = grid_csv(&[("v", &v)]).unwrap();
        assert!(matches!(parse_grid_columns(&text, "g"), Err(Error::Schema(_))));
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_grid_columns(&truncated, "v"), Err(Error::Schema(_))));
        let swapped = text.replacen("0,1,", "9,1,", 1);
        assert!(matches!(parse_grid_columns(&swapped, "v"), Err(Error::Schema(_))));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_json(&path, &serde_json::json!({"a": 1})).unwrap();
        write_json(&path, &serde_json::json!({"a": 2})).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "{\n  \"a\": 2\n}\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
