//! Binary field files: one text header line, then little-endian `f64`
//! values in node-major, component-fastest order.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn header(u: &Field) -> String {
    let g = u.grid();
    format!(
        "TORUSFIELD v1 p={} n={} N={} T={} layout=node-major\n",
        g.p(),
        u.n(),
        join(g.resolutions()),
        join(g.periods())
    )
}

pub fn encode_field(u: &Field) -> Vec<u8> {
    let head = header(u);
    let mut bytes = Vec::with_capacity(head.len() + 8 * u.values().len());
    bytes.extend_from_slice(head.as_bytes());
    for v in u.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn dump_field(u: &Field, path: &Path) -> Result<()> {
    fs::write(path, encode_field(u)).map_err(|e| Error::io(path, e))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',').map(|x| x.parse().ok()).collect()
}

pub fn decode_field(bytes: &[u8], path: &Path) -> Result<Field> {
    let bad = |reason: &str| Error::FieldFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line"))?;
    let head = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut tokens = head.split(' ');
    if tokens.next() != Some("TORUSFIELD") || tokens.next() != Some("v1") {
        return Err(bad("not a TORUSFIELD v1 file"));
    }
    let (mut p, mut n, mut res, mut periods, mut layout) = (None, None, None, None, None);
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| bad("malformed header token"))?;
        match key {
            "p" => p = value.parse::<usize>().ok(),
            "n" => n = value.parse::<usize>().ok(),
            "N" => res = parse_list::<usize>(value),
            "T" => periods = parse_list::<f64>(value),
            "layout" => layout = Some(value.to_string()),
            _ => return Err(bad(&format!("unknown header key {key}"))),
        }
    }
    let (Some(p), Some(n), Some(res), Some(periods)) = (p, n, res, periods) else {
        return Err(bad("header is missing p, n, N or T"));
    };
    if layout.as_deref() != Some("node-major") {
        return Err(bad("unsupported layout"));
    }
    let grid = TorusGrid::shared(p, &periods, &res)?;
    let body = &bytes[end + 1..];
    let expected = 8 * grid.node_count() * n;
    if body.len() != expected {
        return Err(bad(&format!(
            "expected {expected} data bytes, found {}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::from_values(&grid, n, values)
}

pub fn load_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes, path)
}

/// One row per node: coordinates, then components.
pub fn export_csv(u: &Field, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    let g = u.grid();
    let mut cols: Vec<String> = (0..g.p()).map(|a| format!("t{a}")).collect();
    cols.extend((0..u.n()).map(|i| format!("u{i}")));
    writeln!(w, "{}", cols.join(",")).map_err(io)?;
    let mut t = vec![0.0; g.p()];
    for node in 0..g.node_count() {
        g.coords_of(node, &mut t);
        let row: Vec<String> = t
            .iter()
            .chain(u.at(node))
            .map(|v| format!("{v:e}"))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_layout() {
        let g = TorusGrid::shared(1, &[1.0], &[4]).unwrap();
        let u = Field::zeros(&g, 1);
        let bytes = encode_field(&u);
        let head = "TORUSFIELD v1 p=1 n=1 N=4 T=1 layout=node-major\n";
        assert_eq!(bytes.len(), head.len() + 32);
        assert!(bytes.starts_with(head.as_bytes()));
        assert!(bytes[head.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn malformed_files_are_rejected() {
        let g = TorusGrid::shared(1, &[1.0], &[4]).unwrap();
        let bytes = encode_field(&Field::constant(&g, &[1.5]));
        let p = Path::new("mem");
        assert!(decode_field(&bytes[..bytes.len() - 1], p).is_err());
        assert!(decode_field(b"TORUSFIELD v2 p=1\n", p).is_err());
        assert!(decode_field(b"no newline", p).is_err());
        assert_eq!(decode_field(&bytes, p).unwrap().values(), &[1.5; 4]);
    }
}
