//! Point and edge files.
//!
//! * CSV points: one point per line, comma-separated decimals, no header.
//!   The first non-empty line fixes the dimension.
//! * Binary points (little-endian): `b"EMST"`, `u32` version = 1, `u32` n,
//!   `u32` d, `u32` bytes per scalar (4 or 8), then `n * d` scalars,
//!   row-major.
//! * Edges: one `u,v,weight` line per edge.
//!
//! The path `-` stands for stdin/stdout.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{EmstError, Result};
use crate::geometry::{with_points, PointSet, SUPPORTED_DIMS};
use crate::mst::WeightedEdge;

const MAGIC: &[u8; 4] = b"EMST";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Bin,
}

impl Format {
    /// Guesses from the extension: `.bin` and `.emst` are binary.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "emst") => Format::Bin,
            _ => Format::Csv,
        }
    }
}

fn open_read(path: &Path) -> Result<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        Ok(Box::new(File::open(path)?))
    }
}

fn open_write(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(File::create(path)?))
    }
}

pub fn read_points(path: &Path, format: Format) -> Result<PointSet> {
    let reader = open_read(path)?;
    match format {
        Format::Csv => read_csv(BufReader::new(reader)),
        Format::Bin => read_bin(reader),
    }
}

pub fn write_points(path: &Path, points: &PointSet, format: Format) -> Result<()> {
    let mut w = BufWriter::new(open_write(path)?);
    match format {
        Format::Csv => write_csv(&mut w, points)?,
        Format::Bin => write_bin(&mut w, points)?,
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<PointSet> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let d = *dim.get_or_insert(fields.len());
        if !SUPPORTED_DIMS.contains(&d) {
            return Err(EmstError::UnsupportedDimension(d));
        }
        if fields.len() != d {
            return Err(EmstError::Parse {
                line: line_no,
                message: format!("expected {d} values, found {}", fields.len()),
            });
        }
        for f in fields {
            let x: f32 = f
                .parse()
                .map_err(|e| EmstError::Parse { line: line_no, message: format!("{f:?}: {e}") })?;
            if !x.is_finite() {
                return Err(EmstError::Parse { line: line_no, message: format!("non-finite value {f:?}") });
            }
            coords.push(x);
        }
    }
    // An empty file has no dimension; call it 2D.
    PointSet::from_flat(dim.unwrap_or(2), &coords)
}

pub fn write_csv<W: Write>(w: &mut W, points: &PointSet) -> io::Result<()> {
    with_points!(points, |pts| {
        for p in pts {
            // `{}` prints the shortest text that parses back to the same f32.
            let fields: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
    });
    Ok(())
}

fn bad_bin(message: impl Into<String>) -> EmstError {
    EmstError::InvalidBinary(message.into())
}

pub fn read_bin<R: Read>(mut reader: R) -> Result<PointSet> {
    let mut header = [0u8; HEADER_LEN];
    reader.read_exact(&mut header).map_err(|_| bad_bin("truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(bad_bin("bad magic"));
    }
    let word = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap());
    let (version, n, d, precision) = (word(0), word(1) as usize, word(2) as usize, word(3));
    if version != VERSION {
        return Err(bad_bin(format!("unsupported version {version}")));
    }
    if !SUPPORTED_DIMS.contains(&d) {
        return Err(EmstError::UnsupportedDimension(d));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let scalars = n * d;
    let coords: Vec<f32> = match precision {
        4 if body.len() == scalars * 4 => {
            body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
        }
        8 if body.len() == scalars * 8 => {
            body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32).collect()
        }
        4 | 8 => {
            return Err(bad_bin(format!(
                "{n} points of dimension {d} need {} bytes, found {}",
                scalars * precision as usize,
                body.len()
            )))
        }
        p => return Err(bad_bin(format!("unsupported scalar width {p}"))),
    };
    PointSet::from_flat(d, &coords)
}

pub fn write_bin<W: Write>(w: &mut W, points: &PointSet) -> io::Result<()> {
    w.write_all(MAGIC)?;
    for word in [VERSION, points.len() as u32, points.dim() as u32, 4] {
        w.write_all(&word.to_le_bytes())?;
    }
    for c in points.to_flat() {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

/// Writes `u,v,weight` lines in the given order.
pub fn write_edges<W: Write>(w: &mut W, edges: &[WeightedEdge]) -> io::Result<()> {
    for e in edges {
        writeln!(w, "{},{},{}", e.u, e.v, e.weight)?;
    }
    Ok(())
}

pub fn read_edges<R: BufRead>(reader: R) -> Result<Vec<WeightedEdge>> {
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| EmstError::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [u, v, w] = fields[..] else {
            return Err(bad(format!("expected u,v,weight, found {line:?}")));
        };
        let u: u32 = u.parse().map_err(|e| bad(format!("{u:?}: {e}")))?;
        let v: u32 = v.parse().map_err(|e| bad(format!("{v:?}: {e}")))?;
        let w: f64 = w.parse().map_err(|e| bad(format!("{w:?}: {e}")))?;
        if u == v || !(w >= 0.0 && w.is_finite()) {
            return Err(bad(format!("invalid edge {line:?}")));
        }
        edges.push(WeightedEdge::new(u, v, w));
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_points() {
        let ps = read_csv("0,0\n3,4\n".as_bytes()).unwrap();
        assert_eq!(ps.dim(), 2);
        assert_eq!(ps.to_flat(), vec![0.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match read_csv("0,0\n1,2,3\n".as_bytes()) {
            Err(EmstError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_csv("0,0\n\n1,x\n".as_bytes()) {
            Err(EmstError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv("1,2,3,4\n".as_bytes()), Err(EmstError::UnsupportedDimension(4))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ps = PointSet::new_3d(vec![[0.1, -1e-7, 3.4028235e38], [1.0 / 3.0, 2.5, -0.0]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ps).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), ps);
    }

    #[test]
    fn bin_three_points() {
        let ps = PointSet::new_2d(vec![[0.1, 0.2], [-3.5, 1e-30], [7.0, 8.0]]).unwrap();
        let mut buf = Vec::new();
        write_bin(&mut buf, &ps).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 3 * 2 * 4);
        assert_eq!(&buf[..4], b"EMST");
        let back = read_bin(&buf[..]).unwrap();
        assert_eq!((back.len(), back.dim()), (3, 2));
        assert_eq!(back, ps);
    }

    #[test]
    fn bin_double_precision_is_read() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"EMST");
        for w in [1u32, 1, 3, 8] {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for x in [0.5f64, -2.0, 8.25] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        assert_eq!(read_bin(&buf[..]).unwrap().to_flat(), vec![0.5, -2.0, 8.25]);
    }

    #[test]
    fn bin_rejects_damage() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let mut buf = Vec::new();
        write_bin(&mut buf, &ps).unwrap();
        assert!(read_bin(&buf[..buf.len() - 1]).is_err());
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(read_bin(&wrong[..]).is_err());
        let mut wrong = buf.clone();
        wrong[12] = 5;
        assert!(matches!(read_bin(&wrong[..]), Err(EmstError::UnsupportedDimension(5))));
    }

    #[test]
    fn edges_round_trip() {
        let edges = vec![WeightedEdge::new(0, 1, 0.1), WeightedEdge::new(2, 5, 1.0 / 3.0)];
        let mut buf = Vec::new();
        write_edges(&mut buf, &edges).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next(), Some("0,1,0.1"));
        assert_eq!(read_edges(&buf[..]).unwrap(), edges);
        assert!(read_edges("1,1,0\n".as_bytes()).is_err());
    }
}
