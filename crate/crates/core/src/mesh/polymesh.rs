//! The POLYMESH text format.
//!
//! ```text
//! polymesh 1
//! <nv>
//! x y            (nv lines)
//! <nc>
//! k i1 ... ik    (nc lines, 0-based, counter-clockwise)
//! <nb>           (optional)
//! i j marker     (nb lines)
//! ```
//!
//! `#` starts a comment anywhere on a line; blank lines are ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{LoadOptions, MarkerDecl, PolyMesh};
use crate::geometry::Point;
use crate::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
                .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
                .filter(|(_, toks)| !toks.is_empty()),
        );
        Lines {
            inner: it.peekable(),
            last_line: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((line, toks)) => {
                self.last_line = line;
                Ok((line, toks))
            }
            None => Err(Error::Parse {
                line: self.last_line + 1,
                msg: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn is_done(&mut self) -> bool {
        self.inner.peek().is_none()
    }
}

fn parse<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} '{tok}'"),
    })
}

fn count(lines: &mut Lines<'_>, what: &str) -> Result<usize> {
    let (line, toks) = lines.next(what)?;
    if toks.len() != 1 {
        return Err(Error::Parse {
            line,
            msg: format!("expected a single {what}"),
        });
    }
    parse(toks[0], line, what)
}

/// Parses and validates a mesh in the POLYMESH format.
pub fn load_polymesh(text: &str, opts: LoadOptions) -> Result<PolyMesh> {
    let mut lines = Lines::new(text);
    let (line, header) = lines.next("header")?;
    if header != ["polymesh", "1"] {
        return Err(Error::Parse {
            line,
            msg: "expected header 'polymesh 1'".into(),
        });
    }

    let nv = count(&mut lines, "vertex count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = lines.next("vertex")?;
        if toks.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("vertex line needs 2 coordinates, found {}", toks.len()),
            });
        }
        let x: f64 = parse(toks[0], line, "coordinate")?;
        let y: f64 = parse(toks[1], line, "coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "non-finite coordinate".into(),
            });
        }
        vertices.push(Point::new(x, y));
    }

    let nc = count(&mut lines, "cell count")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, toks) = lines.next("cell")?;
        let k: usize = parse(toks[0], line, "cell size")?;
        if toks.len() != k + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("cell declares {k} vertices but lists {}", toks.len() - 1),
            });
        }
        let cell = toks[1..]
            .iter()
            .map(|t| {
                let v: usize = parse(t, line, "vertex index")?;
                if v >= nv {
                    return Err(Error::Parse {
                        line,
                        msg: format!("vertex index {v} out of range (nv = {nv})"),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(cell);
    }

    let mut markers: Vec<MarkerDecl> = Vec::new();
    if !lines.is_done() {
        let nb = count(&mut lines, "boundary marker count")?;
        for _ in 0..nb {
            let (line, toks) = lines.next("boundary marker")?;
            if toks.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: "boundary marker line must be 'i j marker'".into(),
                });
            }
            markers.push((
                parse(toks[0], line, "vertex index")?,
                parse(toks[1], line, "vertex index")?,
                parse(toks[2], line, "marker")?,
            ));
        }
        if !lines.is_done() {
            let (line, _) = lines.next("end of input")?;
            return Err(Error::Parse {
                line,
                msg: "trailing content after boundary markers".into(),
            });
        }
    }

    PolyMesh::from_parts(vertices, cells, &markers, opts)
}

pub(super) fn write_polymesh(mesh: &PolyMesh) -> String {
    let mut out = String::new();
    out.push_str("polymesh 1\n");
    let _ = writeln!(out, "{}", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
    }
    let _ = writeln!(out, "{}", mesh.num_cells());
    for cell in mesh.cells() {
        let _ = write!(out, "{}", cell.len());
        for v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let marked: Vec<_> = mesh
        .edges()
        .iter()
        .filter(|e| e.is_boundary() && e.marker != 0)
        .collect();
    if !marked.is_empty() {
        let _ = writeln!(out, "{}", marked.len());
        for e in marked {
            let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.marker);
        }
    }
    out
}
