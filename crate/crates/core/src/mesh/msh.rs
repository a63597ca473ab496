//! Gmsh MSH 2.2 ASCII reader, restricted to planar triangles and quadrangles.
//!
//! Line elements (type 1) become boundary markers using their physical tag;
//! points (type 15) are skipped. Anything else is rejected.

use std::collections::HashMap;

use super::{LoadOptions, MarkerDecl, PolyMesh};
use crate::geometry::Point;
use crate::{Error, Result};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn load_msh2(text: &str, opts: LoadOptions) -> Result<PolyMesh> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let mut version_seen = false;
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut lines_1d: Vec<(u64, u64, i32)> = Vec::new();

    let mut i = 0;
    while i < lines.len() {
        let (ln, l) = lines[i];
        match l {
            "$MeshFormat" => {
                let (ln, fmt) = *lines.get(i + 1).ok_or_else(|| perr(ln, "truncated $MeshFormat"))?;
                let toks: Vec<&str> = fmt.split_whitespace().collect();
                let version = *toks.first().ok_or_else(|| perr(ln, "missing version"))?;
                if !version.starts_with("2.") {
                    return Err(Error::UnsupportedFormat(format!(
                        "MSH version {version} (only 2.2 ASCII is supported)"
                    )));
                }
                if toks.get(1) != Some(&"0") {
                    return Err(Error::UnsupportedFormat("binary MSH files".into()));
                }
                version_seen = true;
                i += 2;
            }
            "$Nodes" => {
                let (ln, cnt) = *lines.get(i + 1).ok_or_else(|| perr(ln, "truncated $Nodes"))?;
                let n: usize = cnt.parse().map_err(|_| perr(ln, "invalid node count"))?;
                for k in 0..n {
                    let (ln, row) = *lines
                        .get(i + 2 + k)
                        .ok_or_else(|| perr(ln, "truncated node list"))?;
                    let toks: Vec<&str> = row.split_whitespace().collect();
                    if toks.len() < 3 {
                        return Err(perr(ln, "node line needs 'id x y [z]'"));
                    }
                    let id: u64 = toks[0].parse().map_err(|_| perr(ln, "invalid node id"))?;
                    let x: f64 = toks[1].parse().map_err(|_| perr(ln, "invalid coordinate"))?;
                    let y: f64 = toks[2].parse().map_err(|_| perr(ln, "invalid coordinate"))?;
                    node_index.insert(id, vertices.len());
                    vertices.push(Point::new(x, y));
                }
                i += 2 + n;
            }
            "$Elements" => {
                let (ln, cnt) = *lines.get(i + 1).ok_or_else(|| perr(ln, "truncated $Elements"))?;
                let n: usize = cnt.parse().map_err(|_| perr(ln, "invalid element count"))?;
                for k in 0..n {
                    let (ln, row) = *lines
                        .get(i + 2 + k)
                        .ok_or_else(|| perr(ln, "truncated element list"))?;
                    let toks: Vec<u64> = row
                        .split_whitespace()
                        .map(|t| t.parse::<u64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(ln, "invalid integer in element line"))?;
                    if toks.len() < 3 {
                        return Err(perr(ln, "element line too short"));
                    }
                    let etype = toks[1];
                    let ntags = toks[2] as usize;
                    let nodes = toks.get(3 + ntags..).ok_or_else(|| perr(ln, "missing element nodes"))?;
                    let physical = if ntags > 0 { toks[3] as i32 } else { 0 };
                    let expected = match etype {
                        1 => 2,
                        2 => 3,
                        3 => 4,
                        15 => 1,
                        other => {
                            return Err(Error::UnsupportedFormat(format!(
                                "MSH element type {other} (line {ln})"
                            )))
                        }
                    };
                    if nodes.len() != expected {
                        return Err(perr(ln, format!("element type {etype} needs {expected} nodes")));
                    }
                    match etype {
                        1 => lines_1d.push((nodes[0], nodes[1], physical)),
                        2 | 3 => {
                            let cell = nodes
                                .iter()
                                .map(|id| {
                                    node_index
                                        .get(id)
                                        .copied()
                                        .ok_or_else(|| perr(ln, format!("unknown node {id}")))
                                })
                                .collect::<Result<Vec<_>>>()?;
                            cells.push(cell);
                        }
                        _ => {}
                    }
                }
                i += 2 + n;
            }
            _ => i += 1,
        }
    }
    if !version_seen {
        return Err(Error::UnsupportedFormat("missing $MeshFormat section".into()));
    }

    // Drop vertices only used by geometry points or lines.
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut used = Vec::new();
    for cell in &mut cells {
        for v in cell.iter_mut() {
            if remap[*v] == usize::MAX {
                remap[*v] = used.len();
                used.push(vertices[*v]);
            }
            *v = remap[*v];
        }
    }
    let mut markers: Vec<MarkerDecl> = Vec::with_capacity(lines_1d.len());
    for (a, b, tag) in lines_1d {
        let (Some(&a), Some(&b)) = (node_index.get(&a), node_index.get(&b)) else {
            return Err(Error::Topology("line element references unknown node".into()));
        };
        if remap[a] != usize::MAX && remap[b] != usize::MAX {
            markers.push((remap[a], remap[b], tag));
        }
    }
    PolyMesh::from_parts(used, cells, &markers, opts)
}
