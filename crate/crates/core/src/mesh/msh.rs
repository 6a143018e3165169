//! Gmsh MSH 4.1 ASCII reading and writing.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Cells, Mesh, MeshError, Point};

const TET4: i64 = 4;
const TET10: i64 = 11;
/// Points, lines, and surface triangles are accepted and skipped.
const IGNORED: [i64; 5] = [15, 1, 8, 2, 9];

/// Gmsh lists the last two midsides of a 10-node tet on edges (2,3) then
/// (1,3); canonical order is (1,3) then (2,3). The swap is its own inverse.
const GMSH_TET10: [usize; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 9, 8];

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-empty line, trimmed.
    fn next_line(&mut self) -> Option<&'a str> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str, MeshError> {
        self.next_line()
            .ok_or_else(|| MeshError::malformed(self.last, format!("unexpected end of file, expected {what}")))
    }

    fn numbers<T: std::str::FromStr>(&mut self, what: &str) -> Result<Vec<T>, MeshError> {
        let line = self.expect_line(what)?;
        line.split_whitespace()
            .map(|t| t.parse::<T>())
            .collect::<Result<Vec<T>, _>>()
            .map_err(|_| MeshError::malformed(self.last, format!("bad number in {what}: '{line}'")))
    }

    fn fixed<T: std::str::FromStr + Copy>(&mut self, what: &str, n: usize) -> Result<Vec<T>, MeshError> {
        let v = self.numbers::<T>(what)?;
        if v.len() < n {
            return Err(MeshError::malformed(self.last, format!("{what}: expected {n} fields, got {}", v.len())));
        }
        Ok(v)
    }

    fn expect_end(&mut self, section: &str) -> Result<(), MeshError> {
        let line = self.expect_line(section)?;
        if line != format!("$End{section}") {
            return Err(MeshError::malformed(self.last, format!("expected $End{section}, found '{line}'")));
        }
        Ok(())
    }
}

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text)
}

pub fn parse_msh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let mut format_seen = false;
    let mut nodes: Option<(Vec<Point>, HashMap<u64, usize>)> = None;
    let mut cells: Option<Cells> = None;

    while let Some(line) = lines.next_line() {
        let Some(section) = line.strip_prefix('$') else {
            return Err(MeshError::malformed(lines.last, format!("expected a section header, found '{line}'")));
        };
        match section {
            "MeshFormat" => {
                let header = lines.expect_line("format header")?;
                let fields: Vec<&str> = header.split_whitespace().collect();
                if fields.len() < 3 || !fields[0].starts_with("4.1") {
                    return Err(MeshError::malformed(lines.last, format!("unsupported format '{header}'")));
                }
                if fields[1] != "0" {
                    return Err(MeshError::malformed(lines.last, "binary MSH files are not supported"));
                }
                lines.expect_end("MeshFormat")?;
                format_seen = true;
            }
            "Nodes" => {
                if !format_seen {
                    return Err(MeshError::malformed(lines.last, "$Nodes before $MeshFormat"));
                }
                nodes = Some(read_nodes(&mut lines)?);
                lines.expect_end("Nodes")?;
            }
            "Elements" => {
                let Some((_, tags)) = nodes.as_ref() else {
                    return Err(MeshError::malformed(lines.last, "$Elements before $Nodes"));
                };
                cells = Some(read_elements(&mut lines, tags)?);
                lines.expect_end("Elements")?;
            }
            other => {
                let end = format!("$End{other}");
                loop {
                    let l = lines.expect_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
        }
    }
    let (points, _) = nodes.ok_or_else(|| MeshError::malformed(lines.last, "missing $Nodes section"))?;
    let cells = cells.ok_or_else(|| MeshError::malformed(lines.last, "missing $Elements section"))?;
    if cells.is_empty() {
        return Err(MeshError::malformed(lines.last, "no tetrahedral elements"));
    }
    Mesh::new(points, cells)
}

fn read_nodes(lines: &mut Lines) -> Result<(Vec<Point>, HashMap<u64, usize>), MeshError> {
    let header = lines.fixed::<u64>("$Nodes header", 4)?;
    let (blocks, total) = (header[0], header[1] as usize);
    let mut points = Vec::with_capacity(total);
    let mut tags = HashMap::with_capacity(total);
    for _ in 0..blocks {
        let b = lines.fixed::<u64>("node block header", 4)?;
        let (parametric, count) = (b[2], b[3] as usize);
        let mut block_tags = Vec::with_capacity(count);
        for _ in 0..count {
            let t = lines.fixed::<u64>("node tag", 1)?;
            block_tags.push(t[0]);
        }
        for tag in block_tags {
            let xyz = lines.fixed::<f64>("node coordinates", 3)?;
            if parametric == 0 && xyz.len() != 3 {
                return Err(MeshError::malformed(lines.last, "node line must hold exactly x y z"));
            }
            if tags.insert(tag, points.len()).is_some() {
                return Err(MeshError::malformed(lines.last, format!("duplicate node tag {tag}")));
            }
            points.push(Point::new(xyz[0], xyz[1], xyz[2]));
        }
    }
    if points.len() != total {
        return Err(MeshError::malformed(
            lines.last,
            format!("header declares {total} nodes, blocks hold {}", points.len()),
        ));
    }
    Ok((points, tags))
}

fn read_elements(lines: &mut Lines, tags: &HashMap<u64, usize>) -> Result<Cells, MeshError> {
    let header = lines.fixed::<u64>("$Elements header", 4)?;
    let (blocks, total) = (header[0], header[1] as usize);
    let mut linear: Vec<[usize; 4]> = Vec::new();
    let mut quadratic: Vec<[usize; 10]> = Vec::new();
    let mut seen = 0usize;
    for _ in 0..blocks {
        let b = lines.fixed::<i64>("element block header", 4)?;
        let (kind, count) = (b[2], b[3].max(0) as usize);
        let width = match kind {
            TET4 => 4,
            TET10 => 10,
            k if IGNORED.contains(&k) => 0,
            k => return Err(MeshError::UnsupportedElementType(k)),
        };
        for _ in 0..count {
            let fields = lines.numbers::<u64>("element")?;
            seen += 1;
            if width == 0 {
                continue;
            }
            if fields.len() != width + 1 {
                return Err(MeshError::malformed(
                    lines.last,
                    format!("element type {kind} needs {width} nodes, got {}", fields.len().saturating_sub(1)),
                ));
            }
            let mut ids = [0usize; 10];
            for (slot, tag) in ids.iter_mut().zip(&fields[1..]) {
                *slot = *tags
                    .get(tag)
                    .ok_or_else(|| MeshError::malformed(lines.last, format!("unknown node tag {tag}")))?;
            }
            if width == 4 {
                linear.push([ids[0], ids[1], ids[2], ids[3]]);
            } else {
                quadratic.push(GMSH_TET10.map(|g| ids[g]));
            }
        }
    }
    if seen != total {
        return Err(MeshError::malformed(
            lines.last,
            format!("header declares {total} elements, blocks hold {seen}"),
        ));
    }
    match (linear.is_empty(), quadratic.is_empty()) {
        (false, false) => Err(MeshError::malformed(lines.last, "mixed linear and quadratic tetrahedra")),
        (false, true) => Ok(Cells::Linear(linear)),
        _ => Ok(Cells::Quadratic(quadratic)),
    }
}

pub fn format_msh(mesh: &Mesh) -> String {
    let n = mesh.node_count();
    let mut out = String::with_capacity(64 * n);
    out.push_str("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$Nodes\n1 {n} 1 {n}\n3 1 0 {n}");
    for i in 1..=n {
        let _ = writeln!(out, "{i}");
    }
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    out.push_str("$EndNodes\n");
    let m = mesh.element_count();
    let kind = match mesh.cells() {
        Cells::Linear(_) => TET4,
        Cells::Quadratic(_) => TET10,
    };
    let _ = writeln!(out, "$Elements\n1 {m} 1 {m}\n3 1 {kind} {m}");
    let mut push = |tag: usize, ids: &[usize]| {
        let _ = write!(out, "{tag}");
        for id in ids {
            let _ = write!(out, " {}", id + 1);
        }
        out.push('\n');
    };
    match mesh.cells() {
        Cells::Linear(c) => c.iter().enumerate().for_each(|(e, ids)| push(e + 1, ids)),
        Cells::Quadratic(c) => c
            .iter()
            .enumerate()
            .for_each(|(e, ids)| push(e + 1, &GMSH_TET10.map(|g| ids[g]))),
    }
    out.push_str("$EndElements\n");
    out
}

pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    crate::io::write_atomic(path.as_ref(), format_msh(mesh).as_bytes())?;
    Ok(())
}
