//! Read-only STL ingestion (ASCII and binary) for surface inspection.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::{edge_key, MeshError, Point};

/// Vertices closer than this (mm) are merged.
pub const WELD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSoup {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Unit normals recomputed from the vertex winding.
    pub normals: Vec<Point>,
}

impl TriangleSoup {
    pub fn edge_count(&self) -> usize {
        let edges: HashSet<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])])
            .collect();
        edges.len()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }
}

pub fn read_stl(path: impl AsRef<Path>) -> Result<TriangleSoup, MeshError> {
    let bytes = std::fs::read(path)?;
    parse_stl(&bytes)
}

pub fn parse_stl(bytes: &[u8]) -> Result<TriangleSoup, MeshError> {
    let corners = if looks_binary(bytes) {
        parse_binary(bytes)?
    } else {
        parse_ascii(bytes)?
    };
    Ok(weld(&corners))
}

fn looks_binary(bytes: &[u8]) -> bool {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * n {
            return true;
        }
    }
    // binary files may also begin with "solid"; anything else is binary
    !bytes.trim_ascii_start().starts_with(b"solid")
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Point; 3]>, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::malformed(0, "binary STL shorter than its 84-byte header"));
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    if bytes.len() < 84 + 50 * n {
        return Err(MeshError::malformed(
            0,
            format!("binary STL declares {n} triangles but holds {} bytes", bytes.len()),
        ));
    }
    let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    Ok((0..n)
        .map(|t| {
            let base = 84 + 50 * t + 12;
            [0, 1, 2].map(|v| {
                let o = base + 12 * v;
                Point::new(f(o), f(o + 4), f(o + 8))
            })
        })
        .collect())
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Point; 3]>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::malformed(0, "ASCII STL is not valid UTF-8"))?;
    let mut tris = Vec::new();
    let mut current: Vec<Point> = Vec::with_capacity(3);
    let mut in_facet = false;
    for (i, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("facet") => {
                if in_facet {
                    return Err(MeshError::malformed(i + 1, "nested facet"));
                }
                in_facet = true;
                current.clear();
            }
            Some("vertex") => {
                if !in_facet {
                    return Err(MeshError::malformed(i + 1, "vertex outside facet"));
                }
                let xyz: Vec<f64> = tok
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| MeshError::malformed(i + 1, "bad vertex coordinate"))?;
                if xyz.len() != 3 {
                    return Err(MeshError::malformed(i + 1, "vertex needs three coordinates"));
                }
                current.push(Point::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(MeshError::malformed(i + 1, format!("facet has {} vertices", current.len())));
                }
                tris.push([current[0], current[1], current[2]]);
                in_facet = false;
            }
            Some("solid" | "outer" | "endloop" | "endsolid") | None => {}
            Some(other) => return Err(MeshError::malformed(i + 1, format!("unexpected keyword '{other}'"))),
        }
    }
    if in_facet {
        return Err(MeshError::malformed(text.lines().count(), "unterminated facet"));
    }
    Ok(tris)
}

fn weld(corners: &[[Point; 3]]) -> TriangleSoup {
    let cell = |p: &Point| p.map(|c| (c / WELD_TOLERANCE).floor() as i64);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut find_or_add = |p: Point| -> usize {
        let c = cell(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c.x + dx, c.y + dy, c.z + dz]) {
                        if let Some(&id) = ids.iter().find(|&&id| (vertices[id] - p).norm() <= WELD_TOLERANCE) {
                            return id;
                        }
                    }
                }
            }
        }
        vertices.push(p);
        grid.entry([c.x, c.y, c.z]).or_default().push(vertices.len() - 1);
        vertices.len() - 1
    };
    let triangles: Vec<[usize; 3]> = corners.iter().map(|t| t.map(&mut find_or_add)).collect();
    let normals = triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| vertices[i]);
            (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Point::zeros)
        })
        .collect();
    TriangleSoup {
        vertices,
        triangles,
        normals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_one_triangle() -> Vec<u8> {
        let mut b = vec![0u8; 80];
        b.extend(1u32.to_le_bytes());
        for v in [0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0] {
            b.extend(v.to_le_bytes());
        }
        b.extend([0u8, 0]);
        b
    }

    const TETRA_ASCII: &str = "solid tetra
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 0 1 0
  vertex 1 0 0
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 1 0 0
  vertex 0 0 1
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 0 0 0
  vertex 0 0 1
  vertex 0 1 0
 endloop
endfacet
facet normal 0 0 0
 outer loop
  vertex 1 0 0
  vertex 0 1 0
  vertex 0 0 1
 endloop
endfacet
endsolid tetra
";

    #[test]
    fn binary_single_triangle() {
        let soup = parse_stl(&binary_one_triangle()).unwrap();
        assert_eq!(soup.triangles.len(), 1);
        assert_eq!(soup.vertices.len(), 3);
        assert_eq!(soup.normals[0], Point::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn ascii_tetrahedron_is_a_closed_sphere() {
        let soup = parse_stl(TETRA_ASCII.as_bytes()).unwrap();
        assert_eq!(soup.triangles.len(), 4);
        assert_eq!(soup.vertices.len(), 4);
        assert_eq!(soup.euler_characteristic(), 2);
        // recomputed normals point outward
        let c = Point::new(0.25, 0.25, 0.25);
        for (t, n) in soup.triangles.iter().zip(&soup.normals) {
            assert!(n.dot(&(soup.vertices[t[0]] - c)) > 0.0);
        }
    }

    #[test]
    fn near_duplicate_vertices_are_welded() {
        let text = TETRA_ASCII.replacen("vertex 1 0 0", "vertex 1.0000000004 0 0", 1);
        let soup = parse_stl(text.as_bytes()).unwrap();
        assert_eq!(soup.vertices.len(), 4);
    }

    #[test]
    fn truncated_binary_is_malformed() {
        let mut b = binary_one_triangle();
        b.truncate(60);
        assert!(matches!(parse_stl(&b), Err(MeshError::MalformedFile { .. })));
        let mut c = binary_one_triangle();
        c.truncate(100);
        assert!(matches!(parse_stl(&c), Err(MeshError::MalformedFile { .. })));
    }
}
