//! Deterministic curved triangulation of star-shaped domains.
//!
//! The mesher fans the boundary from the origin, applies uniform red
//! refinement with boundary midpoints inserted at exact arclength midpoints,
//! and relaxes interior vertices with fixed-count Jacobi smoothing. The same
//! inputs always produce bitwise identical meshes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryParam, DomainKind, DomainSpec};
use crate::error::GeometryError;
use crate::quadrature::{gauss_legendre, p2_shapes, triangle_rule};

const MIN_ANGLE_DEG: f64 = 20.0;
const SMOOTHING_PASSES: usize = 10;

/// Boundary vertex with its arclength coordinate and exact outward frame.
#[derive(Debug, Clone)]
pub struct BoundaryVertexInfo {
    pub vertex: usize,
    pub s: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

/// Fixed quadrature point on a curved boundary edge, at reference
/// coordinate `xi` of the edge with the exact frame at the matching
/// arclength.
#[derive(Debug, Clone)]
pub struct EdgeQuadPoint {
    pub xi: f64,
    pub weight: f64,
    pub s: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

/// Curved boundary edge: endpoint vertices in counterclockwise order, the
/// owning triangle, arclength range (`s_end > s_start`, the wrap edge ends
/// at the total length), and the exact midpoint with its frame.
#[derive(Debug, Clone)]
pub struct BoundaryEdgeInfo {
    pub vertices: [usize; 2],
    pub triangle: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub s_mid: f64,
    pub midpoint: [f64; 2],
    pub mid_normal: [f64; 2],
    pub mid_tangent: [f64; 2],
    pub quad: Vec<EdgeQuadPoint>,
}

/// Isoparametric triangulation with exact boundary bookkeeping.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: DomainSpec,
    /// Requested characteristic size.
    pub h: f64,
    /// Realized maximum straight edge length.
    pub h_max: f64,
    pub boundary_length: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Counterclockwise boundary cycle starting at arclength zero.
    pub boundary_vertices: Vec<BoundaryVertexInfo>,
    pub boundary_edges: Vec<BoundaryEdgeInfo>,
    curved_mid: BTreeMap<(usize, usize), [f64; 2]>,
}

fn norm_edge(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Generates a mesh with characteristic size `h`.
    pub fn generate(spec: &DomainSpec, h: f64) -> Result<Mesh, GeometryError> {
        let bp = BoundaryParam::new(spec, 256)?;
        let len = bp.length();
        if !(h > 0.0 && h < len / 8.0) {
            return Err(GeometryError::InvalidMeshSize { h, max: len / 8.0 });
        }
        let n_target = len / h;
        let k = (n_target / 8.0).log2().round().max(0.0) as u32;
        let n0 = ((n_target / 2f64.powi(k as i32)).round() as usize).clamp(6, 11);

        let mut vertices: Vec<[f64; 2]> = vec![[0.0, 0.0]];
        let mut ring: Vec<(usize, f64)> = (0..n0)
            .map(|j| {
                let s = len * j as f64 / n0 as f64;
                vertices.push(bp.eval(s).position);
                (j + 1, s)
            })
            .collect();
        let mut triangles: Vec<[usize; 3]> = (0..n0)
            .map(|j| [0, ring[j].0, ring[(j + 1) % n0].0])
            .collect();

        for _ in 0..k {
            let mut bnd_mid_s: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for j in 0..ring.len() {
                let (va, sa) = ring[j];
                let (vb, sb_raw) = ring[(j + 1) % ring.len()];
                let sb = if j + 1 == ring.len() { len } else { sb_raw };
                bnd_mid_s.insert(norm_edge(va, vb), 0.5 * (sa + sb));
            }
            let mut edge_mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut new_tris = Vec::with_capacity(triangles.len() * 4);
            for &[a, b, c] in &triangles {
                let mut mid = |p: usize, q: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
                    let key = norm_edge(p, q);
                    if let Some(&m) = edge_mid.get(&key) {
                        return m;
                    }
                    let pos = if let Some(&s_mid) = bnd_mid_s.get(&key) {
                        bp.eval(s_mid).position
                    } else {
                        [
                            0.5 * (vertices[p][0] + vertices[q][0]),
                            0.5 * (vertices[p][1] + vertices[q][1]),
                        ]
                    };
                    vertices.push(pos);
                    let m = vertices.len() - 1;
                    edge_mid.insert(key, m);
                    m
                };
                let mab = mid(a, b, &mut vertices);
                let mbc = mid(b, c, &mut vertices);
                let mca = mid(c, a, &mut vertices);
                new_tris.push([a, mab, mca]);
                new_tris.push([mab, b, mbc]);
                new_tris.push([mca, mbc, c]);
                new_tris.push([mab, mbc, mca]);
            }
            triangles = new_tris;
            let mut new_ring = Vec::with_capacity(ring.len() * 2);
            for j in 0..ring.len() {
                let (va, sa) = ring[j];
                let (vb, _) = ring[(j + 1) % ring.len()];
                let key = norm_edge(va, vb);
                new_ring.push((va, sa));
                new_ring.push((edge_mid[&key], bnd_mid_s[&key]));
            }
            ring = new_ring;
        }

        smooth_interior(&mut vertices, &triangles, &ring);
        Mesh::finalize(spec.clone(), h, vertices, triangles, ring, &bp)
    }

    /// Builds derived boundary data and validates the mesh. `ring` is the
    /// counterclockwise boundary cycle as (vertex, arclength) pairs.
    fn finalize(
        spec: DomainSpec,
        h: f64,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        ring: Vec<(usize, f64)>,
        bp: &BoundaryParam,
    ) -> Result<Mesh, GeometryError> {
        let len = bp.length();
        let mut dir_edge_tri: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (ti, &[a, b, c]) in triangles.iter().enumerate() {
            dir_edge_tri.insert((a, b), ti);
            dir_edge_tri.insert((b, c), ti);
            dir_edge_tri.insert((c, a), ti);
        }

        let boundary_vertices: Vec<BoundaryVertexInfo> = ring
            .iter()
            .map(|&(vertex, s)| {
                let sample = bp.eval(s);
                BoundaryVertexInfo {
                    vertex,
                    s,
                    normal: sample.normal,
                    tangent: sample.tangent,
                }
            })
            .collect();

        let (gx, gw) = gauss_legendre(6);
        let nb = ring.len();
        let mut boundary_edges = Vec::with_capacity(nb);
        for j in 0..nb {
            let (va, sa) = ring[j];
            let (vb, sb_raw) = ring[(j + 1) % nb];
            let sb = if j + 1 == nb { len } else { sb_raw };
            let triangle = *dir_edge_tri.get(&(va, vb)).ok_or_else(|| {
                GeometryError::InvariantViolation(format!(
                    "boundary edge ({va}, {vb}) has no owning triangle"
                ))
            })?;
            let s_mid = 0.5 * (sa + sb);
            let mid = bp.eval(s_mid);
            let quad = gx
                .iter()
                .zip(&gw)
                .map(|(&xi, &wi)| {
                    let sample = bp.eval(sa + (sb - sa) * xi);
                    EdgeQuadPoint {
                        xi,
                        weight: wi,
                        s: sample.s,
                        normal: sample.normal,
                        tangent: sample.tangent,
                    }
                })
                .collect();
            boundary_edges.push(BoundaryEdgeInfo {
                vertices: [va, vb],
                triangle,
                s_start: sa,
                s_end: sb,
                s_mid,
                midpoint: mid.position,
                mid_normal: mid.normal,
                mid_tangent: mid.tangent,
                quad,
            });
        }

        let curved_mid: BTreeMap<(usize, usize), [f64; 2]> = boundary_edges
            .iter()
            .map(|e| (norm_edge(e.vertices[0], e.vertices[1]), e.midpoint))
            .collect();

        let mut h_max = 0.0f64;
        for (ti, &[a, b, c]) in triangles.iter().enumerate() {
            let pa = vertices[a];
            let pb = vertices[b];
            let pc = vertices[c];
            let cross = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
            if cross <= 0.0 {
                return Err(GeometryError::InvariantViolation(format!(
                    "triangle {ti} is degenerate or clockwise (signed area {:.3e})",
                    0.5 * cross
                )));
            }
            let la = dist(pb, pc);
            let lb = dist(pc, pa);
            let lc = dist(pa, pb);
            h_max = h_max.max(la).max(lb).max(lc);
            let min_angle = triangle_min_angle(la, lb, lc);
            if min_angle < MIN_ANGLE_DEG.to_radians() {
                return Err(GeometryError::QualityFailure {
                    triangle: ti,
                    x: (pa[0] + pb[0] + pc[0]) / 3.0,
                    y: (pa[1] + pb[1] + pc[1]) / 3.0,
                    min_angle_deg: min_angle.to_degrees(),
                    threshold_deg: MIN_ANGLE_DEG,
                });
            }
        }

        let mesh = Mesh {
            spec,
            h,
            h_max,
            boundary_length: len,
            vertices,
            triangles,
            boundary_vertices,
            boundary_edges,
            curved_mid,
        };
        mesh.check_boundary_invariants(bp)?;
        mesh.check_jacobians()?;
        Ok(mesh)
    }

    fn check_boundary_invariants(&self, bp: &BoundaryParam) -> Result<(), GeometryError> {
        let len = self.boundary_length;
        let mut chord_sum = 0.0;
        for info in &self.boundary_vertices {
            let exact = bp.eval(info.s).position;
            let d = dist(self.vertices[info.vertex], exact);
            if d > 1e-12 * len {
                return Err(GeometryError::InvariantViolation(format!(
                    "boundary vertex {} drifted {d:.3e} from the exact curve",
                    info.vertex
                )));
            }
        }
        let nb = self.boundary_vertices.len();
        for j in 0..nb {
            let a = self.vertices[self.boundary_vertices[j].vertex];
            let b = self.vertices[self.boundary_vertices[(j + 1) % nb].vertex];
            chord_sum += dist(a, b);
        }
        // The inscribed polygon length converges quadratically; this guard
        // only catches gross bookkeeping mistakes.
        if (chord_sum - len).abs() > 0.5 * len {
            return Err(GeometryError::InvariantViolation(format!(
                "boundary cycle length {chord_sum} far from exact length {len}"
            )));
        }
        Ok(())
    }

    fn check_jacobians(&self) -> Result<(), GeometryError> {
        let rule = triangle_rule(3);
        for ti in 0..self.triangles.len() {
            let coords = self.element_geometry(ti);
            for (pi, p) in rule.iter().enumerate() {
                let (_, grads) = p2_shapes(p.xi, p.eta);
                let (_, det) = isoparametric_jacobian(&coords, &grads);
                if det <= 0.0 {
                    return Err(GeometryError::InvariantViolation(format!(
                        "element {ti} has non-positive Jacobian {det:.3e} at quadrature point {pi}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Geometry nodes of element `t` in P2 order
    /// (vertices, then midpoints of edges 01, 12, 20).
    pub fn element_geometry(&self, t: usize) -> [[f64; 2]; 6] {
        let [a, b, c] = self.triangles[t];
        let mid = |p: usize, q: usize| -> [f64; 2] {
            if let Some(&m) = self.curved_mid.get(&norm_edge(p, q)) {
                m
            } else {
                [
                    0.5 * (self.vertices[p][0] + self.vertices[q][0]),
                    0.5 * (self.vertices[p][1] + self.vertices[q][1]),
                ]
            }
        };
        [
            self.vertices[a],
            self.vertices[b],
            self.vertices[c],
            mid(a, b),
            mid(b, c),
            mid(c, a),
        ]
    }

    /// Domain area by isoparametric quadrature.
    pub fn area(&self) -> f64 {
        let rule = triangle_rule(5);
        let mut acc = 0.0;
        for t in 0..self.triangles.len() {
            let coords = self.element_geometry(t);
            for p in &rule {
                let (_, grads) = p2_shapes(p.xi, p.eta);
                let (_, det) = isoparametric_jacobian(&coords, &grads);
                acc += p.weight * det;
            }
        }
        acc
    }

    /// Smallest interior angle over all straight triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for &[a, b, c] in &self.triangles {
            let la = dist(self.vertices[b], self.vertices[c]);
            let lb = dist(self.vertices[c], self.vertices[a]);
            let lc = dist(self.vertices[a], self.vertices[b]);
            min = min.min(triangle_min_angle(la, lb, lc).to_degrees());
        }
        min
    }

    /// Serializes the mesh to a versioned text format with bit-exact floats.
    pub fn write_cache(&self, path: &Path) -> Result<(), GeometryError> {
        let mut out = String::new();
        out.push_str("stokeslip mesh v1\n");
        match self.spec.kind() {
            DomainKind::Disk { radius } => {
                let _ = writeln!(out, "spec disk {}", fhex(*radius));
            }
            DomainKind::Ellipse { a, b } => {
                let _ = writeln!(out, "spec ellipse {} {}", fhex(*a), fhex(*b));
            }
            DomainKind::Fourier { r0, cos_amps, sin_amps } => {
                let _ = write!(out, "spec fourier {} {} {}", fhex(*r0), cos_amps.len(), sin_amps.len());
                for a in cos_amps.iter().chain(sin_amps.iter()) {
                    let _ = write!(out, " {}", fhex(*a));
                }
                out.push('\n');
            }
        }
        let _ = writeln!(out, "h {}", fhex(self.h));
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {}", fhex(v[0]), fhex(v[1]));
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "ring {}", self.boundary_vertices.len());
        for info in &self.boundary_vertices {
            let _ = writeln!(out, "{} {}", info.vertex, fhex(info.s));
        }
        out.push_str("end\n");
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Restores a mesh from [`Mesh::write_cache`] output; derived data is
    /// rebuilt and revalidated, giving a bitwise identical mesh.
    pub fn read_cache(path: &Path) -> Result<Mesh, GeometryError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String), GeometryError> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.to_string()))
                .ok_or_else(|| GeometryError::CacheParse {
                    line: 0,
                    message: format!("unexpected end of file, expected {expect}"),
                })
        };
        let parse_err = |line: usize, message: String| GeometryError::CacheParse { line, message };

        let (line, header) = next("header")?;
        if header != "stokeslip mesh v1" {
            return Err(parse_err(line, format!("bad header {header:?}")));
        }
        let (line, spec_line) = next("spec")?;
        let tokens: Vec<&str> = spec_line.split_whitespace().collect();
        let spec = match tokens.as_slice() {
            ["spec", "disk", r] => DomainSpec::disk(fhex_parse(r, line)?)
                .map_err(|e| parse_err(line, e.to_string()))?,
            ["spec", "ellipse", a, b] => {
                DomainSpec::ellipse(fhex_parse(a, line)?, fhex_parse(b, line)?)
                    .map_err(|e| parse_err(line, e.to_string()))?
            }
            ["spec", "fourier", r0, nc, ns, rest @ ..] => {
                let nc: usize = nc
                    .parse()
                    .map_err(|_| parse_err(line, "bad cosine count".into()))?;
                let ns: usize = ns
                    .parse()
                    .map_err(|_| parse_err(line, "bad sine count".into()))?;
                if rest.len() != nc + ns {
                    return Err(parse_err(line, "amplitude count mismatch".into()));
                }
                let mut amps = Vec::with_capacity(nc + ns);
                for tok in rest {
                    amps.push(fhex_parse(tok, line)?);
                }
                DomainSpec::fourier(
                    fhex_parse(r0, line)?,
                    amps[..nc].to_vec(),
                    amps[nc..].to_vec(),
                )
                .map_err(|e| parse_err(line, e.to_string()))?
            }
            _ => return Err(parse_err(line, format!("bad spec line {spec_line:?}"))),
        };

        let (line, h_line) = next("h")?;
        let h = match h_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["h", v] => fhex_parse(v, line)?,
            _ => return Err(parse_err(line, "expected h line".into())),
        };

        let (line, count_line) = next("vertices")?;
        let n_vertices = section_count(&count_line, "vertices").map_err(|m| parse_err(line, m))?;
        let mut vertices = Vec::with_capacity(n_vertices);
        for _ in 0..n_vertices {
            let (line, l) = next("vertex")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(line, "vertex needs two coordinates".into()));
            }
            vertices.push([fhex_parse(toks[0], line)?, fhex_parse(toks[1], line)?]);
        }

        let (line, count_line) = next("triangles")?;
        let n_triangles = section_count(&count_line, "triangles").map_err(|m| parse_err(line, m))?;
        let mut triangles = Vec::with_capacity(n_triangles);
        for _ in 0..n_triangles {
            let (line, l) = next("triangle")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(parse_err(line, "triangle needs three vertex ids".into()));
            }
            let mut tri = [0usize; 3];
            for (k, tok) in toks.iter().enumerate() {
                tri[k] = tok
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad vertex id {tok:?}")))?;
            }
            triangles.push(tri);
        }

        let (line, count_line) = next("ring")?;
        let n_ring = section_count(&count_line, "ring").map_err(|m| parse_err(line, m))?;
        let mut ring = Vec::with_capacity(n_ring);
        for _ in 0..n_ring {
            let (line, l) = next("ring entry")?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(line, "ring entry needs vertex and arclength".into()));
            }
            let vertex: usize = toks[0]
                .parse()
                .map_err(|_| parse_err(line, format!("bad vertex id {:?}", toks[0])))?;
            ring.push((vertex, fhex_parse(toks[1], line)?));
        }

        let bp = BoundaryParam::new(&spec, 256)?;
        Mesh::finalize(spec, h, vertices, triangles, ring, &bp)
    }
}

/// Damped Jacobi smoothing of interior vertices, keeping the configuration
/// with the best minimum angle seen across the passes. Smoothing therefore
/// never degrades the refined mesh.
fn smooth_interior(vertices: &mut Vec<[f64; 2]>, triangles: &[[usize; 3]], ring: &[(usize, f64)]) {
    let boundary: BTreeSet<usize> = ring.iter().map(|&(v, _)| v).collect();
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); vertices.len()];
    for &[a, b, c] in triangles {
        for &(p, q) in &[(a, b), (b, c), (c, a)] {
            neighbors[p].insert(q);
            neighbors[q].insert(p);
        }
    }
    let quality = |verts: &[[f64; 2]]| -> f64 {
        let mut min = f64::INFINITY;
        for &[a, b, c] in triangles {
            let la = dist(verts[b], verts[c]);
            let lb = dist(verts[c], verts[a]);
            let lc = dist(verts[a], verts[b]);
            min = min.min(triangle_min_angle(la, lb, lc));
        }
        min
    };
    let mut best = vertices.clone();
    let mut best_quality = quality(vertices);
    for _ in 0..SMOOTHING_PASSES {
        let prev: Vec<[f64; 2]> = vertices.clone();
        for (v, pos) in vertices.iter_mut().enumerate() {
            if boundary.contains(&v) || neighbors[v].is_empty() {
                continue;
            }
            let mut acc = [0.0; 2];
            for &u in &neighbors[v] {
                acc[0] += prev[u][0];
                acc[1] += prev[u][1];
            }
            let n = neighbors[v].len() as f64;
            pos[0] = 0.5 * pos[0] + 0.5 * acc[0] / n;
            pos[1] = 0.5 * pos[1] + 0.5 * acc[1] / n;
        }
        let q = quality(vertices);
        if q > best_quality {
            best_quality = q;
            best = vertices.clone();
        }
    }
    *vertices = best;
}

/// Jacobian of the P2 geometry map and its determinant.
pub fn isoparametric_jacobian(coords: &[[f64; 2]; 6], grads: &[[f64; 2]; 6]) -> ([[f64; 2]; 2], f64) {
    let mut j = [[0.0; 2]; 2];
    for a in 0..6 {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += coords[a][r] * grads[a][c];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    (j, det)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn triangle_min_angle(la: f64, lb: f64, lc: f64) -> f64 {
    // Angle opposite each edge via the law of cosines.
    let angle = |opp: f64, x: f64, y: f64| -> f64 {
        (((x * x + y * y - opp * opp) / (2.0 * x * y)).clamp(-1.0, 1.0)).acos()
    };
    angle(la, lb, lc)
        .min(angle(lb, lc, la))
        .min(angle(lc, la, lb))
}

fn fhex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn fhex_parse(token: &str, line: usize) -> Result<f64, GeometryError> {
    u64::from_str_radix(token, 16)
        .map(f64::from_bits)
        .map_err(|_| GeometryError::CacheParse {
            line,
            message: format!("bad float token {token:?}"),
        })
}

fn section_count(line: &str, name: &str) -> Result<usize, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    match tokens.as_slice() {
        [n, c] if *n == name => c.parse().map_err(|_| format!("bad {name} count {c:?}")),
        _ => Err(format!("expected {name} section, got {line:?}")),
    }
}
