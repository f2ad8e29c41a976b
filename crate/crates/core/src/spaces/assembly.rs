//! Element loop for the operator bundle.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::fourier::BoundaryFourier;
use super::{BoundaryNode, NodeDofs, OperatorBundle, VelocitySpace};
use crate::error::AssemblyError;
use crate::geometry::{isoparametric_jacobian, Mesh};
use crate::linalg::Csr;
use crate::quadrature::{p1_shapes, p2_shapes, triangle_rule, P1_GRADS, P2_LINE_MASS};

fn norm_edge(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Per-element constrained contributions.
struct ElementOut {
    dofs: Vec<usize>,
    mass: Vec<f64>,
    stiffness: Vec<f64>,
    h1: Vec<f64>,
    /// Rows: the three vertex pressure dofs of the element.
    divergence: Vec<f64>,
    pressure_mass: [[f64; 3]; 3],
    pressure_stiffness: [[f64; 3]; 3],
    pressure_mean: [f64; 3],
}

pub(super) fn assemble_bundle(
    mesh: &Mesh,
    alpha: f64,
    beta: f64,
) -> Result<OperatorBundle, AssemblyError> {
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();

    // P2 node enumeration: vertices keep their ids, edge nodes are numbered
    // in order of first appearance over the element loop.
    let mut edge_nodes: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut node_coords: Vec<[f64; 2]> = mesh.vertices.clone();
    let mut tri_nodes: Vec<[usize; 6]> = Vec::with_capacity(nt);
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let geo = mesh.element_geometry(t);
        let mut ids = [a, b, c, 0, 0, 0];
        for (slot, (p, q)) in [(3usize, (a, b)), (4, (b, c)), (5, (c, a))] {
            let key = norm_edge(p, q);
            let id = *edge_nodes.entry(key).or_insert_with(|| {
                node_coords.push(geo[slot]);
                node_coords.len() - 1
            });
            ids[slot] = id;
        }
        tri_nodes.push(ids);
    }
    let n_nodes = node_coords.len();

    // Boundary nodes in counterclockwise scalar order: vertex then midpoint
    // of each boundary edge.
    let nb = mesh.boundary_edges.len();
    let mut boundary_nodes = Vec::with_capacity(2 * nb);
    for (j, edge) in mesh.boundary_edges.iter().enumerate() {
        let bv = &mesh.boundary_vertices[j];
        debug_assert_eq!(bv.vertex, edge.vertices[0]);
        boundary_nodes.push(BoundaryNode {
            node: bv.vertex,
            s: bv.s,
            normal: bv.normal,
            tangent: bv.tangent,
        });
        let mid = edge_nodes[&norm_edge(edge.vertices[0], edge.vertices[1])];
        boundary_nodes.push(BoundaryNode {
            node: mid,
            s: edge.s_mid,
            normal: edge.mid_normal,
            tangent: edge.mid_tangent,
        });
    }

    let mut node_tangent: Vec<Option<[f64; 2]>> = vec![None; n_nodes];
    for bn in &boundary_nodes {
        node_tangent[bn.node] = Some(bn.tangent);
    }

    let mut node_dofs = Vec::with_capacity(n_nodes);
    let mut next_dof = 0usize;
    for tangent in node_tangent.iter() {
        if tangent.is_some() {
            node_dofs.push(NodeDofs::Boundary {
                tangential: next_dof,
            });
            next_dof += 1;
        } else {
            node_dofs.push(NodeDofs::Interior {
                x: next_dof,
                y: next_dof + 1,
            });
            next_dof += 2;
        }
    }
    let n_dofs = next_dof;

    let rule = triangle_rule(5);
    let outputs: Result<Vec<ElementOut>, AssemblyError> = (0..nt)
        .into_par_iter()
        .map(|t| {
            element_contribution(
                t,
                mesh,
                &tri_nodes[t],
                &node_dofs,
                &node_tangent,
                &rule,
            )
        })
        .collect();
    let outputs = outputs?;

    let mut mass_t = Vec::new();
    let mut stiff_t = Vec::new();
    let mut h1_t = Vec::new();
    let mut div_t = Vec::new();
    let mut pmass_t = Vec::new();
    let mut pstiff_t = Vec::new();
    let mut pressure_mean = vec![0.0; nv];
    for (t, out) in outputs.iter().enumerate() {
        let m = out.dofs.len();
        for i in 0..m {
            for j in 0..m {
                let gi = out.dofs[i];
                let gj = out.dofs[j];
                mass_t.push((gi, gj, out.mass[i * m + j]));
                stiff_t.push((gi, gj, out.stiffness[i * m + j]));
                h1_t.push((gi, gj, out.h1[i * m + j]));
            }
        }
        let verts = &mesh.triangles[t];
        for p in 0..3 {
            for j in 0..m {
                div_t.push((verts[p], out.dofs[j], out.divergence[p * m + j]));
            }
            for q in 0..3 {
                pmass_t.push((verts[p], verts[q], out.pressure_mass[p][q]));
                pstiff_t.push((verts[p], verts[q], out.pressure_stiffness[p][q]));
            }
            pressure_mean[verts[p]] += out.pressure_mean[p];
        }
    }

    let mass = Csr::from_triplets(n_dofs, n_dofs, &mass_t).symmetrized();
    let stiffness = Csr::from_triplets(n_dofs, n_dofs, &stiff_t).symmetrized();
    let h1_gram = Csr::from_triplets(n_dofs, n_dofs, &h1_t).symmetrized();
    let divergence = Csr::from_triplets(nv, n_dofs, &div_t);
    let pressure_mass = Csr::from_triplets(nv, nv, &pmass_t).symmetrized();
    let pressure_stiffness = Csr::from_triplets(nv, nv, &pstiff_t).symmetrized();

    // Boundary scalar operators: exact arclength measure per edge.
    let n_bs = 2 * nb;
    let mut mb_t = Vec::with_capacity(9 * nb);
    for (j, edge) in mesh.boundary_edges.iter().enumerate() {
        let len = edge.s_end - edge.s_start;
        let idx = [2 * j, 2 * j + 1, (2 * j + 2) % n_bs];
        for a in 0..3 {
            for b in 0..3 {
                mb_t.push((idx[a], idx[b], len * P2_LINE_MASS[a][b]));
            }
        }
    }
    let boundary_mass = Csr::from_triplets(n_bs, n_bs, &mb_t);

    let trace_dofs: Vec<usize> = boundary_nodes
        .iter()
        .map(|bn| match node_dofs[bn.node] {
            NodeDofs::Boundary { tangential } => tangential,
            NodeDofs::Interior { .. } => unreachable!("boundary node with interior dofs"),
        })
        .collect();

    let coupling_t: Vec<(usize, usize, f64)> = boundary_mass
        .iter()
        .map(|(i, j, v)| (trace_dofs[i], trace_dofs[j], v))
        .collect();
    let boundary_coupling = Csr::from_triplets(n_dofs, n_dofs, &coupling_t);

    let edges: Vec<(f64, f64)> = mesh
        .boundary_edges
        .iter()
        .map(|e| (e.s_start, e.s_end - e.s_start))
        .collect();
    let fourier = BoundaryFourier::new(mesh.boundary_length, &edges, n_bs);

    let area = mesh.area();

    Ok(OperatorBundle {
        alpha,
        beta,
        mesh: mesh.clone(),
        velocity: VelocitySpace {
            node_coords,
            tri_nodes,
            node_dofs,
            boundary_nodes,
            n_dofs,
        },
        n_pressure: nv,
        mass,
        stiffness,
        h1_gram,
        divergence,
        pressure_mass,
        pressure_stiffness,
        pressure_mean,
        boundary_mass,
        trace_dofs,
        boundary_coupling,
        fourier,
        area,
    })
}

fn element_contribution(
    t: usize,
    mesh: &Mesh,
    nodes: &[usize; 6],
    node_dofs: &[NodeDofs],
    node_tangent: &[Option<[f64; 2]>],
    rule: &[crate::quadrature::TrianglePoint],
) -> Result<ElementOut, AssemblyError> {
    let coords = mesh.element_geometry(t);

    // Unconstrained local blocks; index = 2 * local_node + component.
    let mut mass_u = [[0.0f64; 12]; 12];
    let mut stiff_u = [[0.0f64; 12]; 12];
    let mut h1_u = [[0.0f64; 12]; 12];
    let mut div_u = [[0.0f64; 12]; 3];
    let mut pmass = [[0.0f64; 3]; 3];
    let mut pstiff = [[0.0f64; 3]; 3];
    let mut pmean = [0.0f64; 3];

    for (pi, p) in rule.iter().enumerate() {
        let (shapes, grads) = p2_shapes(p.xi, p.eta);
        let (jac, det) = isoparametric_jacobian(&coords, &grads);
        if det <= 0.0 {
            return Err(AssemblyError::SingularJacobian {
                element: t,
                det,
                point: pi,
            });
        }
        // Physical gradients via J^{-T}.
        let inv_det = 1.0 / det;
        let mut phys = [[0.0f64; 2]; 6];
        for a in 0..6 {
            phys[a][0] = (jac[1][1] * grads[a][0] - jac[1][0] * grads[a][1]) * inv_det;
            phys[a][1] = (-jac[0][1] * grads[a][0] + jac[0][0] * grads[a][1]) * inv_det;
        }
        let psi = p1_shapes(p.xi, p.eta);
        let mut psi_grad = [[0.0f64; 2]; 3];
        for q in 0..3 {
            psi_grad[q][0] = (jac[1][1] * P1_GRADS[q][0] - jac[1][0] * P1_GRADS[q][1]) * inv_det;
            psi_grad[q][1] = (-jac[0][1] * P1_GRADS[q][0] + jac[0][0] * P1_GRADS[q][1]) * inv_det;
        }
        let w = p.weight * det;

        for a in 0..6 {
            for b in 0..6 {
                let nn = w * (shapes[a] * shapes[b]);
                let gg = w * (phys[a][0] * phys[b][0] + phys[a][1] * phys[b][1]);
                for c in 0..2 {
                    mass_u[2 * a + c][2 * b + c] += nn;
                    h1_u[2 * a + c][2 * b + c] += nn + gg;
                    stiff_u[2 * a + c][2 * b + c] += gg;
                }
                // Symmetric-gradient cross term of 2 int Du : Dv.
                for c in 0..2 {
                    for d in 0..2 {
                        stiff_u[2 * a + c][2 * b + d] += w * (phys[a][d] * phys[b][c]);
                    }
                }
            }
        }
        for q in 0..3 {
            for b in 0..6 {
                for c in 0..2 {
                    div_u[q][2 * b + c] += w * psi[q] * phys[b][c];
                }
            }
            for r in 0..3 {
                pmass[q][r] += w * (psi[q] * psi[r]);
                pstiff[q][r] += w
                    * (psi_grad[q][0] * psi_grad[r][0] + psi_grad[q][1] * psi_grad[r][1]);
            }
            pmean[q] += w * psi[q];
        }
    }

    // Constraint map: unconstrained index -> (local constrained column, weight).
    let mut dofs = Vec::with_capacity(12);
    let mut col_of = [usize::MAX; 12];
    let mut weight_of = [0.0f64; 12];
    for (a, &node) in nodes.iter().enumerate() {
        match node_dofs[node] {
            NodeDofs::Interior { x, y } => {
                for (c, dof) in [(0, x), (1, y)] {
                    dofs.push(dof);
                    col_of[2 * a + c] = dofs.len() - 1;
                    weight_of[2 * a + c] = 1.0;
                }
            }
            NodeDofs::Boundary { tangential } => {
                let tau = node_tangent[node].expect("boundary node without tangent");
                dofs.push(tangential);
                let col = dofs.len() - 1;
                for c in 0..2 {
                    col_of[2 * a + c] = col;
                    weight_of[2 * a + c] = tau[c];
                }
            }
        }
    }
    let m = dofs.len();

    let constrain = |local: &[[f64; 12]; 12]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        for k1 in 0..12 {
            let (c1, w1) = (col_of[k1], weight_of[k1]);
            if w1 == 0.0 {
                continue;
            }
            for k2 in 0..12 {
                let (c2, w2) = (col_of[k2], weight_of[k2]);
                if w2 == 0.0 {
                    continue;
                }
                out[c1 * m + c2] += w1 * local[k1][k2] * w2;
            }
        }
        out
    };

    let mut divergence = vec![0.0; 3 * m];
    for q in 0..3 {
        for k in 0..12 {
            let (c, w) = (col_of[k], weight_of[k]);
            if w != 0.0 {
                divergence[q * m + c] += div_u[q][k] * w;
            }
        }
    }

    Ok(ElementOut {
        mass: constrain(&mass_u),
        stiffness: constrain(&stiff_u),
        h1: constrain(&h1_u),
        divergence,
        dofs,
        pressure_mass: pmass,
        pressure_stiffness: pstiff,
        pressure_mean: pmean,
    })
}
