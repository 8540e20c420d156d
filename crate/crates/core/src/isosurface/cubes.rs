use std::collections::HashMap;

use super::tables::{CORNERS, EDGES, EDGE_TABLE, TRI_TABLE};
use super::{crossing, key_position, ScalarGrid, SurfaceMesh, VertexKey};

/// Zero-level triangle mesh of a 3D grid. Triangles are wound so their
/// normals point toward positive values.
pub fn marching_cubes(grid: &ScalarGrid<3>) -> SurfaceMesh {
    let [nx, ny, nz] = grid.dims;
    let mut keys: HashMap<VertexKey, usize> = HashMap::new();
    let mut mesh = SurfaceMesh::default();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let nodes = CORNERS.map(|[di, dj, dk]| grid.index([i + di, j + dj, k + dk]));
                if nodes.iter().any(|&n| !grid.mask[n]) {
                    continue;
                }
                let vals = nodes.map(|n| grid.values[n]);
                let mut case = 0usize;
                for (c, v) in vals.iter().enumerate() {
                    if *v < 0.0 {
                        case |= 1 << c;
                    }
                }
                let crossed = EDGE_TABLE[case];
                if crossed == 0 {
                    continue;
                }
                let mut edge_vertex = [usize::MAX; 12];
                for (e, [a, b]) in EDGES.iter().enumerate() {
                    if crossed & (1 << e) == 0 {
                        continue;
                    }
                    let (key, t) = crossing(nodes[*a], nodes[*b], vals[*a], vals[*b]);
                    edge_vertex[e] = *keys.entry(key).or_insert_with(|| {
                        mesh.vertices.push(key_position(grid, key, t));
                        mesh.vertices.len() - 1
                    });
                }
                for tri in TRI_TABLE[case].chunks(3).take_while(|t| t[0] >= 0) {
                    // table winding faces the inside; reverse it
                    let v = [
                        edge_vertex[tri[0] as usize],
                        edge_vertex[tri[2] as usize],
                        edge_vertex[tri[1] as usize],
                    ];
                    if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
                        continue;
                    }
                    let p = v.map(|i| mesh.vertices[i]);
                    if (p[1] - p[0]).cross(&(p[2] - p[0])).norm() <= 1e-12 * grid.spacing.norm_squared() {
                        continue;
                    }
                    mesh.triangles.push(v);
                }
            }
        }
    }
    mesh
}
