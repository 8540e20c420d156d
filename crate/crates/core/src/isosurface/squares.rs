use std::collections::HashMap;

use nalgebra::Vector2;

use super::{crossing, key_position, Polyline, ScalarGrid, VertexKey};

// Cell corners counter-clockwise from the lower-left node; edge e joins
// corners e and e+1 (mod 4).
const CORNERS: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

/// Zero-level contours of a 2D grid as chained polylines.
pub fn marching_squares(grid: &ScalarGrid<2>) -> Vec<Polyline> {
    let [nx, ny] = grid.dims;
    let mut keys: HashMap<VertexKey, usize> = HashMap::new();
    let mut vertices: Vec<Vector2<f64>> = Vec::new();
    let mut segments: Vec<[usize; 2]> = Vec::new();

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let nodes = CORNERS.map(|[di, dj]| grid.index([i + di, j + dj]));
            if nodes.iter().any(|&n| !grid.mask[n]) {
                continue;
            }
            let vals = nodes.map(|n| grid.values[n]);
            let inside = vals.map(|v| v < 0.0);
            let count = inside.iter().filter(|&&b| b).count();
            if count == 0 || count == 4 {
                continue;
            }

            let mut vertex_on = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let (key, t) = crossing(nodes[a], nodes[b], vals[a], vals[b]);
                *keys.entry(key).or_insert_with(|| {
                    vertices.push(key_position(grid, key, t));
                    vertices.len() - 1
                })
            };

            // Pairs of crossed edges, one pair per segment.
            let mut pairs: Vec<[usize; 2]> = Vec::with_capacity(2);
            let saddle = count == 2 && inside[0] == inside[2];
            if saddle {
                let center_inside = vals.iter().sum::<f64>() / 4.0 < 0.0;
                // cut off the corners whose side differs from the center
                for c in 0..4 {
                    if inside[c] != center_inside {
                        pairs.push([(c + 3) % 4, c]);
                    }
                }
            } else {
                let crossed: Vec<usize> = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).collect();
                pairs.push([crossed[0], crossed[1]]);
            }
            for [e0, e1] in pairs {
                let a = vertex_on(e0);
                let b = vertex_on(e1);
                if a != b {
                    segments.push([a, b]);
                }
            }
        }
    }
    chain(&vertices, &segments)
}

/// Joins segments sharing endpoints into maximal chains. Open chains are
/// started from their endpoints first so they come out whole.
fn chain(vertices: &[Vector2<f64>], segments: &[[usize; 2]]) -> Vec<Polyline> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (s, seg) in segments.iter().enumerate() {
        incident[seg[0]].push(s);
        incident[seg[1]].push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let starts: Vec<usize> = (0..vertices.len())
        .filter(|&v| incident[v].len() % 2 == 1)
        .chain(0..vertices.len())
        .collect();
    for start in starts {
        while let Some(&first) = incident[start].iter().find(|&&s| !used[s]) {
            let mut chain = vec![start];
            let mut cur = start;
            let mut seg = first;
            loop {
                used[seg] = true;
                let [a, b] = segments[seg];
                cur = if a == cur { b } else { a };
                chain.push(cur);
                match incident[cur].iter().find(|&&s| !used[s]) {
                    Some(&next) => seg = next,
                    None => break,
                }
            }
            let closed = chain.len() > 2 && chain.first() == chain.last();
            if closed {
                chain.pop();
            }
            lines.push(Polyline {
                vertices: chain.iter().map(|&v| vertices[v]).collect(),
                closed,
            });
        }
    }
    lines
}
