//! Static k-d tree for ball and k-nearest-neighbor queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::SVector;

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// k-d tree over a fixed point set. Query results refer to indices into the
/// slice the tree was built from.
#[derive(Clone, Debug)]
pub struct KdTree<const D: usize> {
    points: Vec<SVector<f64, D>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl<const D: usize> KdTree<D> {
    pub fn new(points: &[SVector<f64, D>]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &SVector<f64, D> {
        &self.points[index]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of widest spread
        let mut lo = SVector::<f64, D>::repeat(f64::INFINITY);
        let mut hi = SVector::<f64, D>::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Indices of all points with `|p - center| < radius`, in ascending order.
    pub fn within(&self, center: &SVector<f64, D>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_into(center, radius, &mut out);
        out
    }

    /// Like [`KdTree::within`] but appends into a reusable buffer, which is
    /// cleared first.
    pub fn within_into(&self, center: &SVector<f64, D>, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.nodes.is_empty() || radius <= 0.0 {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        if (self.points[i] - center).norm_squared() < r2 {
                            out.push(i);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = center[axis] - value;
                    if diff < radius {
                        stack.push(left);
                    }
                    if diff > -radius {
                        stack.push(right);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// The `k` nearest points as `(index, distance)`, closest first; ties are
    /// broken by index.
    pub fn nearest_k(&self, center: &SVector<f64, D>, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((id, bound)) = stack.pop() {
            if heap.len() == k && bound > heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
                continue;
            }
            match self.nodes[id] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let cand = Candidate {
                            dist2: (self.points[i] - center).norm_squared(),
                            index: i,
                        };
                        if heap.len() < k {
                            heap.push(cand);
                        } else if cand < *heap.peek().unwrap() {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = center[axis] - value;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    // far side is visited after the near side (stack is LIFO)
                    stack.push((far, bound.max(diff * diff)));
                    stack.push((near, bound));
                }
            }
        }
        let mut out: Vec<_> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.dist2.sqrt())).collect()
    }

    pub fn nearest(&self, center: &SVector<f64, D>) -> Option<(usize, f64)> {
        self.nearest_k(center, 1).into_iter().next()
    }
}
