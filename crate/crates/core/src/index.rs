//! Exact k-nearest-fragment search in velocity/loudness space.
//!
//! Fragments are embedded as `(vx, vy, a / mean_ratio)` and queries as
//! `(vx, vy, |v|^2)`. The fragment distance is then the plain 3D Euclidean
//! distance between the two points, which a k-d tree searches exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::corpus::{Corpus, Fragment};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Maximum number of points stored in a leaf.
pub const LEAF_SIZE: usize = 16;

/// An embedded fragment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub coords: [f64; 3],
    pub id: usize,
}

impl FeaturePoint {
    pub fn from_fragment(fragment: &Fragment, mean_ratio: f64) -> Self {
        FeaturePoint {
            coords: [
                fragment.velocity.x,
                fragment.velocity.y,
                fragment.loudness / mean_ratio,
            ],
            id: fragment.index,
        }
    }
}

/// Embedding of a query velocity.
pub fn query_point(v_in: Vec2) -> [f64; 3] {
    [v_in.x, v_in.y, v_in.norm_sq()]
}

/// Euclidean distance between two embedded points.
#[inline]
pub fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `sqrt(|v_in - v_j|^2 + (|v_in|^2 - a_j / mean_ratio)^2)`.
pub fn distance(v_in: Vec2, fragment: &Fragment, mean_ratio: f64) -> f64 {
    let dx = v_in.x - fragment.velocity.x;
    let dy = v_in.y - fragment.velocity.y;
    let dz = v_in.norm_sq() - fragment.loudness / mean_ratio;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// One k-NN result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

// Max-heap entry: the worst candidate sits on top.
struct Candidate(Neighbor);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
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

/// Balanced k-d tree over embedded fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct GrainIndex {
    points: Vec<FeaturePoint>,
    nodes: Vec<Node>,
    depth: usize,
}

impl GrainIndex {
    /// Indexes every fragment of the corpus.
    pub fn embed(corpus: &Corpus) -> Result<Self> {
        let points = corpus
            .fragments()
            .iter()
            .map(|f| FeaturePoint::from_fragment(f, corpus.mean_ratio()))
            .collect();
        Self::from_points(points)
    }

    pub fn from_points(mut points: Vec<FeaturePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if points
            .iter()
            .any(|p| p.coords.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidParams("non-finite feature point".into()));
        }
        let mut nodes = Vec::new();
        let len = points.len();
        let depth = build(&mut points, 0, len, &mut nodes);
        Ok(GrainIndex {
            points,
            nodes,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Levels from the root to the deepest leaf, counting both.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Indexed points in tree order.
    pub fn points(&self) -> &[FeaturePoint] {
        &self.points
    }

    /// The `min(k, len)` fragments closest to `v_in`, ascending by distance,
    /// equal distances ordered by fragment id.
    pub fn knn(&self, v_in: Vec2, k: usize) -> Vec<Neighbor> {
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.knn_into(v_in, k, &mut out);
        out
    }

    /// Like [`GrainIndex::knn`], reusing `out`.
    pub fn knn_into(&self, v_in: Vec2, k: usize, out: &mut Vec<Neighbor>) {
        out.clear();
        if k == 0 {
            return;
        }
        let query = query_point(v_in);
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, &query, k, &mut heap);
        out.extend(heap.into_iter().map(|c| c.0));
        out.sort_by(Neighbor::key_cmp);
    }

    fn search(&self, node: usize, query: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let cand = Candidate(Neighbor {
                        id: p.id,
                        distance: euclidean(query, &p.coords),
                    });
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
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
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, heap);
                let visit_far =
                    heap.len() < k || diff.abs() <= heap.peek().expect("heap is full").0.distance;
                if visit_far {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

fn widest_axis(points: &[FeaturePoint]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for axis in 0..3 {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.coords[axis]), hi.max(p.coords[axis]))
            });
        if hi - lo > best.1 {
            best = (axis, hi - lo);
        }
    }
    best.0
}

/// Builds the subtree over `points[start..end]`, returns its depth.
fn build(points: &mut [FeaturePoint], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slot = nodes.len();
    let slice = &mut points[start..end];
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return 1;
    }
    let axis = widest_axis(slice);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.coords[axis]
            .total_cmp(&b.coords[axis])
            .then(a.id.cmp(&b.id))
    });
    let value = slice[mid].coords[axis];
    nodes.push(Node::Leaf { start, end }); // placeholder until children exist
    let left = nodes.len();
    let left_depth = build(points, start, start + mid, nodes);
    let right = nodes.len();
    let right_depth = build(points, start + mid, end, nodes);
    nodes[slot] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    1 + left_depth.max(right_depth)
}
