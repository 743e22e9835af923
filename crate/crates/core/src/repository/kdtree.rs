//! Exact k-nearest-neighbor search over per-frame descriptors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Repository;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    /// Position of the entry in the repository.
    pub entry: usize,
    pub frame: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<u32>),
    Split { axis: usize, value: f32, point: u32, left: Box<Node>, right: Box<Node> },
}

const LEAF_SIZE: usize = 8;

/// Balanced kd-tree with median splits on cycling axes. Points are numbered
/// in repository order; equal distances rank by that number.
#[derive(Debug, Clone)]
pub struct DescriptorIndex {
    dim: usize,
    points: Vec<f32>,
    refs: Vec<(u32, u32)>,
    root: Node,
}

#[derive(PartialEq)]
struct Candidate(f64, u32);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| {
        let d = f64::from(*x) - f64::from(*y);
        d * d
    }).sum()
}

impl DescriptorIndex {
    pub fn build(repo: &Repository) -> Result<Self> {
        if repo.entries.is_empty() {
            return Err(Error::EmptyRepository);
        }
        let dim = repo.dim;
        let mut points = Vec::with_capacity(repo.frame_count() * dim);
        let mut refs = Vec::new();
        for (e, entry) in repo.entries.iter().enumerate() {
            if entry.descriptors.len() % dim != 0 {
                return Err(Error::DimensionMismatch(format!("entry {} descriptor length", entry.id)));
            }
            points.extend_from_slice(&entry.descriptors);
            for f in 0..entry.frames(dim) {
                refs.push((e as u32, f as u32));
            }
        }
        let mut ids: Vec<u32> = (0..refs.len() as u32).collect();
        let root = split(&points, dim, &mut ids, 0);
        Ok(Self { dim, points, refs, root })
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: u32) -> &[f32] {
        &self.points[i as usize * self.dim..(i as usize + 1) * self.dim]
    }

    /// The `k` nearest stored descriptors by L2 distance, ascending.
    pub fn query(&self, q: &[f32], k: usize) -> Result<Vec<Match>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("query has {} values, index {}", q.len(), self.dim)));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let k = k.min(self.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, q, k, &mut heap);
        Ok(heap.into_sorted_vec().into_iter().map(|c| self.to_match(c)).collect())
    }

    fn to_match(&self, c: Candidate) -> Match {
        let (e, f) = self.refs[c.1 as usize];
        Match { entry: e as usize, frame: f as usize, distance: c.0.sqrt() }
    }

    fn offer(&self, heap: &mut BinaryHeap<Candidate>, k: usize, q: &[f32], i: u32) {
        let c = Candidate(sq_dist(q, self.point(i)), i);
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(c);
        }
    }

    fn search(&self, node: &Node, q: &[f32], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match node {
            Node::Leaf(ids) => {
                for &i in ids {
                    self.offer(heap, k, q, i);
                }
            }
            Node::Split { axis, value, point, left, right } => {
                let diff = f64::from(q[*axis]) - f64::from(*value);
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                self.offer(heap, k, q, *point);
                // A tied candidate in the far half may still win on index.
                if heap.len() < k || diff * diff <= heap.peek().expect("heap is full").0 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn split(points: &[f32], dim: usize, ids: &mut [u32], depth: usize) -> Node {
    if ids.len() <= LEAF_SIZE {
        return Node::Leaf(ids.to_vec());
    }
    let axis = depth % dim;
    let coord = |i: u32| points[i as usize * dim + axis];
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| coord(a).total_cmp(&coord(b)).then(a.cmp(&b)));
    let point = ids[mid];
    let (l, r) = ids.split_at_mut(mid);
    Node::Split {
        axis,
        value: coord(point),
        point,
        left: Box::new(split(points, dim, l, depth + 1)),
        right: Box::new(split(points, dim, &mut r[1..], depth + 1)),
    }
}

/// Exhaustive scan with the same ordering as [`DescriptorIndex::query`].
pub fn brute_force(repo: &Repository, q: &[f32], k: usize) -> Vec<Match> {
    let mut all = Vec::new();
    let mut n = 0u32;
    for (e, entry) in repo.entries.iter().enumerate() {
        for f in 0..entry.frames(repo.dim) {
            all.push((Candidate(sq_dist(q, repo.descriptor(e, f)), n), e, f));
            n += 1;
        }
    }
    all.sort_by(|a, b| a.0.cmp(&b.0));
    all.into_iter().take(k).map(|(c, e, f)| Match { entry: e, frame: f, distance: c.0.sqrt() }).collect()
}
