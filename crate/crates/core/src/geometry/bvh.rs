//! Small bounding-volume hierarchy over facet AABBs.
//!
//! Purely an accelerator: queries return a conservative candidate set, so
//! results after exact facet tests are identical to a brute-force scan.

use crate::math::{Aabb, Vec3};

#[derive(Debug)]
enum Node {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug)]
pub struct Bvh {
    nodes: Vec<(Aabb, Node)>,
    /// Facet indices, permuted so leaves reference contiguous runs.
    order: Vec<u32>,
    root: usize,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Bvh {
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: Vec::new(), root: 0 };
        if boxes.is_empty() {
            bvh.nodes.push((
                Aabb::new(Vec3::ZERO, Vec3::ZERO),
                Node::Leaf { start: 0, count: 0 },
            ));
            return bvh;
        }
        let root = bvh.build_node(boxes, &mut order, 0, boxes.len());
        bvh.root = root;
        bvh.order = order;
        bvh
    }

    fn build_node(
        &mut self,
        boxes: &[Aabb],
        order: &mut [u32],
        start: usize,
        end: usize,
    ) -> usize {
        let span = &order[start..end];
        let mut bb = boxes[span[0] as usize];
        for &i in &span[1..] {
            bb = bb.union(&boxes[i as usize]);
        }
        if end - start <= LEAF_SIZE {
            self.nodes.push((bb, Node::Leaf { start, count: end - start }));
            return self.nodes.len() - 1;
        }
        // Median split along the largest extent of the centroid cloud.
        let size = bb.size();
        let axis = if size.x >= size.y && size.x >= size.z {
            0
        } else if size.y >= size.z {
            1
        } else {
            2
        };
        let key = |i: u32| {
            let c = boxes[i as usize].center();
            match axis {
                0 => c.x,
                1 => c.y,
                _ => c.z,
            }
        };
        let mid = (start + end) / 2;
        order[start..end].sort_by(|&a, &b| {
            key(a).partial_cmp(&key(b)).unwrap().then(a.cmp(&b))
        });
        let left = self.build_node(boxes, order, start, mid);
        let right = self.build_node(boxes, order, mid, end);
        self.nodes.push((bb, Node::Inner { left, right }));
        self.nodes.len() - 1
    }

    /// Calls `visit` with every facet index whose AABB may intersect the
    /// segment.
    pub fn for_segment(&self, a: Vec3, b: Vec3, visit: &mut impl FnMut(u32)) {
        if self.order.is_empty() {
            return;
        }
        let mut stack = vec![self.root];
        while let Some(idx) = stack.pop() {
            let (bb, node) = &self.nodes[idx];
            if !bb.intersects_segment(a, b) {
                continue;
            }
            match node {
                Node::Leaf { start, count } => {
                    for &f in &self.order[*start..*start + *count] {
                        visit(f);
                    }
                }
                Node::Inner { left, right } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
    }
}
