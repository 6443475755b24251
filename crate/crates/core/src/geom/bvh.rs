use super::{Aabb, Point};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvhNodeKind {
    /// Elements `order[start..start + count]`.
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct BvhNode<const D: usize> {
    pub bounds: Aabb<D>,
    pub kind: BvhNodeKind,
}

/// Bounding-volume hierarchy over element boxes, used for exact nearest
/// queries. Median split on the longest centroid axis.
#[derive(Debug, Clone)]
pub struct Bvh<const D: usize> {
    nodes: Vec<BvhNode<D>>,
    order: Vec<u32>,
}

impl<const D: usize> Bvh<D> {
    pub fn build(boxes: &[Aabb<D>]) -> Self {
        let mut bvh = Self {
            nodes: Vec::new(),
            order: (0..boxes.len() as u32).collect(),
        };
        if !boxes.is_empty() {
            let centroids: Vec<Point<D>> = boxes.iter().map(Aabb::center).collect();
            bvh.build_range(boxes, &centroids, 0, boxes.len());
        }
        bvh
    }

    fn build_range(&mut self, boxes: &[Aabb<D>], centroids: &[Point<D>], start: usize, end: usize) -> u32 {
        let slot = self.nodes.len();
        let mut bounds = Aabb::empty();
        for &e in &self.order[start..end] {
            bounds = bounds.union(&boxes[e as usize]);
        }
        self.nodes.push(BvhNode {
            bounds,
            kind: BvhNodeKind::Leaf {
                start: start as u32,
                count: (end - start) as u32,
            },
        });
        if end - start <= LEAF_SIZE {
            return slot as u32;
        }

        let cbounds = Aabb::from_points(self.order[start..end].iter().map(|&e| &centroids[e as usize]));
        let axis = cbounds.longest_axis();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_range(boxes, centroids, start, mid);
        let right = self.build_range(boxes, centroids, mid, end);
        self.nodes[slot].kind = BvhNodeKind::Inner { left, right };
        slot as u32
    }

    pub fn nodes(&self) -> &[BvhNode<D>] {
        &self.nodes
    }

    /// Element permutation referenced by leaf ranges.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Branch-and-bound nearest element. `elem(i)` returns the squared
    /// distance from `p` to element `i` plus a payload (usually the closest
    /// point). Equal distances resolve to the lowest element index.
    pub fn nearest<T, F>(&self, p: &Point<D>, mut elem: F) -> Option<(usize, f64, T)>
    where
        F: FnMut(usize) -> (f64, T),
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64, T)> = None;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((node, box_d2)) = stack.pop() {
            if let Some((_, best_d2, _)) = &best {
                if box_d2 > *best_d2 {
                    continue;
                }
            }
            match self.nodes[node as usize].kind {
                BvhNodeKind::Leaf { start, count } => {
                    for &e in &self.order[start as usize..(start + count) as usize] {
                        let e = e as usize;
                        let (d2, payload) = elem(e);
                        let better = match &best {
                            None => true,
                            Some((be, bd2, _)) => d2 < *bd2 || (d2 == *bd2 && e < *be),
                        };
                        if better {
                            best = Some((e, d2, payload));
                        }
                    }
                }
                BvhNodeKind::Inner { left, right } => {
                    let dl = self.nodes[left as usize].bounds.distance_squared(p);
                    let dr = self.nodes[right as usize].bounds.distance_squared(p);
                    // push the farther child first so the nearer one is explored first
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::seeded_rng;
    use rand::Rng;

    fn random_boxes(n: usize, seed: u64) -> Vec<Aabb<3>> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let c = Point::<3>::from_fn(|_, _| rng.random_range(-1.0..1.0));
                let h = Point::<3>::from_fn(|_, _| rng.random_range(0.0..0.05));
                Aabb::new(c - h, c + h)
            })
            .collect()
    }

    #[test]
    fn structure_invariants() {
        let boxes = random_boxes(500, 3);
        let bvh = Bvh::build(&boxes);
        let mut seen = vec![0usize; boxes.len()];
        for node in bvh.nodes() {
            match node.kind {
                BvhNodeKind::Leaf { start, count } => {
                    assert!(count >= 1);
                    for &e in &bvh.order()[start as usize..(start + count) as usize] {
                        seen[e as usize] += 1;
                        assert!(node.bounds.contains_box(&boxes[e as usize]));
                    }
                }
                BvhNodeKind::Inner { left, right } => {
                    assert!(node.bounds.contains_box(&bvh.nodes()[left as usize].bounds));
                    assert!(node.bounds.contains_box(&bvh.nodes()[right as usize].bounds));
                }
            }
        }
        // leaves partition the element set
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let boxes = random_boxes(300, 9);
        let bvh = Bvh::build(&boxes);
        let mut rng = seeded_rng(10);
        for _ in 0..200 {
            let p = Point::<3>::from_fn(|_, _| rng.random_range(-1.5..1.5));
            let (e, d2, _) = bvh.nearest(&p, |i| (boxes[i].distance_squared(&p), ())).unwrap();
            let mut be = 0;
            let mut bd = f64::INFINITY;
            for (i, b) in boxes.iter().enumerate() {
                let d = b.distance_squared(&p);
                if d < bd {
                    bd = d;
                    be = i;
                }
            }
            assert_eq!(d2, bd);
            assert_eq!(e, be);
        }
    }

    #[test]
    fn empty_hierarchy_has_no_nearest() {
        let bvh = Bvh::<2>::build(&[]);
        assert!(bvh.nearest(&Point::zeros(), |_| (0.0, ())).is_none());
    }
}
