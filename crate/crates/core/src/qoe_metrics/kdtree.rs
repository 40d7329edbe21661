use super::{squared_distance, Point3};

const LEAF_SIZE: usize = 8;

/// Static 3-D k-d tree over a borrowed point slice.
///
/// The tree is implicit: `order` is a permutation of point indices such that
/// for every range `[lo, hi)` larger than a leaf, the median element `mid`
/// splits the range on axis `depth % 3`.
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        Self::partition(points, &mut order, 0);
        Self { points, order }
    }

    fn partition(points: &[Point3], order: &mut [usize], depth: usize) {
        if order.len() <= LEAF_SIZE {
            return;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let (left, right) = order.split_at_mut(mid);
        Self::partition(points, left, depth + 1);
        Self::partition(points, &mut right[1..], depth + 1);
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Squared distance from `query` to its nearest point; `+inf` if empty.
    pub fn nearest_squared(&self, query: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(query, 0, self.order.len(), 0, &mut best);
        best
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, depth: usize, best: &mut f64) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                let d = squared_distance(q, &self.points[i]);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let axis = depth % 3;
        let mid = lo + (hi - lo) / 2;
        let pivot = &self.points[self.order[mid]];
        let d = squared_distance(q, pivot);
        if d < *best {
            *best = d;
        }
        let diff = q[axis] - pivot[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff < *best {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}
