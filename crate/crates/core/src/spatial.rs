//! Nearest-neighbour index over small fixed-dimension point sets.
//!
//! A balanced kd-tree specialised to the two lookups the pipeline needs:
//! L2 queries over 3D vertex positions and L1 queries over 2D UV
//! coordinates. Results are exact: the reported index is the argmin of the
//! metric over all indexed points, with ties resolved toward the lowest
//! index, so a query is interchangeable with a linear scan.

use crate::error::{Error, Result};

/// Distance metric used both for ranking candidates and for axis pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    /// Distance between two points under this metric.
    pub fn dist<const D: usize>(self, a: &[f64; D], b: &[f64; D]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Immutable nearest-neighbour structure over a point list.
#[derive(Debug, Clone)]
pub struct SpatialIndex<const D: usize> {
    points: Vec<[f64; D]>,
    metric: Metric,
    /// Point indices arranged as an implicit balanced kd-tree: the median of
    /// every subrange is the node, halves are the subtrees.
    order: Vec<u32>,
}

impl<const D: usize> SpatialIndex<D> {
    pub fn build(points: Vec<[f64; D]>, metric: Metric) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        if !points.is_empty() {
            build_recursive(&points, &mut order, 0);
        }
        SpatialIndex {
            points,
            metric,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; D]] {
        &self.points
    }

    /// Index and distance of the closest indexed point.
    ///
    /// Ties break toward the lowest index, matching [`nearest_linear`].
    pub fn nearest(&self, query: &[f64; D]) -> Result<(usize, f64)> {
        if self.points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(query, 0, self.order.len(), 0, &mut best);
        Ok((best.1, best.0))
    }

    fn search(
        &self,
        query: &[f64; D],
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut (f64, usize),
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let point = &self.points[idx];
        let dist = self.metric.dist(point, query);
        if dist < best.0 || (dist == best.0 && idx < best.1) {
            *best = (dist, idx);
        }
        let axis = depth % D;
        let gap = query[axis] - point[axis];
        let (near_lo, near_hi, far_lo, far_hi) = if gap < 0.0 {
            (lo, mid, mid + 1, hi)
        } else {
            (mid + 1, hi, lo, mid)
        };
        self.search(query, near_lo, near_hi, depth + 1, best);
        // An equal gap can still hide an equal-distance point with a lower
        // index, so only a strictly larger gap prunes.
        if gap.abs() <= best.0 {
            self.search(query, far_lo, far_hi, depth + 1, best);
        }
    }
}

fn build_recursive<const D: usize>(points: &[[f64; D]], order: &mut [u32], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % D;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut rest[1..], depth + 1);
}

/// Reference linear scan with the same tie rule as [`SpatialIndex::nearest`].
pub fn nearest_linear<const D: usize>(
    points: &[[f64; D]],
    metric: Metric,
    query: &[f64; D],
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = metric.dist(p, query);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nearest_on_two_points() {
        let index = SpatialIndex::build(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], Metric::L2);
        let (idx, dist) = index.nearest(&[0.9, 0.0, 0.0]).unwrap();
        assert_eq!(idx, 1);
        assert!((dist - 0.1).abs() < 1e-12);
    }

    #[test]
    fn query_at_indexed_point_is_identity() {
        let pts = vec![[0.3, 0.7, 0.1], [0.5, 0.5, 0.5], [0.9, 0.2, 0.4]];
        let index = SpatialIndex::build(pts.clone(), Metric::L2);
        for (i, p) in pts.iter().enumerate() {
            let (idx, dist) = index.nearest(p).unwrap();
            assert_eq!(idx, i);
            assert_eq!(dist, 0.0);
        }
    }

    #[test]
    fn empty_index_errors() {
        let index = SpatialIndex::<3>::build(vec![], Metric::L2);
        assert!(matches!(index.nearest(&[0.0; 3]), Err(Error::EmptyIndex)));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        // Points symmetric around the query.
        let pts = vec![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        for metric in [Metric::L1, Metric::L2] {
            let index = SpatialIndex::build(pts.clone(), metric);
            let (idx, _) = index.nearest(&[0.0, 0.0]).unwrap();
            assert_eq!(idx, 0);
        }
    }

    #[test]
    fn matches_linear_scan_on_random_points() {
        let mut rng = StdRng::seed_from_u64(7);
        for metric in [Metric::L1, Metric::L2] {
            let points: Vec<[f64; 3]> = (0..1000)
                .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            let index = SpatialIndex::build(points.clone(), metric);
            for _ in 0..100 {
                let q = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                let (idx, dist) = index.nearest(&q).unwrap();
                let (lin_idx, lin_dist) = nearest_linear(&points, metric, &q).unwrap();
                assert_eq!(idx, lin_idx);
                assert_eq!(dist, lin_dist);
            }
        }
    }

    #[test]
    fn matches_linear_scan_on_duplicated_points() {
        let mut rng = StdRng::seed_from_u64(11);
        let base: Vec<[f64; 2]> = (0..50)
            .map(|_| [rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64])
            .collect();
        let index = SpatialIndex::build(base.clone(), Metric::L1);
        for _ in 0..200 {
            let q = [rng.gen_range(0..5) as f64 - 0.5, rng.gen_range(0..5) as f64 - 0.5];
            let (idx, _) = index.nearest(&q).unwrap();
            let (lin_idx, _) = nearest_linear(&base, Metric::L1, &q).unwrap();
            assert_eq!(idx, lin_idx);
        }
    }
}
