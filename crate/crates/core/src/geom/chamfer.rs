use rayon::prelude::*;

use super::{GeomError, Point, PointSet};

/// Squared distance from every point of `from` to its nearest neighbour in `to`.
pub fn nearest_squared_distances<const D: usize>(from: &[Point<D>], to: &PointSet<D>) -> Vec<f64> {
    from.par_iter()
        .map(|p| to.nearest(p).map(|(_, d2)| d2).unwrap_or(f64::INFINITY))
        .collect()
}

/// Symmetric Chamfer-L2 distance:
/// `0.5 * (mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2)`.
///
/// Sums run sequentially in input order so the value does not depend on the
/// worker count.
pub fn chamfer_l2<const D: usize>(a: &[Point<D>], b: &[Point<D>]) -> Result<f64, GeomError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    let sa = PointSet::new(a.to_vec());
    let sb = PointSet::new(b.to_vec());
    let ab: f64 = nearest_squared_distances(a, &sb).iter().sum::<f64>() / a.len() as f64;
    let ba: f64 = nearest_squared_distances(b, &sa).iter().sum::<f64>() / b.len() as f64;
    Ok(0.5 * (ab + ba))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let a = [Point::<3>::new(0.0, 0.0, 0.0)];
        let b = [Point::<3>::new(0.0, 0.0, 0.1)];
        assert!((chamfer_l2(&a, &b).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn identical_clouds_are_zero() {
        let a: Vec<Point<2>> = (0..50).map(|i| Point::<2>::new(i as f64 * 0.01, 0.3)).collect();
        assert_eq!(chamfer_l2(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn empty_cloud_errors() {
        let a = [Point::<3>::zeros()];
        assert!(matches!(chamfer_l2(&a, &[]), Err(GeomError::EmptyCloud)));
    }
}
