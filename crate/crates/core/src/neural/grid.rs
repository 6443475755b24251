use crate::geom::PointCloud;

use super::NeuralError;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;
const MAX_CORNERS: usize = 1 << MAX_DIM;

/// Number of cells of a `res^dim` grid.
pub fn cell_count(dim: usize, res: usize) -> usize {
    res.pow(dim as u32)
}

/// Linear index of integer cell coordinates, first axis fastest.
pub fn cell_index(coords: &[usize], res: usize) -> usize {
    coords.iter().rev().fold(0, |acc, &c| acc * res + c)
}

/// Cell coordinates of a linear index.
pub fn cell_coords(mut index: usize, dim: usize, res: usize) -> [usize; MAX_DIM] {
    let mut c = [0; MAX_DIM];
    for ci in c.iter_mut().take(dim) {
        *ci = index % res;
        index /= res;
    }
    c
}

fn in_box(p: &[f64]) -> bool {
    p.iter().all(|&x| (-0.5..=0.5).contains(&x))
}

/// Indices of points outside `[-0.5, 0.5]^D` (or non-finite).
pub fn out_of_box<const D: usize>(pc: &PointCloud<D>) -> Vec<usize> {
    pc.points
        .iter()
        .enumerate()
        .filter(|(_, p)| !in_box(p.as_slice()))
        .map(|(i, _)| i)
        .collect()
}

/// Binary occupancy of a point cloud on a `res^D` grid over the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub dim: usize,
    pub res: usize,
    pub cells: Vec<bool>,
}

impl Occupancy {
    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn to_real<T: super::Real>(&self) -> Vec<T> {
        self.cells.iter().map(|&c| if c { T::one() } else { T::zero() }).collect()
    }
}

/// Cell of `p` under the convention `floor((p + 0.5) * res)`, with the upper
/// boundary folded into the last cell.
pub fn cell_of(p: &[f64], res: usize) -> [usize; MAX_DIM] {
    let mut c = [0; MAX_DIM];
    for (ci, &x) in c.iter_mut().zip(p) {
        *ci = (((x + 0.5) * res as f64).floor() as usize).min(res - 1);
    }
    c
}

pub fn voxelize<const D: usize>(pc: &PointCloud<D>, res: usize) -> Result<Occupancy, NeuralError> {
    if pc.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    if res == 0 {
        return Err(NeuralError::Arch("grid resolution must be positive".into()));
    }
    let bad = out_of_box(pc);
    if !bad.is_empty() {
        return Err(NeuralError::OutOfBox { indices: bad });
    }
    let mut cells = vec![false; cell_count(D, res)];
    for p in &pc.points {
        let c = cell_of(p.as_slice(), res);
        cells[cell_index(&c[..D], res)] = true;
    }
    Ok(Occupancy { dim: D, res, cells })
}

/// Multilinear interpolation stencil of one point on one grid.
///
/// Grid values sit at cell centers `(i + 0.5) / res - 0.5`. Outside the
/// band of centers the coordinate is clamped and its derivative is zero.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub len: usize,
    pub cells: [usize; MAX_CORNERS],
    pub weights: [f64; MAX_CORNERS],
    /// `d weight / d p` per corner.
    pub dweights: [[f64; MAX_DIM]; MAX_CORNERS],
}

impl Stencil {
    pub fn new(p: &[f64], res: usize) -> Self {
        let dim = p.len();
        debug_assert!(dim <= MAX_DIM && res >= 2);
        let hi = (res - 1) as f64;
        let mut base = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        let mut dt = [0.0; MAX_DIM];
        for i in 0..dim {
            let u = (p[i] + 0.5) * res as f64 - 0.5;
            let (uc, du) = if u < 0.0 {
                (0.0, 0.0)
            } else if u > hi {
                (hi, 0.0)
            } else {
                (u, res as f64)
            };
            let i0 = (uc.floor() as usize).min(res - 2);
            base[i] = i0;
            t[i] = uc - i0 as f64;
            dt[i] = du;
        }
        let len = 1 << dim;
        let mut s = Stencil {
            len,
            cells: [0; MAX_CORNERS],
            weights: [0.0; MAX_CORNERS],
            dweights: [[0.0; MAX_DIM]; MAX_CORNERS],
        };
        let mut coords = [0usize; MAX_DIM];
        for corner in 0..len {
            let mut w = 1.0;
            for i in 0..dim {
                let up = corner >> i & 1 == 1;
                coords[i] = base[i] + up as usize;
                w *= if up { t[i] } else { 1.0 - t[i] };
            }
            for i in 0..dim {
                let mut d = if corner >> i & 1 == 1 { dt[i] } else { -dt[i] };
                for j in (0..dim).filter(|&j| j != i) {
                    d *= if corner >> j & 1 == 1 { t[j] } else { 1.0 - t[j] };
                }
                s.dweights[corner][i] = d;
            }
            s.cells[corner] = cell_index(&coords[..dim], res);
            s.weights[corner] = w;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{sample_surface, Point, Sphere};
    use std::collections::HashSet;

    #[test]
    fn origin_lands_in_center_cell() {
        let pc = PointCloud::new(vec![Point::<3>::zeros()]);
        let occ = voxelize(&pc, 32).unwrap();
        assert_eq!(occ.occupied(), 1);
        assert!(occ.cells[cell_index(&[16, 16, 16], 32)]);
    }

    #[test]
    fn upper_boundary_folds_into_last_cell() {
        let pc = PointCloud::new(vec![Point::<2>::new(0.5, 0.5)]);
        let occ = voxelize(&pc, 8).unwrap();
        assert!(occ.cells[cell_index(&[7, 7], 8)]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            voxelize(&PointCloud::<3>::new(vec![]), 32),
            Err(NeuralError::EmptyInput)
        ));
        let pc = PointCloud::new(vec![Point::<2>::zeros(), Point::<2>::new(0.7, 0.0), Point::<2>::new(0.0, f64::NAN)]);
        match voxelize(&pc, 8) {
            Err(NeuralError::OutOfBox { indices }) => assert_eq!(indices, vec![1, 2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sphere_occupancy_matches_binning() {
        let pc = sample_surface(&Sphere::<3>::new(Point::zeros(), 0.4), 3000, 1).unwrap();
        let occ = voxelize(&pc, 32).unwrap();
        // independent binning with a hash set of integer triples
        let bins: HashSet<(i64, i64, i64)> = pc
            .points
            .iter()
            .map(|p| {
                let b = |x: f64| ((x + 0.5) * 32.0).floor().clamp(0.0, 31.0) as i64;
                (b(p.x), b(p.y), b(p.z))
            })
            .collect();
        assert_eq!(occ.occupied(), bins.len());
    }

    #[test]
    fn stencil_weights_sum_to_one() {
        for p in [[0.1, -0.2, 0.3], [-0.5, 0.5, 0.0], [0.49, -0.49, 0.01]] {
            let s = Stencil::new(&p, 8);
            let total: f64 = s.weights[..s.len].iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for i in 0..3 {
                let dsum: f64 = s.dweights[..s.len].iter().map(|d| d[i]).sum();
                assert!(dsum.abs() < 1e-12);
            }
        }
    }
}
