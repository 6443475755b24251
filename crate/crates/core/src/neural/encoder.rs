//! `3^d` same-padded convolutions and 2x average pooling on channels-last
//! grids, with their backward passes.

use super::grid::{cell_coords, cell_count, cell_index, MAX_DIM};
use super::real::{gemm, Mat};
use super::Real;

/// Offsets of tap `t` in `{-1, 0, 1}^dim`, first axis fastest.
fn tap_offset(t: usize, dim: usize) -> [isize; MAX_DIM] {
    let mut o = [0; MAX_DIM];
    let mut t = t;
    for oi in o.iter_mut().take(dim) {
        *oi = (t % 3) as isize - 1;
        t /= 3;
    }
    o
}

/// Neighbor cell of `cell` shifted by tap `t`, or `None` across the border.
fn neighbors(dim: usize, res: usize) -> Vec<Option<u32>> {
    let taps = 3usize.pow(dim as u32);
    let cells = cell_count(dim, res);
    let mut out = Vec::with_capacity(cells * taps);
    let mut n = [0usize; MAX_DIM];
    for cell in 0..cells {
        let c = cell_coords(cell, dim, res);
        for t in 0..taps {
            let o = tap_offset(t, dim);
            let mut inside = true;
            for i in 0..dim {
                let v = c[i] as isize + o[i];
                if v < 0 || v >= res as isize {
                    inside = false;
                    break;
                }
                n[i] = v as usize;
            }
            out.push(inside.then(|| cell_index(&n[..dim], res) as u32));
        }
    }
    out
}

/// Rows are cells, columns `tap * cin + channel`.
pub(crate) fn im2col<T: Real>(x: &[T], dim: usize, res: usize, cin: usize) -> Vec<T> {
    let taps = 3usize.pow(dim as u32);
    let nb = neighbors(dim, res);
    let mut col = vec![T::zero(); nb.len() * cin];
    for (k, n) in nb.iter().enumerate() {
        if let Some(j) = n {
            let j = *j as usize;
            col[k * cin..(k + 1) * cin].copy_from_slice(&x[j * cin..(j + 1) * cin]);
        }
    }
    debug_assert_eq!(col.len(), cell_count(dim, res) * taps * cin);
    col
}

/// Adjoint of [`im2col`].
pub(crate) fn col2im<T: Real>(col: &[T], dim: usize, res: usize, cin: usize) -> Vec<T> {
    let nb = neighbors(dim, res);
    let mut x = vec![T::zero(); cell_count(dim, res) * cin];
    for (k, n) in nb.iter().enumerate() {
        if let Some(j) = n {
            let j = *j as usize;
            for c in 0..cin {
                x[j * cin + c] += col[k * cin + c];
            }
        }
    }
    x
}

pub(crate) struct ConvShape {
    pub dim: usize,
    pub res: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvShape {
    fn taps(&self) -> usize {
        3usize.pow(self.dim as u32)
    }
    fn cells(&self) -> usize {
        cell_count(self.dim, self.res)
    }
}

/// Convolution followed by ReLU. Returns the im2col matrix and the output.
pub(crate) fn conv_relu<T: Real>(s: &ConvShape, x: &[T], w: &[T], b: &[T]) -> (Vec<T>, Vec<T>) {
    let col = im2col(x, s.dim, s.res, s.cin);
    let cells = s.cells();
    let k = s.taps() * s.cin;
    let mut y = Vec::with_capacity(cells * s.cout);
    for _ in 0..cells {
        y.extend_from_slice(b);
    }
    gemm(Mat::new(&col, cells, k), Mat::new(w, k, s.cout), T::one(), &mut y);
    y.iter_mut().for_each(|v| *v = v.max(T::zero()));
    (col, y)
}

/// Backward of [`conv_relu`]; accumulates into `dw`, `db` and returns the
/// input gradient when asked for.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_relu_backward<T: Real>(
    s: &ConvShape,
    col: &[T],
    y: &[T],
    mut dy: Vec<T>,
    w: &[T],
    dw: &mut [T],
    db: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    let cells = s.cells();
    let k = s.taps() * s.cin;
    for (d, v) in dy.iter_mut().zip(y) {
        if *v <= T::zero() {
            *d = T::zero();
        }
    }
    gemm(Mat::new(col, cells, k).t(), Mat::new(&dy, cells, s.cout), T::one(), dw);
    for row in dy.chunks_exact(s.cout) {
        for (g, d) in db.iter_mut().zip(row) {
            *g += *d;
        }
    }
    want_dx.then(|| {
        let mut dcol = vec![T::zero(); cells * k];
        gemm(Mat::new(&dy, cells, s.cout), Mat::new(w, k, s.cout).t(), T::zero(), &mut dcol);
        col2im(&dcol, s.dim, s.res, s.cin)
    })
}

/// 2x average pooling from `res` to `res / 2`.
pub(crate) fn avg_pool<T: Real>(x: &[T], dim: usize, res: usize, ch: usize) -> Vec<T> {
    let half = res / 2;
    let children = 1 << dim;
    let scale = T::of(1.0 / children as f64);
    let mut y = vec![T::zero(); cell_count(dim, half) * ch];
    let mut src = [0usize; MAX_DIM];
    for cell in 0..cell_count(dim, half) {
        let c = cell_coords(cell, dim, half);
        for k in 0..children {
            for i in 0..dim {
                src[i] = 2 * c[i] + (k >> i & 1);
            }
            let j = cell_index(&src[..dim], res);
            for q in 0..ch {
                y[cell * ch + q] += x[j * ch + q];
            }
        }
        for q in 0..ch {
            y[cell * ch + q] *= scale;
        }
    }
    y
}

/// Adjoint of [`avg_pool`].
pub(crate) fn avg_pool_backward<T: Real>(dy: &[T], dim: usize, res: usize, ch: usize) -> Vec<T> {
    let half = res / 2;
    let children = 1 << dim;
    let scale = T::of(1.0 / children as f64);
    let mut dx = vec![T::zero(); cell_count(dim, res) * ch];
    let mut src = [0usize; MAX_DIM];
    for cell in 0..cell_count(dim, half) {
        let c = cell_coords(cell, dim, half);
        for k in 0..children {
            for i in 0..dim {
                src[i] = 2 * c[i] + (k >> i & 1);
            }
            let j = cell_index(&src[..dim], res);
            for q in 0..ch {
                dx[j * ch + q] = dy[cell * ch + q] * scale;
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_tap_kernel_is_identity() {
        // 4^3 grid with one channel; only the center tap is 1
        let s = ConvShape {
            dim: 3,
            res: 4,
            cin: 1,
            cout: 1,
        };
        let x: Vec<f64> = (0..64).map(|i| (i % 5) as f64).collect();
        let mut w = vec![0.0; 27];
        w[13] = 1.0;
        let (_, y) = conv_relu(&s, &x, &w, &[0.0]);
        assert_eq!(y, x);
    }

    #[test]
    fn box_kernel_counts_neighbors() {
        // all-ones kernel on an all-ones 4^3 grid: output is the number of
        // in-bounds neighbors, 8 at corners and 27 inside
        let s = ConvShape {
            dim: 3,
            res: 4,
            cin: 1,
            cout: 1,
        };
        let (_, y) = conv_relu(&s, &[1.0; 64], &[1.0; 27], &[0.0]);
        assert_eq!(y[cell_index(&[0, 0, 0], 4)], 8.0);
        assert_eq!(y[cell_index(&[1, 0, 0], 4)], 12.0);
        assert_eq!(y[cell_index(&[1, 1, 0], 4)], 18.0);
        assert_eq!(y[cell_index(&[1, 2, 1], 4)], 27.0);
    }

    #[test]
    fn shifted_tap_moves_values() {
        // tap (+1, 0) reads the right neighbor in 2D
        let s = ConvShape {
            dim: 2,
            res: 3,
            cin: 1,
            cout: 1,
        };
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let mut w = vec![0.0; 9];
        w[5] = 1.0;
        let (_, y) = conv_relu(&s, &x, &w, &[0.0]);
        assert_eq!(y, vec![2.0, 3.0, 0.0, 5.0, 6.0, 0.0, 8.0, 9.0, 0.0]);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let s = ConvShape {
            dim: 2,
            res: 8,
            cin: 3,
            cout: 4,
        };
        let w: Vec<f64> = (0..9 * 12).map(|i| (i as f64).sin()).collect();
        let (_, y) = conv_relu(&s, &vec![0.0; 64 * 3], &w, &[0.0; 4]);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoints_satisfy_dot_identity() {
        // <A x, y> == <x, A^T y> for im2col and pooling
        let (dim, res, ch) = (3, 4, 2);
        let n = cell_count(dim, res) * ch;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let col = im2col(&x, dim, res, ch);
        let yc: Vec<f64> = (0..col.len()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = col.iter().zip(&yc).map(|(a, b)| a * b).sum();
        let back = col2im(&yc, dim, res, ch);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);

        let p = avg_pool(&x, dim, res, ch);
        let yp: Vec<f64> = (0..p.len()).map(|i| (i as f64 * 1.3).cos()).collect();
        let lhs: f64 = p.iter().zip(&yp).map(|(a, b)| a * b).sum();
        let back = avg_pool_backward(&yp, dim, res, ch);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
