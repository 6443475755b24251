use super::real::{gemm, Mat};
use super::Real;

/// Offsets of one dense or conv layer in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layer {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Layer {
    pub fn weight<'a, T>(&self, p: &'a [T], rows: usize) -> &'a [T] {
        &p[self.w..self.w + rows * self.n_out]
    }

    pub fn bias<'a, T>(&self, p: &'a [T]) -> &'a [T] {
        &p[self.b..self.b + self.n_out]
    }
}

/// Post-activation outputs of every decoder layer; `acts[0]` is the input.
pub(crate) struct DecoderTape<T> {
    pub rows: usize,
    pub acts: Vec<Vec<T>>,
}

impl<T: Real> DecoderTape<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("non-empty tape")
    }
}

/// ReLU MLP over `rows` inputs of width `layers[0].n_in`, ReLU on every
/// layer including the last.
pub(crate) fn forward<T: Real>(layers: &[Layer], params: &[T], input: Vec<T>, rows: usize) -> DecoderTape<T> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for l in layers {
        let x = acts.last().unwrap();
        let mut y = Vec::with_capacity(rows * l.n_out);
        let b = l.bias(params);
        for _ in 0..rows {
            y.extend_from_slice(b);
        }
        gemm(
            Mat::new(x, rows, l.n_in),
            Mat::new(l.weight(params, l.n_in), l.n_in, l.n_out),
            T::one(),
            &mut y,
        );
        y.iter_mut().for_each(|v| *v = v.max(T::zero()));
        acts.push(y);
    }
    DecoderTape { rows, acts }
}

/// Backpropagates `dout` (one value per row). Accumulates parameter
/// gradients into `grad` when given and returns the input gradient.
pub(crate) fn backward<T: Real>(
    layers: &[Layer],
    params: &[T],
    tape: &DecoderTape<T>,
    dout: Vec<T>,
    mut grad: Option<&mut [T]>,
) -> Vec<T> {
    let rows = tape.rows;
    let mut d = dout;
    for (i, l) in layers.iter().enumerate().rev() {
        let y = &tape.acts[i + 1];
        for (g, v) in d.iter_mut().zip(y) {
            if *v <= T::zero() {
                *g = T::zero();
            }
        }
        let x = &tape.acts[i];
        if let Some(grad) = grad.as_deref_mut() {
            let dw = &mut grad[l.w..l.w + l.n_in * l.n_out];
            gemm(Mat::new(x, rows, l.n_in).t(), Mat::new(&d, rows, l.n_out), T::one(), dw);
            let db = &mut grad[l.b..l.b + l.n_out];
            for row in d.chunks_exact(l.n_out) {
                for (g, v) in db.iter_mut().zip(row) {
                    *g += *v;
                }
            }
        }
        let mut dx = vec![T::zero(); rows * l.n_in];
        gemm(
            Mat::new(&d, rows, l.n_out),
            Mat::new(l.weight(params, l.n_in), l.n_in, l.n_out).t(),
            T::zero(),
            &mut dx,
        );
        d = dx;
    }
    d
}
