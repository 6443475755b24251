use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::arch::{Arch, Conditioning, ParamLayout};
use super::decoder::{self, Layer};
use super::encoder::{avg_pool, avg_pool_backward, conv_relu, conv_relu_backward, ConvShape};
use super::grid::{out_of_box, voxelize, Stencil, MAX_DIM};
use super::loss::{clamped_l1, clamped_l1_grad};
use super::{NeuralError, Real};
use crate::field::{DistanceField, BATCH_BLOCK};
use crate::geom::{seeded_rng, Aabb, Point, PointCloud, Vector};

/// Offsets of every layer, derived once from the layout.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Net {
    pub convs: Vec<Vec<Layer>>,
    /// Auto-decoder grid offsets, `[shape][scale]`.
    pub grids: Vec<Vec<usize>>,
    pub dec: Vec<Layer>,
}

impl Net {
    fn new(arch: &Arch, layout: &ParamLayout) -> Self {
        let layer = |prefix: &str| {
            let w = layout.get(&format!("{prefix}.weight")).expect("weight");
            let b = layout.get(&format!("{prefix}.bias")).expect("bias");
            let n_out = b.len();
            Layer {
                w: w.offset,
                b: b.offset,
                n_in: w.len() / n_out,
                n_out,
            }
        };
        let mut convs = vec![];
        let mut grids = vec![];
        match arch.conditioning {
            Conditioning::Encoder => {
                for s in 0..arch.scales() {
                    convs.push(
                        (0..arch.convs_per_scale)
                            .map(|j| {
                                let mut l = layer(&format!("enc.{s}.{j}"));
                                l.n_in /= arch.taps();
                                l
                            })
                            .collect(),
                    );
                }
            }
            Conditioning::AutoDecoder { shapes } => {
                for shape in 0..shapes {
                    grids.push(
                        (0..arch.scales())
                            .map(|s| layout.range(&format!("grid.{shape}.{s}")).start)
                            .collect(),
                    );
                }
            }
        }
        let dec = (0..arch.decoder_sizes().len() - 1)
            .map(|i| layer(&format!("dec.{i}")))
            .collect();
        Self { convs, grids, dec }
    }
}

/// Multi-scale feature grids of one conditioning input, channels-last,
/// finest scale first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrids<T = f32> {
    pub dim: usize,
    pub channels: usize,
    pub resolutions: Vec<usize>,
    pub grids: Vec<Vec<T>>,
}

impl<T: Real> FeatureGrids<T> {
    /// Interpolated features at `p`, concatenated over scales.
    pub fn query(&self, p: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if p.len() != self.dim {
            return Err(NeuralError::DimMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        if !p.iter().all(|x| (-0.5..=0.5).contains(x)) {
            return Err(NeuralError::OutOfBox { indices: vec![0] });
        }
        let (x, _) = gather(self, p, false);
        Ok(x.iter().map(|v| v.f64()).collect())
    }

    fn width(&self) -> usize {
        self.grids.len() * self.channels
    }
}

/// Interpolates features for flat in-box points. Returns the decoder input
/// matrix and one stencil per point and scale.
fn gather<T: Real>(fg: &FeatureGrids<T>, pts: &[f64], concat: bool) -> (Vec<T>, Vec<Stencil>) {
    let dim = fg.dim;
    let rows = pts.len() / dim;
    let c = fg.channels;
    let width = fg.width() + if concat { dim } else { 0 };
    let mut x = vec![T::zero(); rows * width];
    let mut stencils = Vec::with_capacity(rows * fg.grids.len());
    for (r, p) in pts.chunks_exact(dim).enumerate() {
        let row = &mut x[r * width..(r + 1) * width];
        for (s, grid) in fg.grids.iter().enumerate() {
            let st = Stencil::new(p, fg.resolutions[s]);
            let out = &mut row[s * c..(s + 1) * c];
            for k in 0..st.len {
                let w = T::of(st.weights[k]);
                let f = &grid[st.cells[k] * c..(st.cells[k] + 1) * c];
                for (o, v) in out.iter_mut().zip(f) {
                    *o += w * *v;
                }
            }
            stencils.push(st);
        }
        if concat {
            for i in 0..dim {
                row[fg.width() + i] = T::of(p[i]);
            }
        }
    }
    (x, stencils)
}

/// Adjoint of [`gather`] with respect to the grid values.
fn scatter<T: Real>(fg: &FeatureGrids<T>, stencils: &[Stencil], dx: &[T], width: usize) -> Vec<Vec<T>> {
    let c = fg.channels;
    let scales = fg.grids.len();
    let mut d: Vec<Vec<T>> = fg.grids.iter().map(|g| vec![T::zero(); g.len()]).collect();
    for (r, drow) in dx.chunks_exact(width).enumerate() {
        for s in 0..scales {
            let st = &stencils[r * scales + s];
            let g = &drow[s * c..(s + 1) * c];
            for k in 0..st.len {
                let w = T::of(st.weights[k]);
                let out = &mut d[s][st.cells[k] * c..(st.cells[k] + 1) * c];
                for (o, v) in out.iter_mut().zip(g) {
                    *o += w * *v;
                }
            }
        }
    }
    d
}

/// Chain rule from decoder-input gradients to point coordinates.
fn spatial_grad<T: Real>(
    fg: &FeatureGrids<T>,
    stencils: &[Stencil],
    dx: &[T],
    width: usize,
    concat: bool,
) -> Vec<[f64; MAX_DIM]> {
    let c = fg.channels;
    let dim = fg.dim;
    let scales = fg.grids.len();
    dx.chunks_exact(width)
        .enumerate()
        .map(|(r, drow)| {
            let mut g = [0.0; MAX_DIM];
            for s in 0..scales {
                let st = &stencils[r * scales + s];
                let ds = &drow[s * c..(s + 1) * c];
                for k in 0..st.len {
                    let f = &fg.grids[s][st.cells[k] * c..(st.cells[k] + 1) * c];
                    let dot: f64 = ds.iter().zip(f).map(|(a, b)| a.f64() * b.f64()).sum();
                    for (gi, dw) in g.iter_mut().zip(&st.dweights[k]).take(dim) {
                        *gi += dot * dw;
                    }
                }
            }
            if concat {
                for (i, gi) in g.iter_mut().enumerate().take(dim) {
                    *gi += drow[fg.width() + i].f64();
                }
            }
            g
        })
        .collect()
}

struct EncoderTape<T> {
    /// `(im2col, output)` per conv, per scale.
    steps: Vec<Vec<(Vec<T>, Vec<T>)>>,
}

/// Which feature grids a shape uses.
#[derive(Debug, Clone, Copy)]
pub enum ShapeInput<'a, const D: usize> {
    /// Encode this cloud (encoder models).
    Cloud(&'a PointCloud<D>),
    /// Use the learned grids of this training shape (auto-decoder models).
    Index(usize),
}

/// Occupancy grid or shape index, already validated.
pub(crate) enum Prepared<T> {
    Occupancy(Vec<T>),
    Index(usize),
}

/// Learned field `f_x = decoder(features_x(p))` independent of any
/// particular input; see [`NeuralModel::condition`].
#[derive(Debug, Clone)]
pub struct NeuralModel<T: Real = f32> {
    arch: Arch,
    layout: ParamLayout,
    net: Net,
    params: Arc<Vec<T>>,
}

impl<T: Real> PartialEq for NeuralModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.params == other.params
    }
}

impl<T: Real> NeuralModel<T> {
    /// Randomly initialized model.
    pub fn new(arch: Arch, seed: u64) -> Result<Self, NeuralError> {
        arch.validate()?;
        let layout = arch.layout();
        let net = Net::new(&arch, &layout);
        let mut params = vec![T::zero(); layout.total];
        let mut rng = seeded_rng(seed);
        let mut uniform = |dst: &mut [T], a: f64| {
            for v in dst {
                *v = T::of(rng.random_range(-a..a));
            }
        };
        for l in net.convs.iter().flatten() {
            let fan_in = arch.taps() * l.n_in;
            uniform(&mut params[l.w..l.w + fan_in * l.n_out], (6.0 / fan_in as f64).sqrt());
        }
        for shape in &net.grids {
            for (s, &off) in shape.iter().enumerate() {
                let n = super::grid::cell_count(arch.dim, arch.resolutions[s]) * arch.channels;
                uniform(&mut params[off..off + n], 0.05);
            }
        }
        let last = net.dec.len() - 1;
        for (i, l) in net.dec.iter().enumerate() {
            let a = (6.0 / l.n_in as f64).sqrt();
            if i == last {
                uniform(&mut params[l.w..l.w + l.n_in], 0.1 * a);
                params[l.b] = T::of(0.5 * arch.delta);
            } else {
                uniform(&mut params[l.w..l.w + l.n_in * l.n_out], a);
                params[l.b..l.b + l.n_out].iter_mut().for_each(|b| *b = T::of(0.01));
            }
        }
        Ok(Self {
            arch,
            layout,
            net,
            params: Arc::new(params),
        })
    }

    /// Model from an existing parameter vector laid out per [`Arch::layout`].
    pub fn from_params(arch: Arch, params: Vec<T>) -> Result<Self, NeuralError> {
        arch.validate()?;
        let layout = arch.layout();
        if params.len() != layout.total {
            return Err(NeuralError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::ShapeMismatch("non-finite parameter".into()));
        }
        let net = Net::new(&arch, &layout);
        Ok(Self {
            arch,
            layout,
            net,
            params: Arc::new(params),
        })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        Arc::make_mut(&mut self.params).as_mut_slice()
    }

    pub fn delta(&self) -> f64 {
        self.arch.delta
    }

    /// Same model in another precision.
    pub fn cast<U: Real>(&self) -> NeuralModel<U> {
        NeuralModel {
            arch: self.arch.clone(),
            layout: self.layout.clone(),
            net: self.net.clone(),
            params: Arc::new(self.params.iter().map(|p| U::of(p.f64())).collect()),
        }
    }

    fn check_dim<const D: usize>(&self) -> Result<(), NeuralError> {
        if D != self.arch.dim {
            return Err(NeuralError::DimMismatch {
                expected: self.arch.dim,
                got: D,
            });
        }
        Ok(())
    }

    pub(crate) fn prepare<const D: usize>(&self, input: ShapeInput<D>) -> Result<Prepared<T>, NeuralError> {
        self.check_dim::<D>()?;
        match (input, self.arch.conditioning) {
            (ShapeInput::Cloud(pc), Conditioning::Encoder) => {
                Ok(Prepared::Occupancy(voxelize(pc, self.arch.resolutions[0])?.to_real()))
            }
            (ShapeInput::Index(i), Conditioning::AutoDecoder { shapes }) => {
                if i >= shapes {
                    return Err(NeuralError::ShapeIndex { index: i, shapes });
                }
                Ok(Prepared::Index(i))
            }
            (ShapeInput::Cloud(_), _) => Err(NeuralError::Arch("auto-decoder models take a shape index".into())),
            (ShapeInput::Index(_), _) => Err(NeuralError::Arch("encoder models take an input cloud".into())),
        }
    }

    fn encode_occupancy(&self, occ: Vec<T>, keep: bool) -> (FeatureGrids<T>, Option<EncoderTape<T>>) {
        let a = &self.arch;
        let p = self.params.as_slice();
        let mut x = occ;
        let mut grids = vec![];
        let mut steps = vec![];
        for s in 0..a.scales() {
            let res = a.resolutions[s];
            if s > 0 {
                x = avg_pool(&x, a.dim, a.resolutions[s - 1], a.channels);
            }
            let mut st = vec![];
            for l in &self.net.convs[s] {
                let shape = ConvShape {
                    dim: a.dim,
                    res,
                    cin: l.n_in,
                    cout: l.n_out,
                };
                let (col, y) = conv_relu(&shape, &x, l.weight(p, a.taps() * l.n_in), l.bias(p));
                x = y;
                if keep {
                    st.push((col, x.clone()));
                }
            }
            grids.push(x.clone());
            steps.push(st);
        }
        let fg = FeatureGrids {
            dim: a.dim,
            channels: a.channels,
            resolutions: a.resolutions.clone(),
            grids,
        };
        (fg, keep.then_some(EncoderTape { steps }))
    }

    fn encode_backward(&self, tape: &EncoderTape<T>, mut dgrids: Vec<Vec<T>>, grad: &mut [T]) {
        let a = &self.arch;
        let p = self.params.as_slice();
        let mut carry: Option<Vec<T>> = None;
        for s in (0..a.scales()).rev() {
            let mut d = std::mem::take(&mut dgrids[s]);
            if let Some(c) = carry.take() {
                d.iter_mut().zip(c).for_each(|(x, y)| *x += y);
            }
            for (j, l) in self.net.convs[s].iter().enumerate().rev() {
                let (col, y) = &tape.steps[s][j];
                let shape = ConvShape {
                    dim: a.dim,
                    res: a.resolutions[s],
                    cin: l.n_in,
                    cout: l.n_out,
                };
                let wlen = a.taps() * l.n_in * l.n_out;
                let (dw, rest) = grad[l.w..].split_at_mut(l.b - l.w);
                let want_dx = !(s == 0 && j == 0);
                let dx = conv_relu_backward(
                    &shape,
                    col,
                    y,
                    d,
                    l.weight(p, a.taps() * l.n_in),
                    &mut dw[..wlen],
                    &mut rest[..l.n_out],
                    want_dx,
                );
                d = dx.unwrap_or_default();
            }
            if s > 0 {
                carry = Some(avg_pool_backward(&d, a.dim, a.resolutions[s - 1], a.channels));
            }
        }
    }

    fn grids_of(&self, shape: usize) -> FeatureGrids<T> {
        let a = &self.arch;
        let grids = self.net.grids[shape]
            .iter()
            .enumerate()
            .map(|(s, &off)| {
                let n = super::grid::cell_count(a.dim, a.resolutions[s]) * a.channels;
                self.params[off..off + n].to_vec()
            })
            .collect();
        FeatureGrids {
            dim: a.dim,
            channels: a.channels,
            resolutions: a.resolutions.clone(),
            grids,
        }
    }

    /// Feature grids of a conditioning input.
    pub fn features<const D: usize>(&self, input: ShapeInput<D>) -> Result<FeatureGrids<T>, NeuralError> {
        Ok(match self.prepare(input)? {
            Prepared::Occupancy(occ) => self.encode_occupancy(occ, false).0,
            Prepared::Index(i) => self.grids_of(i),
        })
    }

    /// Field conditioned on an input cloud.
    pub fn condition<const D: usize>(&self, input: &PointCloud<D>) -> Result<NeuralField<D, T>, NeuralError> {
        self.field(ShapeInput::Cloud(input))
    }

    pub fn field<const D: usize>(&self, input: ShapeInput<D>) -> Result<NeuralField<D, T>, NeuralError> {
        let grids = self.features(input)?;
        Ok(NeuralField {
            model: self.clone(),
            grids,
        })
    }

    /// Sum of clamped L1 losses over `pts` and its gradient, scaled by
    /// `weight`, accumulated into `grad`.
    pub(crate) fn accumulate(
        &self,
        shape: &Prepared<T>,
        pts: &[f64],
        gt: &[f64],
        weight: f64,
        grad: &mut [T],
    ) -> f64 {
        let a = &self.arch;
        let (fg, tape) = match shape {
            Prepared::Occupancy(occ) => self.encode_occupancy(occ.clone(), true),
            Prepared::Index(i) => (self.grids_of(*i), None),
        };
        let rows = gt.len();
        let width = a.decoder_input();
        let (x, stencils) = gather(&fg, pts, a.concat_coords);
        let dt = decoder::forward(&self.net.dec, &self.params, x, rows);
        let mut total = 0.0;
        let dout: Vec<T> = dt
            .output()
            .iter()
            .zip(gt)
            .map(|(f, g)| {
                total += clamped_l1(f.f64(), *g, a.delta);
                T::of(weight * clamped_l1_grad(f.f64(), *g, a.delta))
            })
            .collect();
        let dx = decoder::backward(&self.net.dec, &self.params, &dt, dout, Some(grad));
        let dgrids = scatter(&fg, &stencils, &dx, width);
        match (shape, tape) {
            (Prepared::Occupancy(_), Some(tape)) => self.encode_backward(&tape, dgrids, grad),
            (Prepared::Index(i), _) => {
                for (s, d) in dgrids.iter().enumerate() {
                    let off = self.net.grids[*i][s];
                    grad[off..off + d.len()].iter_mut().zip(d).for_each(|(g, v)| *g += *v);
                }
            }
            _ => unreachable!("encoder forward keeps its tape"),
        }
        total
    }

    /// Mean clamped L1 loss over `points` and its parameter gradient.
    pub fn loss_and_grad<const D: usize>(
        &self,
        input: ShapeInput<D>,
        points: &[Point<D>],
        gt: &[f64],
    ) -> Result<(f64, Vec<T>), NeuralError> {
        let shape = self.prepare(input)?;
        let pts = flatten_in_box(points)?;
        if gt.len() != points.len() {
            return Err(NeuralError::ShapeMismatch("one ground-truth value per point".into()));
        }
        let mut grad = vec![T::zero(); self.layout.total];
        let n = points.len().max(1) as f64;
        let sum = self.accumulate(&shape, &pts, gt, 1.0 / n, &mut grad);
        Ok((sum / n, grad))
    }

    /// Mean clamped L1 loss without gradients.
    pub fn loss<const D: usize>(&self, input: ShapeInput<D>, points: &[Point<D>], gt: &[f64]) -> Result<f64, NeuralError> {
        let f = self.field(input)?;
        flatten_in_box(points)?;
        let pred = f.eval_batch(points);
        let n = points.len().max(1) as f64;
        Ok(pred.iter().zip(gt).map(|(p, g)| clamped_l1(*p, *g, self.arch.delta)).sum::<f64>() / n)
    }
}

fn flatten_in_box<const D: usize>(points: &[Point<D>]) -> Result<Vec<f64>, NeuralError> {
    let pc = PointCloud::new(points.to_vec());
    let bad = out_of_box(&pc);
    if !bad.is_empty() {
        return Err(NeuralError::OutOfBox { indices: bad });
    }
    Ok(points.iter().flat_map(|p| p.iter().copied()).collect())
}

/// A model bound to one conditioning input.
///
/// Inside `[-0.5, 0.5]^D` this is the network itself. The
/// [`DistanceField`] impl extends it outside the box by
/// `f(clamp(p)) + |p - clamp(p)|`; use [`NeuralField::try_eval`] for strict
/// queries.
#[derive(Debug, Clone)]
pub struct NeuralField<const D: usize, T: Real = f32> {
    model: NeuralModel<T>,
    grids: FeatureGrids<T>,
}

impl<const D: usize, T: Real> NeuralField<D, T> {
    pub fn model(&self) -> &NeuralModel<T> {
        &self.model
    }

    pub fn grids(&self) -> &FeatureGrids<T> {
        &self.grids
    }

    pub fn query_features(&self, p: &Point<D>) -> Result<Vec<f64>, NeuralError> {
        self.grids.query(p.as_slice())
    }

    pub fn try_eval(&self, p: &Point<D>) -> Result<f64, NeuralError> {
        flatten_in_box(std::slice::from_ref(p))?;
        Ok(self.run(std::slice::from_ref(p), false)[0].0)
    }

    pub fn try_eval_grad(&self, p: &Point<D>) -> Result<(f64, Vector<D>), NeuralError> {
        flatten_in_box(std::slice::from_ref(p))?;
        Ok(self.run(std::slice::from_ref(p), true)[0])
    }

    /// Network output for in-box points.
    fn run(&self, pts: &[Point<D>], want_grad: bool) -> Vec<(f64, Vector<D>)> {
        let a = &self.model.arch;
        let flat: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
        let (x, stencils) = gather(&self.grids, &flat, a.concat_coords);
        let dt = decoder::forward(&self.model.net.dec, &self.model.params, x, pts.len());
        let values: Vec<f64> = dt.output().iter().map(|v| v.f64()).collect();
        if !want_grad {
            return values.into_iter().map(|v| (v, Vector::<D>::zeros())).collect();
        }
        let dx = decoder::backward(&self.model.net.dec, &self.model.params, &dt, vec![T::one(); pts.len()], None);
        let g = spatial_grad(&self.grids, &stencils, &dx, a.decoder_input(), a.concat_coords);
        values
            .into_iter()
            .zip(g)
            .map(|(v, g)| (v, Vector::<D>::from_fn(|i, _| g[i])))
            .collect()
    }

    /// Lipschitz extension of [`Self::run`] to all of `R^D`.
    fn run_extended(&self, pts: &[Point<D>], want_grad: bool) -> Vec<(f64, Vector<D>)> {
        let clamped: Vec<Point<D>> = pts.iter().map(|p| p.map(|x| x.clamp(-0.5, 0.5))).collect();
        let inner = self.run(&clamped, want_grad);
        inner
            .into_iter()
            .zip(pts.iter().zip(&clamped))
            .map(|((v, mut g), (p, c))| {
                let off = p - c;
                let d = off.norm();
                if d == 0.0 {
                    return (v, g);
                }
                if want_grad {
                    for i in 0..D {
                        if off[i] != 0.0 {
                            g[i] = 0.0;
                        }
                    }
                    g += off / d;
                }
                (v + d, g)
            })
            .collect()
    }
}

impl<const D: usize, T: Real> DistanceField<D> for NeuralField<D, T> {
    fn eval(&self, p: &Point<D>) -> f64 {
        self.run_extended(std::slice::from_ref(p), false)[0].0
    }

    fn eval_grad(&self, p: &Point<D>) -> (f64, Vector<D>) {
        self.run_extended(std::slice::from_ref(p), true)[0]
    }

    fn clamp(&self) -> Option<f64> {
        Some(self.model.arch.delta)
    }

    fn domain(&self) -> Option<Aabb<D>> {
        Some(crate::geom::unit_box())
    }

    fn eval_batch(&self, pts: &[Point<D>]) -> Vec<f64> {
        pts.par_chunks(BATCH_BLOCK)
            .flat_map_iter(|c| self.run_extended(c, false).into_iter().map(|(v, _)| v))
            .collect()
    }

    fn eval_grad_batch(&self, pts: &[Point<D>]) -> Vec<(f64, Vector<D>)> {
        pts.par_chunks(BATCH_BLOCK)
            .flat_map_iter(|c| self.run_extended(c, true))
            .collect()
    }
}
