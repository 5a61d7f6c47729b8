//! Fully connected tanh network with a linear output layer, evaluated on
//! whole batches. Parameters live in a flat vector owned by the caller:
//! for each layer the `(fan_in × fan_out)` weight matrix row-major, then the
//! bias.
//!
//! Besides the usual forward and reverse passes there is a forward-mode
//! sweep carrying tangents of inputs (and optionally parameters), and a
//! reverse sweep over those tangent-carrying activations. Running reverse
//! mode on the dual pass gives `Σᵢ wᵢ ∇_ψ(∇_x D(xᵢ) · vᵢ)`, the mixed second
//! derivative contracted with per-sample directions, without ever forming a
//! Hessian.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::Batch;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

struct Layer<'a> {
    w: ArrayView2<'a, f64>,
    b: ArrayView1<'a, f64>,
}

/// Activations of one forward pass (`hs[0]` is the input).
pub struct Tape {
    hs: Vec<Array2<f64>>,
}

/// Tangents riding along a forward pass.
pub struct DualTape {
    primal: Tape,
    dots: Vec<Array2<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        Mlp { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.sizes.windows(2).scan(0usize, |off, w| {
            let start = *off;
            *off += w[0] * w[1] + w[1];
            Some((start, w[0], w[1]))
        })
    }

    fn layers<'a>(&self, params: &'a [f64]) -> Vec<Layer<'a>> {
        assert_eq!(params.len(), self.num_params(), "parameter vector length mismatch");
        self.offsets()
            .map(|(start, fan_in, fan_out)| {
                let w_end = start + fan_in * fan_out;
                Layer {
                    w: ArrayView2::from_shape((fan_in, fan_out), &params[start..w_end]).unwrap(),
                    b: ArrayView1::from(&params[w_end..w_end + fan_out]),
                }
            })
            .collect()
    }

    /// Glorot-normal weights, zero biases.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0x1417);
        let mut out = vec![0.0; self.num_params()];
        for (start, fan_in, fan_out) in self.offsets() {
            let scale = (2.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut out[start..start + fan_in * fan_out] {
                *v = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        out
    }

    fn to_array(x: &Batch) -> Array2<f64> {
        Array2::from_shape_vec((x.len(), x.dim()), x.as_slice().to_vec()).unwrap()
    }

    fn to_batch(a: Array2<f64>) -> Batch {
        let dim = a.ncols();
        let data = if a.is_standard_layout() {
            a.into_raw_vec_and_offset().0
        } else {
            a.iter().copied().collect()
        };
        Batch::new(dim, data)
    }

    pub fn forward(&self, params: &[f64], x: &Batch) -> Tape {
        assert_eq!(x.dim(), self.input_dim());
        let layers = self.layers(params);
        let last = layers.len() - 1;
        let mut hs = Vec::with_capacity(layers.len() + 1);
        hs.push(Self::to_array(x));
        for (l, layer) in layers.iter().enumerate() {
            let mut a = hs[l].dot(&layer.w);
            a += &layer.b;
            if l < last {
                a.mapv_inplace(f64::tanh);
            }
            hs.push(a);
        }
        Tape { hs }
    }

    pub fn output(&self, tape: &Tape) -> Batch {
        Self::to_batch(tape.hs.last().unwrap().clone())
    }

    /// Reverse pass for an output cotangent. Returns the input cotangent and,
    /// when `param_grad` is given, accumulates the parameter gradient into it.
    pub fn backward(
        &self,
        params: &[f64],
        tape: &Tape,
        cotangent: &Batch,
        mut param_grad: Option<&mut [f64]>,
    ) -> Batch {
        let layers = self.layers(params);
        let mut g = Self::to_array(cotangent);
        let offsets: Vec<_> = self.offsets().collect();
        for l in (0..layers.len()).rev() {
            let h_in = &tape.hs[l];
            if let Some(grad) = param_grad.as_deref_mut() {
                let (start, fan_in, fan_out) = offsets[l];
                let gw = h_in.t().dot(&g);
                let gb = g.sum_axis(Axis(0));
                add_into(&mut grad[start..start + fan_in * fan_out], gw.iter());
                add_into(&mut grad[start + fan_in * fan_out..start + fan_in * fan_out + fan_out], gb.iter());
            }
            let mut gh = g.dot(&layers[l].w.t());
            if l > 0 {
                ndarray::Zip::from(&mut gh).and(h_in).for_each(|g, &h| *g *= 1.0 - h * h);
            }
            g = gh;
        }
        Self::to_batch(g)
    }

    /// Forward pass with input tangents `x_dot` and optional parameter tangent.
    pub fn forward_dual(&self, params: &[f64], x: &Batch, x_dot: &Batch, param_dot: Option<&[f64]>) -> DualTape {
        assert_eq!(x.len(), x_dot.len());
        assert_eq!(x.dim(), x_dot.dim());
        let primal = self.forward(params, x);
        self.tangent_pass(params, primal, x_dot, param_dot)
    }

    /// Tangent sweep over an existing forward tape.
    pub fn tangent_pass(&self, params: &[f64], primal: Tape, x_dot: &Batch, param_dot: Option<&[f64]>) -> DualTape {
        let layers = self.layers(params);
        let dot_layers = param_dot.map(|p| self.layers(p));
        let last = layers.len() - 1;
        let mut dots = Vec::with_capacity(layers.len() + 1);
        dots.push(Self::to_array(x_dot));
        for (l, layer) in layers.iter().enumerate() {
            let mut a_dot = dots[l].dot(&layer.w);
            if let Some(dl) = &dot_layers {
                a_dot += &primal.hs[l].dot(&dl[l].w);
                a_dot += &dl[l].b;
            }
            if l < last {
                let h = &primal.hs[l + 1];
                ndarray::Zip::from(&mut a_dot).and(h).for_each(|d, &h| *d *= 1.0 - h * h);
            }
            dots.push(a_dot);
        }
        DualTape { primal, dots }
    }

    pub fn primal<'t>(&self, tape: &'t DualTape) -> &'t Tape {
        &tape.primal
    }

    pub fn output_tangent(&self, tape: &DualTape) -> Batch {
        Self::to_batch(tape.dots.last().unwrap().clone())
    }

    /// Tangent of the parameter gradient of `Σᵢ ⟨cotangentᵢ, f(xᵢ)⟩` along the
    /// input tangents of `tape` (the cotangent itself is held fixed).
    /// Accumulates into `out`.
    pub fn backward_dual_param_tangent(&self, params: &[f64], tape: &DualTape, cotangent: &Batch, out: &mut [f64]) {
        let layers = self.layers(params);
        let offsets: Vec<_> = self.offsets().collect();
        let hs = &tape.primal.hs;
        let ds = &tape.dots;
        let mut g = Self::to_array(cotangent);
        let mut g_dot = Array2::<f64>::zeros(g.raw_dim());
        for l in (0..layers.len()).rev() {
            let (start, fan_in, fan_out) = offsets[l];
            let mut gw_dot = ds[l].t().dot(&g);
            gw_dot += &hs[l].t().dot(&g_dot);
            let gb_dot: Array1<f64> = g_dot.sum_axis(Axis(0));
            add_into(&mut out[start..start + fan_in * fan_out], gw_dot.iter());
            add_into(&mut out[start + fan_in * fan_out..start + fan_in * fan_out + fan_out], gb_dot.iter());
            if l == 0 {
                break;
            }
            let gh = g.dot(&layers[l].w.t());
            let gh_dot = g_dot.dot(&layers[l].w.t());
            let h = &hs[l];
            let h_dot = &ds[l];
            let mut next = gh.clone();
            let mut next_dot = gh_dot;
            ndarray::Zip::from(&mut next).and(h).for_each(|g, &h| *g *= 1.0 - h * h);
            ndarray::Zip::from(&mut next_dot)
                .and(&gh)
                .and(h)
                .and(h_dot)
                .for_each(|gd, &g, &h, &hd| *gd = *gd * (1.0 - h * h) - 2.0 * g * h * hd);
            g = next;
            g_dot = next_dot;
        }
    }
}

fn add_into<'a>(dst: &mut [f64], src: impl Iterator<Item = &'a f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_param_grad(mlp: &Mlp, params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let h = 1e-6;
        (0..params.len())
            .map(|j| {
                let mut up = params.to_vec();
                let mut dn = params.to_vec();
                up[j] += h;
                dn[j] -= h;
                let _ = mlp;
                (f(&up) - f(&dn)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mlp = Mlp::new(vec![2, 5, 4, 3]);
        let params = mlp.init_params(3);
        let x = Batch::new(2, vec![0.3, -0.7, 1.1, 0.2, -0.4, 0.9]);
        let cot = Batch::new(3, vec![1.0, -2.0, 0.5, 0.3, 0.1, -1.0, 0.7, 0.0, 2.0]);
        let loss = |p: &[f64]| -> f64 {
            let out = mlp.output(&mlp.forward(p, &x));
            out.as_slice().iter().zip(cot.as_slice()).map(|(a, b)| a * b).sum()
        };
        let mut grad = vec![0.0; mlp.num_params()];
        let tape = mlp.forward(&params, &x);
        mlp.backward(&params, &tape, &cot, Some(&mut grad));
        let fd = fd_param_grad(&mlp, &params, loss);
        for (a, b) in grad.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn dual_forward_is_directional_derivative() {
        let mlp = Mlp::new(vec![2, 6, 2]);
        let params = mlp.init_params(5);
        let pdot: Vec<f64> = (0..params.len()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let x = Batch::new(2, vec![0.3, -0.7, 1.1, 0.2]);
        let xdot = Batch::new(2, vec![0.5, 0.1, -0.3, 0.8]);
        let tape = mlp.forward_dual(&params, &x, &xdot, Some(&pdot));
        let tangent = mlp.output_tangent(&tape);
        let h = 1e-6;
        let shift = |s: f64| {
            let p: Vec<f64> = params.iter().zip(&pdot).map(|(a, b)| a + s * b).collect();
            let xs: Vec<f64> = x.as_slice().iter().zip(xdot.as_slice()).map(|(a, b)| a + s * b).collect();
            mlp.output(&mlp.forward(&p, &Batch::new(2, xs)))
        };
        let (up, dn) = (shift(h), shift(-h));
        for ((t, u), d) in tangent.as_slice().iter().zip(up.as_slice()).zip(dn.as_slice()) {
            assert!((t - (u - d) / (2.0 * h)).abs() < 1e-7);
        }
    }
}
