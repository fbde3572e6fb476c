//! Parameter containers for the recurrent stack, with flat and named views.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::linalg::orthogonalize;

/// Gate block order within fused LSTM kernels: input, forget, cell, output.
pub const GATES: usize = 4;

/// Dense layer, `w` is (in, out).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Dense {
        Dense {
            w: Array2::zeros((input, output)),
            b: Array1::zeros(output),
        }
    }

    pub fn glorot(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Dense {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        Dense {
            w: Array2::from_shape_fn((input, output), |_| dist.sample(rng)),
            b: Array1::zeros(output),
        }
    }

    pub fn count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// One LSTM direction with fused gate kernels.
///
/// `w` is (in, 4·units), `u` is (units, 4·units), `b` is (4·units,), with
/// the four gate blocks laid out in [`GATES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    pub units: usize,
}

impl LstmDirection {
    pub fn zeros(input: usize, units: usize) -> LstmDirection {
        LstmDirection {
            w: Array2::zeros((input, GATES * units)),
            u: Array2::zeros((units, GATES * units)),
            b: Array1::zeros(GATES * units),
            units,
        }
    }

    /// Glorot-uniform input weights per gate block, orthogonal recurrent
    /// blocks, forget-gate bias 1 and the rest 0.
    pub fn init(input: usize, units: usize, rng: &mut ChaCha8Rng) -> LstmDirection {
        let mut dir = LstmDirection::zeros(input, units);
        let limit = (6.0 / (input + units) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for v in dir.w.iter_mut() {
            *v = dist.sample(rng);
        }
        for gate in 0..GATES {
            let mut block = Array2::from_shape_fn((units, units), |_| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            });
            if units == 1 {
                block[[0, 0]] = 1.0;
            } else {
                orthogonalize(&mut block).expect("random gaussian matrix is full rank");
            }
            dir.u
                .slice_mut(ndarray::s![.., gate * units..(gate + 1) * units])
                .assign(&block);
        }
        // forget gate starts open
        for j in units..2 * units {
            dir.b[j] = 1.0;
        }
        dir
    }

    pub fn count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }
}

/// One stacked layer: forward direction plus an optional backward one.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub fwd: LstmDirection,
    pub bwd: Option<LstmDirection>,
}

impl BiLstmLayer {
    pub fn output_width(&self) -> usize {
        self.fwd.units * if self.bwd.is_some() { 2 } else { 1 }
    }

    pub fn count(&self) -> usize {
        self.fwd.count() + self.bwd.as_ref().map_or(0, LstmDirection::count)
    }
}

/// Every trainable tensor of a model, in a fixed traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<BiLstmLayer>,
    pub td: Vec<Dense>,
    pub out: Dense,
}

/// Borrowed named tensor, used by persistence and diagnostics.
pub enum TensorRef<'a> {
    Matrix(&'a Array2<f64>),
    Vector(&'a Array1<f64>),
}

impl ModelParams {
    pub fn count(&self) -> usize {
        self.layers.iter().map(BiLstmLayer::count).sum::<usize>()
            + self.td.iter().map(Dense::count).sum::<usize>()
            + self.out.count()
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        z.for_each_value_mut(|v| *v = 0.0);
        z
    }

    /// Visits every tensor with a stable name, in flattening order.
    pub fn visit<'a>(&'a self, mut f: impl FnMut(String, TensorRef<'a>)) {
        for (li, layer) in self.layers.iter().enumerate() {
            f(format!("lstm{li}.fwd.w"), TensorRef::Matrix(&layer.fwd.w));
            f(format!("lstm{li}.fwd.u"), TensorRef::Matrix(&layer.fwd.u));
            f(format!("lstm{li}.fwd.b"), TensorRef::Vector(&layer.fwd.b));
            if let Some(bwd) = &layer.bwd {
                f(format!("lstm{li}.bwd.w"), TensorRef::Matrix(&bwd.w));
                f(format!("lstm{li}.bwd.u"), TensorRef::Matrix(&bwd.u));
                f(format!("lstm{li}.bwd.b"), TensorRef::Vector(&bwd.b));
            }
        }
        for (di, d) in self.td.iter().enumerate() {
            f(format!("td{di}.w"), TensorRef::Matrix(&d.w));
            f(format!("td{di}.b"), TensorRef::Vector(&d.b));
        }
        f("out.w".to_string(), TensorRef::Matrix(&self.out.w));
        f("out.b".to_string(), TensorRef::Vector(&self.out.b));
    }

    pub fn for_each_value_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            for v in layer.fwd.w.iter_mut().chain(layer.fwd.u.iter_mut()).chain(layer.fwd.b.iter_mut()) {
                f(v);
            }
            if let Some(bwd) = &mut layer.bwd {
                for v in bwd.w.iter_mut().chain(bwd.u.iter_mut()).chain(bwd.b.iter_mut()) {
                    f(v);
                }
            }
        }
        for d in &mut self.td {
            for v in d.w.iter_mut().chain(d.b.iter_mut()) {
                f(v);
            }
        }
        for v in self.out.w.iter_mut().chain(self.out.b.iter_mut()) {
            f(v);
        }
    }

    pub fn for_each_value(&self, mut f: impl FnMut(f64)) {
        for layer in &self.layers {
            for v in layer.fwd.w.iter().chain(layer.fwd.u.iter()).chain(layer.fwd.b.iter()) {
                f(*v);
            }
            if let Some(bwd) = &layer.bwd {
                for v in bwd.w.iter().chain(bwd.u.iter()).chain(bwd.b.iter()) {
                    f(*v);
                }
            }
        }
        for d in &self.td {
            for v in d.w.iter().chain(d.b.iter()) {
                f(*v);
            }
        }
        for v in self.out.w.iter().chain(self.out.b.iter()) {
            f(*v);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count());
        self.for_each_value(|v| out.push(v));
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.count(), "flat vector length mismatch");
        let mut it = flat.iter();
        self.for_each_value_mut(|v| *v = *it.next().unwrap());
    }

    /// In-place `self += rhs` element-wise (used to merge gradient chunks).
    pub fn add_assign(&mut self, rhs: &ModelParams) {
        let flat = rhs.flatten();
        let mut it = flat.iter();
        self.for_each_value_mut(|v| *v += *it.next().unwrap());
    }

    /// In-place scalar multiply.
    pub fn scale(&mut self, factor: f64) {
        self.for_each_value_mut(|v| *v *= factor);
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_value(|v| ok &= v.is_finite());
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams {
            layers: vec![BiLstmLayer {
                fwd: LstmDirection::init(3, 2, &mut rng),
                bwd: Some(LstmDirection::init(3, 2, &mut rng)),
            }],
            td: vec![Dense::glorot(4, 5, &mut rng)],
            out: Dense::glorot(5, 2, &mut rng),
        };
        let flat = params.flatten();
        assert_eq!(flat.len(), params.count());
        let mut other = params.zeros_like();
        other.assign_flat(&flat);
        assert_eq!(other, params);
    }

    #[test]
    fn forget_gate_bias_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dir = LstmDirection::init(4, 3, &mut rng);
        for j in 0..12 {
            let expect = if (3..6).contains(&j) { 1.0 } else { 0.0 };
            assert_eq!(dir.b[j], expect);
        }
    }

    #[test]
    fn recurrent_blocks_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dir = LstmDirection::init(4, 5, &mut rng);
        for gate in 0..GATES {
            let block = dir.u.slice(ndarray::s![.., gate * 5..(gate + 1) * 5]);
            let qtq = block.t().dot(&block);
            for i in 0..5 {
                for j in 0..5 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq[[i, j]] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = LstmDirection::init(4, 3, &mut ChaCha8Rng::seed_from_u64(7));
        let b = LstmDirection::init(4, 3, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }
}
