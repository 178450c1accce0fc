//! Fully connected tanh network with hand-written backpropagation.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Layer stack; every layer, the last included, is followed by tanh.
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<Dense>,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];
pub const DEFAULT_EMBEDDING: usize = 128;

impl EncoderParams {
    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims
            .windows(2)
            .map(|d| Dense {
                w: Array2::zeros((d[1], d[0])),
                b: Array1::zeros(d[1]),
            })
            .collect();
        Self { layers }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        for l in &mut p.layers {
            let (o, i) = l.w.dim();
            let r = (6.0 / (i + o) as f64).sqrt();
            l.w.mapv_inplace(|_| rng.random_range(-r..r));
        }
        p
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.w.nrows()));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice().expect("standard layout"), l.b.as_slice().expect("contiguous")])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("contiguous"),
                ]
            })
            .collect()
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(EsmError::ShapeMismatch {
                expected: format!("{} input features", self.input_dim()),
                got: format!("{width}"),
            });
        }
        Ok(())
    }

    /// Activations of every layer for a batch of row vectors; element 0 is
    /// the input itself.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(x.ncols())?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let prev = acts.last().expect("input pushed");
            let mut z = prev.dot(&l.w.t());
            z += &l.b;
            z.mapv_inplace(f64::tanh);
            acts.push(z);
        }
        Ok(acts)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let acts = self.forward(view)?;
        Ok(acts.last().expect("at least the input").row(0).to_vec())
    }

    /// Parameter gradients given activations from [`forward`](Self::forward)
    /// and the loss gradient with respect to the output activations.
    pub fn backward(&self, acts: &[Array2<f64>], d_out: &Array2<f64>) -> EncoderParams {
        let n = self.layers.len();
        let mut grads = EncoderParams::zeros(&self.dims());
        let out = &acts[n];
        let mut delta = d_out * &out.mapv(|a| 1.0 - a * a);
        for l in (0..n).rev() {
            let prev = &acts[l];
            grads.layers[l].w = delta.t().dot(prev);
            grads.layers[l].b = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.layers[l].w) * prev.mapv(|a| 1.0 - a * a);
            }
        }
        grads
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ParamsFile {
            version: PARAMS_VERSION,
            activation: "tanh".into(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.w.nrows(),
                    cols: l.w.ncols(),
                    weights: l.w.iter().copied().collect(),
                    bias: l.b.to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.version != PARAMS_VERSION {
            return Err(EsmError::Config(format!(
                "encoder params version {} (expected {PARAMS_VERSION})",
                file.version
            )));
        }
        if file.activation != "tanh" {
            return Err(EsmError::Config(format!("unsupported activation '{}'", file.activation)));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (k, l) in file.layers.into_iter().enumerate() {
            if let Some(prev) = layers.last().map(|p: &Dense| p.w.nrows()) {
                if prev != l.cols {
                    return Err(EsmError::ShapeMismatch {
                        expected: format!("layer {k} input {prev}"),
                        got: format!("{}", l.cols),
                    });
                }
            }
            if l.bias.len() != l.rows {
                return Err(EsmError::ShapeMismatch {
                    expected: format!("layer {k} bias {}", l.rows),
                    got: format!("{}", l.bias.len()),
                });
            }
            let w = Array2::from_shape_vec((l.rows, l.cols), l.weights).map_err(|e| EsmError::ShapeMismatch {
                expected: format!("layer {k} {}x{}", l.rows, l.cols),
                got: e.to_string(),
            })?;
            layers.push(Dense {
                w,
                b: Array1::from(l.bias),
            });
        }
        let p = Self { layers };
        if !p.is_finite() {
            return Err(EsmError::DegenerateInput("non-finite encoder parameter".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    activation: String,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_params_give_zero_output() {
        let p = EncoderParams::zeros(&[6, 4, 3]);
        assert_eq!(p.forward_one(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]).unwrap(), vec![0.0; 3]);
        assert!(matches!(p.forward_one(&[1.0]), Err(EsmError::ShapeMismatch { .. })));
    }

    #[test]
    fn forward_matches_scalar_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = EncoderParams::xavier(&[5, 4, 3], &mut rng);
        let x = [0.3, -0.1, 0.8, 0.0, -0.5];
        let mut h = x.to_vec();
        for l in &p.layers {
            h = (0..l.w.nrows())
                .map(|o| (l.b[o] + (0..h.len()).map(|i| l.w[[o, i]] * h[i]).sum::<f64>()).tanh())
                .collect();
        }
        let got = p.forward_one(&x).unwrap();
        for (a, b) in got.iter().zip(&h) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = EncoderParams::xavier(&[7, 5, 2], &mut rng);
        let back = EncoderParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.n_params(), 7 * 5 + 5 + 5 * 2 + 2);
        assert!(EncoderParams::from_json("{\"version\":9,\"activation\":\"tanh\",\"layers\":[]}").is_err());
    }
}
