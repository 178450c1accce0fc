//! Place embeddings, the soft triplet loss and its exact gradients.

use std::str::FromStr;
use std::sync::Arc;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::network::EncoderParams;
use crate::error::{EsmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EsmError::DegenerateInput("non-finite embedding".into()));
        }
        Ok(Self(v))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean squared difference. Panics if the dimensions differ.
pub fn embedding_distance(a: &Embedding, b: &Embedding) -> f64 {
    sq_dist(&a.0, &b.0)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "embedding dimensions differ");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Orientation of the two-way softmax over anchor distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    /// `e^{-D(a,n)} / (e^{-D(a,p)} + e^{-D(a,n)})`: low when the positive is close.
    #[default]
    Corrected,
    /// Numerator `e^{-D(a,p)}`, as printed; its minimum pushes positives away.
    Literal,
}

impl FromStr for LossForm {
    type Err = EsmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "literal" => Ok(Self::Literal),
            other => Err(EsmError::Config(format!("unknown loss form '{other}'"))),
        }
    }
}

impl LossForm {
    fn sign(self) -> f64 {
        match self {
            Self::Corrected => 1.0,
            Self::Literal => -1.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss from the two distances; the corrected form is `sigmoid(dp - dn)`.
pub fn loss_from_distances(dp: f64, dn: f64, form: LossForm) -> f64 {
    sigmoid(form.sign() * (dp - dn))
}

pub fn triplet_loss(a: &Embedding, p: &Embedding, n: &Embedding, form: LossForm) -> f64 {
    loss_from_distances(embedding_distance(a, p), embedding_distance(a, n), form)
}

/// Feature vectors of one training triplet plus the history indices they
/// were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: Arc<[f64]>,
    pub positive: Arc<[f64]>,
    pub negative: Arc<[f64]>,
    pub provenance: (usize, usize, usize),
}

impl Triplet {
    pub fn new(anchor: Vec<f64>, positive: Vec<f64>, negative: Vec<f64>) -> Self {
        Self {
            anchor: anchor.into(),
            positive: positive.into(),
            negative: negative.into(),
            provenance: (0, 0, 0),
        }
    }
}

/// Mean loss over `batch` and its gradient with respect to every parameter.
pub fn loss_gradients(params: &EncoderParams, batch: &[Triplet], form: LossForm) -> Result<(f64, EncoderParams)> {
    if batch.is_empty() {
        return Err(EsmError::DegenerateInput("empty triplet batch".into()));
    }
    let n = batch.len();
    let d = params.input_dim();
    // anchors, positives and negatives share one forward pass
    let mut x = Array2::zeros((3 * n, d));
    for (i, t) in batch.iter().enumerate() {
        for (k, v) in [&t.anchor, &t.positive, &t.negative].into_iter().enumerate() {
            if v.len() != d {
                return Err(EsmError::ShapeMismatch {
                    expected: format!("{d} input features"),
                    got: format!("{}", v.len()),
                });
            }
            x.row_mut(k * n + i).assign(&ndarray::ArrayView1::from(&v[..]));
        }
    }
    let acts = params.forward(x.view())?;
    let out = acts.last().expect("output layer");
    let k = out.ncols() as f64;
    let sign = form.sign();

    let mut d_out = Array2::zeros(out.dim());
    let mut total = 0.0;
    for i in 0..n {
        let ea = out.row(i);
        let ep = out.row(n + i);
        let en = out.row(2 * n + i);
        let diff_p = &ea - &ep;
        let diff_n = &ea - &en;
        let dp = diff_p.dot(&diff_p) / k;
        let dn = diff_n.dot(&diff_n) / k;
        let l = loss_from_distances(dp, dn, form);
        total += l;
        let g = sign * l * (1.0 - l) / n as f64;
        // dL/dDp = g, dL/dDn = -g; dD/dx = 2 (x - y) / k
        let gp = &diff_p * (2.0 * g / k);
        let gn = &diff_n * (-2.0 * g / k);
        d_out.row_mut(i).assign(&(&gp + &gn));
        d_out.row_mut(n + i).assign(&(-&gp));
        d_out.row_mut(2 * n + i).assign(&(-&gn));
    }
    let grads = params.backward(&acts, &d_out);
    Ok((total / n as f64, grads))
}

/// Mean loss only, no gradients.
pub fn mean_loss(params: &EncoderParams, batch: &[Triplet], form: LossForm) -> Result<f64> {
    if batch.is_empty() {
        return Err(EsmError::DegenerateInput("empty triplet batch".into()));
    }
    let mut total = 0.0;
    for chunk in batch.chunks(256) {
        let n = chunk.len();
        let d = params.input_dim();
        let mut x = Array2::zeros((3 * n, d));
        for (i, t) in chunk.iter().enumerate() {
            for (k, v) in [&t.anchor, &t.positive, &t.negative].into_iter().enumerate() {
                x.row_mut(k * n + i).assign(&ndarray::ArrayView1::from(&v[..]));
            }
        }
        let acts = params.forward(x.view())?;
        let out = acts.last().expect("output layer");
        for i in 0..n {
            let a = out.slice(s![i, ..]);
            let dp = sq_dist(a.as_slice().unwrap(), out.slice(s![n + i, ..]).as_slice().unwrap());
            let dn = sq_dist(a.as_slice().unwrap(), out.slice(s![2 * n + i, ..]).as_slice().unwrap());
            total += loss_from_distances(dp, dn, form);
        }
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn distance_examples() {
        let z = Embedding::zeros(128);
        let o = Embedding(vec![1.0; 128]);
        assert_eq!(embedding_distance(&z, &z), 0.0);
        assert_eq!(embedding_distance(&z, &o), 1.0);
        assert!(Embedding::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn loss_examples() {
        let a = Embedding(vec![0.0; 4]);
        let p = Embedding(vec![0.5; 4]);
        for form in [LossForm::Corrected, LossForm::Literal] {
            assert_eq!(triplet_loss(&a, &p, &p, form), 0.5);
        }
        let expect = (-10f64).exp() / (1.0 + (-10f64).exp());
        assert!((loss_from_distances(0.0, 10.0, LossForm::Corrected) - expect).abs() < 1e-18);
        assert!((expect - 4.54e-5).abs() < 1e-7);
        assert_eq!("literal".parse::<LossForm>().unwrap(), LossForm::Literal);
    }

    proptest! {
        #[test]
        fn softmax_pair_and_forms_sum_to_one(dp in 0.0f64..4.0, dn in 0.0f64..4.0) {
            let c = loss_from_distances(dp, dn, LossForm::Corrected);
            prop_assert!((c + loss_from_distances(dn, dp, LossForm::Corrected) - 1.0).abs() < 1e-15);
            prop_assert!((c + loss_from_distances(dp, dn, LossForm::Literal) - 1.0).abs() < 1e-15);
            prop_assert!(c > 0.0 && c < 1.0);
        }

        #[test]
        fn corrected_is_monotone(dp in 0.0f64..4.0, dn in 0.0f64..4.0, h in 1e-3f64..0.5) {
            let base = loss_from_distances(dp, dn, LossForm::Corrected);
            prop_assert!(loss_from_distances(dp, dn + h, LossForm::Corrected) < base);
            prop_assert!(loss_from_distances(dp + h, dn, LossForm::Corrected) > base);
        }

        #[test]
        fn distance_is_symmetric(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Embedding((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
            let b = Embedding((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
            prop_assert_eq!(embedding_distance(&a, &b), embedding_distance(&b, &a));
        }
    }

    fn random_batch(rng: &mut impl Rng, d: usize, n: usize) -> Vec<Triplet> {
        (0..n)
            .map(|_| {
                let mut v = || (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>();
                Triplet::new(v(), v(), v())
            })
            .collect()
    }

    #[test]
    fn identical_positive_and_negative_give_zero_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let params = EncoderParams::xavier(&[6, 5, 4], &mut rng);
        let batch: Vec<Triplet> = random_batch(&mut rng, 6, 5)
            .into_iter()
            .map(|t| Triplet::new(t.anchor.to_vec(), t.positive.to_vec(), t.positive.to_vec()))
            .collect();
        let (loss, g) = loss_gradients(&params, &batch, LossForm::Corrected).unwrap();
        assert_eq!(loss, 0.5);
        // the positive and negative rows cancel up to summation order
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v.abs() < 1e-16)));
    }

    #[test]
    fn form_gradients_cancel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let params = EncoderParams::xavier(&[6, 5, 4], &mut rng);
        let batch = random_batch(&mut rng, 6, 1);
        let (lc, gc) = loss_gradients(&params, &batch, LossForm::Corrected).unwrap();
        let (ll, gl) = loss_gradients(&params, &batch, LossForm::Literal).unwrap();
        assert!((lc + ll - 1.0).abs() < 1e-15);
        for (a, b) in gc.tensors().iter().zip(gl.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x + y).abs() < 1e-15);
            }
        }
        assert!((mean_loss(&params, &batch, LossForm::Corrected).unwrap() - lc).abs() < 1e-15);
    }
}
