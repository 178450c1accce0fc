//! Map comparison metrics on maps normalised to `[0, 1]`.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{EsmError, Result};
use crate::grid::Plane;

pub const DEFAULT_MI_BINS: usize = 16;

/// Belief `[-1, 1]` to `[0, 1]`.
pub fn normalize(p: &Plane) -> Plane {
    p.mapv(|v| (v + 1.0) / 2.0)
}

fn check(pred: &Plane, gt: &Plane) -> Result<()> {
    if pred.dim() != gt.dim() {
        return Err(EsmError::ShapeMismatch {
            expected: format!("{:?}", gt.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    Ok(())
}

pub fn mse(pred: &[f64], gt: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(gt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pred.len() as f64
}

pub fn correlation(pred: &[f64], gt: &[f64]) -> Result<f64> {
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gt.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in pred.iter().zip(gt) {
        let (x, y) = (a - mp, b - mg);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    if pred.is_empty() || sxx == 0.0 || syy == 0.0 {
        return Err(EsmError::DegenerateInput("correlation of a constant map".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn bin(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

pub fn mutual_information(pred: &[f64], gt: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(EsmError::Config(format!("mutual information needs >= 2 bins, got {bins}")));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut joint = Array2::<f64>::zeros((bins, bins));
    for (a, b) in pred.iter().zip(gt) {
        joint[[bin(*a, bins), bin(*b, bins)]] += 1.0;
    }
    let n = pred.len() as f64;
    joint /= n;
    let px = joint.sum_axis(ndarray::Axis(1));
    let py = joint.sum_axis(ndarray::Axis(0));
    let mut mi = 0.0;
    for ((i, j), &p) in joint.indexed_iter() {
        if p > 0.0 {
            mi += p * (p / (px[i] * py[j])).log2();
        }
    }
    Ok(mi.max(0.0))
}

pub fn map_mse(pred: &Plane, gt: &Plane) -> Result<f64> {
    check(pred, gt)?;
    Ok(mse(pred.as_slice().expect("standard layout"), gt.as_slice().expect("standard layout")))
}

pub fn map_correlation(pred: &Plane, gt: &Plane) -> Result<f64> {
    check(pred, gt)?;
    correlation(pred.as_slice().expect("standard layout"), gt.as_slice().expect("standard layout"))
}

pub fn map_mutual_information(pred: &Plane, gt: &Plane, bins: usize) -> Result<f64> {
    check(pred, gt)?;
    mutual_information(pred.as_slice().expect("standard layout"), gt.as_slice().expect("standard layout"), bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub t: usize,
    pub area_tag: String,
    pub mse: f64,
    /// 0 when undefined, see `correlation_defined`.
    pub correlation: f64,
    pub correlation_defined: bool,
    pub mutual_information: f64,
    pub cells: usize,
}

/// Metrics over the cells where `mask` is set (all cells if `None`).
/// `pred` and `gt` are already normalised.
pub fn report(pred: &Plane, gt: &Plane, mask: Option<&Array2<bool>>, t: usize, area_tag: &str) -> Result<MetricsReport> {
    check(pred, gt)?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    match mask {
        Some(m) => {
            check(&m.mapv(|_| 0.0), gt)?;
            Zip::from(pred).and(gt).and(m).for_each(|&p, &g, &k| {
                if k {
                    a.push(p);
                    b.push(g);
                }
            });
        }
        None => {
            a.extend(pred.iter());
            b.extend(gt.iter());
        }
    }
    let (correlation, correlation_defined) = match correlation(&a, &b) {
        Ok(c) => (c, true),
        Err(_) => (0.0, false),
    };
    Ok(MetricsReport {
        t,
        area_tag: area_tag.to_string(),
        mse: mse(&a, &b),
        correlation,
        correlation_defined,
        mutual_information: mutual_information(&a, &b, DEFAULT_MI_BINS)?,
        cells: a.len(),
    })
}
