//! Loop-closure precision and recall over a threshold sweep.
//!
//! Every candidate pair (query step, stored step) gets a distance from a
//! matcher; at threshold `alpha` the detections are the pairs with
//! distance `<= alpha`, so detection sets are nested as `alpha` grows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::matcher::{PlaceMatcher, PlaceSample};
use crate::error::{EsmError, Result};
use crate::geometry::Pose;

pub const DEFAULT_MATCH_SLACK: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub t_now: usize,
    pub t_matched: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub alpha: f64,
    pub precision: f64,
    pub recall: f64,
    /// Precision is a convention (1) because nothing was detected.
    pub no_detections: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub auc: f64,
    pub gt_pairs: usize,
    pub detections: usize,
}

/// Pairs `(t, t')`, `t' < t`, of true poses within `eps_pos` metres and
/// more than `recency_window` steps apart. Index 0 (the start, before any
/// observation) is skipped.
pub fn gt_closures(true_poses: &[Pose], eps_pos: f64, recency_window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 1..true_poses.len() {
        for s in 1..t {
            if t - s > recency_window && true_poses[t].distance_to(&true_poses[s]) <= eps_pos {
                out.push((t, s));
            }
        }
    }
    out
}

/// Pairs a detector may consider: believed positions within `radius`
/// metres and more than `recency_window` steps apart.
pub fn candidate_pairs(believed: &[Pose], radius: f64, recency_window: usize) -> Vec<(usize, usize)> {
    gt_closures(believed, radius, recency_window)
}

pub fn score_pairs(pairs: &[(usize, usize)], matcher: &dyn PlaceMatcher, samples: &[PlaceSample]) -> Vec<Detection> {
    pairs
        .iter()
        .map(|&(t, s)| Detection {
            t_now: t,
            t_matched: s,
            distance: matcher.distance(&samples[t], &samples[s]),
        })
        .collect()
}

pub fn pr_curve(detections: &[Detection], gt: &[(usize, usize)], slack: usize) -> Result<PrCurve> {
    if gt.is_empty() {
        return Err(EsmError::EmptyGroundTruth);
    }
    let index: HashMap<(usize, usize), usize> = gt.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut covered = vec![false; gt.len()];
    let mut order: Vec<&Detection> = detections.iter().collect();
    order.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.t_now.cmp(&b.t_now))
            .then(a.t_matched.cmp(&b.t_matched))
    });

    let s = slack as isize;
    let mut points = Vec::new();
    let (mut tp, mut n, mut hit) = (0usize, 0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let alpha = order[k].distance;
        while k < order.len() && order[k].distance == alpha {
            let d = order[k];
            let mut is_tp = false;
            for dt in -s..=s {
                for dm in -s..=s {
                    let key = ((d.t_now as isize + dt) as usize, (d.t_matched as isize + dm) as usize);
                    if d.t_now as isize + dt < 0 || d.t_matched as isize + dm < 0 {
                        continue;
                    }
                    if let Some(&i) = index.get(&key) {
                        is_tp = true;
                        if !covered[i] {
                            covered[i] = true;
                            hit += 1;
                        }
                    }
                }
            }
            tp += usize::from(is_tp);
            n += 1;
            k += 1;
        }
        points.push(PrPoint {
            alpha,
            precision: tp as f64 / n as f64,
            recall: hit as f64 / gt.len() as f64,
            no_detections: false,
        });
    }
    if points.is_empty() {
        points.push(PrPoint {
            alpha: 0.0,
            precision: 1.0,
            recall: 0.0,
            no_detections: true,
        });
    }
    let mut auc = 0.0;
    let (mut r0, mut p0) = (0.0, points[0].precision);
    for p in &points {
        auc += (p.recall - r0) * (p.precision + p0) / 2.0;
        r0 = p.recall;
        p0 = p.precision;
    }
    Ok(PrCurve {
        points,
        auc,
        gt_pairs: gt.len(),
        detections: detections.len(),
    })
}

pub fn write_pr_csv<W: std::io::Write>(out: W, curves: &[(&str, &PrCurve)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["matcher", "alpha", "precision", "recall", "no_detections"])?;
    for (name, c) in curves {
        for p in &c.points {
            wr.write_record([
                name.to_string(),
                p.alpha.to_string(),
                p.precision.to_string(),
                p.recall.to_string(),
                p.no_detections.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gt() -> Vec<(usize, usize)> {
        vec![(100, 10), (101, 11), (102, 12), (150, 40)]
    }

    #[test]
    fn oracle_detector_is_perfect() {
        let det: Vec<Detection> = gt()
            .iter()
            .map(|&(t, s)| Detection {
                t_now: t,
                t_matched: s,
                distance: 0.0,
            })
            .collect();
        let c = pr_curve(&det, &gt(), 2).unwrap();
        assert!(c.points.iter().all(|p| p.precision == 1.0 && p.recall == 1.0));
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn silent_detector() {
        let c = pr_curve(&[], &gt(), 2).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(c.points[0].no_detections && c.points[0].precision == 1.0 && c.points[0].recall == 0.0);
        assert_eq!(c.auc, 0.0);
        assert!(matches!(pr_curve(&[], &[], 2), Err(EsmError::EmptyGroundTruth)));
    }

    #[test]
    fn slack_and_monotone_recall() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut det = vec![Detection {
            t_now: 98,
            t_matched: 12,
            distance: 0.1,
        }];
        for _ in 0..200 {
            det.push(Detection {
                t_now: rng.random_range(60..200),
                t_matched: rng.random_range(0..50),
                distance: rng.random_range(0.0..1.0),
            });
        }
        let c = pr_curve(&det, &gt(), 2).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].alpha > w[0].alpha);
            assert!(w[1].recall >= w[0].recall);
        }
        assert!(c.points.iter().all(|p| (0.0..=1.0).contains(&p.precision) && (0.0..=1.0).contains(&p.recall)));
        // (98, 12) is within two steps of (100, 10) .. (100, 12) etc.
        let one = pr_curve(&det[..1], &gt(), 2).unwrap();
        assert_eq!(one.points[0].precision, 1.0);
        assert!(pr_curve(&det[..1], &gt(), 1).unwrap().points[0].precision == 0.0);
    }

    #[test]
    fn gt_pairs_respect_recency() {
        let poses: Vec<Pose> = (0..10).map(|k| Pose::new(if k % 5 == 0 { 0.0 } else { 5.0 + k as f64 }, 0.0, 0.0)).collect();
        assert_eq!(gt_closures(&poses, 0.1, 3), vec![]);
        let mut poses = poses;
        poses[1] = Pose::origin();
        assert_eq!(gt_closures(&poses, 0.1, 3), vec![(5, 1)]);
    }
}
