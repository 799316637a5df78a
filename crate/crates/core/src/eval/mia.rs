use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::Classifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::netcore::softmax;
use crate::rng;
use crate::smoothing::{smooth_confidence, SmoothingConfig};

/// Per-sample confidence used by the thresholding attack. `seed` drives any
/// randomness the scorer needs.
pub trait ConfidenceScorer: Sync {
    fn confidence(&self, x: &[f64], seed: u64) -> Result<f64>;
}

/// Largest softmax probability of a classifier's logits.
pub struct SoftmaxConfidence<C>(pub C);

impl<C: Classifier> ConfidenceScorer for SoftmaxConfidence<C> {
    fn confidence(&self, x: &[f64], _seed: u64) -> Result<f64> {
        Ok(softmax(&self.0.logits(x)?).into_iter().fold(0.0, f64::max))
    }
}

/// Vote share of the smoothed prediction; abstentions score 0.
pub struct SmoothedConfidence<C> {
    pub base: C,
    pub cfg: SmoothingConfig,
}

impl<C: Classifier> ConfidenceScorer for SmoothedConfidence<C> {
    fn confidence(&self, x: &[f64], seed: u64) -> Result<f64> {
        Ok(smooth_confidence(&self.base, x, &self.cfg, seed)?.1)
    }
}

/// Indices into the member and non-member sets used for each role.
#[derive(Clone, Debug, PartialEq)]
pub struct MiaSplit {
    pub calibration_members: Vec<usize>,
    pub calibration_nonmembers: Vec<usize>,
    pub eval_members: Vec<usize>,
    pub eval_nonmembers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiaResult {
    /// Balanced accuracy of the attack on the evaluation split.
    pub asr: f64,
    /// Samples scoring at or above this are called members.
    pub threshold: f64,
    pub member_count: usize,
    pub nonmember_count: usize,
    pub split: MiaSplit,
}

fn balanced_accuracy(members: &[f64], nonmembers: &[f64], threshold: f64) -> f64 {
    let tpr = members.iter().filter(|s| **s >= threshold).count() as f64 / members.len() as f64;
    let tnr = nonmembers.iter().filter(|s| **s < threshold).count() as f64 / nonmembers.len() as f64;
    0.5 * (tpr + tnr)
}

/// Threshold maximizing balanced accuracy; the lowest such threshold wins ties.
fn calibrate(members: &[f64], nonmembers: &[f64]) -> f64 {
    let mut candidates: Vec<f64> = members.iter().chain(nonmembers).copied().collect();
    candidates.push(f64::INFINITY);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (f64::INFINITY, f64::MIN);
    for t in candidates {
        let acc = balanced_accuracy(members, nonmembers, t);
        if acc > best.1 {
            best = (t, acc);
        }
    }
    best.0
}

/// Confidence-thresholding membership inference. Both sets are subsampled to
/// the smaller size and each is halved: the threshold is fitted on the first
/// halves and the success rate measured on the second.
pub fn membership_inference_asr<S, R>(scorer: &S, members: &Dataset, nonmembers: &Dataset, rng: &mut R) -> Result<MiaResult>
where
    S: ConfidenceScorer + ?Sized,
    R: Rng + ?Sized,
{
    let m = members.len().min(nonmembers.len());
    if m < 2 {
        return Err(Error::invalid("membership sets", "need at least two members and two non-members"));
    }
    let mut pick = |len: usize| {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(rng);
        idx.truncate(m);
        idx
    };
    let mem = pick(members.len());
    let non = pick(nonmembers.len());
    let half = m / 2;
    let split = MiaSplit {
        calibration_members: mem[..half].to_vec(),
        calibration_nonmembers: non[..half].to_vec(),
        eval_members: mem[half..].to_vec(),
        eval_nonmembers: non[half..].to_vec(),
    };

    let seed: u64 = rng.random();
    let score = |data: &Dataset, idx: &[usize], stream: u64| -> Result<Vec<f64>> {
        let mut r = rng::substream(seed, stream);
        idx.iter().map(|&i| scorer.confidence(&data.features[i], r.random())).collect()
    };
    let cal_m = score(members, &split.calibration_members, 0)?;
    let cal_n = score(nonmembers, &split.calibration_nonmembers, 1)?;
    let threshold = calibrate(&cal_m, &cal_n);
    let ev_m = score(members, &split.eval_members, 2)?;
    let ev_n = score(nonmembers, &split.eval_nonmembers, 3)?;
    Ok(MiaResult {
        asr: balanced_accuracy(&ev_m, &ev_n, threshold),
        threshold,
        member_count: ev_m.len(),
        nonmember_count: ev_n.len(),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FnClassifier;
    use crate::rng::seeded;

    struct FirstCoordinate;

    impl ConfidenceScorer for FirstCoordinate {
        fn confidence(&self, x: &[f64], _: u64) -> Result<f64> {
            Ok(x[0])
        }
    }

    fn column(values: &[f64]) -> Dataset {
        Dataset::new(values.iter().map(|v| vec![*v]).collect(), None, "t").unwrap()
    }

    #[test]
    fn calibration_picks_separating_threshold() {
        assert_eq!(calibrate(&[0.9, 0.8], &[0.1, 0.2]), 0.8);
        assert_eq!(balanced_accuracy(&[0.9, 0.8], &[0.1, 0.85], 0.8), 0.75);
    }

    #[test]
    fn separable_scores_give_perfect_attack() {
        let members = column(&(0..50).map(|i| 10.0 + i as f64).collect::<Vec<_>>());
        let nonmembers = column(&(0..80).map(|i| i as f64 / 10.0).collect::<Vec<_>>());
        let res = membership_inference_asr(&FirstCoordinate, &members, &nonmembers, &mut seeded(1)).unwrap();
        assert_eq!(res.asr, 1.0);
        assert_eq!(res.member_count, 25);
        assert_eq!(res.nonmember_count, 25);
    }

    #[test]
    fn threshold_ignores_evaluation_canary() {
        let members: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 / 40.0).collect();
        let nonmembers: Vec<f64> = (0..40).map(|i| i as f64 / 40.0).collect();
        let base = membership_inference_asr(&FirstCoordinate, &column(&members), &column(&nonmembers), &mut seeded(5)).unwrap();
        // plant a canary in every evaluation slot; the fitted threshold must not move
        let mut poisoned = nonmembers.clone();
        for &i in &base.split.eval_nonmembers {
            poisoned[i] = 1e6;
        }
        let again = membership_inference_asr(&FirstCoordinate, &column(&members), &column(&poisoned), &mut seeded(5)).unwrap();
        assert_eq!(again.split, base.split);
        assert_eq!(again.threshold, base.threshold);
        assert!(again.asr < base.asr);
    }

    #[test]
    fn untrained_model_is_near_chance() {
        let model = FnClassifier::new(2, 3, |x: &[f64]| vec![x[0], x[1], 0.3 * x[0] - x[1]]);
        let mut r = seeded(11);
        let draw = |r: &mut crate::rng::StreamRng| -> Dataset {
            let spec = crate::NoiseSpec::gaussian(1.0, 2).unwrap();
            Dataset::new((0..2000).map(|_| spec.sample(r)).collect(), None, "g").unwrap()
        };
        let (a, b) = (draw(&mut r), draw(&mut r));
        let res = membership_inference_asr(&SoftmaxConfidence(model), &a, &b, &mut r).unwrap();
        // balanced accuracy over 1000 + 1000 evaluation samples: 3 standard deviations
        assert!((res.asr - 0.5).abs() <= 3.0 * (0.25f64 / 2000.0).sqrt(), "{}", res.asr);
    }

    #[test]
    fn tiny_sets_rejected() {
        assert!(membership_inference_asr(&FirstCoordinate, &column(&[1.0]), &column(&[0.0, 1.0]), &mut seeded(0)).is_err());
    }
}
