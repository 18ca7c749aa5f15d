//! Weighted soft voting over a set of trained classifiers, acceptance
//! threshold calibration, and signal filtering.

use std::path::Path;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::classify::{ScalerParams, TrainedModel};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// A committee of trained models with convex voting weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<TrainedModel>,
    pub weights: Vec<f64>,
}

impl EnsembleSpec {
    /// The default committee weighting: the best model counts double, so with
    /// five members the weights are (2, 1, 1, 1, 1) / 6 with the doubled slot
    /// first.
    pub fn double_first_weights(n: usize) -> Vec<f64> {
        assert!(n > 0, "committee cannot be empty");
        let denom = (n + 1) as f64;
        let mut w = vec![1.0 / denom; n];
        w[0] = 2.0 / denom;
        w
    }

    pub fn new(members: Vec<TrainedModel>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Argument("ensemble needs at least one member".into()));
        }
        if members.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} members but {} weights",
                members.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Argument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { members, weights })
    }

    /// Weighted average of member probabilities on one (already scaled)
    /// feature row.
    pub fn soft_vote(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let mut p = 0.0;
        for (member, &w) in self.members.iter().zip(&self.weights) {
            p += w * member.predict_proba(x)?;
        }
        Ok(p)
    }
}

/// Acceptance threshold fitted on validation-set vote probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    /// Quantile level the threshold was read at (0.90 keeps ~10% of signals).
    pub percentile: f64,
    /// Nearest-rank empirical quantile of the validation probabilities.
    pub raw_quantile: f64,
    /// The traded threshold: `raw_quantile` rounded to two decimals (or kept
    /// raw when rounding is disabled).
    pub p2: f64,
}

/// Nearest-rank empirical quantile, rank = min(n, floor(pct * n) + 1),
/// 1-indexed over the sorted sample.
fn nearest_rank_quantile(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = (((pct * n as f64).floor() as usize) + 1).min(n);
    sorted[rank - 1]
}

/// Read the acceptance threshold off the validation vote distribution.
///
/// With `round` set, the threshold is the quantile rounded to two decimal
/// places, which moves it by at most 0.005.
pub fn calibrate_threshold(
    validation_probs: &[f64],
    percentile: f64,
    round: bool,
) -> Result<ThresholdCalibration> {
    if validation_probs.is_empty() {
        return Err(Error::Argument("no validation probabilities".into()));
    }
    if !(0.0..=1.0).contains(&percentile) {
        return Err(Error::Argument(format!(
            "percentile {percentile} outside [0, 1]"
        )));
    }
    if validation_probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("non-finite validation probability".into()));
    }
    let mut sorted = validation_probs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let raw = nearest_rank_quantile(&sorted, percentile);
    let p2 = if round { (raw * 100.0).round() / 100.0 } else { raw };
    Ok(ThresholdCalibration {
        percentile,
        raw_quantile: raw,
        p2,
    })
}

/// Keep the signals whose vote probability is strictly greater than the
/// threshold.
pub fn filter_signals(signals: Vec<(Signal, f64)>, p2: f64) -> Vec<(Signal, f64)> {
    signals.into_iter().filter(|(_, p)| *p > p2).collect()
}

/// On-disk committee: member model files, weights, and the fitted threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub model_paths: Vec<String>,
    pub weights: Vec<f64>,
    pub calibration: ThresholdCalibration,
}

impl EnsembleManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    /// Load every member model, checking that they share one scaler.
    pub fn load_members(&self, base_dir: &Path) -> Result<(EnsembleSpec, ScalerParams)> {
        if self.model_paths.is_empty() {
            return Err(Error::Argument("manifest lists no models".into()));
        }
        let mut members = Vec::new();
        let mut scaler: Option<ScalerParams> = None;
        for rel in &self.model_paths {
            let artifact = crate::classify::load_model(&base_dir.join(rel))?;
            match &scaler {
                None => scaler = Some(artifact.scaler.clone()),
                Some(s) if *s != artifact.scaler => {
                    return Err(Error::Validation(format!(
                        "model {rel} was fitted on a different scaler"
                    )));
                }
                Some(_) => {}
            }
            members.push(artifact.model);
        }
        let spec = EnsembleSpec::new(members, self.weights.clone())?;
        Ok((spec, scaler.expect("at least one model")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ClassifierSpec, LogisticParams, ModelParams, TrainedModel};
    use chrono::NaiveDate;
    use ndarray::array;
    use rand::Rng;

    fn prior_model(p: f64) -> TrainedModel {
        TrainedModel {
            spec: ClassifierSpec::Logistic(LogisticParams::default()),
            seed: 0,
            params: ModelParams::Prior { p },
        }
    }

    fn committee(probs: &[f64], weights: Vec<f64>) -> EnsembleSpec {
        EnsembleSpec::new(probs.iter().map(|&p| prior_model(p)).collect(), weights).unwrap()
    }

    #[test]
    fn double_weight_vote_matches_hand_value() {
        let spec = committee(
            &[0.6, 0.5, 0.5, 0.5, 0.5],
            EnsembleSpec::double_first_weights(5),
        );
        let p = spec.soft_vote(array![0.0].view()).unwrap();
        assert!((p - 3.2 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_agreeing_members_passthrough() {
        let spec = committee(&[0.7, 0.7, 0.7], vec![1.0 / 3.0; 3]);
        let p = spec.soft_vote(array![0.0].view()).unwrap();
        assert!((p - 0.7).abs() < 1e-12);
    }

    #[test]
    fn vote_stays_inside_member_range() {
        let mut rng = crate::seed::stream(9, "ensemble-test");
        for _ in 0..50 {
            let outputs: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut weights: Vec<f64> = (0..5).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let spec = committee(&outputs, weights);
            let p = spec.soft_vote(array![0.0].view()).unwrap();
            let lo = outputs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn single_member_weight_one_reproduces_member() {
        let spec = committee(&[0.37], vec![1.0]);
        let p = spec.soft_vote(array![0.0].view()).unwrap();
        assert!((p - 0.37).abs() < 1e-12);
    }

    #[test]
    fn mismatched_weights_rejected() {
        let members = vec![prior_model(0.5); 2];
        assert!(EnsembleSpec::new(members.clone(), vec![1.0]).is_err());
        assert!(EnsembleSpec::new(members.clone(), vec![0.7, 0.7]).is_err());
        assert!(EnsembleSpec::new(members, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn percentile_of_uniform_grid() {
        let probs: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let cal = calibrate_threshold(&probs, 0.90, true).unwrap();
        assert_eq!(cal.raw_quantile, 0.90);
        assert_eq!(cal.p2, 0.90);
    }

    #[test]
    fn rounding_matches_reported_thresholds() {
        // Quantiles landing on 0.602 and 0.679 must round to 0.60 and 0.68.
        let cal = calibrate_threshold(&[0.602], 0.90, true).unwrap();
        assert_eq!(cal.p2, 0.60);
        let cal = calibrate_threshold(&[0.679], 0.90, true).unwrap();
        assert_eq!(cal.p2, 0.68);
        // Rounding never moves the threshold by more than half a cent.
        let mut rng = crate::seed::stream(11, "ensemble-test");
        for _ in 0..200 {
            let probs: Vec<f64> = (0..37).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cal = calibrate_threshold(&probs, 0.90, true).unwrap();
            assert!((cal.p2 - cal.raw_quantile).abs() <= 0.005 + 1e-12);
        }
    }

    #[test]
    fn unrounded_calibration_keeps_raw_quantile() {
        let cal = calibrate_threshold(&[0.1, 0.2, 0.602, 0.9], 0.5, false).unwrap();
        assert_eq!(cal.p2, cal.raw_quantile);
    }

    #[test]
    fn filter_is_strictly_greater() {
        let date = NaiveDate::from_ymd_opt(2020, 1, 10).unwrap();
        let sig = |t: &str| crate::signal::Signal {
            ticker: t.to_string(),
            date,
            direction: crate::signal::Direction::Long,
            deviation: -0.01,
            cluster_id: 0,
        };
        let signals = vec![(sig("A"), 0.55), (sig("B"), 0.60), (sig("C"), 0.61)];
        let kept = filter_signals(signals, 0.60);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].0.ticker, "C");

        let all_below = vec![(sig("A"), 0.1), (sig("B"), 0.2)];
        assert!(filter_signals(all_below, 0.60).is_empty());
    }

    #[test]
    fn calibration_set_self_test_keeps_about_a_tenth() {
        let mut rng = crate::seed::stream(21, "ensemble-test");
        let probs: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cal = calibrate_threshold(&probs, 0.90, true).unwrap();
        let kept = probs.iter().filter(|&&p| p > cal.p2).count() as f64 / probs.len() as f64;
        assert!((0.05..=0.15).contains(&kept), "kept {kept}");
    }

    #[test]
    fn empty_validation_set_rejected() {
        assert!(calibrate_threshold(&[], 0.9, true).is_err());
    }
}
