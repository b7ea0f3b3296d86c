//! Treatment-effect estimation over paired evaluation traces.
//!
//! Interference is the treatment: each recorded step carries the value the
//! agent assigns to the clean observation and to the delivered one, plus
//! the estimated probability that the step was interfered. The individual
//! effect at a step contrasts the value under each delivery against the
//! value expected under the estimated assignment; averaging the contrast
//! over time and episodes gives the average effect. Refutation utilities
//! perturb the trace (placebo assignment, random subset, an extra
//! independent covariate) to check that the estimate behaves like a causal
//! quantity rather than an artifact.

use alloc::vec::Vec;

use rand::Rng;

use crate::metrics::EpisodeRecording;
use crate::{Error, Result};

/// Expected value of a step under an interference probability `p`:
/// the clean value with weight `1 - p` and the interfered value with
/// weight `p`.
pub fn ite(q_clean: f64, q_noisy: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Malformed("interference probability out of range"));
    }
    Ok(q_clean * (1.0 - p) + q_noisy * p)
}

/// Scalar value of a recorded Q-vector: the greedy (maximum) entry.
fn scalar_q(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-step effect of interference: the expected value when the delivered
/// observation plays the clean role minus the expected value under the
/// recorded assignment. The two expectations share the estimated
/// probability, so the contrast reduces to
/// `(q_noisy - q_clean) * (1 - 2 p)`.
fn step_effect(q_clean: f64, q_noisy: f64, p: f64) -> Result<f64> {
    let swapped = ite(q_noisy, q_clean, p)?;
    let observed = ite(q_clean, q_noisy, p)?;
    Ok(swapped - observed)
}

/// Average treatment effect of interference: per-episode time-mean of the
/// step effect, then the mean over episodes.
pub fn ate(recordings: &[EpisodeRecording]) -> Result<f64> {
    if recordings.is_empty() {
        return Err(Error::EmptyRecording);
    }
    let mut episode_sum = 0.0;
    for rec in recordings {
        if rec.is_empty() {
            return Err(Error::EmptyRecording);
        }
        let mut sum = 0.0;
        for s in &rec.steps {
            sum += step_effect(scalar_q(&s.q_clean), scalar_q(&s.q_noisy), s.p_est)?;
        }
        episode_sum += sum / rec.len() as f64;
    }
    Ok(episode_sum / recordings.len() as f64)
}

/// Robustness probes for the effect estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefuteMode {
    /// Append an independent standard-normal covariate to every step. The
    /// estimator conditions only on the recorded values and probabilities,
    /// so the estimate must not move.
    CommonCause,
    /// Replace every estimated probability with an independent uniform
    /// draw. A genuine effect of the assignment collapses toward zero.
    Placebo,
    /// Drop a uniformly random fraction of steps per episode and
    /// re-estimate on the remainder.
    Subset,
}

/// Knobs for [`refute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefuteParams {
    /// Fraction of steps removed per episode in subset mode.
    pub drop_fraction: f64,
}

impl Default for RefuteParams {
    fn default() -> Self {
        Self { drop_fraction: 0.2 }
    }
}

/// Re-estimate the average treatment effect under a perturbed trace.
pub fn refute<R: Rng>(
    recordings: &[EpisodeRecording],
    mode: RefuteMode,
    params: RefuteParams,
    rng: &mut R,
) -> Result<f64> {
    if recordings.is_empty() {
        return Err(Error::EmptyRecording);
    }
    match mode {
        RefuteMode::CommonCause => {
            // Materialize the covariate so the probe actually runs, then
            // estimate on data augmented with a column the estimator does
            // not condition on.
            let mut covariates = Vec::new();
            for rec in recordings {
                for _ in &rec.steps {
                    covariates.push(crate::rng::normal01(rng));
                }
            }
            ate_with_covariates(recordings, &covariates)
        }
        RefuteMode::Placebo => {
            let perturbed: Vec<EpisodeRecording> = recordings
                .iter()
                .map(|rec| {
                    let mut rec = rec.clone();
                    for s in &mut rec.steps {
                        s.p_est = rng.gen::<f64>();
                    }
                    rec
                })
                .collect();
            ate(&perturbed)
        }
        RefuteMode::Subset => {
            if !(0.0..1.0).contains(&params.drop_fraction) {
                return Err(Error::Malformed("drop fraction out of range"));
            }
            let perturbed: Vec<EpisodeRecording> = recordings
                .iter()
                .map(|rec| subsample(rec, params.drop_fraction, rng))
                .collect();
            ate(&perturbed)
        }
    }
}

/// Effect estimate on steps carrying one extra covariate each. The
/// estimator is covariate-blind by construction; the argument exists so
/// the common-cause probe exercises a real code path with the augmented
/// data in hand.
fn ate_with_covariates(recordings: &[EpisodeRecording], covariates: &[f64]) -> Result<f64> {
    let steps: usize = recordings.iter().map(EpisodeRecording::len).sum();
    if covariates.len() != steps {
        return Err(Error::ShapeMismatch {
            context: "covariate column",
            expected: steps,
            got: covariates.len(),
        });
    }
    ate(recordings)
}

/// Keep a uniformly random subset of steps, dropping `fraction` of them
/// (at least one step always survives). Step order is preserved.
fn subsample<R: Rng>(rec: &EpisodeRecording, fraction: f64, rng: &mut R) -> EpisodeRecording {
    let n = rec.len();
    let drop = ((n as f64 * fraction) as usize).min(n.saturating_sub(1));
    let mut indices: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first `drop` slots become the removed set.
    for k in 0..drop {
        let j = rng.gen_range(k..n);
        indices.swap(k, j);
    }
    let mut removed: Vec<usize> = indices[..drop].to_vec();
    removed.sort_unstable();
    let mut steps = Vec::with_capacity(n - drop);
    let mut next_removed = removed.iter().copied().peekable();
    for (i, s) in rec.steps.iter().enumerate() {
        if next_removed.peek() == Some(&i) {
            next_removed.next();
        } else {
            steps.push(s.clone());
        }
    }
    EpisodeRecording { steps }
}

/// Simulate measurement error in the treatment assignment: flip each
/// recorded label with probability `error_rate`, then derive every step's
/// probability directly from its (possibly corrupted) label. Models a
/// pipeline that trusts reported labels as the assignment.
pub fn apply_intervention_noise<R: Rng>(
    recordings: &[EpisodeRecording],
    error_rate: f64,
    rng: &mut R,
) -> Result<Vec<EpisodeRecording>> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::Malformed("error rate out of range"));
    }
    Ok(recordings
        .iter()
        .map(|rec| {
            let mut rec = rec.clone();
            for s in &mut rec.steps {
                if rng.gen::<f64>() < error_rate {
                    s.label ^= 1;
                }
                s.p_est = f64::from(s.label);
            }
            rec
        })
        .collect())
}

/// Effect estimate with its refutation probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteReport {
    pub ate: f64,
    pub common_cause: f64,
    pub placebo: f64,
    pub subset: f64,
}

impl AteReport {
    /// Run the estimate and all three probes.
    pub fn compute<R: Rng>(
        recordings: &[EpisodeRecording],
        params: RefuteParams,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            ate: ate(recordings)?,
            common_cause: refute(recordings, RefuteMode::CommonCause, params, rng)?,
            placebo: refute(recordings, RefuteMode::Placebo, params, rng)?,
            subset: refute(recordings, RefuteMode::Subset, params, rng)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::step;
    use crate::metrics::StepRecord;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn ite_interpolates_between_clean_and_noisy_values() {
        assert_eq!(ite(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(ite(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(ite(2.0, 4.0, 0.5).unwrap(), 3.0);
        assert!(ite(1.0, 0.0, -0.1).is_err());
        assert!(ite(1.0, 0.0, 1.1).is_err());
    }

    #[test]
    fn single_step_effect_swaps_the_delivery_roles() {
        // Clean value 1, interfered value 0, assignment probability 1:
        // under the recorded assignment the step is worth the interfered
        // value (0); with the roles swapped it is worth the clean value
        // (1). The effect of interference on this step is +1.
        let rec = EpisodeRecording {
            steps: vec![step(vec![1.0], vec![0.0], 1.0, 1)],
        };
        assert_abs_diff_eq!(ate(&[rec]).unwrap(), 1.0);

        // Probability one half makes the two expectations identical.
        let rec = EpisodeRecording {
            steps: vec![step(vec![1.0], vec![0.0], 0.5, 1)],
        };
        assert_abs_diff_eq!(ate(&[rec]).unwrap(), 0.0);
    }

    #[test]
    fn identical_values_give_exactly_zero_effect() {
        let mut steps = Vec::new();
        for k in 0..50 {
            let v = 0.3 * k as f64;
            steps.push(step(vec![v, v - 1.0], vec![v, v - 1.0], 0.37, k as u8 & 1));
        }
        let recs = vec![EpisodeRecording { steps }; 3];
        assert_eq!(ate(&recs).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_reduces_to_mean_value_gap() {
        let mut rng = rng(7);
        let mut recs = Vec::new();
        for _ in 0..4 {
            let mut steps = Vec::new();
            for _ in 0..9 {
                let qc = vec![rng.gen::<f64>(), rng.gen::<f64>()];
                let qn = vec![rng.gen::<f64>(), rng.gen::<f64>()];
                steps.push(step(qc, qn, 0.0, 0));
            }
            recs.push(EpisodeRecording { steps });
        }
        let mut expected = 0.0;
        for rec in &recs {
            let mut sum = 0.0;
            for s in &rec.steps {
                sum += scalar_q(&s.q_noisy) - scalar_q(&s.q_clean);
            }
            expected += sum / rec.len() as f64;
        }
        expected /= recs.len() as f64;
        assert_abs_diff_eq!(ate(&recs).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn estimate_matches_direct_recomputation() {
        // Independent oracle: recompute the estimate from scratch with the
        // closed-form step contrast.
        let mut rng = rng(11);
        let mut recs = Vec::new();
        for _ in 0..5 {
            let mut steps = Vec::new();
            for _ in 0..23 {
                let qc = vec![rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0];
                let qn = vec![rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0];
                let p = rng.gen::<f64>();
                steps.push(step(qc, qn, p, 0));
            }
            recs.push(EpisodeRecording { steps });
        }
        let mut expected = 0.0;
        for rec in &recs {
            let mut sum = 0.0;
            for s in &rec.steps {
                let qc = s.q_clean[0].max(s.q_clean[1]);
                let qn = s.q_noisy[0].max(s.q_noisy[1]);
                sum += (qn - qc) * (1.0 - 2.0 * s.p_est);
            }
            expected += sum / rec.len() as f64;
        }
        expected /= recs.len() as f64;
        assert_abs_diff_eq!(ate(&recs).unwrap(), expected, epsilon = 1e-12);
    }

    /// Trace with a real effect: interfered steps lose value, labels drawn
    /// at the given rate, probabilities matching the labels.
    fn effectful_recordings(episodes: usize, steps_per: usize, rate: f64) -> Vec<EpisodeRecording> {
        let mut rng = rng(23);
        let mut recs = Vec::new();
        for _ in 0..episodes {
            let mut steps = Vec::new();
            for _ in 0..steps_per {
                let label = u8::from(rng.gen::<f64>() < rate);
                let base = 1.0 + rng.gen::<f64>();
                let qc = vec![base, base - 0.5];
                let qn = if label == 1 {
                    vec![base - 0.8, base - 0.9]
                } else {
                    qc.clone()
                };
                steps.push(step(qc, qn, f64::from(label), label));
            }
            recs.push(EpisodeRecording { steps });
        }
        recs
    }

    #[test]
    fn common_cause_probe_leaves_the_estimate_unchanged() {
        let recs = effectful_recordings(6, 40, 0.3);
        let raw = ate(&recs).unwrap();
        let refuted = refute(
            &recs,
            RefuteMode::CommonCause,
            RefuteParams::default(),
            &mut rng(1),
        )
        .unwrap();
        assert_eq!(raw, refuted);
    }

    #[test]
    fn placebo_probe_collapses_a_real_effect() {
        let recs = effectful_recordings(10, 80, 0.3);
        let raw = ate(&recs).unwrap();
        assert!(raw.abs() > 0.05, "baseline effect too small: {raw}");
        let refuted = refute(
            &recs,
            RefuteMode::Placebo,
            RefuteParams::default(),
            &mut rng(2),
        )
        .unwrap();
        assert!(
            refuted.abs() < 0.15 * raw.abs(),
            "placebo {refuted} vs raw {raw}"
        );
    }

    #[test]
    fn subset_probe_stays_near_the_full_estimate() {
        let recs = effectful_recordings(10, 80, 0.3);
        let raw = ate(&recs).unwrap();
        let refuted = refute(
            &recs,
            RefuteMode::Subset,
            RefuteParams::default(),
            &mut rng(3),
        )
        .unwrap();
        assert!(
            (refuted - raw).abs() < 0.25 * raw.abs(),
            "subset {refuted} vs raw {raw}"
        );
    }

    #[test]
    fn subset_probe_preserves_step_order_and_count() {
        let rec = EpisodeRecording {
            steps: (0..10)
                .map(|k| {
                    let mut s = step(vec![k as f64], vec![k as f64], 0.0, 0);
                    s.clean = vec![k as f64];
                    s
                })
                .collect(),
        };
        let sub = subsample(&rec, 0.2, &mut rng(4));
        assert_eq!(sub.len(), 8);
        let kept: Vec<f64> = sub.steps.iter().map(|s| s.clean[0]).collect();
        let mut sorted = kept.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(kept, sorted, "subset must preserve order");

        // A one-step episode never empties.
        let tiny = EpisodeRecording {
            steps: vec![step(vec![1.0], vec![1.0], 0.0, 0)],
        };
        assert_eq!(subsample(&tiny, 0.9, &mut rng(5)).len(), 1);
    }

    #[test]
    fn intervention_noise_flips_labels_at_the_requested_rate() {
        let recs = effectful_recordings(4, 100, 0.5);
        let zero = apply_intervention_noise(&recs, 0.0, &mut rng(6)).unwrap();
        for (orig, out) in recs.iter().zip(&zero) {
            for (a, b) in orig.steps.iter().zip(&out.steps) {
                assert_eq!(a.label, b.label);
                assert_eq!(b.p_est, f64::from(b.label));
            }
        }
        let all = apply_intervention_noise(&recs, 1.0, &mut rng(7)).unwrap();
        for (orig, out) in recs.iter().zip(&all) {
            for (a, b) in orig.steps.iter().zip(&out.steps) {
                assert_eq!(a.label ^ 1, b.label);
            }
        }
        let half = apply_intervention_noise(&recs, 0.35, &mut rng(8)).unwrap();
        let flipped: usize = recs
            .iter()
            .zip(&half)
            .flat_map(|(o, h)| o.steps.iter().zip(&h.steps))
            .filter(|(a, b)| a.label != b.label)
            .count();
        let total: usize = recs.iter().map(EpisodeRecording::len).sum();
        let rate = flipped as f64 / total as f64;
        assert!((rate - 0.35).abs() < 0.08, "flip rate {rate}");
        assert!(apply_intervention_noise(&recs, 1.5, &mut rng(9)).is_err());
    }

    #[test]
    fn report_bundles_estimate_and_probes() {
        let recs = effectful_recordings(6, 60, 0.25);
        let report = AteReport::compute(&recs, RefuteParams::default(), &mut rng(10)).unwrap();
        assert_eq!(report.ate, ate(&recs).unwrap());
        assert_eq!(report.common_cause, report.ate);
        assert!(report.placebo.abs() < report.ate.abs());
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(ate(&[]).is_err());
        assert!(ate(&[EpisodeRecording::default()]).is_err());
        let r = refute(
            &[],
            RefuteMode::Placebo,
            RefuteParams::default(),
            &mut rng(11),
        );
        assert!(r.is_err());
        let bad = refute(
            &effectful_recordings(1, 5, 0.5),
            RefuteMode::Subset,
            RefuteParams { drop_fraction: 1.0 },
            &mut rng(12),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn scalar_value_is_the_greedy_entry() {
        let s: StepRecord = step(vec![0.2, 1.4, -3.0], vec![5.0, -1.0, 2.0], 0.0, 0);
        assert_eq!(scalar_q(&s.q_clean), 1.4);
        assert_eq!(scalar_q(&s.q_noisy), 5.0);
    }
}
