use crate::error::{check_unit, Result};
use crate::graph::EdgeStatus;

use super::types::{ValidationDecision, Verdict, WorkflowConfig};

/// Review priority: 1 at confidence 0.5, falling linearly to 0 at either end.
pub fn uncertainty(confidence: f64) -> Result<f64> {
    check_unit("confidence", confidence)?;
    Ok(1.0 - (2.0 * confidence - 1.0).abs())
}

/// Fraction of accepts among accept/reject verdicts; `None` without any.
pub fn validator_agreement(decisions: &[ValidationDecision]) -> Option<f64> {
    let accepts = decisions.iter().filter(|d| d.verdict == Verdict::Accept).count();
    let rejects = decisions.iter().filter(|d| d.verdict == Verdict::Reject).count();
    (accepts + rejects > 0).then(|| accepts as f64 / (accepts + rejects) as f64)
}

/// `alpha·model + (1 − alpha)·agreement`, or the model's confidence alone when
/// no validator has accepted or rejected.
pub fn combined_confidence(model_confidence: f64, decisions: &[ValidationDecision], alpha: f64) -> f64 {
    match validator_agreement(decisions) {
        Some(a) => alpha * model_confidence + (1.0 - alpha) * a,
        None => model_confidence,
    }
}

/// Proportional threshold controller on the observed reject rate, clamped to
/// the configured bounds. Windows without accepts or rejects leave tau alone.
pub fn update_thresholds(window: &[EdgeStatus], config: &WorkflowConfig) -> f64 {
    let accepts = window.iter().filter(|s| **s == EdgeStatus::Accepted).count();
    let rejects = window.iter().filter(|s| **s == EdgeStatus::Rejected).count();
    if accepts + rejects == 0 {
        return config.tau;
    }
    let rate = rejects as f64 / (accepts + rejects) as f64;
    (config.tau + config.eta * (rate - config.target_reject_rate)).clamp(config.tau_bounds.min, config.tau_bounds.max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workflow::Role;
    use chrono::{TimeZone, Utc};

    fn d(verdict: Verdict) -> ValidationDecision {
        ValidationDecision {
            edge_id: "e1".into(),
            validator_id: "v".into(),
            role: Role::Clinical,
            verdict,
            modification: None,
            comment: String::new(),
            decided_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(uncertainty(0.5).unwrap(), 1.0);
        assert_eq!(uncertainty(1.0).unwrap(), 0.0);
        assert_eq!(uncertainty(0.0).unwrap(), 0.0);
        assert!((uncertainty(0.9).unwrap() - 0.2).abs() < 1e-12);
        assert!(uncertainty(1.5).is_err());
        assert!(uncertainty(f64::NAN).is_err());
    }

    #[test]
    fn combined_examples() {
        assert_eq!(combined_confidence(0.8, &[], 0.5), 0.8);
        let three = [d(Verdict::Accept), d(Verdict::Accept), d(Verdict::Accept)];
        assert!((combined_confidence(0.8, &three, 0.5) - 0.9).abs() < 1e-12);
        let split = [d(Verdict::Accept), d(Verdict::Reject)];
        assert!((combined_confidence(0.6, &split, 0.5) - 0.55).abs() < 1e-12);
        assert_eq!(combined_confidence(0.3, &[d(Verdict::Modify)], 0.5), 0.3);
    }

    fn window(accepts: usize, rejects: usize) -> Vec<EdgeStatus> {
        let mut w = vec![EdgeStatus::Accepted; accepts];
        w.extend(vec![EdgeStatus::Rejected; rejects]);
        w.push(EdgeStatus::Superseded);
        w
    }

    #[test]
    fn threshold_examples() {
        let cfg = WorkflowConfig::default();
        assert_eq!(update_thresholds(&window(4, 1), &cfg), 0.70);
        assert!((update_thresholds(&window(1, 1), &cfg) - 0.73).abs() < 1e-12);
        let hot = WorkflowConfig { tau: 0.94, eta: 1.0, ..cfg.clone() };
        assert_eq!(update_thresholds(&window(0, 5), &hot), 0.95);
        assert_eq!(update_thresholds(&[EdgeStatus::Superseded], &cfg), 0.70);
        assert_eq!(update_thresholds(&[], &cfg), 0.70);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_accepts(model in 0.0f64..=1.0, alpha in 0.0f64..=1.0, a in 0usize..10, r in 0usize..10) {
                let mut ds: Vec<_> = (0..a).map(|_| d(Verdict::Accept)).chain((0..r).map(|_| d(Verdict::Reject))).collect();
                let before = combined_confidence(model, &ds, alpha);
                ds.push(d(Verdict::Accept));
                prop_assert!(combined_confidence(model, &ds, alpha) >= before - 1e-12);
            }

            #[test]
            fn tau_stays_in_bounds(a in 0usize..50, r in 0usize..50, eta in 0.0f64..5.0, target in 0.0f64..=1.0) {
                let cfg = WorkflowConfig { eta, target_reject_rate: target, ..WorkflowConfig::default() };
                let t = update_thresholds(&window(a, r), &cfg);
                prop_assert!(t >= cfg.tau_bounds.min && t <= cfg.tau_bounds.max);
            }
        }
    }
}
