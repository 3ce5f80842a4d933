//! Chance-corrected inter-annotator agreement.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agreement level the ontology's annotation effort is expected to exceed.
pub const KAPPA_TARGET: f64 = 0.7;

/// Cohen's kappa between two aligned label sequences.
///
/// When chance agreement is total (both annotators used one and the same
/// label throughout) the result is 1.0.
pub fn cohen_kappa<L: Eq + Hash>(labels_a: &[L], labels_b: &[L]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::Validation(format!(
            "label lists differ in length ({} vs {})",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::validation("label lists are empty"));
    }
    // Integer form (n·agree − Σ a_l·b_l) / (n² − Σ a_l·b_l): exact counts and a
    // single division, so the result does not depend on map iteration order.
    let n = labels_a.len() as u128;
    let agree = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count() as u128;

    let mut marginals: HashMap<&L, (u128, u128)> = HashMap::new();
    for a in labels_a {
        marginals.entry(a).or_default().0 += 1;
    }
    for b in labels_b {
        marginals.entry(b).or_default().1 += 1;
    }
    let chance: u128 = marginals.values().map(|&(ca, cb)| ca * cb).sum();
    if chance == n * n {
        return Ok(1.0);
    }
    let num = (n * agree) as f64 - chance as f64;
    Ok(num / (n * n - chance) as f64)
}

/// One annotator's labels over the shared item list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeling<L> {
    pub annotator: String,
    pub labels: Vec<L>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Unweighted mean of the pairwise kappas.
    pub kappa: f64,
    pub item_count: usize,
    pub annotator_pairs: Vec<(String, String)>,
    /// Keyed `"a|b"` in pair order.
    pub per_pair_kappa: BTreeMap<String, f64>,
    pub target: f64,
    pub target_met: bool,
}

impl AgreementReport {
    pub fn meets_target(&self) -> bool {
        self.kappa > KAPPA_TARGET
    }
}

/// Pairwise Cohen's kappa over every annotator pair, averaged.
pub fn agreement_report<L: Eq + Hash>(labelings: &[Labeling<L>]) -> Result<AgreementReport> {
    if labelings.len() < 2 {
        return Err(Error::validation("agreement needs at least two annotators"));
    }
    let item_count = labelings[0].labels.len();
    if item_count == 0 {
        return Err(Error::validation("label lists are empty"));
    }
    if let Some(l) = labelings.iter().find(|l| l.labels.len() != item_count) {
        return Err(Error::Validation(format!(
            "annotator {} labeled {} items, expected {item_count}",
            l.annotator,
            l.labels.len()
        )));
    }
    let mut pairs = Vec::new();
    let mut per_pair = BTreeMap::new();
    let mut sum = 0.0;
    for i in 0..labelings.len() {
        for j in i + 1..labelings.len() {
            let (a, b) = (&labelings[i], &labelings[j]);
            let k = cohen_kappa(&a.labels, &b.labels)?;
            sum += k;
            per_pair.insert(format!("{}|{}", a.annotator, b.annotator), k);
            pairs.push((a.annotator.clone(), b.annotator.clone()));
        }
    }
    let kappa = sum / pairs.len() as f64;
    Ok(AgreementReport {
        kappa,
        item_count,
        annotator_pairs: pairs,
        per_pair_kappa: per_pair,
        target: KAPPA_TARGET,
        target_met: kappa > KAPPA_TARGET,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Contingency-table oracle: builds the full k×k table over the sorted
    /// label alphabet and reads p_o off the diagonal and p_e off the margins.
    fn table_kappa(a: &[&str], b: &[&str]) -> f64 {
        let mut alphabet: Vec<&str> = a.iter().chain(b).copied().collect();
        alphabet.sort();
        alphabet.dedup();
        let k = alphabet.len();
        let idx = |l: &str| alphabet.iter().position(|x| *x == l).unwrap();
        let mut table = vec![vec![0.0; k]; k];
        for (x, y) in a.iter().zip(b) {
            table[idx(x)][idx(y)] += 1.0;
        }
        let n = a.len() as f64;
        let po: f64 = (0..k).map(|i| table[i][i]).sum::<f64>() / n;
        let pe: f64 = (0..k)
            .map(|i| {
                let row: f64 = table[i].iter().sum();
                let col: f64 = (0..k).map(|r| table[r][i]).sum();
                row * col / (n * n)
            })
            .sum();
        if pe == 1.0 {
            1.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }

    #[test]
    fn identical_lists() {
        assert_eq!(cohen_kappa(&["E", "S", "B"], &["E", "S", "B"]).unwrap(), 1.0);
    }

    #[test]
    fn chance_level() {
        let (a, b) = (["A", "A", "B", "B"], ["A", "B", "A", "B"]);
        assert_eq!(table_kappa(&a, &b), 0.0);
        assert_eq!(cohen_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn three_category_case() {
        let a = ["E", "E", "S", "S", "B", "B"];
        let b = ["E", "E", "S", "B", "B", "B"];
        // p_o = 5/6, p_e = (2·2 + 2·1 + 2·3)/36 = 1/3
        assert!((table_kappa(&a, &b) - 0.75).abs() < 1e-12);
        assert!((cohen_kappa(&a, &b).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_label() {
        assert_eq!(cohen_kappa(&["x", "x"], &["x", "x"]).unwrap(), 1.0);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(cohen_kappa(&["a"], &["a", "b"]), Err(Error::Validation(_))));
        assert!(matches!(cohen_kappa::<&str>(&[], &[]), Err(Error::Validation(_))));
    }

    fn lab(name: &str, labels: &[&'static str]) -> Labeling<&'static str> {
        Labeling { annotator: name.into(), labels: labels.to_vec() }
    }

    #[test]
    fn report_identical_annotators() {
        let l = ["E", "S", "B", "E"];
        let r = agreement_report(&[lab("a", &l), lab("b", &l), lab("c", &l)]).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert_eq!(r.per_pair_kappa.len(), 3);
        assert!(r.per_pair_kappa.values().all(|&k| k == 1.0));
        assert!(r.target_met);
    }

    #[test]
    fn report_two_annotators_reduces_to_cohen() {
        let a = ["E", "E", "S", "S", "B", "B"];
        let b = ["E", "E", "S", "B", "B", "B"];
        let r = agreement_report(&[lab("a", &a), lab("b", &b)]).unwrap();
        assert_eq!(r.kappa, cohen_kappa(&a, &b).unwrap());
        assert_eq!(r.annotator_pairs, vec![("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn report_with_dissenter() {
        let base = ["E", "S", "B", "E", "S", "B"];
        let dissent = ["S", "B", "E", "S", "B", "E"];
        let r = agreement_report(&[lab("a", &base), lab("b", &base), lab("c", &dissent)]).unwrap();
        let expected = (table_kappa(&base, &base) + 2.0 * table_kappa(&base, &dissent)) / 3.0;
        assert!((r.kappa - expected).abs() < 1e-12);
        assert!(r.kappa < 1.0);
        assert!(!r.target_met);
    }

    #[test]
    fn report_needs_two() {
        assert!(agreement_report(&[lab("a", &["E"])]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
            (1usize..30, 2u8..6)
                .prop_flat_map(|(n, k)| (proptest::collection::vec(0..k, n), proptest::collection::vec(0..k, n)))
        }

        proptest! {
            #[test]
            fn symmetric((a, b) in pair()) {
                let k1 = cohen_kappa(&a, &b).unwrap();
                let k2 = cohen_kappa(&b, &a).unwrap();
                prop_assert!((k1 - k2).abs() < 1e-12);
            }

            #[test]
            fn relabeling_invariant((a, b) in pair(), shift in 1u8..5) {
                let map = |v: &[u8]| v.iter().map(|x| (x + shift) % 7 + 10).collect::<Vec<u8>>();
                let k1 = cohen_kappa(&a, &b).unwrap();
                let k2 = cohen_kappa(&map(&a), &map(&b)).unwrap();
                prop_assert!((k1 - k2).abs() < 1e-12);
            }

            #[test]
            fn one_iff_identical((a, b) in pair()) {
                let k = cohen_kappa(&a, &b).unwrap();
                prop_assert_eq!((k - 1.0).abs() < 1e-12, a == b);
            }
        }
    }
}
