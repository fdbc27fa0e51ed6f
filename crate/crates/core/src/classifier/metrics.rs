use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::StanceLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub macro_f1: f64,
    /// F1 per class, indexed by [`StanceLabel::index`].
    pub per_class: [f64; 2],
    /// Classes absent from both predictions and golds; they score 0.
    pub absent: Vec<StanceLabel>,
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(predictions: &[StanceLabel], golds: &[StanceLabel]) -> Result<F1Report, ClassifierError> {
    if predictions.len() != golds.len() {
        return Err(ClassifierError::LengthMismatch { predictions: predictions.len(), golds: golds.len() });
    }
    if golds.is_empty() {
        return Err(ClassifierError::EmptyEvaluation);
    }
    let mut per_class = [0.0; 2];
    let mut absent = Vec::new();
    for label in StanceLabel::ALL {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (&p, &g) in predictions.iter().zip(golds) {
            match (p == label, g == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            absent.push(label);
        } else {
            per_class[label.index()] = 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(F1Report { macro_f1: (per_class[0] + per_class[1]) / 2.0, per_class, absent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use StanceLabel::{Oppose as O, Support as S};

    #[test]
    fn fixtures() {
        assert_eq!(macro_f1(&[S, O, O, S], &[S, O, O, S]).unwrap().macro_f1, 1.0);
        let r = macro_f1(&[S, S, S, S], &[S, S, O, O]).unwrap();
        assert_eq!(r.per_class, [2.0 / 3.0, 0.0]);
        assert_eq!(r.macro_f1, 1.0 / 3.0);
        assert_eq!(macro_f1(&[O, S], &[S, O]).unwrap().macro_f1, 0.0);
    }

    #[test]
    fn absent_class_is_flagged() {
        let r = macro_f1(&[S, S], &[S, S]).unwrap();
        assert_eq!(r.absent, [O]);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(macro_f1(&[S], &[S, O]), Err(ClassifierError::LengthMismatch { .. })));
        assert!(matches!(macro_f1(&[], &[]), Err(ClassifierError::EmptyEvaluation)));
    }

    fn labels() -> impl Strategy<Value = Vec<(bool, bool)>> {
        proptest::collection::vec((any::<bool>(), any::<bool>()), 1..40)
    }

    fn split(pairs: &[(bool, bool)], flip: bool) -> (Vec<StanceLabel>, Vec<StanceLabel>) {
        let to = |b: bool| if b ^ flip { S } else { O };
        pairs.iter().map(|&(p, g)| (to(p), to(g))).unzip()
    }

    proptest! {
        #[test]
        fn invariant_under_renaming_and_permutation(pairs in labels(), rot in 0usize..40) {
            let (p, g) = split(&pairs, false);
            let base = macro_f1(&p, &g).unwrap().macro_f1;
            let (pf, gf) = split(&pairs, true);
            prop_assert_eq!(base, macro_f1(&pf, &gf).unwrap().macro_f1);
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            let (pr, gr) = split(&rotated, false);
            prop_assert_eq!(base, macro_f1(&pr, &gr).unwrap().macro_f1);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }
}
