use std::collections::BTreeMap;

use crate::{Result, StatsError};

/// Cohen's kappa between two raters labelling the same items.
///
/// Expected agreement comes from the product of each rater's marginal label
/// frequencies. When both observed and expected agreement are 1 (both raters
/// used one and the same label throughout) the value is defined as 1.
pub fn cohens_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(StatsError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = labels_a.len() as f64;

    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (a, b) in labels_a.iter().zip(labels_b) {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        if a == b {
            agree += 1;
        }
    }
    let observed = agree as f64 / n;
    let expected = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum::<f64>();

    if (1.0 - expected).abs() < f64::EPSILON {
        // pe == 1 forces po == 1
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences() {
        let a = ["x", "y", "z", "y"];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        let constant = ["x"; 5];
        assert_eq!(cohens_kappa(&constant, &constant).unwrap(), 1.0);
    }

    #[test]
    fn chance_agreement_is_zero() {
        let a = ['a', 'a', 'b', 'b'];
        let b = ['a', 'b', 'a', 'b'];
        assert_eq!(cohens_kappa(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn three_category_confusion_matrix() {
        // rows = rater A, cols = rater B
        //       a  b  c
        //   a [ 3, 1, 0 ]
        //   b [ 1, 3, 1 ]
        //   c [ 0, 1, 2 ]
        // po = 8/12, pe = (4*4 + 5*5 + 3*3)/144 = 25/72, kappa = 23/47
        let a = "aaaabbbbbccc".chars().collect::<Vec<_>>();
        let b = "aaababbbcbcc".chars().collect::<Vec<_>>();
        let k = cohens_kappa(&a, &b).unwrap();
        assert!((k - 23.0 / 47.0).abs() < 1e-12, "{k}");
    }

    #[test]
    fn errors() {
        assert_eq!(
            cohens_kappa(&[1, 2], &[1]),
            Err(StatsError::LengthMismatch { left: 2, right: 1 })
        );
        let empty: [u8; 0] = [];
        assert_eq!(cohens_kappa(&empty, &empty), Err(StatsError::EmptyInput));
    }
}
