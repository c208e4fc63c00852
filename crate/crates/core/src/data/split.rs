use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::keyed_order;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub holdout_fraction: f64,
    pub folds: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            seed: 0,
            holdout_fraction: 0.3,
            folds: 10,
        }
    }
}

/// Number of held-out rows for `n` rows: `fraction * n` rounded half away from zero.
pub fn holdout_count(n: usize, fraction: f64) -> usize {
    // the epsilon keeps products like 0.7 * 5 = 3.4999999999999996 on the intended side
    ((fraction * n as f64) + 1e-9).round() as usize
}

/// Row indices of the (train, holdout) split.
pub fn holdout_indices(n: usize, seed: u64, fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let h = holdout_count(n, fraction).min(n);
    if h == 0 || h == n {
        return Err(Error::DegenerateSplit {
            train: n - h,
            holdout: h,
        });
    }
    let order = keyed_order(seed, n);
    let mut holdout = order[..h].to_vec();
    let mut train = order[h..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Ok((train, holdout))
}

pub fn split_holdout(data: &Dataset, plan: &SplitPlan) -> Result<(Dataset, Dataset)> {
    if !(plan.holdout_fraction > 0.0 && plan.holdout_fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0, 1), got {}",
            plan.holdout_fraction
        )));
    }
    let (train, holdout) = holdout_indices(data.len(), plan.seed, plan.holdout_fraction)?;
    Ok((data.subset(&train), data.subset(&holdout)))
}

/// Test-row indices of each fold. Fold sizes differ by at most one.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(Error::TooManyFolds { folds, rows: n });
    }
    let mut out = vec![Vec::new(); folds];
    for (pos, row) in keyed_order(seed, n).into_iter().enumerate() {
        out[pos % folds].push(row);
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

pub fn kfold_partition(data: &Dataset, plan: &SplitPlan) -> Result<Vec<(Dataset, Dataset)>> {
    let n = data.len();
    let tests = kfold_indices(n, plan.folds, plan.seed)?;
    Ok(tests
        .iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            (data.subset(&train), data.subset(test))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::data::{Schema, Variable};

    fn rows(n: usize) -> Dataset {
        let schema = Arc::new(Schema::new(vec![Variable::continuous("c", 0.0, 1e6)]).unwrap());
        Dataset::new(schema, (0..n).map(|i| vec![i as f64]).collect())
    }

    #[test]
    fn seven_three_split() {
        let plan = SplitPlan {
            seed: 11,
            holdout_fraction: 0.3,
            folds: 10,
        };
        let (train, holdout) = split_holdout(&rows(10), &plan).unwrap();
        assert_eq!((train.len(), holdout.len()), (7, 3));
        let mut all: Vec<f64> = train.rows.iter().chain(&holdout.rows).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        let again = split_holdout(&rows(10), &plan).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(again.1, holdout);
    }

    #[test]
    fn rounding_rule_matches_exact_enumeration() {
        // exact rational reference: fraction = k/10, holdout = floor(k n / 10 + 1/2)
        for n in 1..=5usize {
            for k in 1..=9usize {
                let expected = (2 * k * n + 10) / 20;
                let fraction = k as f64 / 10.0;
                assert_eq!(holdout_count(n, fraction), expected, "n={n} k={k}");
                let res = holdout_indices(n, 1, fraction);
                if expected == 0 || expected >= n {
                    assert!(matches!(res, Err(Error::DegenerateSplit { .. })), "n={n} k={k}");
                } else {
                    let (train, hold) = res.unwrap();
                    assert_eq!(hold.len(), expected);
                    assert_eq!(train.len(), n - expected);
                }
            }
        }
        let plan = SplitPlan {
            seed: 0,
            holdout_fraction: 0.9,
            folds: 2,
        };
        assert!(matches!(
            split_holdout(&rows(2), &plan),
            Err(Error::DegenerateSplit { train: 0, holdout: 2 })
        ));
    }

    #[test]
    fn singleton_and_uneven_folds() {
        let f = kfold_indices(10, 10, 4).unwrap();
        assert!(f.iter().all(|t| t.len() == 1));
        let f = kfold_indices(11, 10, 4).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![1; 9], vec![2]].concat());
        assert!(kfold_indices(3, 4, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..200, k in 2usize..20, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let data = rows(n);
            let plan = SplitPlan { seed, holdout_fraction: 0.3, folds: k };
            let pairs = kfold_partition(&data, &plan).unwrap();
            prop_assert_eq!(pairs.len(), k);
            let mut seen: Vec<f64> = pairs.iter().flat_map(|(_, t)| t.rows.iter().map(|r| r[0])).collect();
            seen.sort_by(f64::total_cmp);
            prop_assert_eq!(seen, (0..n).map(|i| i as f64).collect::<Vec<_>>());
            let sizes: Vec<usize> = pairs.iter().map(|(_, t)| t.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for (train, test) in &pairs {
                prop_assert_eq!(train.len() + test.len(), n);
            }
            prop_assert_eq!(kfold_partition(&data, &plan).unwrap(), pairs);
        }
    }
}
