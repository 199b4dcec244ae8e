use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bodygen::Gender;

use super::DatasetError;

/// `k` disjoint test folds covering every id. Train set `f` is every id not
/// in test fold `f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldSplit {
    pub fn test(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    pub fn train(&self, fold: usize) -> Vec<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect()
    }

    /// Checks disjointness, coverage of `ids`, and fold sizes within one of
    /// `len / k`.
    pub fn validate(&self, ids: &[String]) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSplit(m));
        if self.folds.len() != self.k {
            return bad(format!("{} folds for k = {}", self.folds.len(), self.k));
        }
        let mut seen = HashSet::new();
        for id in self.folds.iter().flatten() {
            if !seen.insert(id.as_str()) {
                return bad(format!("{id} appears in two folds"));
            }
        }
        let all: HashSet<&str> = ids.iter().map(String::as_str).collect();
        if seen != all {
            return bad("folds do not cover exactly the dataset ids".into());
        }
        let exact = ids.len() as f64 / self.k as f64;
        for (f, fold) in self.folds.iter().enumerate() {
            if (fold.len() as f64 - exact).abs() > 1.0 {
                return bad(format!("fold {f} has {} ids, expected {exact:.1}", fold.len()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Seeded k-fold split, stratified by gender when `genders` is given.
///
/// Ids are shuffled, grouped by gender keeping the shuffled order, and dealt
/// round-robin into folds. Fold sizes differ by at most one, and so do the
/// per-fold counts of each gender.
pub fn kfold_split(ids: &[String], genders: Option<&[Gender]>, k: usize, seed: u64) -> Result<FoldSplit, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidSplit(format!("k must be at least 2, got {k}")));
    }
    if ids.len() < k {
        return Err(DatasetError::TooFewSamples { count: ids.len(), k });
    }
    if let Some(g) = genders {
        assert_eq!(g.len(), ids.len(), "one gender per id");
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    if let Some(g) = genders {
        // stable: keeps the shuffled order within each gender
        order.sort_by_key(|&i| g[i]);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        folds[pos % k].push(ids[i].clone());
    }
    Ok(FoldSplit { k, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{i:06}")).collect()
    }

    #[test]
    fn ten_into_five() {
        let s = kfold_split(&ids(10), None, 5, 1).unwrap();
        assert!(s.folds.iter().all(|f| f.len() == 2));
        s.validate(&ids(10)).unwrap();
        assert_eq!(s, kfold_split(&ids(10), None, 5, 1).unwrap());
        assert_ne!(s, kfold_split(&ids(10), None, 5, 2).unwrap());
        assert_eq!(s.train(0).len(), 8);
    }

    #[test]
    fn stratified_by_gender() {
        let n = 203;
        let g: Vec<Gender> = (0..n).map(|i| if i % 3 == 0 { Gender::Female } else { Gender::Male }).collect();
        let s = kfold_split(&ids(n), Some(&g), 5, 7).unwrap();
        s.validate(&ids(n)).unwrap();
        let females: Vec<usize> = s
            .folds
            .iter()
            .map(|f| f.iter().filter(|id| g[id.parse::<usize>().unwrap()] == Gender::Female).count())
            .collect();
        let (lo, hi) = (females.iter().min().unwrap(), females.iter().max().unwrap());
        assert!(hi - lo <= 1, "{females:?}");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kfold_split(&ids(3), None, 5, 0),
            Err(DatasetError::TooFewSamples { count: 3, k: 5 })
        ));
        assert!(kfold_split(&ids(3), None, 1, 0).is_err());
        let mut s = kfold_split(&ids(10), None, 5, 1).unwrap();
        let dup = s.folds[0][0].clone();
        s.folds[1].push(dup);
        assert!(s.validate(&ids(10)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = kfold_split(&ids(12), None, 3, 4).unwrap();
        assert_eq!(FoldSplit::from_json(&s.to_json()).unwrap(), s);
    }
}
