use std::collections::BTreeMap;

use crate::rng::{domain, StreamRng};
use crate::{Error, Result};

use super::{LabeledDataset, Split};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportions(pub [f64; 3]);

impl Default for Proportions {
    fn default() -> Self {
        Proportions([0.8, 0.1, 0.1])
    }
}

impl Proportions {
    pub fn validate(&self) -> Result<()> {
        let p = self.0;
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("split proportions must be non-negative and sum to 1, got {p:?}")));
        }
        Ok(())
    }
}

/// Largest-remainder rounding of `n * p`.
fn apportion(n: usize, p: &[f64; 3]) -> [usize; 3] {
    let ideal = p.map(|v| v * n as f64);
    let mut out = ideal.map(|v| v.floor() as usize);
    let mut left = n - out.iter().sum::<usize>();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())));
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[s] += 1;
        left -= 1;
    }
    out
}

/// Splits units grouped by class. Each class gets `floor(n_c * p_s)` units
/// per split; the leftover units go to splits that still lack units relative
/// to the global largest-remainder totals, so class counts stay within one of
/// their ideal and split totals match the global apportionment whenever the
/// remainders allow it.
fn assign(classes: &BTreeMap<Vec<u8>, Vec<usize>>, n_units: usize, p: &[f64; 3], seed: u64) -> Vec<Split> {
    let totals = apportion(n_units, p);
    let mut floors: Vec<[usize; 3]> = Vec::new();
    let mut col_used = [0usize; 3];
    for members in classes.values() {
        let f = p.map(|v| (v * members.len() as f64).floor() as usize);
        for s in 0..3 {
            col_used[s] += f[s];
        }
        floors.push(f);
    }
    let mut need: Vec<i64> = (0..3).map(|s| totals[s] as i64 - col_used[s] as i64).collect();

    let mut rng = StreamRng::new(seed, domain::SPLIT, 0);
    let mut tags = vec![Split::Train; n_units];
    for ((_, members), f) in classes.iter().zip(&floors) {
        let mut counts = *f;
        let mut rest = members.len() - f.iter().sum::<usize>();
        let frac = p.map(|v| v * members.len() as f64 - (v * members.len() as f64).floor());
        while rest > 0 {
            let s = (0..3)
                .filter(|&s| p[s] > 0.0 && counts[s] == f[s])
                .max_by(|&a, &b| {
                    (need[a] > 0, frac[a], need[a]).partial_cmp(&(need[b] > 0, frac[b], need[b])).expect("finite")
                })
                .or_else(|| (0..3).filter(|&s| p[s] > 0.0).max_by_key(|&s| need[s]))
                .expect("some split has positive weight");
            counts[s] += 1;
            need[s] -= 1;
            rest -= 1;
        }
        let mut order = members.clone();
        rng.shuffle(&mut order);
        let mut it = order.into_iter();
        for s in Split::ALL {
            for u in it.by_ref().take(counts[s as usize]) {
                tags[u] = s;
            }
        }
    }
    tags
}

fn check_classes(d: &LabeledDataset, rows: &[usize]) -> Result<()> {
    for a in 0..d.k() {
        let rate = d.positive_rate(rows, a);
        if rate == 0.0 || rate == 1.0 {
            return Err(Error::Data(format!(
                "attribute '{}' has an empty class; stratification impossible",
                d.attr_names[a]
            )));
        }
    }
    Ok(())
}

/// Stratified split: examples are grouped by their full label vector and
/// each group is divided according to `p`.
pub fn split(mut d: LabeledDataset, p: Proportions, seed: u64) -> Result<LabeledDataset> {
    p.validate()?;
    let all: Vec<usize> = (0..d.len()).collect();
    check_classes(&d, &all)?;
    let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for i in 0..d.len() {
        classes.entry(d.label(i).to_vec()).or_default().push(i);
    }
    d.split = assign(&classes, d.len(), &p.0, seed);
    Ok(d)
}

/// Split of a paired dataset: both siblings of a pair share a tag, and pairs
/// are stratified by the labels other than the toggled attribute `attr`.
pub fn split_pairs(mut d: LabeledDataset, attr: usize, p: Proportions, seed: u64) -> Result<LabeledDataset> {
    p.validate()?;
    let pairs = d.pairs(attr)?;
    let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for (t, &(a, _)) in pairs.iter().enumerate() {
        let mut key = d.label(a).to_vec();
        key.remove(attr);
        classes.entry(key).or_default().push(t);
    }
    let tags = assign(&classes, pairs.len(), &p.0, seed);
    for (t, &(a, b)) in pairs.iter().enumerate() {
        d.split[a] = tags[t];
        d.split[b] = tags[t];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(n: usize, on: usize) -> LabeledDataset {
        let y: Vec<u8> = (0..n).map(|i| u8::from(i < on)).collect();
        LabeledDataset::new(vec![1], (0..n).map(|i| i as f32).collect(), y, vec!["a".into()]).unwrap()
    }

    fn counts(d: &LabeledDataset) -> [usize; 3] {
        Split::ALL.map(|s| d.indices(s).len())
    }

    #[test]
    fn ten_examples_split_eight_one_one() {
        let d = split(two_class(10, 5), Proportions::default(), 0).unwrap();
        assert_eq!(counts(&d), [8, 1, 1]);
    }

    #[test]
    fn same_seed_same_tags() {
        let a = split(two_class(100, 30), Proportions::default(), 7).unwrap();
        let b = split(two_class(100, 30), Proportions::default(), 7).unwrap();
        assert_eq!(a.split, b.split);
        let c = split(two_class(100, 30), Proportions::default(), 8).unwrap();
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn stratified_within_one() {
        let d = split(two_class(1000, 137), Proportions::default(), 3).unwrap();
        for (si, s) in Split::ALL.iter().enumerate() {
            let rows = d.indices(*s);
            let on = rows.iter().filter(|&&r| d.label(r)[0] == 1).count() as f64;
            let ideal = 137.0 * Proportions::default().0[si];
            assert!((on - ideal).abs() <= 1.0, "{s:?}: {on} vs {ideal}");
        }
        assert_eq!(counts(&d), [800, 100, 100]);
    }

    #[test]
    fn empty_class_rejected() {
        assert!(matches!(split(two_class(10, 0), Proportions::default(), 0), Err(Error::Data(_))));
        assert!(split(two_class(10, 5), Proportions([0.5, 0.5, 0.5]), 0).is_err());
    }
}
