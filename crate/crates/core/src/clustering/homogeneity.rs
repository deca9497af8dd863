use std::collections::BTreeMap;

use crate::clustering::dbscan::NOISE;
use crate::error::{Error, Result};

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `1 − H(C|K) / H(C)` over empirical counts. Each noise point counts as its
/// own singleton cluster; a single ground-truth class scores 1.
pub fn homogeneity<C: Ord>(classes: &[C], clusters: &[i64]) -> Result<f64> {
    if classes.len() != clusters.len() {
        return Err(Error::InvalidArgument(format!(
            "{} class labels but {} cluster assignments",
            classes.len(),
            clusters.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::InvalidArgument("homogeneity of an empty assignment".into()));
    }
    let n = classes.len() as f64;

    let mut class_counts: BTreeMap<&C, usize> = BTreeMap::new();
    for c in classes {
        *class_counts.entry(c).or_default() += 1;
    }
    let h_c = entropy(class_counts.values().copied(), n);
    if h_c == 0.0 {
        return Ok(1.0);
    }

    // Noise points get distinct negative keys so none share a cluster.
    let mut joint: BTreeMap<(i64, &C), usize> = BTreeMap::new();
    let mut cluster_sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, (c, &k)) in classes.iter().zip(clusters).enumerate() {
        let key = if k == NOISE { -(i as i64) - 2 } else { k };
        *joint.entry((key, c)).or_default() += 1;
        *cluster_sizes.entry(key).or_default() += 1;
    }
    // H(C|K) = −Σ n_ck/n · ln(n_ck / n_k)
    let h_c_given_k: f64 = joint
        .iter()
        .map(|(&(k, _), &n_ck)| {
            let n_k = cluster_sizes[&k] as f64;
            -(n_ck as f64 / n) * (n_ck as f64 / n_k).ln()
        })
        .sum();
    Ok((1.0 - h_c_given_k / h_c).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(homogeneity(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert!(homogeneity(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap().abs() < 1e-15);
        let h = homogeneity(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-12, "{h}");
    }

    #[test]
    fn single_class_and_noise() {
        assert_eq!(homogeneity(&["a", "a"], &[0, 1]).unwrap(), 1.0);
        assert_eq!(homogeneity(&[0, 1, 0, 1], &[NOISE; 4]).unwrap(), 1.0);
        assert!(homogeneity(&[0, 1], &[0]).is_err());
        assert!(homogeneity::<i32>(&[], &[]).is_err());
    }
}
