use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Cluster id given to points that belong to no cluster.
pub const NOISE: i64 = -1;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn check_dims(points: &[Vec<f64>]) -> Result<()> {
    if let Some(first) = points.first() {
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != first.len()) {
            return Err(Error::shape(
                "dbscan",
                format!("point {i} has dimension {}, point 0 has {}", p.len(), first.len()),
            ));
        }
    }
    Ok(())
}

/// Indices within `eps` of `points[i]`, including `i` itself.
fn region(points: &[Vec<f64>], i: usize, eps: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&j| euclidean(&points[i], &points[j]) <= eps)
        .collect()
}

/// Density-based clustering. Points are visited in index order and clusters
/// are numbered `0, 1, ...` in order of discovery; a border point reachable
/// from several clusters joins the first one that reaches it.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<i64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::InvalidArgument("min_pts must be >= 1".into()));
    }
    check_dims(points)?;

    let n = points.len();
    let mut labels: Vec<Option<i64>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = region(points, i, eps);
        if seeds.len() < min_pts {
            labels[i] = Some(NOISE);
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(id);
        let mut queue: VecDeque<usize> = seeds.into_iter().filter(|&j| j != i).collect();
        while let Some(q) = queue.pop_front() {
            match labels[q] {
                Some(NOISE) => labels[q] = Some(id),
                Some(_) => continue,
                None => {
                    labels[q] = Some(id);
                    let nq = region(points, q, eps);
                    if nq.len() >= min_pts {
                        queue.extend(
                            nq.into_iter()
                                .filter(|&j| labels[j].is_none() || labels[j] == Some(NOISE)),
                        );
                    }
                }
            }
        }
    }
    Ok(labels.into_iter().map(|l| l.expect("every point visited")).collect())
}

/// Median distance from each point to its `k`-th nearest other point.
pub fn median_knn_distance(points: &[Vec<f64>], k: usize) -> Result<f64> {
    check_dims(points)?;
    if points.len() < 2 || k == 0 {
        return Err(Error::InvalidArgument("need at least 2 points and k >= 1".into()));
    }
    let mut kth: Vec<f64> = (0..points.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| euclidean(&points[i], &points[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k.min(d.len()) - 1]
        })
        .collect();
    Ok(median(&mut kth))
}

/// Median of a non-empty slice; mean of the two middle values for even length.
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
