//! Small dense-vector helpers shared by the path and dynamics code.
//!
//! Points are plain `[f64]` slices; the dimensions involved (1-3) are far too
//! small for a heavier vector type to pay off in the inner loops.

use nalgebra::{DMatrix, SymmetricEigen};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + t (b - a)`
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Normalizes in place; returns the original norm. Zero vectors are left alone.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Removes the component of `v` along the unit vector `t`.
#[inline]
pub fn reject(v: &mut [f64], t: &[f64]) {
    let c = dot(v, t);
    v.iter_mut().zip(t).for_each(|(x, y)| *x -= c * y);
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Eigenvalues in ascending order together with the matching eigenvectors
/// (columns).
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return distance(p, a);
    }
    let ap = sub(p, a);
    let t = (dot(&ap, &ab) / len2).clamp(0.0, 1.0);
    let closest = lerp(a, b, t);
    distance(p, &closest)
}

/// Distance from `p` to a polyline given by its vertices.
pub fn point_polyline_distance(p: &[f64], line: &[Vec<f64>]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => distance(p, &line[0]),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|p| point_polyline_distance(p, to))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
