use nalgebra::DMatrix;

use crate::{Error, Result};

/// Project onto the first two principal components, for plotting only.
/// PCA needs no randomness; `_seed` keeps the call shape uniform with the
/// other analysis steps. Component signs are fixed so the largest-magnitude
/// loading is positive, which makes the output reproducible.
pub fn project_2d(vectors: &[Vec<f64>], _seed: u64) -> Result<Vec<(f64, f64)>> {
    if vectors.len() < 2 {
        return Err(Error::InsufficientData(format!("projection needs at least 2 vectors, got {}", vectors.len())));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Validation("vectors differ in dimension".into()));
    }
    let n = vectors.len();
    let mean: Vec<f64> = (0..d).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);
    let cov = x.transpose() * &x;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |k: usize| -> Vec<f64> {
        let Some(&c) = order.get(k) else { return vec![0.0; d] };
        let col: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let pivot = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        col.into_iter().map(|v| v * sign).collect()
    };
    let (a, b) = (axis(0), axis(1));
    Ok((0..n)
        .map(|i| {
            let row = x.row(i);
            let p = row.iter().zip(&a).map(|(r, w)| r * w).sum();
            let q = row.iter().zip(&b).map(|(r, w)| r * w).sum();
            (p, q)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contracts() {
        let v = vec![vec![1.0, 2.0, 3.0]; 2];
        let p = project_2d(&v, 0).unwrap();
        assert_eq!(p[0], p[1]);
        let w: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64, 1.0]).collect();
        let a = project_2d(&w, 3).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a, project_2d(&w, 3).unwrap());
        assert!(project_2d(&w[..1], 0).is_err());
    }

    #[test]
    fn preserves_spread_along_a_line() {
        let w: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = project_2d(&w, 0).unwrap();
        let step = 5f64.sqrt();
        for (i, (x, y)) in p.iter().enumerate() {
            assert!((x - (i as f64 - 2.0) * step).abs() < 1e-9);
            assert!(y.abs() < 1e-9);
        }
    }
}
