use super::AnalyticsError;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    pub n: usize,
}

/// Least squares for `y ~ X` by Householder QR with column pivoting.
///
/// `rows` holds the design matrix row by row. A rank-deficient design is an
/// error rather than being regularized.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, AnalyticsError> {
    let n = rows.len();
    if n != y.len() {
        return Err(AnalyticsError::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    let p = rows.first().map_or(0, |r| r.len());
    if p == 0 || n < p {
        return Err(AnalyticsError::TooFewObservations {
            needed: p.max(1),
            have: n,
        });
    }
    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut qty = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let scale = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let tol = scale * f64::EPSILON * (n.max(p) as f64) * 16.0;

    for k in 0..p {
        let norm_below = |c: &Vec<f64>| c[k..].iter().map(|v| v * v).sum::<f64>();
        let pivot = (k..p)
            .max_by(|&i, &j| norm_below(&a[i]).total_cmp(&norm_below(&a[j])).then(j.cmp(&i)))
            .expect("non-empty range");
        a.swap(k, pivot);
        perm.swap(k, pivot);

        let norm = norm_below(&a[k]).sqrt();
        if norm <= tol {
            return Err(AnalyticsError::SingularDesign { rank: k, cols: p });
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vtv;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut qty[k..]);
        a[k][k] = alpha;
        for x in a[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
    }

    // back substitution on R z = (Q'y)[..p]
    let mut z = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[j][i] * z[j]).sum();
        z[i] = (qty[i] - s) / a[i][i];
    }
    let mut coef = vec![0.0; p];
    for (k, &orig) in perm.iter().enumerate() {
        coef[orig] = z[k];
    }
    let ssr = qty[p..].iter().map(|v| v * v).sum();
    Ok(OlsFit { coef, ssr, n })
}
