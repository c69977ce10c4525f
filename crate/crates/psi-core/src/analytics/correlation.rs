use serde::Serialize;

use super::{AnalyticsError, TimeSeries};

/// Product-moment correlation, computed from centered sums.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(AnalyticsError::TooFewObservations {
            needed: 2,
            have: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagEntry {
    pub lag: i64,
    pub r: f64,
    pub n_overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagCorrelationResult {
    /// Lags with enough overlap, ascending.
    pub per_lag: Vec<LagEntry>,
    pub best_lag: i64,
    pub best_r: f64,
}

impl LagCorrelationResult {
    pub fn at(&self, lag: i64) -> Option<&LagEntry> {
        self.per_lag.iter().find(|e| e.lag == lag)
    }
}

/// Correlations treated as equal when choosing the best lag.
const TIE_EPS: f64 = 1e-12;

/// `r(k) = pearson(a[t], b[t + k])` over months present in both; positive
/// `k` means `a` leads `b`. Lags with fewer than `min_overlap` pairs are
/// skipped. The best lag maximizes `r`; near-ties go to the smallest `|k|`,
/// then to the positive lag.
pub fn lagged_correlation(
    a: &TimeSeries,
    b: &TimeSeries,
    lag_min: i64,
    lag_max: i64,
    min_overlap: usize,
) -> Result<LagCorrelationResult, AnalyticsError> {
    if lag_min > lag_max {
        return Err(AnalyticsError::EmptyLagWindow { lag_min, lag_max });
    }
    let needed = min_overlap.max(2);
    let mut per_lag = Vec::new();
    for k in lag_min..=lag_max {
        let (xs, ys): (Vec<f64>, Vec<f64>) = a
            .points()
            .iter()
            .filter_map(|&(m, va)| b.get(m.offset(k)).map(|vb| (va, vb)))
            .unzip();
        if xs.len() < needed {
            continue;
        }
        let r = pearson(&xs, &ys)?;
        per_lag.push(LagEntry {
            lag: k,
            r,
            n_overlap: xs.len(),
        });
    }
    let mut order: Vec<&LagEntry> = per_lag.iter().collect();
    order.sort_by_key(|e| (e.lag.abs(), e.lag < 0));
    let best = order.iter().fold(None::<&LagEntry>, |best, e| match best {
        Some(b) if e.r <= b.r + TIE_EPS => Some(b),
        _ => Some(e),
    });
    let Some(best) = best else {
        return Err(AnalyticsError::NoSufficientOverlap {
            lag_min,
            lag_max,
            min_overlap,
        });
    };
    let (best_lag, best_r) = (best.lag, best.r);
    Ok(LagCorrelationResult {
        per_lag,
        best_lag,
        best_r,
    })
}
