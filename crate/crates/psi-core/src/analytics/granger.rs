use serde::Serialize;

use super::{f_sf, ols, AnalyticsError, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrangerResult {
    pub cause: String,
    pub effect: String,
    pub lag: usize,
    pub f_value: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub df_num: usize,
    pub df_den: usize,
    pub ssr_restricted: f64,
    pub ssr_unrestricted: f64,
}

/// Regression rows for lag order `lag`: each month `t` where the effect at
/// `t`, `t-1..t-lag` and the cause at `t-1..t-lag` all exist. Returns
/// `(unrestricted rows, restricted rows, targets)`.
pub(crate) fn granger_design(
    cause: &TimeSeries,
    effect: &TimeSeries,
    lag: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let mut full = Vec::new();
    let mut restricted = Vec::new();
    let mut target = Vec::new();
    'months: for &(t, y) in effect.points() {
        let mut row = vec![1.0];
        for k in 1..=lag {
            match effect.get(t.offset(-(k as i64))) {
                Some(v) => row.push(v),
                None => continue 'months,
            }
        }
        let own = row.clone();
        for k in 1..=lag {
            match cause.get(t.offset(-(k as i64))) {
                Some(v) => row.push(v),
                None => continue 'months,
            }
        }
        full.push(row);
        restricted.push(own);
        target.push(y);
    }
    (full, restricted, target)
}

/// Tests "`cause` does not Granger-cause `effect`" at a fixed lag order.
///
/// Compares `effect_t ~ 1 + effect_{t-1..t-L} + cause_{t-1..t-L}` with the
/// same regression minus the cause lags:
/// `F = ((SSR_r - SSR_u) / L) / (SSR_u / (n - 2L - 1))`.
/// A tiny negative numerator from rounding is reported as `F = 0`.
pub fn granger_test(cause: &TimeSeries, effect: &TimeSeries, max_lag: usize) -> Result<GrangerResult, AnalyticsError> {
    if max_lag == 0 {
        return Err(AnalyticsError::TooFewObservations { needed: 1, have: 0 });
    }
    let (full, restricted, y) = granger_design(cause, effect, max_lag);
    let n = y.len();
    let needed = 2 * max_lag + 2;
    if n < needed {
        return Err(AnalyticsError::TooFewObservations { needed, have: n });
    }
    let unrestricted_fit = ols(&full, &y)?;
    let restricted_fit = ols(&restricted, &y)?;
    let df_num = max_lag;
    let df_den = n - 2 * max_lag - 1;
    let (ssr_u, ssr_r) = (unrestricted_fit.ssr, restricted_fit.ssr);
    let f_value = if ssr_u == 0.0 {
        if ssr_r > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (((ssr_r - ssr_u) / df_num as f64) / (ssr_u / df_den as f64)).max(0.0)
    };
    Ok(GrangerResult {
        cause: cause.name().to_string(),
        effect: effect.name().to_string(),
        lag: max_lag,
        f_value,
        p_value: f_sf(f_value, df_num as f64, df_den as f64),
        n_effective: n,
        df_num,
        df_den,
        ssr_restricted: ssr_r,
        ssr_unrestricted: ssr_u,
    })
}
