//! Multivariate time-series chain-ladder: iterated GLS development
//! factors with cross-triangle covariance, completed triangles, reserves,
//! and recursive mean-squared-error-of-prediction (process + estimation,
//! including cross-accident-year estimation covariance).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::triangle::{Triangle, TriangleKind};

const MAX_GLS_ITER: usize = 100;
const GLS_TOL: f64 = 1e-12;
/// Cross-correlations in the one-step covariance are clamped to this.
const CORR_CLAMP: f64 = 0.99;
/// Number of final development transitions estimated univariately.
pub const DEFAULT_FALLBACK_TAIL: usize = 3;

/// Fitted multivariate chain-ladder model for N parallel triangles.
#[derive(Debug, Clone)]
pub struct MclFit {
    pub n_triangles: usize,
    pub n_dev: usize,
    /// Per transition t (col t -> t+1, 0-based): N development factors.
    pub dev_factors: Vec<Vec<f64>>,
    /// Per transition: N x N one-step conditional covariance scale.
    pub sigma: Vec<DMatrix<f64>>,
    /// Per transition: N x N estimation covariance of the factors.
    pub var_f: Vec<DMatrix<f64>>,
    /// Transitions estimated with the diagonal (univariate) fallback.
    pub fallback: Vec<bool>,
    /// Off-diagonal correlations clamped to +-0.99 in the final iterate.
    pub clamped_correlations: usize,
    pub gls_iterations: usize,
}

/// Reserve and prediction-error summary for one accident year.
#[derive(Debug, Clone, Serialize)]
pub struct YearRow {
    /// 1-based accident year index.
    pub year: usize,
    pub reserves: Vec<f64>,
    pub rmse: Vec<f64>,
    pub total_reserve: f64,
    pub total_rmse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReserveReport {
    pub labels: Vec<String>,
    pub per_year: Vec<YearRow>,
    pub triangle_reserves: Vec<f64>,
    pub triangle_rmse: Vec<f64>,
    pub total_reserve: f64,
    pub total_rmse: f64,
}

/// Jagged 0-based copy of a cumulative panel: `data[n][i][j]`.
struct Panel {
    data: Vec<Vec<Vec<f64>>>,
    rows: usize,
    cols: usize,
    /// Observed cells in accident row i (same for every triangle).
    row_len: Vec<usize>,
}

fn check_panel(cum: &[Triangle]) -> Result<Panel> {
    if cum.is_empty() {
        return Err(Error::data("empty triangle panel"));
    }
    let rows = cum[0].accident_periods();
    let cols = cum[0].dev_periods();
    for t in cum {
        if t.kind != TriangleKind::Cumulative {
            return Err(Error::parameter("chain-ladder input must be cumulative"));
        }
        if t.accident_periods() != rows || t.dev_periods() != cols {
            return Err(Error::data("triangles in a panel must share dimensions"));
        }
        for i in 1..=rows {
            for j in 1..=t.row_len(i) {
                if t.get(i, j) <= 0.0 {
                    return Err(Error::degenerate(format!(
                        "non-positive cumulative claim at ({i}, {j})"
                    )));
                }
            }
        }
    }
    let data = cum
        .iter()
        .map(|t| {
            (1..=rows)
                .map(|i| (1..=t.row_len(i)).map(|j| t.get(i, j)).collect())
                .collect()
        })
        .collect();
    Ok(Panel {
        data,
        rows,
        cols,
        row_len: (1..=rows).map(|i| cum[0].row_len(i)).collect(),
    })
}

/// Univariate (per-triangle) factor, sigma^2 and denominator sums for one
/// transition. A transition with a single observation takes the standard
/// tail extrapolation `min(s2_{t-1}^2 / s2_{t-2}, s2_{t-2}, s2_{t-1})`.
#[allow(clippy::type_complexity)]
fn univariate_stats(
    panel: &Panel,
    n_trans: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let nt = panel.data.len();
    let mut f = vec![vec![0.0; nt]; n_trans];
    let mut s2 = vec![vec![0.0; nt]; n_trans];
    let mut sums = vec![vec![0.0; nt]; n_trans];
    for (n, tri) in panel.data.iter().enumerate() {
        for t in 0..n_trans {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut obs = Vec::new();
            for (i, row) in tri.iter().enumerate() {
                if panel.row_len[i] > t + 1 {
                    num += row[t + 1];
                    den += row[t];
                    obs.push((row[t], row[t + 1]));
                }
            }
            if obs.is_empty() {
                return Err(Error::degenerate(format!(
                    "no observations for development transition {}",
                    t + 1
                )));
            }
            f[t][n] = num / den;
            sums[t][n] = den;
            if obs.len() >= 2 {
                let mut acc = 0.0;
                for (c, cn) in &obs {
                    acc += c * (cn / c - f[t][n]).powi(2);
                }
                s2[t][n] = acc / (obs.len() - 1) as f64;
            } else {
                if t < 2 {
                    return Err(Error::degenerate(
                        "too few transitions to extrapolate tail variance",
                    ));
                }
                let (a, b) = (s2[t - 2][n], s2[t - 1][n]);
                let ratio = if a > 0.0 { b * b / a } else { f64::INFINITY };
                s2[t][n] = ratio.min(a).min(b);
            }
        }
    }
    Ok((f, s2, sums))
}

fn clamp_correlations(sigma: &mut DMatrix<f64>) -> usize {
    let n = sigma.nrows();
    let mut clamped = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            let denom = (sigma[(a, a)] * sigma[(b, b)]).sqrt();
            if denom <= 0.0 {
                continue;
            }
            let rho = sigma[(a, b)] / denom;
            if rho.abs() > CORR_CLAMP {
                let v = rho.signum() * CORR_CLAMP * denom;
                sigma[(a, b)] = v;
                sigma[(b, a)] = v;
                clamped += 1;
            }
        }
    }
    clamped
}

/// Fit the model. `fallback_tail` final transitions (and any transition
/// with too few observations for a full covariance) use the univariate
/// diagonal estimate.
pub fn fit_mcl(cum: &[Triangle], fallback_tail: usize) -> Result<MclFit> {
    let panel = check_panel(cum)?;
    let nt = cum.len();
    if panel.cols < 2 {
        return Err(Error::data("need at least two development periods"));
    }
    let n_trans = panel.cols - 1;
    let (f_uni, s2_uni, sums_uni) = univariate_stats(&panel, n_trans)?;

    let mut dev_factors = Vec::with_capacity(n_trans);
    let mut sigma_all = Vec::with_capacity(n_trans);
    let mut var_f = Vec::with_capacity(n_trans);
    let mut fallback = vec![false; n_trans];
    let mut clamped_total = 0usize;
    let mut iterations = 0usize;

    for t in 0..n_trans {
        let uni_sigma = || {
            DMatrix::from_diagonal(&DVector::from_iterator(nt, s2_uni[t].iter().copied()))
        };
        let uni_var = || {
            DMatrix::from_diagonal(&DVector::from_iterator(
                nt,
                (0..nt).map(|n| s2_uni[t][n] / sums_uni[t][n]),
            ))
        };
        // Accident rows with both columns observed at this transition.
        let obs: Vec<usize> = (0..panel.rows)
            .filter(|&i| panel.row_len[i] > t + 1)
            .collect();
        let n_obs = obs.len();
        let tail_start = n_trans.saturating_sub(fallback_tail);
        if nt == 1 || t >= tail_start || n_obs < nt + 2 {
            fallback[t] = true;
            dev_factors.push(f_uni[t].clone());
            sigma_all.push(uni_sigma());
            var_f.push(uni_var());
            continue;
        }

        // Iterated GLS starting from the univariate diagonal covariance.
        let d_at =
            |i: usize| -> DVector<f64> { DVector::from_iterator(nt, (0..nt).map(|n| panel.data[n][i][t])) };
        let next_at = |i: usize| -> DVector<f64> {
            DVector::from_iterator(nt, (0..nt).map(|n| panel.data[n][i][t + 1]))
        };
        let mut sigma = uni_sigma();
        let mut f = DVector::from_iterator(nt, f_uni[t].iter().copied());
        let mut v = DMatrix::zeros(nt, nt);
        let mut clamped_here = 0usize;
        for iter in 0..MAX_GLS_ITER {
            iterations = iterations.max(iter + 1);
            let sigma_inv = sigma
                .clone()
                .cholesky()
                .ok_or_else(|| Error::degenerate("one-step covariance not positive definite"))?
                .inverse();
            let mut m = DMatrix::zeros(nt, nt);
            let mut b = DVector::zeros(nt);
            for &i in &obs {
                let d = d_at(i);
                let d_half = DMatrix::from_diagonal(&d.map(|x| x.sqrt()));
                let d_half_inv = DMatrix::from_diagonal(&d.map(|x| 1.0 / x.sqrt()));
                let w = &d_half * &sigma_inv;
                m += &w * &d_half;
                b += &w * &d_half_inv * next_at(i);
            }
            let m_chol = m
                .cholesky()
                .ok_or_else(|| Error::degenerate("GLS normal matrix is singular"))?;
            v = m_chol.inverse();
            let f_new = &v * b;

            // Re-estimate the covariance from standardized residuals.
            let mut s = DMatrix::zeros(nt, nt);
            for &i in &obs {
                let d = d_at(i);
                let d_half_inv = DMatrix::from_diagonal(&d.map(|x| 1.0 / x.sqrt()));
                let resid = next_at(i) - DMatrix::from_diagonal(&d) * &f_new;
                let z = &d_half_inv * resid;
                s += &z * z.transpose();
            }
            s /= (n_obs - 1) as f64;
            clamped_here = clamp_correlations(&mut s);

            let delta = (&f_new - &f).norm();
            let scale = f.norm().max(1.0);
            f = f_new;
            sigma = s;
            if delta < GLS_TOL * scale {
                break;
            }
        }
        if sigma.clone().cholesky().is_none() {
            // Clamping could not rescue the covariance; drop to diagonal.
            fallback[t] = true;
            dev_factors.push(f_uni[t].clone());
            sigma_all.push(uni_sigma());
            var_f.push(uni_var());
            continue;
        }
        clamped_total += clamped_here;
        dev_factors.push(f.iter().copied().collect());
        sigma_all.push(sigma);
        var_f.push(v);
    }

    Ok(MclFit {
        n_triangles: nt,
        n_dev: panel.cols,
        dev_factors,
        sigma: sigma_all,
        var_f,
        fallback,
        clamped_correlations: clamped_total,
        gls_iterations: iterations,
    })
}

/// Completed ultimates: observed values where present, chain-ladder
/// projections beyond the diagonal. `out[n][i][j]`, 0-based.
pub fn complete_triangles(cum: &[Triangle], fit: &MclFit) -> Result<Vec<Vec<Vec<f64>>>> {
    let panel = check_panel(cum)?;
    let nt = cum.len();
    let mut full = vec![vec![vec![0.0; panel.cols]; panel.rows]; nt];
    for i in 0..panel.rows {
        let last = panel.row_len[i] - 1;
        for j in 0..panel.cols {
            for n in 0..nt {
                full[n][i][j] = if j <= last {
                    panel.data[n][i][j]
                } else {
                    full[n][i][j - 1] * fit.dev_factors[j - 1][n]
                };
            }
        }
    }
    Ok(full)
}

fn diag_from(vals: impl Iterator<Item = f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(n, vals))
}

/// Reserves plus process and estimation prediction error via forward
/// recursions; cross-accident-year estimation covariance is included in
/// the column and grand totals.
pub fn predict_reserves(cum: &[Triangle], fit: &MclFit, labels: &[String]) -> Result<ReserveReport> {
    let panel = check_panel(cum)?;
    let (rows, cols) = (panel.rows, panel.cols);
    let nt = cum.len();
    if labels.len() != nt {
        return Err(Error::parameter("one label per triangle required"));
    }
    let full = complete_triangles(cum, fit)?;
    let last_obs: Vec<usize> = (0..rows).map(|i| panel.row_len[i] - 1).collect();

    // Per-year process (gamma) and estimation (lambda) covariance of the
    // ultimate vector.
    let mut gamma = vec![DMatrix::zeros(nt, nt); rows];
    let mut lambda = vec![DMatrix::zeros(nt, nt); rows];
    for i in 0..rows {
        for t in last_obs[i]..cols - 1 {
            let df = diag_from(fit.dev_factors[t].iter().copied(), nt);
            let c = diag_from((0..nt).map(|n| full[n][i][t]), nt);
            let c_half = diag_from((0..nt).map(|n| full[n][i][t].sqrt()), nt);
            gamma[i] = &df * &gamma[i] * &df + &c_half * &fit.sigma[t] * &c_half;
            lambda[i] = &df * &lambda[i] * &df + &c * &fit.var_f[t] * &c;
        }
    }
    // Cross-year estimation covariance: common factor estimates couple
    // the predictions from the later diagonal onward.
    let mut cross = vec![vec![DMatrix::zeros(nt, nt); rows]; rows];
    for a in 0..rows {
        for b in (a + 1)..rows {
            let start = last_obs[a].max(last_obs[b]);
            let mut lam = DMatrix::zeros(nt, nt);
            for t in start..cols - 1 {
                let df = diag_from(fit.dev_factors[t].iter().copied(), nt);
                let ca = diag_from((0..nt).map(|n| full[n][a][t]), nt);
                let cb = diag_from((0..nt).map(|n| full[n][b][t]), nt);
                lam = &df * lam * &df + &ca * &fit.var_f[t] * &cb;
            }
            cross[a][b] = lam;
        }
    }

    let ones = DVector::from_element(nt, 1.0);
    let mut per_year = Vec::with_capacity(rows);
    let mut triangle_reserves = vec![0.0; nt];
    let mut triangle_msep = vec![0.0; nt];
    let mut total_reserve = 0.0;
    let mut total_msep = 0.0;
    for i in 0..rows {
        let reserves: Vec<f64> = (0..nt)
            .map(|n| full[n][i][cols - 1] - full[n][i][last_obs[i]])
            .collect();
        let msep = &gamma[i] + &lambda[i];
        let rmse: Vec<f64> = (0..nt).map(|n| msep[(n, n)].max(0.0).sqrt()).collect();
        let year_total: f64 = reserves.iter().sum();
        let year_msep = (ones.transpose() * &msep * &ones)[(0, 0)];
        for n in 0..nt {
            triangle_reserves[n] += reserves[n];
            triangle_msep[n] += msep[(n, n)];
        }
        total_reserve += year_total;
        total_msep += year_msep;
        per_year.push(YearRow {
            year: i + 1,
            reserves,
            rmse,
            total_reserve: year_total,
            total_rmse: year_msep.max(0.0).sqrt(),
        });
    }
    for a in 0..rows {
        for b in (a + 1)..rows {
            let lam = &cross[a][b];
            for n in 0..nt {
                triangle_msep[n] += 2.0 * lam[(n, n)];
            }
            total_msep += 2.0 * (ones.transpose() * lam * &ones)[(0, 0)];
        }
    }

    Ok(ReserveReport {
        labels: labels.to_vec(),
        per_year,
        triangle_reserves,
        triangle_rmse: triangle_msep.iter().map(|m| m.max(0.0).sqrt()).collect(),
        total_reserve,
        total_rmse: total_msep.max(0.0).sqrt(),
    })
}

/// Relative change (other vs base) of total reserve and total RMSE, in
/// percent.
pub fn compare_reports(base: &ReserveReport, other: &ReserveReport) -> (f64, f64) {
    let dr = 100.0 * (other.total_reserve - base.total_reserve) / base.total_reserve;
    let de = 100.0 * (other.total_rmse - base.total_rmse) / base.total_rmse;
    (dr, de)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangle::load_triangle_csv;
    use approx::assert_relative_eq;
    use std::path::Path;

    fn personal_cumulative() -> Triangle {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bivariate_personal.csv");
        load_triangle_csv(&p, TriangleKind::Incremental)
            .unwrap()
            .to_cumulative()
            .unwrap()
    }

    fn commercial_cumulative() -> Triangle {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/bivariate_commercial.csv");
        load_triangle_csv(&p, TriangleKind::Incremental)
            .unwrap()
            .to_cumulative()
            .unwrap()
    }

    /// Independent distribution-free oracle: closed-form per-year and
    /// aggregate prediction error for a single triangle. 1-based triangle
    /// accessors are used directly so the index conventions differ from
    /// the production code.
    struct MackOracle {
        f: Vec<f64>,
        s2: Vec<f64>,
        sums: Vec<f64>,
        full: Vec<Vec<f64>>,
    }

    fn mack_oracle(tri: &Triangle) -> MackOracle {
        let rows = tri.accident_periods();
        let cols = tri.dev_periods();
        let mut f = vec![0.0; cols - 1];
        let mut s2 = vec![0.0; cols - 1];
        let mut sums = vec![0.0; cols - 1];
        for t in 0..cols - 1 {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut cells = Vec::new();
            for i in 1..=rows {
                if tri.observed(i, t + 2) {
                    num += tri.get(i, t + 2);
                    den += tri.get(i, t + 1);
                    cells.push((tri.get(i, t + 1), tri.get(i, t + 2)));
                }
            }
            f[t] = num / den;
            sums[t] = den;
            if cells.len() >= 2 {
                s2[t] = cells
                    .iter()
                    .map(|(c, cn)| c * (cn / c - f[t]).powi(2))
                    .sum::<f64>()
                    / (cells.len() - 1) as f64;
            } else {
                let (a, b) = (s2[t - 2], s2[t - 1]);
                let ratio = if a > 0.0 { b * b / a } else { f64::INFINITY };
                s2[t] = ratio.min(a).min(b);
            }
        }
        let mut full = vec![vec![0.0; cols]; rows];
        for i in 1..=rows {
            let last = tri.row_len(i);
            for j in 1..=cols {
                full[i - 1][j - 1] = if j <= last {
                    tri.get(i, j)
                } else {
                    full[i - 1][j - 2] * f[j - 2]
                };
            }
        }
        MackOracle { f, s2, sums, full }
    }

    /// `last` is the 0-based index of the final observed column.
    fn mack_year_msep(o: &MackOracle, i: usize, last: usize, cols: usize) -> f64 {
        let ult = o.full[i][cols - 1];
        let mut acc = 0.0;
        for t in last..cols - 1 {
            acc += o.s2[t] / o.f[t].powi(2) * (1.0 / o.full[i][t] + 1.0 / o.sums[t]);
        }
        ult * ult * acc
    }

    fn mack_cross_msep(o: &MackOracle, a: usize, b: usize, last: usize, cols: usize) -> f64 {
        let mut acc = 0.0;
        for t in last..cols - 1 {
            acc += o.s2[t] / o.f[t].powi(2) / o.sums[t];
        }
        o.full[a][cols - 1] * o.full[b][cols - 1] * acc
    }

    #[test]
    fn single_triangle_factors_match_classical() {
        let tri = personal_cumulative();
        let fit = fit_mcl(std::slice::from_ref(&tri), DEFAULT_FALLBACK_TAIL).unwrap();
        let o = mack_oracle(&tri);
        for t in 0..tri.dev_periods() - 1 {
            assert_relative_eq!(fit.dev_factors[t][0], o.f[t], max_relative = 1e-12);
            assert_relative_eq!(fit.sigma[t][(0, 0)], o.s2[t], max_relative = 1e-12);
        }
    }

    #[test]
    fn single_triangle_msep_matches_closed_form() {
        for tri in [personal_cumulative(), commercial_cumulative()] {
            let cols = tri.dev_periods();
            let fit = fit_mcl(std::slice::from_ref(&tri), DEFAULT_FALLBACK_TAIL).unwrap();
            let report =
                predict_reserves(std::slice::from_ref(&tri), &fit, &["t".to_string()]).unwrap();
            let o = mack_oracle(&tri);
            let mut total = 0.0;
            for i in 0..tri.accident_periods() {
                let last = tri.row_len(i + 1) - 1;
                let msep = mack_year_msep(&o, i, last, cols);
                assert_relative_eq!(
                    report.per_year[i].total_rmse,
                    msep.sqrt(),
                    max_relative = 1e-9,
                    epsilon = 1e-9
                );
                total += msep;
            }
            for a in 0..tri.accident_periods() {
                for b in (a + 1)..tri.accident_periods() {
                    let last = tri.row_len(a + 1).max(tri.row_len(b + 1)) - 1;
                    total += 2.0 * mack_cross_msep(&o, a, b, last, cols);
                }
            }
            assert_relative_eq!(report.total_rmse, total.sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn noise_free_panel_has_zero_error() {
        // Exact multiplicative development: factors recovered, RMSE ~ 0.
        let factors = [2.0, 1.5, 1.2, 1.1];
        let rows = 5;
        let mut data = Vec::new();
        for i in 0..rows {
            let len = rows - i;
            let mut row = vec![100.0 * (1.0 + i as f64)];
            for t in 0..len - 1 {
                let prev = *row.last().unwrap();
                row.push(prev * factors[t]);
            }
            data.push(row);
        }
        let tri = Triangle::from_rows(data, 5, TriangleKind::Cumulative, "synthetic").unwrap();
        let fit = fit_mcl(std::slice::from_ref(&tri), DEFAULT_FALLBACK_TAIL).unwrap();
        for t in 0..4 {
            assert_relative_eq!(fit.dev_factors[t][0], factors[t], max_relative = 1e-12);
        }
        let report =
            predict_reserves(std::slice::from_ref(&tri), &fit, &["t".to_string()]).unwrap();
        assert!(report.total_rmse < 1e-6 * report.total_reserve);
        // Reserve for row i equals ultimate minus diagonal, all positive.
        for row in &report.per_year[1..] {
            assert!(row.total_reserve > 0.0);
        }
    }

    #[test]
    fn duplicated_triangle_clamps_correlation() {
        let tri = personal_cumulative();
        let pair = vec![tri.clone(), tri.clone()];
        let fit = fit_mcl(&pair, DEFAULT_FALLBACK_TAIL).unwrap();
        assert!(fit.clamped_correlations > 0);
        // Identical inputs give identical factors in both coordinates.
        for t in 0..tri.dev_periods() - 1 {
            assert_relative_eq!(
                fit.dev_factors[t][0],
                fit.dev_factors[t][1],
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn bivariate_fit_is_finite_and_reserves_positive() {
        let pair = vec![personal_cumulative(), commercial_cumulative()];
        let fit = fit_mcl(&pair, DEFAULT_FALLBACK_TAIL).unwrap();
        let n_trans = pair[0].dev_periods() - 1;
        // The last three transitions use the univariate fallback; the
        // others carry enough accident years for the full covariance.
        for t in 0..n_trans {
            assert_eq!(fit.fallback[t], t >= n_trans - DEFAULT_FALLBACK_TAIL);
        }
        let labels = vec!["personal".to_string(), "commercial".to_string()];
        let report = predict_reserves(&pair, &fit, &labels).unwrap();
        assert!(report.total_reserve.is_finite() && report.total_reserve > 0.0);
        assert!(report.total_rmse.is_finite() && report.total_rmse > 0.0);
        assert_relative_eq!(
            report.total_reserve,
            report.triangle_reserves.iter().sum::<f64>(),
            max_relative = 1e-12
        );
        // Triangle-level MSEPs exclude cross-triangle covariance, so they
        // need not sum to the grand total; both stay positive.
        for n in 0..2 {
            assert!(report.triangle_rmse[n] > 0.0);
        }
    }

    #[test]
    fn compare_reports_percentages() {
        let tri = personal_cumulative();
        let fit = fit_mcl(std::slice::from_ref(&tri), DEFAULT_FALLBACK_TAIL).unwrap();
        let r = predict_reserves(std::slice::from_ref(&tri), &fit, &["t".to_string()]).unwrap();
        let (dr, de) = compare_reports(&r, &r);
        assert_relative_eq!(dr, 0.0);
        assert_relative_eq!(de, 0.0);
    }

    #[test]
    fn non_positive_cumulative_rejected() {
        let data = vec![vec![0.0, 10.0, 30.0], vec![5.0, 8.0], vec![4.0]];
        let tri = Triangle::from_rows(data, 3, TriangleKind::Cumulative, "synthetic").unwrap();
        assert!(fit_mcl(std::slice::from_ref(&tri), DEFAULT_FALLBACK_TAIL).is_err());
    }
}
