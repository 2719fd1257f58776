//! Binomial-logit regression fit by Newton iterations, and model selection
//! over the pedestrian feature columns: subsets with correlated members are
//! screened out, the rest are fit and ranked by AIC.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

const MAX_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
const SCORE_TOL: f64 = 1e-8;
/// A coefficient this large means the optimum is at infinity (separated data).
const SEPARATION_BOUND: f64 = 1e4;

/// A fitted logit model. Coefficient 0 is the intercept; the rest follow the
/// predictor columns in order.
#[derive(Debug, Clone, Serialize)]
pub struct LogitFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    /// Log-likelihood at the start and after each accepted Newton step.
    pub ll_trace: Vec<f64>,
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn log_likelihood(etas: &[f64], y: &[f64]) -> f64 {
    etas.iter().zip(y).map(|(&eta, &yi)| yi * eta - softplus(eta)).sum()
}

/// Two-sided tail probability of a standard normal at `|z|`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Fit `logit P(y=1) = b0 + sum_j b_j x_j` by Newton's method with step
/// halving. `columns` are the predictor columns (no intercept column — one
/// is added internally); `y` must be 0/1 with both classes present.
///
/// Convergence is a score (gradient) below 1e-8 in every coordinate.
/// Diverging coefficients report a separation error; a singular information
/// matrix reports rank deficiency.
pub fn fit_logit(columns: &[Vec<f64>], y: &[f64]) -> Result<LogitFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Invalid("logit fit needs observations".into()));
    }
    for col in columns {
        if col.len() != n {
            return Err(Error::Invalid(format!(
                "predictor column has {} rows, response has {n}",
                col.len()
            )));
        }
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Invalid("response values must be 0 or 1".into()));
    }
    if y.iter().all(|&v| v == 0.0) || y.iter().all(|&v| v == 1.0) {
        return Err(Error::Invalid(
            "response must contain both classes to fit a logit model".into(),
        ));
    }

    let p = columns.len() + 1;
    let x_of = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            columns[j - 1][i]
        }
    };

    let mut beta = vec![0.0; p];
    let mut etas = vec![0.0; n];
    let mut ll = log_likelihood(&etas, y);
    let mut trace = vec![ll];
    let mut converged_at = None;

    for iter in 0..MAX_ITERS {
        // Score and information at the current estimate.
        let mus: Vec<f64> = etas.iter().map(|&e| sigmoid(e)).collect();
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        for i in 0..n {
            let r = y[i] - mus[i];
            let w = mus[i] * (1.0 - mus[i]);
            for j in 0..p {
                let xj = x_of(i, j);
                score[j] += xj * r;
                for k in 0..=j {
                    info[j * p + k] += w * xj * x_of(i, k);
                }
            }
        }
        for j in 0..p {
            for k in j + 1..p {
                info[j * p + k] = info[k * p + j];
            }
        }

        if score.iter().all(|g| g.abs() < SCORE_TOL) {
            converged_at = Some(iter);
            break;
        }

        let delta = linalg::solve_spd(&info, &score, p).ok_or_else(|| {
            Error::RankDeficient("observed information matrix is singular".into())
        })?;

        // Step halving: shrink the Newton step until the likelihood does not
        // degrade (tolerating rounding noise near the optimum).
        let accept_tol = 1e-10 * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> =
                beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let new_etas: Vec<f64> = (0..n)
                .map(|i| (0..p).map(|j| candidate[j] * x_of(i, j)).sum())
                .collect();
            let new_ll = log_likelihood(&new_etas, y);
            if new_ll.is_finite() && new_ll >= ll - accept_tol {
                beta = candidate;
                etas = new_etas;
                ll = new_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::Numeric(
                "step halving could not improve the log-likelihood".into(),
            ));
        }
        trace.push(ll);

        if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(format!(
                "a coefficient magnitude exceeded {SEPARATION_BOUND:e}; \
                 the classes are perfectly separable on these columns"
            )));
        }
    }

    let iterations = converged_at
        .ok_or_else(|| Error::Numeric(format!("logit fit did not converge in {MAX_ITERS} iterations")))?;

    // Standard errors from the inverse information at the optimum.
    let mus: Vec<f64> = etas.iter().map(|&e| sigmoid(e)).collect();
    let mut info = vec![0.0; p * p];
    for i in 0..n {
        let w = mus[i] * (1.0 - mus[i]);
        for j in 0..p {
            for k in 0..=j {
                info[j * p + k] += w * x_of(i, j) * x_of(i, k);
            }
        }
    }
    for j in 0..p {
        for k in j + 1..p {
            info[j * p + k] = info[k * p + j];
        }
    }
    let cov = linalg::invert_spd(&info, p).ok_or_else(|| {
        Error::RankDeficient("information matrix at the optimum is singular".into())
    })?;
    let std_errors: Vec<f64> = (0..p).map(|j| cov[j * p + j].sqrt()).collect();
    let z_values: Vec<f64> = beta.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let p_values: Vec<f64> = z_values.iter().map(|&z| normal_two_sided_p(z)).collect();
    let aic = 2.0 * p as f64 - 2.0 * ll;

    Ok(LogitFit {
        coefficients: beta,
        std_errors,
        z_values,
        p_values,
        log_likelihood: ll,
        aic,
        iterations,
        ll_trace: trace,
    })
}

/// Pearson correlation; zero when either input has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubsetOutcome {
    /// A pair inside the subset was too correlated to fit together.
    ScreenedOut,
    Failed { reason: String },
    Fitted { aic: f64, log_likelihood: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetReport {
    pub indices: Vec<usize>,
    pub outcome: SubsetOutcome,
}

/// The winning model: which candidate columns it uses (by index and name),
/// the means subtracted before fitting, and the fit itself.
#[derive(Debug, Clone, Serialize)]
pub struct FittedModel {
    pub feature_indices: Vec<usize>,
    pub feature_names: Vec<String>,
    pub centered_means: Vec<f64>,
    pub fit: LogitFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub best: FittedModel,
    /// Pairwise correlations between all candidate columns.
    pub correlation: Vec<Vec<f64>>,
    pub subsets: Vec<SubsetReport>,
}

/// Center the candidate columns, try every non-empty subset whose members
/// are pairwise correlated below `r_threshold` in absolute value, and keep
/// the fit with the lowest AIC. Ties prefer fewer columns, then the
/// lexicographically earliest index set. Subsets that fail to fit are
/// recorded and skipped; an error is returned only when nothing fits.
pub fn select_model(
    columns: &[Vec<f64>],
    names: &[&str],
    y: &[f64],
    r_threshold: f64,
) -> Result<Selection> {
    let m = columns.len();
    if m == 0 || m != names.len() {
        return Err(Error::Invalid("model selection needs named candidate columns".into()));
    }
    let correlation: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { pearson(&columns[i], &columns[j]) }).collect())
        .collect();
    let (centered, means) = crate::featmat::center_columns(columns);

    let mut subsets = Vec::with_capacity((1usize << m) - 1);
    let mut best: Option<(f64, Vec<usize>, LogitFit)> = None;
    for mask in 1u32..(1 << m) {
        let indices: Vec<usize> = (0..m).filter(|&j| mask & (1 << j) != 0).collect();
        let screened = indices.iter().enumerate().any(|(a, &i)| {
            indices[a + 1..].iter().any(|&j| correlation[i][j].abs() >= r_threshold)
        });
        if screened {
            subsets.push(SubsetReport { indices, outcome: SubsetOutcome::ScreenedOut });
            continue;
        }
        let cols: Vec<Vec<f64>> = indices.iter().map(|&j| centered[j].clone()).collect();
        match fit_logit(&cols, y) {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some((aic, idx, _)) => match fit.aic.total_cmp(aic) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Greater => false,
                        std::cmp::Ordering::Equal => {
                            (indices.len(), &indices) < (idx.len(), idx)
                        }
                    },
                };
                subsets.push(SubsetReport {
                    indices: indices.clone(),
                    outcome: SubsetOutcome::Fitted {
                        aic: fit.aic,
                        log_likelihood: fit.log_likelihood,
                    },
                });
                if better {
                    best = Some((fit.aic, indices, fit));
                }
            }
            Err(e) => subsets.push(SubsetReport {
                indices,
                outcome: SubsetOutcome::Failed { reason: e.to_string() },
            }),
        }
    }

    let (_, indices, fit) = best.ok_or_else(|| {
        Error::Invalid("no candidate subset produced a valid fit".into())
    })?;
    let best = FittedModel {
        feature_names: indices.iter().map(|&j| names[j].to_string()).collect(),
        centered_means: indices.iter().map(|&j| means[j]).collect(),
        feature_indices: indices,
        fit,
    };
    Ok(Selection { best, correlation, subsets })
}
