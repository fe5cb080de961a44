//! Correlations, correlation-difference tests, min-max scaling and
//! single-feature least squares with a seeded hold-out split.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlations at or beyond this magnitude are rejected by the Fisher tests.
pub const MAX_ABS_CORRELATION: f64 = 0.999999;

/// Fewest observations the significance tests accept.
pub const MIN_OBSERVATIONS: usize = 4;

fn check_pair(x: &[f64], y: &[f64], needed: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < needed {
        return Err(Error::TooFewObservations { needed, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in sample".into()));
    }
    Ok(())
}

/// Product-moment correlation, accumulated in one pass (Welford).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    pearson(&midranks(x), &midranks(y))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-tailed p-value of a standard normal statistic.
pub fn two_tailed_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

fn fisher_z(r: f64) -> Result<f64> {
    if !r.is_finite() || r.abs() >= MAX_ABS_CORRELATION {
        return Err(Error::CorrelationOutOfRange(r));
    }
    Ok(r.atanh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignificanceTest {
    IndependentFisher,
    DependentOverlapping,
}

impl SignificanceTest {
    pub fn name(self) -> &'static str {
        match self {
            SignificanceTest::IndependentFisher => "independent-fisher",
            SignificanceTest::DependentOverlapping => "dependent-overlapping",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub test: SignificanceTest,
    pub statistic: f64,
    pub p_value: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r12: Option<f64>,
    pub n_obs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
}

/// Compare r1 = corr(x1, y) and r2 = corr(x2, y) measured on the same n
/// observations, where r12 = corr(x1, x2). Steiger's z with the pooled
/// correlation back-transformed from the mean Fisher z.
pub fn compare_dependent_correlations(r1: f64, r2: f64, r12: f64, n_obs: usize) -> Result<SignificanceResult> {
    if n_obs < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_OBSERVATIONS,
            got: n_obs,
        });
    }
    let z1 = fisher_z(r1)?;
    let z2 = fisher_z(r2)?;
    fisher_z(r12)?;
    let statistic = if z1 == z2 {
        0.0
    } else {
        let rbar = ((z1 + z2) / 2.0).tanh();
        let rb2 = rbar * rbar;
        let psi = r12 * (1.0 - 2.0 * rb2) - 0.5 * rb2 * (1.0 - 2.0 * rb2 - r12 * r12);
        let c = psi / ((1.0 - rb2) * (1.0 - rb2));
        let denom = 2.0 - 2.0 * c;
        if denom <= 0.0 {
            return Err(Error::Invariant(format!(
                "non-positive variance in dependent correlation test (r12 = {r12})"
            )));
        }
        (z1 - z2) * ((n_obs - 3) as f64).sqrt() / denom.sqrt()
    };
    Ok(SignificanceResult {
        test: SignificanceTest::DependentOverlapping,
        statistic,
        p_value: two_tailed_p(statistic),
        r1,
        r2,
        r12: Some(r12),
        n_obs,
        n2: None,
    })
}

/// Compare correlations from two independent samples.
pub fn compare_independent_correlations(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<SignificanceResult> {
    let n_min = n1.min(n2);
    if n_min < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_OBSERVATIONS,
            got: n_min,
        });
    }
    let z1 = fisher_z(r1)?;
    let z2 = fisher_z(r2)?;
    let se = (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    let statistic = (z1 - z2) / se;
    Ok(SignificanceResult {
        test: SignificanceTest::IndependentFisher,
        statistic,
        p_value: two_tailed_p(statistic),
        r1,
        r2,
        r12: None,
        n_obs: n1,
        n2: Some(n2),
    })
}

/// Affine map of [min, max] onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(v: &[f64]) -> Result<MinMax> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value in vector".into()));
        }
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::ZeroVariance("min-max input"));
        }
        Ok(MinMax { min, max })
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, s: f64) -> f64 {
        self.min + s * (self.max - self.min)
    }
}

pub fn minmax_scale(v: &[f64]) -> Result<Vec<f64>> {
    let m = MinMax::fit(v)?;
    Ok(v.iter().map(|&x| m.transform(x)).collect())
}

/// Closed-form least squares y = slope * x + intercept.
pub fn fit_ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("feature on training split"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Indices of a seeded train/test partition of `0..n`.
///
/// The permutation is a Fisher-Yates shuffle driven by ChaCha8 seeded with
/// `seed`, drawing `next_u64() % (i + 1)` for i = n-1 down to 1. The first
/// ceil((1 - train_fraction) * n) shuffled indices form the test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl HoldoutSplit {
    pub fn new(n: usize, train_fraction: f64, seed: u64) -> Result<HoldoutSplit> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("train fraction {train_fraction} outside (0, 1)")));
        }
        let n_test = (((1.0 - train_fraction) * n as f64) - 1e-9).ceil().max(1.0) as usize;
        if n < 3 || n_test + 2 > n {
            return Err(Error::EmptyPartition(format!(
                "{n} observations cannot form a {train_fraction} train split"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let train = order.split_off(n_test);
        Ok(HoldoutSplit {
            train,
            test: order,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// On the test split.
    pub mse: f64,
    /// 1 - Var(residual) / Var(y), test split, population variances.
    pub explained_variance: f64,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Fit on the train part of `split`, evaluate on its test part.
pub fn linreg_split(x: &[f64], y: &[f64], split: &HoldoutSplit) -> Result<RegressionResult> {
    check_pair(x, y, 2)?;
    let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let (slope, intercept) = fit_ols(&pick(x, &split.train), &pick(y, &split.train))?;
    let x_test = pick(x, &split.test);
    let y_test = pick(y, &split.test);
    let resid: Vec<f64> = x_test
        .iter()
        .zip(&y_test)
        .map(|(&a, &b)| b - (slope * a + intercept))
        .collect();
    let mse = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    let var_y = population_variance(&y_test);
    if var_y <= 0.0 {
        return Err(Error::ZeroVariance("signal on test split"));
    }
    Ok(RegressionResult {
        slope,
        intercept,
        mse,
        explained_variance: 1.0 - population_variance(&resid) / var_y,
        split_seed: split.seed,
        n_train: split.train.len(),
        n_test: split.test.len(),
    })
}

/// Random train/test split, then least squares on one feature.
pub fn linreg_holdout(x: &[f64], y: &[f64], train_fraction: f64, seed: u64) -> Result<RegressionResult> {
    check_pair(x, y, 10)?;
    linreg_split(x, y, &HoldoutSplit::new(x.len(), train_fraction, seed)?)
}
