//! Summary statistics and two-sample t-tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BETA_CF_MAX_ITER: usize = 300;
const BETA_CF_TOLERANCE: f64 = 1e-15;
const BETA_CF_TINY: f64 = 1e-300;

/// Mean, sample standard deviation (divisor `n - 1`, 0 when `n = 1`) and
/// count, printed as `mean ± std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::argument("cannot summarize an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("cannot summarize non-finite values"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (sum_sq_dev(values, mean) / (n - 1) as f64).sqrt()
    };
    Ok(MetricSummary { mean, std, n })
}

fn sum_sq_dev(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `na + nb - 2` degrees of freedom.
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    #[serde(with = "crate::serde_f64")]
    pub t: f64,
    pub df: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub significant: bool,
}

/// Welch's unequal-variance two-tailed t-test.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    t_test(a, b, alpha, TTestKind::Welch)
}

pub fn t_test(a: &[f64], b: &[f64], alpha: f64, kind: TTestKind) -> Result<TTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::argument(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples {
                required: 2,
                actual: s.len(),
            });
        }
    }
    let (sa, sb) = (summarize(a)?, summarize(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa.std * sa.std, sb.std * sb.std);
    let diff = sa.mean - sb.mean;

    let (se2, df) = match kind {
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (se2, df)
        }
        TTestKind::Student => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (pooled * (1.0 / na + 1.0 / nb), df)
        }
    };

    // Both samples constant: the statistic is 0 for equal means and
    // unbounded otherwise.
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            TTestResult {
                t: 0.0,
                df,
                p: 1.0,
                significant: false,
            }
        } else {
            TTestResult {
                t: diff.signum() * f64::INFINITY,
                df,
                p: 0.0,
                significant: true,
            }
        });
    }

    let t = diff / se2.sqrt();
    let p = student_t_two_tailed_p(t, df)?;
    Ok(TTestResult {
        t,
        df,
        p,
        significant: p < alpha,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom, via
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::argument(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    if t.is_nan() {
        return Err(Error::Numerical("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(regularized_incomplete_beta(x, df / 2.0, 0.5)?.clamp(0.0, 1.0))
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`, evaluated with a continued
/// fraction (modified Lentz) on whichever side of the mean converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::argument(format!(
            "incomplete beta needs a, b > 0, got a={a} b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::argument(format!(
            "incomplete beta needs x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(1.0 - x, b, a)? / b)
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    let tiny = |v: f64| {
        if v.abs() < BETA_CF_TINY {
            BETA_CF_TINY
        } else {
            v
        }
    };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / tiny(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / tiny(1.0 + aa * d);
        c = tiny(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / tiny(1.0 + aa * d);
        c = tiny(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge in {BETA_CF_MAX_ITER} iterations \
         (x={x}, a={a}, b={b})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (2.0, 1.0, 3));
        let s = summarize(&[5.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (5.0, 0.0, 1));
        let s = summarize(&[0.3; 4]).unwrap();
        assert_eq!((s.mean, s.std), (0.3, 0.0));
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[f64::NAN]).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-13);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1 - x)^b
        for &x in &[0.1, 0.37, 0.5, 0.93] {
            assert!((regularized_incomplete_beta(x, 1.0, 1.0).unwrap() - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(x, 3.0, 1.0).unwrap() - x.powi(3)).abs() < 1e-14);
            let v = regularized_incomplete_beta(x, 1.0, 4.0).unwrap();
            assert!((v - (1.0 - (1.0 - x).powi(4))).abs() < 1e-14);
        }
    }

    #[test]
    fn incomplete_beta_domain() {
        assert!(regularized_incomplete_beta(1.5, 1.0, 1.0).is_err());
        assert!(regularized_incomplete_beta(0.5, 0.0, 1.0).is_err());
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 4.0, 2.5, 7.0];
        let r = welch_t_test(&a, &a, 0.05).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn constant_samples() {
        let r = welch_t_test(&[2.0; 3], &[2.0; 5], 0.05).unwrap();
        assert_eq!((r.t, r.p, r.significant), (0.0, 1.0, false));
        let r = welch_t_test(&[0.0; 3], &[1.0; 3], 0.05).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.t.is_infinite() && r.t < 0.0);
        assert!(r.significant);
    }

    #[test]
    fn needs_two_samples_each() {
        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0], 0.05),
            Err(Error::InsufficientSamples {
                required: 2,
                actual: 1
            })
        ));
        assert!(welch_t_test(&[1.0, 2.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn pooled_variant_uses_integer_df() {
        let r = t_test(
            &[1.0, 2.0, 3.0],
            &[2.0, 4.0, 6.0, 8.0],
            0.05,
            TTestKind::Student,
        )
        .unwrap();
        assert_eq!(r.df, 5.0);
        // Pooled variance (2*1 + 3*20/3) / 5 = 4.4; se = sqrt(4.4 * 7/12).
        let expected_t = (2.0 - 5.0) / (4.4f64 * (1.0 / 3.0 + 1.0 / 4.0)).sqrt();
        assert!((r.t - expected_t).abs() < 1e-12);
    }
}
