use alloc::format;

use crate::error::{Error, Result};

/// One-way ANOVA between two groups.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionComparison {
    pub f: f64,
    pub p: f64,
    pub df_between: f64,
    pub df_within: f64,
}

pub fn compare_regions(a: &[f64], b: &[f64]) -> Result<RegionComparison> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "each group needs at least two samples (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let mean = |g: &[f64]| g.iter().sum::<f64>() / g.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let n = (a.len() + b.len()) as f64;
    let grand = (ma * a.len() as f64 + mb * b.len() as f64) / n;
    let ssb = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let ssw: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let (d1, d2) = (1.0, n - 2.0);
    let f = if ssb == 0.0 {
        0.0
    } else if ssw == 0.0 {
        f64::INFINITY
    } else {
        (ssb / d1) / (ssw / d2)
    };
    Ok(RegionComparison { f, p: f_survival(f, d1, d2), df_between: d1, df_within: d2 })
}

/// `P(X > f)` for `X ~ F(d1, d2)`.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// `I_x(a, b)` by the continued fraction, using the symmetry relation for
/// fast convergence.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    #[test]
    fn identical_groups() {
        let r = compare_regions(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn separated_groups() {
        let r = compare_regions(&[0.0, 1e-9, -1e-9], &[1.0, 1.0 + 1e-9, 1.0 - 1e-9]).unwrap();
        assert!(r.p < 1e-6);
        let r = compare_regions(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!((r.f, r.p), (f64::INFINITY, 0.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(compare_regions(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn groups() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (proptest::collection::vec(-10.0..10.0f64, 2..30), proptest::collection::vec(-10.0..10.0f64, 2..30))
    }

    proptest! {
        #[test]
        fn f_matches_sums_of_squares((a, b) in groups()) {
            let all: Vec<f64> = a.iter().chain(&b).copied().collect();
            let n = all.len() as f64;
            let grand = all.iter().sum::<f64>() / n;
            let sst: f64 = all.iter().map(|x| (x - grand) * (x - grand)).sum();
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let ssw: f64 = a.iter().map(|x| (x - ma).powi(2)).chain(b.iter().map(|x| (x - mb).powi(2))).sum();
            let expected = (sst - ssw) / (ssw / (n - 2.0));
            let r = compare_regions(&a, &b).unwrap();
            prop_assert!((r.f - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{} vs {}", r.f, expected);
        }

        #[test]
        fn p_matches_reference_distribution(f in 0.0..50.0f64, d2 in 2u32..200) {
            let reference = FisherSnedecor::new(1.0, d2 as f64).unwrap();
            let expected = 1.0 - reference.cdf(f);
            let got = f_survival(f, 1.0, d2 as f64);
            prop_assert!((got - expected).abs() < 1e-10, "{} vs {}", got, expected);
        }
    }
}
