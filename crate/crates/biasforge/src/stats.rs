//! Statistical primitives: normal tail areas, a two-sided binomial test, a
//! pooled two-proportion z-test, a two-sample Kolmogorov-Smirnov test, and a
//! Pearson chi-square test on 2x2 tables.
//!
//! Tail areas go through `erfc` so extreme statistics keep meaningful
//! (denormal-small) p-values instead of rounding through `1 - cdf`.

/// P(Z <= x) for a standard normal.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P(Z > x) for a standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
}

/// P(X <= k) for X ~ Binomial(n, p), summed in log space.
fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let mut acc = 0.0;
    for i in 0..=k.min(n) {
        acc += (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
    }
    acc.min(1.0)
}

/// Exact tests are used up to this sample size; the normal approximation
/// (with continuity correction) beyond it.
pub const BINOMIAL_EXACT_LIMIT: u64 = 1000;

/// Two-sided binomial test of `k` successes in `n` trials against success
/// probability `p0`. Exact (double the smaller tail, capped at 1) for
/// n <= [`BINOMIAL_EXACT_LIMIT`]; normal approximation with continuity
/// correction above. Returns (statistic, p); the statistic is the
/// continuity-corrected z-score in both regimes.
pub fn binomial_test_two_sided(k: u64, n: u64, p0: f64) -> (f64, f64) {
    assert!(n > 0 && (0.0..=1.0).contains(&p0));
    let mean = n as f64 * p0;
    let sd = (n as f64 * p0 * (1.0 - p0)).sqrt();
    let z = if sd > 0.0 {
        ((k as f64 - mean).abs() - 0.5).max(0.0) / sd
    } else {
        0.0
    };
    let p = if n <= BINOMIAL_EXACT_LIMIT {
        let lower = binom_cdf(k, n, p0);
        let upper = if k == 0 {
            1.0
        } else {
            1.0 - binom_cdf(k - 1, n, p0)
        };
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    (z, p)
}

/// Pooled two-proportion z-test of H0: p1 = p2, two-sided.
/// Returns (z, p). A degenerate pooled proportion (0 or 1) yields (0, 1).
pub fn two_proportion_z_test(k1: u64, n1: u64, k2: u64, n2: u64) -> (f64, f64) {
    assert!(n1 > 0 && n2 > 0);
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return (0.0, 1.0);
    }
    let z = (p1 - p2) / se;
    (z, libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0))
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// Returns (D, p) where D is the maximum vertical distance between the two
/// empirical CDFs (ties handled by advancing both samples past each distinct
/// value) and p is the asymptotic Kolmogorov tail probability with the
/// effective-size correction lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_unstable_by(|x, y| x.total_cmp(y));
    b.sort_unstable_by(|x, y| x.total_cmp(y));
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = a[i].min(b[j]);
        while i < n1 && a[i] <= v {
            i += 1;
        }
        while j < n2 && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// Kolmogorov survival function Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100u32 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square test (df = 1, no continuity correction) on the 2x2
/// table [[a, b], [c, d]]. Returns (statistic, p). Any zero marginal gives
/// (0, 1): the table carries no information about association.
pub fn chi_square_2x2(a: u64, b: u64, c: u64, d: u64) -> (f64, f64) {
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let n = a + b + c + d;
    let (r1, r2, c1, c2) = (a + b, c + d, a + c, b + d);
    if n == 0.0 || r1 == 0.0 || r2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
        return (0.0, 1.0);
    }
    let num = a * d - b * c;
    let stat = n * num * num / (r1 * r2 * c1 * c2);
    // chi-square(1) is the square of a standard normal
    let p = libm::erfc((stat / 2.0).sqrt()).min(1.0);
    (stat, p)
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_sf(3.0) - 0.0013498980316300933).abs() < 1e-15);
    }

    #[test]
    fn binomial_exact_matches_enumeration_oracle() {
        // Frozen from exact integer enumeration: 2*min tails for k=501, n=1000, p=1/2.
        let (_, p) = binomial_test_two_sided(501, 1000, 0.5);
        assert!((p - 0.9747749818216392).abs() < 1e-12, "p={p}");
        // k=2, n=10: 2 * P(X<=2) = 2 * 56/1024
        let (_, p) = binomial_test_two_sided(2, 10, 0.5);
        assert!((p - 0.109375).abs() < 1e-12, "p={p}");
        // perfectly balanced small sample: p capped at 1
        let (_, p) = binomial_test_two_sided(5, 10, 0.5);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_normal_regime_far_tail() {
        // 45000 of 50000 at p0 = 1/2: z ~ 178.9, p underflows to 0.
        let (z, p) = binomial_test_two_sided(45_000, 50_000, 0.5);
        assert!((z - 178.88096606402817).abs() < 1e-9);
        assert!(p < 1e-12);
    }

    #[test]
    fn two_proportion_reference() {
        // Frozen from an independent pooled-z computation.
        let (z, p) = two_proportion_z_test(400, 30_000, 200, 30_000);
        assert!((z - 8.206099398622182).abs() < 1e-9, "z={z}");
        assert!((p - 2.28490274449604e-16).abs() < 1e-28, "p={p}");
        // identical proportions
        let (z, p) = two_proportion_z_test(10, 100, 10, 100);
        assert_eq!(z, 0.0);
        assert!((p - 1.0).abs() < 1e-15);
        // no positives at all: degenerate, not significant
        let (z, p) = two_proportion_z_test(0, 100, 0, 100);
        assert_eq!(z, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn kolmogorov_q_reference_points() {
        assert!((kolmogorov_q(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_q(1.36) - 0.049485876755377876).abs() < 1e-12);
        assert!((kolmogorov_q(0.5) - 0.9639452436648751).abs() < 1e-12);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_statistic_hand_cases() {
        // Disjoint supports: D = 1.
        let (d, p) = ks_two_sample(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]);
        assert_eq!(d, 1.0);
        assert!(p < 0.2);
        // Identical samples: D = 0, p = 1.
        let (d, p) = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
        // Hand-computed: xs={1,2}, ys={1,3}: after 1 -> |1/2-1/2|=0,
        // after 2 -> |1-1/2|=1/2, after 3 -> |1-1|=0. D=0.5.
        let (d, _) = ks_two_sample(&[1.0, 2.0], &[1.0, 3.0]);
        assert_eq!(d, 0.5);
    }

    #[test]
    fn ks_detects_with_scale_and_is_calibrated_under_null() {
        use crate::rng::SplitMix64;
        // Shifted normals at n=2000 per side: essentially always detected.
        let mut r = SplitMix64::new(99);
        let xs: Vec<f64> = (0..2000).map(|_| r.next_normal()).collect();
        let ys: Vec<f64> = (0..2000).map(|_| r.next_normal() + 1.0).collect();
        let (d, p) = ks_two_sample(&xs, &ys);
        assert!(d > 0.3);
        assert!(p < 1e-12);
        // Null calibration: fire rate at alpha=0.05 stays below 0.10 over 200 reps.
        let mut fires = 0;
        for rep in 0..200 {
            let mut r = SplitMix64::new(1000 + rep);
            let xs: Vec<f64> = (0..300).map(|_| r.next_normal()).collect();
            let ys: Vec<f64> = (0..300).map(|_| r.next_normal()).collect();
            let (_, p) = ks_two_sample(&xs, &ys);
            if p < 0.05 {
                fires += 1;
            }
        }
        assert!(fires <= 20, "null fire count {fires}");
    }

    #[test]
    fn chi_square_hand_case() {
        // [[30,10],[10,30]]: chi2 = 80*(900-100)^2/(40*40*40*40) = 20/... compute directly.
        let (stat, p) = chi_square_2x2(30, 10, 10, 30);
        let expect = 80.0 * (800.0 * 800.0) / (40.0f64.powi(4));
        assert!((stat - expect).abs() < 1e-12);
        assert!(p < 0.001);
        // zero marginal
        let (stat, p) = chi_square_2x2(0, 0, 5, 5);
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }
}
