//! The two per-sample test statistics and their supporting machinery.
//!
//! [`welch_t`] implements the unequal-variance t statistic used by TVLA;
//! [`ad_statistic`] implements the two-sample Anderson-Darling statistic
//! used by ADLA. Both operate on one column pair (the values of the two
//! trace sets at a single time sample) and are pure functions, safe to
//! map over columns in parallel.

mod normal;

pub use normal::{erfc, normal_cdf, normal_pdf, normal_quantile, normal_sf};

use thiserror::Error;

/// Errors from the statistics layer.
#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    /// Probability argument outside the open unit interval.
    #[error("probability must lie in (0, 1), got {0}")]
    ProbabilityOutOfRange(f64),
}

/// One time sample's values under the two acquisition conditions.
///
/// Both slices must have the same length n; the tests assume equal
/// sample sizes per condition.
#[derive(Debug, Clone, Copy)]
pub struct ColumnPair<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> ColumnPair<'a> {
    /// Pairs two equal-length columns. Panics on a length mismatch or
    /// empty columns; these are programming errors, not data errors.
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        assert_eq!(x.len(), y.len(), "column pair must have equal lengths");
        assert!(!x.is_empty(), "column pair must not be empty");
        Self { x, y }
    }

    pub fn x(&self) -> &'a [f64] {
        self.x
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Welch's t statistic and the per-condition moments behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    /// Signed statistic. `0.0` for a degenerate column with equal means,
    /// `+/-inf` for a degenerate column whose constant levels differ.
    pub t: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    /// Unbiased sample variance of x (n-1 divisor).
    pub var_x: f64,
    /// Unbiased sample variance of y (n-1 divisor).
    pub var_y: f64,
}

impl WelchResult {
    /// True when both columns are constant, so the statistic has no
    /// denominator. Such columns are flagged rather than fatal: a long
    /// campaign must survive dead time samples.
    pub fn is_degenerate(&self) -> bool {
        self.var_x == 0.0 && self.var_y == 0.0
    }
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    // Constant columns short-circuit to an exact zero variance; the
    // two-pass path below can leave rounding dust that would otherwise
    // turn a dead column into a huge finite t.
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        return (first, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Shifted two-pass: deviations from the column mean keep the sum of
    // squares stable under large DC offsets.
    let ss: f64 = values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum();
    (mean, ss / (n - 1.0))
}

/// Welch's t over one column pair. Requires n >= 2.
pub fn welch_t(pair: &ColumnPair) -> WelchResult {
    let n = pair.n();
    assert!(n >= 2, "welch_t requires at least two traces per condition");
    let (mean_x, var_x) = mean_and_var(pair.x);
    let (mean_y, var_y) = mean_and_var(pair.y);
    let nf = n as f64;
    let denom_sq = var_x / nf + var_y / nf;
    let t = if denom_sq > 0.0 {
        (mean_x - mean_y) / denom_sq.sqrt()
    } else if mean_x == mean_y {
        0.0
    } else if mean_x > mean_y {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    WelchResult {
        t,
        mean_x,
        mean_y,
        var_x,
        var_y,
    }
}

/// Two-sample Anderson-Darling statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdResult {
    /// The A^2 statistic; every summand is a square over a positive
    /// denominator, so it is always >= 0.
    pub a2: f64,
    /// Traces per condition.
    pub n: usize,
}

/// Two-sample Anderson-Darling A^2 over one column pair.
///
/// Pools the 2n values, sorts them, and for each pooled position i in
/// 1..=2n-1 counts M_i = #{x values <= Z_(i)}. Ties are resolved by that
/// literal `<=` counting rule over values, which makes the result
/// deterministic and independent of how the sort arranged equal keys.
/// O(n log n) per column.
pub fn ad_statistic(pair: &ColumnPair) -> AdResult {
    let n = pair.n();
    let mut xs = pair.x.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let mut pool = Vec::with_capacity(2 * n);
    pool.extend_from_slice(pair.x);
    pool.extend_from_slice(pair.y);
    pool.sort_unstable_by(f64::total_cmp);

    let nf = n as f64;
    let two_n = 2 * n;
    let two_nf = two_n as f64;
    let mut m = 0usize;
    let mut sum = 0.0;
    for i in 1..two_n {
        let z = pool[i - 1];
        while m < n && xs[m] <= z {
            m += 1;
        }
        let i_f = i as f64;
        let d = two_nf * m as f64 - nf * i_f;
        sum += d * d / (i_f * (two_nf - i_f));
    }
    AdResult {
        a2: sum / (nf * nf),
        n,
    }
}

/// One point of a normal Q-Q diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QqPoint {
    /// Standard-normal quantile at probability (k - 0.5) / n.
    pub theoretical: f64,
    /// k-th smallest observed value.
    pub empirical: f64,
}

/// Normal Q-Q pairs for one column of values. Requires n >= 2.
///
/// Points on a straight line indicate the column is normal up to an
/// affine transform; leak columns under shuffling or jitter typically
/// bend away visibly.
pub fn qq_points(values: &[f64]) -> Vec<QqPoint> {
    let n = values.len();
    assert!(n >= 2, "qq_points requires at least two values");
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let p = (idx as f64 + 0.5) / nf;
            QqPoint {
                // p is strictly inside (0, 1) for every k, so this cannot fail
                theoretical: normal_quantile(p).expect("plotting position is in (0,1)"),
                empirical: v,
            }
        })
        .collect()
}

/// Least-squares line through Q-Q points plus a scale-free misfit measure.
///
/// `residual_rms` is the fit RMSE divided by the standard deviation of the
/// empirical values, so a heavily non-normal column scores high regardless
/// of its scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// Fits empirical = slope * theoretical + intercept by least squares.
pub fn qq_fit(points: &[QqPoint]) -> QqFit {
    assert!(points.len() >= 2, "qq_fit requires at least two points");
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.theoretical).sum::<f64>() / n;
    let mean_e = points.iter().map(|p| p.empirical).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut ste = 0.0;
    let mut see = 0.0;
    for p in points {
        let dt = p.theoretical - mean_t;
        let de = p.empirical - mean_e;
        stt += dt * dt;
        ste += dt * de;
        see += de * de;
    }
    let slope = if stt > 0.0 { ste / stt } else { 0.0 };
    let intercept = mean_e - slope * mean_t;
    let mut rss = 0.0;
    for p in points {
        let r = p.empirical - (slope * p.theoretical + intercept);
        rss += r * r;
    }
    let sd_e = (see / n).sqrt();
    let rmse = (rss / n).sqrt();
    QqFit {
        slope,
        intercept,
        residual_rms: if sd_e > 0.0 { rmse / sd_e } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    /// Direct-definition oracle: counts x <= Z_(i) by brute force.
    fn ad_bruteforce(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut pool: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        pool.sort_by(f64::total_cmp);
        let nf = n as f64;
        let mut sum = 0.0;
        for i in 1..2 * n {
            let z = pool[i - 1];
            let m = x.iter().filter(|v| **v <= z).count() as f64;
            let i_f = i as f64;
            let d = 2.0 * nf * m - nf * i_f;
            sum += d * d / (i_f * (2.0 * nf - i_f));
        }
        sum / (nf * nf)
    }

    /// Independent textbook evaluation of Welch's t.
    fn welch_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sx2 = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
        let sy2 = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
        (mx - my) / (sx2 / n + sy2 / n).sqrt()
    }

    #[test]
    fn welch_identical_columns_give_zero() {
        let v = [1.0, 2.0, 3.0];
        let r = welch_t(&ColumnPair::new(&v, &v));
        assert_eq!(r.t, 0.0);
        assert!(!r.is_degenerate());
    }

    #[test]
    fn welch_hand_case() {
        let r = welch_t(&ColumnPair::new(&[0.0, 2.0], &[1.0, 3.0]));
        assert_eq!(r.mean_x, 1.0);
        assert_eq!(r.mean_y, 2.0);
        assert_eq!(r.var_x, 2.0);
        assert_eq!(r.var_y, 2.0);
        assert!((r.t - (-std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn welch_degenerate_columns() {
        let equal = welch_t(&ColumnPair::new(&[5.0, 5.0], &[5.0, 5.0]));
        assert!(equal.is_degenerate());
        assert_eq!(equal.t, 0.0);

        let diff = welch_t(&ColumnPair::new(&[5.0, 5.0], &[3.0, 3.0]));
        assert!(diff.is_degenerate());
        assert_eq!(diff.t, f64::INFINITY);

        let diff = welch_t(&ColumnPair::new(&[0.1, 0.1, 0.1], &[0.3, 0.3, 0.3]));
        assert!(diff.is_degenerate(), "repeated decimals must stay exact");
        assert_eq!(diff.t, f64::NEG_INFINITY);
    }

    #[test]
    fn welch_matches_oracle_on_random_columns() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=50);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 + 0.3)
                .collect();
            let r = welch_t(&ColumnPair::new(&x, &y));
            let expect = welch_oracle(&x, &y);
            assert!((r.t - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn welch_antisymmetric_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..50 {
            let n = rng.random_range(2..=30);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fwd = welch_t(&ColumnPair::new(&x, &y)).t;
            let rev = welch_t(&ColumnPair::new(&y, &x)).t;
            assert_eq!(fwd, -rev);
        }
    }

    #[test]
    fn welch_abs_t_affine_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.random_range(2..=30);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) + 0.5)
                .collect();
            let (a, b) = (-3.25, 17.0);
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let t0 = welch_t(&ColumnPair::new(&x, &y)).t.abs();
            let t1 = welch_t(&ColumnPair::new(&xs, &ys)).t.abs();
            assert!((t0 - t1).abs() <= 1e-12 * t0.max(1.0));
        }
    }

    #[test]
    fn ad_hand_cases() {
        let r = ad_statistic(&ColumnPair::new(&[0.0], &[1.0]));
        assert_eq!(r.a2, 1.0);

        let r = ad_statistic(&ColumnPair::new(&[1.0, 2.0], &[3.0, 4.0]));
        assert!((r.a2 - 5.0 / 3.0).abs() < 1e-14);

        let r = ad_statistic(&ColumnPair::new(&[1.0, 3.0], &[2.0, 4.0]));
        assert!((r.a2 - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ad_symmetric_in_arguments() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(1..=40);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fwd = ad_statistic(&ColumnPair::new(&x, &y)).a2;
            let rev = ad_statistic(&ColumnPair::new(&y, &x)).a2;
            assert!((fwd - rev).abs() <= 1e-12 * fwd.max(1.0));
        }
    }

    #[test]
    fn ad_invariant_under_monotone_transforms() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        for _ in 0..30 {
            let n = rng.random_range(2..=40);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let base = ad_statistic(&ColumnPair::new(&x, &y)).a2;

            let fx: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
            let fy: Vec<f64> = y.iter().map(|v| 2.0 * v + 3.0).collect();
            let affine = ad_statistic(&ColumnPair::new(&fx, &fy)).a2;
            assert_eq!(base, affine, "rank statistic must ignore affine maps");

            let cx: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
            let cy: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
            let cubed = ad_statistic(&ColumnPair::new(&cx, &cy)).a2;
            assert_eq!(base, cubed, "rank statistic must ignore cubing");
        }
    }

    proptest! {
        #[test]
        fn ad_matches_bruteforce_oracle(
            n in 1usize..=8,
            seed in 0u64..1_000_000,
        ) {
            // integer-valued columns exercise the tie rule as well
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
            let fast = ad_statistic(&ColumnPair::new(&x, &y)).a2;
            let slow = ad_bruteforce(&x, &y);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0));
        }

        #[test]
        fn welch_matches_oracle_prop(
            n in 2usize..=40,
            seed in 0u64..1_000_000,
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let fast = welch_t(&ColumnPair::new(&x, &y)).t;
            let slow = welch_oracle(&x, &y);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn qq_two_point_definition() {
        let pts = qq_points(&[1.0, -1.0]);
        assert_eq!(pts[0].empirical, -1.0);
        assert_eq!(pts[1].empirical, 1.0);
        assert!((pts[0].theoretical - normal_quantile(0.25).unwrap()).abs() < 1e-15);
        assert!((pts[1].theoretical - normal_quantile(0.75).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn qq_constant_vector_is_flat() {
        let pts = qq_points(&[2.5; 10]);
        assert!(pts.iter().all(|p| p.empirical == 2.5));
        let fit = qq_fit(&pts);
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.residual_rms, 0.0);
    }

    #[test]
    fn qq_gaussian_slope_near_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let values: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = qq_fit(&qq_points(&values));
        assert!(
            (fit.slope - 1.0).abs() <= 0.1,
            "slope {} out of 1.0 +/- 0.1",
            fit.slope
        );
    }
}
