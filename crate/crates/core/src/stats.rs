//! Small numeric helpers: normal-distribution primitives and summary statistics.

use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf::erfc;

use crate::rng::Rng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `P(lo < Z < hi)` for a standard normal `Z`, computed on the side of the
/// distribution that avoids cancellation.
pub fn normal_interval_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo >= 0.0 {
        0.5 * (erfc(lo / SQRT_2) - erfc(hi / SQRT_2))
    } else if hi <= 0.0 {
        0.5 * (erfc(-hi / SQRT_2) - erfc(-lo / SQRT_2))
    } else {
        1.0 - 0.5 * erfc(-lo / SQRT_2) - 0.5 * erfc(hi / SQRT_2)
    }
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Draws from `N(mean, sd^2)` truncated to `[lo, hi]`.
///
/// Inverse-CDF sampling on the upper-tail probability when the interval is
/// within 30 standard deviations of the mean, exponential rejection beyond.
pub fn sample_truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut Rng) -> f64 {
    let (mut za, mut zb) = ((lo - mean) / sd, (hi - mean) / sd);
    let flip = zb <= 0.0;
    if flip {
        (za, zb) = (-zb, -za);
    }
    let z = if za < 30.0 {
        let (q_hi, q_lo) = (upper_tail(za), upper_tail(zb));
        if q_hi > q_lo {
            let q = q_lo + rng.random::<f64>() * (q_hi - q_lo);
            let std = Normal::new(0.0, 1.0).expect("standard normal");
            (-std.inverse_cdf(q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))).clamp(za, zb)
        } else {
            flat_tail(za, zb, rng)
        }
    } else {
        flat_tail(za, zb, rng)
    };
    let z = if flip { -z } else { z };
    (mean + sd * z).clamp(lo, hi)
}

fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Standard normal restricted to `[a, b]` with `a > 0` far in the tail.
fn flat_tail(a: f64, b: f64, rng: &mut Rng) -> f64 {
    let a = a.max(0.0);
    if (b - a) * a.max(1.0) < 1.0 {
        // narrow interval: uniform proposal, acceptance exp(-(z^2 - a^2)/2)
        loop {
            let z = a + rng.random::<f64>() * (b - a);
            if rng.random::<f64>() <= (-0.5 * (z * z - a * a)).exp() {
                return z;
            }
        }
    }
    // translated exponential proposal (Robert, 1995)
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - (1.0 - rng.random::<f64>()).ln() / alpha;
        if z <= b && rng.random::<f64>() <= (-0.5 * (z - alpha).powi(2)).exp() {
            return z;
        }
    }
}

/// One standard normal draw.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Two-sided Student-t critical value for confidence `level` (e.g. 0.95).
pub fn t_critical(level: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + 0.5 * level)
}

/// Half-width of the `level` confidence interval of the mean of `xs`.
pub fn ci_half_width(xs: &[f64], level: f64) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    t_critical(level, n - 1.0) * (sample_variance(xs) / n).sqrt()
}

/// Whether paired samples `a` and `b` differ at two-sided level `alpha`
/// according to a paired Student t-test.
pub fn paired_t_significant(a: &[f64], b: &[f64], alpha: f64) -> bool {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.len() < 2 {
        return false;
    }
    let n = d.len() as f64;
    let m = mean(&d);
    let se = (sample_variance(&d) / n).sqrt();
    if se == 0.0 {
        return m != 0.0;
    }
    (m / se).abs() > t_critical(1.0 - alpha, n - 1.0)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn interval_mass_agrees_across_branches() {
        for &(a, b) in &[(-1.0, 1.0), (0.5, 2.0), (-3.0, -0.2), (8.0, 9.0), (-9.0, -8.0)] {
            let direct = phi(b) - phi(a);
            let m = normal_interval_mass(a, b);
            assert!((m - direct).abs() < 1e-15 + 1e-9 * direct, "{a} {b}: {m} vs {direct}");
        }
        assert!((normal_interval_mass(-1.959963984540054, 1.959963984540054) - 0.95).abs() < 1e-10);
        assert!(normal_interval_mass(10.0, 11.0) > 0.0);
    }

    #[test]
    fn truncated_samples_stay_inside() {
        let mut rng = rng_for(1);
        for _ in 0..1000 {
            let x = sample_truncated_normal(5.0, 0.1, 0.0, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&x));
            assert!(x > 0.9);
        }
    }

    #[test]
    fn t_quantile() {
        assert!((t_critical(0.95, 9.0) - 2.262157162740992).abs() < 1e-9);
    }
}
