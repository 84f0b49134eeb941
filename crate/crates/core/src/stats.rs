//! Small descriptive-statistics helpers shared by several modules.

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance (n − 1 denominator); 0 when fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn sample_std(v: &[f64]) -> f64 {
    sample_variance(v).sqrt()
}

/// Population variance (n denominator).
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Bias-uncorrected skewness g1 = m3 / m2^(3/2) with population moments.
/// Zero for fewer than two values or a constant sample.
pub fn skewness(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = mean(v);
    let (m2, m3) = v.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - m;
        (a + d * d, b + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    // A constant sample leaves rounding residue of order (eps * scale)^2 in m2.
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m2 <= (1e3 * f64::EPSILON * scale).powi(2) {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Linear-interpolation quantile between closest ranks (h = (n − 1)p) on
/// ascending data. NaN for an empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}
