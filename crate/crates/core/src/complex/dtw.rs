//! Dynamic time warping on per-window resampled physiological series.

/// Number of samples each series is resampled to before warping.
pub const RESAMPLE_LEN: usize = 64;

/// Classic dynamic-programming DTW with no window constraint and absolute
/// difference as the local cost.
pub fn dtw(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let n = a.len();
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = (a[i - 1] - b[j - 1]).abs();
            curr[j] = cost + prev[j].min(curr[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Linear resampling of an irregular series onto `len` evenly spaced points
/// spanning `[t0, t1]`. Points outside the sampled range clamp to the nearest
/// endpoint value. Requires at least two samples sorted by time.
pub fn resample_linear(times: &[f64], values: &[f64], t0: f64, t1: f64, len: usize) -> Vec<f64> {
    assert!(times.len() == values.len() && times.len() >= 2 && len >= 2);
    let mut out = Vec::with_capacity(len);
    let mut k = 0usize;
    for s in 0..len {
        let t = t0 + (t1 - t0) * (s as f64) / ((len - 1) as f64);
        if t <= times[0] {
            out.push(values[0]);
            continue;
        }
        if t >= times[times.len() - 1] {
            out.push(values[values.len() - 1]);
            continue;
        }
        while times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let w = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        out.push(values[k] * (1.0 - w) + values[k + 1] * w);
    }
    out
}
