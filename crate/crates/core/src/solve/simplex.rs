/// Euclidean projection onto the probability simplex `{x ≥ 0, Σx = 1}`.
///
/// Sort-based method: find the largest `k` such that the `k` biggest entries
/// stay positive after a common shift, then shift and clip.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    project_simplex_in_place(&mut out);
    out
}

pub(crate) fn project_simplex_in_place(x: &mut [f64]) {
    match x.len() {
        0 => return,
        1 => {
            x[0] = 1.0;
            return;
        }
        _ => {}
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    // Clean up rounding so the group sums to one as tightly as possible.
    let s: f64 = x.iter().sum();
    if s > 0.0 && (s - 1.0).abs() > 0.0 {
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        x[imax] = (x[imax] + 1.0 - s).max(0.0);
    }
}
