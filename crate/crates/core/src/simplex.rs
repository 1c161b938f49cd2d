//! Euclidean projection onto the scaled simplex `{y ≥ 0, Σ y = mass}`.

/// Sort-and-threshold projection. Returns the zero vector for `mass <= 0`.
pub fn project_onto_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    if mass <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (k as f64 + 1.0);
        if u - t > 0.0 {
            tau = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();

    // Remove the rounding residue so the mass is exact to the last ulp or so.
    let total: f64 = out.iter().sum();
    let residue = mass - total;
    if residue != 0.0 {
        if let Some(idx) = out
            .iter()
            .enumerate()
            .filter(|(_, x)| **x > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
        {
            out[idx] = (out[idx] + residue).max(0.0);
        }
    }
    out
}
