//! Envelope fitting: the smallest nonnegative coefficient vector whose linear
//! bound dominates every sample.

/// Solves `min Σ_j c_j w_j` subject to `Σ_j x_ij c_j ≥ y_i`, `c ≥ 0`, with
/// `w_j = Σ_i x_ij`, so the bound is tight on average over the samples.
///
/// Features must be nonnegative. Returns `None` when no finite coefficients
/// dominate the samples (a row with positive target and all-zero features).
/// Columns that vanish on every sample get coefficient zero.
pub fn envelope_fit(features: &[Vec<f64>], targets: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(features.len(), targets.len(), "feature/target length mismatch");
    let d = features.first().map_or(0, Vec::len);
    let mut weights = vec![0.0; d];
    for row in features {
        assert_eq!(row.len(), d, "ragged feature matrix");
        for (w, &x) in weights.iter_mut().zip(row) {
            assert!(x >= 0.0 && x.is_finite(), "features must be finite and nonnegative");
            *w += x;
        }
    }
    let active: Vec<usize> = (0..d).filter(|&j| weights[j] > 0.0).collect();

    // Rescaled problem: columns by w_j (objective becomes Σ c'_j), rows by
    // their largest entry so the tableau stays O(1).
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &y) in features.iter().zip(targets) {
        if y <= 0.0 {
            continue;
        }
        let scaled: Vec<f64> = active.iter().map(|&j| row[j] / weights[j]).collect();
        let m = scaled.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return None;
        }
        rows.push((scaled.iter().map(|x| x / m).collect(), y / m));
    }
    let mut c = vec![0.0; d];
    if rows.is_empty() {
        return Some(c);
    }
    let scaled = dual_simplex(&rows, active.len())?;
    for (&j, cj) in active.iter().zip(scaled) {
        c[j] = cj / weights[j];
    }
    // Absorb round-off so the bound certifiably holds on every sample.
    let mut inflate: f64 = 1.0;
    for (row, &y) in features.iter().zip(targets) {
        let b: f64 = row.iter().zip(&c).map(|(x, c)| x * c).sum();
        if y > 0.0 && b < y {
            inflate = inflate.max(y / b);
        }
    }
    if inflate.is_finite() {
        c.iter_mut().for_each(|v| *v *= inflate);
        Some(c)
    } else {
        None
    }
}

/// Maximizes `Σ y_i λ_i` s.t. `Σ_i a_ij λ_i ≤ 1` for each column `j`,
/// `λ ≥ 0`; the optimal primal `c'` is read off the slack reduced costs.
fn dual_simplex(rows: &[(Vec<f64>, f64)], d: usize) -> Option<Vec<f64>> {
    const TOL: f64 = 1e-12;
    let n = rows.len();
    let width = n + d;
    // Tableau: d constraint rows plus objective row; rhs in the last column.
    let mut t = vec![vec![0.0; width + 1]; d + 1];
    for j in 0..d {
        for (i, (a, _)) in rows.iter().enumerate() {
            t[j][i] = a[j];
        }
        t[j][n + j] = 1.0;
        t[j][width] = 1.0;
    }
    for (i, (_, y)) in rows.iter().enumerate() {
        t[d][i] = -y;
    }
    let mut basis: Vec<usize> = (n..n + d).collect();
    let scale = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    for _ in 0..10_000 {
        // Dantzig entering rule with a Bland fallback on ties.
        let mut enter = None;
        let mut best = -TOL * scale.max(1.0);
        for (col, &v) in t[d][..width].iter().enumerate() {
            if v < best {
                best = v;
                enter = Some(col);
            }
        }
        let Some(e) = enter else {
            return Some((0..d).map(|j| t[d][n + j].max(0.0)).collect());
        };
        let mut leave = None;
        let mut ratio = f64::INFINITY;
        for r in 0..d {
            if t[r][e] > TOL {
                let q = t[r][width] / t[r][e];
                if q < ratio - TOL || (q <= ratio + TOL && leave.is_some_and(|l: usize| basis[r] < basis[l])) {
                    ratio = q;
                    leave = Some(r);
                }
            }
        }
        let l = leave?;
        let p = t[l][e];
        t[l].iter_mut().for_each(|v| *v /= p);
        let pivot = t[l].clone();
        for (r, row) in t.iter_mut().enumerate() {
            if r != l {
                let f = row[e];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        basis[l] = e;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(features: &[Vec<f64>], c: &[f64]) -> f64 {
        features.iter().map(|r| r.iter().zip(c).map(|(x, c)| x * c).sum::<f64>()).sum()
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let features: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64, (i * i) as f64 * 0.1]).collect();
        let targets: Vec<f64> = features.iter().map(|r| 2.0 + 0.5 * r[1] + 3.0 * r[2]).collect();
        let c = envelope_fit(&features, &targets).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9 && (c[2] - 3.0).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn constant_targets_need_only_intercept() {
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let c = envelope_fit(&features, &[4.0; 10]).unwrap();
        assert!((c[0] - 4.0).abs() < 1e-12 && c[1] == 0.0, "{c:?}");
    }

    #[test]
    fn missing_intercept_is_infeasible() {
        let features = vec![vec![0.0, 0.0], vec![1.0, 2.0]];
        assert!(envelope_fit(&features, &[1.0, 1.0]).is_none());
        assert_eq!(envelope_fit(&features, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn fit_dominates_and_beats_vertices(
            data in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..50.0), 3..40)
        ) {
            let features: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![1.0, a, b]).collect();
            let targets: Vec<f64> = data.iter().map(|d| d.2).collect();
            let c = envelope_fit(&features, &targets).unwrap();
            for (r, y) in features.iter().zip(&targets) {
                let b: f64 = r.iter().zip(&c).map(|(x, c)| x * c).sum();
                prop_assert!(b >= *y - 1e-9 * y.abs().max(1.0));
            }
            // Any feasible candidate has objective at least as large.
            let ymax = targets.iter().copied().fold(0.0, f64::max);
            let candidate = [ymax, 0.0, 0.0];
            prop_assert!(objective(&features, &c) <= objective(&features, &candidate) * (1.0 + 1e-9) + 1e-9);
        }
    }
}
