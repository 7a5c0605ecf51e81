/// Euclidean projection onto the probability simplex `{x ≥ 0, Σx = 1}`.
///
/// Sort-based threshold method: find the largest `ρ` with
/// `u_ρ + (1 - Σ_{i≤ρ} u_i)/ρ > 0` over the descending sort `u`, then shift
/// by that threshold and clip at zero.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mut u = y.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (1.0 - cumsum) / (j + 1) as f64;
        if uj + t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = y.iter().map(|&v| (v + theta).max(0.0)).collect();
    // Re-normalize the active set and push the rounding residue onto the largest entry.
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        let n = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / n);
    }
    let residue = 1.0 - x.iter().sum::<f64>();
    if let Some(top) = x.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *top += residue;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn feasible_point_is_fixed() {
        assert!(close(&project_simplex(&[0.2, 0.8]), &[0.2, 0.8]));
    }

    #[test]
    fn clips_to_vertex() {
        assert!(close(&project_simplex(&[2.0, 0.0]), &[1.0, 0.0]));
    }

    #[test]
    fn symmetric_shift() {
        let third = 1.0 / 3.0;
        assert!(close(&project_simplex(&[0.5, 0.5, 0.5]), &[third, third, third]));
    }

    #[test]
    fn single_component() {
        assert_eq!(project_simplex(&[-7.0]), vec![1.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn output_on_simplex_and_optimal(y in prop::collection::vec(-5.0f64..5.0, 1..12)) {
                let x = project_simplex(&y);
                prop_assert!(x.iter().all(|&v| v >= 0.0));
                prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                // Variational inequality: <y - x, z - x> <= 0 for all vertices z.
                for vertex in 0..y.len() {
                    let inner: f64 = (0..y.len())
                        .map(|i| (y[i] - x[i]) * ((i == vertex) as u8 as f64 - x[i]))
                        .sum();
                    prop_assert!(inner <= 1e-9, "{inner}");
                }
            }
        }
    }
}
