use crate::linalg::{sandwich, Matrix};

/// `Γ_n`: entry `(i, j)` is `√(n_j/n)`, minus `√(n/n_j)` on the diagonal.
pub fn gamma_matrix(sizes: &[usize]) -> Matrix {
    let n: usize = sizes.iter().sum();
    let n = n as f64;
    let k = sizes.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let nj = sizes[j] as f64;
                    let v = (nj / n).sqrt();
                    if i == j {
                        v - (n / nj).sqrt()
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

/// `H_n`: row `l - 2` has `-√(n/n_1)` in column 1 and `√(n/n_l)` in column `l`.
pub fn h_matrix(sizes: &[usize]) -> Matrix {
    let n: usize = sizes.iter().sum();
    let n = n as f64;
    let k = sizes.len();
    (1..k)
        .map(|l| {
            let mut row = vec![0.0; k];
            row[0] = -(n / sizes[0] as f64).sqrt();
            row[l] = (n / sizes[l] as f64).sqrt();
            row
        })
        .collect()
}

/// `Σ̂_{U_n} = Γ_n diag(σ̂²) Γ_nᵀ`.
pub fn covariance_u(sizes: &[usize], sigma2: &[f64]) -> Matrix {
    sandwich(&gamma_matrix(sizes), sigma2)
}

/// `Σ̂_{V_n} = H_n diag(σ̂²) H_nᵀ`.
pub fn covariance_v(sizes: &[usize], sigma2: &[f64]) -> Matrix {
    sandwich(&h_matrix(sizes), sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Matrix, b: &[&[f64]], tol: f64) -> bool {
        a.iter().zip(b).all(|(r, s)| r.iter().zip(*s).all(|(x, y)| (x - y).abs() <= tol))
    }

    #[test]
    fn two_equal_groups() {
        let g = gamma_matrix(&[10, 10]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&g, &[&[-h, h], &[h, -h]], 1e-15));
        assert!(close(&covariance_u(&[10, 10], &[1.0, 1.0]), &[&[1.0, -1.0], &[-1.0, 1.0]], 1e-14));

        let hm = h_matrix(&[10, 10]);
        assert!(close(&hm, &[&[-2f64.sqrt(), 2f64.sqrt()]], 1e-15));
        assert!(close(&covariance_v(&[10, 10], &[1.0, 1.0]), &[&[4.0]], 1e-14));
    }

    #[test]
    fn three_equal_groups() {
        assert!(close(
            &covariance_v(&[7, 7, 7], &[1.0, 1.0, 1.0]),
            &[&[6.0, 3.0], &[3.0, 6.0]],
            1e-13
        ));
    }

    #[test]
    fn zero_variances_give_zero_matrices() {
        assert!(covariance_u(&[3, 4, 5], &[0.0; 3]).iter().flatten().all(|&v| v == 0.0));
        assert!(covariance_v(&[3, 4, 5], &[0.0; 3]).iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn unequal_two_groups_match_scalar_forms() {
        let (n1, n2) = (48usize, 65usize);
        let n = (n1 + n2) as f64;
        let (s1, s2) = (1.7, 0.4);
        let su = ((n1 as f64 / n).sqrt() - (n / n1 as f64).sqrt()).powi(2) * s1 + n2 as f64 / n * s2;
        let sv = n / n1 as f64 * s1 + n / n2 as f64 * s2;
        assert!((covariance_u(&[n1, n2], &[s1, s2])[0][0] - su).abs() < 1e-12);
        assert!((covariance_v(&[n1, n2], &[s1, s2])[0][0] - sv).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_with_nonnegative_diagonal(
            sizes in prop::collection::vec(1usize..200, 2..6),
            s in prop::collection::vec(0.0f64..10.0, 6),
        ) {
            let s = &s[..sizes.len()];
            for m in [covariance_u(&sizes, s), covariance_v(&sizes, s)] {
                for i in 0..m.len() {
                    prop_assert!(m[i][i] >= 0.0);
                    for j in 0..m.len() {
                        prop_assert_eq!(m[i][j], m[j][i]);
                    }
                }
            }
        }
    }
}
