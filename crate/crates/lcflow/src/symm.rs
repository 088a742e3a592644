//! Normalized elementary symmetric functions of principal curvatures, their
//! matrix derivatives, Garding-cone membership, and the Newton-MacLaurin
//! inequality.
//!
//! `E_l(kappa) = sigma_l(kappa) / C(n, l)` with `E_0 = 1` and `E_l = 0` for
//! `l > n`. Values come from the characteristic-coefficient recursion (the
//! coefficients of `prod_i (1 + kappa_i x)` built one root at a time), which
//! is O(n^2) and stable for mixed signs; subset enumeration survives only as a
//! test oracle.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Binomial coefficient as f64 (exact for the small n used here).
pub fn binomial(n: usize, l: usize) -> f64 {
    if l > n {
        return 0.0;
    }
    let l = l.min(n - l);
    let mut acc = 1.0;
    for i in 0..l {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Unnormalized elementary symmetric functions `sigma_0..sigma_lmax` via the
/// coefficient recursion.
fn sigma_up_to(kappa: &[f64], lmax: usize) -> Vec<f64> {
    let lmax = lmax.min(kappa.len());
    let mut e = vec![0.0; lmax + 1];
    e[0] = 1.0;
    for &k in kappa {
        for j in (1..=lmax).rev() {
            e[j] += k * e[j - 1];
        }
    }
    e
}

/// Normalized l-th elementary symmetric function.
pub fn normalized_elementary(kappa: &[f64], l: usize) -> f64 {
    let n = kappa.len();
    if l == 0 {
        return 1.0;
    }
    if l > n {
        return 0.0;
    }
    let sig = sigma_up_to(kappa, l);
    sig[l] / binomial(n, l)
}

/// All of `E_0..E_lmax` in one pass.
pub fn normalized_elementary_all(kappa: &[f64], lmax: usize) -> Vec<f64> {
    let n = kappa.len();
    let sig = sigma_up_to(kappa, lmax);
    (0..=lmax)
        .map(|l| {
            if l == 0 {
                1.0
            } else if l > n {
                0.0
            } else {
                sig[l] / binomial(n, l)
            }
        })
        .collect()
}

/// `sigma_{l}` of `kappa` with entry `skip` removed.
fn sigma_without(kappa: &[f64], skip: usize, l: usize) -> f64 {
    let rest: Vec<f64> = kappa
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, v)| *v)
        .collect();
    if l > rest.len() {
        return 0.0;
    }
    sigma_up_to(&rest, l)[l]
}

/// Matrix derivative of `E_l` and the residuals of its three trace
/// identities, for a symmetric matrix `A`:
///
/// * `tr(dE_l) = l E_{l-1}`
/// * `<dE_l, A> = l E_l`
/// * `<dE_l, A^2> = n E_1 E_l - (n - l) E_{l+1}`
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub e_dot: DMatrix<f64>,
    pub res_trace: f64,
    pub res_contract_a: f64,
    pub res_contract_a_sq: f64,
}

pub fn elementary_derivative_checks(a: &DMatrix<f64>, l: usize) -> Result<DerivativeCheck> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::IndexRange(format!("matrix is {}x{}", a.nrows(), a.ncols())));
    }
    if l < 1 || l > n {
        return Err(Error::IndexRange(format!("l = {l} outside 1..={n}")));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::AsymmetricMatrix(asym));
    }
    let sym = nalgebra::SymmetricEigen::new(a.clone());
    let kappa: Vec<f64> = sym.eigenvalues.iter().copied().collect();
    let coeff = 1.0 / binomial(n, l);
    // In the eigenframe the derivative is diagonal with entries
    // sigma_{l-1}(kappa minus the i-th); rotate back with the eigenvectors.
    let diag: Vec<f64> = (0..n).map(|i| coeff * sigma_without(&kappa, i, l - 1)).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let e_dot = &sym.eigenvectors * d * sym.eigenvectors.transpose();

    let e = normalized_elementary_all(&kappa, l + 1);
    let trace: f64 = e_dot.trace();
    let contract_a = (&e_dot * a).trace();
    let contract_a_sq = (&e_dot * (a * a)).trace();
    let lf = l as f64;
    let nf = n as f64;
    Ok(DerivativeCheck {
        res_trace: trace - lf * e[l - 1],
        res_contract_a: contract_a - lf * e[l],
        res_contract_a_sq: contract_a_sq - (nf * e[1] * e[l] - (nf - lf) * e[l + 1]),
        e_dot,
    })
}

/// Strict Garding-cone membership: `E_1, ..., E_k` all positive.
pub fn in_garding_cone(kappa: &[f64], k: usize) -> Result<bool> {
    let n = kappa.len();
    if k < 1 || k > n {
        return Err(Error::IndexRange(format!("k = {k} outside 1..={n}")));
    }
    let e = normalized_elementary_all(kappa, k);
    Ok(e[1..=k].iter().all(|v| *v > 0.0))
}

/// Newton-MacLaurin gap `E_l E_m - E_{m+1} E_{l-1}`, nonnegative on the
/// m-th Garding cone with equality exactly at constant vectors.
pub fn newton_maclaurin_gap(kappa: &[f64], l: usize, m: usize) -> Result<f64> {
    let n = kappa.len();
    if !(1 <= l && l <= m && m < n) {
        return Err(Error::IndexRange(format!("(l, m) = ({l}, {m}) outside 1 <= l <= m <= {}", n - 1)));
    }
    let e = normalized_elementary_all(kappa, m + 1);
    Ok(e[l] * e[m] - e[m + 1] * e[l - 1])
}

/// Combined cone-membership and Newton-MacLaurin evaluation.
pub fn cone_and_maclaurin(kappa: &[f64], k: usize, l: usize, m: usize) -> Result<(bool, f64)> {
    Ok((in_garding_cone(kappa, k)?, newton_maclaurin_gap(kappa, l, m)?))
}

/// Eigenvalues of the 2x2 symmetric generalized problem `h x = kappa g x`
/// with `g` positive definite, ascending. Reduction by Cholesky keeps the
/// problem symmetric, so the output is always real.
pub fn generalized_eigen_2x2(h: (f64, f64, f64), g: (f64, f64, f64)) -> Option<(f64, f64)> {
    let (g11, g12, g22) = g;
    if !(g11 > 0.0) {
        return None;
    }
    let l11 = g11.sqrt();
    let l21 = g12 / l11;
    let s22 = g22 - l21 * l21;
    if !(s22 > 0.0) {
        return None;
    }
    let l22 = s22.sqrt();
    // S = L^{-1} h L^{-T}
    let (h11, h12, h22) = h;
    let a = h11 / g11;
    let b = (h12 - l21 * (h11 / l11)) / (l11 * l22);
    let c = (h22 - 2.0 * l21 * (h12 / l11) + l21 * l21 * (h11 / g11)) / s22;
    let mid = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    Some((mid - disc, mid + disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand::{Rng, SeedableRng};

    /// Subset-enumeration oracle, exponential and only for tests.
    fn enumeration_oracle(kappa: &[f64], l: usize) -> f64 {
        let n = kappa.len();
        if l == 0 {
            return 1.0;
        }
        if l > n {
            return 0.0;
        }
        fn rec(kappa: &[f64], start: usize, remaining: usize, prod: f64, acc: &mut f64) {
            if remaining == 0 {
                *acc += prod;
                return;
            }
            for i in start..=kappa.len() - remaining {
                rec(kappa, i + 1, remaining - 1, prod * kappa[i], acc);
            }
        }
        let mut acc = 0.0;
        rec(kappa, 0, l, 1.0, &mut acc);
        acc / binomial(n, l)
    }

    #[test]
    fn frozen_examples() {
        assert_eq!(normalized_elementary(&[1.0, 1.0, 1.0], 2), 1.0);
        let e2 = normalized_elementary(&[1.0, 2.0, 3.0], 2);
        assert!((e2 - 11.0 / 3.0).abs() < 1e-14);
        assert!((e2 - enumeration_oracle(&[1.0, 2.0, 3.0], 2)).abs() < 1e-14);
        assert_eq!(normalized_elementary(&[1.0, 2.0, 3.0], 4), 0.0);
        assert_eq!(normalized_elementary(&[1.0, 2.0, 3.0], 0), 1.0);
    }

    #[test]
    fn derivative_checks_diag123() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let chk = elementary_derivative_checks(&a, 2).unwrap();
        // dE_2 entries in the eigenframe are (5, 4, 3)/3
        let expect = [5.0 / 3.0, 4.0 / 3.0, 3.0 / 3.0];
        let mut diag: Vec<f64> = (0..3).map(|i| chk.e_dot[(i, i)]).collect();
        diag.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (d, e) in diag.iter().zip(expect.iter()) {
            assert!((d - e).abs() < 1e-12);
        }
        assert!((chk.e_dot.trace() - 4.0).abs() < 1e-12); // 2 E_1
        let a_contract = (&chk.e_dot * &a).trace();
        assert!((a_contract - 22.0 / 3.0).abs() < 1e-12); // 2 E_2
        let a2_contract = (&chk.e_dot * (&a * &a)).trace();
        assert!((a2_contract - 16.0).abs() < 1e-12); // 3*2*(11/3) - 1*6
        assert!(chk.res_trace.abs() < 1e-12);
        assert!(chk.res_contract_a.abs() < 1e-12);
        assert!(chk.res_contract_a_sq.abs() < 1e-12);
    }

    #[test]
    fn derivative_identities_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(2..=5usize);
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let l = rng.gen_range(1..=n);
            let chk = elementary_derivative_checks(&a, l).unwrap();
            for r in [chk.res_trace, chk.res_contract_a, chk.res_contract_a_sq] {
                assert!(r.abs() < 1e-10, "n={n} l={l} residual {r}");
            }
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(matches!(elementary_derivative_checks(&a, 1), Err(Error::AsymmetricMatrix(_))));
    }

    #[test]
    fn cone_examples() {
        assert!(in_garding_cone(&[1.0, 2.0, 3.0], 3).unwrap());
        // E_3 = -25 < 0
        assert!(!in_garding_cone(&[-1.0, 5.0, 5.0], 3).unwrap());
        assert!((normalized_elementary(&[-1.0, 5.0, 5.0], 3) + 25.0).abs() < 1e-12);
        let gap = newton_maclaurin_gap(&[1.0, 2.0, 3.0], 1, 1).unwrap();
        assert!((gap - 1.0 / 3.0).abs() < 1e-14); // E_1^2 - E_2 = 4 - 11/3
        assert!(newton_maclaurin_gap(&[1.0, 2.0], 2, 2).is_err());
    }

    #[test]
    fn maclaurin_on_cone_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut tested = 0usize;
        while tested < 10_000 {
            let n = rng.gen_range(2..=6usize);
            let m = rng.gen_range(1..=n - 1);
            let kappa: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.25..1.5)).collect();
            if !in_garding_cone(&kappa, m).unwrap() {
                continue;
            }
            let l = rng.gen_range(1..=m);
            let gap = newton_maclaurin_gap(&kappa, l, m).unwrap();
            assert!(gap >= crate::tol::MACLAURIN_FLOOR, "gap {gap} kappa {kappa:?}");
            let spread = kappa.iter().cloned().fold(f64::MIN, f64::max)
                - kappa.iter().cloned().fold(f64::MAX, f64::min);
            if gap < 1e-12 {
                assert!(spread < 1e-12, "tiny gap for spread {spread}");
            }
            tested += 1;
        }
        // equality at constant vectors
        for c in [0.3, 1.0, 2.7] {
            let gap = newton_maclaurin_gap(&[c, c, c, c], 2, 3).unwrap();
            assert!(gap.abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_2x2_against_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (a, b) = (rng.gen_range(0.5..2.0), rng.gen_range(-0.4..0.4));
            let g = (a, b, rng.gen_range(0.5..2.0));
            let h = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (k1, k2) = generalized_eigen_2x2(h, g).unwrap();
            // characteristic check: det(h - k g) = 0 for both
            for k in [k1, k2] {
                let det = (h.0 - k * g.0) * (h.2 - k * g.2) - (h.1 - k * g.1) * (h.1 - k * g.1);
                let scale = (h.0.abs() + h.2.abs() + k.abs() * (g.0 + g.2)).powi(2);
                assert!(det.abs() < 1e-10 * scale.max(1.0), "det {det}");
            }
            assert!(k1 <= k2);
        }
    }

    proptest! {
        #[test]
        fn recursion_matches_enumeration(
            kappa in proptest::collection::vec(-3.0f64..3.0, 1..=6),
            l in 0usize..=7,
        ) {
            let a = normalized_elementary(&kappa, l);
            let b = enumeration_oracle(&kappa, l);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn permutation_invariant(
            kappa in proptest::collection::vec(-2.0f64..2.0, 2..=6),
            l in 1usize..=6,
        ) {
            let mut shuffled = kappa.clone();
            shuffled.reverse();
            let a = normalized_elementary(&kappa, l);
            let b = normalized_elementary(&shuffled, l);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn homogeneous_degree_l(
            kappa in proptest::collection::vec(-2.0f64..2.0, 2..=6),
            c in 0.1f64..4.0,
            l in 1usize..=6,
        ) {
            let scaled: Vec<f64> = kappa.iter().map(|k| c * k).collect();
            let a = normalized_elementary(&scaled, l);
            let b = c.powi(l as i32) * normalized_elementary(&kappa, l);
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }
}
