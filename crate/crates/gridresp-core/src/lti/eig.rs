//! Eigenvalues and right eigenvectors of a real nonsymmetric matrix.
//!
//! Route: real Schur form A = Q·T·Qᵀ, then a unitary 2×2 rotation per
//! complex-conjugate block turns T into a genuinely upper-triangular complex
//! matrix, and back-substitution on that triangle yields the eigenvectors.
//! Output order is deterministic: eigenvalues sorted by (real part, imag
//! part), columns of V permuted to match.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SolveError;

pub fn complex_eigen(
    a: &DMatrix<f64>,
) -> Result<(Vec<Complex64>, DMatrix<Complex64>), SolveError> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    if n == 1 {
        return Ok((
            alloc::vec![Complex64::new(a[(0, 0)], 0.0)],
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        ));
    }

    let schur = a.clone().try_schur(f64::EPSILON, 0).ok_or(SolveError::SchurFailed)?;
    let (q, t) = schur.unpack();

    let mut tc = t.map(|x| Complex64::new(x, 0.0));
    let mut qc = q.map(|x| Complex64::new(x, 0.0));

    // Triangularize each 2×2 block of the quasi-triangular T with a unitary
    // similarity confined to its two rows/columns. Blocks are disjoint, so
    // the rotations commute and Q stays unitary.
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)] != 0.0 {
            let (a11, a12, a21, a22) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_tr = 0.5 * (a11 + a22);
            let det = a11 * a22 - a12 * a21;
            // A genuine Schur 2×2 block has complex eigenvalues ⇒ disc < 0;
            // clamp guards against roundoff on the boundary.
            let disc = half_tr * half_tr - det;
            let mu = (-disc).max(0.0).sqrt();
            let lam = Complex64::new(half_tr, mu);

            // Unit eigenvector of the block for λ: (λ − a22, a21), a21 ≠ 0.
            let v1 = lam - a22;
            let v2 = Complex64::new(a21, 0.0);
            let nrm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
            let u11 = v1 / nrm;
            let u21 = v2 / nrm;
            // Second column completes the unitary 2×2.
            let u12 = -u21.conj();
            let u22 = u11.conj();

            // T ← U*·T·U on the affected rows/columns, Q ← Q·U.
            for r in 0..(k + 2) {
                let c0 = tc[(r, k)];
                let c1 = tc[(r, k + 1)];
                tc[(r, k)] = c0 * u11 + c1 * u21;
                tc[(r, k + 1)] = c0 * u12 + c1 * u22;
            }
            for c in k..n {
                let r0 = tc[(k, c)];
                let r1 = tc[(k + 1, c)];
                tc[(k, c)] = u11.conj() * r0 + u21.conj() * r1;
                tc[(k + 1, c)] = u12.conj() * r0 + u22.conj() * r1;
            }
            for r in 0..n {
                let c0 = qc[(r, k)];
                let c1 = qc[(r, k + 1)];
                qc[(r, k)] = c0 * u11 + c1 * u21;
                qc[(r, k + 1)] = c0 * u12 + c1 * u22;
            }
            tc[(k + 1, k)] = Complex64::new(0.0, 0.0);
            tc[(k, k)] = lam;
            tc[(k + 1, k + 1)] = lam.conj();
            k += 2;
        } else {
            k += 1;
        }
    }

    let lambdas: Vec<Complex64> = (0..n).map(|i| tc[(i, i)]).collect();

    // Back-substitution for eigenvectors of the triangle: column j solves
    // (T − λ_j I) y = 0 with y_j = 1. Ties/near-degenerate denominators get
    // floored to keep the solve finite; a defective matrix then simply
    // produces an ill-conditioned V that the caller detects.
    let tnorm = tc.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let smallnum = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE * 1e16);
    // Transposed copy so the inner accumulation walks contiguous memory.
    let tct = tc.transpose();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        y[(j, j)] = Complex64::new(1.0, 0.0);
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for m in (i + 1)..=j {
                s += tct[(m, i)] * y[(m, j)];
            }
            let mut den = tc[(i, i)] - lambdas[j];
            if den.norm() < smallnum {
                den = Complex64::new(smallnum, 0.0);
            }
            y[(i, j)] = -s / den;
        }
        let norm = y.column(j).norm();
        for i in 0..=j {
            y[(i, j)] /= norm;
        }
    }

    let v = qc * y;

    // Deterministic ordering.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| {
        lambdas[i]
            .re
            .total_cmp(&lambdas[j].re)
            .then(lambdas[i].im.total_cmp(&lambdas[j].im))
    });
    let sorted_lambdas: Vec<Complex64> = perm.iter().map(|&i| lambdas[i]).collect();
    let sorted_v = DMatrix::from_fn(n, n, |r, c| v[(r, perm[c])]);

    Ok((sorted_lambdas, sorted_v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn residual(a: &DMatrix<f64>, lambdas: &[Complex64], v: &DMatrix<Complex64>) -> f64 {
        let ac = a.map(|x| Complex64::new(x, 0.0));
        let av = &ac * v;
        let mut worst = 0.0f64;
        for j in 0..a.nrows() {
            let col: DVector<Complex64> =
                DVector::from_fn(a.nrows(), |i, _| av[(i, j)] - lambdas[j] * v[(i, j)]);
            worst = worst.max(col.norm());
        }
        worst
    }

    #[test]
    fn real_distinct_spectrum() {
        // Companion matrix of (x−1)(x−2)(x−3) = x³ − 6x² + 11x − 6.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 6.0, -11.0, 6.0],
        );
        let (l, v) = complex_eigen(&a).unwrap();
        let re: Vec<f64> = l.iter().map(|c| c.re).collect();
        assert!((re[0] - 1.0).abs() < 1e-10);
        assert!((re[1] - 2.0).abs() < 1e-10);
        assert!((re[2] - 3.0).abs() < 1e-10);
        assert!(l.iter().all(|c| c.im.abs() < 1e-12));
        assert!(residual(&a, &l, &v) < 1e-10);
    }

    #[test]
    fn complex_pair_spectrum() {
        // Damped oscillator: λ = −0.1 ± 2i.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.01, -0.2]);
        let (l, v) = complex_eigen(&a).unwrap();
        assert!((l[0].re + 0.1).abs() < 1e-12);
        assert!((l[0].im + 2.0).abs() < 1e-12, "sorted pair puts −2i first, got {}", l[0]);
        assert!((l[1].im - 2.0).abs() < 1e-12);
        assert!(residual(&a, &l, &v) < 1e-10);
    }

    #[test]
    fn mixed_spectrum_residual_small() {
        // Deterministic pseudo-random 8×8 shifted to be stable-ish; mixes
        // real and complex modes.
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = DMatrix::from_fn(8, 8, |_, _| next());
        for i in 0..8 {
            a[(i, i)] -= 1.5;
        }
        let (l, v) = complex_eigen(&a).unwrap();
        assert!(residual(&a, &l, &v) < 1e-9);
        // Conjugate symmetry of the real spectrum.
        let sum_im: f64 = l.iter().map(|c| c.im).sum();
        assert!(sum_im.abs() < 1e-10);
    }

    #[test]
    fn ordering_is_by_real_then_imag() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let (l, _) = complex_eigen(&a).unwrap();
        assert!(l[0].im < l[1].im);
        assert!((l[0].re - l[1].re).abs() < 1e-14);
    }
}
