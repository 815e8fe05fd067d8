//! Shared numerics: affine-step operators via the augmented matrix
//! exponential, and a balanced Faddeev-LeVerrier resolvent expansion.

use crate::params::{Mat7, Vec7};
use nalgebra::{Complex, SMatrix};

pub type Mat8 = SMatrix<f64, 8, 8>;
pub type C64 = Complex<f64>;

/// Exact step operator for dx/dt = A·x + g over an interval dt:
/// returns (F, c) with x(dt) = F·x(0) + c, computed as the exponential of the
/// augmented system [[A, g], [0, 0]]. Valid for singular A (no inverse used).
pub fn affine_step(a: &Mat7, g: &Vec7, dt: f64) -> (Mat7, Vec7) {
    let mut aug = Mat8::zeros();
    for r in 0..7 {
        for c in 0..7 {
            aug[(r, c)] = a[(r, c)] * dt;
        }
        aug[(r, 7)] = g[r] * dt;
    }
    let e = aug.exp();
    let mut f = Mat7::zeros();
    let mut cvec = Vec7::zeros();
    for r in 0..7 {
        for c in 0..7 {
            f[(r, c)] = e[(r, c)];
        }
        cvec[r] = e[(r, 7)];
    }
    (f, cvec)
}

/// Characteristic polynomial and resolvent numerator matrices of a 7x7 state
/// matrix by the Faddeev-LeVerrier recursion.
///
/// Returns (den, mats): den[k] multiplies s^k (ascending, den[7] = 1) and
/// (sI - A)^{-1} = sum_j mats[j]·s^{6-j} / den(s) for j = 0..6.
///
/// At n = 7 the recursion loses precision when state magnitudes are wildly
/// scaled, so callers should pass a similarity-balanced matrix; see
/// `balance_similarity`.
pub fn faddeev_leverrier(a: &Mat7) -> ([f64; 8], [Mat7; 7]) {
    let n = 7usize;
    let mut den = [0.0f64; 8];
    den[n] = 1.0;
    let mut mats = [Mat7::zeros(); 7];
    let mut m = Mat7::identity();
    for k in 1..=n {
        mats[k - 1] = m;
        let am = a * m;
        let ck = -am.trace() / (k as f64);
        den[n - k] = ck;
        m = am + Mat7::identity() * ck;
    }
    (den, mats)
}

/// Similarity-balance a state matrix with the energy weights w (diagonal
/// scaling S = W^{1/2} A W^{-1/2}), together with the transformed input
/// column and output row. Transfer functions are invariant under the
/// transformation while the recursion's conditioning improves by orders.
pub fn balance_similarity(
    a: &Mat7,
    b: &Vec7,
    c: &nalgebra::SMatrix<f64, 1, 7>,
    w: &Vec7,
) -> (Mat7, Vec7, nalgebra::SMatrix<f64, 1, 7>) {
    let s: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut ab = Mat7::zeros();
    for r in 0..7 {
        for cc in 0..7 {
            ab[(r, cc)] = a[(r, cc)] * s[r] / s[cc];
        }
    }
    let mut bb = Vec7::zeros();
    let mut cb = nalgebra::SMatrix::<f64, 1, 7>::zeros();
    for r in 0..7 {
        bb[r] = b[r] * s[r];
        cb[(0, r)] = c[(0, r)] / s[r];
    }
    (ab, bb, cb)
}

/// Evaluate a real-coefficient polynomial (ascending order) at complex s.
pub fn polyval(coeffs: &[f64], s: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * s + C64::new(c, 0.0);
    }
    acc
}

/// det(sI - A) evaluated directly through a complex LU factorization;
/// independent cross-check for the recursion above.
pub fn resolvent_det(a: &Mat7, s: C64) -> C64 {
    let mut m = SMatrix::<C64, 7, 7>::zeros();
    for r in 0..7 {
        for c in 0..7 {
            m[(r, c)] = C64::new(-a[(r, c)], 0.0);
        }
        m[(r, r)] += s;
    }
    m.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_step_pure_integrator() {
        let a = Mat7::zeros();
        let g = Vec7::from_element(2.0);
        let (f, c) = affine_step(&a, &g, 0.25);
        assert!((f - Mat7::identity()).norm() < 1e-14);
        assert!((c - Vec7::from_element(0.5)).norm() < 1e-14);
    }

    #[test]
    fn affine_step_scalar_decay() {
        // decoupled rows: dx/dt = -x + 1 has x(t) = 1 + (x0-1)e^{-t}
        let a = Mat7::identity() * -1.0;
        let g = Vec7::from_element(1.0);
        let (f, c) = affine_step(&a, &g, 0.5);
        let x0 = Vec7::from_element(3.0);
        let x = f * x0 + c;
        let expect = 1.0 + 2.0 * (-0.5f64).exp();
        for k in 0..7 {
            assert!((x[k] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn leverrier_matches_direct_determinant() {
        // fixed, well-scaled test matrix
        let mut a = Mat7::zeros();
        let mut seed = 1234u64;
        for r in 0..7 {
            for c in 0..7 {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                a[(r, c)] = ((seed >> 33) as f64) / (u32::MAX as f64) - 0.5;
            }
        }
        let (den, _) = faddeev_leverrier(&a);
        for k in 0..5 {
            let s = C64::new(0.3 + 0.2 * k as f64, 0.7 - 0.1 * k as f64);
            let lhs = polyval(&den, s);
            let rhs = resolvent_det(&a, s);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1e-30));
        }
    }

    #[test]
    fn resolvent_numerators_reconstruct_inverse() {
        let mut a = Mat7::zeros();
        for k in 0..7 {
            a[(k, k)] = -(k as f64 + 1.0);
            if k + 1 < 7 {
                a[(k, k + 1)] = 0.5;
            }
        }
        let (den, mats) = faddeev_leverrier(&a);
        let s = C64::new(0.9, 1.3);
        // numerator matrix at s, cell (0,6)
        let mut num = C64::new(0.0, 0.0);
        for (j, m) in mats.iter().enumerate() {
            num += C64::new(m[(0, 6)], 0.0) * s.powf(6.0 - j as f64);
        }
        let mut si_a = SMatrix::<C64, 7, 7>::zeros();
        for r in 0..7 {
            for c in 0..7 {
                si_a[(r, c)] = C64::new(-a[(r, c)], 0.0);
            }
            si_a[(r, r)] += s;
        }
        let inv = si_a.try_inverse().unwrap();
        let expect = inv[(0, 6)];
        let got = num / polyval(&den, s);
        assert!((got - expect).norm() < 1e-12 * expect.norm().max(1e-30));
    }
}
