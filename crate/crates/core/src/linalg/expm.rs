//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005). Lower-degree approximants are used when the
//! 1-norm is small enough for them to reach unit roundoff.

use nalgebra::DMatrix;

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each approximant is accurate to double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Returns `e^{M t}`.
pub fn expm(m: &RealMatrix, t: f64) -> Result<RealMatrix> {
    m.ensure_square("expm argument")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time"));
    }
    RealMatrix::from_dmatrix(expm_dense(&(m.as_dmatrix() * t)))
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exponential of a dense square matrix (no finiteness checks on the result).
pub(crate) fn expm_dense(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;

    let low_order = [(THETA3, &PADE3[..]), (THETA5, &PADE5[..]), (THETA7, &PADE7[..]), (THETA9, &PADE9[..])];
    for (theta, coeffs) in low_order {
        if norm <= theta {
            return pade_low(a, &a2, &ident, coeffs);
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let a = a * scale;
    let a2 = &a2 * (scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = &a * (&a6 * &u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * &v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let mut r = solve_pade(&u, &v);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &DMatrix<f64>, a2: &DMatrix<f64>, ident: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    // Even powers split into the odd part U and the even part V.
    let mut odd = ident * b[1];
    let mut even = ident * b[0];
    let mut power = ident.clone();
    let mut k = 2;
    while k < b.len() {
        power = &power * a2;
        even += &power * b[k];
        if k + 1 < b.len() {
            odd += &power * b[k + 1];
        }
        k += 2;
    }
    let u = a * odd;
    solve_pade(&u, &even)
}

/// Solves (V - U) R = (V + U).
fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu()
        .solve(&rhs)
        .expect("Padé denominator is nonsingular for scaled arguments")
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    /// Truncated Taylor series, summed until terms vanish at machine precision.
    /// Only valid for modest norms (used as an independent oracle).
    fn taylor_oracle(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut sum = DMatrix::<f64>::identity(n, n);
        let mut term = sum.clone();
        for k in 1..200 {
            term = &term * m / k as f64;
            sum += &term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    }

    #[test]
    fn zero_generator_gives_identity() {
        let e = expm(&RealMatrix::zeros(2, 2), 7.0).unwrap();
        assert_eq!(e, RealMatrix::identity(2));
    }

    #[test]
    fn rotation_quarter_turn() {
        let m = RealMatrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let e = expm(&m, FRAC_PI_2).unwrap();
        let oracle = taylor_oracle(&(m.as_dmatrix() * FRAC_PI_2));
        let closed = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((e.as_dmatrix() - &closed).amax() < 1e-14);
        assert!((e.as_dmatrix() - &oracle).amax() < 1e-14);
    }

    #[test]
    fn diagonal_exponential() {
        let m = RealMatrix::from_diagonal(&[-1.0, -2.0]).unwrap();
        let e = expm(&m, 1.0).unwrap();
        assert!((e.get(0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e.get(1, 1) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(e.get(0, 1), 0.0);
    }

    #[test]
    fn matches_taylor_across_padé_orders() {
        // Norms chosen to land in each approximant's regime and in the scaled one.
        let base = DMatrix::from_row_slice(
            3,
            3,
            &[0.3, -1.1, 0.4, 0.9, -0.2, 0.7, -0.5, 0.6, 0.1],
        );
        for s in [1e-3, 0.05, 0.3, 1.0, 2.0, 4.0, 9.0] {
            let m = &base * s;
            let got = expm_dense(&m);
            let want = taylor_oracle(&m);
            let err = (&got - &want).amax() / want.amax();
            assert!(err < 1e-13, "scale {s}: rel err {err}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(expm(&RealMatrix::zeros(2, 3), 1.0).is_err());
        assert!(expm(&RealMatrix::identity(2), f64::NAN).is_err());
        assert!(expm(&RealMatrix::identity(2), 1e6).is_err());
    }
}
