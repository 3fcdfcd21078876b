//! Angular momentum coupling coefficients and spherical-tensor matrix elements.
//!
//! All angular momenta are carried as doubled integers ([`HalfInt`]) so that
//! integer and half-integer spins are represented exactly. The Wigner 3j
//! symbol is evaluated from the Racah formula with exact big-rational
//! intermediates; selection-rule zeros are exact.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use once_cell::sync::Lazy;

/// An angular momentum magnitude or projection stored as `2j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };

    /// Construct from a doubled value, e.g. `from_twice(3)` is j = 3/2.
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    /// Construct an integer angular momentum.
    pub const fn from_int(n: i32) -> Self {
        HalfInt { twice: 2 * n }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// Number of projections `2j + 1` for a magnitude.
    pub fn multiplicity(self) -> usize {
        (self.twice + 1) as usize
    }

    /// Projections `-j, -j+1, ..., +j` in ascending order.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j2 = self.twice;
        (-j2..=j2).step_by(2).map(HalfInt::from_twice)
    }

    /// Whether `m` is a valid projection of this magnitude.
    pub fn admits(self, m: HalfInt) -> bool {
        m.twice.abs() <= self.twice && (self.twice - m.twice) % 2 == 0
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt { twice: -self.twice }
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

static FACTORIALS: Lazy<Mutex<Vec<BigInt>>> = Lazy::new(|| Mutex::new(vec![BigInt::from(1)]));

fn factorial(n: i32) -> BigInt {
    assert!(n >= 0, "factorial of negative argument");
    let n = n as usize;
    let mut table = FACTORIALS.lock().unwrap();
    while table.len() <= n {
        let next = table.last().unwrap() * BigInt::from(table.len());
        table.push(next);
    }
    table[n].clone()
}

/// Convert a big rational to f64 without overflowing on large factorials.
fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if r.is_zero() {
        return 0.0;
    }
    // shift numerator and denominator down to <= 53 bits each, then divide
    let num = r.numer();
    let den = r.denom();
    let shift_n = (num.bits() as i64 - 53).max(0);
    let shift_d = (den.bits() as i64 - 53).max(0);
    let nf = (num >> shift_n).to_f64().unwrap();
    let df = (den >> shift_d).to_f64().unwrap();
    (nf / df) * 2f64.powi((shift_n - shift_d) as i32)
}

fn triangle_ok(t1: i32, t2: i32, t3: i32) -> bool {
    t3 <= t1 + t2 && t1 <= t2 + t3 && t2 <= t3 + t1 && (t1 + t2 + t3) % 2 == 0
}

type Key3j = (i32, i32, i32, i32, i32, i32);
static CACHE_3J: Lazy<Mutex<HashMap<Key3j, f64>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3).
///
/// Out-of-domain inputs (triangle violation, m1+m2+m3 != 0, |m| > j or
/// mismatched parity) yield 0 rather than an error.
pub fn wigner_3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> f64 {
    let (tj1, tj2, tj3) = (j1.twice(), j2.twice(), j3.twice());
    let (tm1, tm2, tm3) = (m1.twice(), m2.twice(), m3.twice());

    if tj1 < 0 || tj2 < 0 || tj3 < 0 {
        return 0.0;
    }
    if !j1.admits(m1) || !j2.admits(m2) || !j3.admits(m3) {
        return 0.0;
    }
    if tm1 + tm2 + tm3 != 0 || !triangle_ok(tj1, tj2, tj3) {
        return 0.0;
    }

    let key = (tj1, tj2, tj3, tm1, tm2, tm3);
    if let Some(&v) = CACHE_3J.lock().unwrap().get(&key) {
        return v;
    }

    // Integer combinations entering the Racah formula.
    let a1 = (tj1 + tj2 - tj3) / 2;
    let a2 = (tj1 - tj2 + tj3) / 2;
    let a3 = (-tj1 + tj2 + tj3) / 2;
    let jp1 = (tj1 + tj2 + tj3) / 2 + 1;

    let j1pm1 = (tj1 + tm1) / 2;
    let j1mm1 = (tj1 - tm1) / 2;
    let j2pm2 = (tj2 + tm2) / 2;
    let j2mm2 = (tj2 - tm2) / 2;
    let j3pm3 = (tj3 + tm3) / 2;
    let j3mm3 = (tj3 - tm3) / 2;

    let k_min = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let k_max = a1.min(j1mm1).min(j2pm2);

    let mut series = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(a1 - k)
            * factorial(j1mm1 - k)
            * factorial(j2pm2 - k)
            * factorial((tj3 - tj2 + tm1) / 2 + k)
            * factorial((tj3 - tj1 - tm2) / 2 + k);
        let term = BigRational::new(BigInt::from(if k % 2 == 0 { 1 } else { -1 }), denom);
        series += term;
    }
    if series.is_zero() {
        CACHE_3J.lock().unwrap().insert(key, 0.0);
        return 0.0;
    }

    let radicand = BigRational::new(
        factorial(a1) * factorial(a2) * factorial(a3) * factorial(j1pm1) * factorial(j1mm1)
            * factorial(j2pm2) * factorial(j2mm2) * factorial(j3pm3) * factorial(j3mm3),
        factorial(jp1),
    );

    // phase (-1)^(j1 - j2 - m3); the exponent is an integer whenever the
    // selection rules above are satisfied
    let phase_exp = (tj1 - tj2 - tm3) / 2;
    let mut sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    if series.is_negative() {
        sign = -sign;
    }

    let value = sign * rational_to_f64(&(radicand * (&series * &series))).sqrt();
    CACHE_3J.lock().unwrap().insert(key, value);
    value
}

/// Reduced matrix element <J'||C_k||J> of the modified spherical harmonic
/// for integer rotational angular momenta:
/// `(-1)^J' sqrt((2J+1)(2J'+1)) (J' k J; 0 0 0)`.
pub fn reduced_c(jp: i32, k: i32, j: i32) -> f64 {
    let phase = if jp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase
        * (((2 * j + 1) * (2 * jp + 1)) as f64).sqrt()
        * wigner_3j(
            HalfInt::from_int(jp),
            HalfInt::from_int(k),
            HalfInt::from_int(j),
            HalfInt::ZERO,
            HalfInt::ZERO,
            HalfInt::ZERO,
        )
}

/// Matrix element <J' M'|C^k_q|J M> of the modified spherical harmonic.
pub fn ck_element(jp: i32, mp: i32, k: i32, q: i32, j: i32, m: i32) -> f64 {
    if mp != m + q {
        return 0.0;
    }
    let phase = if mp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase
        * wigner_3j(
            HalfInt::from_int(jp),
            HalfInt::from_int(k),
            HalfInt::from_int(j),
            HalfInt::from_int(-mp),
            HalfInt::from_int(q),
            HalfInt::from_int(m),
        )
        * reduced_c(jp, k, j)
}

/// Matrix element <I m'|T2_q(I,I)|I m> of the rank-2 tensor built from a
/// spin with itself, normalized so that T2_0 = (3 Iz^2 - I.I)/sqrt(6).
pub fn t2_spin_element(i: HalfInt, mi_p: HalfInt, mi: HalfInt, q: i32) -> f64 {
    if !i.admits(mi) || !i.admits(mi_p) {
        return 0.0;
    }
    if mi_p.twice() != mi.twice() + 2 * q {
        return 0.0;
    }
    let ival = i.value();
    let m = mi.value();
    let ii = ival * (ival + 1.0);
    // ladder factor sqrt(I(I+1) - m(m+/-1))
    let c_up = |m: f64| (ii - m * (m + 1.0)).max(0.0).sqrt();
    let c_dn = |m: f64| (ii - m * (m - 1.0)).max(0.0).sqrt();
    match q {
        0 => (3.0 * m * m - ii) / 6f64.sqrt(),
        1 => -(2.0 * m + 1.0) / 2.0 * c_up(m),
        -1 => (2.0 * m - 1.0) / 2.0 * c_dn(m),
        2 => c_up(m) * c_up(m + 1.0) / 2.0,
        -2 => c_dn(m) * c_dn(m - 1.0) / 2.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    /// Brute-force Racah sum in plain floating point, coded independently of
    /// the production path.
    fn wigner_3j_oracle(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> f64 {
        fn fact(n: f64) -> f64 {
            let n = n.round() as i64;
            (1..=n).map(|k| k as f64).product()
        }
        if (m1 + m2 + m3).abs() > 1e-9 {
            return 0.0;
        }
        if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
            return 0.0;
        }
        let pref = (fact(j1 + j2 - j3) * fact(j1 - j2 + j3) * fact(-j1 + j2 + j3)
            / fact(j1 + j2 + j3 + 1.0)
            * fact(j1 + m1)
            * fact(j1 - m1)
            * fact(j2 + m2)
            * fact(j2 - m2)
            * fact(j3 + m3)
            * fact(j3 - m3))
        .sqrt();
        let kmin = 0f64.max(j2 - j3 - m1).max(j1 - j3 + m2);
        let kmax = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
        let mut s = 0.0;
        let mut k = kmin;
        while k <= kmax + 1e-9 {
            s += (-1f64).powf(k)
                / (fact(k)
                    * fact(j1 + j2 - j3 - k)
                    * fact(j1 - m1 - k)
                    * fact(j2 + m2 - k)
                    * fact(j3 - j2 + m1 + k)
                    * fact(j3 - j1 - m2 + k));
            k += 1.0;
        }
        (-1f64).powf(j1 - j2 - m3) * pref * s
    }

    #[test]
    fn trivial_values() {
        assert_relative_eq!(
            wigner_3j(h(0), h(0), h(0), h(0), h(0), h(0)),
            1.0,
            max_relative = 1e-14
        );
        // (1 1 0; 1 -1 0) = 1/sqrt(3)
        assert_relative_eq!(
            wigner_3j(h(2), h(2), h(0), h(2), h(-2), h(0)),
            1.0 / 3f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn racah_oracle_values() {
        // (1 1 2; 0 0 0) = sqrt(2/15)
        let v = wigner_3j(h(2), h(2), h(4), h(0), h(0), h(0));
        assert_relative_eq!(v, wigner_3j_oracle(1.0, 1.0, 2.0, 0.0, 0.0, 0.0), max_relative = 1e-12);
        assert_relative_eq!(v, (2.0f64 / 15.0).sqrt(), max_relative = 1e-12);

        for (j1, j2, j3, m1, m2, m3) in [
            (2.0, 1.0, 1.0, -1.0, 1.0, 0.0),
            (2.5, 1.5, 1.0, 0.5, 0.5, -1.0),
            (3.0, 2.0, 2.0, 1.0, -2.0, 1.0),
            (6.0, 4.0, 2.0, 2.0, -1.0, -1.0),
        ] {
            let v = wigner_3j(
                h((2.0 * j1) as i32),
                h((2.0 * j2) as i32),
                h((2.0 * j3) as i32),
                h((2.0 * m1) as i32),
                h((2.0 * m2) as i32),
                h((2.0 * m3) as i32),
            );
            assert_relative_eq!(
                v,
                wigner_3j_oracle(j1, j2, j3, m1, m2, m3),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn selection_rules_return_zero() {
        assert_eq!(wigner_3j(h(2), h(2), h(8), h(0), h(0), h(0)), 0.0);
        assert_eq!(wigner_3j(h(2), h(2), h(4), h(2), h(0), h(0)), 0.0);
        // |m| > j
        assert_eq!(wigner_3j(h(2), h(2), h(4), h(4), h(-4), h(0)), 0.0);
        // parity mismatch between 2j and 2m
        assert_eq!(wigner_3j(h(3), h(2), h(3), h(2), h(0), h(-2)), 0.0);
        // odd total j with all zero projections
        assert_eq!(wigner_3j(h(2), h(2), h(2), h(0), h(0), h(0)), 0.0);
    }

    #[test]
    fn orthogonality_sum() {
        // sum_{m1,m2} (2j3+1) * 3j^2 = 1 for all valid triples, j <= 6
        for tj1 in 0..=12 {
            for tj2 in 0..=12 {
                for tj3 in (tj1 - tj2).abs()..=(tj1 + tj2).min(12) {
                    if (tj1 + tj2 + tj3) % 2 != 0 {
                        continue;
                    }
                    // sum over (m1, m2) at each fixed m3
                    for tm3 in (-tj3..=tj3).step_by(2) {
                        if (tj3 - tm3) % 2 != 0 {
                            continue;
                        }
                        let mut total = 0.0;
                        for tm1 in (-tj1..=tj1).step_by(2) {
                            let tm2 = -tm1 - tm3;
                            if tm2.abs() > tj2 {
                                continue;
                            }
                            let w = wigner_3j(h(tj1), h(tj2), h(tj3), h(tm1), h(tm2), h(tm3));
                            total += (tj3 + 1) as f64 * w * w;
                        }
                        assert_relative_eq!(total, 1.0, max_relative = 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_symmetry() {
        for tj1 in 0..=12 {
            for tj2 in 0..=tj1 {
                for tj3 in (tj1 - tj2).abs()..=(tj1 + tj2).min(12) {
                    if (tj1 + tj2 + tj3) % 2 != 0 {
                        continue;
                    }
                    for tm1 in (-tj1..=tj1).step_by(4) {
                        for tm2 in (-tj2..=tj2).step_by(4) {
                            let tm3 = -tm1 - tm2;
                            if tm3.abs() > tj3 {
                                continue;
                            }
                            let base = wigner_3j(h(tj1), h(tj2), h(tj3), h(tm1), h(tm2), h(tm3));
                            let even = wigner_3j(h(tj2), h(tj3), h(tj1), h(tm2), h(tm3), h(tm1));
                            let odd = wigner_3j(h(tj2), h(tj1), h(tj3), h(tm2), h(tm1), h(tm3));
                            let phase = if ((tj1 + tj2 + tj3) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                            assert_relative_eq!(even, base, max_relative = 1e-10, epsilon = 1e-13);
                            assert_relative_eq!(odd, phase * base, max_relative = 1e-10, epsilon = 1e-13);
                        }
                    }
                }
            }
        }
    }

    /// Numerical quadrature of the Legendre triple product, independent of
    /// any 3j machinery: <J'0|C^k_0|J0> = sqrt((2J'+1)(2J+1))/2 * Int P_J' P_k P_J.
    fn ck00_quadrature(jp: i32, k: i32, j: i32) -> f64 {
        fn legendre(l: i32, x: f64) -> f64 {
            let mut p0 = 1.0;
            let mut p1 = x;
            if l == 0 {
                return p0;
            }
            for n in 1..l {
                let p2 = ((2 * n + 1) as f64 * x * p1 - n as f64 * p0) / (n + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
        let n = 20_001;
        let h = 2.0 / (n - 1) as f64;
        let f = |x: f64| legendre(jp, x) * legendre(k, x) * legendre(j, x);
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n - 1 {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        let integral = s * h / 3.0;
        (((2 * jp + 1) * (2 * j + 1)) as f64).sqrt() / 2.0 * integral
    }

    #[test]
    fn reduced_c_against_quadrature() {
        // <J'||C_k||J> in magnitude equals |<J'0|C^k_0|J0>| / |3j(J',k,J;0,0,0)|
        for (jp, k, j) in [(1, 1, 0), (2, 2, 0), (2, 1, 1), (3, 2, 1), (4, 1, 3), (5, 2, 3)] {
            let w = wigner_3j(
                h(2 * jp),
                h(2 * k),
                h(2 * j),
                HalfInt::ZERO,
                HalfInt::ZERO,
                HalfInt::ZERO,
            );
            assert!(w != 0.0);
            // Wigner-Eckart at M' = q = M = 0: <J'0|Ck0|J0> = (-1)^J' 3j(J' k J;000) <J'||Ck||J>
            let phase = if jp % 2 == 0 { 1.0 } else { -1.0 };
            let expected = phase * ck00_quadrature(jp, k, j) / w;
            assert_relative_eq!(reduced_c(jp, k, j), expected, max_relative = 1e-8);
        }
        // triangle-forbidden
        assert_eq!(reduced_c(0, 2, 0), 0.0);
        assert_eq!(reduced_c(2, 2, 0).abs() > 0.0, true);
        assert_relative_eq!(
            reduced_c(1, 1, 0).abs(),
            3f64.sqrt() * wigner_3j(h(2), h(2), h(0), h(0), h(0), h(0)).abs(),
            max_relative = 1e-12
        );
    }

    /// Dense spin matrices for the oracle: Ix, Iy (as -i*Iy real trick not
    /// needed; T2 components here are real combinations), built from ladder
    /// operators in the |I m> basis, m ascending.
    fn spin_t2_oracle(i2: i32, q: i32) -> Vec<Vec<f64>> {
        let dim = (i2 + 1) as usize;
        let ival = i2 as f64 / 2.0;
        let ii = ival * (ival + 1.0);
        let m_of = |idx: usize| -ival + idx as f64;
        // ladder matrices: <m+1|I+|m> = sqrt(I(I+1)-m(m+1))
        let mut ip = vec![vec![0.0; dim]; dim];
        let mut im = vec![vec![0.0; dim]; dim];
        let mut iz = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            let m = m_of(a);
            iz[a][a] = m;
            if a + 1 < dim {
                ip[a + 1][a] = (ii - m * (m + 1.0)).sqrt();
                im[a][a + 1] = (ii - (m + 1.0) * m).sqrt();
            }
        }
        let matmul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            let mut c = vec![vec![0.0; dim]; dim];
            for r in 0..dim {
                for s in 0..dim {
                    for t in 0..dim {
                        c[r][s] += a[r][t] * b[t][s];
                    }
                }
            }
            c
        };
        let scale = |a: &Vec<Vec<f64>>, f: f64| {
            a.iter().map(|row| row.iter().map(|x| x * f).collect()).collect::<Vec<Vec<f64>>>()
        };
        let add = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter()
                .zip(b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        match q {
            0 => {
                // (3Iz^2 - I(I+1))/sqrt(6)
                let mut t = matmul(&iz, &iz);
                for r in 0..dim {
                    for s in 0..dim {
                        t[r][s] *= 3.0;
                    }
                    t[r][r] -= ii;
                }
                scale(&t, 1.0 / 6f64.sqrt())
            }
            1 => scale(&add(&matmul(&ip, &iz), &matmul(&iz, &ip)), -0.5),
            -1 => scale(&add(&matmul(&im, &iz), &matmul(&iz, &im)), 0.5),
            2 => scale(&matmul(&ip, &ip), 0.5),
            -2 => scale(&matmul(&im, &im), 0.5),
            _ => panic!("bad q"),
        }
    }

    #[test]
    fn t2_against_spin_matrix_oracle() {
        for i2 in [1, 3, 7] {
            for q in -2..=2 {
                let oracle = spin_t2_oracle(i2, q);
                for (a, mp) in h(i2).projections().enumerate() {
                    for (b, m) in h(i2).projections().enumerate() {
                        assert_relative_eq!(
                            t2_spin_element(h(i2), mp, m, q),
                            oracle[a][b],
                            max_relative = 1e-12,
                            epsilon = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn t2_spin_half_vanishes() {
        for q in -2..=2 {
            for mp in h(1).projections() {
                for m in h(1).projections() {
                    assert_eq!(t2_spin_element(h(1), mp, m, q), 0.0);
                }
            }
        }
    }

    #[test]
    fn t2_specific_values() {
        // I = 3/2, diagonal stretched element: (3*(3/2)^2 - 15/4)/sqrt(6) = 3/sqrt(6)
        assert_relative_eq!(
            t2_spin_element(h(3), h(3), h(3), 0),
            3.0 / 6f64.sqrt(),
            max_relative = 1e-14
        );
        // I = 7/2, q=+2, m=3/2 -> m'=7/2: sqrt(12)*sqrt(7)/2
        assert_relative_eq!(
            t2_spin_element(h(7), h(7), h(3), 2),
            (12f64).sqrt() * 7f64.sqrt() / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn t2_hermiticity() {
        // <m'|T2_q|m> = (-1)^q <m|T2_-q|m'> for a hermitian family
        for i2 in [1, 2, 3, 5, 7] {
            for q in -2..=2i32 {
                let phase = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                for mp in h(i2).projections() {
                    for m in h(i2).projections() {
                        assert_relative_eq!(
                            t2_spin_element(h(i2), mp, m, q),
                            phase * t2_spin_element(h(i2), m, mp, -q),
                            max_relative = 1e-12,
                            epsilon = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn large_j_no_overflow() {
        // factorials beyond f64 range internally; result stays finite and sane
        let v = wigner_3j(h(80), h(80), h(80), h(2), h(-2), h(0));
        assert!(v.is_finite() && v.abs() < 1.0);
        let w = wigner_3j(h(40), h(40), h(40), h(0), h(0), h(0));
        assert!(w.is_finite() && w.abs() > 0.0);
    }
}
