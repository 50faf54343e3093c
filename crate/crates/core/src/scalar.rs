//! Exact coefficient arithmetic.
//!
//! [`GaussRat`] is a Gaussian rational `a + b i` with `a, b ∈ ℚ`.
//! [`QScalar`] is a Laurent polynomial in a formal `q` with Gaussian-rational
//! coefficients. Everything here is exact; [`QScalar::eval`] is the only
//! (explicitly lossy) bridge to floating point.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;
pub type GaussRat = Complex<BigRational>;

pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn gauss(re: Rational, im: Rational) -> GaussRat {
    Complex::new(re, im)
}

pub fn gauss_int(re: i64, im: i64) -> GaussRat {
    Complex::new(rat(re, 1), rat(im, 1))
}

pub fn gauss_real(r: Rational) -> GaussRat {
    Complex::new(r, Rational::zero())
}

pub fn gauss_i() -> GaussRat {
    gauss_int(0, 1)
}

pub fn gauss_to_c64(z: &GaussRat) -> Complex64 {
    Complex64::new(
        z.re.to_f64().unwrap_or(f64::NAN),
        z.im.to_f64().unwrap_or(f64::NAN),
    )
}

fn rat_parts(r: &Rational) -> Result<(i64, i64)> {
    let n = r
        .numer()
        .to_i64()
        .ok_or_else(|| Error::CoefficientOverflow(r.to_string()))?;
    let d = r
        .denom()
        .to_i64()
        .ok_or_else(|| Error::CoefficientOverflow(r.to_string()))?;
    Ok((n, d))
}

/// Formats a Gaussian rational compactly: `3/2`, `-i`, `(1/2 + 2i)`.
pub fn fmt_gauss(z: &GaussRat) -> String {
    let re = &z.re;
    let im = &z.im;
    let im_str = |im: &Rational| -> String {
        if im.is_one() {
            "i".to_string()
        } else if (-im).is_one() {
            "-i".to_string()
        } else {
            format!("{im}i")
        }
    };
    match (re.is_zero(), im.is_zero()) {
        (true, true) => "0".to_string(),
        (false, true) => re.to_string(),
        (true, false) => im_str(im),
        (false, false) => {
            if im.is_negative() {
                format!("({} - {})", re, im_str(&-im))
            } else {
                format!("({} + {})", re, im_str(im))
            }
        }
    }
}

/// Laurent polynomial in formal `q` with Gaussian-rational coefficients.
///
/// Invariant: no stored coefficient is zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct QScalar {
    terms: BTreeMap<i32, GaussRat>,
}

impl QScalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(gauss_int(1, 0))
    }

    pub fn constant(c: GaussRat) -> Self {
        Self::monomial(0, c)
    }

    pub fn from_int(n: i64) -> Self {
        Self::constant(gauss_int(n, 0))
    }

    /// `q^k`.
    pub fn q_pow(k: i32) -> Self {
        Self::monomial(k, gauss_int(1, 0))
    }

    /// `c · q^k`.
    pub fn monomial(k: i32, c: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(k, c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &GaussRat)> {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    pub fn coeff(&self, k: i32) -> GaussRat {
        self.terms.get(&k).cloned().unwrap_or_else(GaussRat::zero)
    }

    fn add_term(&mut self, k: i32, c: GaussRat) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c);
            }
        }
    }

    pub fn scale(&self, c: &GaussRat) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    /// Multiplies by `q^k`.
    pub fn shift(&self, k: i32) -> Self {
        Self {
            terms: self.terms.iter().map(|(p, v)| (p + k, v.clone())).collect(),
        }
    }

    /// Value at `q = 1` (exact).
    pub fn at_q_one(&self) -> GaussRat {
        self.terms.values().fold(GaussRat::zero(), |acc, c| acc + c)
    }

    /// Lossy evaluation at a numeric `q`.
    pub fn eval(&self, q: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, c)| gauss_to_c64(c) * q.powi(*k))
            .sum()
    }

    /// Lossy evaluation at `q = e^{iθ}`.
    pub fn eval_theta(&self, theta: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, c)| gauss_to_c64(c) * Complex64::from_polar(1.0, theta * f64::from(*k)))
            .sum()
    }

    /// `[q_power, re_num, re_den, im_num, im_den]` rows, ascending in `q_power`.
    pub fn to_rows(&self) -> Result<Vec<[i64; 5]>> {
        self.terms
            .iter()
            .map(|(k, c)| {
                let (rn, rd) = rat_parts(&c.re)?;
                let (inum, iden) = rat_parts(&c.im)?;
                Ok([i64::from(*k), rn, rd, inum, iden])
            })
            .collect()
    }

    pub fn from_rows(rows: &[[i64; 5]]) -> Result<Self> {
        let mut out = Self::zero();
        for row in rows {
            if row[2] == 0 || row[4] == 0 {
                return Err(Error::Parse(format!("zero denominator in {row:?}")));
            }
            let k = i32::try_from(row[0])
                .map_err(|_| Error::Parse(format!("q power {} out of range", row[0])))?;
            out.add_term(k, gauss(rat(row[1], row[2]), rat(row[3], row[4])));
        }
        Ok(out)
    }
}

impl fmt::Display for QScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let cs = fmt_gauss(c);
                match *k {
                    0 => cs,
                    1 if c.is_one() => "q".to_string(),
                    _ if c.is_one() => format!("q^{k}"),
                    1 => format!("{cs} q"),
                    _ => format!("{cs} q^{k}"),
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Add<&QScalar> for &QScalar {
    type Output = QScalar;
    fn add(self, rhs: &QScalar) -> QScalar {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for QScalar {
    type Output = QScalar;
    fn add(mut self, rhs: QScalar) -> QScalar {
        self += &rhs;
        self
    }
}

impl AddAssign<&QScalar> for QScalar {
    fn add_assign(&mut self, rhs: &QScalar) {
        for (k, c) in &rhs.terms {
            self.add_term(*k, c.clone());
        }
    }
}

impl Neg for &QScalar {
    type Output = QScalar;
    fn neg(self) -> QScalar {
        QScalar {
            terms: self.terms.iter().map(|(k, c)| (*k, -c.clone())).collect(),
        }
    }
}

impl Neg for QScalar {
    type Output = QScalar;
    fn neg(self) -> QScalar {
        -&self
    }
}

impl Sub<&QScalar> for &QScalar {
    type Output = QScalar;
    fn sub(self, rhs: &QScalar) -> QScalar {
        self + &(-rhs)
    }
}

impl Sub for QScalar {
    type Output = QScalar;
    fn sub(self, rhs: QScalar) -> QScalar {
        &self - &rhs
    }
}

impl Mul<&QScalar> for &QScalar {
    type Output = QScalar;
    fn mul(self, rhs: &QScalar) -> QScalar {
        let mut out = QScalar::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                out.add_term(ka + kb, ca * cb);
            }
        }
        out
    }
}

impl Mul for QScalar {
    type Output = QScalar;
    fn mul(self, rhs: QScalar) -> QScalar {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let a = QScalar::q_pow(2) + QScalar::one();
        let b = QScalar::q_pow(2);
        let d = &a - &b;
        assert_eq!(d, QScalar::one());
        assert_eq!(d.terms().count(), 1);
        assert!((&a - &a).is_zero());
    }

    #[test]
    fn laurent_product() {
        // (q - q^-1)(q + q^-1) = q^2 - q^-2
        let a = QScalar::q_pow(1) - QScalar::q_pow(-1);
        let b = QScalar::q_pow(1) + QScalar::q_pow(-1);
        assert_eq!(&a * &b, QScalar::q_pow(2) - QScalar::q_pow(-2));
    }

    #[test]
    fn q_one_and_numeric_eval() {
        let a = QScalar::monomial(2, gauss_int(3, 1)) + QScalar::monomial(-1, gauss_int(0, -2));
        assert_eq!(a.at_q_one(), gauss_int(3, -1));
        let theta = 0.3;
        let q = Complex64::from_polar(1.0, theta);
        assert!((a.eval(q) - a.eval_theta(theta)).norm() < 1e-14);
    }

    #[test]
    fn rows_round_trip() {
        let a = QScalar::monomial(-3, gauss(rat(1, 2), rat(-7, 3))) + QScalar::q_pow(4);
        let rows = a.to_rows().unwrap();
        assert_eq!(rows[0], [-3, 1, 2, -7, 3]);
        assert_eq!(QScalar::from_rows(&rows).unwrap(), a);
    }

    #[test]
    fn display() {
        let a = QScalar::one() + QScalar::monomial(2, gauss_int(-1, 0)) + QScalar::q_pow(1);
        assert_eq!(a.to_string(), "1 + q + -1 q^2");
        assert_eq!(fmt_gauss(&gauss(rat(1, 2), rat(-1, 1))), "(1/2 - i)");
    }
}
