//! Symbolic construction of the Hermite–Padé denominators `Q_n` through the
//! generalized Rodrigues formula
//!
//! ```text
//! Q_n = 1/(n!)² · w₂⁻¹ Dⁿ[ w₂ zⁿ w₁⁻¹ Dⁿ[ w₁ zⁿ (1-z)^{2n} ] ]
//! ```
//!
//! with weights `w_k(z) = z^{a_k} (1-z)^a e^{s·z}`, and extraction of the
//! γ-form coefficients `(p_n, q_n)` from
//! `∫₀^∞ x^k ln x e^{-x} dx = k!(H_k - γ)`.

use std::fmt;

use rug::{Integer, Rational};

use crate::error::{Error, Result};

/// Dense polynomial with exact rational coefficients, ascending order.
/// The zero polynomial has no coefficients; otherwise the last is nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RationalPolynomial {
    coeffs: Vec<Rational>,
}

impl RationalPolynomial {
    pub fn zero() -> Self {
        RationalPolynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        RationalPolynomial::from_coeffs(vec![Rational::from(1)])
    }

    pub fn from_coeffs(coeffs: Vec<Rational>) -> Self {
        let mut p = RationalPolynomial { coeffs };
        p.normalize();
        p
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        RationalPolynomial::from_coeffs(coeffs.iter().map(|&c| Rational::from(c)).collect())
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![Rational::new(); k + 1];
        coeffs[k] = Rational::from(1);
        RationalPolynomial { coeffs }
    }

    /// `(1 - z)^k`.
    pub fn one_minus_z_pow(k: usize) -> Self {
        let mut coeffs = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let mut c = Integer::from(Integer::binomial_u(k as u32, j as u32));
            if j % 2 == 1 {
                c = -c;
            }
            coeffs.push(Rational::from(c));
        }
        RationalPolynomial { coeffs }
    }

    fn normalize(&mut self) {
        while self.coeffs.last().is_some_and(|c| *c == 0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + other.coeff(k)).collect();
        RationalPolynomial::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        RationalPolynomial::from_coeffs(self.coeffs.iter().map(|a| Rational::from(a * c)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return RationalPolynomial::zero();
        }
        let mut out = vec![Rational::new(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += Rational::from(a * b);
            }
        }
        RationalPolynomial::from_coeffs(out)
    }

    pub fn derivative(&self) -> Self {
        RationalPolynomial::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| Rational::from(c * k as u32))
                .collect(),
        )
    }

    /// Exact division by `z^k`; fails if any of the low `k` coefficients is nonzero.
    pub fn div_z_pow(&self, k: usize, step: &str) -> Result<Self> {
        if self.coeffs.iter().take(k).any(|c| *c != 0) {
            return Err(Error::NonExactDivision(format!("{step}: z^{k}")));
        }
        Ok(RationalPolynomial::from_coeffs(
            self.coeffs.iter().skip(k).cloned().collect(),
        ))
    }

    /// Exact division by `(1 - z)^k` via repeated synthetic division at 1.
    pub fn div_one_minus_z_pow(&self, k: usize, step: &str) -> Result<Self> {
        let mut cur = self.clone();
        for _ in 0..k {
            let (quot, rem) = cur.div_by_z_minus_one();
            if rem != 0 {
                return Err(Error::NonExactDivision(format!("{step}: (1-z)^{k}")));
            }
            // (z - 1) = -(1 - z)
            cur = quot.scale(&Rational::from(-1));
        }
        Ok(cur)
    }

    /// Quotient and remainder of division by `(z - 1)`.
    fn div_by_z_minus_one(&self) -> (Self, Rational) {
        if self.is_zero() {
            return (RationalPolynomial::zero(), Rational::new());
        }
        let n = self.coeffs.len();
        let mut quot = vec![Rational::new(); n - 1];
        let mut carry = Rational::new();
        for k in (0..n).rev() {
            let cur = Rational::from(&self.coeffs[k] + &carry);
            if k == 0 {
                return (RationalPolynomial::from_coeffs(quot), cur);
            }
            quot[k - 1] = cur.clone();
            carry = cur;
        }
        unreachable!()
    }

    /// Multiplicity of `z = 1` as a root.
    pub fn multiplicity_at_one(&self) -> usize {
        if self.is_zero() {
            return usize::MAX;
        }
        let mut cur = self.clone();
        let mut count = 0;
        loop {
            let (quot, rem) = cur.div_by_z_minus_one();
            if rem != 0 {
                return count;
            }
            cur = quot;
            count += 1;
        }
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| *c.denom() == 1)
    }

    /// Coefficients as integers, if all are integral.
    pub fn integer_coeffs(&self) -> Option<Vec<Integer>> {
        self.is_integral()
            .then(|| self.coeffs.iter().map(|c| c.numer().clone()).collect())
    }

    pub fn eval(&self, z: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= z;
            acc += c;
        }
        acc
    }
}

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0 {
                continue;
            }
            let negative = *c < 0;
            let abs = Rational::from(c.abs_ref());
            if first {
                if negative {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if negative { " - " } else { " + " })?;
            }
            first = false;
            let show_coeff = abs != 1 || k == 0;
            if show_coeff && k > 0 && *abs.denom() != 1 {
                write!(f, "({abs})")?;
            } else if show_coeff {
                write!(f, "{abs}")?;
            }
            match k {
                0 => {}
                1 => f.write_str("z")?,
                _ => write!(f, "z^{k}")?,
            }
        }
        Ok(())
    }
}

/// `P(z)·e^{s·z}` with `s ∈ {-1, 0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpPolynomial {
    pub poly: RationalPolynomial,
    pub exp_sign: i32,
}

impl ExpPolynomial {
    pub fn new(poly: RationalPolynomial, exp_sign: i32) -> Self {
        ExpPolynomial { poly, exp_sign }
    }

    /// `d/dz (P e^{sz}) = (P' + sP) e^{sz}`.
    pub fn derivative(&self) -> Self {
        let mut poly = self.poly.derivative();
        if self.exp_sign != 0 {
            poly = poly.add(&self.poly.scale(&Rational::from(self.exp_sign)));
        }
        ExpPolynomial::new(poly, self.exp_sign)
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |acc, _| acc.derivative())
    }
}

/// `w(z) = z^{z_power} (1-z)^{one_minus_z_power} e^{exp_sign·z}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Weight {
    pub z_power: usize,
    pub one_minus_z_power: usize,
    pub exp_sign: i32,
}

impl Weight {
    /// `(1-z) e^{-z}`: the weight that reproduces the γ-form seeds.
    pub const EFFECTIVE: Weight = Weight {
        z_power: 0,
        one_minus_z_power: 1,
        exp_sign: -1,
    };

    /// `(1-z) e^{+z}`: the literal `α = -β = 1` reading.
    pub const LITERAL: Weight = Weight {
        z_power: 0,
        one_minus_z_power: 1,
        exp_sign: 1,
    };

    fn polynomial_part(&self) -> RationalPolynomial {
        RationalPolynomial::monomial(self.z_power)
            .mul(&RationalPolynomial::one_minus_z_pow(self.one_minus_z_power))
    }

    fn multiply(&self, f: &ExpPolynomial) -> ExpPolynomial {
        ExpPolynomial::new(
            f.poly.mul(&self.polynomial_part()),
            f.exp_sign + self.exp_sign,
        )
    }

    fn divide(&self, f: &ExpPolynomial, step: &str) -> Result<ExpPolynomial> {
        let poly = f
            .poly
            .div_z_pow(self.z_power, step)?
            .div_one_minus_z_pow(self.one_minus_z_power, step)?;
        Ok(ExpPolynomial::new(poly, f.exp_sign - self.exp_sign))
    }
}

/// Intermediate results of one Rodrigues construction.
#[derive(Clone, Debug)]
pub struct RodriguesTrace {
    /// Polynomial factor of `Dⁿ[w₁ zⁿ (1-z)^{2n}]`.
    pub inner: RationalPolynomial,
    /// Polynomial factor of the outer n-th derivative, before `w₂⁻¹`.
    pub outer: RationalPolynomial,
    pub q: RationalPolynomial,
}

/// `Q_n` with the seed-reproducing weight `(1-z)e^{-z}` for both `w₁, w₂`.
pub fn rodrigues_q(n: usize) -> Result<RationalPolynomial> {
    Ok(rodrigues_with(n, Weight::EFFECTIVE, Weight::EFFECTIVE)?.q)
}

/// Run the three-factor Rodrigues pipeline for arbitrary weights.
pub fn rodrigues_with(n: usize, w1: Weight, w2: Weight) -> Result<RodriguesTrace> {
    let base = ExpPolynomial::new(
        RationalPolynomial::monomial(n).mul(&RationalPolynomial::one_minus_z_pow(2 * n)),
        0,
    );
    let inner = w1.multiply(&base).nth_derivative(n);
    let middle = w1.divide(&inner, "w1^-1")?;
    let middle = w2.multiply(&ExpPolynomial::new(
        middle.poly.mul(&RationalPolynomial::monomial(n)),
        middle.exp_sign,
    ));
    let outer = middle.nth_derivative(n);
    let result = w2.divide(&outer, "w2^-1")?;
    if result.exp_sign != 0 {
        return Err(Error::NonExactDivision(format!(
            "exponential factor e^({}z) left over",
            result.exp_sign
        )));
    }

    // The unscaled polynomial is integral; Q_n itself generally is not
    // (Q_2 has leading coefficient 1/4), only its denominators divide (n!)².
    if !result.poly.is_integral() {
        return Err(Error::NonExactDivision(
            "w2^-1: non-integer coefficient before the 1/(n!)^2 scaling".into(),
        ));
    }
    let fact = Integer::from(Integer::factorial(n as u32));
    let fact_sq = Integer::from(&fact * &fact);
    let q = result
        .poly
        .scale(&Rational::from((Integer::from(1), fact_sq)));
    Ok(RodriguesTrace {
        inner: inner.poly,
        outer: outer.poly,
        q,
    })
}

/// `H_k = Σ_{j≤k} 1/j`, `H_0 = 0`.
pub fn harmonic(k: usize) -> Rational {
    (1..=k).fold(Rational::new(), |acc, j| {
        acc + Rational::from((1, j as u64))
    })
}

/// `(p, q)` with `∫₀^∞ Q(x) ln x e^{-x} dx = p - γq`:
/// `q = Σ c_k k!`, `p = Σ c_k k! H_k`. Both sums must be integers.
pub fn extract_pq(q_poly: &RationalPolynomial) -> Result<(Integer, Integer)> {
    let mut q = Rational::new();
    let mut p = Rational::new();
    let mut fact = Integer::from(1);
    let mut h = Rational::new();
    for (k, c) in q_poly.coeffs().iter().enumerate() {
        if k > 0 {
            fact *= k as u32;
            h += Rational::from((1, k as u64));
        }
        let weight = Rational::from(c * &fact);
        p += Rational::from(&h * &weight);
        q += weight;
    }
    if *p.denom() != 1 || *q.denom() != 1 {
        return Err(Error::NonIntegerP(format!("p = {p}, q = {q}")));
    }
    Ok((p.into_numer_denom().0, q.into_numer_denom().0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q0_and_q1() {
        assert_eq!(rodrigues_q(0).unwrap(), RationalPolynomial::one());
        let q1 = rodrigues_q(1).unwrap();
        assert_eq!(q1, RationalPolynomial::from_ints(&[1, -14, 29, -11, 1]));
        assert_eq!(q1.to_string(), "z^4 - 11z^3 + 29z^2 - 14z + 1");
    }

    #[test]
    fn extraction_reproduces_seeds() {
        let (p, q) = extract_pq(&rodrigues_q(1).unwrap()).unwrap();
        assert_eq!((p, q), (Integer::from(2), Integer::from(3)));
        let (p, q) = extract_pq(&RationalPolynomial::one()).unwrap();
        assert_eq!((p, q), (Integer::from(0), Integer::from(1)));
        let q2 = rodrigues_q(2).unwrap();
        assert_eq!(q2.degree(), Some(8));
        let (p, q) = extract_pq(&q2).unwrap();
        assert_eq!((p, q), (Integer::from(31), Integer::from(50)));
    }

    #[test]
    fn literal_weight_misses_the_seeds() {
        let trace = rodrigues_with(1, Weight::LITERAL, Weight::LITERAL).unwrap();
        assert_eq!(trace.q, RationalPolynomial::from_ints(&[1, -8, 5, 7, 1]));
        let (p, q) = extract_pq(&trace.q).unwrap();
        assert_eq!((p, q), (Integer::from(134), Integer::from(69)));
    }

    #[test]
    fn divisibility_laws() {
        for n in 1..=6 {
            let trace = rodrigues_with(n, Weight::EFFECTIVE, Weight::EFFECTIVE).unwrap();
            assert!(trace.inner.multiplicity_at_one() > n);
            assert!(trace.outer.multiplicity_at_one() >= 1);
            assert_eq!(trace.q.degree(), Some(4 * n));
        }
    }

    #[test]
    fn q_is_not_integral_but_denominators_divide_factorial_square() {
        let q2 = rodrigues_q(2).unwrap();
        assert_eq!(q2.coeff(8), Rational::from((1, 4)));
        assert!(!q2.is_integral());
        assert_eq!(
            q2.to_string(),
            "(1/4)z^8 - 9z^7 + 113z^6 - 610z^5 + (5669/4)z^4 - 1283z^3 + (905/2)z^2 - 52z + 1"
        );
        for n in 1..=6u32 {
            let fact = Integer::from(Integer::factorial(n));
            let fact_sq = Integer::from(&fact * &fact);
            for c in rodrigues_q(n as usize).unwrap().coeffs() {
                assert!(fact_sq.is_divisible(c.denom()));
            }
        }
    }

    #[test]
    fn inexact_divisions_are_reported() {
        let p = RationalPolynomial::from_ints(&[1, -2, 1]); // (1-z)²
        assert_eq!(
            p.div_one_minus_z_pow(2, "t").unwrap(),
            RationalPolynomial::one()
        );
        assert!(matches!(
            p.div_one_minus_z_pow(3, "t"),
            Err(Error::NonExactDivision(_))
        ));
        assert!(matches!(
            p.div_z_pow(1, "t"),
            Err(Error::NonExactDivision(_))
        ));
        let z3 = RationalPolynomial::from_ints(&[0, 0, 0, 2]);
        assert_eq!(
            z3.div_z_pow(2, "t").unwrap(),
            RationalPolynomial::from_ints(&[0, 2])
        );
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(0), 0);
        assert_eq!(harmonic(4), Rational::from((25, 12)));
        for k in [1usize, 17, 500, 10_000] {
            assert_eq!(harmonic(k) - harmonic(k - 1), Rational::from((1, k as u64)));
        }
    }

    #[test]
    fn non_integral_moment_sum_is_reported() {
        // k!·H_k is always an integer, so only non-integral coefficients can
        // break the sums.
        let z2 = RationalPolynomial::from_ints(&[0, 0, 1]);
        assert_eq!(
            extract_pq(&z2).unwrap(),
            (Integer::from(3), Integer::from(2))
        );
        let half_z = RationalPolynomial::from_ints(&[0, 1]).scale(&Rational::from((1, 2)));
        assert!(matches!(extract_pq(&half_z), Err(Error::NonIntegerP(_))));
    }

    #[test]
    fn exp_polynomial_derivative() {
        let f = ExpPolynomial::new(RationalPolynomial::from_ints(&[0, 0, 1]), -1);
        let d = f.derivative();
        assert_eq!(d.poly, RationalPolynomial::from_ints(&[0, 2, -1]));
        assert_eq!(d.exp_sign, -1);
    }
}
