//! γ, δ, e and e·γ + δ at a requested number of significant digits.
//!
//! Each constant has two independent routes:
//!
//! * γ: Brent–McMillan Bessel sums, and Euler–Maclaurin summation of the
//!   harmonic numbers (Bernoulli numbers from integer tangent numbers).
//! * δ: `e·(Σ_{k≥1} (-1)^{k+1}/(k·k!) - γ)`, and the Laguerre convergents
//!   `p̃_n/q̃_n`, which do not involve γ at all.
//!
//! All routes run with [`GUARD_DIGITS`] extra digits plus a few dozen guard
//! bits and report only the requested digits as guaranteed.

use std::collections::HashMap;
use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rug::float::Round;
use rug::ops::{NegAssign, Pow};
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::recurrence::FamilyName;

/// Extra decimal digits carried by every internal computation.
pub const GUARD_DIGITS: u32 = 15;

const GUARD_BITS: u32 = 64;

/// Binary precision holding `digits` decimal digits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32 + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    BrentMcMillan,
    EulerMaclaurin,
    ExponentialSeries,
    AlternatingSeries,
    LaguerreConvergent,
    Composite,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::BrentMcMillan => "brent-mcmillan",
            Provenance::EulerMaclaurin => "euler-maclaurin",
            Provenance::ExponentialSeries => "exp-series",
            Provenance::AlternatingSeries => "alternating-series",
            Provenance::LaguerreConvergent => "laguerre-convergent",
            Provenance::Composite => "composite",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A multiprecision value with a guaranteed number of significant digits.
#[derive(Clone, Debug)]
pub struct PrecisionReal {
    value: Float,
    digits: u32,
    provenance: Provenance,
}

impl PrecisionReal {
    pub fn new(value: Float, digits: u32, provenance: Provenance) -> Self {
        PrecisionReal {
            value,
            digits,
            provenance,
        }
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Copy rounded to hold `digits` guaranteed digits (plus guard).
    pub fn rounded(&self, digits: u32) -> PrecisionReal {
        let digits = digits.min(self.digits);
        let prec = bits_for_digits(digits + GUARD_DIGITS) + GUARD_BITS;
        PrecisionReal {
            value: Float::with_val(prec.min(self.value.prec()), &self.value),
            digits,
            provenance: self.provenance,
        }
    }

    /// Decimal expansion correctly rounded to `digits` significant digits.
    pub fn to_decimal(&self, digits: u32) -> String {
        to_decimal(&self.value, digits.min(self.digits))
    }
}

fn decimal_mantissa(x: &Float, sig: u32) -> (Integer, i64) {
    let prec = x.prec().max(bits_for_digits(sig) + GUARD_BITS);
    let abs = Float::with_val(prec, x).abs();
    let mut exp10 = Float::with_val(64, abs.log10_ref()).floor().to_f64() as i64;
    loop {
        let shift = i64::from(sig) - 1 - exp10;
        let scale = Float::with_val(prec, 10).pow(Integer::from(shift));
        let scaled = Float::with_val(prec, &abs * &scale);
        let (m, _) = scaled
            .to_integer_round(Round::Nearest)
            .expect("finite value");
        let upper = Integer::from(Integer::u_pow_u(10, sig));
        let lower = Integer::from(Integer::u_pow_u(10, sig - 1));
        if m >= upper {
            exp10 += 1;
        } else if m < lower {
            exp10 -= 1;
        } else {
            return (m, exp10);
        }
    }
}

/// Fixed-point rendering with `sig` significant digits, e.g. `0.577`, `3`.
pub fn to_decimal(x: &Float, sig: u32) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    if x.is_zero() {
        return "0".into();
    }
    let (m, exp10) = decimal_mantissa(x, sig);
    let digits = m.to_string();
    let mut out = String::new();
    if x.is_sign_negative() {
        out.push('-');
    }
    if exp10 >= 0 {
        let int_len = exp10 as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.push_str(&"0".repeat(int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exp10 - 1) as usize));
        out.push_str(&digits);
    }
    out
}

/// Scientific rendering with `sig` significant digits, e.g. `-1.23e-605`.
pub fn to_scientific(x: &Float, sig: u32) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    if x.is_zero() {
        return "0".into();
    }
    let (m, exp10) = decimal_mantissa(x, sig);
    let digits = m.to_string();
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if digits.len() == 1 {
        format!("{sign}{digits}e{exp10}")
    } else {
        format!("{sign}{}.{}e{exp10}", &digits[..1], &digits[1..])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CacheKey {
    Gamma,
    GammaEulerMaclaurin,
    E,
    Delta,
}

fn cache() -> &'static Mutex<HashMap<CacheKey, PrecisionReal>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, PrecisionReal>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(
    key: CacheKey,
    digits: u32,
    compute: impl FnOnce() -> Result<PrecisionReal>,
) -> Result<PrecisionReal> {
    if let Some(hit) = cache().lock().unwrap().get(&key) {
        if hit.digits >= digits {
            return Ok(hit.rounded(digits));
        }
    }
    let fresh = compute()?;
    let mut guard = cache().lock().unwrap();
    let keep = guard.get(&key).is_none_or(|old| old.digits < fresh.digits);
    if keep {
        guard.insert(key, fresh.clone());
    }
    Ok(fresh)
}

fn working_prec(digits: u32) -> u32 {
    bits_for_digits(digits + GUARD_DIGITS) + GUARD_BITS
}

/// e via `Σ 1/k!`, truncated once the next term drops below the target.
pub fn e_const(digits: u32) -> PrecisionReal {
    cached(CacheKey::E, digits, || Ok(e_series(digits))).expect("e never fails")
}

fn e_series(digits: u32) -> PrecisionReal {
    let prec = working_prec(digits);
    let mut sum = Float::with_val(prec, 1);
    let mut term = Float::with_val(prec, 1);
    let cutoff = -(i64::from(prec) + 2);
    let mut k = 1u32;
    // The tail after term k is below 2·term(k+1).
    loop {
        term /= k;
        sum += &term;
        if i64::from(term.get_exp().unwrap()) < cutoff {
            break;
        }
        k += 1;
    }
    PrecisionReal::new(sum, digits, Provenance::ExponentialSeries)
}

/// γ by the Brent–McMillan scheme:
/// `γ = A/B - ln N` with `A = Σ (N^k/k!)² H_k`, `B = Σ (N^k/k!)²`,
/// error below `π·e^{-4N}`.
pub fn gamma(digits: u32) -> PrecisionReal {
    cached(CacheKey::Gamma, digits, || Ok(gamma_brent_mcmillan(digits))).expect("gamma never fails")
}

fn gamma_brent_mcmillan(digits: u32) -> PrecisionReal {
    let target = digits + GUARD_DIGITS;
    let prec = working_prec(digits);
    let big_n = (f64::from(target) * LN_10 / 4.0).ceil() as u64 + 1;
    let n_sq = big_n * big_n;

    let mut term = Float::with_val(prec, 1);
    let mut harmonic = Float::with_val(prec, 0);
    let mut a = Float::with_val(prec, 0);
    let mut b = Float::with_val(prec, 1);
    let mut k = 1u64;
    loop {
        term *= n_sq;
        term /= k * k;
        harmonic += Float::with_val(prec, 1) / k;
        a += Float::with_val(prec, &term * &harmonic);
        b += &term;
        if k > big_n {
            let gap = b.get_exp().unwrap() - term.get_exp().unwrap();
            if i64::from(gap) > i64::from(prec) + 32 {
                break;
            }
        }
        k += 1;
    }
    let ln_n = Float::with_val(prec, big_n).ln();
    let value = a / b - ln_n;
    PrecisionReal::new(value, digits, Provenance::BrentMcMillan)
}

/// Tangent numbers `T_1..=T_count` (integer algorithm, no divisions).
pub fn tangent_numbers(count: usize) -> Vec<Integer> {
    if count == 0 {
        return Vec::new();
    }
    let mut t = vec![Integer::new(); count + 1];
    t[1] = Integer::from(1);
    for k in 2..=count {
        t[k] = Integer::from(&t[k - 1] * (k as u64 - 1));
    }
    for k in 2..=count {
        for j in k..=count {
            let lower = Integer::from(&t[j - 1] * (j - k) as u64);
            t[j] *= (j - k + 2) as u64;
            t[j] += lower;
        }
    }
    t.remove(0);
    t
}

/// Bernoulli numbers `B_2, B_4, ..., B_{2·count}`.
pub fn bernoulli_even(count: usize) -> Vec<Rational> {
    tangent_numbers(count)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let k = i as u32 + 1;
            let four_k = Integer::from(1) << (2 * k);
            let den = &four_k * Integer::from(&four_k - 1u32);
            let num = t * (2 * k);
            let mut b = Rational::from((num, den));
            if k.is_multiple_of(2) {
                b.neg_assign();
            }
            b
        })
        .collect()
}

/// log10 of the upper bound `4(2k)!/((2π m)^{2k} · 2k)` on the k-th
/// Euler–Maclaurin correction term.
fn em_term_log10(k: usize, m: u64) -> f64 {
    let two_k = 2 * k;
    let log_fact: f64 = (1..=two_k).map(|i| (i as f64).ln()).sum();
    (4f64.ln() + log_fact - two_k as f64 * (2.0 * PI * m as f64).ln() - (two_k as f64).ln()) / LN_10
}

/// γ by Euler–Maclaurin: `γ = H_m - ln m - 1/(2m) + Σ_{k=1}^{K} B_{2k}/(2k m^{2k})`,
/// remainder bounded by the first omitted term.
pub fn gamma_euler_maclaurin(digits: u32) -> PrecisionReal {
    cached(CacheKey::GammaEulerMaclaurin, digits, || {
        Ok(gamma_em_uncached(digits))
    })
    .expect("gamma never fails")
}

fn gamma_em_uncached(digits: u32) -> PrecisionReal {
    let target = digits + GUARD_DIGITS;
    let prec = working_prec(digits) + 32;
    let m = 10 * u64::from(target) + 10;
    let mut count = 1usize;
    while em_term_log10(count + 1, m) > -f64::from(target) - 2.0 {
        count += 1;
    }

    let mut harmonic = Float::with_val(prec, 0);
    for k in 1..=m {
        harmonic += Float::with_val(prec, 1) / k;
    }
    let mut value = harmonic - Float::with_val(prec, m).ln();
    value -= Float::with_val(prec, 1) / (2 * m);

    let m_sq = Float::with_val(prec, m * m);
    let mut m_pow = Float::with_val(prec, 1);
    for (i, b) in bernoulli_even(count).iter().enumerate() {
        let k = i as u64 + 1;
        m_pow *= &m_sq;
        let mut term = Float::with_val(prec, b);
        term /= &m_pow;
        term /= 2 * k;
        value += term;
    }
    PrecisionReal::new(value, digits, Provenance::EulerMaclaurin)
}

/// γ from Brent–McMillan, confirmed by Euler–Maclaurin to `digits`.
pub fn gamma_checked(digits: u32) -> Result<PrecisionReal> {
    let primary = gamma(digits);
    let second = gamma_euler_maclaurin(digits);
    agree("gamma", &primary, &second, digits)?;
    Ok(primary)
}

/// `|a - b| < 10^{-digits}`, else a cross-check failure.
pub fn agree(
    constant: &'static str,
    a: &PrecisionReal,
    b: &PrecisionReal,
    digits: u32,
) -> Result<()> {
    let diff = difference(a, b);
    let tol = Float::with_val(64, 10).pow(-(digits as i32));
    if diff < tol {
        Ok(())
    } else {
        Err(Error::CrossCheckFailed {
            constant,
            difference: to_scientific(&diff, 6),
        })
    }
}

pub fn difference(a: &PrecisionReal, b: &PrecisionReal) -> Float {
    let prec = a.value.prec().max(b.value.prec());
    let mut d = Float::with_val(prec, &a.value - &b.value);
    d.abs_mut();
    d
}

/// δ = e·(Σ_{k≥1} (-1)^{k+1}/(k·k!) - γ), truncated by the alternating-series
/// remainder bound.
pub fn delta_series(digits: u32, gamma: &PrecisionReal) -> Result<PrecisionReal> {
    let need = digits + GUARD_DIGITS;
    if gamma.digits < need {
        return Err(Error::InsufficientGammaPrecision {
            have: gamma.digits,
            need,
        });
    }
    // Only the default γ route is shared through the cache.
    if gamma.provenance != Provenance::BrentMcMillan {
        return delta_series_uncached(digits, gamma);
    }
    cached(CacheKey::Delta, digits, || {
        delta_series_uncached(digits, gamma)
    })
}

fn delta_series_uncached(digits: u32, gamma: &PrecisionReal) -> Result<PrecisionReal> {
    let prec = working_prec(digits);
    let cutoff = -(i64::from(prec) + 4);
    let mut factorial_inv = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 0);
    let mut k = 1u64;
    loop {
        factorial_inv /= k;
        let term = Float::with_val(prec, &factorial_inv / k);
        let small = i64::from(term.get_exp().unwrap()) < cutoff;
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        if small {
            break;
        }
        k += 1;
    }
    sum -= gamma.value();
    let e = e_const(digits + GUARD_DIGITS);
    let value = sum * e.value();
    Ok(PrecisionReal::new(
        value,
        digits,
        Provenance::AlternatingSeries,
    ))
}

/// The first `count` partial sums `e·(S_k - γ)` of the δ series; they
/// alternate around δ.
pub fn delta_partial_sums(count: usize, gamma: &PrecisionReal, e: &PrecisionReal) -> Vec<Float> {
    let prec = gamma.value.prec().min(e.value.prec());
    let mut factorial_inv = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 0);
    let mut out = Vec::with_capacity(count);
    for k in 1..=count as u64 {
        factorial_inv /= k;
        let term = Float::with_val(prec, &factorial_inv / k);
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        out.push(Float::with_val(prec, &sum - gamma.value()) * e.value());
    }
    out
}

/// Laguerre convergent `p̃_n/q̃_n` and the order-of-magnitude error estimate
/// `2√(πe)·e^{-4√n}` read off the two Perron envelopes.
pub fn delta_laguerre(n: usize) -> Result<(Rational, PrecisionReal)> {
    let p = FamilyName::PTilde.generate(n.max(1))?;
    let q = FamilyName::QTilde.generate(n.max(1))?;
    Ok((
        Rational::from((p.get(n).clone(), q.get(n).clone())),
        laguerre_error_estimate(n),
    ))
}

pub fn laguerre_error_estimate(n: usize) -> PrecisionReal {
    let prec = 128;
    let pi_e = Float::with_val(prec, rug::float::Constant::Pi) * Float::with_val(prec, 1).exp();
    let lead = pi_e.sqrt() * 2u32;
    let decay = (Float::with_val(prec, n).sqrt() * -4i32).exp();
    PrecisionReal::new(lead * decay, 3, Provenance::LaguerreConvergent)
}

/// Laguerre index whose envelope estimate falls below `10^{-(digits+2)}`.
pub fn laguerre_index_for(digits: u32) -> u64 {
    let lead = (2.0 * (PI * std::f64::consts::E).sqrt()).ln();
    let root = ((f64::from(digits) + 2.0) * LN_10 + lead) / 4.0;
    (root * root).ceil() as u64
}

/// δ from a Laguerre convergent stepped in floating point. Forward stepping
/// is stable for the ratio of the two dominant solutions; `log2(n)` extra
/// bits absorb the accumulated rounding.
pub fn delta_laguerre_float(digits: u32) -> PrecisionReal {
    let target = digits + GUARD_DIGITS;
    let n = laguerre_index_for(target);
    let prec = bits_for_digits(target) + GUARD_BITS + 64 - n.leading_zeros();
    let step = |prev: &mut Float, cur: &mut Float, k: u64| {
        // x(k+1) = 2(k+1)·x(k) - k²·x(k-1)
        *prev *= k * k;
        *prev -= Float::with_val(prec, &*cur * (2 * k + 2));
        prev.neg_assign();
        std::mem::swap(prev, cur);
    };
    let (mut p_prev, mut p_cur) = (Float::with_val(prec, 0), Float::with_val(prec, 1));
    let (mut q_prev, mut q_cur) = (Float::with_val(prec, 1), Float::with_val(prec, 2));
    for k in 1..n {
        step(&mut p_prev, &mut p_cur, k);
        step(&mut q_prev, &mut q_cur, k);
    }
    PrecisionReal::new(p_cur / q_cur, digits, Provenance::LaguerreConvergent)
}

/// γ, δ, e and e·γ + δ sharing one guaranteed digit count.
#[derive(Clone, Debug)]
pub struct ConstantSet {
    pub gamma: PrecisionReal,
    pub delta: PrecisionReal,
    pub e: PrecisionReal,
    pub egd: PrecisionReal,
}

impl ConstantSet {
    pub fn compute(digits: u32) -> Result<ConstantSet> {
        let gamma_hi = gamma(digits + GUARD_DIGITS);
        let delta = delta_series(digits, &gamma_hi)?;
        let e = e_const(digits);
        let gamma = gamma_hi.rounded(digits);
        let egd = egd_from(&gamma, &delta, &e);
        Ok(ConstantSet {
            gamma,
            delta,
            e,
            egd,
        })
    }

    pub fn digits(&self) -> u32 {
        self.gamma
            .digits()
            .min(self.delta.digits())
            .min(self.e.digits())
    }

    pub fn rounded(&self, digits: u32) -> ConstantSet {
        ConstantSet {
            gamma: self.gamma.rounded(digits),
            delta: self.delta.rounded(digits),
            e: self.e.rounded(digits),
            egd: self.egd.rounded(digits),
        }
    }
}

fn egd_from(gamma: &PrecisionReal, delta: &PrecisionReal, e: &PrecisionReal) -> PrecisionReal {
    let digits = gamma.digits.min(delta.digits).min(e.digits);
    let prec = working_prec(digits);
    let mut v = Float::with_val(prec, gamma.value() * e.value());
    v += delta.value();
    PrecisionReal::new(v, digits, Provenance::Composite)
}

/// e·γ + δ.
pub fn egd(digits: u32) -> Result<PrecisionReal> {
    Ok(ConstantSet::compute(digits)?.egd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_rendering() {
        assert_eq!(gamma(3).to_decimal(3), "0.577");
        assert_eq!(gamma(20).to_decimal(20), "0.57721566490153286061");
        assert_eq!(gamma(1).to_decimal(1), "0.6");
        assert_eq!(
            gamma_euler_maclaurin(20).to_decimal(20),
            "0.57721566490153286061"
        );
    }

    #[test]
    fn e_rendering() {
        assert_eq!(e_const(10).to_decimal(10), "2.718281828");
        assert_eq!(e_const(1).to_decimal(1), "3");
    }

    #[test]
    fn delta_values() {
        let g = gamma(40);
        assert_eq!(delta_series(3, &g).unwrap().to_decimal(3), "0.596");
        assert_eq!(
            delta_series(15, &g).unwrap().to_decimal(15),
            "0.596347362323194"
        );
        assert_eq!(delta_laguerre_float(15).to_decimal(15), "0.596347362323194");
    }

    #[test]
    fn delta_needs_guarded_gamma() {
        let g = gamma(20);
        assert!(matches!(
            delta_series(10, &g),
            Err(Error::InsufficientGammaPrecision { have: 20, need: 25 })
        ));
    }

    #[test]
    fn egd_value() {
        // e·γ + δ = 1.569034853... + 0.596347362... = 2.165382215...
        assert_eq!(egd(10).unwrap().to_decimal(10), "2.165382215");
    }

    #[test]
    fn partial_sums_bracket_delta() {
        let g = gamma(40);
        let e = e_const(40);
        let delta = delta_series(25, &g).unwrap();
        let sums = delta_partial_sums(30, &g, &e);
        assert_eq!(to_decimal(&sums[0], 4), "1.149");
        assert_eq!(to_decimal(&sums[1], 3), "0.470");
        for (k, s) in sums.iter().enumerate() {
            if k.is_multiple_of(2) {
                assert!(*s > *delta.value(), "odd partial sum {k} should exceed δ");
            } else {
                assert!(
                    *s < *delta.value(),
                    "even partial sum {k} should undershoot δ"
                );
            }
        }
        for w in sums.windows(3) {
            let a = Float::with_val(128, &w[0] - &w[1]).abs();
            let b = Float::with_val(128, &w[1] - &w[2]).abs();
            assert!(b < a);
        }
    }

    #[test]
    fn laguerre_convergents() {
        let (r2, _) = delta_laguerre(2).unwrap();
        assert_eq!(r2, Rational::from((4, 7)));
        let (r3, _) = delta_laguerre(3).unwrap();
        assert_eq!(r3, Rational::from((20, 34)));
    }

    #[test]
    fn bernoulli_from_tangent_numbers() {
        let b = bernoulli_even(6);
        let expect = [(1, 6), (-1, 30), (1, 42), (-1, 30), (5, 66), (-691, 2730)];
        for (got, (n, d)) in b.iter().zip(expect) {
            assert_eq!(*got, Rational::from((n, d)));
        }
        let t: Vec<_> = tangent_numbers(5)
            .iter()
            .map(|x| x.to_u64().unwrap())
            .collect();
        assert_eq!(t, [1, 2, 16, 272, 7936]);
    }

    #[test]
    fn decimal_and_scientific_formatting() {
        let x = Float::with_val(200, -0.0009996);
        assert_eq!(to_decimal(&x, 3), "-0.00100");
        assert_eq!(to_scientific(&x, 3), "-1.00e-3");
        let y = Float::with_val(200, 123456);
        assert_eq!(to_decimal(&y, 2), "120000");
        assert_eq!(to_scientific(&y, 1), "1e5");
        assert_eq!(to_decimal(&Float::with_val(10, 0), 5), "0");
    }

    #[test]
    fn rounded_copy_keeps_leading_digits() {
        let g = gamma(60);
        let r = g.rounded(30);
        assert_eq!(r.digits(), 30);
        assert_eq!(r.to_decimal(30), g.to_decimal(30));
    }
}
