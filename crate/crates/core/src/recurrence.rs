//! Exact stepping of the Laguerre three-term recurrence and the two
//! four-term recurrences that generate the γ- and (γ, δ)-form coefficients.
//!
//! A recurrence of order `k` is stored as
//!
//! ```text
//! den(n) · x(n+1) = num_0(n) · x(n) + num_1(n) · x(n-1) + ... + num_{k-2}(n) · x(n-k+2)
//! ```
//!
//! with integer polynomials in `n`. Stepping is done in exact rationals and
//! every produced value must reduce to an integer.

use std::fmt;
use std::str::FromStr;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in the index `n` with integer coefficients, ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPoly(Vec<Integer>);

impl IntPoly {
    pub fn new(coeffs: &[i64]) -> Self {
        let mut p = IntPoly(coeffs.iter().map(|&c| Integer::from(c)).collect());
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| *c == 0) {
            self.0.pop();
        }
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.0
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.0.is_empty() || other.0.is_empty() {
            return IntPoly(Vec::new());
        }
        let mut out = vec![Integer::new(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += Integer::from(a * b);
            }
        }
        let mut p = IntPoly(out);
        p.trim();
        p
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly(self.0.iter().map(|c| Integer::from(-c)).collect())
    }

    pub fn eval(&self, n: u64) -> Integer {
        let mut acc = Integer::new();
        for c in self.0.iter().rev() {
            acc *= n;
            acc += c;
        }
        acc
    }
}

/// Product of integer polynomials given by their ascending coefficients.
fn product(factors: &[&[i64]]) -> IntPoly {
    factors
        .iter()
        .fold(IntPoly::new(&[1]), |acc, f| acc.mul(&IntPoly::new(f)))
}

/// A linear recurrence with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceSpec {
    name: &'static str,
    start: usize,
    denominator: IntPoly,
    numerators: Vec<IntPoly>,
}

impl RecurrenceSpec {
    pub fn new(
        name: &'static str,
        start: usize,
        denominator: IntPoly,
        numerators: Vec<IntPoly>,
    ) -> Self {
        RecurrenceSpec {
            name,
            start,
            denominator,
            numerators,
        }
    }

    /// `q̃(n+1) = 2(n+1) q̃(n) - n² q̃(n-1)`, applied for n ≥ 1.
    pub fn laguerre() -> Self {
        RecurrenceSpec::new(
            "laguerre",
            1,
            IntPoly::new(&[1]),
            vec![IntPoly::new(&[2, 2]), IntPoly::new(&[0, 0, -1])],
        )
    }

    /// The four-term recurrence for the γ-form coefficients p, q, r:
    ///
    /// `(16n-15) q(n+1) = (128n³+40n²-82n-45) q(n) - n²(256n³-240n²+64n-7) q(n-1)
    ///                    + n²(n-1)²(16n+1) q(n-2)`
    pub fn gamma_forms() -> Self {
        RecurrenceSpec::new(
            "gamma-forms",
            2,
            IntPoly::new(&[-15, 16]),
            vec![
                IntPoly::new(&[-45, -82, 40, 128]),
                product(&[&[0, 0, 1], &[-7, 64, -240, 256]]).neg(),
                product(&[&[0, 0, 1], &[1, -2, 1], &[1, 16]]),
            ],
        )
    }

    /// The four-term recurrence for u, v, w:
    ///
    /// `(16n+1)(16n-15) u(n+1) = (16n-15)(256n³+528n²+352n+73) u(n)
    ///                           - (16n+17)(128n³+40n²-82n-45) u(n-1)
    ///                           + n²(16n+17)(16n+1) u(n-2)`
    pub fn gamma_delta_forms() -> Self {
        RecurrenceSpec::new(
            "gamma-delta-forms",
            2,
            product(&[&[1, 16], &[-15, 16]]),
            vec![
                product(&[&[-15, 16], &[73, 352, 528, 256]]),
                product(&[&[17, 16], &[-45, -82, 40, 128]]).neg(),
                product(&[&[0, 0, 1], &[17, 16], &[1, 16]]),
            ],
        )
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Number of terms in the recurrence, counting the produced one.
    pub fn order(&self) -> usize {
        self.numerators.len() + 1
    }

    /// First `n` at which the recurrence is applied (it then yields index n+1).
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn denominator(&self) -> &IntPoly {
        &self.denominator
    }

    pub fn numerators(&self) -> &[IntPoly] {
        &self.numerators
    }

    /// Coefficient of `x(n-j)` when producing `x(n+1)`, leading divisor folded in.
    pub fn coeff(&self, n: usize, j: usize) -> Rational {
        let den = self.denominator.eval(n as u64);
        assert!(
            den != 0,
            "{}: leading coefficient vanishes at n = {n}",
            self.name
        );
        Rational::from((self.numerators[j].eval(n as u64), den))
    }

    /// One exact step: `window[j]` holds `x(n-j)`.
    pub fn step(&self, n: usize, window: &[Rational]) -> Rational {
        debug_assert_eq!(window.len(), self.numerators.len());
        let mut acc = Rational::new();
        for (j, x) in window.iter().enumerate() {
            acc += self.coeff(n, j) * x;
        }
        acc
    }
}

/// The eight named solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyName {
    PTilde,
    QTilde,
    P,
    Q,
    R,
    U,
    V,
    W,
}

impl FamilyName {
    pub const ALL: [FamilyName; 8] = [
        FamilyName::PTilde,
        FamilyName::QTilde,
        FamilyName::P,
        FamilyName::Q,
        FamilyName::R,
        FamilyName::U,
        FamilyName::V,
        FamilyName::W,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyName::PTilde => "p_tilde",
            FamilyName::QTilde => "q_tilde",
            FamilyName::P => "p",
            FamilyName::Q => "q",
            FamilyName::R => "r",
            FamilyName::U => "u",
            FamilyName::V => "v",
            FamilyName::W => "w",
        }
    }

    pub fn recurrence(self) -> RecurrenceSpec {
        match self {
            FamilyName::PTilde | FamilyName::QTilde => RecurrenceSpec::laguerre(),
            FamilyName::P | FamilyName::Q | FamilyName::R => RecurrenceSpec::gamma_forms(),
            FamilyName::U | FamilyName::V | FamilyName::W => RecurrenceSpec::gamma_delta_forms(),
        }
    }

    pub fn seeds(self) -> &'static [i64] {
        match self {
            FamilyName::PTilde => &[0, 1],
            FamilyName::QTilde => &[1, 2],
            FamilyName::P => &[0, 2, 31],
            FamilyName::Q => &[1, 3, 50],
            FamilyName::R => &[0, 1, 24],
            FamilyName::U => &[-2, 7, 558],
            FamilyName::V => &[-1, -22, -1518],
            FamilyName::W => &[0, -17, -1209],
        }
    }

    /// Generate this family from its published seeds.
    pub fn generate(self, max_n: usize) -> Result<SequenceFamily> {
        let seeds: Vec<Rational> = self.seeds().iter().map(|&s| Rational::from(s)).collect();
        generate(self, &self.recurrence(), &seeds, max_n)
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family `{s}`")))
    }
}

/// A certified-integer table `n ↦ value` for `0 ≤ n ≤ max_n`.
#[derive(Clone, Debug)]
pub struct SequenceFamily {
    name: FamilyName,
    spec: RecurrenceSpec,
    initial: Vec<Rational>,
    values: Vec<Integer>,
}

/// Step `spec` from `initial` up to index `max_n`, asserting integrality at
/// every index.
pub fn generate(
    name: FamilyName,
    spec: &RecurrenceSpec,
    initial: &[Rational],
    max_n: usize,
) -> Result<SequenceFamily> {
    let seeds_needed = spec.order() - 1;
    if initial.len() != seeds_needed {
        return Err(Error::InvalidInput(format!(
            "{} needs {seeds_needed} seeds, got {}",
            spec.name(),
            initial.len()
        )));
    }
    if max_n + 1 < initial.len() {
        return Err(Error::InvalidInput(format!(
            "max_n = {max_n} is below the seed window of {}",
            initial.len()
        )));
    }

    let mut values = Vec::with_capacity(max_n + 1);
    for (n, seed) in initial.iter().enumerate() {
        values.push(certify(name, n, seed.clone())?);
    }
    let width = spec.order() - 1;
    let mut window: Vec<Rational> = initial.iter().rev().cloned().collect();
    for n in (initial.len() - 1)..max_n {
        let next = spec.step(n, &window);
        window.pop();
        window.insert(0, next.clone());
        debug_assert_eq!(window.len(), width);
        values.push(certify(name, n + 1, next)?);
    }

    Ok(SequenceFamily {
        name,
        spec: spec.clone(),
        initial: initial.to_vec(),
        values,
    })
}

fn certify(name: FamilyName, n: usize, value: Rational) -> Result<Integer> {
    if *value.denom() != 1 {
        return Err(Error::integrality(name, n, value));
    }
    Ok(value.into_numer_denom().0)
}

/// One row of a growth profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Magnitude {
    /// `log10 |value|`, `None` standing for `-∞` (the value is zero).
    pub log10_abs: Option<f64>,
    pub sign: i8,
}

impl Magnitude {
    pub fn of(value: &Integer) -> Self {
        match value.cmp0() {
            std::cmp::Ordering::Equal => Magnitude {
                log10_abs: None,
                sign: 0,
            },
            ord => {
                let abs = Float::with_val(128, value).abs();
                Magnitude {
                    log10_abs: Some(abs.log10().to_f64()),
                    sign: if ord == std::cmp::Ordering::Less {
                        -1
                    } else {
                        1
                    },
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    family: String,
    max_n: usize,
    values: Vec<String>,
}

impl SequenceFamily {
    pub fn name(&self) -> FamilyName {
        self.name
    }

    pub fn spec(&self) -> &RecurrenceSpec {
        &self.spec
    }

    pub fn initial(&self) -> &[Rational] {
        &self.initial
    }

    pub fn values(&self) -> &[Integer] {
        &self.values
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize) -> &Integer {
        &self.values[n]
    }

    pub fn growth_profile(&self) -> Vec<Magnitude> {
        self.values.iter().map(Magnitude::of).collect()
    }

    /// Signs of the stored values, `-1`, `0` or `1`.
    pub fn sign_pattern(&self) -> Vec<i8> {
        self.values
            .iter()
            .map(|v| match v.cmp0() {
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            })
            .collect()
    }

    /// Recompute index `n` from its predecessors; `Ok(true)` when it matches.
    pub fn restep(&self, n: usize) -> Result<bool> {
        let width = self.spec.order() - 1;
        if n < width || n > self.max_n() {
            return Err(Error::InvalidInput(format!(
                "cannot re-step index {n} of {} (seed window {width}, max_n {})",
                self.name,
                self.max_n()
            )));
        }
        let window: Vec<Rational> = (0..width)
            .map(|j| Rational::from(&self.values[n - 1 - j]))
            .collect();
        let next = self.spec.step(n - 1, &window);
        Ok(*next.denom() == 1 && *next.numer() == self.values[n])
    }

    /// Wrap a table computed by another route (e.g. scaled determinants).
    /// The seeds are taken from the table's first entries.
    pub(crate) fn from_table(name: FamilyName, values: Vec<Integer>) -> SequenceFamily {
        let spec = name.recurrence();
        let initial = values
            .iter()
            .take(spec.order() - 1)
            .map(Rational::from)
            .collect();
        SequenceFamily {
            name,
            spec,
            initial,
            values,
        }
    }

    /// Table truncated to `0..=max_n`.
    pub fn truncated(&self, max_n: usize) -> SequenceFamily {
        let mut out = self.clone();
        out.values.truncate(max_n + 1);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("n,{}\n", self.name);
        for (n, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{v}\n"));
        }
        out
    }

    /// `{"version":1,"family":<name>,"max_n":N,"values":["..."]}`
    pub fn to_json(&self) -> String {
        let file = CacheFile {
            version: 1,
            family: self.name.as_str().to_string(),
            max_n: self.max_n(),
            values: self.values.iter().map(|v| v.to_string()).collect(),
        };
        serde_json::to_string(&file).expect("cache file serializes")
    }

    /// Parse a JSON cache produced by [`SequenceFamily::to_json`]. The seeds
    /// are checked against the stored table; callers should additionally
    /// re-step a few indices before trusting it.
    pub fn from_json(text: &str) -> Result<SequenceFamily> {
        let file: CacheFile = serde_json::from_str(text)?;
        let bad = |reason: String| Error::Cache {
            path: file.family.clone(),
            reason,
        };
        if file.version != 1 {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        let name: FamilyName = file.family.parse()?;
        if file.values.len() != file.max_n + 1 {
            return Err(bad(format!(
                "max_n = {} but {} values stored",
                file.max_n,
                file.values.len()
            )));
        }
        let values = file
            .values
            .iter()
            .map(|s| s.parse::<Integer>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("bad integer: {e}")))?;
        let seeds = name.seeds();
        if values.len() < seeds.len() || values.iter().zip(seeds).any(|(v, s)| *v != *s) {
            return Err(bad("seed values do not match".into()));
        }
        Ok(SequenceFamily {
            name,
            spec: name.recurrence(),
            initial: seeds.iter().map(|&s| Rational::from(s)).collect(),
            values,
        })
    }
}

/// All eight families generated to a common `max_n`.
#[derive(Clone, Debug)]
pub struct Tables {
    families: Vec<SequenceFamily>,
}

impl Tables {
    /// Generate every family; independent families run on separate threads.
    pub fn generate(max_n: usize) -> Result<Tables> {
        let families = std::thread::scope(|scope| {
            let handles: Vec<_> = FamilyName::ALL
                .iter()
                .map(|&name| scope.spawn(move || name.generate(max_n)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("generator thread panicked"))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Tables { families })
    }

    pub fn from_families(mut families: Vec<SequenceFamily>) -> Result<Tables> {
        families.sort_by_key(|f| f.name());
        let names: Vec<_> = families.iter().map(|f| f.name()).collect();
        if names != FamilyName::ALL {
            return Err(Error::InvalidInput(format!(
                "need exactly one table per family, got {names:?}"
            )));
        }
        Ok(Tables { families })
    }

    pub fn get(&self, name: FamilyName) -> &SequenceFamily {
        let idx = FamilyName::ALL.iter().position(|&f| f == name).unwrap();
        &self.families[idx]
    }

    pub fn families(&self) -> &[SequenceFamily] {
        &self.families
    }

    pub fn max_n(&self) -> usize {
        self.families.iter().map(|f| f.max_n()).min().unwrap_or(0)
    }
}
