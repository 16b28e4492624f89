//! Evaluation of the small linear forms
//!
//! * `f_n = p_n - γ q_n`
//! * `g_n = e p_n - (eγ + δ) q_n + r_n`
//! * `l_n = u_n δ - γ v_n + w_n`
//! * `vE_n = v_n + e u_n`, `wE_n = w_n + (eγ + δ) u_n`
//!
//! at a digit budget large enough to survive the cancellation, together with
//! their asymptotic normalizers and a one-correction-term constant fit.

use std::f64::consts::LN_10;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer};
use serde::Serialize;

use crate::constants::{bits_for_digits, ConstantSet, PrecisionReal, Provenance, GUARD_DIGITS};
use crate::error::{Error, Result};
use crate::recurrence::{FamilyName, Tables};

/// Digits added on top of the cancellation estimate.
pub const BUDGET_MARGIN_DIGITS: u32 = 40;

/// Extra digits used by the stability re-evaluation.
pub const STABILITY_EXTRA_DIGITS: u32 = 20;

/// Largest change of a normalized value tolerated between the budget and
/// budget + [`STABILITY_EXTRA_DIGITS`] evaluations.
pub const STABILITY_TOLERANCE: f64 = 1e-10;

/// Significant digits reported for form values and normalized values.
pub const FORM_VALUE_DIGITS: u32 = BUDGET_MARGIN_DIGITS - GUARD_DIGITS;

const NORMALIZER_DIGITS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FormName {
    F,
    G,
    L,
    #[serde(rename = "vE")]
    VE,
    #[serde(rename = "wE")]
    WE,
}

impl FormName {
    pub const ALL: [FormName; 5] = [
        FormName::F,
        FormName::G,
        FormName::L,
        FormName::VE,
        FormName::WE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormName::F => "f",
            FormName::G => "g",
            FormName::L => "l",
            FormName::VE => "vE",
            FormName::WE => "wE",
        }
    }

    /// Exponent of the correction term `n^{-k}` used by the fit.
    pub fn correction_power(self) -> f64 {
        match self {
            FormName::G => 1.0,
            _ => 0.5,
        }
    }

    /// Published limit of `|normalized|`, where one is claimed.
    pub fn target(self) -> Option<Float> {
        let prec = 128;
        let e = Float::with_val(prec, 1).exp();
        match self {
            // 2√π / (4e)^{3/8}
            FormName::F => {
                let pi = Float::with_val(prec, Constant::Pi);
                let four_e = Float::with_val(prec, &e * 4u32);
                Some(pi.sqrt() * 2u32 / four_e.pow(Float::with_val(prec, 0.375)))
            }
            // 1/8
            FormName::G => Some(Float::with_val(prec, 0.125)),
            // 2·2^{1/4} / e^{3/8}
            FormName::L => {
                let root = Float::with_val(prec, 2).pow(Float::with_val(prec, 0.25));
                Some(root * 2u32 / e.pow(Float::with_val(prec, 0.375)))
            }
            FormName::VE | FormName::WE => None,
        }
    }

    /// Families whose values enter this form.
    pub fn families(self) -> &'static [FamilyName] {
        match self {
            FormName::F => &[FamilyName::P, FamilyName::Q],
            FormName::G => &[FamilyName::P, FamilyName::Q, FamilyName::R],
            FormName::L => &[FamilyName::U, FamilyName::V, FamilyName::W],
            FormName::VE => &[FamilyName::U, FamilyName::V],
            FormName::WE => &[FamilyName::U, FamilyName::W],
        }
    }
}

impl fmt::Display for FormName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown form `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PrecisionBudget {
    pub n: usize,
    pub form: FormName,
    pub digits: u32,
}

fn log10_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum::<f64>() / LN_10
}

/// `⌈log10((2n)!) + n·log10 16 + √(2n)/ln 10⌉ + 40`, the same coarse bound for
/// every form.
pub fn budget_digits(n: usize) -> u32 {
    let cancel =
        log10_factorial(2 * n) + n as f64 * 16f64.log10() + (2.0 * n as f64).sqrt() / LN_10;
    cancel.ceil() as u32 + BUDGET_MARGIN_DIGITS
}

pub fn precision_budget(form: FormName, n: usize) -> PrecisionBudget {
    PrecisionBudget {
        n,
        form,
        digits: budget_digits(n),
    }
}

/// Asymptotic envelope of `form` at `n ≥ 1`.
pub fn normalizer(form: FormName, n: usize) -> Result<PrecisionReal> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "normalizers are defined for n ≥ 1".into(),
        ));
    }
    let prec = bits_for_digits(NORMALIZER_DIGITS + GUARD_DIGITS) + 64;
    let nf = Float::with_val(prec, n);
    let sqrt_2n = Float::with_val(prec, 2 * n).sqrt();
    let quarter = Float::with_val(prec, 0.25);
    let five_quarters = Float::with_val(prec, 1.25);
    let value = match form {
        FormName::F => {
            let fact = Float::with_val(prec, Integer::from(Integer::factorial(2 * n as u32)));
            fact * Float::with_val(prec, -&sqrt_2n).exp() / nf.pow(&quarter)
        }
        FormName::G => Float::with_val(prec, 16).pow(-(n as i64)),
        FormName::L => {
            nf.pow(&five_quarters)
                * Float::with_val(prec, -&sqrt_2n).exp()
                * Float::with_val(prec, 4).pow(-(n as i64))
        }
        FormName::VE | FormName::WE => {
            nf.pow(&five_quarters) * sqrt_2n.exp() * Float::with_val(prec, 4).pow(-(n as i64))
        }
    };
    Ok(PrecisionReal::new(
        value,
        NORMALIZER_DIGITS,
        Provenance::Composite,
    ))
}

fn int_at(tables: &Tables, name: FamilyName, n: usize) -> Result<&Integer> {
    let family = tables.get(name);
    if n > family.max_n() {
        return Err(Error::InvalidInput(format!(
            "{name} table ends at {}, index {n} requested",
            family.max_n()
        )));
    }
    Ok(family.get(n))
}

/// Raw value of `form` at `n` computed with `digits` significant digits in
/// every constant.
pub fn form_value(
    form: FormName,
    n: usize,
    tables: &Tables,
    constants: &ConstantSet,
    digits: u32,
) -> Result<Float> {
    if constants.digits() < digits {
        return Err(Error::PrecisionBudgetExceeded {
            what: format!("form {form}"),
            n,
            detail: format!(
                "constants carry {} digits, {digits} needed",
                constants.digits()
            ),
        });
    }
    let prec = bits_for_digits(digits);
    let c = |x: &PrecisionReal| Float::with_val(prec, x.value());
    let z = |name| -> Result<Float> { Ok(Float::with_val(prec, int_at(tables, name, n)?)) };
    use FamilyName::*;
    let value = match form {
        FormName::F => z(P)? - c(&constants.gamma) * z(Q)?,
        FormName::G => {
            let mut v = c(&constants.e) * z(P)?;
            v -= c(&constants.egd) * z(Q)?;
            v + z(R)?
        }
        FormName::L => {
            let mut v = z(U)? * c(&constants.delta);
            v -= c(&constants.gamma) * z(V)?;
            v + z(W)?
        }
        FormName::VE => z(V)? + c(&constants.e) * z(U)?,
        FormName::WE => z(W)? + c(&constants.egd) * z(U)?,
    };
    Ok(value)
}

/// One evaluated form.
#[derive(Clone, Debug)]
pub struct FormRecord {
    pub n: usize,
    pub form: FormName,
    pub value: PrecisionReal,
    /// `None` at `n = 0`, where the envelopes are undefined.
    pub normalizer: Option<PrecisionReal>,
    pub normalized: Option<PrecisionReal>,
    pub budget_digits: u32,
}

/// Result of [`FormEvaluator::fit_constant`].
#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub form: FormName,
    pub samples: Vec<(usize, f64)>,
    /// Intercept `a` of `|normalized(n)| ≈ a + b·n^{-k}`.
    pub c_estimate: f64,
    pub slope: f64,
    pub correction_power: f64,
    /// `d ln|normalized| / d ln n` over the last two samples.
    pub decay_exponent: f64,
    /// False when the normalized values keep drifting (reported, not fatal).
    pub converged: bool,
    pub target: Option<f64>,
    pub relative_error: Option<f64>,
}

/// Decay exponent magnitude beyond which a fit is flagged as not converged.
pub const NON_CONVERGENCE_EXPONENT: f64 = 0.25;

/// Sequence tables plus constants precise enough for every form up to `max_n`.
#[derive(Clone, Debug)]
pub struct FormEvaluator {
    tables: Tables,
    constants: ConstantSet,
    max_n: usize,
}

impl FormEvaluator {
    pub fn new(max_n: usize) -> Result<FormEvaluator> {
        let tables = Tables::generate(max_n + 1)?;
        let constants = ConstantSet::compute(budget_digits(max_n + 1) + STABILITY_EXTRA_DIGITS)?;
        Ok(FormEvaluator {
            tables,
            constants,
            max_n,
        })
    }

    pub fn with_parts(tables: Tables, constants: ConstantSet) -> FormEvaluator {
        let max_n = tables.max_n().saturating_sub(1);
        FormEvaluator {
            tables,
            constants,
            max_n,
        }
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    pub fn constants(&self) -> &ConstantSet {
        &self.constants
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn value_at(&self, form: FormName, n: usize, digits: u32) -> Result<Float> {
        form_value(form, n, &self.tables, &self.constants, digits)
    }

    /// Evaluate at the budget and check stability against budget + 20 digits.
    pub fn eval_form(&self, form: FormName, n: usize) -> Result<FormRecord> {
        let budget = budget_digits(n);
        let value = self.value_at(form, n, budget)?;
        let check = self.value_at(form, n, budget + STABILITY_EXTRA_DIGITS)?;

        let (normalizer, normalized) = if n == 0 {
            let drift = Float::with_val(64, &value - &check).abs();
            if drift.to_f64() >= STABILITY_TOLERANCE {
                return Err(unstable(form, n, &drift));
            }
            (None, None)
        } else {
            let norm = normalizer(form, n)?;
            let a = Float::with_val(value.prec(), &value / norm.value());
            let b = Float::with_val(check.prec(), &check / norm.value());
            let drift = Float::with_val(64, &a - &b).abs();
            if drift.to_f64() >= STABILITY_TOLERANCE {
                return Err(unstable(form, n, &drift));
            }
            let normalized = PrecisionReal::new(a, FORM_VALUE_DIGITS, Provenance::Composite);
            (Some(norm), Some(normalized))
        };
        Ok(FormRecord {
            n,
            form,
            value: PrecisionReal::new(value, FORM_VALUE_DIGITS, Provenance::Composite),
            normalizer,
            normalized,
            budget_digits: budget,
        })
    }

    /// `|normalized(n)|` as `f64`.
    pub fn normalized_abs(&self, form: FormName, n: usize) -> Result<f64> {
        let rec = self.eval_form(form, n)?;
        Ok(rec
            .normalized
            .expect("n ≥ 1 has a normalizer")
            .value()
            .to_f64()
            .abs())
    }

    /// Least-squares fit of `|normalized(n)| = a + b·n^{-k}` over `samples`
    /// geometrically spaced points of `range`.
    pub fn fit_constant(
        &self,
        form: FormName,
        range: RangeInclusive<usize>,
        samples: usize,
    ) -> Result<FitResult> {
        let (lo, hi) = (*range.start(), *range.end());
        if lo == 0 || hi > self.max_n {
            return Err(Error::InvalidInput(format!(
                "fit range {lo}..={hi} must lie within 1..={}",
                self.max_n
            )));
        }
        let points = sample_points(lo, hi, samples);
        if points.len() < 8 {
            return Err(Error::InvalidInput(format!(
                "fit needs at least 8 distinct sample points, range {lo}..={hi} gives {}",
                points.len()
            )));
        }
        use rayon::prelude::*;
        let ys = points
            .par_iter()
            .map(|&n| self.normalized_abs(form, n))
            .collect::<Result<Vec<_>>>()?;
        let k = form.correction_power();
        let xs: Vec<f64> = points.iter().map(|&n| (n as f64).powf(-k)).collect();
        let (a, b) = least_squares(&xs, &ys);

        let m = points.len();
        let decay =
            (ys[m - 1] / ys[m - 2]).ln() / (points[m - 1] as f64 / points[m - 2] as f64).ln();
        let target = form.target().map(|t| t.to_f64());
        Ok(FitResult {
            form,
            samples: points.into_iter().zip(ys).collect(),
            c_estimate: a,
            slope: b,
            correction_power: k,
            decay_exponent: decay,
            converged: decay.abs() <= NON_CONVERGENCE_EXPONENT,
            target,
            relative_error: target.map(|t| (a - t).abs() / t),
        })
    }
}

fn unstable(form: FormName, n: usize, drift: &Float) -> Error {
    Error::PrecisionBudgetExceeded {
        what: format!("form {form}"),
        n,
        detail: format!(
            "normalized value moved by {:e} with {STABILITY_EXTRA_DIGITS} extra digits",
            drift.to_f64()
        ),
    }
}

/// Up to `count` distinct integers spread geometrically over `[lo, hi]`,
/// always including both ends.
pub fn sample_points(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count < 2 || lo >= hi {
        return vec![lo];
    }
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (count - 1) as f64);
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((lo as f64) * ratio.powi(i as i32)).round() as usize)
        .map(|n| n.clamp(lo, hi))
        .collect();
    out[count - 1] = hi;
    out.dedup();
    out
}

/// Ordinary least squares `y = a + b·x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::to_decimal;

    fn evaluator(max_n: usize) -> FormEvaluator {
        FormEvaluator::new(max_n).unwrap()
    }

    #[test]
    fn small_n_values() {
        let ev = evaluator(10);
        let l0 = ev.eval_form(FormName::L, 0).unwrap();
        assert_eq!(to_decimal(l0.value.value(), 6), "-0.615479");
        let f1 = ev.eval_form(FormName::F, 1).unwrap();
        assert_eq!(to_decimal(f1.value.value(), 7), "0.2683530");
        let l2 = ev.eval_form(FormName::L, 2).unwrap();
        assert_eq!(to_decimal(l2.value.value(), 6), "-0.0247925");

        // seeds: w_0 + (eγ+δ)u_0 = -2(eγ+δ), v_0 + e·u_0 = -1 - 2e
        let we0 = ev.eval_form(FormName::WE, 0).unwrap();
        assert_eq!(to_decimal(we0.value.value(), 8), "-4.3307644");
        let ve0 = ev.eval_form(FormName::VE, 0).unwrap();
        assert_eq!(to_decimal(ve0.value.value(), 8), "-6.4365637");
    }

    #[test]
    fn normalizer_values() {
        let g5 = normalizer(FormName::G, 5).unwrap();
        assert_eq!(*g5.value(), Float::with_val(64, 1) / 1_048_576u32);
        assert_eq!(
            to_decimal(normalizer(FormName::L, 2).unwrap().value(), 6),
            "0.0201177"
        );
        assert_eq!(
            to_decimal(normalizer(FormName::F, 1).unwrap().value(), 4),
            "0.4862"
        );
        assert!(normalizer(FormName::F, 0).is_err());
    }

    #[test]
    fn targets() {
        assert_eq!(to_decimal(&FormName::F.target().unwrap(), 7), "1.448678");
        assert_eq!(to_decimal(&FormName::L.target().unwrap(), 7), "1.634659");
        assert_eq!(FormName::G.target().unwrap().to_f64(), 0.125);
        assert!(FormName::VE.target().is_none());
    }

    #[test]
    fn budget_formula() {
        assert_eq!(budget_digits(0), 40);
        // log10(2!) + log10(16) + √2/ln 10 = 0.30103 + 1.20412 + 0.61419
        assert_eq!(budget_digits(1), 43);
        let b1000 = budget_digits(1000);
        assert!((6990..7010).contains(&b1000), "{b1000}");
    }

    #[test]
    fn forms_cancel_below_their_coefficients() {
        let ev = evaluator(40);
        for n in 3..=40 {
            for form in FormName::ALL {
                let rec = ev.eval_form(form, n).unwrap();
                let smallest = form
                    .families()
                    .iter()
                    .map(|&f| Float::with_val(64, ev.tables().get(f).get(n)).abs())
                    .fold(None::<Float>, |acc, x| match acc {
                        Some(a) if a < x => Some(a),
                        _ => Some(x),
                    })
                    .unwrap();
                let value = Float::with_val(64, rec.value.value()).abs();
                assert!(value < smallest, "{form} at n = {n}");
            }
        }
    }

    #[test]
    fn insufficient_constants_are_rejected() {
        let tables = Tables::generate(60).unwrap();
        let constants = ConstantSet::compute(50).unwrap();
        let ev = FormEvaluator::with_parts(tables, constants);
        assert!(matches!(
            ev.eval_form(FormName::L, 50),
            Err(Error::PrecisionBudgetExceeded { .. })
        ));
    }

    #[test]
    fn sample_points_are_geometric_and_distinct() {
        let pts = sample_points(100, 1000, 12);
        assert_eq!(pts.len(), 12);
        assert_eq!((pts[0], pts[11]), (100, 1000));
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_points(5, 8, 12), vec![5, 6, 7, 8]);
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let (a, b) = least_squares(&xs, &ys);
        assert!((a - 1.5).abs() < 1e-12 && (b + 0.25).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_short_ranges() {
        let ev = evaluator(30);
        assert!(ev.fit_constant(FormName::F, 20..=25, 12).is_err());
        assert!(ev.fit_constant(FormName::F, 20..=31, 12).is_err());
    }
}
