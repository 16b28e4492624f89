//! Casorati determinants of the γ-form coefficient sequences.
//!
//! Convention, fixed everywhere: `Δ^{(ab)}(n) = a(n+1)·b(n) - a(n)·b(n+1)`.
//! In this convention
//!
//! * `u_n = Δ^{(qp)}(n)/(n!)²`, `v_n = Δ^{(qr)}(n)/(n!)²`, `w_n = Δ^{(pr)}(n)/(n!)²`;
//! * if `x(n+1) = A_n x(n) + B_n x(n-1) + C_n x(n-2)` then
//!   `Δ(n) = -B_n Δ(n-1) - C_n A_{n-1} Δ(n-2) + C_n C_{n-1} Δ(n-3)`;
//! * with `f = p - γq`, `g = e·p - (eγ+δ)·q + r`, bilinearity gives
//!   `Δ^{(qg)} = e·Δ^{(qp)} + Δ^{(qr)}`,
//!   `Δ^{(pg)} = -(eγ+δ)·Δ^{(pq)} + Δ^{(pr)}`,
//!   `Δ^{(fg)} = -δ·Δ^{(pq)} + Δ^{(pr)} - γ·Δ^{(qr)} = (n!)²·l_n`.

use std::sync::Arc;

use rand::Rng;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::constants::{bits_for_digits, ConstantSet, GUARD_DIGITS};
use crate::error::{Error, Result};
use crate::forms::{budget_digits, form_value, FormName, BUDGET_MARGIN_DIGITS};
use crate::recurrence::{FamilyName, RecurrenceSpec, SequenceFamily, Tables};

/// `Δ^{(ab)}(n)` for integer tables.
#[derive(Clone, Debug)]
pub struct CasoratiPair {
    pub a: FamilyName,
    pub b: FamilyName,
    pub delta: Vec<Integer>,
}

/// `a(n+1)·b(n) - a(n)·b(n+1)` for `0 ≤ n ≤ len - 2`.
pub fn casorati_values(a: &[Integer], b: &[Integer]) -> Result<Vec<Integer>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok((0..a.len().saturating_sub(1))
        .map(|n| {
            let mut d = Integer::from(&a[n + 1] * &b[n]);
            d -= Integer::from(&a[n] * &b[n + 1]);
            d
        })
        .collect())
}

pub fn casoratian(a: &SequenceFamily, b: &SequenceFamily) -> Result<CasoratiPair> {
    Ok(CasoratiPair {
        a: a.name(),
        b: b.name(),
        delta: casorati_values(a.values(), b.values())?,
    })
}

impl CasoratiPair {
    pub fn to_csv(&self) -> String {
        let mut out = format!("n,delta_{}{}\n", self.a, self.b);
        for (n, d) in self.delta.iter().enumerate() {
            out.push_str(&format!("{n},{d}\n"));
        }
        out
    }

    /// `Δ(n)/(n!)²`, asserting exact divisibility.
    pub fn scaled_by_factorial_square(&self, name: FamilyName) -> Result<Vec<Integer>> {
        let mut fact = Integer::from(1);
        let mut out = Vec::with_capacity(self.delta.len());
        for (n, d) in self.delta.iter().enumerate() {
            if n > 0 {
                fact *= n as u32;
            }
            let sq = Integer::from(&fact * &fact);
            if !d.is_divisible(&sq) {
                return Err(Error::integrality(name, n, Rational::from((d.clone(), sq))));
            }
            out.push(Integer::from(d.div_exact_ref(&sq)));
        }
        Ok(out)
    }
}

/// `u, v, w` as scaled Casoratians of `q, p, r` from tables reaching `max_n + 1`.
pub fn scaled_uvw_from(
    p: &SequenceFamily,
    q: &SequenceFamily,
    r: &SequenceFamily,
) -> Result<[SequenceFamily; 3]> {
    let u = casoratian(q, p)?.scaled_by_factorial_square(FamilyName::U)?;
    let v = casoratian(q, r)?.scaled_by_factorial_square(FamilyName::V)?;
    let w = casoratian(p, r)?.scaled_by_factorial_square(FamilyName::W)?;
    Ok([
        SequenceFamily::from_table(FamilyName::U, u),
        SequenceFamily::from_table(FamilyName::V, v),
        SequenceFamily::from_table(FamilyName::W, w),
    ])
}

/// `u, v, w` for `0 ≤ n ≤ max_n` through the determinant route.
pub fn scaled_uvw(max_n: usize) -> Result<[SequenceFamily; 3]> {
    let p = FamilyName::P.generate(max_n + 1)?;
    let q = FamilyName::Q.generate(max_n + 1)?;
    let r = FamilyName::R.generate(max_n + 1)?;
    scaled_uvw_from(&p, &q, &r)
}

pub type CoeffFn = Arc<dyn Fn(usize) -> Rational + Send + Sync>;

/// `x(n+1) = A_n x(n) + B_n x(n-1) + C_n x(n-2)` for `n ≥ start`.
#[derive(Clone)]
pub struct FourTermRecurrence {
    pub a: CoeffFn,
    pub b: CoeffFn,
    pub c: CoeffFn,
    pub start: usize,
}

impl FourTermRecurrence {
    pub fn new(a: CoeffFn, b: CoeffFn, c: CoeffFn, start: usize) -> Self {
        FourTermRecurrence { a, b, c, start }
    }

    pub fn from_spec(spec: &RecurrenceSpec) -> Result<Self> {
        if spec.order() != 4 {
            return Err(Error::InvalidInput(format!(
                "{} has order {}, need a four-term recurrence",
                spec.name(),
                spec.order()
            )));
        }
        let coeff = |j: usize| -> CoeffFn {
            let spec = spec.clone();
            Arc::new(move |n| spec.coeff(n, j))
        };
        Ok(FourTermRecurrence::new(
            coeff(0),
            coeff(1),
            coeff(2),
            spec.start(),
        ))
    }

    /// Extend three seeds to indices `0..=max_n`.
    pub fn solve(&self, seeds: [Rational; 3], max_n: usize) -> Vec<Rational> {
        let mut x: Vec<Rational> = seeds.into_iter().collect();
        for n in self.start..max_n {
            let mut next = Rational::from(&(self.a)(n) * &x[n]);
            next += Rational::from(&(self.b)(n) * &x[n - 1]);
            next += Rational::from(&(self.c)(n) * &x[n - 2]);
            x.push(next);
        }
        x.truncate(max_n + 1);
        x
    }
}

/// Recurrence satisfied by `Δ^{(ab)}` for any two solutions `a, b`:
/// `Δ(n) = -B_n Δ(n-1) - C_n A_{n-1} Δ(n-2) + C_n C_{n-1} Δ(n-3)`, `n ≥ start + 1`.
#[derive(Clone)]
pub struct TransformedRecurrence {
    base: FourTermRecurrence,
}

pub fn transform_recurrence(base: &FourTermRecurrence) -> TransformedRecurrence {
    TransformedRecurrence { base: base.clone() }
}

impl TransformedRecurrence {
    /// First index the transformed recurrence produces.
    pub fn first_index(&self) -> usize {
        self.base.start + 1
    }

    /// Coefficients of `Δ(n-1), Δ(n-2), Δ(n-3)`.
    pub fn coeffs(&self, n: usize) -> [Rational; 3] {
        let FourTermRecurrence { a, b, c, .. } = &self.base;
        let c_n = c(n);
        [
            -b(n),
            -Rational::from(&c_n * &a(n - 1)),
            Rational::from(&c_n * &c(n - 1)),
        ]
    }

    /// Coefficients for `x(n) = Δ(n)/s(n)` in terms of `x(n-1), x(n-2), x(n-3)`.
    pub fn scaled_coeffs(&self, n: usize, scale: impl Fn(usize) -> Rational) -> [Rational; 3] {
        let s_n = scale(n);
        let [c1, c2, c3] = self.coeffs(n);
        [
            c1 * scale(n - 1) / &s_n,
            c2 * scale(n - 2) / &s_n,
            c3 * scale(n - 3) / &s_n,
        ]
    }

    /// Continue `Δ(0..first_index)` to `0..=max_n`.
    pub fn solve(&self, seeds: &[Rational], max_n: usize) -> Result<Vec<Rational>> {
        let first = self.first_index();
        if seeds.len() != first {
            return Err(Error::InvalidInput(format!(
                "transformed recurrence needs {first} seeds, got {}",
                seeds.len()
            )));
        }
        let mut d = seeds.to_vec();
        for n in first..=max_n {
            let [c1, c2, c3] = self.coeffs(n);
            let mut next = c1 * &d[n - 1];
            next += c2 * &d[n - 2];
            next += c3 * &d[n - 3];
            d.push(next);
        }
        d.truncate(max_n + 1);
        Ok(d)
    }
}

/// Rational Casoratian of two rational sequences.
pub fn casorati_rational(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    (0..a.len().min(b.len()).saturating_sub(1))
        .map(|n| {
            let mut d = Rational::from(&a[n + 1] * &b[n]);
            d -= Rational::from(&a[n] * &b[n + 1]);
            d
        })
        .collect()
}

fn factorial_square(n: usize) -> Rational {
    let f = Integer::from(Integer::factorial(n as u32));
    Rational::from(Integer::from(&f * &f))
}

/// Transform the γ-form recurrence, rescale by `(n!)²` and compare with the
/// u, v, w recurrence coefficient by coefficient (exact rationals). Returns
/// the first index where they differ.
pub fn transformed_matches_uvw_recurrence(max_n: usize) -> Result<Option<usize>> {
    let gamma = FourTermRecurrence::from_spec(&RecurrenceSpec::gamma_forms())?;
    let uvw = RecurrenceSpec::gamma_delta_forms();
    let t = transform_recurrence(&gamma);
    for m in uvw.start()..=max_n {
        // Δ(m+1) from Δ(m), Δ(m-1), Δ(m-2) ↔ u(m+1) from u(m), u(m-1), u(m-2).
        let scaled = t.scaled_coeffs(m + 1, factorial_square);
        if (0..3).any(|j| scaled[j] != uvw.coeff(m, j)) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// One randomized equivalence trial: random rational `A, B, C` over
/// `2 ≤ n ≤ max_n`, two random integer solutions, stepped Δ vs direct Δ.
pub fn random_transform_trial<R: Rng>(rng: &mut R, max_n: usize) -> Result<()> {
    let rand_q = |rng: &mut R| {
        let num: i64 = rng.gen_range(-30..=30);
        let den: i64 = rng.gen_range(1..=12);
        Rational::from((num, den))
    };
    let table = |rng: &mut R| -> Vec<Rational> { (0..=max_n).map(|_| rand_q(rng)).collect() };
    let (ta, tb, tc) = (table(rng), table(rng), table(rng));
    let lookup = |t: Vec<Rational>| -> CoeffFn { Arc::new(move |n| t[n].clone()) };
    let rec = FourTermRecurrence::new(lookup(ta), lookup(tb), lookup(tc), 2);

    let mut seeds =
        || -> [Rational; 3] { std::array::from_fn(|_| Rational::from(rng.gen_range(-50i64..=50))) };
    let a = rec.solve(seeds(), max_n + 1);
    let b = rec.solve(seeds(), max_n + 1);
    let direct = casorati_rational(&a, &b);
    let stepped = transform_recurrence(&rec).solve(&direct[..3], max_n)?;
    match direct.iter().zip(&stepped).position(|(x, y)| x != y) {
        None => Ok(()),
        Some(n) => Err(Error::InvalidInput(format!(
            "transformed recurrence disagrees with direct Casoratian at n = {n}"
        ))),
    }
}

/// Run `trials` seeded random trials over `2 ≤ n ≤ 20`.
pub fn randomized_transform_trials(trials: usize, seed: u64) -> Result<usize> {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    for _ in 0..trials {
        random_transform_trial(&mut rng, 20)?;
    }
    Ok(trials)
}

/// Residuals of the Casoratian identities at one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityResiduals {
    pub n: usize,
    pub working_digits: u32,
    /// `|LHS - RHS| / max|term|` for `Δ^{(qg)} = e·Δ^{(qp)} + Δ^{(qr)}`.
    pub qg: f64,
    /// Same for `Δ^{(pg)} = -(eγ+δ)·Δ^{(pq)} + Δ^{(pr)}`.
    pub pg: f64,
    /// Same for `Δ^{(fg)} = -δ·Δ^{(pq)} + Δ^{(pr)} - γ·Δ^{(qr)}`.
    pub fg: f64,
    /// `|l_n - Δ^{(fg)}/(n!)²| / |l_n|`, with `l_n` from the u, v, w tables.
    pub l_dual: f64,
    /// `|l_n - e·Δ^{(fĝ)}/(n!)²| / |l_n|` with `ĝ = g/e`.
    pub l_scaled_variant: f64,
    /// `|vE_n - Δ^{(qg)}/(n!)²| / |vE_n|`.
    pub ve_dual: f64,
    /// `|wE_n - Δ^{(pg)}/(n!)²| / |wE_n|`.
    pub we_dual: f64,
}

impl IdentityResiduals {
    /// Largest bilinear residual (`qg`, `pg`, `fg`).
    pub fn max_bilinear(&self) -> f64 {
        self.qg.max(self.pg).max(self.fg)
    }

    /// Largest dual-route residual (`l`, `vE`, `wE`, scaled variant).
    pub fn max_dual(&self) -> f64 {
        self.l_dual
            .max(self.l_scaled_variant)
            .max(self.ve_dual)
            .max(self.we_dual)
    }
}

/// Tolerance on bilinear residuals at a working precision of `digits`.
pub fn bilinear_tolerance(digits: u32) -> f64 {
    10f64.powi(-((digits.saturating_sub(GUARD_DIGITS)).min(300) as i32))
}

/// Tolerance on the relative dual-route residuals of the small forms.
pub fn dual_route_tolerance() -> f64 {
    10f64.powi(-((BUDGET_MARGIN_DIGITS - GUARD_DIGITS) as i32))
}

fn rel(lhs: &Float, rhs: &Float, scale: &Float) -> f64 {
    let diff = Float::with_val(lhs.prec(), lhs - rhs).abs();
    if scale.is_zero() {
        return diff.to_f64();
    }
    (diff / scale).to_f64()
}

fn max_abs(xs: &[&Float]) -> Float {
    xs.iter()
        .map(|x| Float::with_val(64, *x).abs())
        .fold(Float::with_val(64, 0), |a, b| if b > a { b } else { a })
}

/// Evaluate both sides of the three bilinear identities and the dual routes
/// for `l, vE, wE` at `n`. Tables must reach `n + 1`.
pub fn bilinear_identity_check(
    n: usize,
    tables: &Tables,
    constants: &ConstantSet,
) -> Result<IdentityResiduals> {
    let digits = budget_digits(n + 1);
    if constants.digits() < digits {
        return Err(Error::PrecisionBudgetExceeded {
            what: "bilinear identities".into(),
            n,
            detail: format!(
                "constants carry {} digits, {digits} needed",
                constants.digits()
            ),
        });
    }
    let prec = bits_for_digits(digits);
    let fl = |x: &Integer| Float::with_val(prec, x);
    let c = |x: &crate::constants::PrecisionReal| Float::with_val(prec, x.value());
    let (gamma, delta, e, egd) = (
        c(&constants.gamma),
        c(&constants.delta),
        c(&constants.e),
        c(&constants.egd),
    );

    let get = |name: FamilyName| -> Result<[Float; 2]> {
        let fam = tables.get(name);
        if fam.max_n() < n + 1 {
            return Err(Error::InvalidInput(format!(
                "{name} table ends at {}, identities at n = {n} need {}",
                fam.max_n(),
                n + 1
            )));
        }
        Ok([fl(fam.get(n)), fl(fam.get(n + 1))])
    };
    let [p0, p1] = get(FamilyName::P)?;
    let [q0, q1] = get(FamilyName::Q)?;
    let [r0, r1] = get(FamilyName::R)?;
    let cas = |a0: &Float, a1: &Float, b0: &Float, b1: &Float| -> Float {
        let mut d = Float::with_val(prec, a1 * b0);
        d -= Float::with_val(prec, a0 * b1);
        d
    };
    let g_at = |m| form_value(FormName::G, m, tables, constants, digits);
    let f_at = |m| form_value(FormName::F, m, tables, constants, digits);
    let (g0, g1, f0, f1) = (g_at(n)?, g_at(n + 1)?, f_at(n)?, f_at(n + 1)?);

    let d_qp = cas(&q0, &q1, &p0, &p1);
    let d_pq = Float::with_val(prec, -&d_qp);
    let d_qr = cas(&q0, &q1, &r0, &r1);
    let d_pr = cas(&p0, &p1, &r0, &r1);

    let d_qg = cas(&q0, &q1, &g0, &g1);
    let t1 = Float::with_val(prec, &e * &d_qp);
    let rhs_qg = Float::with_val(prec, &t1 + &d_qr);
    let qg = rel(&d_qg, &rhs_qg, &max_abs(&[&d_qg, &t1, &d_qr]));

    let d_pg = cas(&p0, &p1, &g0, &g1);
    let t1 = -Float::with_val(prec, &egd * &d_pq);
    let rhs_pg = Float::with_val(prec, &t1 + &d_pr);
    let pg = rel(&d_pg, &rhs_pg, &max_abs(&[&d_pg, &t1, &d_pr]));

    let d_fg = cas(&f0, &f1, &g0, &g1);
    let t1 = -Float::with_val(prec, &delta * &d_pq);
    let t3 = -Float::with_val(prec, &gamma * &d_qr);
    let mut rhs_fg = Float::with_val(prec, &t1 + &d_pr);
    rhs_fg += &t3;
    let fg = rel(&d_fg, &rhs_fg, &max_abs(&[&d_fg, &t1, &d_pr, &t3]));

    let fact_sq = Float::with_val(prec, factorial_square(n).numer());
    let l = form_value(FormName::L, n, tables, constants, digits)?;
    let l_abs = Float::with_val(64, &l).abs();
    let l_from_det = Float::with_val(prec, &d_fg / &fact_sq);
    let l_dual = rel(&l, &l_from_det, &l_abs);

    let g_hat0 = Float::with_val(prec, &g0 / &e);
    let g_hat1 = Float::with_val(prec, &g1 / &e);
    let d_fgh = cas(&f0, &f1, &g_hat0, &g_hat1);
    let l_variant = Float::with_val(prec, &e * &d_fgh) / &fact_sq;
    let l_scaled_variant = rel(&l, &l_variant, &l_abs);

    let ve = form_value(FormName::VE, n, tables, constants, digits)?;
    let ve_dual = rel(
        &ve,
        &Float::with_val(prec, &d_qg / &fact_sq),
        &Float::with_val(64, &ve).abs(),
    );
    let we = form_value(FormName::WE, n, tables, constants, digits)?;
    let we_dual = rel(
        &we,
        &Float::with_val(prec, &d_pg / &fact_sq),
        &Float::with_val(64, &we).abs(),
    );

    Ok(IdentityResiduals {
        n,
        working_digits: digits,
        qg,
        pg,
        fg,
        l_dual,
        l_scaled_variant,
        ve_dual,
        we_dual,
    })
}
