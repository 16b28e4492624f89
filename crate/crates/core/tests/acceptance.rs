//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::process::ExitCode;
use std::time::Instant;

use euler_forms::cli::{laguerre_errors, suite_rodrigues};
use euler_forms::constants::{
    agree, delta_laguerre_float, delta_series, difference, gamma, gamma_euler_maclaurin,
    to_scientific, ConstantSet, GUARD_DIGITS,
};
use euler_forms::determinant::{
    bilinear_identity_check, bilinear_tolerance, dual_route_tolerance, randomized_transform_trials,
    scaled_uvw,
};
use euler_forms::forms::{budget_digits, FormEvaluator, FormName};
use euler_forms::recurrence::{FamilyName, Tables};
use euler_forms::Result;

type Outcome = Result<(bool, String)>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn seeds() -> Outcome {
    use FamilyName::*;
    let expected: [(FamilyName, &[i64]); 8] = [
        (U, &[-2, 7, 558]),
        (V, &[-1, -22, -1518]),
        (W, &[0, -17, -1209]),
        (P, &[0, 2, 31]),
        (Q, &[1, 3, 50]),
        (R, &[0, 1, 24]),
        (QTilde, &[1, 2]),
        (PTilde, &[0, 1]),
    ];
    let mut bad = Vec::new();
    for (name, want) in expected {
        let fam = name.generate(want.len() - 1)?;
        let got: Vec<i64> = fam.values().iter().map(|v| v.to_i64().unwrap()).collect();
        if got != want {
            bad.push(format!("{name}: {got:?}"));
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            "all printed values reproduced".into()
        } else {
            bad.join("; ")
        },
    ))
}

fn integrality() -> Outcome {
    let tables = Tables::generate(300)?;
    let checked: usize = tables.families().iter().map(|f| f.len()).sum();
    Ok((
        checked == 8 * 301,
        format!("{checked} values certified integral"),
    ))
}

fn determinant() -> Outcome {
    let [u, v, w] = scaled_uvw(300)?;
    let mut ok = *u.get(3) == 82861;
    for det in [u, v, w] {
        let rec = det.name().generate(300)?;
        ok &= det.values() == rec.values();
    }
    Ok((
        ok,
        "scaled casoratians equal u, v, w for n ≤ 300, u_3 = 82861".into(),
    ))
}

fn rodrigues() -> Outcome {
    let q1 = euler_forms::rodrigues::rodrigues_q(1)?.to_string();
    let check = &suite_rodrigues(12)?[0];
    let ok = check.passed && q1 == "z^4 - 11z^3 + 29z^2 - 14z + 1";
    Ok((ok, format!("{}; Q_1 = {q1}", check.detail)))
}

fn delta_convergence() -> Outcome {
    let errs = laguerre_errors(300)?;
    let last = errs[299].to_f64();
    let monotone = errs[9..].windows(2).all(|w| w[1] < w[0]);
    Ok((
        last < 1e-25 && monotone,
        format!("error at n = 300 is {last:.3e}, monotone for n ≥ 10: {monotone}"),
    ))
}

fn rel_dev(ev: &FormEvaluator, form: FormName, n: usize) -> Result<f64> {
    let t = form.target().unwrap().to_f64();
    Ok((ev.normalized_abs(form, n)? - t) / t)
}

/// `|dev(n)|·n^k` along `ladder` never exceeds twice its first value.
fn ladder(ev: &FormEvaluator, form: FormName, ladder: &[usize]) -> Result<(bool, Vec<f64>)> {
    let k = form.correction_power();
    let scaled = ladder
        .iter()
        .map(|&n| Ok(rel_dev(ev, form, n)?.abs() * (n as f64).powf(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok((scaled.iter().all(|&s| s <= 2.0 * scaled[0]), scaled))
}

fn fmt(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn g_constant(ev: &FormEvaluator) -> Outcome {
    let dev = rel_dev(ev, FormName::G, 500)?;
    let (bounded, scaled) = ladder(ev, FormName::G, &[50, 100, 200, 400])?;
    Ok((
        dev.abs() < 0.10 && bounded,
        format!(
            "deviation {dev:.4e} at n = 500; |dev|·n on 50..400: {}",
            fmt(&scaled)
        ),
    ))
}

const GEOMETRIC_LADDER: [usize; 6] = [25, 50, 100, 200, 400, 1000];

fn sqrt_constant(ev: &FormEvaluator, form: FormName) -> Outcome {
    let dev = rel_dev(ev, form, 1000)?;
    let (bounded, scaled) = ladder(ev, form, &GEOMETRIC_LADDER)?;
    Ok((
        dev.abs() < 0.10 && bounded,
        format!(
            "deviation {dev:.4e} at n = 1000; |dev|·√n on 25..1000: {}",
            fmt(&scaled)
        ),
    ))
}

fn envelopes(ev: &FormEvaluator) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for form in [FormName::VE, FormName::WE] {
        let ys = (20..=500)
            .map(|n| ev.normalized_abs(form, n))
            .collect::<Result<Vec<_>>>()?;
        let hi = ys.iter().cloned().fold(0.0, f64::max);
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= hi / lo <= 100.0;
        notes.push(format!("{form} max/min {:.2}", hi / lo));
    }
    Ok((ok, notes.join(", ")))
}

fn identities() -> Outcome {
    let trials = randomized_transform_trials(100, 2024).is_ok();
    let tables = Tables::generate(101)?;
    let constants = ConstantSet::compute(budget_digits(101))?;
    let mut ok = trials;
    let (mut worst_bilinear, mut worst_dual) = (0.0f64, 0.0f64);
    for n in 0..=100 {
        let r = bilinear_identity_check(n, &tables, &constants)?;
        ok &= r.max_bilinear() < bilinear_tolerance(r.working_digits);
        ok &= r.max_dual() < dual_route_tolerance();
        worst_bilinear = worst_bilinear.max(r.max_bilinear());
        worst_dual = worst_dual.max(r.max_dual());
    }
    Ok((
        ok,
        format!(
            "100 random transforms exact: {trials}; worst bilinear residual {worst_bilinear:.2e}, worst dual {worst_dual:.2e}"
        ),
    ))
}

fn constants_cross() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for d in [50u32, 500, 2000] {
        let g1 = gamma(d + GUARD_DIGITS);
        let g2 = gamma_euler_maclaurin(d + GUARD_DIGITS);
        let d1 = delta_series(d + GUARD_DIGITS, &gamma(d + 2 * GUARD_DIGITS))?;
        let d2 = delta_laguerre_float(d + GUARD_DIGITS);
        ok &= agree("gamma", &g1, &g2, d).is_ok() && agree("delta", &d1, &d2, d).is_ok();
        notes.push(format!(
            "{d}: {}/{}",
            to_scientific(&difference(&g1, &g2), 2),
            to_scientific(&difference(&d1, &d2), 2)
        ));
    }
    Ok((
        ok,
        format!("gamma/delta route differences {}", notes.join(", ")),
    ))
}

fn main() -> ExitCode {
    let ev = FormEvaluator::new(1000).expect("tables and constants to n = 1000");
    let criteria: Vec<Criterion> = vec![
        ("seed reproduction", Box::new(seeds)),
        ("integrality", Box::new(integrality)),
        ("determinant oracle", Box::new(determinant)),
        ("rodrigues oracle", Box::new(rodrigues)),
        ("delta convergence", Box::new(delta_convergence)),
        ("g-form constant", Box::new(|| g_constant(&ev))),
        (
            "f-form constant",
            Box::new(|| sqrt_constant(&ev, FormName::F)),
        ),
        (
            "l-form constant",
            Box::new(|| sqrt_constant(&ev, FormName::L)),
        ),
        ("second-regime envelopes", Box::new(|| envelopes(&ev))),
        ("identity suite", Box::new(identities)),
        ("constants cross-validation", Box::new(constants_cross)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "criterion {:>2}: {} {name} ({:.1}s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
