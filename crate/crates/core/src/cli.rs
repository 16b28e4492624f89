//! Command-line front end: argument parsing, the table cache, verification
//! suites and output formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;

use crate::constants::{
    self, agree, delta_laguerre_float, delta_series, difference, e_const, gamma,
    gamma_euler_maclaurin, to_scientific, ConstantSet, PrecisionReal, GUARD_DIGITS,
};
use crate::determinant::{
    bilinear_identity_check, bilinear_tolerance, dual_route_tolerance, randomized_transform_trials,
    scaled_uvw_from, transformed_matches_uvw_recurrence,
};
use crate::error::{Error, Result};
use crate::forms::{budget_digits, FormEvaluator, FormName, STABILITY_EXTRA_DIGITS};
use crate::recurrence::{FamilyName, SequenceFamily, Tables};
use crate::rodrigues::{extract_pq, rodrigues_q};

/// Environment variable naming the table cache directory.
pub const CACHE_ENV: &str = "EULER_FORMS_CACHE";

/// Random indices re-stepped when a cached table is loaded.
pub const CACHE_REVALIDATION_SAMPLES: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "euler-forms",
    version,
    about = "Integer sequences and linear forms in the Euler and Gompertz constants"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for cached sequence tables.
    #[arg(long, global = true, env = CACHE_ENV)]
    pub cache_dir: Option<PathBuf>,

    /// Extra decimal digits carried beyond each requested precision.
    #[arg(long, global = true, default_value_t = GUARD_DIGITS)]
    pub guard_digits: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate certified integer sequence tables.
    Gen(GenArgs),
    /// Print γ, δ, e or e·γ+δ to the requested number of digits.
    Constants(ConstantsArgs),
    /// Evaluate a linear form for 0 ≤ n ≤ max-n.
    Forms(FormsArgs),
    /// Fit the asymptotic constant of a linear form.
    Fit(FitArgs),
    /// Build Q_n symbolically and extract (p_n, q_n).
    Rodrigues(RodriguesArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// uvw, pqr, laguerre, all, or a single family name.
    #[arg(long)]
    pub family: FamilySelector,
    #[arg(long)]
    pub max_n: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstantName {
    Gamma,
    Delta,
    E,
    Egd,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub which: ConstantName,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub digits: u32,
    /// `table` prints the bare decimal expansion.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FormsArgs {
    #[arg(long)]
    pub which: FormName,
    #[arg(long)]
    pub max_n: usize,
    /// Add the envelope-normalized value as a third column.
    #[arg(long)]
    pub normalized: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub form: FormName,
    /// Inclusive index range, e.g. `100..1000`.
    #[arg(long, value_parser = parse_range)]
    pub range: RangeInclusive<usize>,
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RodriguesArgs {
    #[arg(long)]
    pub n: usize,
    /// Also print Q_n as a polynomial in z.
    #[arg(long)]
    pub print_poly: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Integrality,
    Determinant,
    Rodrigues,
    Identities,
    Asymptotics,
    Constants,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Integrality,
        Suite::Determinant,
        Suite::Rodrigues,
        Suite::Identities,
        Suite::Asymptotics,
        Suite::Constants,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Integrality => "integrality",
            Suite::Determinant => "determinant",
            Suite::Rodrigues => "rodrigues",
            Suite::Identities => "identities",
            Suite::Asymptotics => "asymptotics",
            Suite::Constants => "constants",
        }
    }
}

pub fn suites() -> &'static [Suite] {
    &Suite::ALL
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub suite: Suite,
    #[arg(long, default_value_t = 100)]
    pub max_n: usize,
    /// Digit counts for the constants suite.
    #[arg(long, value_delimiter = ',', default_values_t = [50u32, 500, 2000])]
    pub digits: Vec<u32>,
    /// Include wall-clock timings (makes the output non-reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let lo: usize = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let hi: usize = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok(lo..=hi)
}

/// Family selector accepted by `gen --family`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySelector(pub Vec<FamilyName>);

impl FromStr for FamilySelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        use FamilyName::*;
        let names = match s {
            "uvw" => vec![U, V, W],
            "pqr" => vec![P, Q, R],
            "laguerre" => vec![PTilde, QTilde],
            "all" => FamilyName::ALL.to_vec(),
            other => vec![other.parse::<FamilyName>().map_err(|e| e.to_string())?],
        };
        Ok(FamilySelector(names))
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Failure = 1,
    Usage = 2,
}

/// Parse `args` (including the program name) and run, writing results to
/// `out` and one-line diagnostics to `err`.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return Exit::Success;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return Exit::Usage;
        }
    };
    match run(&config, out) {
        Ok(exit) => exit,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidInput(_) => Exit::Usage,
                _ => Exit::Failure,
            }
        }
    }
}

pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<Exit> {
    let cache = config.cache_dir.as_deref();
    let text = match &config.command {
        Command::Gen(a) => gen(a, cache)?,
        Command::Constants(a) => constants_cmd(a, config.guard_digits)?,
        Command::Forms(a) => forms_cmd(a, cache)?,
        Command::Fit(a) => fit_cmd(a, cache)?,
        Command::Rodrigues(a) => rodrigues_cmd(a)?,
        Command::Verify(a) => {
            let report = verify(a, cache)?;
            let exit = if report.passed {
                Exit::Success
            } else {
                Exit::Failure
            };
            out.write_all(report.render(a.format)?.as_bytes())?;
            return Ok(exit);
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(Exit::Success)
}

// ---------------------------------------------------------------- cache

fn cache_path(dir: &Path, name: FamilyName) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// Load `name` from the cache if it covers `max_n` and survives re-stepping
/// of random indices; otherwise generate and store it.
pub fn cached_family(
    name: FamilyName,
    max_n: usize,
    cache: Option<&Path>,
) -> Result<SequenceFamily> {
    let Some(dir) = cache else {
        return name.generate(max_n);
    };
    let path = cache_path(dir, name);
    if let Some(family) = load_cached(&path, name, max_n)? {
        return Ok(family.truncated(max_n));
    }
    let family = name.generate(max_n)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Cache {
        path: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    // Write-then-rename keeps concurrent readers from seeing a partial file.
    let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
    std::fs::write(&tmp, family.to_json())?;
    std::fs::rename(&tmp, &path)?;
    Ok(family)
}

fn load_cached(path: &Path, name: FamilyName, max_n: usize) -> Result<Option<SequenceFamily>> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(None);
    };
    let Ok(family) = SequenceFamily::from_json(&text) else {
        return Ok(None);
    };
    if family.name() != name || family.max_n() < max_n {
        return Ok(None);
    }
    Ok(revalidate(&family)?.then_some(family))
}

/// Re-step a few random indices of a loaded table.
pub fn revalidate(family: &SequenceFamily) -> Result<bool> {
    let first = family.initial().len();
    if family.max_n() < first {
        return Ok(true);
    }
    let mut rng = rand::thread_rng();
    for _ in 0..CACHE_REVALIDATION_SAMPLES {
        let n = rng.gen_range(first..=family.max_n());
        if !family.restep(n)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn cached_tables(max_n: usize, cache: Option<&Path>) -> Result<Tables> {
    let families = FamilyName::ALL
        .par_iter()
        .map(|&name| cached_family(name, max_n, cache))
        .collect::<Result<Vec<_>>>()?;
    Tables::from_families(families)
}

fn evaluator(max_n: usize, cache: Option<&Path>) -> Result<FormEvaluator> {
    let tables = cached_tables(max_n + 1, cache)?;
    let constants = ConstantSet::compute(budget_digits(max_n + 1) + STABILITY_EXTRA_DIGITS)?;
    Ok(FormEvaluator::with_parts(tables, constants))
}

// ---------------------------------------------------------------- gen

fn gen(args: &GenArgs, cache: Option<&Path>) -> Result<String> {
    let families = args
        .family
        .0
        .iter()
        .map(|&name| cached_family(name, args.max_n, cache))
        .collect::<Result<Vec<_>>>()?;
    Ok(match args.format {
        Format::Csv => {
            let header: Vec<&str> = families.iter().map(|f| f.name().as_str()).collect();
            let mut out = format!("n,{}\n", header.join(","));
            for n in 0..=args.max_n {
                let row: Vec<String> = families.iter().map(|f| f.get(n).to_string()).collect();
                let _ = writeln!(out, "{n},{}", row.join(","));
            }
            out
        }
        Format::Json => {
            let docs = families
                .iter()
                .map(|f| serde_json::from_str::<serde_json::Value>(&f.to_json()))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut s = serde_json::to_string_pretty(&docs)?;
            s.push('\n');
            s
        }
        Format::Table => {
            let mut header = vec!["n".to_string()];
            header.extend(families.iter().map(|f| f.name().to_string()));
            let rows = (0..=args.max_n)
                .map(|n| {
                    let mut row = vec![n.to_string()];
                    row.extend(families.iter().map(|f| f.get(n).to_string()));
                    row
                })
                .collect::<Vec<_>>();
            table(&header, &rows)
        }
    })
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        padded.join("  ") + "\n"
    };
    let mut out = line(header);
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

// ---------------------------------------------------------------- constants

#[derive(Serialize)]
struct CrossCheck {
    route: &'static str,
    agrees: bool,
    difference: String,
}

#[derive(Serialize)]
struct ConstantReport {
    constant: &'static str,
    digits: u32,
    value: String,
    provenance: &'static str,
    cross_check: Option<CrossCheck>,
}

fn constants_cmd(args: &ConstantsArgs, guard: u32) -> Result<String> {
    let d = args.digits;
    let (name, primary, second): (&'static str, PrecisionReal, Option<PrecisionReal>) =
        match args.which {
            ConstantName::Gamma => (
                "gamma",
                gamma(d + guard),
                (args.format == Format::Json).then(|| gamma_euler_maclaurin(d + guard)),
            ),
            ConstantName::Delta => (
                "delta",
                delta_series(d + guard, &gamma(d + 2 * guard))?,
                (args.format == Format::Json).then(|| delta_laguerre_float(d + guard)),
            ),
            ConstantName::E => ("e", e_const(d + guard), None),
            ConstantName::Egd => ("egd", constants::egd(d + guard)?, None),
        };
    let value = primary.to_decimal(d);
    if args.format != Format::Json {
        return Ok(value + "\n");
    }
    let cross_check = second.map(|s| CrossCheck {
        route: s.provenance().as_str(),
        agrees: agree(name, &primary, &s, d).is_ok(),
        difference: to_scientific(&difference(&primary, &s), 3),
    });
    let report = ConstantReport {
        constant: name,
        digits: d,
        value,
        provenance: primary.provenance().as_str(),
        cross_check,
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

// ---------------------------------------------------------------- forms and fits

/// Significant digits printed for form values.
pub const FORM_OUTPUT_DIGITS: u32 = 20;

#[derive(Serialize)]
struct FormRow {
    n: usize,
    value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    normalized: Option<String>,
}

fn forms_cmd(args: &FormsArgs, cache: Option<&Path>) -> Result<String> {
    let ev = evaluator(args.max_n, cache)?;
    let rows = (0..=args.max_n)
        .into_par_iter()
        .map(|n| {
            let rec = ev.eval_form(args.which, n)?;
            let normalized = args.normalized.then(|| {
                rec.normalized
                    .as_ref()
                    .map(|v| to_scientific(v.value(), FORM_OUTPUT_DIGITS))
                    .unwrap_or_default()
            });
            Ok(FormRow {
                n,
                value: to_scientific(rec.value.value(), FORM_OUTPUT_DIGITS),
                normalized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match args.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv | Format::Table => {
            let mut header = vec!["n".to_string(), "value".to_string()];
            if args.normalized {
                header.push("normalized".into());
            }
            let cells: Vec<Vec<String>> = rows
                .into_iter()
                .map(|r| {
                    let mut row = vec![r.n.to_string(), r.value];
                    row.extend(r.normalized);
                    row
                })
                .collect();
            if args.format == Format::Table {
                table(&header, &cells)
            } else {
                let mut out = header.join(",") + "\n";
                for row in cells {
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                out
            }
        }
    })
}

fn fit_cmd(args: &FitArgs, cache: Option<&Path>) -> Result<String> {
    let ev = evaluator(*args.range.end(), cache)?;
    let fit = ev.fit_constant(args.form, args.range.clone(), args.samples)?;
    Ok(match args.format {
        Format::Json => serde_json::to_string_pretty(&fit)? + "\n",
        Format::Csv => {
            let mut out = "n,normalized_abs\n".to_string();
            for (n, y) in &fit.samples {
                let _ = writeln!(out, "{n},{y:e}");
            }
            out
        }
        Format::Table => {
            let mut out = format!("form        {}\n", fit.form);
            let _ = writeln!(out, "estimate    {:.6}", fit.c_estimate);
            if let (Some(t), Some(r)) = (fit.target, fit.relative_error) {
                let _ = writeln!(out, "target      {t:.6}");
                let _ = writeln!(out, "rel. error  {r:.3e}");
            }
            let _ = writeln!(out, "decay       {:.3}", fit.decay_exponent);
            let _ = writeln!(out, "converged   {}", fit.converged);
            out
        }
    })
}

// ---------------------------------------------------------------- rodrigues

#[derive(Serialize)]
struct RodriguesReport {
    n: usize,
    /// Coefficients of `z^0, z^1, …` as exact rationals.
    coefficients: Vec<String>,
    p: String,
    q: String,
}

fn rodrigues_cmd(args: &RodriguesArgs) -> Result<String> {
    let poly = rodrigues_q(args.n)?;
    let (p, q) = extract_pq(&poly)?;
    Ok(match args.format {
        Format::Json => {
            let report = RodriguesReport {
                n: args.n,
                coefficients: poly.coeffs().iter().map(Rational::to_string).collect(),
                p: p.to_string(),
                q: q.to_string(),
            };
            serde_json::to_string_pretty(&report)? + "\n"
        }
        Format::Csv => {
            let mut out = "k,coefficient\n".to_string();
            for (k, c) in poly.coeffs().iter().enumerate() {
                let _ = writeln!(out, "{k},{c}");
            }
            out
        }
        Format::Table => {
            let mut out = String::new();
            if args.print_poly {
                let _ = writeln!(out, "Q_{}(z) = {poly}", args.n);
            }
            let _ = writeln!(out, "p_{} = {p}", args.n);
            let _ = writeln!(out, "q_{} = {q}", args.n);
            out
        }
    })
}

// ---------------------------------------------------------------- verify

/// One pass/fail line of a report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Worst residual or deviation seen, as a decimal string.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<String>,
    /// Index at which the bound is tightest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tightest_n: Option<usize>,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
            worst: None,
            tightest_n: None,
        }
    }

    fn worst(mut self, value: f64, n: Option<usize>) -> Self {
        self.worst = Some(format!("{value:.3e}"));
        self.tightest_n = n;
        self
    }

    /// For values that may lie below the `f64` range.
    fn worst_exact(mut self, value: &Float) -> Self {
        self.worst = Some(if value.is_zero() {
            "0".into()
        } else {
            to_scientific(value, 4)
        });
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub max_n: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Milliseconds per check; only present when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u128>>,
}

impl VerificationReport {
    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => serde_json::to_string_pretty(self)? + "\n",
            Format::Csv => {
                let mut out = "check,passed,worst,tightest_n,detail\n".to_string();
                for c in &self.checks {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},\"{}\"",
                        c.name,
                        c.passed,
                        c.worst.as_deref().unwrap_or(""),
                        c.tightest_n.map(|n| n.to_string()).unwrap_or_default(),
                        c.detail.replace('"', "\"\"")
                    );
                }
                out
            }
            Format::Table => {
                let mut out = format!("suite {} (max n = {})\n", self.suite.as_str(), self.max_n);
                for c in &self.checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    let _ = writeln!(out, "{tag}  {}: {}", c.name, c.detail);
                }
                let _ = writeln!(out, "{}", if self.passed { "all passed" } else { "FAILED" });
                out
            }
        })
    }
}

struct Timer {
    enabled: bool,
    times: BTreeMap<String, u128>,
}

impl Timer {
    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.times.insert(label.into(), start.elapsed().as_millis());
        }
        out
    }
}

pub fn verify(args: &VerifyArgs, cache: Option<&Path>) -> Result<VerificationReport> {
    let mut timer = Timer {
        enabled: args.timings,
        times: BTreeMap::new(),
    };
    let n = args.max_n;
    let checks = match args.suite {
        Suite::Integrality => timer.time("integrality", || suite_integrality(n, cache))?,
        Suite::Determinant => timer.time("determinant", || suite_determinant(n, cache))?,
        Suite::Rodrigues => timer.time("rodrigues", || suite_rodrigues(n))?,
        Suite::Identities => timer.time("identities", || suite_identities(n, cache))?,
        Suite::Asymptotics => timer.time("asymptotics", || suite_asymptotics(n, cache))?,
        Suite::Constants => timer.time("constants", || suite_constants(n, &args.digits))?,
    };
    Ok(VerificationReport {
        suite: args.suite,
        max_n: n,
        passed: checks.iter().all(|c| c.passed),
        checks,
        timings_ms: args.timings.then_some(timer.times),
    })
}

/// Every family certified integral for `0 ≤ n ≤ max_n`.
pub fn suite_integrality(max_n: usize, cache: Option<&Path>) -> Result<Vec<Check>> {
    let results: Vec<(FamilyName, Result<SequenceFamily>)> = FamilyName::ALL
        .par_iter()
        .map(|&name| (name, cached_family(name, max_n, cache)))
        .collect();
    let mut checks = Vec::new();
    let mut total = 0;
    for (name, res) in results {
        checks.push(match res {
            Ok(f) => {
                total += f.len();
                Check::new(name.as_str(), true, format!("{} values integral", f.len()))
            }
            Err(Error::IntegralityViolation { n, value, .. }) => {
                Check::new(name.as_str(), false, format!("value {value} at n = {n}"))
            }
            Err(e) => return Err(e),
        });
    }
    checks.push(Check::new(
        "total",
        checks.iter().all(|c| c.passed),
        format!("{} families, {total} values checked", FamilyName::ALL.len()),
    ));
    Ok(checks)
}

/// Scaled Casoratians of p, q, r against the u, v, w recurrence.
pub fn suite_determinant(max_n: usize, cache: Option<&Path>) -> Result<Vec<Check>> {
    let fam = |name| cached_family(name, max_n + 1, cache);
    let (p, q, r) = (
        fam(FamilyName::P)?,
        fam(FamilyName::Q)?,
        fam(FamilyName::R)?,
    );
    let scaled = scaled_uvw_from(&p, &q, &r)?;
    let mut checks = Vec::new();
    for det in scaled {
        let name = det.name();
        let rec = cached_family(name, max_n, cache)?;
        let first_bad = (0..=max_n).find(|&n| det.get(n) != rec.get(n));
        checks.push(match first_bad {
            None => Check::new(
                format!("{name} = scaled casoratian"),
                true,
                format!("exact equality for 0 ≤ n ≤ {max_n}"),
            ),
            Some(n) => Check::new(
                format!("{name} = scaled casoratian"),
                false,
                format!(
                    "determinant {} vs recurrence {} at n = {n}",
                    det.get(n),
                    rec.get(n)
                ),
            )
            .worst(0.0, Some(n)),
        });
    }
    let coeff = transformed_matches_uvw_recurrence(max_n)?;
    checks.push(Check::new(
        "transformed recurrence coefficients",
        coeff.is_none(),
        match coeff {
            None => format!("rescaled coefficients match for n ≤ {max_n}"),
            Some(n) => format!("first mismatch at n = {n}"),
        },
    ));
    Ok(checks)
}

/// Rodrigues construction against the recurrence tables.
pub fn suite_rodrigues(max_n: usize) -> Result<Vec<Check>> {
    let p = FamilyName::P.generate(max_n.max(2))?;
    let q = FamilyName::Q.generate(max_n.max(2))?;
    let results = (0..=max_n)
        .into_par_iter()
        .map(|n| {
            let (pn, qn) = extract_pq(&rodrigues_q(n)?)?;
            Ok((n, pn == *p.get(n) && qn == *q.get(n)))
        })
        .collect::<Result<Vec<_>>>()?;
    let first_bad = results.iter().find(|(_, ok)| !ok).map(|(n, _)| *n);
    Ok(vec![Check::new(
        "extract_pq(Q_n) = (p_n, q_n)",
        first_bad.is_none(),
        match first_bad {
            None => format!("exact for 0 ≤ n ≤ {max_n}"),
            Some(n) => format!("mismatch at n = {n}"),
        },
    )])
}

/// Number of random recurrences in the transform check.
pub const TRANSFORM_TRIALS: usize = 100;

/// Transform equivalence on random recurrences, then the bilinear identities
/// and dual routes for `0 ≤ n ≤ max_n`.
pub fn suite_identities(max_n: usize, cache: Option<&Path>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let trials = randomized_transform_trials(TRANSFORM_TRIALS, 0x5eed);
    checks.push(Check::new(
        "transform equivalence",
        trials.is_ok(),
        match trials {
            Ok(t) => format!("{t} random recurrences, exact"),
            Err(e) => e.to_string(),
        },
    ));

    let tables = cached_tables(max_n + 1, cache)?;
    let constants = ConstantSet::compute(budget_digits(max_n + 1))?;
    let residuals = (0..=max_n)
        .into_par_iter()
        .map(|n| bilinear_identity_check(n, &tables, &constants))
        .collect::<Result<Vec<_>>>()?;

    let worst = |f: &dyn Fn(&crate::determinant::IdentityResiduals) -> f64| {
        residuals
            .iter()
            .map(|r| (f(r), r.n))
            .fold((0.0f64, 0usize), |a, b| if b.0 > a.0 { b } else { a })
    };
    let bilinear_ok = residuals
        .iter()
        .all(|r| r.max_bilinear() < bilinear_tolerance(r.working_digits));
    let (w, wn) = worst(&|r| r.max_bilinear());
    checks.push(
        Check::new(
            "bilinear identities",
            bilinear_ok,
            format!("relative residual below 10^-(P-{GUARD_DIGITS}) at working precision P"),
        )
        .worst(w, Some(wn)),
    );
    let tol = dual_route_tolerance();
    for (label, f) in [
        (
            "l = casoratian(f, g)/(n!)^2",
            &(|r: &crate::determinant::IdentityResiduals| r.l_dual) as &dyn Fn(&_) -> f64,
        ),
        (
            "l = e*casoratian(f, g/e)/(n!)^2",
            &|r: &crate::determinant::IdentityResiduals| r.l_scaled_variant,
        ),
        (
            "vE = casoratian(q, g)/(n!)^2",
            &|r: &crate::determinant::IdentityResiduals| r.ve_dual,
        ),
        (
            "wE = casoratian(p, g)/(n!)^2",
            &|r: &crate::determinant::IdentityResiduals| r.we_dual,
        ),
    ] {
        let (w, wn) = worst(f);
        checks.push(
            Check::new(label, w < tol, format!("relative residual below {tol:.0e}"))
                .worst(w, Some(wn)),
        );
    }
    Ok(checks)
}

/// Geometric ladder for the convergence-rate checks.
pub const LADDER: [usize; 5] = [25, 50, 100, 200, 400];

/// Lowest `max_n` the asymptotics suite accepts.
pub const ASYMPTOTICS_MIN_N: usize = 50;

/// Width of the second-regime band, as a max/min ratio.
pub const BAND_RATIO: f64 = 100.0;

/// Normalized values of the small forms against their limits, plus the
/// second-regime band for vE and wE.
pub fn suite_asymptotics(max_n: usize, cache: Option<&Path>) -> Result<Vec<Check>> {
    if max_n < ASYMPTOTICS_MIN_N {
        return Err(Error::InvalidInput(format!(
            "asymptotics suite needs --max-n ≥ {ASYMPTOTICS_MIN_N}"
        )));
    }
    let ev = evaluator(max_n, cache)?;
    let mut checks = Vec::new();
    for form in [FormName::F, FormName::G, FormName::L] {
        let c = convergence_check(&ev, form, max_n)?;
        checks.push(c);
    }
    let hi = max_n.min(500);
    for form in [FormName::VE, FormName::WE] {
        let values = (20..=hi)
            .into_par_iter()
            .map(|n| Ok((n, ev.normalized_abs(form, n)?)))
            .collect::<Result<Vec<_>>>()?;
        let (lo_n, lo) =
            values
                .iter()
                .copied()
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let (_, top) = values
            .iter()
            .copied()
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let ratio = top / lo;
        checks.push(
            Check::new(
                format!("{form} band"),
                ratio <= BAND_RATIO,
                format!("max/min of normalized |{form}| over 20 ≤ n ≤ {hi} is {ratio:.3}"),
            )
            .worst(ratio, Some(lo_n)),
        );
    }
    Ok(checks)
}

/// Relative deviation at `max_n` plus the scaled-deviation ladder.
pub fn convergence_check(ev: &FormEvaluator, form: FormName, max_n: usize) -> Result<Check> {
    let target = form.target().expect("small forms have targets").to_f64();
    let k = form.correction_power();
    let mut points: Vec<usize> = LADDER.iter().copied().filter(|&n| n < max_n).collect();
    points.push(max_n);
    let devs = points
        .par_iter()
        .map(|&n| Ok((n, (ev.normalized_abs(form, n)? - target) / target)))
        .collect::<Result<Vec<_>>>()?;
    let (_, final_dev) = *devs.last().expect("ladder is non-empty");
    let scaled: Vec<f64> = devs
        .iter()
        .map(|&(n, d)| d.abs() * (n as f64).powf(k))
        .collect();
    let bounded = scaled.iter().all(|&s| s <= 2.0 * scaled[0]);
    let passed = final_dev.abs() < 0.10 && bounded;
    Ok(Check::new(
        format!("{form} constant"),
        passed,
        format!(
            "relative deviation {final_dev:.4e} at n = {max_n} (limit {target:.6}); |dev|·n^{k} on {points:?}: {}",
            scaled.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>().join(" ")
        ),
    )
    .worst(final_dev.abs(), Some(max_n)))
}

/// Digits of working precision for the Laguerre convergence check.
pub const LAGUERRE_CHECK_DIGITS: u32 = 60;

/// Laguerre convergence up to `max_n` plus dual-route γ and δ agreement.
pub fn suite_constants(max_n: usize, digits: &[u32]) -> Result<Vec<Check>> {
    let mut checks = vec![laguerre_convergence(max_n)?];
    for &d in digits {
        if d == 0 {
            return Err(Error::InvalidInput("digits must be at least 1".into()));
        }
        let g1 = gamma(d + GUARD_DIGITS);
        let g2 = gamma_euler_maclaurin(d + GUARD_DIGITS);
        let gdiff = difference(&g1, &g2);
        checks.push(
            Check::new(
                format!("gamma at {d} digits"),
                agree("gamma", &g1, &g2, d).is_ok(),
                "brent-mcmillan vs euler-maclaurin",
            )
            .worst_exact(&gdiff),
        );
        let d1 = delta_series(d + GUARD_DIGITS, &gamma(d + 2 * GUARD_DIGITS))?;
        let d2 = delta_laguerre_float(d + GUARD_DIGITS);
        let ddiff = difference(&d1, &d2);
        checks.push(
            Check::new(
                format!("delta at {d} digits"),
                agree("delta", &d1, &d2, d).is_ok(),
                "alternating series vs laguerre convergent",
            )
            .worst_exact(&ddiff),
        );
    }
    Ok(checks)
}

/// Largest convergent error tolerated at the last index.
pub const LAGUERRE_TOLERANCE: f64 = 1e-25;

/// First index of the monotonic-decrease check.
pub const LAGUERRE_MONOTONE_FROM: usize = 10;

/// `|p̃_n/q̃_n - δ|` for `n = 1..=max_n` at 60 digits.
pub fn laguerre_errors(max_n: usize) -> Result<Vec<Float>> {
    let digits = LAGUERRE_CHECK_DIGITS;
    let delta = delta_series(digits, &gamma(digits + GUARD_DIGITS))?;
    let prec = delta.value().prec();
    let p = FamilyName::PTilde.generate(max_n.max(1))?;
    let q = FamilyName::QTilde.generate(max_n.max(1))?;
    Ok((1..=max_n)
        .map(|n| {
            let conv = Float::with_val(prec, Rational::from((p.get(n).clone(), q.get(n).clone())));
            (conv - delta.value()).abs()
        })
        .collect())
}

fn laguerre_convergence(max_n: usize) -> Result<Check> {
    if max_n < 1 {
        return Err(Error::InvalidInput(
            "constants suite needs --max-n ≥ 1".into(),
        ));
    }
    let errs = laguerre_errors(max_n)?;
    let last = errs.last().expect("max_n ≥ 1").to_f64();
    let from = LAGUERRE_MONOTONE_FROM.min(max_n);
    let monotone = errs[from - 1..].windows(2).all(|w| w[1] < w[0]);
    Ok(Check::new(
        "laguerre convergents",
        last < LAGUERRE_TOLERANCE && monotone,
        format!(
            "|p~_{max_n}/q~_{max_n} - delta| = {last:.3e}, monotone for n ≥ {from}: {monotone}"
        ),
    )
    .worst(last, Some(max_n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (Exit, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["euler-forms"];
        full.extend_from_slice(args);
        let code = run_args(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn gen_uvw_csv() {
        let (code, out, _) =
            run_str(&["gen", "--family", "uvw", "--max-n", "3", "--format", "csv"]);
        assert_eq!(code, Exit::Success);
        assert_eq!(
            out,
            "n,u,v,w\n0,-2,-1,0\n1,7,-22,-17\n2,558,-1518,-1209\n3,82861,-225240,-179426\n"
        );
    }

    #[test]
    fn negative_max_n_is_usage_error() {
        let (code, out, err) = run_str(&["gen", "--family", "uvw", "--max-n", "-1"]);
        assert_eq!(code, Exit::Usage);
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn unknown_flag_and_zero_digits_rejected() {
        assert_eq!(
            run_str(&["gen", "--family", "p", "--max-n", "2", "--bogus"]).0,
            Exit::Usage
        );
        assert_eq!(
            run_str(&["constants", "--which", "e", "--digits", "0"]).0,
            Exit::Usage
        );
        assert_eq!(
            run_str(&["gen", "--family", "x", "--max-n", "2"]).0,
            Exit::Usage
        );
    }

    #[test]
    fn range_parser() {
        assert_eq!(parse_range("100..1000").unwrap(), 100..=1000);
        assert_eq!(parse_range("3..=7").unwrap(), 3..=7);
        assert!(parse_range("7..3").is_err());
        assert!(parse_range("7").is_err());
    }

    #[test]
    fn constants_plain_and_json() {
        let (code, out, _) = run_str(&["constants", "--which", "gamma", "--digits", "10"]);
        assert_eq!(code, Exit::Success);
        assert_eq!(out, "0.5772156649\n");
        let (_, out, _) = run_str(&[
            "constants",
            "--which",
            "delta",
            "--digits",
            "12",
            "--format",
            "json",
        ]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["value"], "0.596347362323");
        assert_eq!(v["provenance"], "alternating-series");
        assert_eq!(v["cross_check"]["agrees"], true);
    }

    #[test]
    fn rodrigues_output() {
        let (_, out, _) = run_str(&["rodrigues", "--n", "1", "--print-poly"]);
        assert_eq!(
            out,
            "Q_1(z) = z^4 - 11z^3 + 29z^2 - 14z + 1\np_1 = 2\nq_1 = 3\n"
        );
        let (_, out, _) = run_str(&["rodrigues", "--n", "2", "--format", "json"]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["p"], "31");
        assert_eq!(v["q"], "50");
        assert_eq!(v["coefficients"].as_array().unwrap().last().unwrap(), "1/4");
    }

    #[test]
    fn forms_csv_layout() {
        let (code, out, _) = run_str(&["forms", "--which", "l", "--max-n", "3", "--normalized"]);
        assert_eq!(code, Exit::Success);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "n,value,normalized");
        assert!(lines[1].starts_with("0,-6.1547"));
        assert!(lines[1].ends_with(','));
        assert_eq!(lines.len(), 5);
        let value = lines[2].split(',').nth(1).unwrap();
        assert_eq!(value.split('e').next().unwrap().len(), 22);
    }

    #[test]
    fn integrality_suite_counts() {
        let report = verify(
            &VerifyArgs {
                suite: Suite::Integrality,
                max_n: 300,
                digits: vec![],
                timings: false,
                format: Format::Json,
            },
            None,
        )
        .unwrap();
        assert!(report.passed);
        assert_eq!(
            report.checks.last().unwrap().detail,
            "8 families, 2408 values checked"
        );
    }

    #[test]
    fn report_has_no_timings_by_default() {
        let (code, out, _) = run_str(&["verify", "--suite", "rodrigues", "--max-n", "4"]);
        assert_eq!(code, Exit::Success);
        assert!(!out.contains("timings_ms"));
        let (_, out, _) = run_str(&[
            "verify",
            "--suite",
            "rodrigues",
            "--max-n",
            "4",
            "--timings",
        ]);
        assert!(out.contains("timings_ms"));
    }

    #[test]
    fn suites_are_listed() {
        let names: Vec<&str> = suites().iter().map(|s| s.as_str()).collect();
        assert_eq!(
            names,
            [
                "integrality",
                "determinant",
                "rodrigues",
                "identities",
                "asymptotics",
                "constants"
            ]
        );
    }
}
