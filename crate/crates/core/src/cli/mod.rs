//! Batch front-end. Every subcommand writes its artifacts to the output
//! directory and a one-line summary to stdout.

mod args;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;

pub use args::{parse_source, Cli, Command, WeightSource, OUT_DIR_ENV};
use args::{EllipseArgs, MzArgs, PartitionArgs, SolveArgs, VerifyArgs, WeightsArgs};

use crate::algebraic::{ellipse_mode, restriction_fit_residual, write_fit_csv};
use crate::cubature::{build_space, mz_sweep, solve_in, verify_rule, CubatureRule, FlowConfig, MzMode};
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldId};
use crate::partition::{verify_partition, weighted_partition};
use crate::space::SpaceKind;
use crate::weights::{bgg_diagnostic, block_aggregate, validate, validate_fitted};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Parses `argv` (program name first) and runs the subcommand, printing to stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    run_with(argv, &mut stdout.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let res = match cli.command {
        Command::Partition(a) => partition(a, out),
        Command::Solve(a) => solve(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Mz(a) => mz(a, out),
        Command::Ellipse(a) => ellipse(a, out),
        Command::Weights(a) => weights(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn out_dir(flag: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, v)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn write_summary(dir: &Path, name: &str, lines: &[String]) -> Result<()> {
    let mut f = create(dir, name)?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

fn fmt_history(h: &[f64]) -> String {
    h.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" ")
}

fn partition(a: PartitionArgs, out: &mut dyn Write) -> Result<i32> {
    let w = a.w.weights.load(a.w.n)?;
    let m = Manifold::new(a.common.manifold)?;
    let dir = out_dir(&a.common.out)?;
    let p = weighted_partition(&m, &w)?;
    let rep = verify_partition(&p);
    write_json(&dir, "partition.json", &p)?;
    write_json(&dir, "partition_report.json", &rep)?;
    let lines = vec![
        format!("manifold {:?}, N = {}, band [{}, {}]", p.manifold, p.n, p.a, p.b),
        format!("branch {:?}, levels k = {}, l = {}", p.branch, p.level_k, p.level_l),
        format!("c3 = {:.6}, c4 = {:.6}", rep.c3, rep.c4),
        format!("max measure error {:.3e}, bookkeeping error {:.3e}", rep.max_measure_error, p.bookkeeping_error),
        format!("verification {}", if rep.passed() { "passed" } else { "FAILED" }),
    ];
    lines.iter().chain(&rep.failures).for_each(|l| {
        let _ = writeln!(out, "{l}");
    });
    write_summary(&dir, "partition_summary.txt", &lines)?;
    Ok(if rep.passed() { EXIT_OK } else { EXIT_FAIL })
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let raw = a.w.weights.values(a.w.n)?;
    let dir = out_dir(&a.common.out)?;
    let cfg = FlowConfig {
        mode: a.mode,
        restarts: a.restarts,
        flow_rounds: a.flow_rounds,
        seed: a.common.seed,
        tol: a.tol,
        max_iter: a.max_iter,
        ..Default::default()
    };
    let space = build_space(a.common.manifold, a.space, a.l)?;
    let rule = if a.aggregate {
        let blocks = block_aggregate(&raw)?;
        let w = validate_fitted(&blocks.masses)?;
        solve_in(space.as_ref(), &w, &cfg)?.expand_blocks(&blocks, &raw)?
    } else {
        let w = a.w.weights.load(a.w.n)?;
        solve_in(space.as_ref(), &w, &cfg)?
    };
    rule.write_json(create(&dir, "rule.json")?)?;
    rule.write_csv(create(&dir, "rule.csv")?)?;
    let d = a.common.manifold.dim();
    let mut lines = vec![
        format!("{} points, {:?} space, L = {}, mode {:?}", rule.len(), rule.space, rule.l, rule.mode),
        format!("residual linf {:.3e}, l2 {:.3e}, tolerance {:.1e}", rule.residual_linf, rule.residual_l2, rule.tolerance),
        format!("converged {}, restarts used {}, best restart {}", rule.converged, rule.restarts_used, rule.best_restart),
        format!("c4 = {:.6}, horizon T = {:.6}", rule.c4, rule.horizon),
        format!("BGG diagnostic L^d sum w^2 = {:.4}", bgg_diagnostic(&validate_fitted(&rule.weights)?, rule.l, d)),
        format!("history {}", fmt_history(&rule.history)),
    ];
    lines.extend(rule.warnings.iter().map(|w| format!("warning: {w}")));
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    write_summary(&dir, "solve_summary.txt", &lines)?;
    Ok(if rule.converged { EXIT_OK } else { EXIT_FAIL })
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&a.rule)?;
    let rule = match CubatureRule::from_json(&text) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "verification FAILED: {e}")?;
            return Ok(EXIT_FAIL);
        }
    };
    let rep = match verify_rule(&rule, a.tol.unwrap_or(rule.tolerance)) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "verification FAILED: {e}")?;
            return Ok(EXIT_FAIL);
        }
    };
    serde_json::to_writer_pretty(&mut *out, &rep)?;
    writeln!(out)?;
    Ok(if rep.passed { EXIT_OK } else { EXIT_FAIL })
}

fn mz(a: MzArgs, out: &mut dyn Write) -> Result<i32> {
    if a.space == SpaceKind::Diffusion && a.mz_mode == MzMode::Value {
        return Err(Error::Unsupported("value-mode ratios need --space algebraic".into()));
    }
    let dir = out_dir(&a.common.out)?;
    let space = build_space(a.common.manifold, a.space, a.l)?;
    let sw = mz_sweep(space.as_ref(), &a.ns, a.a, a.b, a.trials, a.common.seed, a.mz_mode)?;
    sw.write_csv(create(&dir, "mz.csv")?)?;
    write_json(&dir, "mz.json", &sw)?;
    let mut lines = vec![format!(
        "{:?} ratios, {:?} space L = {}, band [{}, {}], {} trials",
        sw.mode, a.space, a.l, sw.a, sw.b, sw.trials
    )];
    lines.extend(sw.rows.iter().map(|r| format!("N = {:>6}  fail {:.3}  max ratio {:.4}", r.n, r.fail_fraction, r.max_ratio)));
    lines.push(match sw.n_star {
        Some(n) => format!("N* = {n}"),
        None => "N* not reached on this grid".to_string(),
    });
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    write_summary(&dir, "mz_summary.txt", &lines)?;
    Ok(EXIT_OK)
}

fn ellipse(a: EllipseArgs, out: &mut dyn Write) -> Result<i32> {
    let id = ManifoldId::Ellipse { a: a.a, b: a.b };
    let m = Manifold::new(id)?;
    let dir = out_dir(&a.out)?;
    let curve = restriction_fit_residual(id, &ellipse_mode(&m, a.k), a.max_deg)?;
    write_fit_csv(&curve, create(&dir, "ellipse_fit.csv")?)?;
    let arc = m.arc().expect("ellipse has an arc-length map");
    let len = arc.length();
    let mut wr = csv::Writer::from_writer(create(&dir, "ellipse_h.csv")?);
    wr.write_record(["t", "h", "speed", "h_over_length", "roundtrip_error"])?;
    let n = a.samples.max(1);
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let t = std::f64::consts::TAU * i as f64 / n as f64;
        let h = arc.h_unchecked(t);
        let back = arc.h_inverse_unchecked(h);
        let err = if i == n { 0.0 } else { (back - t).abs() };
        worst = worst.max(err);
        wr.write_record([t, h, arc.speed(t), h / len, err].map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    let mut lines = vec![
        format!("ellipse a = {}, b = {}, length {:.10}", a.a, a.b, len),
        format!("h inverse roundtrip error {worst:.3e}"),
        format!("fit of mode k = {}:", a.k),
    ];
    lines.extend(curve.iter().map(|p| format!("  degree {:>2}  residual {:.3e}", p.degree, p.residual)));
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    write_summary(&dir, "ellipse_summary.txt", &lines)?;
    Ok(EXIT_OK)
}

fn weights(a: WeightsArgs, out: &mut dyn Write) -> Result<i32> {
    let src = if a.ex1 { WeightSource::Ex1 } else { a.weights.clone().unwrap_or(WeightSource::Uniform) };
    let raw = src.values(a.n)?;
    if let Some((lo, hi)) = a.validate {
        return Ok(match validate(&raw, lo, hi) {
            Ok(w) => {
                writeln!(out, "valid: N = {}, fitted band [{}, {}]", w.len(), w.fitted_a, w.fitted_b)?;
                EXIT_OK
            }
            Err(e) => {
                writeln!(out, "invalid: {e}")?;
                EXIT_FAIL
            }
        });
    }
    if a.aggregate {
        serde_json::to_writer_pretty(&mut *out, &block_aggregate(&raw)?)?;
    } else {
        serde_json::to_writer(&mut *out, &raw)?;
    }
    writeln!(out)?;
    Ok(EXIT_OK)
}
