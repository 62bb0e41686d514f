use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};
use stackcomm::control_games::{classify, solve_objectives};
use stackcomm::equilibrium::solve_noiseless;
use stackcomm::figures::{self, linspace};
use stackcomm::gausslin::{scheme_costs, JointModel, LinearScheme};
use stackcomm::noisy_channel::{capacity, noisy_sweep, opta_bound, solve_noisy};
use stackcomm::side_info::{feasible_rho_x_w, find_matched_rho_xw, match_condition, match_sweep, si_rd_point, solve_noiseless_si};
use stackcomm::simkit::{estimate_costs, sample, SimConfig};
use stackcomm::strategic_rd::rd_point;
use stackcomm::verify::{self, Bound, Suite};

use crate::fail::CliError;
use crate::scenario::{Kind, Scenario};
use crate::{Cli, Command, Common, Grid, Panel, RateUnits};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Solve { samples_out } => solve(c, samples_out.as_deref()),
        Command::Sweep {
            panel,
            grid,
            fixed,
            sigma_x2,
            gnuplot,
        } => sweep(c, *panel, grid, *fixed, *sigma_x2, gnuplot.as_deref()),
        Command::Verify { full, .. } => run_verify(c, if *full { Suite::Full } else { Suite::Quick }),
        Command::Rd { grid } => {
            let s = load(c)?;
            rd_csv(c, &s, grid)
        }
        Command::SiMatch { grid, tol } => si_match(c, grid, *tol),
        Command::ControlCheck => control_check(c),
    }
}

fn load(c: &Common) -> Result<Scenario, CliError> {
    let path = c
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::validation("scenario: --scenario PATH is required"))?;
    Scenario::load(path)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::validation(format!("out: cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(c: &Common, v: &Value) -> Result<(), CliError> {
    let mut w = sink(c.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv(c: &Common, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink(c.out.as_deref())?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn grid_values(g: &Grid, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = (g.lo.unwrap_or(lo), g.hi.unwrap_or(hi), g.points.unwrap_or(points));
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(CliError::validation(format!("lo/hi: need finite lo <= hi, got [{lo}, {hi}]")));
    }
    if n == 0 {
        return Err(CliError::validation("points: must be at least 1"));
    }
    Ok(linspace(lo, hi, n))
}

fn sim_config(c: &Common, s: &Scenario) -> Option<SimConfig> {
    if s.sim.is_none() && c.samples.is_none() {
        return None;
    }
    let mut cfg = s.sim.unwrap_or_else(|| SimConfig::new(verify::DEFAULT_SEED, 100_000));
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(n) = c.samples {
        cfg.n = n;
    }
    Some(cfg)
}

fn monte_carlo<M: JointModel + Sync>(
    m: &M,
    scheme: &LinearScheme,
    noise_var: f64,
    cfg: &SimConfig,
    samples_out: Option<&Path>,
) -> Result<Value, CliError> {
    cfg.validate()?;
    let table = sample(m, cfg)?;
    if let Some(p) = samples_out {
        let mut w = sink(Some(p))?;
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    let est = estimate_costs(&table, scheme, noise_var, cfg)?;
    let z = est.z_scores(&scheme_costs(m, scheme, noise_var));
    Ok(json!({
        "seed": cfg.seed,
        "n": cfg.n,
        "d_e": est.costs.d_e,
        "d_e_stderr": est.stderr.d_e,
        "d_d": est.costs.d_d,
        "d_d_stderr": est.stderr.d_d,
        "z_d_e": z.d_e,
        "z_d_d": z.d_d,
    }))
}

fn solve(c: &Common, samples_out: Option<&Path>) -> Result<(), CliError> {
    let s = load(c)?;
    let units = c.rate_units;
    let sim = sim_config(c, &s);
    if samples_out.is_some() && sim.is_none() {
        return Err(CliError::validation("samples-out: needs --samples or a sim block"));
    }
    let mut report = json!({ "schema": crate::scenario::SCHEMA_VERSION, "kind": s.kind.name() });
    let mut mc = None;
    match s.kind {
        Kind::Noiseless => {
            let m = s.pair()?;
            let eq = solve_noiseless(&m)?;
            extend(&mut report, json!({
                "model": m,
                "alpha": eq.alpha,
                "kappa": eq.kappa,
                "d_e": eq.costs.d_e,
                "d_d": eq.costs.d_d,
                "scheme": eq.scheme(),
            }));
            if let Some(cfg) = &sim {
                mc = Some(monte_carlo(&m, &eq.scheme(), 0.0, cfg, samples_out)?);
            }
        }
        Kind::Rd => {
            let m = s.pair()?;
            let rate = units.to_bits(s.rate.unwrap_or_default());
            let p = rd_point(&m, rate)?;
            extend(&mut report, json!({
                "model": m,
                "rate": units.from_bits(p.rate),
                "rate_units": units.name(),
                "beta": p.beta,
                "sigma_s2": p.sigma_s2,
                "d_e": p.costs.d_e,
                "d_d": p.costs.d_d,
            }));
        }
        Kind::Noisy => {
            let m = s.pair()?;
            let ch = s.channel()?;
            let sol = solve_noisy(&m, &ch)?;
            let bound = opta_bound(&m, &ch)?;
            extend(&mut report, json!({
                "model": m,
                "channel": ch,
                "capacity": units.from_bits(capacity(&ch)),
                "rate_units": units.name(),
                "alpha": sol.scheme.enc_theta_weight,
                "gain": sol.scheme.enc_gain,
                "d_e": sol.costs.d_e,
                "d_d": sol.costs.d_d,
                "opta_d_e": bound,
                "gap": sol.costs.d_e - bound,
                "scheme": sol.scheme,
            }));
            if let Some(cfg) = &sim {
                mc = Some(monte_carlo(&m, &sol.scheme, ch.noise_var, cfg, samples_out)?);
            }
        }
        Kind::SiNoiseless => {
            let m = s.side_info()?;
            let eq = solve_noiseless_si(&m)?;
            extend(&mut report, json!({
                "model": m,
                "alpha_si": eq.alpha_si,
                "dec_y": eq.dec_y,
                "dec_w": eq.dec_w,
                "d_e": eq.costs.d_e,
                "d_d": eq.costs.d_d,
                "bound_hit": eq.bound_hit,
            }));
            if let Some(cfg) = &sim {
                mc = Some(monte_carlo(&m, &eq.scheme(), 0.0, cfg, samples_out)?);
            }
        }
        Kind::SiRd => {
            let m = s.side_info()?;
            let p = si_rd_point(&m, units.to_bits(s.rate.unwrap_or_default()))?;
            extend(&mut report, json!({
                "model": m,
                "rate": units.from_bits(p.rate),
                "rate_units": units.name(),
                "beta": p.beta,
                "sigma_s2": p.sigma_s2,
                "d_e": p.costs.d_e,
                "d_d": p.costs.d_d,
            }));
        }
        Kind::SiMatch => {
            extend(&mut report, match_report(&s, units)?);
        }
        Kind::Control => {
            let m = s.pair()?;
            let ch = s.channel()?;
            let o = s.objectives.expect("checked on load");
            let (cf, sol) = solve_objectives(&m, &o.phi_e, &o.phi_d, ch.noise_var)?;
            extend(&mut report, json!({ "model": m, "channel": ch, "canonical": cf, "solution": sol }));
        }
    }
    if sim.is_some() && mc.is_none() {
        log::warn!("sim block ignored for kind {}", s.kind.name());
    }
    if let Some(mc) = mc {
        extend(&mut report, json!({ "monte_carlo": mc }));
    }
    write_json(c, &report)
}

fn extend(report: &mut Value, more: Value) {
    if let (Value::Object(a), Value::Object(b)) = (report, more) {
        a.extend(b);
    }
}

fn match_report(s: &Scenario, units: RateUnits) -> Result<Value, CliError> {
    let m = s.side_info()?;
    let ch = s.channel()?;
    let (lo, hi) = feasible_rho_x_w(&m)?;
    let root = find_matched_rho_xw(&m, &ch)?;
    let rep = match_condition(&m.with_rho_x_w(root), &ch, 1e-6)?;
    Ok(json!({
        "model": m,
        "channel": ch,
        "feasible_rho_x_w": [lo, hi],
        "rho_x_w": root,
        "rate": units.from_bits(rep.rate),
        "rate_units": units.name(),
        "beta": rep.beta,
        "residual": rep.residual,
        "gap": rep.gap,
        "matched": rep.matched,
    }))
}

fn rd_csv(c: &Common, s: &Scenario, grid: &Grid) -> Result<(), CliError> {
    let m = s.pair()?;
    let units = c.rate_units;
    let hi = units.from_bits(5.0);
    let rates = grid_values(grid, 0.0, hi, 101)?;
    if rates[0] < 0.0 {
        return Err(CliError::validation("lo: rate must be >= 0"));
    }
    let pts = rates
        .iter()
        .map(|&r| rd_point(&m, units.to_bits(r)))
        .collect::<stackcomm::Result<Vec<_>>>()?;
    write_csv(
        c,
        &[units.column(), "d_e", "d_d", "beta", "sigma_s2"],
        rates
            .iter()
            .zip(&pts)
            .map(|(&r, p)| vec![num(r), num(p.costs.d_e), num(p.costs.d_d), num(p.beta), num(p.sigma_s2)]),
    )
}

fn sweep(
    c: &Common,
    panel: Panel,
    grid: &Grid,
    fixed: Option<f64>,
    sigma_x2: f64,
    gnuplot: Option<&Path>,
) -> Result<(), CliError> {
    let (header, title): (Vec<&str>, &str) = match panel {
        Panel::Fig3a => {
            let rows = figures::costs_vs_r(sigma_x2, fixed.unwrap_or(0.0), &grid_values(grid, 0.05, 10.0, 200)?)?;
            write_csv(
                c,
                &["r", "d_e", "d_d", "valid"],
                rows.iter().map(|r| vec![num(r.r), num(r.d_e), num(r.d_d), r.valid.to_string()]),
            )?;
            (vec!["r", "d_e", "d_d"], "costs against r")
        }
        Panel::Fig3b => {
            let rows = figures::costs_vs_rho(sigma_x2, fixed.unwrap_or(1.0), &grid_values(grid, -0.9, 0.9, 200)?)?;
            write_csv(
                c,
                &["rho", "d_e", "d_d", "valid"],
                rows.iter().map(|r| vec![num(r.rho), num(r.d_e), num(r.d_d), r.valid.to_string()]),
            )?;
            (vec!["rho", "d_e", "d_d"], "costs against rho")
        }
        Panel::Fig3c => {
            let units = c.rate_units;
            let rates = grid_values(grid, 0.0, units.from_bits(5.0), 101)?;
            let bits: Vec<f64> = rates.iter().map(|&r| units.to_bits(r)).collect();
            let rows = figures::rd_curves(sigma_x2, &bits)?;
            let col = units.column();
            write_csv(
                c,
                &[col, "d_e_r1", "d_d_r1", "d_e_r01", "d_d_r01"],
                rates.iter().zip(&rows).map(|(&r, p)| {
                    vec![num(r), num(p.d_e_r1), num(p.d_d_r1), num(p.d_e_r01), num(p.d_d_r01)]
                }),
            )?;
            (vec![col, "d_e_r1", "d_d_r1", "d_e_r01", "d_d_r01"], "strategic rate-distortion")
        }
        Panel::Custom => custom_sweep(c, grid)?,
    };
    if let Some(p) = gnuplot {
        let data = c.out.as_deref().map_or("-".to_string(), |o| o.display().to_string());
        let mut w = sink(Some(p))?;
        writeln!(w, "set datafile separator ','")?;
        writeln!(w, "set key autotitle columnhead")?;
        writeln!(w, "set title '{title}'")?;
        writeln!(w, "set xlabel '{}'", header[0])?;
        let series: Vec<String> = (2..=header.len()).map(|i| format!("'{data}' using 1:{i} with lines")).collect();
        writeln!(w, "plot {}", series.join(", "))?;
        w.flush()?;
    }
    Ok(())
}

fn custom_sweep(c: &Common, grid: &Grid) -> Result<(Vec<&'static str>, &'static str), CliError> {
    let s = load(c)?;
    match s.kind {
        Kind::Rd | Kind::Noiseless => {
            rd_csv(c, &s, grid)?;
            Ok((vec![c.rate_units.column(), "d_e", "d_d", "beta", "sigma_s2"], "strategic rate-distortion"))
        }
        Kind::Noisy => {
            let m = s.pair()?;
            let ch = s.channel()?;
            let snr = grid_values(grid, 0.1, 100.0, 101)?;
            let rows = noisy_sweep(&m, ch.noise_var, &snr)?;
            let cap = match c.rate_units {
                RateUnits::Bits => "capacity_bits",
                RateUnits::Nats => "capacity_nats",
            };
            write_csv(
                c,
                &["p_over_n", cap, "d_e", "d_d", "gain"],
                rows.iter().map(|r| {
                    vec![num(r.p_over_n), num(c.rate_units.from_bits(r.capacity_bits)), num(r.d_e), num(r.d_d), num(r.gain)]
                }),
            )?;
            Ok((vec!["p_over_n", "d_e", "d_d"], "costs against SNR"))
        }
        Kind::SiMatch => {
            match_csv(c, &s, grid, 1e-6)?;
            Ok((vec!["rho_x_w", "residual", "gap"], "matching condition"))
        }
        k => Err(CliError::validation(format!(
            "kind: custom sweep supports rd, noiseless, noisy and si_match scenarios, got {}",
            k.name()
        ))),
    }
}

fn match_csv(c: &Common, s: &Scenario, grid: &Grid, tol: f64) -> Result<(), CliError> {
    let m = s.side_info()?;
    let ch = s.channel()?;
    let (lo, hi) = feasible_rho_x_w(&m)?;
    let pad = 1e-3 * (hi - lo);
    let rho = grid_values(grid, lo + pad, hi - pad, 101)?;
    let rows = match_sweep(&m, &ch, &rho, tol)?;
    let units = c.rate_units;
    write_csv(
        c,
        &["rho_x_w", units.column(), "beta", "residual", "gap"],
        rows.iter()
            .map(|r| vec![num(r.rho_x_w), num(units.from_bits(r.rate_bits)), num(r.beta), num(r.residual), num(r.gap)]),
    )
}

fn si_match(c: &Common, grid: &Grid, tol: f64) -> Result<(), CliError> {
    let s = load(c)?;
    if s.kind != Kind::SiMatch {
        return Err(CliError::validation(format!("kind: si-match needs kind si_match, got {}", s.kind.name())));
    }
    if grid.points.is_some() || grid.lo.is_some() || grid.hi.is_some() {
        return match_csv(c, &s, grid, tol);
    }
    let mut report = json!({ "schema": crate::scenario::SCHEMA_VERSION, "kind": s.kind.name() });
    extend(&mut report, match_report(&s, c.rate_units)?);
    write_json(c, &report)
}

fn control_check(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let o = s
        .objectives
        .ok_or_else(|| CliError::validation("objectives: required for control-check"))?;
    let cls = classify(&o.phi_e, &o.phi_d);
    let mut report = json!({
        "schema": crate::scenario::SCHEMA_VERSION,
        "kind": s.kind.name(),
        "classification": cls,
        "linear_equilibrium_claimed": !cls.phi_e_cross_term && !cls.phi_d_cross_term && cls.canonical.is_some(),
    });
    if let (Ok(m), Some(ch)) = (s.pair(), s.channel) {
        match solve_objectives(&m, &o.phi_e, &o.phi_d, ch.noise_var) {
            Ok((_, sol)) => extend(&mut report, json!({ "solution": sol })),
            Err(e) if e.is_validation() => extend(&mut report, json!({ "solve_error": e.to_string() })),
            Err(e) => return Err(e.into()),
        }
    }
    write_json(c, &report)
}

fn run_verify(c: &Common, suite: Suite) -> Result<(), CliError> {
    let seed = c.seed.unwrap_or(verify::DEFAULT_SEED);
    let summary = verify::run(suite, seed);
    for k in &summary.checks {
        let op = match k.bound {
            Bound::AtMost => "<=",
            Bound::Above => ">",
        };
        let status = match (k.passed, k.known_unattainable) {
            (true, _) => "pass",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        eprintln!(
            "[{:>2}] {:<40} {:>12.4e} {op} {:<8.1e} {status}",
            k.criterion, k.name, k.measured, k.tolerance
        );
    }
    write_json(c, &serde_json::to_value(&summary)?)?;
    if summary.passed {
        Ok(())
    } else {
        Err(CliError::numerical(format!("verify: failed checks: {}", summary.failed.join(", "))))
    }
}
