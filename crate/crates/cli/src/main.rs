//! `fracmass` command-line frontend.
//!
//! Exit status: 0 on success, 2 on bad input (including usage errors),
//! 3 on a numeric domain error.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fracmass::io::{any_current_from_json, current_to_json, curves_from_json, curves_to_json, region_from_json};
use fracmass::quadrature::richardson;
use fracmass::smirnov::{approximate_with, DiagnosticsConfig};
use fracmass::spectral::{radial_profile, spectral_perimeter};
use fracmass::variation::variation_check;
use fracmass::{
    boundary_mass_perimeter, fractional_mass, fractional_perimeter_mc, gradient_flow_step, regularized_mass_m1,
    spectral_mass, ApproxParams, Diagnostics, FracParams, PolyCurve, QuadConfig, SpectralConfig,
};

use config::{ApproxConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "fracmass", version, about = "Fractional mass of polygonal currents and related tools")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print one machine-readable JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fractional mass M_s (or M_1^eps) of a curves or segments file.
    Mass(MassArgs),
    /// (1-s) M_s for a list of exponents and its extrapolation to s = 1.
    Asymptotic(AsymptoticArgs),
    /// First variation against central differences on random perturbations.
    VariationCheck(VariationArgs),
    /// Approximates a preset divergence-free field by closed polygonal loops.
    Approximate(ApproximateArgs),
    /// Fractional perimeter of a planar region, by Monte Carlo and by boundary mass.
    Perimeter(PerimeterArgs),
    /// Fourier-side mass and radial power profile.
    Spectral(SpectralArgs),
    /// Explicit gradient steps of M_s on a curve.
    Flow(FlowArgs),
}

#[derive(Args, Debug)]
struct MassArgs {
    input: PathBuf,
    #[arg(long)]
    s: Option<f64>,
    /// Use the exponent-one kernel 1/max(r, eps) instead of r^-s.
    #[arg(long)]
    m1_eps: Option<f64>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// Integrate self and collinear pairs numerically as well.
    #[arg(long)]
    no_closed_forms: bool,
    #[arg(long, default_value = "energy.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AsymptoticArgs {
    input: PathBuf,
    /// Comma-separated exponents in (0, 1).
    #[arg(long, value_delimiter = ',')]
    s_list: Vec<f64>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VariationArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ApproximateArgs {
    /// `key = value` run file.
    config: PathBuf,
    /// Cube side; with --delta replaces the schedule by one level.
    #[arg(long)]
    eps: Option<f64>,
    /// Loop weight.
    #[arg(long)]
    delta: Option<f64>,
    /// Cubes where the sampled |psi| stays below rho skip cylinder matching.
    #[arg(long)]
    rho: Option<f64>,
    /// Seed for the sampled diagnostics.
    #[arg(long)]
    seed: Option<u64>,
    /// Exponent of the diagnostic M_s.
    #[arg(long)]
    s: Option<f64>,
    /// Monte-Carlo pairs for the field energy.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PerimeterArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long)]
    radial_nodes: Option<usize>,
    #[arg(long)]
    angular_nodes: Option<usize>,
    #[arg(long)]
    xi_min: Option<f64>,
    #[arg(long)]
    xi_max: Option<f64>,
    /// Treat the input as a planar region and compute s^2 P_s instead.
    #[arg(long)]
    region: bool,
    /// Also evaluate M_s by quadrature.
    #[arg(long)]
    compare: bool,
    /// CSV of the radial profile (|xi|, mean |F|^2).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FlowArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Domain(String),
}

impl From<fracmass::Error> for CliError {
    fn from(e: fracmass::Error) -> Self {
        if e.is_domain() {
            CliError::Domain(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| input(format!("cannot create {}: {e}", path.display())))
}

fn quad(order: Option<usize>) -> QuadConfig {
    let mut q = QuadConfig::default();
    if let Some(n) = order {
        q.gauss_order = n;
    }
    q
}

/// Prints the resolved configuration and the result, as text or as one JSON
/// object.
fn report(json_mode: bool, config: &Value, result: Value, text: &str) {
    if json_mode {
        println!("{}", json!({"config": config, "result": result}));
    } else {
        println!("config: {config}");
        print!("{text}");
    }
}

fn single_curve(path: &Path) -> CliResult<PolyCurve> {
    let (_, mut curves) = curves_from_json(&read(path)?)?;
    if curves.len() != 1 {
        return Err(input(format!("expected exactly one curve, found {}", curves.len())));
    }
    Ok(curves.remove(0))
}

fn cmd_mass(a: &MassArgs, cli: &Cli) -> CliResult<()> {
    let mu = any_current_from_json(&read(&a.input)?)?;
    let mut q = quad(a.quad_order);
    q.closed_forms = !a.no_closed_forms;
    let (label, value) = match (a.m1_eps, a.s) {
        (Some(eps), None) => ("M1_eps", regularized_mass_m1(&mu, eps, q)?),
        (None, Some(s)) => ("Ms", fractional_mass(&mu, &FracParams::new(s).with_quad(q))?),
        (Some(_), Some(_)) => return Err(input("give either --s or --m1-eps, not both")),
        (None, None) => return Err(input("--s or --m1-eps is required")),
    };
    let config = json!({
        "command": "mass",
        "input": a.input,
        "out": a.out,
        "s": a.s,
        "m1_eps": a.m1_eps,
        "quad_order": q.gauss_order,
        "closed_forms": q.closed_forms,
        "threads": cli.threads,
    });
    let result = json!({"kernel": label, "value": value, "segments": mu.len()});
    write(&a.out, &format!("{}\n", json!({"config": config, "result": result})))?;
    report(cli.json, &config, result, &format!("{label} = {value:.6}\n"));
    Ok(())
}

fn cmd_asymptotic(a: &AsymptoticArgs, cli: &Cli) -> CliResult<()> {
    if a.s_list.is_empty() {
        return Err(input("--s-list needs at least one exponent"));
    }
    let mu = any_current_from_json(&read(&a.input)?)?;
    let q = quad(a.quad_order);
    let mut rows = Vec::with_capacity(a.s_list.len());
    for &s in &a.s_list {
        let m = fractional_mass(&mu, &FracParams::new(s).with_quad(q))?;
        rows.push((s, (1.0 - s) * m));
    }
    let h: Vec<f64> = rows.iter().map(|r| 1.0 - r.0).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let limit = richardson(&h, &f);
    let mut csv = String::from("s,scaled_mass\n");
    for (s, v) in &rows {
        writeln!(csv, "{s},{v}").unwrap();
    }
    writeln!(csv, "limit,{limit}").unwrap();
    let config = json!({
        "command": "asymptotic",
        "input": a.input,
        "out": a.out,
        "s_list": a.s_list,
        "quad_order": q.gauss_order,
        "threads": cli.threads,
    });
    let result = json!({
        "rows": rows.iter().map(|(s, v)| json!({"s": s, "scaled_mass": v})).collect::<Vec<_>>(),
        "limit": limit,
    });
    match &a.out {
        Some(p) => {
            write(p, &csv)?;
            report(cli.json, &config, result, &format!("limit = {limit:.6}\n"));
        }
        None => report(cli.json, &config, result, &csv),
    }
    Ok(())
}

fn cmd_variation_check(a: &VariationArgs, cli: &Cli) -> CliResult<()> {
    let c = single_curve(&a.input)?;
    if c.is_closed() {
        return Err(input("variation-check needs an open curve"));
    }
    let rows = variation_check(&c, a.s, a.seed, a.count)?;
    let max = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let config = json!({
        "command": "variation-check",
        "input": a.input,
        "s": a.s,
        "seed": a.seed,
        "count": a.count,
        "threads": cli.threads,
    });
    let mut text = String::from("k,analytic,finite_difference,rel_err\n");
    for (k, r) in rows.iter().enumerate() {
        writeln!(text, "{k},{:e},{:e},{:e}", r.analytic, r.finite_difference, r.rel_err).unwrap();
    }
    let result = json!({
        "rows": rows
            .iter()
            .map(|r| json!({"analytic": r.analytic, "finite_difference": r.finite_difference, "rel_err": r.rel_err}))
            .collect::<Vec<_>>(),
        "max_rel_err": max,
    });
    if let Some(p) = &a.out {
        write(p, &text)?;
    }
    writeln!(text, "max rel_err = {max:e}").unwrap();
    report(cli.json, &config, result, &text);
    Ok(())
}

fn diagnostics_json(d: &Diagnostics) -> Value {
    json!({
        "eps": d.eps,
        "delta": d.delta,
        "mass_mu": d.mass_mu,
        "mass_psi": d.mass_psi,
        "mass_error": d.mass_error(),
        "pairing_err_max": d.pairing_err_max,
        "Ms_mu": d.ms_mu,
        "Ms_psi": d.ms_psi,
        "Ms_psi_sigma": d.ms_psi_sigma,
        "Ms_error": d.ms_error(),
        "segments": d.counts.cylinder_segments + d.counts.boundary_segments + d.counts.closing_segments,
        "loops": d.counts.loops,
        "runtime_s": d.runtime_s,
    })
}

fn cmd_approximate(a: &ApproximateArgs, cli: &Cli) -> CliResult<()> {
    let ov = Overrides { eps: a.eps, delta: a.delta, rho: a.rho, seed: a.seed, s: a.s, n: a.n };
    let cfg = ApproxConfig::from_text(&read(&a.config)?, &ov).map_err(input)?;
    let dc =
        DiagnosticsConfig { enabled: cfg.diagnostics, s: cfg.s, mc_samples: cfg.mc_samples, cells_per_axis: cfg.cells };
    create_dir(&a.out)?;
    let mut csv = format!("{}\n", Diagnostics::CSV_HEADER);
    let mut levels = Vec::new();
    let mut text = String::new();
    for (k, &(eps, delta)) in cfg.levels.iter().enumerate() {
        let mut p = ApproxParams::new(eps, delta, cfg.rho, cfg.field.dim());
        p.seed = cfg.seed;
        let out = approximate_with(&cfg.field, &p, &dc)?;
        write(&a.out.join(format!("current_{k}.json")), &current_to_json(&out.current))?;
        write(&a.out.join(format!("loops_{k}.json")), &curves_to_json(cfg.field.dim(), &out.loops))?;
        let d = &out.diagnostics;
        writeln!(csv, "{}", d.csv_row()).unwrap();
        writeln!(
            text,
            "level {k}: eps={eps} delta={delta} segments={} loops={} mass_err={:.3e} pairing_err={:.3e} Ms_err={:.3e}",
            out.current.len(),
            out.loops.len(),
            d.mass_error(),
            d.pairing_err_max,
            d.ms_error()
        )
        .unwrap();
        levels.push(diagnostics_json(d));
    }
    write(&a.out.join("diagnostics.csv"), &csv)?;
    let mut config = cfg.echo();
    config["command"] = json!("approximate");
    config["input"] = json!(a.config);
    config["out"] = json!(a.out);
    config["threads"] = json!(cli.threads);
    report(cli.json, &config, json!({"levels": levels}), &text);
    Ok(())
}

fn cmd_perimeter(a: &PerimeterArgs, cli: &Cli) -> CliResult<()> {
    let e = region_from_json(&read(&a.input)?)?;
    let (p, sigma) = fractional_perimeter_mc(&e, a.s, a.n, a.seed)?;
    let q = quad(a.quad_order);
    let pb = boundary_mass_perimeter(&e, a.s, &FracParams::new(a.s).with_quad(q))?;
    let s2 = a.s * a.s;
    let config = json!({
        "command": "perimeter",
        "input": a.input,
        "out": a.out,
        "s": a.s,
        "n": a.n,
        "seed": a.seed,
        "quad_order": q.gauss_order,
        "threads": cli.threads,
    });
    let result = json!({
        "perimeter_mc": p,
        "sigma": sigma,
        "s2_perimeter_mc": s2 * p,
        "Ms_boundary": s2 * pb,
        "perimeter_from_boundary": pb,
    });
    if let Some(path) = &a.out {
        write(path, &format!("{}\n", json!({"config": config, "result": result})))?;
    }
    let text = format!(
        "P_s (Monte Carlo) = {p:.6} +- {sigma:.2e}\nP_s (boundary mass) = {pb:.6}\ns^2 P_s = {:.6}, M_s(dE) = {:.6}\n",
        s2 * p,
        s2 * pb
    );
    report(cli.json, &config, result, &text);
    Ok(())
}

fn cmd_spectral(a: &SpectralArgs, cli: &Cli) -> CliResult<()> {
    let mut sc = SpectralConfig::default();
    if let Some(v) = a.radial_nodes {
        sc.radial_nodes = v;
    }
    if let Some(v) = a.angular_nodes {
        sc.angular_nodes = v;
    }
    if let Some(v) = a.xi_min {
        sc.xi_min = v;
    }
    if let Some(v) = a.xi_max {
        sc.xi_max = v;
    }
    let text_in = read(&a.input)?;
    let config = json!({
        "command": "spectral",
        "input": a.input,
        "out": a.out,
        "s": a.s,
        "radial_nodes": sc.radial_nodes,
        "angular_nodes": sc.angular_nodes,
        "xi_min": sc.xi_min,
        "xi_max": sc.xi_max,
        "region": a.region,
        "compare": a.compare,
        "threads": cli.threads,
    });
    let (mu, result, mut text) = if a.region {
        let e = region_from_json(&text_in)?;
        let v = spectral_perimeter(&e, a.s, &sc)?;
        let mut result = json!({"s2_perimeter_spectral": v});
        let mut text = format!("s^2 P_s (spectral) = {v:.6}\n");
        if a.compare {
            let m = a.s * a.s * boundary_mass_perimeter(&e, a.s, &FracParams::new(a.s))?;
            result["Ms_boundary"] = json!(m);
            writeln!(text, "M_s(dE) (quadrature) = {m:.6}, relative difference {:.3e}", (v - m) / m).unwrap();
        }
        (e.boundary_current(), result, text)
    } else {
        let mu = any_current_from_json(&text_in)?;
        let est = spectral_mass(&mu, a.s, &sc)?;
        let mut result = json!({"Ms_spectral": est.value, "has_boundary": est.has_boundary});
        let mut text = format!("M_s (spectral) = {:.6}\n", est.value);
        if est.has_boundary {
            text.push_str("note: the current has a boundary; the low-frequency cutoff dominates the error\n");
        }
        if a.compare {
            let m = fractional_mass(&mu, &FracParams::new(a.s))?;
            result["Ms_quadrature"] = json!(m);
            writeln!(text, "M_s (quadrature) = {m:.6}, relative difference {:.3e}", (est.value - m) / m).unwrap();
        }
        (mu, result, text)
    };
    if let Some(p) = &a.out {
        let mut csv = String::from("xi,power\n");
        for (r, v) in radial_profile(&mu, &sc)? {
            writeln!(csv, "{r},{v}").unwrap();
        }
        write(p, &csv)?;
        writeln!(text, "profile written to {}", p.display()).unwrap();
    }
    report(cli.json, &config, result, &text);
    Ok(())
}

fn cmd_flow(a: &FlowArgs, cli: &Cli) -> CliResult<()> {
    let mut c = single_curve(&a.input)?;
    create_dir(&a.out)?;
    let p = FracParams::new(a.s);
    let energy = |c: &PolyCurve| fractional_mass(&fracmass::curve_to_current(c), &p);
    let mut csv = String::from("step,Ms\n");
    let mut values = Vec::with_capacity(a.steps + 1);
    for k in 0..=a.steps {
        if k > 0 {
            c = gradient_flow_step(&c, a.s, a.dt)?;
        }
        let m = energy(&c)?;
        writeln!(csv, "{k},{m}").unwrap();
        write(&a.out.join(format!("step_{k:04}.json")), &curves_to_json(c.dim(), std::slice::from_ref(&c)))?;
        values.push(m);
    }
    write(&a.out.join("flow.csv"), &csv)?;
    let config = json!({
        "command": "flow",
        "input": a.input,
        "out": a.out,
        "s": a.s,
        "dt": a.dt,
        "steps": a.steps,
        "threads": cli.threads,
    });
    report(cli.json, &config, json!({"Ms": values}), &csv);
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| input(format!("cannot size the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Mass(a) => cmd_mass(a, cli),
        Command::Asymptotic(a) => cmd_asymptotic(a, cli),
        Command::VariationCheck(a) => cmd_variation_check(a, cli),
        Command::Approximate(a) => cmd_approximate(a, cli),
        Command::Perimeter(a) => cmd_perimeter(a, cli),
        Command::Spectral(a) => cmd_spectral(a, cli),
        Command::Flow(a) => cmd_flow(a, cli),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
