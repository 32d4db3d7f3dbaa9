//! Command-line front end: model registry, config, persistence, exports.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{AubrySourceCfg, ConfigError, OutputFormat, RunConfig};
use wkam::commute::{run_pair_suite, PairSuiteConfig, Verdict};
use wkam::grid::{GridFunction, TorusGrid};
use wkam::io::{self, GridMeta, KernelCache};
use wkam::kernel::{build_kernel, ActionKernel, Direction, DENSE_NODE_LIMIT};
use wkam::model::HamiltonianModel;
use wkam::registry;
use wkam::regularize::{lasry_lions, smoothness_profile, RegularizationSchedule};
use wkam::structures::{
    aubry_from_pairs, aubry_from_peierls, default_aubry_eps, mather_alpha, peierls_barrier,
    sweep_1d, AlphaSolver, AlphaSweepConfig,
};
use wkam::transform::{legendre, LagrangianTable};
use wkam::weakkam::{
    critical_value_karp, pair_solutions, solve_weak_kam, SolveConfig, KARP_NODE_LIMIT,
};

#[derive(Parser)]
#[command(name = "wkam", version, about = "Weak KAM toolkit on the flat torus")]
struct Cli {
    /// Run configuration file (flat key=value with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid nodes per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Time step.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (0 = auto).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Disable the kernel cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Solution output format.
    #[arg(long, global = true, value_enum)]
    format: Option<CliFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Bin,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the backward weak KAM problem for model g.
    Solve,
    /// Sweep the Mather alpha function over cohomology classes.
    Alpha,
    /// Approximate the projected Aubry set.
    Aubry,
    /// Compute the Peierls barrier matrix.
    Peierls,
    /// Verify the commuting-pair theorems on (g, h) plus a negative control.
    CommuteCheck,
    /// Alternate forward/backward smoothing of a subsolution.
    Regularize,
    /// Inspect or clear the kernel cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Inspect,
    Clear,
}

/// Process failure categories, mapped to exit codes.
enum Failure {
    Config(String),      // 2
    Solver(String),      // 3
    Verdict(String),     // 4
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verdict(_) => 4,
        }
    }

    fn reason(&self) -> String {
        match self {
            Failure::Config(m) => format!("config: {m}"),
            Failure::Solver(m) => format!("solver: {m}"),
            Failure::Verdict(m) => format!("verdict: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<wkam::Error> for Failure {
    fn from(e: wkam::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.reason());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(n) = cli.grid {
        cfg.grid_n = n;
    }
    if let Some(tau) = cli.tau {
        cfg.tau = tau;
    }
    if let Some(tol) = cli.tol {
        cfg.solver_tol = tol;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cli.no_cache {
        cfg.no_cache = true;
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            CliFormat::Bin => OutputFormat::Bin,
            CliFormat::Csv => OutputFormat::Csv,
        };
    }
    let sub = match &cli.command {
        Command::Solve => "solve",
        Command::Alpha => "alpha",
        Command::Aubry => "aubry",
        Command::Peierls => "peierls",
        Command::CommuteCheck => "commute-check",
        Command::Regularize => "regularize",
        Command::Cache { .. } => "cache",
    };
    cfg.validate(sub)?;

    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Alpha => cmd_alpha(&cfg),
        Command::Aubry => cmd_aubry(&cfg),
        Command::Peierls => cmd_peierls(&cfg),
        Command::CommuteCheck => cmd_commute(&cfg),
        Command::Regularize => cmd_regularize(&cfg),
        Command::Cache { action } => cmd_cache(&cfg, action),
    }
}

fn cache_for(cfg: &RunConfig) -> Result<Option<KernelCache>, Failure> {
    if cfg.no_cache {
        return Ok(None);
    }
    let dir = std::env::var_os("WKAM_CACHE_DIR")
        .map(PathBuf::from)
        .or_else(|| cfg.cache_dir.clone())
        .unwrap_or_else(|| cfg.out_dir.join("kernel-cache"));
    Ok(Some(KernelCache::new(dir)?))
}

fn model_for(spec: &str) -> Result<HamiltonianModel, Failure> {
    let m = registry::builtin(spec)?;
    if !m.is_tonelli() {
        return Err(Failure::Config(format!("model '{spec}' failed Tonelli validation")));
    }
    Ok(m)
}

fn grid_for(model: &HamiltonianModel, n: usize) -> Result<TorusGrid, Failure> {
    Ok(match model.dim() {
        1 => TorusGrid::line(n)?,
        _ => TorusGrid::square(n)?,
    })
}

/// Build (or load) the one-step kernel; reports whether it came from cache.
fn kernel_cached(
    model: &HamiltonianModel,
    table: Option<&LagrangianTable>,
    grid: &TorusGrid,
    cfg: &RunConfig,
    direction: Direction,
    cache: Option<&KernelCache>,
) -> Result<(ActionKernel, bool), Failure> {
    let key = KernelCache::key(
        model.label(),
        grid.dims(),
        cfg.tau,
        model.p_window(),
        model.v_window(),
        cfg.n_p,
        cfg.n_v,
        direction,
    );
    if let Some(c) = cache {
        if let Some(k) = c.load(&key, model.label())? {
            return Ok((k, true));
        }
    }
    let built;
    let table = match table {
        Some(t) => t,
        None => {
            built = legendre(model, grid, cfg.n_p, cfg.n_v)?;
            &built
        }
    };
    let k = build_kernel(table, cfg.tau, direction)?;
    if let Some(c) = cache {
        c.store(&key, &k)?;
    }
    Ok((k, false))
}

fn write_summary(out_dir: &Path, lines: &[(String, String)]) -> Result<(), Failure> {
    let mut text = String::new();
    for (k, v) in lines {
        text.push_str(&format!("{k}={v}\n"));
    }
    io::write_atomic(&out_dir.join("summary.txt"), text.as_bytes())?;
    Ok(())
}

fn kv(k: &str, v: impl std::fmt::Display) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let model = model_for(&cfg.model_g)?;
    let grid = grid_for(&model, cfg.grid_n)?;
    let cache = cache_for(cfg)?;
    let (kernel, cache_hit) =
        kernel_cached(&model, None, &grid, cfg, Direction::Negative, cache.as_ref())?;
    let seed = GridFunction::constant(grid.clone(), 0.0);
    let solve_cfg = SolveConfig {
        tol: cfg.solver_tol,
        max_iter: cfg.max_iter,
        ..Default::default()
    };
    let result = solve_weak_kam(&kernel, &seed, &solve_cfg)?;
    let meta = GridMeta {
        label: model.label().to_string(),
        alpha: Some(result.alpha),
        anchor: Some(result.anchor),
    };
    match cfg.format {
        OutputFormat::Bin => io::write_grid(&result.u, &cfg.out_dir.join("u_minus.bin"), &meta)?,
        OutputFormat::Csv => io::write_function_csv(&cfg.out_dir.join("u_minus.csv"), &result.u)?,
    }
    io::write_residual_history_csv(&cfg.out_dir.join("residuals.csv"), &result)?;
    write_summary(
        &cfg.out_dir,
        &[
            kv("model", model.label()),
            kv("grid_n", cfg.grid_n),
            kv("tau", cfg.tau),
            kv("alpha", format!("{:.12e}", result.alpha)),
            kv("iterations", result.iterations),
            kv("residual", format!("{:.6e}", result.residual)),
            kv("converged", result.converged),
            kv("cache_hit", cache_hit),
        ],
    )?;
    if !result.converged {
        return Err(Failure::Solver("weak KAM iteration did not converge".into()));
    }
    println!(
        "alpha = {:.9} after {} iterations (residual {:.3e})",
        result.alpha, result.iterations, result.residual
    );
    Ok(())
}

fn cmd_alpha(cfg: &RunConfig) -> Result<(), Failure> {
    let model = model_for(&cfg.model_g)?;
    let grid = grid_for(&model, cfg.grid_n)?;
    let mut sweep = AlphaSweepConfig::new(grid.clone(), cfg.tau);
    sweep.n_p = cfg.n_p;
    sweep.n_v = cfg.n_v;
    sweep.tol_flat = cfg.tol_flat;
    sweep.solver = if grid.node_count() <= KARP_NODE_LIMIT {
        AlphaSolver::Karp
    } else {
        AlphaSolver::Power(SolveConfig {
            tol: cfg.solver_tol,
            max_iter: cfg.max_iter,
            ..Default::default()
        })
    };
    let nodes: Vec<wkam::CohomologyClass> = sweep_1d(cfg.c_min, cfg.c_max, cfg.c_count)
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; model.dim()];
            v[0] = c.0[0];
            wkam::CohomologyClass(v)
        })
        .collect();
    let table = mather_alpha(&model, &nodes, &sweep)?;
    io::write_alpha_csv(&cfg.out_dir.join("alpha.csv"), &table)?;
    let missing = table.alpha.iter().filter(|a| a.is_none()).count();
    let mut lines = vec![
        kv("model", model.label()),
        kv("grid_n", cfg.grid_n),
        kv("tau", cfg.tau),
        kv("c_count", cfg.c_count),
        kv("missing_entries", missing),
        kv("tol_flat", format!("{:.6e}", table.tol_flat)),
        kv("flats", table.flats.len()),
    ];
    for (i, f) in table.flats.iter().enumerate() {
        let lo = table.c_nodes[f.first].0[0];
        let hi = table.c_nodes[f.last].0[0];
        lines.push(kv(
            &format!("flat.{i}"),
            format!("[{lo},{hi}] alpha={:.6} defect={:.3e}", f.alpha_mean, f.defect),
        ));
    }
    write_summary(&cfg.out_dir, &lines)?;
    println!(
        "alpha sweep: {} nodes, {} flat(s), tol_flat {:.3e}",
        cfg.c_count,
        table.flats.len(),
        table.tol_flat
    );
    Ok(())
}

fn alpha_for_kernel(kernel: &ActionKernel, cfg: &RunConfig) -> Result<f64, Failure> {
    if kernel.grid().node_count() <= KARP_NODE_LIMIT {
        Ok(critical_value_karp(kernel)?)
    } else {
        let seed = GridFunction::constant(kernel.grid().clone(), 0.0);
        let r = solve_weak_kam(
            kernel,
            &seed,
            &SolveConfig {
                tol: cfg.solver_tol,
                max_iter: cfg.max_iter,
                ..Default::default()
            },
        )?;
        if !r.converged {
            return Err(Failure::Solver("critical value iteration did not converge".into()));
        }
        Ok(r.alpha)
    }
}

fn cmd_aubry(cfg: &RunConfig) -> Result<(), Failure> {
    let model = model_for(&cfg.model_g)?;
    let grid = grid_for(&model, cfg.grid_n)?;
    if grid.node_count() > DENSE_NODE_LIMIT {
        return Err(Failure::Config(format!(
            "aubry needs a dense barrier: {} nodes exceed {DENSE_NODE_LIMIT}",
            grid.node_count()
        )));
    }
    let cache = cache_for(cfg)?;
    let table = legendre(&model, &grid, cfg.n_p, cfg.n_v)?;
    let (km, _) = kernel_cached(&model, Some(&table), &grid, cfg, Direction::Negative, cache.as_ref())?;
    let eps = cfg
        .aubry_eps
        .unwrap_or_else(|| default_aubry_eps(cfg.barrier_tol, grid.max_spacing()));
    let approx = match cfg.aubry_source {
        AubrySourceCfg::Peierls => {
            let alpha = alpha_for_kernel(&km, cfg)?;
            let b = peierls_barrier(&km, alpha, cfg.barrier_tol, cfg.barrier_k_max)?;
            if !b.converged {
                return Err(Failure::Solver("barrier iteration did not converge".into()));
            }
            aubry_from_peierls(&b, eps)?
        }
        AubrySourceCfg::Pairs => {
            let (kp, _) =
                kernel_cached(&model, Some(&table), &grid, cfg, Direction::Positive, cache.as_ref())?;
            let mut pairs = Vec::new();
            let seeds: Vec<(String, GridFunction)> = vec![
                ("const0".into(), GridFunction::constant(grid.clone(), 0.0)),
                ("cone-0.25".into(), cone_seed(&grid, 0.25, 0.3)),
                ("cone-0.5".into(), cone_seed(&grid, 0.5, 0.5)),
                ("cone-0.75".into(), cone_seed(&grid, 0.75, 0.3)),
            ];
            for (label, seed) in seeds {
                let p = pair_solutions(&km, &kp, &seed, cfg.solver_tol, label)?;
                if !p.u_minus.converged || !p.u_plus.converged {
                    return Err(Failure::Solver("pairing solve did not converge".into()));
                }
                pairs.push(p);
            }
            aubry_from_pairs(&pairs, eps)?
        }
    };
    io::write_mask(&cfg.out_dir.join("aubry_mask.txt"), &approx.mask)?;
    write_summary(
        &cfg.out_dir,
        &[
            kv("model", model.label()),
            kv("grid_n", cfg.grid_n),
            kv("eps", format!("{eps:.6e}")),
            kv(
                "source",
                match cfg.aubry_source {
                    AubrySourceCfg::Peierls => "peierls",
                    AubrySourceCfg::Pairs => "pairs",
                },
            ),
            kv("mask_size", approx.node_indices().len()),
            kv(
                "approximation_side",
                match cfg.aubry_source {
                    // Finite horizon overestimates h, shrinking the mask from
                    // outside; a finite pair family intersects from outside.
                    AubrySourceCfg::Peierls => "from-above-in-horizon",
                    AubrySourceCfg::Pairs => "superset-of-aubry (finite family)",
                },
            ),
        ],
    )?;
    println!("aubry mask: {} node(s) at eps {:.3e}", approx.node_indices().len(), eps);
    Ok(())
}

fn cone_seed(grid: &TorusGrid, center: f64, slope: f64) -> GridFunction {
    GridFunction::sample(grid.clone(), |x| {
        let d = (x[0] - center).abs();
        slope * d.min(1.0 - d)
    })
    .expect("finite seed")
}

fn cmd_peierls(cfg: &RunConfig) -> Result<(), Failure> {
    let model = model_for(&cfg.model_g)?;
    let grid = grid_for(&model, cfg.grid_n)?;
    if grid.node_count() > DENSE_NODE_LIMIT {
        return Err(Failure::Config(format!(
            "peierls is dense-only: {} nodes exceed {DENSE_NODE_LIMIT}",
            grid.node_count()
        )));
    }
    let cache = cache_for(cfg)?;
    let (km, _) = kernel_cached(&model, None, &grid, cfg, Direction::Negative, cache.as_ref())?;
    let alpha = alpha_for_kernel(&km, cfg)?;
    let b = peierls_barrier(&km, alpha, cfg.barrier_tol, cfg.barrier_k_max)?;
    io::write_barrier_csv(&cfg.out_dir.join("barrier.csv"), &b)?;
    let diag_min = b.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
    write_summary(
        &cfg.out_dir,
        &[
            kv("model", model.label()),
            kv("grid_n", cfg.grid_n),
            kv("alpha_used", format!("{alpha:.12e}")),
            kv("horizon", b.horizon),
            kv("converged", b.converged),
            kv("diag_min", format!("{diag_min:.6e}")),
        ],
    )?;
    if !b.converged {
        return Err(Failure::Solver(
            "barrier did not converge; alpha estimate may be off, retry with the Karp oracle".into(),
        ));
    }
    println!("barrier converged at horizon {} (alpha {:.9})", b.horizon, alpha);
    Ok(())
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn cmd_commute(cfg: &RunConfig) -> Result<(), Failure> {
    let g = model_for(&cfg.model_g)?;
    let h_spec = cfg
        .model_h
        .clone()
        .ok_or_else(|| Failure::Config("commute-check requires model.h".into()))?;
    let h = model_for(&h_spec)?;
    let control = model_for(&cfg.control_h)?;

    let mut suite = PairSuiteConfig {
        ladder: cfg.ladder.clone(),
        horizon: cfg.horizon,
        n_p: cfg.n_p,
        n_v: cfg.n_v,
        solver_tol: cfg.solver_tol,
        max_iter: cfg.max_iter,
        c_sweep: Some((cfg.c_min, cfg.c_max, cfg.commute_c_count)),
        ..Default::default()
    };
    suite.barrier_tol = cfg.barrier_tol;
    suite.barrier_k_max = cfg.barrier_k_max;

    let main_report = run_pair_suite(&g, &h, &suite)?;
    // The default profile always exercises a non-commuting control so a run
    // demonstrates discriminative power, not just agreement.
    let control_report = run_pair_suite(&g, &control, &suite)?;

    let mut text = main_report.render_text();
    text.push('\n');
    text.push_str(&control_report.render_text());
    io::write_atomic(&cfg.out_dir.join("report.txt"), text.as_bytes())?;

    let mut summary = String::new();
    summary.push_str("suite=main\n");
    summary.push_str(&main_report.summary());
    summary.push_str("suite=control\n");
    summary.push_str(&control_report.summary());
    summary.push_str(&format!("expect.main={}\n", cfg.expect));
    summary.push_str(&format!("expect.control={}\n", cfg.control_expect));
    io::write_atomic(&cfg.out_dir.join("summary.txt"), summary.as_bytes())?;

    let got_main = verdict_word(main_report.overall());
    let got_control = verdict_word(control_report.overall());
    println!("main pair ({} | {}): {}", main_report.g_label, main_report.h_label, got_main);
    println!(
        "control pair ({} | {}): {}",
        control_report.g_label, control_report.h_label, got_control
    );
    if got_main != cfg.expect || got_control != cfg.control_expect {
        return Err(Failure::Verdict(format!(
            "expected main={} control={}, got main={got_main} control={got_control}",
            cfg.expect, cfg.control_expect
        )));
    }
    Ok(())
}

fn cmd_regularize(cfg: &RunConfig) -> Result<(), Failure> {
    let model = model_for(&cfg.model_g)?;
    let grid = grid_for(&model, cfg.grid_n)?;
    let cache = cache_for(cfg)?;
    let table = legendre(&model, &grid, cfg.n_p, cfg.n_v)?;
    let (km, _) = kernel_cached(&model, Some(&table), &grid, cfg, Direction::Negative, cache.as_ref())?;
    let (kp, _) = kernel_cached(&model, Some(&table), &grid, cfg, Direction::Positive, cache.as_ref())?;
    let alpha = match cfg.reg_alpha {
        Some(a) => a,
        None => alpha_for_kernel(&km, cfg)?,
    };
    let seed = GridFunction::constant(grid.clone(), 0.0);
    let schedule = RegularizationSchedule::geometric(cfg.rounds, cfg.eps1)?;
    let before = smoothness_profile(&seed);
    let out = lasry_lions(&seed, &km, &kp, &schedule, alpha, cfg.solver_tol.max(1e-9))?;
    let after = smoothness_profile(&out);
    let violation = wkam::weakkam::check_subsolution(&out, &km, alpha);
    let meta = GridMeta {
        label: model.label().to_string(),
        alpha: Some(alpha),
        anchor: None,
    };
    match cfg.format {
        OutputFormat::Bin => io::write_grid(&out, &cfg.out_dir.join("u_reg.bin"), &meta)?,
        OutputFormat::Csv => io::write_function_csv(&cfg.out_dir.join("u_reg.csv"), &out)?,
    }
    io::write_profiles_csv(
        &cfg.out_dir.join("profiles.csv"),
        &[("before".into(), before), ("after".into(), after)],
    )?;
    write_summary(
        &cfg.out_dir,
        &[
            kv("model", model.label()),
            kv("grid_n", cfg.grid_n),
            kv("alpha", format!("{alpha:.12e}")),
            kv("rounds", cfg.rounds),
            kv("eps1", cfg.eps1),
            kv("violation_after", format!("{violation:.6e}")),
            kv("lip_after", format!("{:.6e}", after.lip)),
            kv("semi_cc_after", format!("{:.6e}", after.semi_cc)),
            kv("semi_cv_after", format!("{:.6e}", after.semi_cv)),
        ],
    )?;
    println!(
        "regularized: {} rounds, violation {:.3e}, lip {:.3}",
        cfg.rounds, violation, after.lip
    );
    Ok(())
}

fn cmd_cache(cfg: &RunConfig, action: CacheAction) -> Result<(), Failure> {
    let Some(cache) = cache_for(cfg)? else {
        return Err(Failure::Config("cache disabled by --no-cache".into()));
    };
    match action {
        CacheAction::Inspect => {
            let entries = cache.entries()?;
            println!("cache dir: {}", cache.dir().display());
            for (key, size) in &entries {
                println!("{key}  {size} bytes");
            }
            println!("{} entries", entries.len());
        }
        CacheAction::Clear => {
            let removed = cache.clear()?;
            println!("removed {removed} cached kernel(s)");
        }
    }
    Ok(())
}
