//! Command-line verification harness: evaluate individual objects, run the
//! randomized verification suites with seeded reproducibility, and sweep
//! parameter grids concurrently.
//!
//! Exit codes: 0 when every check passes, 1 on any check failure, 2 on
//! configuration or usage errors. `RAYON_NUM_THREADS` caps the sweep worker
//! threads; reports are byte-identical for a fixed `(config, seed)`
//! regardless of thread count.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eqg::evalrep::{l_operator, EvaluationRep, LMethod};
use eqg::params::EllipticParams;
use eqg::qseries::{bracket, BracketCtx};
use eqg::rmatrix::{closed_form_r1l, fuse_r, kappa, r_matrix, Gauge};
use eqg::scalar::Cx;
use eqg::suites::run_suites;
use eqg::{RunConfig, TruncationPolicy};
use rayon::prelude::*;
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "eqg",
    about = "Numerical verification harness for the elliptic quantum group toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config file with the RunConfig fields (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
    /// deformation parameter as re,im
    #[arg(long, value_parser = parse_cx)]
    q: Option<Cx>,
    /// elliptic parameter as re,im
    #[arg(long, value_parser = parse_cx)]
    r: Option<Cx>,
    /// level as re,im
    #[arg(long, value_parser = parse_cx)]
    c: Option<Cx>,
    /// truncation order
    #[arg(long)]
    trunc: Option<usize>,
    /// target tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// random points per check
    #[arg(long)]
    samples: Option<usize>,
    /// seed for all randomized draws
    #[arg(long)]
    seed: Option<u64>,
    /// numeric precision: double | extended | extended:<digits>
    #[arg(long)]
    precision: Option<String>,
}

impl ConfigArgs {
    fn build(&self, suites: Option<&str>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str::<RunConfig>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(q) = self.q {
            cfg.q = [q.re, q.im];
        }
        if let Some(r) = self.r {
            cfg.r = [r.re, r.im];
        }
        if let Some(c) = self.c {
            cfg.c = [c.re, c.im];
        }
        if let Some(t) = self.trunc {
            cfg.trunc = t;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.precision {
            cfg.precision = p.clone();
        }
        if let Some(s) = suites {
            cfg.suites = s.split(',').map(|x| x.trim().to_string()).collect();
        }
        Ok(cfg)
    }
}

fn parse_cx(s: &str) -> std::result::Result<Cx, String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re] => re
            .trim()
            .parse::<f64>()
            .map(|x| Cx::new(x, 0.0))
            .map_err(|e| e.to_string()),
        [re, im] => {
            let re = re.trim().parse::<f64>().map_err(|e| e.to_string())?;
            let im = im.trim().parse::<f64>().map_err(|e| e.to_string())?;
            Ok(Cx::new(re, im))
        }
        _ => Err("expected re or re,im".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print individual values: theta brackets, R-matrices, kappa, fused
    /// blocks, L-operator entries
    Eval {
        #[command(subcommand)]
        what: EvalWhat,
    },
    /// Run verification suites and write a machine-readable report
    Verify {
        #[command(flatten)]
        common: ConfigArgs,
        /// comma-separated: theta,rmatrix,rll,algebroid,freefield or all
        #[arg(long, default_value = "all")]
        suite: String,
        /// write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite over a parameter grid, one report per cell, concurrently
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// grid spec, e.g. "q.re=0.25:0.45:3;r.re=1.0:2.0:3" or "trunc=10:40:4"
        #[arg(long)]
        grid: String,
        #[arg(long, default_value = "theta")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalWhat {
    /// Theta bracket [u] (or [u]* with --starred)
    Theta {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, value_parser = parse_cx)]
        u: Cx,
        #[arg(long)]
        starred: bool,
    },
    /// The 4x4 dynamical R-matrix at (u, s)
    Rmat {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, value_parser = parse_cx)]
        u: Cx,
        #[arg(long, value_parser = parse_cx)]
        s: Cx,
        #[arg(long)]
        starred: bool,
    },
    /// The constant kappa
    Kappa {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// The fused block R+_{1l}(u, s)
    Fuse {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        l: usize,
        #[arg(long, value_parser = parse_cx)]
        u: Cx,
        #[arg(long, value_parser = parse_cx)]
        s: Cx,
        /// closed | product
        #[arg(long, default_value = "closed")]
        method: String,
    },
    /// L-operator entries on the spin-l evaluation module
    Lop {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        l: usize,
        #[arg(long, value_parser = parse_cx)]
        u: Cx,
        /// evaluation point of the module
        #[arg(long, value_parser = parse_cx)]
        v: Cx,
        /// dynamical parameter value
        #[arg(long, value_parser = parse_cx, default_value = "0.83,0.19")]
        p_val: Cx,
        /// closed | gauss
        #[arg(long, default_value = "closed")]
        method: String,
    },
}

fn params_of(cfg: &RunConfig) -> Result<(EllipticParams<f64>, TruncationPolicy)> {
    let params = cfg.params().map_err(|e| anyhow!("{e}"))?;
    Ok((params, TruncationPolicy::new(cfg.trunc, cfg.tol.min(1e-9))))
}

fn print_matrix(label: &str, dims: (usize, usize), entries: &[Cx], prefactor: Cx) {
    println!("{label}: dims {}x{} (x) {}x{}", 2, 2, dims.0, dims.1);
    println!("  scalar prefactor: {prefactor}");
    let d = dims.0 * dims.1;
    for row in 0..d {
        let cells: Vec<String> = (0..d)
            .map(|col| {
                let z = entries[row * d + col];
                if z.norm() == 0.0 {
                    "0".into()
                } else {
                    format!("{:.6}{:+.6}i", z.re, z.im)
                }
            })
            .collect();
        println!("  [{}]", cells.join(", "));
    }
}

fn cmd_eval(what: EvalWhat) -> Result<bool> {
    match what {
        EvalWhat::Theta { common, u, starred } => {
            let cfg = common.build(None)?;
            let (params, policy) = params_of(&cfg)?;
            let v = bracket(u, &params, starred, policy).map_err(|e| anyhow!("{e}"))?;
            println!(
                "[{}]{} = {:+.12}{:+.12}i   est_error {:.3e}   converged {}",
                u,
                if starred { "*" } else { "" },
                v.value.re,
                v.value.im,
                v.est_error,
                v.converged
            );
        }
        EvalWhat::Rmat { common, u, s, starred } => {
            let cfg = common.build(None)?;
            let (params, policy) = params_of(&cfg)?;
            let blk = r_matrix(u, s, &params, starred, policy).map_err(|e| {
                anyhow!("{e}; resample u or s away from bracket zeros")
            })?;
            print_matrix("R+(u,s) bare entries", (2, 2), &blk.entries, blk.scalar_prefactor);
        }
        EvalWhat::Kappa { common } => {
            let cfg = common.build(None)?;
            let (params, policy) = params_of(&cfg)?;
            let k = kappa(&params, policy).map_err(|e| anyhow!("{e}"))?;
            println!("kappa = {:+.12}{:+.12}i", k.re, k.im);
        }
        EvalWhat::Fuse { common, l, u, s, method } => {
            let cfg = common.build(None)?;
            let (params, policy) = params_of(&cfg)?;
            let blk = match method.as_str() {
                "closed" => closed_form_r1l(l, u, s, &params, false, policy, Gauge::RepL),
                "product" => fuse_r(l, u, s, &params, false, policy, Gauge::RepL),
                other => bail!("unknown fusion method '{other}' (closed | product)"),
            }
            .map_err(|e| anyhow!("{e}"))?;
            print_matrix(
                &format!("R+_(1,{l})(u,s) bare entries [{method}]"),
                blk.dims,
                &blk.entries,
                blk.scalar_prefactor,
            );
        }
        EvalWhat::Lop { common, l, u, v, p_val, method } => {
            let cfg = common.build(None)?;
            let (params, policy) = params_of(&cfg)?;
            let rep = EvaluationRep::new(l, v, params).map_err(|e| anyhow!("{e}"))?;
            let m = match method.as_str() {
                "closed" => LMethod::ClosedForm,
                "gauss" => LMethod::Gauss,
                other => bail!("unknown method '{other}' (closed | gauss)"),
            };
            let ops = l_operator(u, &rep, m, policy).map_err(|e| anyhow!("{e}"))?;
            let ctx = BracketCtx::new(params, policy).map_err(|e| anyhow!("{e}"))?;
            let labels = ["++", "+-", "-+", "--"];
            for (i, (e1, e2)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                let mat = ops[*e1][*e2].eval_at(p_val, &ctx);
                println!("L{}(u) at P = {p_val} (charge e^{{{}Q}}):", labels[i], ops[*e1][*e2].q_charge);
                let d = rep.dim();
                for row in 0..d {
                    let cells: Vec<String> = (0..d)
                        .map(|col| format!("{:+.8}{:+.8}i", mat[row * d + col].re, mat[row * d + col].im))
                        .collect();
                    println!("  [{}]", cells.join(", "));
                }
            }
        }
    }
    Ok(true)
}

fn cmd_verify(common: ConfigArgs, suite: String, out: Option<PathBuf>) -> Result<bool> {
    let cfg = common.build(Some(&suite))?;
    let started = std::time::Instant::now();
    let report = run_suites(&cfg).map_err(|e| anyhow!("{e}"))?;
    let elapsed = started.elapsed();
    for c in &report.checks {
        println!(
            "{} {:>9}/{:<22} residual {:>12.3e}  tol {:>8.1e}  [{}]",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.check_name,
            c.residual,
            c.tol,
            c.paper_anchor
        );
    }
    eprintln!(
        "{} checks, {} passed, {} failed in {:.2?}",
        report.summary.total, report.summary.passed, report.summary.failed, elapsed
    );
    if let Some(path) = out {
        let mut f = std::fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        f.write_all(report.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        eprintln!("report written to {}", path.display());
    }
    Ok(report.all_pass())
}

#[derive(Clone, Debug)]
struct GridAxis {
    field: String,
    values: Vec<f64>,
}

fn parse_grid(spec: &str) -> Result<Vec<GridAxis>> {
    let mut axes = Vec::new();
    for part in spec.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (field, range) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("grid axis '{part}' must be field=start:stop:count"))?;
        let nums: Vec<&str> = range.split(':').collect();
        let [start, stop, count] = nums.as_slice() else {
            bail!("grid axis '{part}' must be field=start:stop:count");
        };
        let start: f64 = start.parse()?;
        let stop: f64 = stop.parse()?;
        let count: usize = count.parse()?;
        if count < 1 {
            bail!("grid axis '{part}' needs at least one point");
        }
        let values = if count == 1 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()
        };
        let valid = [
            "q.re", "q.im", "r.re", "r.im", "c.re", "c.im", "trunc", "tol", "samples",
        ];
        if !valid.contains(&field.trim()) {
            bail!("unknown grid field '{}'; valid: {}", field.trim(), valid.join(", "));
        }
        axes.push(GridAxis {
            field: field.trim().to_string(),
            values,
        });
    }
    if axes.is_empty() {
        bail!("empty grid spec");
    }
    Ok(axes)
}

fn apply_axis(cfg: &mut RunConfig, field: &str, value: f64) {
    match field {
        "q.re" => cfg.q[0] = value,
        "q.im" => cfg.q[1] = value,
        "r.re" => cfg.r[0] = value,
        "r.im" => cfg.r[1] = value,
        "c.re" => cfg.c[0] = value,
        "c.im" => cfg.c[1] = value,
        "trunc" => cfg.trunc = value.round() as usize,
        "tol" => cfg.tol = value,
        "samples" => cfg.samples = value.round() as usize,
        _ => unreachable!(),
    }
}

#[derive(serde::Serialize)]
struct SweepCell {
    cell: Vec<(String, f64)>,
    passed: usize,
    failed: usize,
    max_residual: f64,
    report: eqg::Report,
}

fn cmd_sweep(common: ConfigArgs, grid: String, suite: String, out: Option<PathBuf>) -> Result<bool> {
    let base = common.build(Some(&suite))?;
    let axes = parse_grid(&grid)?;
    // cartesian product of axis values, row-major
    let mut cells: Vec<Vec<(String, f64)>> = vec![vec![]];
    for axis in &axes {
        let mut next = Vec::new();
        for cell in &cells {
            for &v in &axis.values {
                let mut c = cell.clone();
                c.push((axis.field.clone(), v));
                next.push(c);
            }
        }
        cells = next;
    }
    let results: Vec<Result<SweepCell>> = cells
        .par_iter()
        .map(|cell| {
            let mut cfg = base.clone();
            for (field, value) in cell {
                apply_axis(&mut cfg, field, *value);
            }
            let report = run_suites(&cfg).map_err(|e| anyhow!("cell {:?}: {e}", cell))?;
            let max_residual = report
                .checks
                .iter()
                .map(|c| if c.residual.is_finite() { c.residual } else { f64::MAX })
                .fold(0.0f64, f64::max);
            Ok(SweepCell {
                cell: cell.clone(),
                passed: report.summary.passed,
                failed: report.summary.failed,
                max_residual,
                report,
            })
        })
        .collect();
    let mut all_ok = true;
    let mut cells_out = Vec::new();
    for r in results {
        match r {
            Ok(cell) => {
                let tag: Vec<String> = cell
                    .cell
                    .iter()
                    .map(|(f, v)| format!("{f}={v:.6}"))
                    .collect();
                println!(
                    "{} [{}] passed {} failed {} max residual {:.3e}",
                    if cell.failed == 0 { "PASS" } else { "FAIL" },
                    tag.join(", "),
                    cell.passed,
                    cell.failed,
                    cell.max_residual
                );
                all_ok &= cell.failed == 0;
                cells_out.push(cell);
            }
            Err(e) => {
                println!("ERROR {e}");
                all_ok = false;
            }
        }
    }
    if let Some(path) = out {
        let doc = serde_json::to_string_pretty(&cells_out)?;
        std::fs::write(&path, doc + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("sweep report written to {}", path.display());
    }
    Ok(all_ok)
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval { what } => cmd_eval(what),
        Command::Verify { common, suite, out } => cmd_verify(common, suite, out),
        Command::Sweep { common, grid, suite, out } => cmd_sweep(common, grid, suite, out),
    };
    match outcome {
        Ok(true) => std::process::exit(0),
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
