//! Command-line front end: channel-spec ingestion, experiment
//! orchestration, and machine-readable report emission.
//!
//! Exit codes are a stable contract: 0 on success, 2 on malformed input,
//! 3 on an infeasible configuration.

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use ske_core::bounds::{
    lower_bound, upper_bound, AuxScheme, CardCaps, LowerBoundOptions,
};
use ske_core::channel::{analyze_degraded, search_degraded_split, Dmbc, Factor, SplitSpec, TwoDmbc};
use ske_core::infotheory::{Distribution, JointDistribution};
use ske_core::protocol::{derive_parameters, estimate_security, CodebookPolicy};
use ske_core::typicality::{verify_joint_aep, TypicalityParams};
use ske_core::SkeError;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Drift up to this is silently renormalized; anything worse is rejected.
const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "ske", version, about = "Secret-key establishment toolkit")]
struct Cli {
    /// Worker thread count for parallel search and simulation
    /// (falls back to the SKE_JOBS environment variable).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secret-key capacity bounds for a channel pair.
    Bounds {
        /// Forward channel spec file (Alice to Bob).
        #[arg(long)]
        fwd: PathBuf,
        /// Backward channel spec file (Bob to Alice).
        #[arg(long)]
        bwd: PathBuf,
        /// Cardinality caps for the auxiliary alphabets, as `v,w1,w2`.
        #[arg(long)]
        aux_card: Option<String>,
        /// Simplex grid step for the input-law searches.
        #[arg(long, default_value_t = 0.01)]
        grid: f64,
        /// Random restarts per optimization.
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Channel-use ratio grid, as `nf:nb` pairs separated by commas.
        #[arg(long)]
        ratio_grid: Option<String>,
        /// Optimizer seed (required when --out is set).
        #[arg(long)]
        seed: Option<u64>,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a channel for the degraded factor structure.
    CheckDegraded {
        /// Channel spec file.
        #[arg(long)]
        ch: PathBuf,
        /// Factorization as `OxR,OxR,OxR` for the input and both outputs;
        /// omitted, an exhaustive search runs (alphabets up to 4 only).
        #[arg(long)]
        split: Option<String>,
        /// Markov residual tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run the key-establishment protocol and estimate its security triple.
    Simulate {
        #[arg(long)]
        fwd: PathBuf,
        #[arg(long)]
        bwd: PathBuf,
        /// Forward blocklength; everything else is derived from it.
        #[arg(long)]
        nf: usize,
        /// Pool-size slack rate.
        #[arg(long)]
        alpha: f64,
        /// Backward code slack rate.
        #[arg(long)]
        beta: f64,
        /// Typicality window half-width.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Draw an independent codebook per trial instead of fixing one.
        #[arg(long, default_value_t = false)]
        fresh_codebooks: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo check of bipartite joint-typicality acceptance rates.
    VerifyAep {
        /// Joint law of the first sub-block pair, as a matrix file.
        #[arg(long)]
        joint_u: PathBuf,
        /// Joint law of the second sub-block pair.
        #[arg(long)]
        joint_t: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
}

/// On-disk channel description: `matrix[x][y][z]` rows of probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpecFile {
    pub x_size: usize,
    pub y_size: usize,
    pub z_size: usize,
    pub matrix: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ChannelSpecFile {
    pub fn to_dmbc(&self) -> Result<Dmbc, CliError> {
        if self.matrix.len() != self.x_size {
            return Err(input(format!(
                "matrix has {} input slices, x_size says {}",
                self.matrix.len(),
                self.x_size
            )));
        }
        let mut probs = Vec::with_capacity(self.x_size * self.y_size * self.z_size);
        for (x, slice) in self.matrix.iter().enumerate() {
            if slice.len() != self.y_size || slice.iter().any(|r| r.len() != self.z_size) {
                return Err(input(format!(
                    "input slice {x}: expected {}x{} entries",
                    self.y_size, self.z_size
                )));
            }
            let sum: f64 = slice.iter().flatten().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(input(format!(
                    "input slice {x} sums to {sum:.12}, beyond the {ROW_SUM_TOL:.0e} tolerance"
                )));
            }
            probs.extend(slice.iter().flatten().map(|p| p / sum));
        }
        Dmbc::new(self.x_size, self.y_size, self.z_size, probs).map_err(CliError::from)
    }

    pub fn from_dmbc(ch: &Dmbc, label: Option<String>) -> Self {
        let matrix = (0..ch.x_size())
            .map(|x| {
                (0..ch.y_size())
                    .map(|y| (0..ch.z_size()).map(|z| ch.prob(x, y, z)).collect())
                    .collect()
            })
            .collect();
        Self {
            x_size: ch.x_size(),
            y_size: ch.y_size(),
            z_size: ch.z_size(),
            matrix,
            label,
        }
    }
}

/// On-disk joint law over a symbol pair: `matrix[a][b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpecFile {
    pub matrix: Vec<Vec<f64>>,
}

impl JointSpecFile {
    fn to_joint(&self, labels: [&str; 2]) -> Result<JointDistribution, CliError> {
        let rows = self.matrix.len();
        if rows == 0 || self.matrix.iter().any(|r| r.len() != self.matrix[0].len()) {
            return Err(input("joint matrix must be rectangular and non-empty".into()));
        }
        let cols = self.matrix[0].len();
        let sum: f64 = self.matrix.iter().flatten().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(input(format!(
                "joint matrix sums to {sum:.12}, beyond the {ROW_SUM_TOL:.0e} tolerance"
            )));
        }
        let probs: Vec<f64> = self.matrix.iter().flatten().map(|p| p / sum).collect();
        JointDistribution::new(
            probs,
            vec![rows, cols],
            labels.iter().map(|s| s.to_string()).collect(),
        )
        .map_err(CliError::from)
    }
}

/// Report envelope: everything needed to reproduce the run is echoed next
/// to the results. `wall_time_ms` is the only field allowed to differ
/// between identical runs.
#[derive(Serialize)]
struct Report<C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: C,
    results: R,
    wall_time_ms: u128,
}

pub struct CliError {
    code: i32,
    message: String,
}

fn input(message: String) -> CliError {
    CliError { code: 2, message }
}

impl From<SkeError> for CliError {
    fn from(e: SkeError) -> Self {
        let code = match e {
            SkeError::Infeasible(_) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let jobs = cli.jobs.or_else(|| {
        std::env::var("SKE_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs {
        // best effort; a second initialization in the same process is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn read_channel(path: &Path) -> Result<(ChannelSpecFile, Dmbc), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    let spec: ChannelSpecFile = serde_json::from_str(&text)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    let ch = spec.to_dmbc()?;
    Ok((spec, ch))
}

fn emit<C: Serialize, R: Serialize>(
    report: &Report<C, R>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| input(format!("report serialization: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| input(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_ratio_grid(text: &str) -> Result<Vec<(u32, u32)>, CliError> {
    text.split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| input(format!("ratio `{pair}`: expected nf:nb")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|e| input(format!("ratio `{pair}`: {e}")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a == 0 || b == 0 {
                return Err(input(format!("ratio `{pair}`: parts must be positive")));
            }
            Ok((a, b))
        })
        .collect()
}

fn parse_aux_card(text: &str) -> Result<CardCaps, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() > 3 {
        return Err(input(format!("--aux-card `{text}`: at most v,w1,w2")));
    }
    let parse = |s: &str| -> Result<Option<usize>, CliError> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        let v = s
            .parse::<usize>()
            .map_err(|e| input(format!("--aux-card `{s}`: {e}")))?;
        if v == 0 {
            return Err(input("--aux-card entries must be positive".into()));
        }
        Ok(Some(v))
    };
    let mut caps = CardCaps::default();
    if let Some(s) = parts.first() {
        caps.v = parse(s)?;
    }
    if let Some(s) = parts.get(1) {
        caps.w1 = parse(s)?;
    }
    if let Some(s) = parts.get(2) {
        caps.w2 = parse(s)?;
    }
    Ok(caps)
}

fn parse_split(text: &str, ch: &Dmbc) -> Result<SplitSpec, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(input(format!(
            "--split `{text}`: expected three OxR factors (input, legitimate output, eavesdropper output)"
        )));
    }
    let factor = |s: &str, total: usize, what: &str| -> Result<Factor, CliError> {
        let (o, r) = s
            .trim()
            .split_once('x')
            .ok_or_else(|| input(format!("factor `{s}`: expected OxR")))?;
        let o: usize = o.parse().map_err(|e| input(format!("factor `{s}`: {e}")))?;
        let r: usize = r.parse().map_err(|e| input(format!("factor `{s}`: {e}")))?;
        if o * r != total {
            return Err(input(format!(
                "factor `{s}`: {o}x{r} does not cover the {what} alphabet of size {total}"
            )));
        }
        Ok(Factor::new(o, r))
    };
    Ok(SplitSpec {
        x: factor(parts[0], ch.x_size(), "input")?,
        y: factor(parts[1], ch.y_size(), "legitimate-output")?,
        z: factor(parts[2], ch.z_size(), "eavesdropper-output")?,
    })
}

fn run(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    match command {
        Command::Bounds {
            fwd,
            bwd,
            aux_card,
            grid,
            restarts,
            ratio_grid,
            seed,
            out,
        } => {
            if out.is_some() && seed.is_none() {
                return Err(input("--seed is required when --out is set".into()));
            }
            let (fwd_spec, fwd_ch) = read_channel(&fwd)?;
            let (bwd_spec, bwd_ch) = read_channel(&bwd)?;
            let two = TwoDmbc::new(fwd_ch, bwd_ch);
            let mut opts = LowerBoundOptions {
                grid,
                restarts,
                ..LowerBoundOptions::default()
            };
            if let Some(text) = &aux_card {
                opts.caps = parse_aux_card(text)?;
            }
            if let Some(text) = &ratio_grid {
                opts.ratio_grid = parse_ratio_grid(text)?;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            let lower = lower_bound(&two, &opts)?;
            let upper = upper_bound(&two, grid)?;

            #[derive(Serialize)]
            struct Config {
                forward: ChannelSpecFile,
                backward: ChannelSpecFile,
                grid: f64,
                restarts: usize,
                ratio_grid: Vec<(u32, u32)>,
                caps: CardCaps,
                seed: u64,
            }
            let report = Report {
                tool: "ske",
                version: env!("CARGO_PKG_VERSION"),
                command: "bounds",
                config: Config {
                    forward: fwd_spec,
                    backward: bwd_spec,
                    grid,
                    restarts,
                    ratio_grid: opts.ratio_grid.clone(),
                    caps: opts.caps,
                    seed: opts.seed,
                },
                results: serde_json::json!({
                    "lower_bound": lower,
                    "upper_bound": upper,
                }),
                wall_time_ms: start.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())
        }
        Command::CheckDegraded { ch, split, tol } => {
            let (spec, channel) = read_channel(&ch)?;
            let uniform = Distribution::uniform(channel.x_size());
            let results = match &split {
                Some(text) => {
                    let split = parse_split(text, &channel)?;
                    let report = analyze_degraded(&channel, &split, &uniform, tol)?;
                    serde_json::json!({ "degraded": report.degraded(), "report": report })
                }
                None => {
                    let max = channel
                        .x_size()
                        .max(channel.y_size())
                        .max(channel.z_size());
                    if max > 4 {
                        return Err(input(format!(
                            "split required: exhaustive search covers alphabets up to 4, this channel has {max}"
                        )));
                    }
                    match search_degraded_split(&channel, &uniform, tol)? {
                        Some((split, px, py, pz, report)) => serde_json::json!({
                            "degraded": true,
                            "split": split,
                            "relabelings": { "x": px, "y": py, "z": pz },
                            "report": report,
                        }),
                        None => serde_json::json!({ "degraded": false }),
                    }
                }
            };
            #[derive(Serialize)]
            struct Config {
                channel: ChannelSpecFile,
                split: Option<String>,
                tol: f64,
            }
            let report = Report {
                tool: "ske",
                version: env!("CARGO_PKG_VERSION"),
                command: "check-degraded",
                config: Config {
                    channel: spec,
                    split,
                    tol,
                },
                results,
                wall_time_ms: start.elapsed().as_millis(),
            };
            emit(&report, None)
        }
        Command::Simulate {
            fwd,
            bwd,
            nf,
            alpha,
            beta,
            epsilon,
            trials,
            seed,
            fresh_codebooks,
            out,
        } => {
            let (fwd_spec, fwd_ch) = read_channel(&fwd)?;
            let (bwd_spec, bwd_ch) = read_channel(&bwd)?;
            let two = TwoDmbc::new(fwd_ch, bwd_ch);
            let input_f = Distribution::uniform(two.forward.x_size());
            let scheme = AuxScheme::identity(
                &two.forward,
                &two.backward,
                Distribution::uniform(two.backward.x_size()),
            )?;
            let params = derive_parameters(&two, &scheme, &input_f, nf, alpha, beta, epsilon)?;
            let policy = if fresh_codebooks {
                CodebookPolicy::Fresh
            } else {
                CodebookPolicy::Fixed
            };
            let estimate =
                estimate_security(&two, &scheme, &input_f, &params, trials, seed, policy)?;

            #[derive(Serialize)]
            struct Config {
                forward: ChannelSpecFile,
                backward: ChannelSpecFile,
                nf: usize,
                alpha: f64,
                beta: f64,
                epsilon: f64,
                trials: usize,
                seed: u64,
                fresh_codebooks: bool,
            }
            let report = Report {
                tool: "ske",
                version: env!("CARGO_PKG_VERSION"),
                command: "simulate",
                config: Config {
                    forward: fwd_spec,
                    backward: bwd_spec,
                    nf,
                    alpha,
                    beta,
                    epsilon,
                    trials,
                    seed,
                    fresh_codebooks,
                },
                results: serde_json::json!({
                    "parameters": params,
                    "estimate": estimate,
                }),
                wall_time_ms: start.elapsed().as_millis(),
            };
            emit(&report, out.as_deref())
        }
        Command::VerifyAep {
            joint_u,
            joint_t,
            n,
            d,
            epsilon,
            trials,
            seed,
        } => {
            let read = |path: &Path| -> Result<JointSpecFile, CliError> {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| input(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
            };
            let u_spec = read(&joint_u)?;
            let t_spec = read(&joint_t)?;
            let ju = u_spec.to_joint(["u", "u_prime"])?;
            let jt = t_spec.to_joint(["t", "t_prime"])?;
            let params = TypicalityParams::new(epsilon, n, d)?;
            let aep = verify_joint_aep(&ju, &jt, &params, trials, seed)?;

            #[derive(Serialize)]
            struct Config {
                joint_u: JointSpecFile,
                joint_t: JointSpecFile,
                n: usize,
                d: usize,
                epsilon: f64,
                trials: usize,
                seed: u64,
            }
            let report = Report {
                tool: "ske",
                version: env!("CARGO_PKG_VERSION"),
                command: "verify-aep",
                config: Config {
                    joint_u: u_spec,
                    joint_t: t_spec,
                    n,
                    d,
                    epsilon,
                    trials,
                    seed,
                },
                results: aep,
                wall_time_ms: start.elapsed().as_millis(),
            };
            emit(&report, None)
        }
    }
}
