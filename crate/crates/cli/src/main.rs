use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ambi_core::diagnostics::{qq_from_values, qq_normalized_af, risk_ratios, variance_reduction_probe};
use ambi_core::io::{complex_matrix, fmt_num, kv_line, parse_kv, parse_signal, real_matrix, write_signal};
use ambi_core::{analyze, Correction, Error as CoreError, PipelineOptions, Preset, TimeKernel, TimeSeries};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(CoreError::NonConvergence { .. }) => 3,
            CliError::Core(CoreError::State(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ambi", version, about = "Empirical Bayes ambiguity-domain estimation of nonstationary covariance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated signal from a preset.
    Simulate(SimulateArgs),
    /// Run the full pipeline on a signal file or a preset.
    Analyze(AnalyzeArgs),
    /// Monte Carlo risk of the shrinkage covariance against the raw estimate.
    Riskbench(RiskbenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    preset: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Signal file, or a preset name to simulate.
    input: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// none, shift or clip.
    #[arg(long)]
    correction: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// delta, hann:<len>, gaussian:<len> or hermite:<len>:<order>.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    outdir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Length when the input is a preset.
    #[arg(long)]
    n: Option<usize>,
    /// File of key=value lines using the flag names; flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RiskbenchArgs {
    preset: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct PipelineConfig {
    input: String,
    dt: Option<f64>,
    delta: f64,
    correction: Correction,
    alpha: f64,
    kernel: TimeKernel,
    outdir: PathBuf,
    seed: u64,
    n: Option<usize>,
}

const CONFIG_KEYS: [&str; 9] = ["input", "dt", "delta", "correction", "alpha", "kernel", "outdir", "seed", "n"];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("bad value for {key}: '{v}'")))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn preset(name: &str) -> Result<Preset> {
    name.parse()
        .map_err(|_| CliError::Usage(format!("unknown preset '{name}'")))
}

impl PipelineConfig {
    fn resolve(a: AnalyzeArgs) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(p) = &a.config {
            for (k, v) in parse_kv(&read(p)?) {
                if !CONFIG_KEYS.contains(&k.as_str()) {
                    return Err(CliError::Usage(format!("{}: unknown key '{k}'", p.display())));
                }
                file.insert(k, v);
            }
        }
        let get = |key: &str| file.get(key).map(String::as_str);
        let pick = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            match (flag, get(key)) {
                (Some(v), _) => Ok(Some(v)),
                (None, Some(v)) => parse_value(key, v).map(Some),
                (None, None) => Ok(None),
            }
        };
        let input = a
            .input
            .or_else(|| get("input").map(String::from))
            .ok_or_else(|| CliError::Usage("no input given".into()))?;
        let dt = pick(a.dt, "dt")?;
        let delta = pick(a.delta, "delta")?.unwrap_or(0.5);
        let alpha = pick(a.alpha, "alpha")?.unwrap_or(0.5);
        let correction = match a.correction.as_deref().or(get("correction")) {
            Some(s) => s.parse().map_err(|_| CliError::Usage(format!("unknown correction '{s}'")))?,
            None => Correction::Clip,
        };
        let kernel = match a.kernel.as_deref().or(get("kernel")) {
            Some(s) => s.parse().map_err(|e: CoreError| CliError::Usage(e.to_string()))?,
            None => TimeKernel::Delta,
        };
        let outdir = a
            .outdir
            .or_else(|| get("outdir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = match (a.seed, get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_value("seed", v)?,
            (None, None) => 0,
        };
        let n = match (a.n, get("n")) {
            (Some(n), _) => Some(n),
            (None, Some(v)) => Some(parse_value("n", v)?),
            (None, None) => None,
        };
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Usage(format!("dt must be positive, got {dt}")));
            }
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CliError::Usage(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(-0.5..=0.5).contains(&alpha) {
            return Err(CliError::Usage(format!("alpha must lie in [-1/2, 1/2], got {alpha}")));
        }
        Ok(Self {
            input,
            dt,
            delta,
            correction,
            alpha,
            kernel,
            outdir,
            seed,
            n,
        })
    }

    fn signal(&self) -> Result<TimeSeries> {
        let path = Path::new(&self.input);
        let x = if path.is_file() {
            parse_signal(&read(path)?, 1.0)?
        } else if let Ok(p) = self.input.parse::<Preset>() {
            p.generate(self.n.unwrap_or(p.default_n()), self.seed)?
        } else {
            return Err(CliError::Usage(format!(
                "input '{}' is neither a readable file nor a preset",
                self.input
            )));
        };
        match self.dt {
            Some(dt) => Ok(TimeSeries::new(x.samples().to_vec(), dt)?),
            None => Ok(x),
        }
    }

    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            delta: self.delta,
            correction: self.correction,
            alpha: self.alpha,
            kernel: self.kernel.clone(),
            ..PipelineOptions::default()
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let p = preset(&a.preset)?;
    let x = p.generate(a.n.unwrap_or(p.default_n()), a.seed)?;
    let x = TimeSeries::new(x.samples().to_vec(), a.dt)?;
    emit(a.out.as_deref(), &write_signal(&x))
}

fn run_analyze(a: AnalyzeArgs) -> Result<()> {
    let cfg = PipelineConfig::resolve(a)?;
    let x = cfg.signal()?;
    let r = analyze(&x, &cfg.options())?;
    let s = &r.shrunk;
    let psi = s.fit.params;
    std::fs::create_dir_all(&cfg.outdir).map_err(|source| CliError::Io {
        path: cfg.outdir.clone(),
        source,
    })?;
    let out = |name: &str, text: String| write(&cfg.outdir.join(name), &text);

    out(
        "emaf.mat",
        complex_matrix(s.emaf.entries().clone(), vec![format!("emaf dt={}", fmt_num(x.dt()))]),
    )?;
    let psi_line = kv_line(&[
        ("vbar", fmt_num(psi.vbar)),
        ("rho", fmt_num(psi.rho)),
        ("sigma2", fmt_num(psi.sigma2)),
        ("nll", fmt_num(s.fit.nll)),
        ("iterations", s.fit.iterations.to_string()),
    ]);
    out("psi.txt", format!("{psi_line}\n"))?;
    let retained = s.threshold.retained_fraction();
    out(
        "theta.mat",
        real_matrix(s.threshold.theta.clone(), vec![format!("theta retained_fraction={}", fmt_num(retained))]),
    )?;
    out("af_eb.mat", complex_matrix(s.af_eb.entries().clone(), vec![]))?;
    out("moments_eb.mat", complex_matrix(s.moments_eb.entries().clone(), vec![]))?;
    out(
        "cov_eb.mat",
        complex_matrix(
            r.cov.to_array(),
            vec![format!(
                "correction={} mineig={}",
                r.cov.correction().name(),
                fmt_num(r.cov.min_eigenvalue())
            )],
        ),
    )?;
    out(
        "tfr.mat",
        complex_matrix(
            r.tfr.values.clone(),
            vec![format!("tfr alpha={} kernel={}", fmt_num(r.tfr.alpha), r.tfr.kernel)],
        ),
    )?;
    let (qre, qim) = if psi.vbar > 0.0 {
        qq_normalized_af(&s.normalized, psi.vbar)?
    } else {
        let origin = s.normalized.origin();
        let off: Vec<_> = s
            .normalized
            .entries()
            .indexed_iter()
            .filter(|(ix, _)| *ix != origin)
            .map(|(_, v)| *v)
            .collect();
        qq_from_values(&off)?
    };
    out("qq_re.txt", real_matrix(qre.to_array(), vec!["qq real theoretical,sample".into()]))?;
    out("qq_im.txt", real_matrix(qim.to_array(), vec!["qq imaginary theoretical,sample".into()]))?;

    let summary = [
        kv_line(&[
            ("vbar", fmt_num(psi.vbar)),
            ("rho", fmt_num(psi.rho)),
            ("sigma2", fmt_num(psi.sigma2)),
            ("converged", s.fit.converged.to_string()),
        ]),
        kv_line(&[
            ("mineig_before", fmt_num(r.cov_uncorrected.min_eigenvalue())),
            ("mineig_after", fmt_num(r.cov.min_eigenvalue())),
            ("correction", cfg.correction.name().to_string()),
        ]),
        kv_line(&[("retained_fraction", fmt_num(retained))]),
        kv_line(&[
            ("n", x.n().to_string()),
            ("dt", fmt_num(x.dt())),
            ("delta", fmt_num(cfg.delta)),
            ("alpha", fmt_num(cfg.alpha)),
            ("kernel", cfg.kernel.name()),
            ("seed", cfg.seed.to_string()),
        ]),
    ];
    out("summary.txt", summary.join("\n") + "\n")?;

    if !s.fit.converged {
        return Err(CliError::Core(CoreError::NonConvergence {
            iterations: s.fit.iterations,
            best: psi,
            nll: s.fit.nll,
        }));
    }
    Ok(())
}

fn riskbench(a: RiskbenchArgs) -> Result<()> {
    let p = preset(&a.preset)?;
    if a.reps == 0 {
        return Err(CliError::Usage("reps must be positive".into()));
    }
    let n = a.n.unwrap_or(p.default_n());
    let ratios = risk_ratios(p, n, a.reps, a.seed, &PipelineOptions::default())?;
    let probe_reps = a.reps.max(100);
    let (var_eb, var_raw) = variance_reduction_probe(n, probe_reps, a.seed)?;
    let mean = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len() as f64;

    let mut lines = vec![format!(
        "# riskbench preset={} n={n} reps={} seed={}",
        p.name(),
        a.reps,
        a.seed
    )];
    for (i, (seed, ratio)) in ratios.iter().enumerate() {
        lines.push(kv_line(&[
            ("rep", i.to_string()),
            ("seed", seed.to_string()),
            ("ratio", fmt_num(*ratio)),
        ]));
    }
    lines.push(kv_line(&[
        ("var_eb", fmt_num(var_eb)),
        ("var_raw", fmt_num(var_raw)),
        ("probe_reps", probe_reps.to_string()),
    ]));
    lines.push(kv_line(&[("mean_ratio", fmt_num(mean))]));
    emit(a.out.as_deref(), &(lines.join("\n") + "\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Riskbench(a) => riskbench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ambi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
