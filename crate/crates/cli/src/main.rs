use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde_json::{json, Value};

use normsieve::harness::{run_experiment, ExperimentReport};
use normsieve::localdensity::{beta_p, field_from_value, singular_series, LinearSystem, LocalForm, PreparedSystem};
use normsieve::nilsequence::{equidistribution_certificate, DiscrepancyConfig, PolySequence};
use normsieve::numberfield::{format_rational, FieldSpec, NumberField};
use normsieve::repfn::{count_r, squarefree_outside_s, FundamentalDomainQuad, RepCache};
use normsieve::wtrick::build_w_with;
use normsieve::{Error, Result};

#[derive(Parser)]
#[command(name = "normsieve", version, about = "Norm forms, local densities and desk-scale experiments")]
struct Cli {
    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Representation numbers.
    Repfn {
        #[command(subcommand)]
        cmd: RepfnCmd,
    },
    /// Local densities and local factors.
    Density {
        #[command(subcommand)]
        cmd: DensityCmd,
    },
    /// W-trick contexts.
    Wtrick {
        #[command(subcommand)]
        cmd: WtrickCmd,
    },
    /// Equidistribution of polynomial sequences.
    Nil {
        #[command(subcommand)]
        cmd: NilCmd,
    },
    /// Counting, mean-value and major-arc experiments.
    Verify {
        which: VerifyKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Correlation of the W-tricked representation function with a nilsequence.
    Correlate(RunArgs),
    /// Certified search for weak approximation.
    WaSearch(RunArgs),
    /// Table of local factors and their decay.
    BetaDecay(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Nb,
    MeanValue,
    MajorArc,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall time in the report (makes reports non-reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum RepfnCmd {
    /// `R(m)` and, with `--squarefree-outside`, `R*_S(m)`.
    Eval {
        /// Field file or preset name.
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, value_delimiter = ',')]
        squarefree_outside: Option<Vec<u64>>,
        /// Persistent cache of `field_id m R` lines.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DensityCmd {
    /// `ρ(q, A)` for the norm form of a field.
    Rho {
        #[arg(long)]
        form: String,
        #[arg(long)]
        q: u64,
        #[arg(long, allow_hyphen_values = true)]
        a: i64,
    },
    /// Exact `β_p` for a system.
    BetaP {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        p: u64,
    },
    /// Local factors up to a cutoff, with the tail bracket.
    Series {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 100)]
        cutoff: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum WtrickCmd {
    Build {
        #[arg(long = "T")]
        t: u64,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<u64>,
        #[arg(long)]
        field: String,
        /// Raise `w` above `log log T`.
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum NilCmd {
    /// Equidistribution certificate for a sequence.
    Cert {
        #[arg(long)]
        seq: PathBuf,
        /// Box lengths, one per parameter.
        #[arg(long = "N", value_delimiter = ',')]
        n: Vec<u64>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        bound: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_field(arg: &str) -> Result<FieldSpec> {
    let path = Path::new(arg);
    if path.exists() {
        FieldSpec::load(path)
    } else {
        field_from_value(&Value::String(arg.to_string()))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

fn repfn(cmd: RepfnCmd) -> Result<()> {
    let RepfnCmd::Eval { field, m, squarefree_outside, cache } = cmd;
    let k = NumberField::new(read_field(&field)?)?;
    let dom = FundamentalDomainQuad::new(&k)?;
    let mut out = json!({ "field_id": dom.field_id, "m": m });
    let r = match &cache {
        Some(path) => {
            let c = RepCache::open(path, &dom.field_id);
            let r = c.get_r(m, &dom)?;
            c.flush()?;
            r
        }
        None => count_r(m, &dom)?,
    };
    out["R"] = json!(r);
    if let Some(s) = squarefree_outside {
        let sf = m != 0 && squarefree_outside_s(m, &s)?;
        out["S"] = json!(s);
        out["R_star"] = json!(if sf { r } else { 0 });
    }
    println!("{out}");
    Ok(())
}

fn density(cmd: DensityCmd) -> Result<()> {
    match cmd {
        DensityCmd::Rho { form, q, a } => {
            let lf = LocalForm::from_spec(read_field(&form)?)?;
            let rho = lf.rho(q, a as i128)?;
            let out = json!({ "q": q, "A": a, "rho": rho.to_string(), "normalized": format_rational(&lf.normalized(q, a as i128)?) });
            println!("{out}");
        }
        DensityCmd::BetaP { system, p } => {
            let prep = PreparedSystem::new(LinearSystem::load(&system)?)?;
            let f = beta_p(p, &prep)?;
            let out = json!({
                "p": p,
                "beta_p": format_rational(&f.value),
                "prefactor": format_rational(&f.prefactor),
                "stabilized_at": f.stabilized_at,
                "divides_q": f.divides_q,
            });
            println!("{out}");
        }
        DensityCmd::Series { system, cutoff, out } => {
            let prep = PreparedSystem::new(LinearSystem::load(&system)?)?;
            let series = singular_series(&prep, cutoff)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
            w.write_record(["p", "beta_p_num", "beta_p_den", "abs_gap_to_1"]).map_err(csv_err)?;
            for f in &series.factors {
                let gap = (&f.value - BigRational::one()).abs().to_f64().unwrap_or(f64::INFINITY);
                w.write_record([f.p.to_string(), f.value.numer().to_string(), f.value.denom().to_string(), gap.to_string()])
                    .map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
            let text = String::from_utf8(bytes).expect("utf-8");
            match out {
                Some(p) => {
                    fs::write(&p, &text)?;
                    let (lo, hi) = series.bracket();
                    println!(
                        "{}",
                        json!({ "partial_product": series.partial_product, "bracket": [lo, hi], "c_hat": series.c_hat, "positive_from": series.positive_from })
                    );
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn wtrick(cmd: WtrickCmd) -> Result<()> {
    let WtrickCmd::Build { t, s, field, w, out } = cmd;
    let spec = read_field(&field)?;
    let lf = LocalForm::from_spec(spec.clone())?;
    let ctx = build_w_with(t, w)?.with_residues(&s, &lf, Some(spec.field_id()))?;
    for warn in &ctx.warnings {
        eprintln!("warning: {warn}");
    }
    emit(out.as_deref(), &ctx.to_json())
}

fn nil(cmd: NilCmd) -> Result<()> {
    let NilCmd::Cert { seq, n, delta, bound, seed, out } = cmd;
    let seq = PolySequence::from_json(&fs::read_to_string(seq)?)?;
    if n.len() != seq.params {
        return Err(Error::LengthMismatch { expected: seq.params, got: n.len() });
    }
    let cfg = DiscrepancyConfig { seed, ..Default::default() };
    let cert = equidistribution_certificate(&seq, &n, delta, bound, &cfg)?;
    emit(out.as_deref(), &serde_json::to_string_pretty(&cert)?)
}

fn experiment(kind: &str, args: RunArgs) -> Result<()> {
    let config: Value = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    let start = Instant::now();
    let mut report: ExperimentReport = run_experiment(kind, config, args.seed)?;
    if args.timing {
        report.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    if let Some(p) = &args.csv {
        fs::write(p, report.to_csv()?)?;
    }
    emit(args.out.as_deref(), &report.to_json())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Repfn { cmd } => repfn(cmd),
        Command::Density { cmd } => density(cmd),
        Command::Wtrick { cmd } => wtrick(cmd),
        Command::Nil { cmd } => nil(cmd),
        Command::Verify { which, run } => {
            let kind = match which {
                VerifyKind::Nb => "nb",
                VerifyKind::MeanValue => "mean-value",
                VerifyKind::MajorArc => "major-arc",
            };
            experiment(kind, run)
        }
        Command::Correlate(run) => experiment("correlate", run),
        Command::WaSearch(run) => experiment("wa-search", run),
        Command::BetaDecay(run) => experiment("beta-decay", run),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
