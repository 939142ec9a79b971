use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use factor_alloc::alloc::{balance, serialize_allocation, verify_balance, BalanceCase};
use factor_alloc::factor::{extract_with, ExtractConfig};
use factor_alloc::genlab::{parse_manifest, Scenario};
use factor_alloc::harness::{histogram_svg, run_campaign, Campaign, CampaignOptions, Pipeline, VerificationReport};
use factor_alloc::io::{fmt_f64, read_measure, serialize_measure, serialize_points, write_atomic};
use factor_alloc::symmetry::{default_tolerance, shell_index, symmetry_group};
use factor_alloc::Error;

const SHIPPED_MANIFEST: &str = include_str!("../../data/corpus.manifest");
const CORPUS_ENV: &str = "FACTORLAB_CORPUS";

#[derive(Parser)]
#[command(name = "factorlab", version, about = "Factor point processes and balancing allocations on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario measure, or every scenario of a manifest.
    Gen(GenArgs),
    /// Print the translation-symmetry group of a measure as CSV.
    Sym(SymArgs),
    /// Extract the factor point pattern of a measure.
    Pp(PpArgs),
    /// Balance a diffuse measure onto another and certify the result.
    Alloc(AllocArgs),
    /// Run a verification campaign over a corpus.
    Verify(VerifyArgs),
    /// Summarize a report CSV, optionally as an SVG histogram.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// poisson, diffuse, mixed, invariant or lattice.
    #[arg(long, required_unless_present = "manifest")]
    kind: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long = "L", default_value_t = 16.0)]
    side: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Generator parameters as key=value, e.g. intensity=0.08 or gens=16,0;0,16.
    #[arg(long = "param")]
    params: Vec<String>,
    /// Rescale the generated measure to this total mass.
    #[arg(long)]
    total: Option<f64>,
    /// Write every scenario of this manifest into the `--out` directory.
    #[arg(long, conflicts_with = "kind")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SymArgs {
    input: PathBuf,
    /// Absolute per-cell tolerance; defaults to a tiny fraction of the mean cell mass.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PpArgs {
    input: PathBuf,
    #[arg(long = "m-max", default_value_t = 64)]
    m_max: u32,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a per-stage trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct AllocArgs {
    phi: PathBuf,
    psi: PathBuf,
    /// Largest accepted relative residual per target.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-target residual CSV.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "equivariance")]
    campaign: String,
    #[arg(long, default_value = "pp")]
    pipeline: String,
    #[arg(long, default_value_t = 20)]
    shifts: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long = "m-max", default_value_t = 64)]
    m_max: u32,
    #[arg(long)]
    tol: Option<f64>,
    /// Scenario manifest; falls back to $FACTORLAB_CORPUS, then the shipped corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram of the recorded values.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
    /// Restrict the histogram to one check id.
    #[arg(long)]
    check: Option<String>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

enum Failure {
    Verification(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidGeometry(_)
            | Error::InvalidMeasure(_)
            | Error::DimensionMismatch { .. }
            | Error::BadLattice(_) => Failure::Input(e.to_string()),
            other => Failure::Verification(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => Ok(write_atomic(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn gen(a: GenArgs) -> Outcome {
    if let Some(manifest) = &a.manifest {
        let dir = a.out.as_deref().ok_or_else(|| Failure::Input("--manifest needs an --out directory".into()))?;
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        for sc in parse_manifest(&read_text(manifest)?)? {
            write_atomic(&dir.join(format!("{}.measure", sc.seed)), &serialize_measure(&sc.generate()?))?;
        }
        return Ok(());
    }
    let kind = a.kind.as_deref().unwrap_or_default();
    let line = format!("{} {kind} {} {} {} {}", a.seed, a.d, a.side, a.n, a.params.join(" "));
    let sc = Scenario::parse(&line)?;
    let mut mu = sc.generate()?;
    if let Some(total) = a.total {
        if mu.total_mass() > 0.0 {
            mu = mu.scaled(total / mu.total_mass())?;
        }
    }
    emit(a.out.as_deref(), &serialize_measure(&mu))
}

fn sym(a: SymArgs) -> Outcome {
    let mu = read_measure(&a.input)?;
    let tol = a.tol.unwrap_or_else(|| default_tolerance(&mu));
    let group = symmetry_group(&mu, tol);
    let mut s = String::from("quantity,value\n");
    s += &format!("order,{}\n", group.order());
    s += &format!("invariant_dim,{}\n", group.invariant_dim());
    s += &format!("gap,{}\n", fmt_f64(group.gap()));
    match shell_index(&group) {
        Ok(shell) => s += &format!("shell_index,{}\n", shell.index),
        Err(_) => s += "shell_index,none\n",
    }
    s += &format!("tolerance,{}\n", fmt_f64(tol));
    for g in group.generators() {
        let v: Vec<String> = g.iter().map(|x| x.to_string()).collect();
        s += &format!("generator,{}\n", v.join(" "));
    }
    emit(a.out.as_deref(), &s)
}

fn pp(a: PpArgs) -> Outcome {
    let mu = read_measure(&a.input)?;
    let config = ExtractConfig { m_max: a.m_max, tolerance: a.tol, ..ExtractConfig::default() };
    let trace = extract_with(&mu, &config)?;
    if let Some(path) = &a.trace {
        let mut s = String::new();
        s += &format!("shell {} [{}, {}]\n", trace.shell.index, fmt_f64(trace.shell.inner), fmt_f64(trace.shell.outer));
        s += &format!("epsilon 1/{} radius {}\n", trace.m, fmt_f64(trace.radius));
        s += &format!("quantizer resolution={} step={}\n", trace.quantizer.resolution, fmt_f64(trace.quantizer.step));
        s += &format!("anchor {:?}\n", trace.anchor);
        s += &format!("occupancy {} clusters {} retries {}\n", trace.occupancy.len(), trace.clusters.len(), trace.retries);
        write_atomic(path, &s)?;
    }
    emit(a.out.as_deref(), &serialize_points(&trace.representatives))
}

fn alloc(a: AllocArgs) -> Outcome {
    let phi = read_measure(&a.phi)?;
    let psi = read_measure(&a.psi)?;
    let result = balance(&phi, &psi)?;
    let report = verify_balance(&result.map, &phi, &psi)?;
    if let Some(path) = &a.certificate {
        write_atomic(path, &report.certificate_csv())?;
    }
    emit(a.out.as_deref(), &serialize_allocation(&result.map))?;
    let case = match &result.case {
        BalanceCase::Uniform => "uniform".to_string(),
        BalanceCase::Auxiliary { points } => format!("auxiliary ({} points)", points.len()),
        BalanceCase::Projected { chart, .. } => format!("projected (chart rank {})", chart.rank()),
    };
    eprintln!(
        "case {case}; max relative residual {:e}; sources exact {}; monge defect {}",
        report.max_relative,
        report.sources_exact,
        fmt_f64(result.map.monge_defect())
    );
    if report.passes(a.tol) {
        Ok(())
    } else {
        Err(Failure::Verification(format!("residual {:e} exceeds {:e}", report.max_relative, a.tol)))
    }
}

fn corpus_text(explicit: Option<&Path>) -> Result<String, Failure> {
    if let Some(p) = explicit {
        return read_text(p);
    }
    match std::env::var_os(CORPUS_ENV) {
        Some(v) => {
            let p = PathBuf::from(v);
            let file = if p.is_dir() { p.join("corpus.manifest") } else { p };
            read_text(&file)
        }
        None => Ok(SHIPPED_MANIFEST.to_string()),
    }
}

fn finish(report: &VerificationReport, svg: Option<&Path>, check: Option<&str>, bins: usize) -> Outcome {
    eprint!("{}", report.summary());
    if let Some(path) = svg {
        let values: Vec<f64> =
            report.records().iter().filter(|r| check.is_none_or(|c| r.check == c)).map(|r| r.value).collect();
        let title = format!("{} {}", report.campaign, check.unwrap_or("all checks"));
        write_atomic(path, &histogram_svg(&title, &values, bins))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} of {} checks failed", report.failed(), report.records().len())))
    }
}

fn verify(a: VerifyArgs) -> Outcome {
    let campaign: Campaign = a.campaign.parse().map_err(|e: Error| Failure::Input(e.to_string()))?;
    let pipeline: Pipeline = a.pipeline.parse().map_err(|e: Error| Failure::Input(e.to_string()))?;
    let corpus = parse_manifest(&corpus_text(a.manifest.as_deref())?)?;
    let opts = CampaignOptions { shifts: a.shifts, jobs: a.jobs, pipeline, m_max: a.m_max, tolerance: a.tol };
    let report = run_campaign(campaign, &corpus, &opts)?;
    emit(a.out.as_deref(), &report.to_csv())?;
    finish(&report, a.svg.as_deref(), None, 20)
}

fn report(a: ReportArgs) -> Outcome {
    let report = VerificationReport::parse_csv(&read_text(&a.input)?)?;
    finish(&report, a.svg.as_deref(), a.check.as_deref(), a.bins)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Sym(a) => sym(a),
        Command::Pp(a) => pp(a),
        Command::Alloc(a) => alloc(a),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("factorlab: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("factorlab: {msg}");
            ExitCode::from(2)
        }
    }
}
