use clap::{ArgGroup, Args, Parser, Subcommand};
use halfint::experiments::{self, parse_config, render, OutputFormat, RunConfig};
use halfint::record::ExperimentRecord;
use halfint::{cache, kohnen, lfunc, moments, qseries, que, rankin, testfn, Error};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "halfint",
    version,
    about = "Half-integral weight forms, character sums and L-value experiments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat key=value config file (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// L-value precision target.
    #[arg(long, global = true)]
    prec: Option<f64>,
    /// Truncation order.
    #[arg(long = "N", global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Cache directory (default: $HALFINT_CACHE, then ./cache).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Output file; a directory for `all`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quick: bool,
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Character-sum grid against the closed form, or the Gauss/Ramanujan identity.
    CharsumVerify {
        #[arg(long, default_value = "default", value_parser = ["default", "quick"])]
        grid: String,
        #[arg(long = "X")]
        x: Option<f64>,
        #[arg(long)]
        identity: bool,
    },
    /// Dirichlet-polynomial moments.
    Moments {
        #[arg(long, default_value = "acceptance", value_parser = ["acceptance", "shifted"])]
        kind: String,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long = "X", default_value_t = 1e4)]
        x: f64,
        #[arg(long, default_value_t = 4, allow_negative_numbers = true)]
        ell: i64,
        #[arg(long, default_value_t = 1)]
        a: i64,
        #[arg(long, default_value_t = 1)]
        b: i64,
        /// Primes up to this bound enter the polynomial.
        #[arg(long, default_value_t = 30.0)]
        primes: f64,
    },
    /// Plus-space construction.
    Forms {
        #[command(subcommand)]
        action: FormsAction,
    },
    /// First or shifted moment of twisted central values of Δ.
    #[command(group(ArgGroup::new("which").required(true).args(["first", "shifted"])))]
    Lmoment {
        #[arg(long)]
        first: bool,
        #[arg(long)]
        shifted: bool,
        #[arg(long = "X", default_value_t = 1000.0)]
        x: f64,
        #[arg(long, default_value_t = 4, allow_negative_numbers = true)]
        ell: i64,
        #[arg(long, default_value_t = 1)]
        a: i64,
        #[arg(long, default_value_t = 1)]
        b: i64,
    },
    /// Coefficient/L-value ratio constancy.
    Waldspurger {
        #[arg(long, default_value_t = 6)]
        k: u32,
        #[arg(long, default_value_t = 50)]
        dmax: i64,
    },
    /// Rankin-Selberg checks.
    #[command(group(ArgGroup::new("check").required(true).args(["fe", "residue", "summation", "extend", "convexity"])))]
    Rankin {
        #[arg(long)]
        fe: bool,
        #[arg(long)]
        residue: bool,
        #[arg(long)]
        summation: bool,
        #[arg(long)]
        extend: bool,
        #[arg(long)]
        convexity: bool,
        #[arg(long, default_value_t = 6)]
        k: u32,
        #[arg(long = "Ymax", default_value_t = 32.0)]
        ymax: f64,
        #[arg(long = "Y", default_value_t = 2.0)]
        y: f64,
    },
    /// Mass equidistribution and zeros.
    Que {
        #[command(subcommand)]
        action: QueAction,
    },
    /// Every acceptance experiment; records go to the --out directory.
    All,
    /// Validate cache files and delete corrupt ones.
    CacheGc,
}

#[derive(Subcommand)]
enum FormsAction {
    Build {
        #[arg(long, default_value_t = 6)]
        k: u32,
    },
}

#[derive(Subcommand)]
enum QueAction {
    Mass {
        #[arg(long, default_value_t = 6)]
        k: u32,
        /// x0,x1,y0,y1
        #[arg(long, default_value = "0,0.5,0.5,1.5")]
        domain: String,
    },
    Zeros {
        #[arg(long, default_value_t = 6)]
        k: u32,
        /// x0,x1,y0,y1
        #[arg(long, default_value = "-0.5,0.5,0.2,2")]
        region: String,
    },
    Report {
        #[arg(long, value_delimiter = ',', default_value = "6,8,10,12,14")]
        weights: Vec<u32>,
    },
}

/// Exit status 2 for usage-type errors, 1 otherwise.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::InvalidArgument(_)) {
            2
        } else {
            1
        };
        Failure(code, e.to_string())
    }
}

fn config(g: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    cfg.cache_dir = Some(
        std::env::var_os("HALFINT_CACHE")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("cache")),
    );
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure(2, format!("config {}: {e}", path.display())))?;
        cfg.apply(&parse_config(&text)?)?;
    }
    if g.prec.is_some() {
        cfg.prec = g.prec;
    }
    if g.order.is_some() {
        cfg.order = g.order;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(d) = &g.cache_dir {
        cfg.cache_dir = Some(d.clone());
    }
    if let Some(f) = &g.format {
        cfg.format = Some(f.parse()?);
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.quick |= g.quick;
    if g.no_timestamp {
        cfg.timestamp = false;
    }
    Ok(cfg)
}

fn format_for(cfg: &RunConfig, out: Option<&Path>) -> OutputFormat {
    cfg.format
        .unwrap_or_else(|| match out.and_then(|p| p.extension()) {
            Some(e) if e == "csv" => OutputFormat::Csv,
            _ => OutputFormat::Json,
        })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure(1, e.to_string()))?;
    }
    std::fs::write(path, text).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn emit(
    mut rec: ExperimentRecord,
    cfg: &RunConfig,
    out: Option<&Path>,
) -> Result<Vec<ExperimentRecord>, Failure> {
    if cfg.timestamp {
        rec.stamp();
    }
    let text = render(&rec, format_for(cfg, out))?;
    match out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(vec![rec])
}

fn forms_build(cfg: &RunConfig, k: u32) -> halfint::Result<ExperimentRecord> {
    let order = cfg.order.unwrap_or(512);
    let basis = kohnen::plus_cusp_space(k, order)?;
    let eigen = kohnen::plus_eigenforms(k, order)?;
    let expected = qseries::dim_cusp_forms(2 * k);
    let mut rec = ExperimentRecord::new("forms-build")
        .param("k", k)
        .param("N", order);
    rec.result("dimension", basis.len() as f64);
    rec.oracle("dimension", expected as f64);
    for (i, g) in eigen.iter().enumerate() {
        for p in [3u64, 5, 7] {
            if let Some(l) = g.lambda_numeric(p) {
                rec.result(&format!("lambda{i}_p{p}"), l);
            }
        }
    }
    rec.check(
        "dimension",
        basis.len() == expected,
        format!("{} vs {expected}", basis.len()),
    );
    if let Some(dir) = &cfg.cache_dir {
        let kohnen_text = kohnen::plus_space_to_text(k, &basis, &eigen);
        let level1: String = qseries::cusp_basis(2 * k, order)?
            .iter()
            .map(qseries::qexp_to_text)
            .collect();
        let files = [
            (
                dir.join(format!("kohnen/k{k}-N{order}.txt")),
                kohnen_text,
                "KOHNEN v1",
            ),
            (
                dir.join(format!("qexp/level1-w{}-N{order}.txt", 2 * k)),
                level1,
                "QEXP v1",
            ),
        ];
        for (path, text, header) in files {
            match cache::read_sealed(&path, header) {
                Ok(Some(old)) if old == text => rec.cache_hits += 1,
                _ => cache::write_sealed(&path, &text)?,
            }
        }
    }
    Ok(rec)
}

fn moments_shifted(
    k: u32,
    primes: f64,
    big_x: f64,
    a: i64,
    b: i64,
    ell: i64,
) -> halfint::Result<ExperimentRecord> {
    let c = moments::PrimeCoefficients::delta_eigenvalues(primes)?;
    let mut rec = ExperimentRecord::new("moments-shifted")
        .param("k", k)
        .param("x", primes)
        .param("X", big_x)
        .param("a", a)
        .param("b", b)
        .param("ell", ell);
    let mut table = halfint::record::Table::new(&["j", "value", "ratio"]);
    for j in 1..=k {
        let v = moments::shifted_moment_bruteforce(&c, j, primes, big_x, a, b, ell)?;
        let p = moments::bound_probe(
            v,
            j,
            moments::MomentStats::new(&c, primes, ell),
            big_x,
            a,
            b,
        )?;
        table.push(vec![j as f64, v, p.ratio]);
        if j == k {
            rec.result("value", v);
            rec.result("ratio", p.ratio);
        }
        rec.check(
            "ratio",
            p.ratio <= 10.0,
            format!("j = {j}: ratio {}", p.ratio),
        );
    }
    rec.table = Some(table);
    Ok(rec)
}

fn run_all(cfg: &RunConfig, dir: &Path) -> Result<Vec<ExperimentRecord>, Failure> {
    let format = format_for(cfg, None);
    let ext = if format == OutputFormat::Csv {
        "csv"
    } else {
        "json"
    };
    let criteria = experiments::run_suite(cfg, |c| {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        eprintln!("criterion {:>2} {:<26} {status}", c.number, c.title);
    })?;
    let mut summary = Vec::new();
    let mut all = Vec::new();
    for c in &criteria {
        for r in &c.records {
            write_text(&dir.join(format!("{}.{ext}", r.id)), &render(r, format)?)?;
        }
        summary.push(json!({
            "criterion": c.number,
            "title": c.title,
            "passed": c.passed(),
            "failures": c.failures(),
        }));
        all.extend(c.records.iter().cloned());
    }
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure(1, e.to_string()))?;
    write_text(&dir.join("summary.json"), &(text + "\n"))?;
    Ok(all)
}

fn run(cli: Cli) -> Result<Vec<ExperimentRecord>, Failure> {
    let cfg = config(&cli.global)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| Failure(1, e.to_string()))?;
    }
    let out = cli.global.out.as_deref();
    let lcache = cfg.cache_dir.as_deref().map(lfunc::LValueCache::new);
    match cli.command {
        Command::CharsumVerify { grid, x, identity } => {
            let rec = if identity {
                experiments::gauss_identity()?
            } else {
                let c = RunConfig {
                    quick: cfg.quick || grid == "quick",
                    ..cfg.clone()
                };
                experiments::charsum_grid(&c, x)?
            };
            emit(rec, &cfg, out)
        }
        Command::Moments {
            kind,
            k,
            x,
            ell,
            a,
            b,
            primes,
        } => {
            let rec = if kind == "shifted" {
                moments_shifted(k, primes, x, a, b, ell)?
            } else {
                experiments::moments_grid(&cfg)?
            };
            emit(rec, &cfg, out)
        }
        Command::Forms {
            action: FormsAction::Build { k },
        } => emit(forms_build(&cfg, k)?, &cfg, out),
        Command::Lmoment {
            first,
            x,
            ell,
            a,
            b,
            ..
        } => {
            let eps = cfg.prec.unwrap_or(lfunc::MOMENT_EPS);
            let c = experiments::delta_for((2.0 * x) as i64, eps)?;
            let rec = if first {
                let sym2 = lfunc::sym2_value(&c)?.value;
                lfunc::first_moment_experiment(&c, x, sym2, eps, lcache.as_ref())?
            } else {
                lfunc::shifted_moment_experiment(&c, x, a, b, ell, eps, lcache.as_ref())?
            };
            emit(rec, &cfg, out)
        }
        Command::Waldspurger { k, dmax } => {
            let count = lfunc::admissible_discriminants(k, dmax).len();
            if count == 0 {
                return Err(Failure(2, format!("no admissible d with |d| ≤ {dmax}")));
            }
            emit(experiments::waldspurger(&cfg, k, count)?, &cfg, out)
        }
        Command::Rankin {
            fe,
            residue,
            summation,
            extend,
            k,
            ymax,
            y,
            ..
        } => {
            let r = experiments::rankin_series(&cfg, k)?;
            let rec = if fe {
                rankin::functional_equation_experiment(&r)?
            } else if residue {
                rankin::residue_experiment(&r)?
            } else if summation {
                rankin::summation_experiment(&r, &testfn::BumpWeight::canonical(), ymax)?
            } else if extend {
                let (h, j) = rankin::default_extension_weights();
                rankin::extension_experiment(&r, &h, &j, y)?
            } else {
                let taus: Vec<f64> = (0..=8).map(|i| 2.5 * i as f64).collect();
                rankin::convexity_experiment(&r, &taus, None)?
            };
            emit(rec, &cfg, out)
        }
        Command::Que { action } => {
            let rec = match action {
                QueAction::Mass { k, domain } => experiments::que_mass(k, &domain)?,
                QueAction::Zeros { k, region } => {
                    que::zeros_record(k, &que::Rect::parse(&region)?, 200)?
                }
                QueAction::Report { weights } => {
                    que::equidistribution_report(&weights, &que::default_grid(), 200)?
                }
            };
            emit(rec, &cfg, out)
        }
        Command::All => run_all(&cfg, out.unwrap_or(Path::new("results"))),
        Command::CacheGc => {
            let dir = cfg
                .cache_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("cache"));
            let report = cache::gc(&dir)?;
            let text =
                serde_json::to_string_pretty(&report).map_err(|e| Failure(1, e.to_string()))?;
            println!("{text}");
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(records) => {
            let failed: Vec<_> = records
                .iter()
                .filter(|r| !r.passed())
                .map(|r| json!({ "id": r.id, "failures": r.failures }))
                .collect();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", json!({ "failures": failed }));
                ExitCode::from(1)
            }
        }
        Err(Failure(code, msg)) => {
            eprintln!("{}", json!({ "error": msg }));
            ExitCode::from(code)
        }
    }
}
