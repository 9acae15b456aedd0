//! `pgsim`: run transient simulations on SPICE-subset netlists and generate
//! synthetic power-grid meshes.

mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pgsim_core::netlist::parse_value;
use pgsim_core::{
    build_mna, generate_pdn_mesh, mexp_transient, oracle_transient, parse_netlist,
    trapezoidal_transient, Error, MeshDrive, MeshSpec, Method, MnaSystem, PwlWaveform, SimConfig,
    Tran, Waveform,
};

use report::RunReport;

#[derive(Debug, Parser)]
#[command(name = "pgsim", version, about = "Transient power-grid simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a netlist and write probe waveforms.
    Run(RunArgs),
    /// Write a random RC mesh netlist.
    Genmesh(GenmeshArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mexp,
    Tr,
    Oracle,
    /// All three, with a comparison report.
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Mexp => vec![Method::Mexp],
            MethodArg::Tr => vec![Method::Tr],
            MethodArg::Oracle => vec![Method::Oracle],
            MethodArg::All => vec![Method::Mexp, Method::Tr, Method::Oracle],
        }
    }
}

/// Accepts plain floats and engineering suffixes (`10p`, `1n`).
fn quantity(s: &str) -> Result<f64, String> {
    parse_value(s).ok_or_else(|| format!("not a number: '{s}'"))
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Netlist file.
    netlist: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Mexp)]
    method: MethodArg,
    /// Shift of the rational Krylov operator, seconds.
    #[arg(long, value_parser = quantity, default_value = "1e-10")]
    gamma: f64,
    /// Error budget accumulated over the whole run.
    #[arg(long, value_parser = quantity, default_value = "1e-4")]
    tol: f64,
    /// Stop time; overrides the netlist's .tran.
    #[arg(long, value_parser = quantity)]
    tmax: Option<f64>,
    /// Largest exponential step.
    #[arg(long, value_parser = quantity, default_value = "1e-9")]
    hmax: f64,
    /// Trapezoidal step; defaults to the .tran step.
    #[arg(long = "tr-h", value_parser = quantity)]
    tr_h: Option<f64>,
    /// Krylov dimension cap.
    #[arg(long, default_value_t = 30)]
    mmax: usize,
    /// Evaluate the error-estimate norm exactly (needs nonsingular C).
    #[arg(long)]
    exact_rho: bool,
    /// Waveform CSV; stdout for a single method when omitted. With
    /// `--method all` the method name is inserted before the extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run statistics JSON, named like `--out`.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Per-step diagnostics of the exponential run on stderr.
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct GenmeshArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Smallest node capacitance, farads.
    #[arg(long, value_parser = quantity)]
    cmin: Option<f64>,
    #[arg(long, value_parser = quantity)]
    cmax: Option<f64>,
    /// Smallest branch conductance, siemens.
    #[arg(long, value_parser = quantity)]
    gmin: Option<f64>,
    #[arg(long, value_parser = quantity)]
    gmax: Option<f64>,
    /// Drive through a Norton source with this resistance instead of an
    /// ideal voltage source.
    #[arg(long, value_parser = quantity)]
    norton: Option<f64>,
    /// Rise time of the 0 -> 1 V input step.
    #[arg(long, value_parser = quantity, default_value = "10p")]
    rise: f64,
    #[arg(long, value_parser = quantity, default_value = "10n")]
    tstop: f64,
    #[arg(long, value_parser = quantity, default_value = "10p")]
    tstep: f64,
    /// Netlist file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status classes.
#[derive(Debug)]
enum Failure {
    /// Bad arguments, unreadable or malformed input: exit 1.
    Input(String),
    /// The numerics gave up: exit 2.
    Numeric(String),
}

impl Failure {
    fn from_core(context: &str, e: Error) -> Self {
        let msg = format!("{context}: {e}");
        if e.is_input_error() {
            Failure::Input(msg)
        } else {
            Failure::Numeric(msg)
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::Input(format!("{}: {e}", path.display()))
    }

    fn message(&self) -> &str {
        let (Failure::Input(m) | Failure::Numeric(m)) = self;
        m
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Genmesh(a) => cmd_genmesh(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// `base.csv` -> `base.<tag>.csv`.
fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn config(args: &RunArgs, tran: Option<Tran>) -> Result<SimConfig, Failure> {
    let stop = args.tmax.or(tran.map(|t| t.stop)).ok_or_else(|| {
        Failure::Input("no stop time: add a .tran line or pass --tmax".to_string())
    })?;
    let mut cfg = SimConfig::from_tran(&Tran {
        stop,
        step: tran.and_then(|t| t.step),
    });
    cfg.gamma = args.gamma;
    cfg.e_tol = args.tol;
    cfg.h_max = args.hmax;
    cfg.m_max = args.mmax;
    cfg.exact_rho = args.exact_rho;
    if let Some(h) = args.tr_h {
        cfg.tr_h = h;
    }
    cfg.validate().map_err(|e| Failure::from_core("configuration", e))?;
    Ok(cfg)
}

fn simulate(sys: &MnaSystem, cfg: &SimConfig, method: Method) -> pgsim_core::Result<Waveform> {
    let mut cfg = cfg.clone();
    cfg.method = method;
    match method {
        Method::Mexp => mexp_transient(sys, &cfg),
        Method::Tr => trapezoidal_transient(sys, &cfg),
        Method::Oracle => oracle_transient(sys, &cfg),
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(|e| Failure::io(path, e))?);
    write(&mut f).and_then(|()| f.flush()).map_err(|e| Failure::io(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.netlist).map_err(|e| Failure::io(&args.netlist, e))?;
    let context = args.netlist.display().to_string();
    let netlist = parse_netlist(&text).map_err(|e| Failure::from_core(&context, e))?;
    let sys = build_mna(&netlist).map_err(|e| Failure::from_core(&context, e))?;
    let cfg = config(args, netlist.tran)?;
    let methods = args.method.methods();
    let all = methods.len() > 1;

    let results: Vec<(Method, pgsim_core::Result<Waveform>)> = thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| {
                let (sys, cfg) = (&sys, &cfg);
                (m, s.spawn(move || simulate(sys, cfg, m)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(m, h)| (m, h.join().expect("simulation thread panicked")))
            .collect()
    });

    let mut waves = Vec::new();
    let mut failure = None;
    for (method, result) in results {
        match result {
            Ok(w) => waves.push(w),
            // The dense reference is optional in a comparison run.
            Err(e @ Error::SizeCap { .. }) if all && method == Method::Oracle => {
                eprintln!("note: oracle skipped: {e}");
            }
            Err(e) => {
                let f = Failure::from_core(method.as_str(), e);
                if failure.is_none() {
                    failure = Some(f);
                } else {
                    eprintln!("error: {}", f.message());
                }
            }
        }
    }

    for w in &waves {
        let method = w.stats.method.expect("engines tag their output");
        let name = method.as_str();
        match &args.out {
            Some(p) => {
                let path = if all { tagged(p, name) } else { p.clone() };
                write_file(&path, |f| w.write_csv(f))?;
            }
            None if !all => {
                let stdout = io::stdout();
                w.write_csv(stdout.lock()).map_err(|e| Failure::Input(format!("stdout: {e}")))?;
            }
            None => {}
        }
        if let Some(p) = &args.stats {
            let path = if all { tagged(p, name) } else { p.clone() };
            write_file(&path, |f| writeln!(f, "{}", w.stats.to_json()))?;
        }
        if args.verbose {
            let s = &w.stats;
            eprintln!(
                "{name}: N = {}, sum m = {}, m_peak = {}, factorizations = {}, substitutions = {}, {:.3e} s",
                s.steps, s.sum_m, s.m_peak, s.factorizations, s.substitutions, s.wall_seconds
            );
            if method == Method::Mexp {
                w.write_diagnostics(io::stderr().lock())
                    .map_err(|e| Failure::Input(format!("stderr: {e}")))?;
            }
        }
    }

    if all {
        let report = RunReport::new(&waves.iter().collect::<Vec<_>>());
        if let Some(p) = &args.out {
            let path = tagged(p, "report").with_extension("txt");
            write_file(&path, |f| write!(f, "{report}"))?;
        }
        print!("{report}");
    }
    failure.map_or(Ok(()), Err)
}

fn cmd_genmesh(args: &GenmeshArgs) -> Result<(), Failure> {
    let mut spec = MeshSpec::with_size(args.rows, args.cols);
    spec.seed = args.seed;
    let (cmin, cmax) = (args.cmin.unwrap_or(spec.c_range.0), args.cmax.unwrap_or(spec.c_range.1));
    let gmin = args.gmin.unwrap_or(1.0 / spec.r_range.1);
    let gmax = args.gmax.unwrap_or(1.0 / spec.r_range.0);
    if !(gmin > 0.0 && gmin <= gmax && gmax.is_finite()) {
        return Err(Failure::Input(format!(
            "conductance range must satisfy 0 < gmin <= gmax, got ({gmin:e}, {gmax:e})"
        )));
    }
    spec.c_range = (cmin, cmax);
    spec.r_range = (1.0 / gmax, 1.0 / gmin);
    if let Some(r) = args.norton {
        spec.drive = MeshDrive::Norton { resistance: r };
    }
    spec.input = PwlWaveform::step(args.rise, 1.0).map_err(|e| Failure::from_core("rise", e))?;
    spec.tran = Tran {
        stop: args.tstop,
        step: Some(args.tstep),
    };
    let netlist = generate_pdn_mesh(&spec).map_err(|e| Failure::from_core("genmesh", e))?;
    let text = netlist.to_text();
    match &args.out {
        Some(p) => write_file(p, |f| f.write_all(text.as_bytes())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("stdout: {e}"))),
    }
}
