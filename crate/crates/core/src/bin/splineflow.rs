use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use splineflow::analysis::{cfl_report, equivalence_report, MetricReport};
use splineflow::batch_sparse::GStorage;
use splineflow::bench::cmd_bench;
use splineflow::commands::{cmd_compare, cmd_eval, cmd_fit, cmd_gen, cmd_pipeline};
use splineflow::config::RunConfig;
use splineflow::flow_model::{FieldKind, Flow, GroupingMode};
use splineflow::io::{self as sio, Format};
use splineflow::partitioner::{PartitionMode, Stage, TimingBreakdown};
use splineflow::pipeline::CoeffSet;
use splineflow::spline_kernel::FifthElement;
use splineflow::{Error, Result};

/// Trajectory splines, batched evaluation and SPMD benchmarks.
#[derive(Parser, Debug)]
#[command(name = "splineflow", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML file with run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reject S != 3N+1 and M not divisible by p.
    #[arg(long, global = true, conflicts_with = "relaxed")]
    strict: bool,
    /// Truncate trailing samples and balance uneven shards.
    #[arg(long, global = true)]
    relaxed: bool,
    #[arg(long, global = true, value_parser = parse_via::<FifthElement>)]
    convention: Option<FifthElement>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Allow alpha + beta != 1.
    #[arg(long, global = true)]
    unnormalized: bool,
    /// Export the unblended spline coefficients u.
    #[arg(long, global = true)]
    raw: bool,
    #[arg(long, global = true, value_parser = parse_via::<GStorage>)]
    storage: Option<GStorage>,
    #[arg(long, global = true, value_parser = parse_via::<Format>)]
    format: Option<Format>,
}

#[derive(Args, Debug, Default)]
struct FlowArgs {
    #[arg(long, value_parser = parse_via::<FieldKind>)]
    field: Option<FieldKind>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "S")]
    s: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Coarse sample interval (sec).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    axial_speed: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    /// Vortex only: choose dt so a revolution spans this many samples.
    #[arg(long)]
    samples_per_rev: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long = "V")]
    v: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic flow file.
    Gen {
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit spline coefficients to a flow file.
    Fit {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a coefficient file into a snapshot.
    Eval {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit and evaluate in one parallel pass; generates the flow when no
    /// input is given.
    Pipeline {
        #[arg(short, long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the coefficients here.
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time a stage over lists of M and p.
    Bench {
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long = "V")]
        v: Option<usize>,
        #[arg(long = "M-list", value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        #[arg(long = "p-list", value_delimiter = ',')]
        p_list: Option<Vec<usize>>,
        #[arg(long, value_parser = parse_via::<Stage>)]
        stage: Option<Stage>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// CFL time-step and space-step calculator.
    Cfl {
        #[arg(long)]
        space_step: Option<f64>,
        #[arg(long)]
        time_step: Option<f64>,
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        csv: bool,
    },
    /// Spline vs finite-difference time-step equivalence.
    Equiv {
        #[arg(long = "L")]
        length: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "V")]
        v: usize,
        #[arg(long)]
        speed: f64,
        #[arg(long)]
        csv: bool,
    },
    /// Measure reconstruction error against a fine-integrated reference.
    Compare {
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        fine_dt: Option<f64>,
        /// Directory for metrics.csv and polylines.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_via<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

macro_rules! set {
    ($cfg:ident . $field:ident, $value:expr) => {
        if let Some(v) = $value {
            $cfg.$field = v;
        }
    };
}

fn base_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    set!(cfg.seed, g.seed);
    set!(cfg.convention, g.convention);
    set!(cfg.alpha, g.alpha);
    set!(cfg.beta, g.beta);
    set!(cfg.storage, g.storage);
    set!(cfg.format, g.format);
    cfg.unnormalized |= g.unnormalized;
    cfg.raw |= g.raw;
    if g.strict {
        cfg.grouping = GroupingMode::Strict;
        cfg.partition = PartitionMode::Strict;
    }
    if g.relaxed {
        cfg.grouping = GroupingMode::Relaxed;
        cfg.partition = PartitionMode::Relaxed;
    }
    Ok(cfg)
}

fn apply_flow(cfg: &mut RunConfig, f: &FlowArgs) {
    set!(cfg.field, f.field);
    set!(cfg.m, f.m);
    if f.s.is_some() || f.n.is_some() {
        cfg.s = f.s;
        cfg.n = f.n;
    }
    set!(cfg.dt, f.dt);
    set!(cfg.speed, f.speed);
    set!(cfg.radius, f.radius);
    set!(cfg.axial_speed, f.axial_speed);
    set!(cfg.height, f.height);
    set!(cfg.width, f.width);
    set!(cfg.spacing, f.spacing);
    set!(cfg.jitter, f.jitter);
    if f.samples_per_rev.is_some() {
        cfg.samples_per_rev = f.samples_per_rev;
    }
}

fn apply_run(cfg: &mut RunConfig, r: &RunArgs) {
    set!(cfg.v, r.v);
    set!(cfg.p, r.p);
}

fn apply_paths(cfg: &mut RunConfig, input: &Option<PathBuf>, output: &Option<PathBuf>) {
    if input.is_some() {
        cfg.input = input.clone();
    }
    if output.is_some() {
        cfg.output = output.clone();
    }
}

/// Record the shape of an input flow so output headers describe the run.
fn describe_flow(cfg: &mut RunConfig, flow: &Flow) {
    cfg.m = flow.m();
    cfg.s = Some(flow.s());
    cfg.n = None;
    if let Some(dt) = flow.dt() {
        cfg.dt = dt;
    }
}

/// Take the fit settings from the coefficient file being evaluated.
fn describe_coeffs(cfg: &mut RunConfig, set: &CoeffSet) {
    cfg.m = set.m();
    cfg.n = Some(set.n_groups());
    cfg.s = None;
    cfg.convention = set.convention;
    cfg.alpha = set.blend.alpha();
    cfg.beta = set.blend.beta();
    cfg.unnormalized = set.blend.is_unnormalized();
    cfg.raw = set.raw;
}

fn required_input(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("an input file is required (--input)".into()))
}

/// Write to `path`, or stdout when absent.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p)?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn log_timing(what: &str, t: &TimingBreakdown) {
    log::info!(
        "{what}: p={} time_execution={:.6}s time_cpu={:.6}s time_overhead={:.6}s",
        t.p,
        t.time_execution(),
        t.time_cpu(),
        t.time_overhead()
    );
}

fn print_report(r: &MetricReport, csv: bool) {
    if csv {
        print!("{}", r.to_csv());
    } else {
        print!("{}", r.to_text());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli.global)?;
    match cli.command {
        Cmd::Gen { flow, output } => {
            apply_flow(&mut cfg, &flow);
            apply_paths(&mut cfg, &None, &output);
            let f = cmd_gen(&cfg)?;
            let header = [cfg.header_line()];
            emit(cfg.output.as_deref(), |w| match cfg.format {
                Format::Csv => sio::write_flow_csv(w, &f, &header),
                Format::Bin => sio::write_flow_bin(w, &f),
            })
        }
        Cmd::Fit { input, output, run } => {
            apply_run(&mut cfg, &run);
            apply_paths(&mut cfg, &input, &output);
            let flow = sio::read_flow_path(required_input(&cfg)?)?;
            describe_flow(&mut cfg, &flow);
            let (set, timing) = cmd_fit(&cfg, &flow)?;
            log_timing("fit", &timing);
            let header = [cfg.header_line()];
            emit(cfg.output.as_deref(), |w| match cfg.format {
                Format::Csv => sio::write_coeffs_csv(w, &set, &header),
                Format::Bin => sio::write_coeffs_bin(w, &set),
            })
        }
        Cmd::Eval { input, output, run } => {
            apply_run(&mut cfg, &run);
            apply_paths(&mut cfg, &input, &output);
            let set = sio::read_coeffs_path(required_input(&cfg)?)?;
            describe_coeffs(&mut cfg, &set);
            let (snap, timing) = cmd_eval(&cfg, &set)?;
            log_timing("eval", &timing);
            let header = [cfg.header_line()];
            emit(cfg.output.as_deref(), |w| {
                sio::write_snapshot_csv(w, &snap, &header)
            })
        }
        Cmd::Pipeline {
            input,
            output,
            coeffs,
            flow,
            run,
        } => {
            apply_flow(&mut cfg, &flow);
            apply_run(&mut cfg, &run);
            apply_paths(&mut cfg, &input, &output);
            let f = match &cfg.input {
                Some(p) => sio::read_flow_path(p)?,
                None => cmd_gen(&cfg)?,
            };
            describe_flow(&mut cfg, &f);
            let (set, snap, timing) = cmd_pipeline(&cfg, &f)?;
            log_timing("pipeline", &timing);
            let header = [cfg.header_line()];
            if let Some(path) = coeffs {
                sio::write_coeffs_path(path, &set, cfg.format, &header)?;
            }
            emit(cfg.output.as_deref(), |w| {
                sio::write_snapshot_csv(w, &snap, &header)
            })
        }
        Cmd::Bench {
            flow,
            v,
            m_list,
            p_list,
            stage,
            repeats,
            output,
        } => {
            apply_flow(&mut cfg, &flow);
            set!(cfg.v, v);
            set!(cfg.m_list, m_list);
            set!(cfg.p_list, p_list);
            set!(cfg.stage, stage);
            set!(cfg.repeats, repeats);
            apply_paths(&mut cfg, &None, &output);
            let report = cmd_bench(&cfg)?;
            let text = report.to_csv(&[cfg.header_line()]);
            emit(cfg.output.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))
        }
        Cmd::Cfl {
            space_step,
            time_step,
            speed,
            csv,
        } => {
            print_report(&cfl_report(space_step, time_step, speed)?, csv);
            Ok(())
        }
        Cmd::Equiv {
            length,
            n,
            v,
            speed,
            csv,
        } => {
            print_report(&equivalence_report(length, n, v, speed)?, csv);
            Ok(())
        }
        Cmd::Compare {
            flow,
            run,
            fine_dt,
            out_dir,
        } => {
            apply_flow(&mut cfg, &flow);
            apply_run(&mut cfg, &run);
            if fine_dt.is_some() {
                cfg.fine_dt = fine_dt;
            }
            if out_dir.is_some() {
                cfg.output = out_dir;
            }
            let out = cmd_compare(&cfg)?;
            let report = out.report(&cfg);
            print!("{}", report.to_text());
            if let Some(dir) = &cfg.output {
                fs::create_dir_all(dir)?;
                let header = cfg.header_line();
                fs::write(
                    dir.join("metrics.csv"),
                    format!("#{header}\n{}", report.to_csv()),
                )?;
                let mut w = BufWriter::new(fs::File::create(dir.join("polylines.csv"))?);
                sio::write_paired_polylines(&mut w, &out.pairs, &[header])?;
                w.flush()?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
