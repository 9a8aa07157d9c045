use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orgscope::{run, RunConfig, Stage};

#[derive(Parser)]
#[command(
    name = "orgscope",
    version,
    about = "Organelle segmentation, tracking and feature extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
}

#[derive(Subcommand)]
enum Command {
    /// Multiscale Frangi enhancement.
    Enhance(Common),
    /// Thresholding, skeletons, organelle and branch labels.
    Segment(Common),
    /// Motion-capture markers.
    Mocap(Common),
    /// Marker linking between consecutive frames.
    Link(Common),
    /// Flow interpolation, label propagation and point tracks.
    Flow(Common),
    /// Hierarchical feature tables.
    Features(Common),
    /// Multi-level skeleton graphs.
    Multimesh(Common),
    /// Run the pipeline from a stage to the end.
    Run {
        #[command(flatten)]
        common: Common,
        /// First stage to execute; earlier stages are read from the output directory.
        #[arg(long, value_enum, default_value = "enhance")]
        from: Stage,
        /// Last stage to execute.
        #[arg(long, value_enum, default_value = "multimesh")]
        to: Stage,
    },
    /// Print the resolved configuration as TOML.
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Axis order such as TZYX, TCZYX or YX.
    #[arg(long)]
    dim_order: Option<String>,
    #[arg(long)]
    spacing_x: Option<f64>,
    #[arg(long)]
    spacing_y: Option<f64>,
    #[arg(long)]
    spacing_z: Option<f64>,
    /// Seconds between frames.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    channel: Option<usize>,
    #[arg(long)]
    size_z: Option<usize>,
    #[arg(long)]
    size_c: Option<usize>,
    #[arg(long)]
    max_speed: Option<f64>,
    #[arg(long)]
    min_peak_dist: Option<f64>,
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Worker threads; defaults to ORGSCOPE_THREADS or the core count.
    #[arg(long)]
    threads: Option<usize>,
    /// Node features carried onto multimesh nodes, comma separated.
    #[arg(long, value_delimiter = ',')]
    multimesh_features: Option<Vec<String>>,
    /// Also write multimesh tables as JSON Lines.
    #[arg(long)]
    jsonl: bool,
}

impl Common {
    fn resolve(&self) -> orgscope::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_toml_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            c.input = v.clone();
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        if let Some(v) = &self.dim_order {
            c.dim_order = v.clone();
        }
        c.spacing_x = self.spacing_x.or(c.spacing_x);
        c.spacing_y = self.spacing_y.or(c.spacing_y);
        c.spacing_z = self.spacing_z.or(c.spacing_z);
        c.size_z = self.size_z.or(c.size_z);
        c.size_c = self.size_c.or(c.size_c);
        c.min_peak_dist_um = self.min_peak_dist.or(c.min_peak_dist_um);
        c.threads = self.threads.or(c.threads);
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(v) = self.channel {
            c.channel = v;
        }
        if let Some(v) = self.max_speed {
            c.max_speed_um_s = v;
        }
        if let Some(v) = self.chunk_size {
            c.chunk_size = v;
        }
        if let Some(v) = &self.multimesh_features {
            c.multimesh_features = v.clone();
        }
        c.jsonl |= self.jsonl;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let (common, from, to) = match &cli.command {
        Command::Enhance(c) => (c, Stage::Enhance, Stage::Enhance),
        Command::Segment(c) => (c, Stage::Segment, Stage::Segment),
        Command::Mocap(c) => (c, Stage::Mocap, Stage::Mocap),
        Command::Link(c) => (c, Stage::Link, Stage::Link),
        Command::Flow(c) => (c, Stage::Flow, Stage::Flow),
        Command::Features(c) => (c, Stage::Features, Stage::Features),
        Command::Multimesh(c) => (c, Stage::Multimesh, Stage::Multimesh),
        Command::Run { common, from, to } => (common, *from, *to),
        Command::Config(c) => {
            return match c.resolve() {
                Ok(cfg) => {
                    print!("{}", cfg.to_toml());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    if from > to {
        eprintln!(
            "error: --from {} comes after --to {}",
            from.name(),
            to.name()
        );
        return ExitCode::from(2);
    }
    let result = common.resolve().and_then(|cfg| run(&cfg, from, to));
    match result {
        Ok(m) => {
            for s in m.stages.iter().filter(|s| s.status == "ran") {
                log::info!("{} finished in {:.2} s", s.name, s.seconds);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
