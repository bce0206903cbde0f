use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nanoloc::artifact::{self, RunReport, SummaryRow, NO_AXIS};
use nanoloc::channel::AbsorptionTable;
use nanoloc::config::{load_config, ConfigError, SimConfig};
use nanoloc::simulator::{self, SeedPolicy, SimError};
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "nanoloc",
    version,
    about = "Monte Carlo simulator for ToF localization of energy-harvesting nanonodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its summary row.
    Run(Common),
    /// Run one experiment per value of a config field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config field to vary.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; JSON literals, bare words are taken as strings.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Reuse the base seed at every point instead of deriving one per point.
        #[arg(long)]
        common_seeds: bool,
    },
    /// ToF against AoA triangulation and RSS trilateration, energy accounting off.
    Compare(Common),
    /// Tabulate localization latency over grids of node, anchor and pulse counts.
    Latency {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "625")]
        m: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "4")]
        n: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<u64>,
        /// Single-exchange time, s. Estimated from the config's geometry and pulse timing when absent.
        #[arg(long)]
        t_tof: Option<f64>,
        /// Per-node trilateration time, s.
        #[arg(long, default_value_t = 1e-7)]
        t_tr: f64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Whitespace-separated `frequency_hz coefficient_per_m` lines.
    #[arg(long)]
    absorption_table: Option<PathBuf>,
    /// Write every localization error, one per line. Sweeps append `.<index>` per point.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(e) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<artifact::ArtifactError> for Failure {
    fn from(e: artifact::ArtifactError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl Common {
    fn load(&self) -> Result<SimConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => SimConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(path) = &self.absorption_table {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read absorption table {}: {e}", path.display())))?;
            config.absorption_table = text
                .parse::<AbsorptionTable>()
                .map_err(|e| Failure::Config(format!("absorption table {}: {e}", path.display())))?;
        }
        config.validate()?;
        Ok(config)
    }

    fn output(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn emit(&self, command: &str, config: &SimConfig, rows: &[SummaryRow]) -> Result<(), Failure> {
        let mut out = self.output()?;
        match self.format {
            Format::Csv => artifact::write_summary_csv(rows, &mut out)?,
            Format::Json => {
                artifact::write_json_report(&RunReport { command, config, rows }, &mut out)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn dump(path: &Path, samples: &[f64]) -> Result<(), Failure> {
    let mut out = BufWriter::new(File::create(path)?);
    artifact::write_samples(samples, &mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text.trim()).unwrap_or_else(|_| Value::String(text.trim().to_owned()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let config = common.load()?;
            let exp = simulator::run_experiment(&config, common.workers)?;
            if let Some(path) = &common.dump_samples {
                dump(path, &exp.samples)?;
            }
            let row = SummaryRow::new(NO_AXIS, &Value::Null, config.master_seed, &exp.summary);
            common.emit("run", &config, &[row])
        }
        Command::Sweep { common, axis, values, common_seeds } => {
            let config = common.load()?;
            let values: Vec<Value> = values.iter().map(|v| parse_value(v)).collect();
            let policy = if common_seeds { SeedPolicy::Common } else { SeedPolicy::Fresh };
            let points = simulator::sweep(&config, &axis, &values, policy, common.workers)?;
            if let Some(path) = &common.dump_samples {
                for (i, p) in points.iter().enumerate() {
                    let mut name = path.as_os_str().to_owned();
                    name.push(format!(".{i}"));
                    dump(Path::new(&name), &p.experiment.samples)?;
                }
            }
            let rows: Vec<SummaryRow> =
                points.iter().map(|p| SummaryRow::new(&p.axis, &p.value, p.seed, &p.experiment.summary)).collect();
            common.emit("sweep", &config, &rows)
        }
        Command::Compare(common) => {
            let config = common.load()?;
            let result = simulator::compare(&config, common.workers)?;
            let rows: Vec<SummaryRow> = [("tof", &result.tof), ("aoa", &result.aoa), ("rss", &result.rss)]
                .into_iter()
                .map(|(name, s)| SummaryRow::new("method", &Value::from(name), config.master_seed, s))
                .collect();
            common.emit("compare", &config, &rows)
        }
        Command::Latency { common, m, n, k, t_tof, t_tr } => {
            let config = common.load()?;
            let t_tof = match t_tof {
                Some(t) if t >= 0.0 && t.is_finite() => t,
                Some(t) => return Err(Failure::Config(format!("invalid value for `t_tof`: {t}"))),
                None => simulator::estimate_t_tof(&config.tsook(), config.topology()?.max_anchor_distance()),
            };
            if !(t_tr >= 0.0 && t_tr.is_finite()) {
                return Err(Failure::Config(format!("invalid value for `t_tr`: {t_tr}")));
            }
            let rows = latency_rows(&m, &n, &k, t_tof, t_tr);
            write_latency(&common, &rows)
        }
    }
}

#[derive(serde::Serialize)]
struct LatencyRow {
    m: u64,
    n: u64,
    k: u64,
    t_tof_s: f64,
    t_tr_s: f64,
    t_loc_s: f64,
}

fn latency_rows(m: &[u64], n: &[u64], k: &[u64], t_tof: f64, t_tr: f64) -> Vec<LatencyRow> {
    let mut rows = Vec::new();
    for &m in m {
        for &n in n {
            for &k in k {
                let t_loc_s = simulator::latency_model(m, n, k, t_tof, t_tr);
                rows.push(LatencyRow { m, n, k, t_tof_s: t_tof, t_tr_s: t_tr, t_loc_s });
            }
        }
    }
    rows
}

fn write_latency(common: &Common, rows: &[LatencyRow]) -> Result<(), Failure> {
    let mut out = common.output()?;
    match common.format {
        Format::Csv => {
            writeln!(out, "m,n,k,t_tof_s,t_tr_s,t_loc_s")?;
            for r in rows {
                let f = artifact::format_float;
                writeln!(out, "{},{},{},{},{},{}", r.m, r.n, r.k, f(r.t_tof_s), f(r.t_tr_s), f(r.t_loc_s))?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
