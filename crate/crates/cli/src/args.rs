use std::path::PathBuf;
use std::str::FromStr;

use advectflow_core::Generator;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Software dataflow simulator and performance model of a streaming
/// advection kernel.
///
/// Any long flag may also be given in a `--config` file as `key = value`
/// (one per line, `#` comments). Flags on the command line win.
#[derive(Debug, Parser)]
#[command(name = "advectflow", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the reference kernel and the pipeline on the same inputs and
    /// compare them bit for bit. Exits 1 on any difference.
    Verify(Common),
    /// Run the pipeline and write su, sv, sw as PWAF files into --out.
    Run(RunArgs),
    /// Theoretical throughput, transfer volume and transfer/compute schedules.
    Perfmodel(PerfArgs),
    /// Time the pipeline over a set of scenarios and emit CSV rows.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Exec {
    /// Stages on worker threads (capped by ADVECTFLOW_THREADS).
    Concurrent,
    /// All stages stepped on one thread.
    Single,
}

/// Input generator: `seeded`, `zero`, `ramp` or `constant:VALUE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorSpec {
    Seeded,
    Ramp,
    Constant(f64),
}

impl GeneratorSpec {
    /// The generator for field number `field` (0, 1, 2 for u, v, w).
    pub fn for_field(self, seed: u64, field: u64) -> Generator {
        match self {
            GeneratorSpec::Seeded => Generator::seeded(seed.wrapping_add(field), -1.0, 1.0),
            GeneratorSpec::Ramp => Generator::Ramp,
            GeneratorSpec::Constant(v) => Generator::constant(v),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seeded" => Ok(GeneratorSpec::Seeded),
            "ramp" => Ok(GeneratorSpec::Ramp),
            "zero" => Ok(GeneratorSpec::Constant(0.0)),
            _ => {
                let value = s.strip_prefix("constant:").ok_or_else(|| {
                    format!("unknown generator `{s}` (seeded, zero, ramp, constant:VALUE)")
                })?;
                let v: f64 = value
                    .parse()
                    .map_err(|e| format!("constant `{value}`: {e}"))?;
                if !v.is_finite() {
                    return Err(format!("constant `{value}` is not finite"));
                }
                Ok(GeneratorSpec::Constant(v))
            }
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` must be a positive number"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` file of flag defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Interior cells in X.
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    /// Interior cells in Y.
    #[arg(long, default_value_t = 64)]
    pub ny: usize,
    /// Cells per column (Z), including the bottom level.
    #[arg(long, default_value_t = 64)]
    pub nz: usize,

    /// Seed for generated fields; u, v, w use seed, seed+1, seed+2.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator for fields not read from files [default: seeded].
    #[arg(long, value_name = "SPEC")]
    pub generator: Option<GeneratorSpec>,
    /// Read u from a PWAF file instead of generating it.
    #[arg(long, value_name = "FILE")]
    pub u_file: Option<PathBuf>,
    /// Read v from a PWAF file instead of generating it.
    #[arg(long, value_name = "FILE")]
    pub v_file: Option<PathBuf>,
    /// Read w from a PWAF file instead of generating it.
    #[arg(long, value_name = "FILE")]
    pub w_file: Option<PathBuf>,
    /// Coefficients as JSON with keys tcx, tcy, tzc1, tzc2 [default: all 1.0].
    #[arg(long, value_name = "FILE")]
    pub coeffs: Option<PathBuf>,

    /// Interior Y cells per chunk.
    #[arg(long, default_value_t = 16)]
    pub chunk_width: usize,
    /// Pipeline instances, each taking a slab of X.
    #[arg(long, default_value_t = 1)]
    pub kernels: usize,
    /// Capacity of every stream between stages.
    #[arg(long, default_value_t = 64)]
    pub channel_capacity: usize,
    /// How stages are scheduled.
    #[arg(long, value_enum, default_value_t = Exec::Concurrent)]
    pub exec: Exec,
    /// Seconds without pipeline progress before reporting a stall.
    #[arg(long, default_value_t = 10.0, value_parser = positive_f64)]
    pub stall_timeout: f64,

    /// Kernel clock in Hz.
    #[arg(long, default_value_t = 300e6, value_parser = positive_f64)]
    pub clock_hz: f64,
    /// Host to device bandwidth in bytes per second.
    #[arg(long, default_value_t = 12e9, value_parser = positive_f64)]
    pub pcie_in_bw: f64,
    /// Device to host bandwidth in bytes per second.
    #[arg(long, default_value_t = 12e9, value_parser = positive_f64)]
    pub pcie_out_bw: f64,
    /// Fraction of one cell per cycle the memory sustains, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub mem_efficiency: f64,
    /// X slabs the transfers are split into.
    #[arg(long, default_value_t = 4)]
    pub n_transfer_chunks: usize,
    /// Overlap transfers with compute (the default).
    #[arg(long, overrides_with = "no_overlap")]
    pub overlap: bool,
    /// Run transfers and compute one after another.
    #[arg(long, overrides_with = "overlap")]
    pub no_overlap: bool,

    /// Report format.
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,
    /// Output directory. Reports go to stdout when absent (except for run).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Test hook: corrupt one pipeline result.
    #[arg(long)]
    pub inject_fault: bool,
}

impl Common {
    pub fn overlapped(&self) -> bool {
        !self.no_overlap
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the input fields u, v, w into --out.
    #[arg(long)]
    pub dump_inputs: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PerfArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model a bare cell count instead of the --nx/--ny/--nz grid.
    #[arg(long)]
    pub cells: Option<u64>,
    /// Measured throughput in GFLOPS, for the efficiency figure.
    #[arg(long)]
    pub achieved_gflops: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cube edge lengths to time.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 48])]
    pub sizes: Vec<usize>,
    /// Chunk widths to time.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize])]
    pub chunk_widths: Vec<usize>,
    /// Kernel counts to time.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 4])]
    pub kernel_counts: Vec<usize>,
    /// Timed runs per scenario; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}
