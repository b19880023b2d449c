use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use advectflow_core::perf::{schedule_overlap, PerfReport, TransferPlan};
use advectflow_core::pwaf::read_field;
use advectflow_core::{
    advect_all, run_pipeline, write_field, AdvectionCoeffs, CycleStats, ExecMode, Extents, Field3D,
    Generator, PerfParams, PipelineConfig, SourceTerms,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{BenchArgs, Common, Exec, GeneratorSpec, PerfArgs, ReportFormat, RunArgs};
use crate::{CliError, EXIT_MISMATCH, EXIT_OK, THREADS_ENV};

pub const BENCH_HEADER: &str = "scenario,cells,wall_seconds,cells_per_second";

/// Everything a run was configured with, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub extents: Extents,
    pub seed: u64,
    /// Where each of u, v, w came from.
    pub inputs: [InputSource; 3],
    pub coeffs: String,
    pub pipeline: PipelineConfig,
    pub perf: PerfParams,
    pub n_transfer_chunks: usize,
    pub overlap: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputSource {
    Generated { generator: Generator },
    File { path: PathBuf },
}

pub struct Inputs {
    pub fields: [Field3D; 3],
    pub coeffs: AdvectionCoeffs,
    pub config: ResolvedConfig,
}

fn exec_mode(c: &Common) -> Result<ExecMode, CliError> {
    if c.exec == Exec::Single {
        return Ok(ExecMode::SingleThreaded);
    }
    let max_workers = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                return Err(CliError::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                )))
            }
        },
        Err(_) => None,
    };
    Ok(ExecMode::Concurrent { max_workers })
}

pub fn pipeline_config(c: &Common) -> Result<PipelineConfig, CliError> {
    let config = PipelineConfig {
        channel_capacity: c.channel_capacity,
        chunk_width: c.chunk_width,
        num_kernels: c.kernels,
        record_cycle_stats: true,
        exec: exec_mode(c)?,
        stall_timeout: Duration::from_secs_f64(c.stall_timeout),
        inject_fault: c.inject_fault,
    };
    config.validate()?;
    Ok(config)
}

pub fn perf_params(c: &Common, column_height: usize) -> Result<PerfParams, CliError> {
    let params = PerfParams {
        clock_hz: c.clock_hz,
        column_height,
        num_kernels: c.kernels,
        pcie_bw_h2d: c.pcie_in_bw,
        pcie_bw_d2h: c.pcie_out_bw,
        mem_efficiency: c.mem_efficiency,
        ..Default::default()
    };
    params.validate()?;
    Ok(params)
}

fn resolve(
    c: &Common,
    extents: Extents,
    inputs: [InputSource; 3],
) -> Result<ResolvedConfig, CliError> {
    Ok(ResolvedConfig {
        extents,
        seed: c.seed,
        inputs,
        coeffs: c
            .coeffs
            .as_ref()
            .map_or_else(|| "unit".to_owned(), |p| p.display().to_string()),
        pipeline: pipeline_config(c)?,
        perf: perf_params(c, extents.nz)?,
        n_transfer_chunks: c.n_transfer_chunks,
        overlap: c.overlapped(),
        out: c.out.clone(),
    })
}

/// Read or generate u, v, w and the coefficients. When any field comes from
/// a file, the grid extents are taken from the files.
pub fn load_inputs(c: &Common) -> Result<Inputs, CliError> {
    let files = [&c.u_file, &c.v_file, &c.w_file];
    if c.generator.is_some() && files.iter().any(|f| f.is_some()) {
        return Err(CliError::Config(
            "give either --generator or field files, not both".into(),
        ));
    }
    let mut loaded: [Option<Field3D>; 3] = [None, None, None];
    for (slot, path) in loaded.iter_mut().zip(files) {
        if let Some(p) = path {
            *slot = Some(read_field(p)?);
        }
    }
    let extents = match loaded.iter().flatten().next() {
        Some(f) => f.extents(),
        None => Extents::new(c.nx, c.ny, c.nz)?,
    };
    let generator = c.generator.unwrap_or(GeneratorSpec::Seeded);
    let mut sources = Vec::with_capacity(3);
    let mut fields = Vec::with_capacity(3);
    for (n, (slot, path)) in loaded.into_iter().zip(files).enumerate() {
        let field = match (slot, path) {
            (Some(f), Some(p)) => {
                if f.extents() != extents {
                    return Err(CliError::Core(advectflow_core::Error::ExtentsMismatch(
                        format!(
                            "{} is {:?}, other inputs are {extents:?}",
                            p.display(),
                            f.extents()
                        ),
                    )));
                }
                sources.push(InputSource::File { path: p.clone() });
                f
            }
            _ => {
                let g = generator.for_field(c.seed, n as u64);
                sources.push(InputSource::Generated { generator: g });
                Field3D::generate(extents, g)?
            }
        };
        fields.push(field);
    }
    let coeffs = match &c.coeffs {
        Some(p) => {
            let coeffs = AdvectionCoeffs::load_json(p)?;
            coeffs.check_levels(extents.nz)?;
            coeffs
        }
        None => AdvectionCoeffs::unit(extents.nz),
    };
    let config = resolve(c, extents, three(sources))?;
    let fields = three(fields);
    Ok(Inputs {
        fields,
        coeffs,
        config,
    })
}

fn three<T>(v: Vec<T>) -> [T; 3] {
    v.try_into()
        .unwrap_or_else(|_| unreachable!("one entry per field"))
}

fn emit(text: &str, out: &mut dyn Write, file: Option<PathBuf>) -> Result<(), CliError> {
    out.write_all(text.as_bytes())?;
    if let Some(path) = file {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text)?;
    }
    Ok(())
}

fn report_path(c: &Common, stem: &str) -> Option<PathBuf> {
    let ext = match c.report {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };
    c.out.as_ref().map(|d| d.join(format!("{stem}.{ext}")))
}

fn csv(header: &[&str], row: &[String]) -> String {
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn json_text(value: &serde_json::Value) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn verify(c: &Common, out: &mut dyn Write) -> Result<i32, CliError> {
    let inputs = load_inputs(c)?;
    let [u, v, w] = &inputs.fields;
    let t = Instant::now();
    let expected = advect_all(u, v, w, &inputs.coeffs)?;
    let reference_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (got, stats) = run_pipeline(u, v, w, &inputs.coeffs, &inputs.config.pipeline)?;
    let pipeline_seconds = t.elapsed().as_secs_f64();
    let equal = got.bitwise_eq(&expected);
    let diff = got.max_abs_diff(&expected);

    let text = match c.report {
        ReportFormat::Json => json_text(&json!({
            "command": "verify",
            "config": inputs.config,
            "bitwise_equal": equal,
            "max_abs_diff": diff,
            "cycle_stats": stats,
            "reference_seconds": reference_seconds,
            "pipeline_seconds": pipeline_seconds,
        }))?,
        ReportFormat::Csv => csv(
            &[
                "bitwise_equal",
                "max_abs_diff",
                "elements_streamed",
                "windows_emitted",
                "achieved_ii",
                "pipeline_seconds",
            ],
            &[
                equal.to_string(),
                diff.to_string(),
                stats.elements_streamed.to_string(),
                stats.windows_emitted.to_string(),
                stats.achieved_ii.to_string(),
                pipeline_seconds.to_string(),
            ],
        ),
    };
    emit(&text, out, report_path(c, "verify"))?;
    Ok(if equal { EXIT_OK } else { EXIT_MISMATCH })
}

/// Default output directory of `run`.
pub const DEFAULT_RUN_OUT: &str = "advectflow-out";

fn write_terms(dir: &Path, terms: &SourceTerms) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (name, field) in [("su", &terms.su), ("sv", &terms.sv), ("sw", &terms.sw)] {
        let path = dir.join(format!("{name}.pwaf"));
        write_field(field, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn run(a: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let c = &a.common;
    let dir = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_RUN_OUT));
    let inputs = load_inputs(c)?;
    fs::create_dir_all(&dir)?;
    let [u, v, w] = &inputs.fields;
    let t = Instant::now();
    let (terms, stats): (SourceTerms, CycleStats) =
        run_pipeline(u, v, w, &inputs.coeffs, &inputs.config.pipeline)?;
    let wall_seconds = t.elapsed().as_secs_f64();
    let mut written = write_terms(&dir, &terms)?;
    if a.dump_inputs {
        for (name, field) in [("u", u), ("v", v), ("w", w)] {
            let path = dir.join(format!("{name}.pwaf"));
            write_field(field, &path)?;
            written.push(path);
        }
    }

    let ext = match c.report {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };
    let text = match c.report {
        ReportFormat::Json => json_text(&json!({
            "command": "run",
            "config": inputs.config,
            "windows_emitted": stats.windows_emitted,
            "elements_streamed": stats.elements_streamed,
            "wall_seconds": wall_seconds,
            "cycle_stats": stats,
            "outputs": written,
        }))?,
        ReportFormat::Csv => csv(
            &[
                "windows_emitted",
                "elements_streamed",
                "achieved_ii",
                "wall_seconds",
            ],
            &[
                stats.windows_emitted.to_string(),
                stats.elements_streamed.to_string(),
                stats.achieved_ii.to_string(),
                wall_seconds.to_string(),
            ],
        ),
    };
    emit(&text, out, Some(dir.join(format!("report.{ext}"))))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct PerfOutput<'a> {
    command: &'static str,
    config: serde_json::Value,
    #[serde(flatten)]
    report: &'a PerfReport,
    bytes_total: u64,
    flops_per_cycle: f64,
}

pub fn perfmodel(a: &PerfArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let c = &a.common;
    let params = perf_params(c, c.nz)?;
    let plan = match a.cells {
        Some(cells) => TransferPlan::for_cells(cells, c.n_transfer_chunks)?,
        None => TransferPlan::for_grid(
            Extents::new(c.nx, c.ny, c.nz)?,
            c.chunk_width,
            c.n_transfer_chunks,
        )?,
    };
    let mut report = schedule_overlap(&plan, &params, c.overlapped())?;
    if let Some(g) = a.achieved_gflops {
        report = report.with_achieved(g * 1e9)?;
    }
    let config = json!({
        "perf": params,
        "cells": plan.total_cells,
        "extents": plan.extents,
        "chunk_width": plan.chunk_width,
        "n_transfer_chunks": plan.n_chunks,
        "overlap": c.overlapped(),
        "achieved_gflops": a.achieved_gflops,
    });
    let text = match c.report {
        ReportFormat::Json => {
            let body = PerfOutput {
                command: "perfmodel",
                config,
                report: &report,
                bytes_total: report.bytes_in + report.bytes_out,
                flops_per_cycle: params.flops_per_cycle(),
            };
            serde_json::to_string_pretty(&body)? + "\n"
        }
        ReportFormat::Csv => csv(
            &[
                "theoretical_gflops",
                "bytes_in",
                "bytes_out",
                "bytes_total",
                "modeled_kernel_seconds",
                "serial_makespan_seconds",
                "overlapped_makespan_seconds",
                "efficiency_pct",
            ],
            &[
                report.theoretical_gflops.to_string(),
                report.bytes_in.to_string(),
                report.bytes_out.to_string(),
                (report.bytes_in + report.bytes_out).to_string(),
                report.modeled_kernel_seconds.to_string(),
                report.serial_makespan_seconds.to_string(),
                report.overlapped_makespan_seconds.to_string(),
                report
                    .efficiency_pct
                    .map(|e| e.to_string())
                    .unwrap_or_default(),
            ],
        ),
    };
    emit(&text, out, report_path(c, "perfmodel"))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub scenario: String,
    pub cells: u64,
    pub wall_seconds: f64,
    pub cells_per_second: f64,
}

pub fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let c = &a.common;
    if a.repeats < 1 {
        return Err(CliError::Config("--repeats must be >= 1".into()));
    }
    let base = pipeline_config(c)?;
    let mut rows = Vec::new();
    for &n in &a.sizes {
        let e = Extents::new(n, n, n)?;
        let gen = c.generator.unwrap_or(GeneratorSpec::Seeded);
        let fields: Vec<Field3D> = (0..3)
            .map(|f| Field3D::generate(e, gen.for_field(c.seed, f)))
            .collect::<Result<_, _>>()?;
        let coeffs = AdvectionCoeffs::unit(n);
        for &cw in &a.chunk_widths {
            for &k in a.kernel_counts.iter().filter(|&&k| k <= n) {
                let config = PipelineConfig {
                    chunk_width: cw,
                    num_kernels: k,
                    record_cycle_stats: false,
                    ..base.clone()
                };
                let mut best = f64::INFINITY;
                for _ in 0..a.repeats {
                    let t = Instant::now();
                    run_pipeline(&fields[0], &fields[1], &fields[2], &coeffs, &config)?;
                    best = best.min(t.elapsed().as_secs_f64());
                }
                let cells = e.cells() as u64;
                rows.push(BenchRow {
                    scenario: format!("cube{n}_cw{cw}_k{k}"),
                    cells,
                    wall_seconds: best,
                    cells_per_second: cells as f64 / best,
                });
            }
        }
    }
    let text = match c.report {
        ReportFormat::Csv => {
            let mut s = String::from(BENCH_HEADER);
            s.push('\n');
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.scenario, r.cells, r.wall_seconds, r.cells_per_second
                ));
            }
            s
        }
        ReportFormat::Json => json_text(&json!({
            "command": "bench",
            "config": base,
            "rows": rows,
        }))?,
    };
    emit(&text, out, report_path(c, "bench"))?;
    Ok(EXIT_OK)
}
