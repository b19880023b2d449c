//! Analytic performance model: theoretical throughput, transfer volumes,
//! modeled kernel time, and serial vs overlapped transfer schedules.

mod sched;

pub use sched::{
    pipeline_bound, simulate_overlapped, simulate_serial, ChunkTimes, Schedule, TaskSpan,
};

use serde::Serialize;

use crate::chunk::{plan_chunks, split_even};
use crate::error::{Error, Result};
use crate::grid::Extents;

/// Operations per cell below the column top, all three components.
pub const FLOPS_INTERIOR: u32 = 63;
/// Operations per cell at the column top, all three components.
pub const FLOPS_TOP: u32 = 55;
/// Three double-precision fields.
pub const BYTES_PER_CELL_EACH_WAY: u64 = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfParams {
    pub clock_hz: f64,
    pub column_height: usize,
    pub num_kernels: usize,
    /// Host to device bandwidth, bytes per second.
    pub pcie_bw_h2d: f64,
    /// Device to host bandwidth, bytes per second.
    pub pcie_bw_d2h: f64,
    pub flops_per_cycle_interior: u32,
    pub flops_per_cycle_top: u32,
    /// Fraction of the ideal one-cell-per-cycle rate the memory sustains.
    pub mem_efficiency: f64,
}

impl Default for PerfParams {
    fn default() -> Self {
        Self {
            clock_hz: 300e6,
            column_height: 64,
            num_kernels: 1,
            pcie_bw_h2d: 12e9,
            pcie_bw_d2h: 12e9,
            flops_per_cycle_interior: FLOPS_INTERIOR,
            flops_per_cycle_top: FLOPS_TOP,
            mem_efficiency: 1.0,
        }
    }
}

impl PerfParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidPerfParams(msg.into()));
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return bad("clock_hz must be positive");
        }
        if self.column_height < 2 {
            return bad("column_height must be >= 2");
        }
        if self.num_kernels < 1 {
            return bad("num_kernels must be >= 1");
        }
        if !(self.pcie_bw_h2d > 0.0 && self.pcie_bw_d2h > 0.0)
            || !(self.pcie_bw_h2d.is_finite() && self.pcie_bw_d2h.is_finite())
        {
            return bad("PCIe bandwidths must be positive");
        }
        if !(self.mem_efficiency > 0.0 && self.mem_efficiency <= 1.0) {
            return bad("mem_efficiency must be in (0, 1]");
        }
        Ok(())
    }

    /// Average operations per cycle over one column.
    pub fn flops_per_cycle(&self) -> f64 {
        let nz = self.column_height as f64;
        (f64::from(self.flops_per_cycle_interior) * (nz - 2.0)
            + f64::from(self.flops_per_cycle_top))
            / (nz - 1.0)
    }

    /// Peak operations per second with every kernel at one cell per cycle.
    pub fn theoretical_flops(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.clock_hz * self.flops_per_cycle() * self.num_kernels as f64)
    }
}

/// Peak floating-point operations per second (not scaled to giga).
pub fn theoretical_gflops(clock_hz: f64, column_height: usize, num_kernels: usize) -> Result<f64> {
    PerfParams {
        clock_hz,
        column_height,
        num_kernels,
        ..Default::default()
    }
    .theoretical_flops()
}

pub fn efficiency_pct(achieved: f64, theoretical: f64) -> Result<f64> {
    if !(theoretical > 0.0) {
        return Err(Error::InvalidPerfParams(
            "theoretical performance must be positive".into(),
        ));
    }
    Ok(100.0 * achieved / theoretical)
}

/// `(bytes_in, bytes_out)` for moving u, v, w in and su, sv, sw out.
pub fn transfer_bytes(total_cells: u64) -> (u64, u64) {
    let b = BYTES_PER_CELL_EACH_WAY * total_cells;
    (b, b)
}

/// Cycles one kernel needs to stream a grid in Y chunks: every chunk pushes
/// its halo-inclusive block (two extra X planes and two extra Y rows, which
/// also covers the shift-buffer warm-up) plus one drain cycle.
pub fn streamed_cycles(extents: Extents, chunk_width: usize) -> u64 {
    plan_chunks(extents.ny, chunk_width)
        .iter()
        .map(|c| ((extents.nx + 2) * c.y_total * extents.nz) as u64 + 1)
        .sum()
}

/// Kernel time for a full grid: streamed cycles split evenly over the
/// kernels and derated by the memory efficiency.
pub fn modeled_kernel_seconds(
    extents: Extents,
    chunk_width: usize,
    params: &PerfParams,
) -> Result<f64> {
    params.validate()?;
    Ok(cycles_to_seconds(
        streamed_cycles(extents, chunk_width) as f64,
        params,
    ))
}

/// Kernel time when only a cell count is known: one cycle per cell, no halo
/// or warm-up overhead.
pub fn modeled_kernel_seconds_for_cells(total_cells: u64, params: &PerfParams) -> Result<f64> {
    params.validate()?;
    Ok(cycles_to_seconds(total_cells as f64, params))
}

fn cycles_to_seconds(cycles: f64, params: &PerfParams) -> f64 {
    cycles / (params.clock_hz * params.num_kernels as f64 * params.mem_efficiency)
}

/// How the grid is cut (along X) into transfer chunks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferPlan {
    pub total_cells: u64,
    pub n_chunks: usize,
    pub bytes_in: u64,
    pub bytes_out: u64,
    /// Cells per transfer chunk.
    pub chunk_cells: Vec<u64>,
    /// Geometry, when known; used for halo-aware kernel time.
    pub extents: Option<Extents>,
    pub chunk_width: Option<usize>,
}

impl TransferPlan {
    /// Cut a grid into `n_chunks` X slabs of near-equal width.
    pub fn for_grid(extents: Extents, chunk_width: usize, n_chunks: usize) -> Result<Self> {
        if n_chunks < 1 || n_chunks > extents.nx {
            return Err(Error::InvalidPerfParams(format!(
                "n_chunks must be in 1..={} for nx = {}",
                extents.nx, extents.nx
            )));
        }
        let plane = (extents.ny * extents.nz) as u64;
        let chunk_cells = split_even(extents.nx, n_chunks)
            .into_iter()
            .map(|(_, len)| len as u64 * plane)
            .collect();
        Ok(Self::build(
            extents.cells() as u64,
            chunk_cells,
            Some(extents),
            Some(chunk_width),
        ))
    }

    /// Cut a bare cell count into `n_chunks` near-equal parts.
    pub fn for_cells(total_cells: u64, n_chunks: usize) -> Result<Self> {
        if n_chunks < 1 || n_chunks as u64 > total_cells {
            return Err(Error::InvalidPerfParams(format!(
                "n_chunks must be in 1..={total_cells}"
            )));
        }
        let chunk_cells = split_even(total_cells as usize, n_chunks)
            .into_iter()
            .map(|(_, len)| len as u64)
            .collect();
        Ok(Self::build(total_cells, chunk_cells, None, None))
    }

    fn build(
        total_cells: u64,
        chunk_cells: Vec<u64>,
        extents: Option<Extents>,
        chunk_width: Option<usize>,
    ) -> Self {
        let (bytes_in, bytes_out) = transfer_bytes(total_cells);
        Self {
            total_cells,
            n_chunks: chunk_cells.len(),
            bytes_in,
            bytes_out,
            chunk_cells,
            extents,
            chunk_width,
        }
    }

    /// Per-chunk task durations. Kernel time is shared out by cell count.
    pub fn chunk_times(&self, params: &PerfParams) -> Result<Vec<ChunkTimes>> {
        let kernel = match (self.extents, self.chunk_width) {
            (Some(e), Some(cw)) => modeled_kernel_seconds(e, cw, params)?,
            _ => modeled_kernel_seconds_for_cells(self.total_cells, params)?,
        };
        let total = self.total_cells as f64;
        Ok(self
            .chunk_cells
            .iter()
            .map(|&c| {
                let bytes = (BYTES_PER_CELL_EACH_WAY * c) as f64;
                ChunkTimes {
                    input: bytes / params.pcie_bw_h2d,
                    compute: kernel * c as f64 / total,
                    output: bytes / params.pcie_bw_d2h,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    /// Operations per second (not scaled to giga).
    pub theoretical_gflops: f64,
    pub modeled_kernel_seconds: f64,
    pub transfer_in_seconds: f64,
    pub transfer_out_seconds: f64,
    pub serial_makespan_seconds: f64,
    pub overlapped_makespan_seconds: f64,
    pub overlapped: bool,
    /// The makespan of the selected mode.
    pub makespan_seconds: f64,
    pub efficiency_pct: Option<f64>,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub n_chunks: usize,
}

/// Simulate both schedules and report the one selected by `overlapped`
/// alongside the other.
pub fn schedule_overlap(
    plan: &TransferPlan,
    params: &PerfParams,
    overlapped: bool,
) -> Result<PerfReport> {
    params.validate()?;
    let tasks = plan.chunk_times(params)?;
    let serial = simulate_serial(&tasks).makespan;
    let over = simulate_overlapped(&tasks).makespan;
    Ok(PerfReport {
        theoretical_gflops: params.theoretical_flops()?,
        modeled_kernel_seconds: tasks.iter().map(|t| t.compute).sum(),
        transfer_in_seconds: tasks.iter().map(|t| t.input).sum(),
        transfer_out_seconds: tasks.iter().map(|t| t.output).sum(),
        serial_makespan_seconds: serial,
        overlapped_makespan_seconds: over,
        overlapped,
        makespan_seconds: if overlapped { over } else { serial },
        efficiency_pct: None,
        bytes_in: plan.bytes_in,
        bytes_out: plan.bytes_out,
        n_chunks: plan.n_chunks,
    })
}

impl PerfReport {
    /// Fill in `efficiency_pct` from an achieved rate in operations per second.
    pub fn with_achieved(mut self, achieved: f64) -> Result<Self> {
        self.efficiency_pct = Some(efficiency_pct(achieved, self.theoretical_gflops)?);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theoretical_examples() {
        let t = theoretical_gflops(300e6, 64, 1).unwrap();
        assert!((t / 1e9 - 18.86).abs() < 0.01, "{t}");
        let t = theoretical_gflops(398e6, 64, 1).unwrap();
        assert!((t / 1e9 - 25.02).abs() < 0.01, "{t}");
        assert_eq!(theoretical_gflops(300e6, 2, 1).unwrap(), 300e6 * 55.0);
        assert!(theoretical_gflops(300e6, 1, 1).is_err());
        assert!(theoretical_gflops(0.0, 64, 1).is_err());
    }

    #[test]
    fn theoretical_is_monotone() {
        let base = theoretical_gflops(300e6, 64, 1).unwrap();
        assert!(theoretical_gflops(301e6, 64, 1).unwrap() > base);
        assert!(theoretical_gflops(300e6, 64, 2).unwrap() > base);
        let mut prev = 0.0;
        for nz in 2..200 {
            let t = theoretical_gflops(1.0, nz, 1).unwrap();
            assert!(t > prev && t < 63.0);
            prev = t;
        }
    }

    #[test]
    fn efficiency_examples() {
        assert!((efficiency_pct(14.50, 18.86).unwrap() - 77.0).abs() < 1.0);
        assert!((efficiency_pct(20.8, 25.02).unwrap() - 83.0).abs() < 1.0);
        assert_eq!(efficiency_pct(3.0, 3.0).unwrap(), 100.0);
        assert!(efficiency_pct(1.0, 0.0).is_err());
    }

    #[test]
    fn transfer_volume() {
        assert_eq!(transfer_bytes(1), (24, 24));
        let (i, o) = transfer_bytes(16_000_000);
        assert_eq!(i + o, 768_000_000);
    }

    #[test]
    fn kernel_seconds_single_chunk() {
        // 250 x 250 x 256 = 16e6 cells, streamed with halos in one chunk.
        let e = Extents::new(250, 250, 256).unwrap();
        let p = PerfParams::default();
        let s = modeled_kernel_seconds(e, 250, &p).unwrap();
        assert_eq!(s, (252.0 * 252.0 * 256.0 + 1.0) / 300e6);
        assert!((s - 16e6 / 300e6) / s < 0.03);
        let two = PerfParams {
            num_kernels: 2,
            ..p.clone()
        };
        assert_eq!(modeled_kernel_seconds(e, 250, &two).unwrap(), s / 2.0);
        let ddr = PerfParams {
            mem_efficiency: 0.55,
            ..p
        };
        assert!((modeled_kernel_seconds(e, 250, &ddr).unwrap() - s / 0.55).abs() < 1e-15);
    }

    #[test]
    fn narrower_chunks_cost_more() {
        let e = Extents::new(32, 64, 64).unwrap();
        let p = PerfParams::default();
        let wide = modeled_kernel_seconds(e, 64, &p).unwrap();
        let narrow = modeled_kernel_seconds(e, 8, &p).unwrap();
        assert!(narrow > wide);
        assert_eq!(streamed_cycles(e, 8), 8 * (34 * 10 * 64 + 1));
    }

    #[test]
    fn params_validation() {
        let ok = PerfParams::default();
        assert!(ok.validate().is_ok());
        for bad in [
            PerfParams {
                mem_efficiency: 0.0,
                ..ok.clone()
            },
            PerfParams {
                mem_efficiency: 1.5,
                ..ok.clone()
            },
            PerfParams {
                pcie_bw_d2h: -1.0,
                ..ok.clone()
            },
            PerfParams {
                num_kernels: 0,
                ..ok.clone()
            },
            PerfParams {
                clock_hz: f64::NAN,
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidPerfParams(_))));
        }
    }

    #[test]
    fn report_orderings() {
        let e = Extents::new(64, 64, 64).unwrap();
        let params = PerfParams {
            pcie_bw_h2d: 1e9,
            pcie_bw_d2h: 0.5e9,
            ..Default::default()
        };
        let plan = TransferPlan::for_grid(e, 16, 8).unwrap();
        assert_eq!(plan.chunk_cells.iter().sum::<u64>(), plan.total_cells);
        let r = schedule_overlap(&plan, &params, true).unwrap();
        let floor = r
            .transfer_in_seconds
            .max(r.modeled_kernel_seconds)
            .max(r.transfer_out_seconds);
        assert!(r.overlapped_makespan_seconds <= r.serial_makespan_seconds);
        assert!(r.overlapped_makespan_seconds >= floor);
        assert_eq!(r.makespan_seconds, r.overlapped_makespan_seconds);

        let one = TransferPlan::for_grid(e, 16, 1).unwrap();
        let r = schedule_overlap(&one, &params, false).unwrap();
        assert_eq!(r.overlapped_makespan_seconds, r.serial_makespan_seconds);
        assert!(TransferPlan::for_grid(e, 16, 65).is_err());
    }
}
