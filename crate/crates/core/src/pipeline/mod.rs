//! The dataflow engine: read, shift buffer, replicate, advect and write
//! stages running concurrently over bounded streams.
//!
//! The grid is split along X into `num_kernels` slabs, each handled by an
//! independent pipeline instance; within an instance the Y dimension is
//! processed chunk by chunk. The result is bit-identical to
//! [`crate::reference::advect_all`] for every configuration.

mod exec;
mod port;
mod stages;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

use crate::chunk::{plan_chunks, split_even};
use crate::error::{Error, Result};
use crate::grid::{AdvectionCoeffs, Field3D};
use crate::reference::{check_inputs, SourceTerms};
use crate::shift_buffer::{PortPressure, StencilWindow};
use crate::stencil::Component;

use port::{stream, InPort, OutPort, Probe};
use stages::{
    AdvectStage, ReadStage, ReplicateStage, ShiftStage, Slab, Stage, StageReport, WriteStage,
};

/// Stages in one pipeline instance.
pub const STAGES_PER_KERNEL: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Stages run on worker threads; one thread per stage unless capped.
    Concurrent { max_workers: Option<usize> },
    /// All stages are stepped round-robin on the calling thread.
    SingleThreaded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub channel_capacity: usize,
    /// Interior Y cells per chunk.
    pub chunk_width: usize,
    pub num_kernels: usize,
    /// Collect window digests for the replication check.
    pub record_cycle_stats: bool,
    pub exec: ExecMode,
    #[serde(with = "secs")]
    pub stall_timeout: Duration,
    /// Flip one bit of the first `su` result. Test hook.
    pub inject_fault: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            channel_capacity: 64,
            chunk_width: 16,
            num_kernels: 1,
            record_cycle_stats: true,
            exec: ExecMode::Concurrent { max_workers: None },
            stall_timeout: Duration::from_secs(10),
            inject_fault: false,
        }
    }
}

mod secs {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channel_capacity < 1 {
            return Err(Error::InvalidConfig("channel_capacity must be >= 1".into()));
        }
        if self.chunk_width < 1 {
            return Err(Error::InvalidConfig("chunk_width must be >= 1".into()));
        }
        if self.num_kernels < 1 {
            return Err(Error::InvalidConfig("num_kernels must be >= 1".into()));
        }
        if let ExecMode::Concurrent {
            max_workers: Some(0),
        } = self.exec
        {
            return Err(Error::InvalidConfig("max_workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-field window counts seen by producers and consumers, and whether
/// every advect stage saw exactly its upstream shift buffer's sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationCheck {
    /// Windows emitted per field (u, v, w).
    pub produced: [u64; 3],
    /// `consumed[a][f]`: windows of field `f` received by advect stage `a`.
    pub consumed: [[u64; 3]; 3],
    pub sequences_match: bool,
}

/// Logical (not timed) statistics of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleStats {
    /// Values pushed into each field's shift buffers, halos included.
    pub elements_streamed: u64,
    /// Windows emitted per field.
    pub windows_emitted: u64,
    /// Cycles spent filling buffers before their first window.
    pub warmup_cycles: u64,
    /// Cycles from each chunk's first window to its drain.
    pub post_warmup_cycles: u64,
    /// `post_warmup_cycles / windows_emitted`.
    pub achieved_ii: f64,
    pub stage_stall_counts: BTreeMap<String, u64>,
    pub max_port_pressure: PortPressure,
    pub replication: Option<ReplicationCheck>,
}

fn build_stats(reports: &[StageReport], record: bool) -> CycleStats {
    let mut stats = CycleStats {
        elements_streamed: 0,
        windows_emitted: 0,
        warmup_cycles: 0,
        post_warmup_cycles: 0,
        achieved_ii: 1.0,
        stage_stall_counts: BTreeMap::new(),
        max_port_pressure: PortPressure::default(),
        replication: None,
    };
    let mut produced = [0u64; 3];
    let mut consumed = [[0u64; 3]; 3];
    let mut producer_digests: BTreeMap<(String, Component), u64> = BTreeMap::new();
    let mut consumer_digests: Vec<(String, [u64; 3])> = Vec::new();

    for r in reports {
        stats.stage_stall_counts.insert(r.name.clone(), r.stalls);
        let kernel = r.name.split('.').next().unwrap_or_default().to_owned();
        let p = r.pressure;
        stats.max_port_pressure.slices = stats.max_port_pressure.slices.max(p.slices);
        for s in 0..3 {
            stats.max_port_pressure.rects[s] = stats.max_port_pressure.rects[s].max(p.rects[s]);
        }
        if let Some((field, digest)) = r.produced {
            producer_digests.insert((kernel.clone(), field), digest);
        }
        if r.name.ends_with("shift_u") {
            stats.elements_streamed += r.streamed;
            stats.windows_emitted += r.windows;
            stats.warmup_cycles += r.warmup_cycles;
            stats.post_warmup_cycles += r.post_warmup_cycles;
        }
        for (f, suffix) in ["shift_u", "shift_v", "shift_w"].iter().enumerate() {
            if r.name.ends_with(suffix) {
                produced[f] += r.windows;
            }
        }
        if let Some((which, digests, received)) = r.consumed {
            for f in 0..3 {
                consumed[which as usize][f] += received[f];
            }
            consumer_digests.push((kernel, digests));
        }
    }
    if stats.windows_emitted > 0 {
        stats.achieved_ii = stats.post_warmup_cycles as f64 / stats.windows_emitted as f64;
    }
    if record {
        let sequences_match = consumer_digests.iter().all(|(kernel, digests)| {
            Component::ALL
                .iter()
                .all(|&f| producer_digests.get(&(kernel.clone(), f)) == Some(&digests[f as usize]))
        });
        stats.replication = Some(ReplicationCheck {
            produced,
            consumed,
            sequences_match,
        });
    }
    stats
}

/// Run the pipeline as configured (including `config.num_kernels`).
pub fn run_pipeline(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
    config: &PipelineConfig,
) -> Result<(SourceTerms, CycleStats)> {
    run_multi_kernel(u, v, w, coeffs, config)
}

/// Split the grid along X into `config.num_kernels` slabs and run one
/// pipeline instance per slab concurrently.
pub fn run_multi_kernel(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
    config: &PipelineConfig,
) -> Result<(SourceTerms, CycleStats)> {
    config.validate()?;
    let e = check_inputs(u, v, w, coeffs)?;
    if config.num_kernels > e.nx {
        return Err(Error::InvalidConfig(format!(
            "{} kernels cannot split nx = {}",
            config.num_kernels, e.nx
        )));
    }
    let plan = plan_chunks(e.ny, config.chunk_width);
    let slabs: Vec<Slab> = split_even(e.nx, config.num_kernels)
        .into_iter()
        .map(|(x_start, x_len)| Slab { x_start, x_len })
        .collect();

    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; e.padded_len()]);
    let mut probes: Vec<Probe> = Vec::new();
    let mut all: Vec<Box<dyn Stage + '_>> = Vec::with_capacity(slabs.len() * STAGES_PER_KERNEL);

    // Carve each output into disjoint per-slab regions, skipping the i = -1 halo plane.
    let mut rest: [&mut [f64]; 3] = out.each_mut().map(|v| &mut v[e.x_stride()..]);
    let cap = config.channel_capacity;
    let record = config.record_cycle_stats;

    for (kid, &slab) in slabs.iter().enumerate() {
        let len = slab.storage_len(e);
        let regions: [&mut [f64]; 3] = std::array::from_fn(|f| {
            let (head, tail) = std::mem::take(&mut rest[f]).split_at_mut(len);
            rest[f] = tail;
            head
        });
        let windows = slab.compute_cells(e);
        let name = |s: &str| format!("k{kid}.{s}");

        let mut read_out = Vec::new();
        let mut shift_in = Vec::new();
        for f in Component::ALL {
            let (tx, rx) = stream(name(&format!("read->shift_{}", f.name())), cap, &mut probes);
            read_out.push(tx);
            shift_in.push(rx);
        }
        let mut shifts: Vec<Box<dyn Stage>> = Vec::new();
        let mut replicates: Vec<Box<dyn Stage>> = Vec::new();
        // advect_in[a]: windows of u, v, w delivered to advect stage a.
        let mut advect_in: [Vec<InPort<StencilWindow>>; 3] = Default::default();
        for (f, shift_rx) in Component::ALL.into_iter().zip(shift_in) {
            let f_name = f.name();
            let (stx, srx) = stream(
                name(&format!("shift_{f_name}->replicate_{f_name}")),
                cap,
                &mut probes,
            );
            shifts.push(Box::new(ShiftStage::new(
                name(&format!("shift_{f_name}")),
                f,
                e.nz,
                slab,
                &plan,
                shift_rx,
                stx,
                record,
            )));
            let outs: [OutPort<StencilWindow>; 3] = std::array::from_fn(|a| {
                let a_name = Component::ALL[a].name();
                let (tx, rx) = stream(
                    name(&format!("replicate_{f_name}->advect_{a_name}")),
                    cap,
                    &mut probes,
                );
                advect_in[a].push(rx);
                tx
            });
            replicates.push(Box::new(ReplicateStage::new(
                name(&format!("replicate_{f_name}")),
                windows,
                srx,
                outs,
            )));
        }
        let mut write_in = Vec::new();
        let mut advects: Vec<Box<dyn Stage>> = Vec::new();
        for (a, inputs) in Component::ALL.into_iter().zip(advect_in) {
            let (tx, rx) = stream(
                name(&format!("advect_{}->write", a.name())),
                cap,
                &mut probes,
            );
            write_in.push(rx);
            advects.push(Box::new(AdvectStage::new(
                name(&format!("advect_{}", a.name())),
                a,
                coeffs,
                e.nz,
                windows,
                into_array(inputs),
                tx,
                record,
                config.inject_fault && kid == 0 && a == Component::U,
            )));
        }
        all.push(Box::new(ReadStage::new(
            name("read"),
            [u, v, w],
            slab,
            &plan,
            into_array(read_out),
        )));
        all.extend(shifts);
        all.extend(replicates);
        all.extend(advects);
        all.push(Box::new(WriteStage::new(
            name("write"),
            e,
            slab,
            &plan,
            regions,
            into_array(write_in),
        )));
    }

    let reports = exec::execute(all, &probes, config.exec, config.stall_timeout)?;
    let stats = build_stats(&reports, record);
    let [su, sv, sw] = out;
    let terms = SourceTerms {
        su: Field3D::from_raw(e, su),
        sv: Field3D::from_raw(e, sv),
        sw: Field3D::from_raw(e, sw),
    };
    Ok((terms, stats))
}

fn into_array<T>(v: Vec<T>) -> [T; 3] {
    v.try_into()
        .unwrap_or_else(|_| unreachable!("three ports per field set"))
}
