//! The stages of one pipeline instance:
//!
//! ```text
//!          +-> shift u -> replicate u --+--> advect u --+
//! read ----+-> shift v -> replicate v --+--> advect v --+--> write
//!          +-> shift w -> replicate w --+--> advect w --+
//! ```
//!
//! Every replicate stage feeds all three advect stages. Each stage is a
//! resumable state machine: [`Stage::step`] does at most one unit of work
//! and reports whether it progressed, is blocked on a stream, or is done.

use std::time::Duration;

use crate::chunk::ChunkPlan;
use crate::error::{Error, Result};
use crate::grid::{AdvectionCoeffs, Extents, Field3D};
use crate::shift_buffer::{self, PortPressure, ShiftBuffer, StencilWindow};
use crate::stencil::{self, Component, LevelCoeffs, Neighborhood};

use super::port::{InPort, OutPort};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Progress,
    Blocked,
    Done,
}

/// Per-stage numbers folded into [`super::CycleStats`].
#[derive(Debug, Default, Clone)]
pub(crate) struct StageReport {
    pub name: String,
    pub stalls: u64,
    pub streamed: u64,
    pub windows: u64,
    pub warmup_cycles: u64,
    pub post_warmup_cycles: u64,
    pub pressure: PortPressure,
    /// Producer-side digest of a shift buffer's window sequence.
    pub produced: Option<(Component, u64)>,
    /// Consumer-side digests and counts, indexed by input field.
    pub consumed: Option<(Component, [u64; 3], [u64; 3])>,
}

pub(crate) trait Stage: Send {
    fn name(&self) -> &str;
    fn step(&mut self, wait: Option<Duration>) -> Result<Step>;
    fn report(&self) -> StageReport;
}

/// X range handled by one pipeline instance, in interior indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Slab {
    pub x_start: usize,
    pub x_len: usize,
}

impl Slab {
    /// Storage offset of the slab's first interior X plane.
    pub fn base(&self, e: Extents) -> usize {
        e.index(self.x_start as isize, -1, 0)
    }

    pub fn storage_len(&self, e: Extents) -> usize {
        self.x_len * e.x_stride()
    }

    pub fn compute_cells(&self, e: Extents) -> u64 {
        (self.x_len * e.ny * (e.nz - 1)) as u64
    }
}

/// Order-sensitive FNV-1a digest of a window sequence.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Digest(u64);

impl Default for Digest {
    fn default() -> Self {
        Digest(0xcbf2_9ce4_8422_2325)
    }
}

impl Digest {
    fn mix(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn window(&mut self, w: &StencilWindow) {
        self.mix(w.center.0 as u64);
        self.mix(w.center.1 as u64);
        self.mix(w.center.2 as u64);
        for v in w.values {
            self.mix(v.to_bits());
        }
    }
}

/// Halo-inclusive stream positions of a slab, chunk by chunk, as storage
/// indices in X-outer, Y-middle, Z-inner order.
fn stream_indices(e: Extents, slab: Slab, plan: &ChunkPlan) -> impl Iterator<Item = usize> + Send {
    let chunks = plan.chunks.clone();
    chunks.into_iter().flat_map(move |c| {
        let (j0, j1) = c.streamed_span();
        let i0 = slab.x_start as isize - 1;
        let i1 = (slab.x_start + slab.x_len) as isize;
        (i0..=i1).flat_map(move |i| {
            (j0..=j1).flat_map(move |j| {
                let base = e.index(i, j, 0);
                base..base + e.nz
            })
        })
    })
}

/// Storage indices of the computed cells of a slab, in window order.
fn compute_indices(e: Extents, slab: Slab, plan: &ChunkPlan) -> impl Iterator<Item = usize> + Send {
    let chunks = plan.chunks.clone();
    chunks.into_iter().flat_map(move |c| {
        (slab.x_start..slab.x_start + slab.x_len).flat_map(move |i| {
            (c.y_start..c.y_start + c.y_interior).flat_map(move |j| {
                let base = e.index(i as isize, j as isize, 0);
                base + 1..base + e.nz
            })
        })
    })
}

pub(crate) struct ReadStage<'a> {
    name: String,
    fields: [&'a Field3D; 3],
    cursor: Box<dyn Iterator<Item = usize> + Send + 'a>,
    out: [OutPort<f64>; 3],
    streamed: u64,
}

impl<'a> ReadStage<'a> {
    pub fn new(
        name: String,
        fields: [&'a Field3D; 3],
        slab: Slab,
        plan: &ChunkPlan,
        out: [OutPort<f64>; 3],
    ) -> Self {
        let e = fields[0].extents();
        Self {
            name,
            fields,
            cursor: Box::new(stream_indices(e, slab, plan)),
            out,
            streamed: 0,
        }
    }
}

impl Stage for ReadStage<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, wait: Option<Duration>) -> Result<Step> {
        for port in &mut self.out {
            if !port.flush(wait)? {
                return Ok(Step::Blocked);
            }
        }
        let Some(idx) = self.cursor.next() else {
            return Ok(Step::Done);
        };
        for (port, field) in self.out.iter_mut().zip(self.fields) {
            port.put(field.data()[idx]);
        }
        self.streamed += 1;
        Ok(Step::Progress)
    }

    fn report(&self) -> StageReport {
        StageReport {
            name: self.name.clone(),
            stalls: self.out.iter().map(|p| p.stalls).sum(),
            streamed: self.streamed,
            ..Default::default()
        }
    }
}

pub(crate) struct ShiftStage {
    name: String,
    field: Component,
    chunk_dims: Vec<(usize, usize, usize)>,
    next_chunk: usize,
    buffer: Option<(ShiftBuffer, u64)>,
    input: InPort<f64>,
    out: OutPort<StencilWindow>,
    digest: Option<Digest>,
    report: StageReport,
}

impl ShiftStage {
    pub fn new(
        name: String,
        field: Component,
        nz: usize,
        slab: Slab,
        plan: &ChunkPlan,
        input: InPort<f64>,
        out: OutPort<StencilWindow>,
        record: bool,
    ) -> Self {
        let chunk_dims = plan
            .iter()
            .map(|c| (slab.x_len + 2, c.y_total, nz))
            .collect();
        Self {
            name: name.clone(),
            field,
            chunk_dims,
            next_chunk: 0,
            buffer: None,
            input,
            out,
            digest: record.then(Digest::default),
            report: StageReport {
                name,
                ..Default::default()
            },
        }
    }

    fn emit(&mut self, w: Option<StencilWindow>) {
        if let Some(w) = w {
            if let Some(d) = &mut self.digest {
                d.window(&w);
            }
            self.report.windows += 1;
            self.out.put(w);
        }
    }
}

impl Stage for ShiftStage {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, wait: Option<Duration>) -> Result<Step> {
        if !self.out.flush(wait)? {
            return Ok(Step::Blocked);
        }
        let (buffer, len) = match &mut self.buffer {
            Some(b) => b,
            None => {
                let Some(&(xc, yc, zc)) = self.chunk_dims.get(self.next_chunk) else {
                    return Ok(Step::Done);
                };
                let b = ShiftBuffer::for_chunk(xc, yc, zc)?;
                self.buffer.insert((b, (xc * yc * zc) as u64))
            }
        };
        if buffer.pushed() < *len {
            let Some(v) = self.input.take(wait)? else {
                return Ok(Step::Blocked);
            };
            let w = buffer.push(v)?;
            self.emit(w);
        } else {
            let w = buffer.drain()?;
            let (b, _) = self.buffer.take().unwrap();
            let warmup = shift_buffer::warmup_pushes(b.yc(), b.zc()) as u64 - 1;
            self.report.streamed += b.pushed();
            self.report.warmup_cycles += warmup;
            self.report.post_warmup_cycles += b.cycles() - warmup;
            let p = b.max_port_pressure();
            self.report.pressure.slices = self.report.pressure.slices.max(p.slices);
            for s in 0..3 {
                self.report.pressure.rects[s] = self.report.pressure.rects[s].max(p.rects[s]);
            }
            self.next_chunk += 1;
            self.emit(w);
        }
        Ok(Step::Progress)
    }

    fn report(&self) -> StageReport {
        let mut r = self.report.clone();
        r.stalls = self.input.stalls + self.out.stalls;
        r.produced = self.digest.map(|d| (self.field, d.0));
        r
    }
}

pub(crate) struct ReplicateStage {
    name: String,
    remaining: u64,
    input: InPort<StencilWindow>,
    out: [OutPort<StencilWindow>; 3],
}

impl ReplicateStage {
    pub fn new(
        name: String,
        windows: u64,
        input: InPort<StencilWindow>,
        out: [OutPort<StencilWindow>; 3],
    ) -> Self {
        Self {
            name,
            remaining: windows,
            input,
            out,
        }
    }
}

impl Stage for ReplicateStage {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, wait: Option<Duration>) -> Result<Step> {
        for port in &mut self.out {
            if !port.flush(wait)? {
                return Ok(Step::Blocked);
            }
        }
        if self.remaining == 0 {
            return Ok(Step::Done);
        }
        let Some(w) = self.input.take(wait)? else {
            return Ok(Step::Blocked);
        };
        for port in &mut self.out {
            port.put(w);
        }
        self.remaining -= 1;
        Ok(Step::Progress)
    }

    fn report(&self) -> StageReport {
        StageReport {
            name: self.name.clone(),
            stalls: self.input.stalls + self.out.iter().map(|p| p.stalls).sum::<u64>(),
            ..Default::default()
        }
    }
}

struct WindowSet<'w>([&'w StencilWindow; 3]);

impl Neighborhood for WindowSet<'_> {
    #[inline(always)]
    fn at(&self, field: Component, di: i8, dj: i8, dk: i8) -> f64 {
        self.0[field as usize].get(di, dj, dk)
    }
}

pub(crate) struct AdvectStage {
    name: String,
    which: Component,
    nz: usize,
    levels: Vec<LevelCoeffs<f64>>,
    remaining: u64,
    held: [Option<StencilWindow>; 3],
    inputs: [InPort<StencilWindow>; 3],
    out: OutPort<f64>,
    digests: Option<[Digest; 3]>,
    received: [u64; 3],
    inject_fault: bool,
}

impl AdvectStage {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        which: Component,
        coeffs: &AdvectionCoeffs,
        nz: usize,
        windows: u64,
        inputs: [InPort<StencilWindow>; 3],
        out: OutPort<f64>,
        record: bool,
        inject_fault: bool,
    ) -> Self {
        Self {
            name,
            which,
            nz,
            levels: (0..nz).map(|k| LevelCoeffs::at_level(coeffs, k)).collect(),
            remaining: windows,
            held: [None; 3],
            inputs,
            out,
            digests: record.then(<[Digest; 3]>::default),
            received: [0; 3],
            inject_fault,
        }
    }
}

impl Stage for AdvectStage {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, wait: Option<Duration>) -> Result<Step> {
        if !self.out.flush(wait)? {
            return Ok(Step::Blocked);
        }
        if self.remaining == 0 {
            return Ok(Step::Done);
        }
        for f in 0..3 {
            if self.held[f].is_none() {
                let Some(w) = self.inputs[f].take(wait)? else {
                    return Ok(Step::Blocked);
                };
                if let Some(d) = &mut self.digests {
                    d[f].window(&w);
                }
                self.received[f] += 1;
                self.held[f] = Some(w);
            }
        }
        let [Some(wu), Some(wv), Some(ww)] = std::mem::take(&mut self.held) else {
            unreachable!("all three windows held");
        };
        if wu.center != wv.center || wu.center != ww.center {
            return Err(Error::StageFailed {
                stage: self.name.clone(),
                reason: format!(
                    "window centres disagree: {:?} {:?} {:?}",
                    wu.center, wv.center, ww.center
                ),
            });
        }
        let k = wu.center.2;
        let n = WindowSet([&wu, &wv, &ww]);
        let mut value = stencil::source(self.which, &n, self.levels[k], k == self.nz - 1);
        if self.inject_fault {
            value = f64::from_bits(value.to_bits() ^ 1);
            self.inject_fault = false;
        }
        self.out.put(value);
        self.remaining -= 1;
        Ok(Step::Progress)
    }

    fn report(&self) -> StageReport {
        StageReport {
            name: self.name.clone(),
            stalls: self.inputs.iter().map(|p| p.stalls).sum::<u64>() + self.out.stalls,
            consumed: self
                .digests
                .map(|d| (self.which, d.map(|d| d.0), self.received)),
            ..Default::default()
        }
    }
}

pub(crate) struct WriteStage<'a> {
    name: String,
    base: usize,
    out: [&'a mut [f64]; 3],
    cursor: Box<dyn Iterator<Item = usize> + Send + 'a>,
    current: Option<usize>,
    field: usize,
    inputs: [InPort<f64>; 3],
}

impl<'a> WriteStage<'a> {
    pub fn new(
        name: String,
        e: Extents,
        slab: Slab,
        plan: &ChunkPlan,
        out: [&'a mut [f64]; 3],
        inputs: [InPort<f64>; 3],
    ) -> Self {
        Self {
            name,
            base: slab.base(e),
            out,
            cursor: Box::new(compute_indices(e, slab, plan)),
            current: None,
            field: 0,
            inputs,
        }
    }
}

impl Stage for WriteStage<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, wait: Option<Duration>) -> Result<Step> {
        let idx = match self.current {
            Some(idx) => idx,
            None => match self.cursor.next() {
                Some(idx) => *self.current.insert(idx),
                None => return Ok(Step::Done),
            },
        };
        let Some(v) = self.inputs[self.field].take(wait)? else {
            return Ok(Step::Blocked);
        };
        self.out[self.field][idx - self.base] = v;
        self.field += 1;
        if self.field == 3 {
            self.field = 0;
            self.current = None;
        }
        Ok(Step::Progress)
    }

    fn report(&self) -> StageReport {
        StageReport {
            name: self.name.clone(),
            stalls: self.inputs.iter().map(|p| p.stalls).sum(),
            ..Default::default()
        }
    }
}
