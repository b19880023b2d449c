//! Three-tier 3D shift buffer turning a value stream into 27-point windows.
//!
//! Values arrive X-outer, Y-middle, Z-inner over a chunk of `yc` Y cells
//! (halos included) and `zc` levels. Storage is split into three tiers:
//!
//! * a `3 x yc x zc` array holding the three most recent X slices. One
//!   address holds the X triple of a `(y, z)` position, so a push is one read
//!   and one write.
//! * per slice, a `zc x 3` rectangle holding the three most recent Y columns
//!   of every level (again one read and one write per push).
//! * per slice, a `3 x 3` register block holding three levels of the
//!   rectangle. Registers are not counted against the port budget.
//!
//! After the push of chunk position `p` the register blocks hold the
//! neighbourhood of position `p - S` with `S = yc * zc + zc + 1`. A window is
//! emitted whenever that position is a compute centre: `x >= 1`,
//! `1 <= y <= yc - 2`, `1 <= z <= zc - 1`. The column top has no level above
//! it; its `dz = +1` plane repeats the `dz = 0` plane. The last top centre of
//! a chunk falls one cycle past the final push and is released by
//! [`ShiftBuffer::drain`].

use crate::error::{Error, Result};

/// One 3x3x3 neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilWindow {
    /// Indexed by [`StencilWindow::slot`].
    pub values: [f64; 27],
    /// Chunk-local `(x, y, z)` of the centre cell.
    pub center: (usize, usize, usize),
}

impl StencilWindow {
    #[inline(always)]
    pub fn slot(dx: i8, dy: i8, dz: i8) -> usize {
        (((dx + 1) * 3 + (dy + 1)) * 3 + (dz + 1)) as usize
    }

    #[inline(always)]
    pub fn get(&self, dx: i8, dy: i8, dz: i8) -> f64 {
        self.values[Self::slot(dx, dy, dz)]
    }
}

/// Worst per-cycle access count seen on each port-limited array.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PortPressure {
    pub slices: u32,
    pub rects: [u32; 3],
}

impl PortPressure {
    pub fn max(&self) -> u32 {
        self.rects.iter().copied().fold(self.slices, u32::max)
    }
}

/// Accesses on each logical array during one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CycleAccess {
    pub slices: (u32, u32),
    pub rects: [(u32, u32); 3],
}

impl CycleAccess {
    fn pressure(&self) -> PortPressure {
        PortPressure {
            slices: self.slices.0 + self.slices.1,
            rects: self.rects.map(|(r, w)| r + w),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShiftBuffer {
    yc: usize,
    zc: usize,
    xc: Option<usize>,
    /// `(y, z)` -> values of slices x, x-1, x-2.
    slices: Vec<[f64; 3]>,
    /// Per slice: `z` -> values of columns y, y-1, y-2.
    rects: [Vec<[f64; 3]>; 3],
    /// Per slice: rows z-2, z-1, z, each holding columns y, y-1, y-2.
    regs: [[[f64; 3]; 3]; 3],
    pushed: u64,
    cycles: u64,
    emitted: u64,
    drained: bool,
    peak: PortPressure,
    trace: Option<Vec<CycleAccess>>,
}

impl ShiftBuffer {
    /// Buffer for an unbounded stream of `yc x zc` faces.
    pub fn new(yc: usize, zc: usize) -> Result<Self> {
        if yc < 3 || zc < 2 {
            return Err(Error::ShiftBuffer(format!(
                "need yc >= 3 and zc >= 2 to form a window, got yc = {yc}, zc = {zc}"
            )));
        }
        Ok(Self {
            yc,
            zc,
            xc: None,
            slices: vec![[0.0; 3]; yc * zc],
            rects: std::array::from_fn(|_| vec![[0.0; 3]; zc]),
            regs: [[[0.0; 3]; 3]; 3],
            pushed: 0,
            cycles: 0,
            emitted: 0,
            drained: false,
            peak: PortPressure::default(),
            trace: None,
        })
    }

    /// Buffer for a chunk of exactly `xc` faces; pushing more is an error.
    pub fn for_chunk(xc: usize, yc: usize, zc: usize) -> Result<Self> {
        if xc < 3 {
            return Err(Error::ShiftBuffer(format!("need xc >= 3, got {xc}")));
        }
        let mut b = Self::new(yc, zc)?;
        b.xc = Some(xc);
        Ok(b)
    }

    /// Keep a per-cycle access log (memory grows with the stream).
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn yc(&self) -> usize {
        self.yc
    }

    pub fn zc(&self) -> usize {
        self.zc
    }

    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Pushes plus drain cycles.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Offset between the newest pushed position and the window centre.
    pub fn lag(&self) -> usize {
        lag(self.yc, self.zc)
    }

    /// Number of scalars held across all three tiers.
    pub fn footprint(&self) -> usize {
        footprint(self.yc, self.zc)
    }

    pub fn stream_len(&self) -> Option<u64> {
        self.xc.map(|xc| (xc * self.yc * self.zc) as u64)
    }

    pub fn access_trace(&self) -> Option<&[CycleAccess]> {
        self.trace.as_deref()
    }

    /// Highest per-cycle access count seen on each port-limited array.
    /// Zero before the first push.
    pub fn max_port_pressure(&self) -> PortPressure {
        self.peak
    }

    /// Consume one value; returns the window that became complete, if any.
    pub fn push(&mut self, value: f64) -> Result<Option<StencilWindow>> {
        if self.drained {
            return Err(Error::ShiftBuffer("push after drain".into()));
        }
        if let Some(len) = self.stream_len() {
            if self.pushed >= len {
                return Err(Error::ShiftBuffer(format!(
                    "push beyond end of a {len}-value chunk stream"
                )));
            }
        }
        let face = self.yc * self.zc;
        let pos = self.pushed as usize;
        let yz = pos % face;
        let z = yz % self.zc;
        let mut acc = CycleAccess::default();

        let old = self.slices[yz];
        acc.slices.0 += 1;
        let word = [value, old[0], old[1]];
        self.slices[yz] = word;
        acc.slices.1 += 1;

        for s in 0..3 {
            let row = self.rects[s][z];
            acc.rects[s].0 += 1;
            let row = [word[s], row[0], row[1]];
            self.rects[s][z] = row;
            acc.rects[s].1 += 1;

            let regs = &mut self.regs[s];
            regs[0] = regs[1];
            regs[1] = regs[2];
            regs[2] = row;
        }

        self.record(acc);
        self.pushed += 1;
        Ok(self.finish_cycle(pos, false))
    }

    /// Run one cycle without input. Releases the final top-of-column window
    /// of a chunk once every value has been pushed.
    pub fn drain(&mut self) -> Result<Option<StencilWindow>> {
        if let Some(len) = self.stream_len() {
            if self.pushed != len {
                return Err(Error::ShiftBuffer(format!(
                    "drain after {} of {len} values",
                    self.pushed
                )));
            }
        }
        if self.drained {
            return Ok(None);
        }
        self.drained = true;
        for regs in &mut self.regs {
            regs[0] = regs[1];
            regs[1] = regs[2];
        }
        self.record(CycleAccess::default());
        Ok(self.finish_cycle(self.pushed as usize, true))
    }

    fn record(&mut self, acc: CycleAccess) {
        let p = acc.pressure();
        self.peak.slices = self.peak.slices.max(p.slices);
        for s in 0..3 {
            self.peak.rects[s] = self.peak.rects[s].max(p.rects[s]);
        }
        if let Some(t) = &mut self.trace {
            t.push(acc);
        }
        self.cycles += 1;
    }

    fn finish_cycle(&mut self, pos: usize, draining: bool) -> Option<StencilWindow> {
        let center = pos.checked_sub(self.lag())?;
        let face = self.yc * self.zc;
        let (x, y, z) = (center / face, (center % face) / self.zc, center % self.zc);
        let top = z == self.zc - 1;
        let compute = x >= 1 && (1..=self.yc - 2).contains(&y) && z >= 1;
        if !compute || (draining && !top) {
            return None;
        }
        let above = if top { 1 } else { 2 };
        let mut values = [0.0; 27];
        for dx in -1i8..=1 {
            let regs = &self.regs[(1 - dx) as usize];
            for dy in -1i8..=1 {
                let col = (1 - dy) as usize;
                values[StencilWindow::slot(dx, dy, -1)] = regs[0][col];
                values[StencilWindow::slot(dx, dy, 0)] = regs[1][col];
                values[StencilWindow::slot(dx, dy, 1)] = regs[above][col];
            }
        }
        self.emitted += 1;
        Some(StencilWindow {
            values,
            center: (x, y, z),
        })
    }
}

/// `yc * zc + zc + 1`: stream distance from a centre to its `(+1, +1, +1)`
/// neighbour.
pub fn lag(yc: usize, zc: usize) -> usize {
    yc * zc + zc + 1
}

/// Pushes up to and including the first emitted window.
pub fn warmup_pushes(yc: usize, zc: usize) -> usize {
    2 * lag(yc, zc) + 1
}

pub fn footprint(yc: usize, zc: usize) -> usize {
    3 * yc * zc + 3 * zc * 3 + 3 * 9
}

/// Number of windows a full chunk produces.
pub fn windows_per_chunk(xc: usize, yc: usize, zc: usize) -> usize {
    (xc - 2) * (yc - 2) * (zc - 1)
}
