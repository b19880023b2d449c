//! Software model of a streaming dataflow accelerator for Piacsek-Williams
//! advection: reference kernel, 3D shift buffer, chunked multi-stage
//! pipeline and an analytic performance model.

pub mod chunk;
pub mod error;
pub mod grid;
pub mod perf;
pub mod pipeline;
pub mod pwaf;
pub mod reference;
pub mod shift_buffer;
pub mod stencil;

pub use chunk::{plan_chunks, Chunk, ChunkPlan};
pub use error::{Error, Result};
pub use grid::{AdvectionCoeffs, Extents, Field3D, Generator};
pub use perf::{schedule_overlap, theoretical_gflops, PerfParams, PerfReport, TransferPlan};
pub use pipeline::{run_multi_kernel, run_pipeline, CycleStats, ExecMode, PipelineConfig};
pub use pwaf::{read_field, write_field};
pub use reference::{
    advect_all, advect_u, advect_v, advect_w, count_flops, FlopCount, SourceTerms,
};
pub use shift_buffer::{ShiftBuffer, StencilWindow};
pub use stencil::Component;
