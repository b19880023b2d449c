//! Y-dimension chunking with a one-cell halo on each side of every chunk.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Chunk {
    /// First interior Y index covered by this chunk.
    pub y_start: usize,
    /// Interior Y cells in this chunk.
    pub y_interior: usize,
    /// Y cells streamed, including one halo cell on each side.
    pub y_total: usize,
}

impl Chunk {
    /// First streamed global Y index (a halo cell, so `y_start - 1`).
    pub fn first_streamed_j(&self) -> isize {
        self.y_start as isize - 1
    }

    /// Halo-inclusive global Y range, as `first..=last`.
    pub fn streamed_span(&self) -> (isize, isize) {
        let first = self.first_streamed_j();
        (first, first + self.y_total as isize - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChunkPlan {
    pub chunks: Vec<Chunk>,
}

impl ChunkPlan {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.iter()
    }

    /// Widest halo-inclusive chunk, which sizes the on-chip buffers.
    pub fn max_y_total(&self) -> usize {
        self.chunks.iter().map(|c| c.y_total).max().unwrap_or(0)
    }
}

/// Split `ny` interior Y cells into chunks of `chunk_width` (the last one
/// possibly shorter). Zero inputs are clamped to one.
pub fn plan_chunks(ny: usize, chunk_width: usize) -> ChunkPlan {
    let ny = ny.max(1);
    let width = chunk_width.clamp(1, ny);
    let chunks = (0..ny)
        .step_by(width)
        .map(|y_start| {
            let y_interior = width.min(ny - y_start);
            Chunk {
                y_start,
                y_interior,
                y_total: y_interior + 2,
            }
        })
        .collect();
    ChunkPlan { chunks }
}

/// Split `n` cells into `parts` contiguous ranges whose lengths differ by at
/// most one, returned as `(start, len)`. The first `n % parts` ranges are
/// the longer ones.
pub fn split_even(n: usize, parts: usize) -> Vec<(usize, usize)> {
    assert!(
        parts >= 1 && parts <= n,
        "cannot split {n} cells into {parts} parts"
    );
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let range = (start, len);
            start += len;
            range
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_chunk() {
        let p = plan_chunks(64, 64);
        assert_eq!(p.len(), 1);
        assert_eq!(p.chunks[0].y_total, 66);
        assert_eq!(p.chunks[0].streamed_span(), (-1, 64));
    }

    #[test]
    fn four_chunks_overlap_by_two() {
        let p = plan_chunks(64, 16);
        let starts: Vec<_> = p.iter().map(|c| c.y_start).collect();
        assert_eq!(starts, [0, 16, 32, 48]);
        for pair in p.chunks.windows(2) {
            let (_, a_last) = pair[0].streamed_span();
            let (b_first, _) = pair[1].streamed_span();
            assert_eq!(a_last - b_first + 1, 2);
        }
    }

    #[test]
    fn remainder_chunk_is_shorter() {
        let widths: Vec<_> = plan_chunks(10, 4).iter().map(|c| c.y_interior).collect();
        assert_eq!(widths, [4, 4, 2]);
    }

    #[test]
    fn degenerate_inputs_clamp() {
        assert_eq!(plan_chunks(5, 0).len(), 5);
        assert_eq!(plan_chunks(0, 3).chunks, plan_chunks(1, 1).chunks);
        assert_eq!(plan_chunks(3, 100).len(), 1);
    }

    #[test]
    fn split_even_balances() {
        assert_eq!(
            split_even(64, 6),
            [(0, 11), (11, 11), (22, 11), (33, 11), (44, 10), (54, 10)]
        );
        assert_eq!(split_even(5, 5).len(), 5);
    }

    proptest! {
        #[test]
        fn split_even_tiles(n in 1usize..500, parts in 1usize..20) {
            prop_assume!(parts <= n);
            let s = split_even(n, parts);
            let mut next = 0;
            for (start, len) in s {
                prop_assert_eq!(start, next);
                prop_assert!(len >= n / parts && len <= n / parts + 1);
                next += len;
            }
            prop_assert_eq!(next, n);
        }
    }
}
