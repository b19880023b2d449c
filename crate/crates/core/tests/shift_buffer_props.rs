use advectflow_core::shift_buffer::{lag, warmup_pushes, windows_per_chunk};
use advectflow_core::{ShiftBuffer, StencilWindow};
use proptest::prelude::*;

fn pos(yc: usize, zc: usize, x: usize, y: usize, z: usize) -> usize {
    (x * yc + y) * zc + z
}

/// Neighbour stream positions of a centre; above the column top the top
/// level stands in.
fn neighbours(
    yc: usize,
    zc: usize,
    c: (usize, usize, usize),
) -> impl Iterator<Item = (usize, usize)> {
    (0..27).map(move |slot| {
        let (dx, dy, dz) = (slot / 9, (slot / 3) % 3, slot % 3);
        let z = (c.2 + dz - 1).min(zc - 1);
        (slot, pos(yc, zc, c.0 + dx - 1, c.1 + dy - 1, z))
    })
}

fn is_centre(xc: usize, yc: usize, zc: usize, x: usize, y: usize, z: usize) -> bool {
    (1..xc - 1).contains(&x) && (1..yc - 1).contains(&y) && (1..zc).contains(&z)
}

/// Pushes needed before any centre has its whole neighbourhood, found by
/// scanning every centre.
fn brute_force_warmup(xc: usize, yc: usize, zc: usize) -> usize {
    let mut best = usize::MAX;
    for x in 0..xc {
        for y in 0..yc {
            for z in 0..zc {
                if is_centre(xc, yc, zc, x, y, z) {
                    let last = neighbours(yc, zc, (x, y, z)).map(|(_, p)| p).max().unwrap();
                    best = best.min(last + 1);
                }
            }
        }
    }
    best
}

struct Run {
    stream: Vec<f64>,
    /// `(cycle, window)`, cycles counted from 1.
    windows: Vec<(usize, StencilWindow)>,
    buffer: ShiftBuffer,
}

fn run(xc: usize, yc: usize, zc: usize, seed: u64) -> Run {
    let stream: Vec<f64> = (0..xc * yc * zc)
        .map(|m| {
            ((m as u64)
                .wrapping_mul(6364136223846793005)
                .wrapping_add(seed)
                >> 11) as f64
        })
        .collect();
    let mut buffer = ShiftBuffer::for_chunk(xc, yc, zc).unwrap().with_trace();
    let mut windows = Vec::new();
    for (n, &v) in stream.iter().enumerate() {
        if let Some(w) = buffer.push(v).unwrap() {
            windows.push((n + 1, w));
        }
    }
    if let Some(w) = buffer.drain().unwrap() {
        windows.push((stream.len() + 1, w));
    }
    Run {
        stream,
        windows,
        buffer,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_match_gather(yc in 3usize..=20, zc in 3usize..=20, xc in 3usize..6, seed: u64) {
        let r = run(xc, yc, zc, seed);
        prop_assert_eq!(r.windows.len(), windows_per_chunk(xc, yc, zc));
        let mut expected_centres = Vec::new();
        for x in 0..xc {
            for y in 0..yc {
                for z in 0..zc {
                    if is_centre(xc, yc, zc, x, y, z) {
                        expected_centres.push((x, y, z));
                    }
                }
            }
        }
        for ((_, w), c) in r.windows.iter().zip(&expected_centres) {
            prop_assert_eq!(w.center, *c);
            for (slot, p) in neighbours(yc, zc, *c) {
                prop_assert_eq!(w.values[slot].to_bits(), r.stream[p].to_bits());
            }
        }
    }

    #[test]
    fn initiation_interval_is_one(yc in 3usize..=20, zc in 3usize..=20, xc in 3usize..6) {
        let r = run(xc, yc, zc, 1);
        // Constant latency from a centre's stream position to its window, so
        // emission gaps are exactly the gaps between centres in the stream.
        for (cycle, w) in &r.windows {
            let (x, y, z) = w.center;
            prop_assert_eq!(*cycle, pos(yc, zc, x, y, z) + lag(yc, zc) + 1);
        }
        for pair in r.windows.windows(2) {
            let (c0, w0) = &pair[0];
            let (c1, w1) = &pair[1];
            let p0 = pos(yc, zc, w0.center.0, w0.center.1, w0.center.2);
            let p1 = pos(yc, zc, w1.center.0, w1.center.1, w1.center.2);
            prop_assert_eq!(c1 - c0, p1 - p0);
            if w0.center.0 == w1.center.0 && w0.center.1 == w1.center.1 {
                prop_assert_eq!(c1 - c0, 1);
            }
        }
        // One cycle per push plus the final drain.
        prop_assert_eq!(r.buffer.cycles() as usize, xc * yc * zc + 1);
    }

    #[test]
    fn port_pressure_at_most_two(yc in 3usize..=20, zc in 3usize..=20, xc in 3usize..5) {
        let r = run(xc, yc, zc, 2);
        let trace = r.buffer.access_trace().unwrap();
        prop_assert_eq!(trace.len() as u64, r.buffer.cycles());
        for a in trace {
            prop_assert!(a.slices.0 + a.slices.1 <= 2);
            for (rd, wr) in a.rects {
                prop_assert!(rd + wr <= 2);
            }
        }
        prop_assert!(r.buffer.max_port_pressure().max() <= 2);
    }

    #[test]
    fn warmup_matches_brute_force(yc in 3usize..=20, zc in 2usize..=20) {
        let xc = 3;
        let r = run(xc, yc, zc, 3);
        prop_assert_eq!(r.windows[0].0, warmup_pushes(yc, zc));
        let ready = brute_force_warmup(xc, yc, zc);
        if zc >= 3 {
            prop_assert_eq!(warmup_pushes(yc, zc), ready);
        } else {
            // Every centre is a column top, released one cycle after its
            // clamped neighbourhood is complete.
            prop_assert_eq!(warmup_pushes(yc, zc), ready + 1);
        }
    }
}
