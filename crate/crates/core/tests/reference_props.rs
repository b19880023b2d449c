use advectflow_core::grid::seeded_coeffs;
use advectflow_core::reference::instrumented_flops;
use advectflow_core::{advect_all, count_flops, Extents, Field3D, Generator};
use proptest::prelude::*;

fn fields(e: Extents, seed: u64) -> [Field3D; 3] {
    [0, 1, 2].map(|s| Field3D::generate(e, Generator::seeded(seed + s, -1.0, 1.0)).unwrap())
}

fn scaled(f: &Field3D, by: f64) -> Field3D {
    Field3D::from_vec(f.extents(), f.data().iter().map(|v| v * by).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Every term is a product of two field values, so scaling all fields by
    /// a power of two scales the result by its square exactly.
    #[test]
    fn quadratic_in_the_fields(nx in 1usize..6, ny in 1usize..6, nz in 2usize..7, seed: u64, p in -4i32..5) {
        let e = Extents::new(nx, ny, nz).unwrap();
        let [u, v, w] = fields(e, seed);
        let c = seeded_coeffs(nz, seed);
        let base = advect_all(&u, &v, &w, &c).unwrap();
        let lambda = 2f64.powi(p);
        let big = advect_all(&scaled(&u, lambda), &scaled(&v, lambda), &scaled(&w, lambda), &c).unwrap();
        for (a, b) in [(&base.su, &big.su), (&base.sv, &big.sv), (&base.sw, &big.sw)] {
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert_eq!((x * lambda * lambda).to_bits(), y.to_bits());
            }
        }
    }

    /// A change to one input cell only reaches outputs within one cell of it.
    #[test]
    fn stencil_is_local(nx in 3usize..7, ny in 3usize..7, nz in 3usize..7, seed: u64, f in 0usize..3) {
        let e = Extents::new(nx, ny, nz).unwrap();
        let mut inputs = fields(e, seed);
        let c = seeded_coeffs(nz, seed);
        let base = advect_all(&inputs[0], &inputs[1], &inputs[2], &c).unwrap();
        let (pi, pj, pk) = (nx as isize / 2, ny as isize / 2, nz / 2);
        let mut data = inputs[f].data().to_vec();
        data[e.index(pi, pj, pk)] += 10.0;
        inputs[f] = Field3D::from_vec(e, data).unwrap();
        let moved = advect_all(&inputs[0], &inputs[1], &inputs[2], &c).unwrap();
        for (a, b) in [(&base.su, &moved.su), (&base.sv, &moved.sv), (&base.sw, &moved.sw)] {
            for i in -1..=nx as isize {
                for j in -1..=ny as isize {
                    for k in 0..nz {
                        let near = (i - pi).abs() <= 1 && (j - pj).abs() <= 1 && (k as isize - pk as isize).abs() <= 1;
                        if !near {
                            prop_assert_eq!(a.get(i, j, k).to_bits(), b.get(i, j, k).to_bits());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn instrumented_counts_match_static_counts() {
    for (nx, ny, nz) in [(1, 1, 2), (1, 1, 64), (3, 5, 7)] {
        let e = Extents::new(nx, ny, nz).unwrap();
        let [u, v, w] = fields(e, 5);
        let counted = instrumented_flops(&u, &v, &w, &seeded_coeffs(nz, 5)).unwrap();
        let columns = (nx * ny) as u64;
        assert_eq!(counted, columns * (63 * (nz as u64 - 2) + 55));
        assert_eq!(counted, count_flops(e).total);
    }
}
