//! Plain triple-loop advection: the oracle the dataflow engine must match.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{AdvectionCoeffs, Extents, Field3D};
use crate::stencil::{self, count_ops, Component, Counted, LevelCoeffs, Neighborhood, Scalar};

/// Source terms for the three velocity components.
///
/// Halo cells and the `k = 0` plane are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerms {
    pub su: Field3D,
    pub sv: Field3D,
    pub sw: Field3D,
}

impl SourceTerms {
    pub fn get(&self, which: Component) -> &Field3D {
        match which {
            Component::U => &self.su,
            Component::V => &self.sv,
            Component::W => &self.sw,
        }
    }

    pub fn bitwise_eq(&self, other: &SourceTerms) -> bool {
        self.su.bitwise_eq(&other.su)
            && self.sv.bitwise_eq(&other.sv)
            && self.sw.bitwise_eq(&other.sw)
    }

    pub fn max_abs_diff(&self, other: &SourceTerms) -> f64 {
        Component::ALL
            .iter()
            .map(|&c| self.get(c).max_abs_diff(other.get(c)))
            .fold(0.0, f64::max)
    }
}

/// Floating-point operation counts for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlopCount {
    pub per_interior_cell: u64,
    pub per_top_cell: u64,
    pub total: u64,
}

struct GridNeighborhood<'a> {
    fields: [&'a Field3D; 3],
    i: isize,
    j: isize,
    k: usize,
}

impl Neighborhood for GridNeighborhood<'_> {
    #[inline(always)]
    fn at(&self, field: Component, di: i8, dj: i8, dk: i8) -> f64 {
        let k = (self.k as isize + dk as isize) as usize;
        self.fields[field as usize].get(self.i + di as isize, self.j + dj as isize, k)
    }
}

pub(crate) fn check_inputs(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<Extents> {
    let e = u.extents();
    if v.extents() != e || w.extents() != e {
        return Err(Error::ExtentsMismatch(format!(
            "u is {}x{}x{}, v is {:?}, w is {:?}",
            e.nx,
            e.ny,
            e.nz,
            v.extents(),
            w.extents()
        )));
    }
    coeffs.check_levels(e.nz)?;
    Ok(e)
}

/// Visit every computed cell in loop order (i outer, k inner), handing the
/// storage index and the value of the requested source term to `sink`.
fn sweep<T: Scalar>(
    which: Component,
    fields: [&Field3D; 3],
    coeffs: &AdvectionCoeffs,
    mut sink: impl FnMut(usize, T),
) {
    let e = fields[0].extents();
    for i in 0..e.nx as isize {
        for j in 0..e.ny as isize {
            for k in 1..e.nz {
                let n = GridNeighborhood { fields, i, j, k };
                let c = LevelCoeffs::<T>::at_level(coeffs, k);
                sink(
                    e.index(i, j, k),
                    stencil::source(which, &n, c, k == e.nz - 1),
                );
            }
        }
    }
}

fn advect(
    which: Component,
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<Field3D> {
    let e = check_inputs(u, v, w, coeffs)?;
    let mut out = vec![0.0; e.padded_len()];
    sweep::<f64>(which, [u, v, w], coeffs, |idx, val| out[idx] = val);
    Ok(Field3D::from_raw(e, out))
}

pub fn advect_u(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<Field3D> {
    advect(Component::U, u, v, w, coeffs)
}

pub fn advect_v(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<Field3D> {
    advect(Component::V, u, v, w, coeffs)
}

pub fn advect_w(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<Field3D> {
    advect(Component::W, u, v, w, coeffs)
}

pub fn advect_all(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<SourceTerms> {
    Ok(SourceTerms {
        su: advect_u(u, v, w, coeffs)?,
        sv: advect_v(u, v, w, coeffs)?,
        sw: advect_w(u, v, w, coeffs)?,
    })
}

/// Static operation counts: each column covers `nz - 1` levels, of which the
/// last is the column top.
pub fn count_flops(extents: Extents) -> FlopCount {
    let per_interior_cell: u64 = Component::ALL
        .iter()
        .map(|&c| stencil::ops_per_cell(c, false))
        .sum();
    let per_top_cell: u64 = Component::ALL
        .iter()
        .map(|&c| stencil::ops_per_cell(c, true))
        .sum();
    let columns = (extents.nx * extents.ny) as u64;
    let interior_levels = extents.nz as u64 - 2;
    FlopCount {
        per_interior_cell,
        per_top_cell,
        total: columns * (interior_levels * per_interior_cell + per_top_cell),
    }
}

/// Run the full reference sweep with counting arithmetic and return the
/// total number of operations executed. The counted values are checked
/// against the plain `f64` sweep bit for bit.
pub fn instrumented_flops(
    u: &Field3D,
    v: &Field3D,
    w: &Field3D,
    coeffs: &AdvectionCoeffs,
) -> Result<u64> {
    let plain = advect_all(u, v, w, coeffs)?;
    let mut total = 0;
    for which in Component::ALL {
        let expected = plain.get(which).data();
        let mut mismatch = None;
        let ((), ops) = count_ops(|| {
            sweep::<Counted>(which, [u, v, w], coeffs, |idx, val| {
                if val.0.to_bits() != expected[idx].to_bits() {
                    mismatch.get_or_insert(idx);
                }
            })
        });
        if let Some(idx) = mismatch {
            return Err(Error::StageFailed {
                stage: format!("instrumented {}", which.name()),
                reason: format!("counted value differs at index {idx}"),
            });
        }
        total += ops;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{seeded_coeffs, Generator};

    fn fields(e: Extents, seed: u64) -> (Field3D, Field3D, Field3D) {
        let g = |s| Field3D::generate(e, Generator::seeded(s, -1.0, 1.0)).unwrap();
        (g(seed), g(seed + 1), g(seed + 2))
    }

    #[test]
    fn zero_inputs_give_zero_sources() {
        let e = Extents::new(4, 3, 5).unwrap();
        let z = Field3D::zeros(e);
        let s = advect_all(&z, &z, &z, &seeded_coeffs(5, 1)).unwrap();
        for c in Component::ALL {
            assert!(s.get(c).data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn constant_u_cancels() {
        let e = Extents::new(5, 5, 5).unwrap();
        let u = Field3D::generate(e, Generator::constant(0.75)).unwrap();
        let z = Field3D::zeros(e);
        let su = advect_u(&u, &z, &z, &AdvectionCoeffs::unit(5)).unwrap();
        assert!(su.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn halo_and_bottom_plane_stay_zero() {
        let e = Extents::new(3, 4, 4).unwrap();
        let (u, v, w) = fields(e, 11);
        let s = advect_all(&u, &v, &w, &seeded_coeffs(4, 2)).unwrap();
        for c in Component::ALL {
            let f = s.get(c);
            for i in -1..=e.nx as isize {
                for j in -1..=e.ny as isize {
                    for k in 0..e.nz {
                        let interior =
                            i >= 0 && i < e.nx as isize && j >= 0 && j < e.ny as isize && k >= 1;
                        if !interior {
                            assert_eq!(f.get(i, j, k), 0.0, "{c:?} ({i},{j},{k})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = Field3D::zeros(Extents::new(2, 2, 3).unwrap());
        let b = Field3D::zeros(Extents::new(2, 3, 3).unwrap());
        assert!(matches!(
            advect_all(&a, &b, &a, &AdvectionCoeffs::unit(3)),
            Err(Error::ExtentsMismatch(_))
        ));
        assert!(matches!(
            advect_all(&a, &a, &a, &AdvectionCoeffs::unit(4)),
            Err(Error::ExtentsMismatch(_))
        ));
    }

    #[test]
    fn flop_counts() {
        let c = count_flops(Extents::new(1, 1, 64).unwrap());
        assert_eq!(c.per_interior_cell, 63);
        assert_eq!(c.per_top_cell, 55);
        assert_eq!(c.total, 62 * 63 + 55);

        let c = count_flops(Extents::new(1, 1, 2).unwrap());
        assert_eq!(c.total, 55);

        let c = count_flops(Extents::new(4, 4, 8).unwrap());
        assert_eq!(c.total, 16 * (6 * 63 + 55));
    }

    #[test]
    fn instrumented_matches_static_count() {
        let e = Extents::new(4, 4, 8).unwrap();
        let (u, v, w) = fields(e, 5);
        let n = instrumented_flops(&u, &v, &w, &seeded_coeffs(8, 5)).unwrap();
        assert_eq!(n, count_flops(e).total);
    }
}
