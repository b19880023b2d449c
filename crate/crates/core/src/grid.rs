//! Grid extents, halo-padded scalar fields and advection coefficients.
//!
//! A [`Field3D`] stores `(nx + 2) * (ny + 2) * nz` doubles: one halo cell on
//! each side in X and Y, none in Z. Z is the fastest-varying index, then Y,
//! then X, so a single `(i, j)` column is contiguous and a whole X slab is a
//! contiguous run of the buffer.

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Halo width in X.
pub const HALO_X: usize = 1;
/// Halo width in Y.
pub const HALO_Y: usize = 1;
/// Halo width in Z. Columns carry no Z halo.
pub const HALO_Z: usize = 0;

/// Interior cell counts of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extents {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Extents {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx < 1 || ny < 1 || nz < 2 {
            return Err(Error::InvalidExtents { nx, ny, nz });
        }
        Ok(Self { nx, ny, nz })
    }

    /// Number of interior cells, `nx * ny * nz`.
    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Length of the halo-padded storage.
    pub fn padded_len(&self) -> usize {
        (self.nx + 2 * HALO_X) * (self.ny + 2 * HALO_Y) * self.nz
    }

    /// Linear offset of `(i, j, k)` with `i in -1..=nx`, `j in -1..=ny`,
    /// `k in 0..nz`.
    #[inline]
    pub fn index(&self, i: isize, j: isize, k: usize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize);
        debug_assert!(j >= -1 && j <= self.ny as isize);
        debug_assert!(k < self.nz);
        (((i + 1) as usize) * (self.ny + 2) + (j + 1) as usize) * self.nz + k
    }

    /// Stride between consecutive X planes.
    pub fn x_stride(&self) -> usize {
        (self.ny + 2) * self.nz
    }

    /// Stride between consecutive Y columns.
    pub fn y_stride(&self) -> usize {
        self.nz
    }
}

/// How to fill a fresh field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Constant {
        value: f64,
    },
    /// Every cell holds its own linear storage index.
    Ramp,
    /// Uniform samples in `[low, high]` from a ChaCha8 stream.
    Seeded {
        seed: u64,
        low: f64,
        high: f64,
    },
}

impl Generator {
    pub fn constant(value: f64) -> Self {
        Generator::Constant { value }
    }

    pub fn seeded(seed: u64, low: f64, high: f64) -> Self {
        Generator::Seeded { seed, low, high }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Generator::Constant { value } if !value.is_finite() => Err(Error::InvalidGenerator(
                format!("constant {value} is not finite"),
            )),
            Generator::Seeded { low, high, .. }
                if !(low.is_finite() && high.is_finite() && low <= high) =>
            {
                Err(Error::InvalidGenerator(format!(
                    "seeded range [{low}, {high}] must be finite and ordered"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// A halo-padded double-precision scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    extents: Extents,
    data: Vec<f64>,
}

impl Field3D {
    /// Build a field from a generator. Same generator and extents always
    /// give the same bits.
    pub fn generate(extents: Extents, generator: Generator) -> Result<Self> {
        let extents = Extents::new(extents.nx, extents.ny, extents.nz)?;
        generator.validate()?;
        let len = extents.padded_len();
        let data = match generator {
            Generator::Constant { value } => vec![value; len],
            Generator::Ramp => (0..len).map(|m| m as f64).collect(),
            Generator::Seeded { seed, low, high } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dist = Uniform::new_inclusive(low, high);
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        Self::from_vec(extents, data)
    }

    pub fn zeros(extents: Extents) -> Self {
        Self {
            extents,
            data: vec![0.0; extents.padded_len()],
        }
    }

    /// Wrap an existing buffer, checking its length and that every value is
    /// finite.
    pub fn from_vec(extents: Extents, data: Vec<f64>) -> Result<Self> {
        let extents = Extents::new(extents.nx, extents.ny, extents.nz)?;
        if data.len() != extents.padded_len() {
            return Err(Error::ExtentsMismatch(format!(
                "buffer holds {} values, extents {}x{}x{} need {}",
                data.len(),
                extents.nx,
                extents.ny,
                extents.nz,
                extents.padded_len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { extents, data })
    }

    /// Wrap a buffer produced by a kernel. Only the length is checked.
    pub(crate) fn from_raw(extents: Extents, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), extents.padded_len());
        Self { extents, data }
    }

    pub fn extents(&self) -> Extents {
        self.extents
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize, k: usize) -> f64 {
        self.data[self.extents.index(i, j, k)]
    }

    /// True when both fields hold exactly the same bits.
    pub fn bitwise_eq(&self, other: &Field3D) -> bool {
        self.extents == other.extents
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Largest absolute elementwise difference. Panics on extents mismatch.
    pub fn max_abs_diff(&self, other: &Field3D) -> f64 {
        assert_eq!(self.extents, other.extents);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Opaque caller-supplied advection coefficients.
///
/// `tzc1` and `tzc2` are indexed by the zero-based level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvectionCoeffs {
    pub tcx: f64,
    pub tcy: f64,
    pub tzc1: Vec<f64>,
    pub tzc2: Vec<f64>,
}

impl AdvectionCoeffs {
    pub fn new(tcx: f64, tcy: f64, tzc1: Vec<f64>, tzc2: Vec<f64>) -> Result<Self> {
        let coeffs = Self {
            tcx,
            tcy,
            tzc1,
            tzc2,
        };
        if coeffs.tzc1.len() != coeffs.tzc2.len() {
            return Err(Error::InvalidCoeffs(format!(
                "tzc1 has {} levels, tzc2 has {}",
                coeffs.tzc1.len(),
                coeffs.tzc2.len()
            )));
        }
        let all_finite = [coeffs.tcx, coeffs.tcy]
            .iter()
            .chain(&coeffs.tzc1)
            .chain(&coeffs.tzc2)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidCoeffs("non-finite coefficient".into()));
        }
        Ok(coeffs)
    }

    /// All coefficients equal to one.
    pub fn unit(nz: usize) -> Self {
        Self {
            tcx: 1.0,
            tcy: 1.0,
            tzc1: vec![1.0; nz],
            tzc2: vec![1.0; nz],
        }
    }

    pub fn levels(&self) -> usize {
        self.tzc1.len()
    }

    pub fn check_levels(&self, nz: usize) -> Result<()> {
        if self.tzc1.len() != nz || self.tzc2.len() != nz {
            return Err(Error::ExtentsMismatch(format!(
                "coefficients cover {}/{} levels, grid has nz = {nz}",
                self.tzc1.len(),
                self.tzc2.len()
            )));
        }
        Ok(())
    }

    /// Read coefficients from a JSON document with keys `tcx`, `tcy`,
    /// `tzc1`, `tzc2`.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let raw: AdvectionCoeffs = serde_json::from_str(&text)?;
        Self::new(raw.tcx, raw.tcy, raw.tzc1, raw.tzc2)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Seeded random coefficients, handy for tests that must not depend on
/// special values such as 1.0.
pub fn seeded_coeffs(nz: usize, seed: u64) -> AdvectionCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-2.0, 2.0);
    AdvectionCoeffs {
        tcx: dist.sample(&mut rng),
        tcy: dist.sample(&mut rng),
        tzc1: (0..nz).map(|_| dist.sample(&mut rng)).collect(),
        tzc2: (0..nz).map(|_| dist.sample(&mut rng)).collect(),
    }
}
