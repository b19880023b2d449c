//! Per-cell source-term expressions shared by the reference sweep and the
//! dataflow advect stages.
//!
//! Both callers feed the same expressions, so their results agree bit for
//! bit as long as they hand in the same neighbour values. The expressions are
//! generic over [`Scalar`] so that they can be evaluated with [`Counted`] to
//! obtain operation counts straight from the code that computes the values.
//!
//! # Source-term definitions
//!
//! Offsets are `(di, dj, dk)` relative to the centre cell; `up` is `+1`
//! except at the column top (`k = nz - 1`), where it is `0`. `tzc1` and
//! `tzc2` are taken at the centre level `k`.
//!
//! ```text
//! su  = tcx * (u[-1,0,0] * (u[0,0,0] + u[-1,0,0]) - u[1,0,0] * (u[0,0,0] + u[1,0,0]))
//! su += tcy * (u[0,-1,0] * (v[0,-1,0] + v[1,-1,0]) - u[0,1,0] * (v[0,0,0] + v[1,0,0]))
//! below the top:
//! su  = su + tzc1 * u[0,0,-1] * (w[0,0,-1] + w[1,0,-1]) - tzc2 * u[0,0,1] * (w[0,0,0] + w[1,0,0])
//! at the top:
//! su  = su + tzc1 * u[0,0,-1] * (w[0,0,-1] + w[1,0,-1])
//!
//! sv  = tcx * (v[-1,0,0] * (u[-1,0,0] + u[-1,1,0]) - v[1,0,0] * (u[0,0,0] + u[0,1,0]))
//! sv += tcy * (v[0,-1,0] * (v[0,0,0] + v[0,-1,0]) - v[0,1,0] * (v[0,0,0] + v[0,1,0]))
//! below the top:
//! sv  = sv + tzc1 * v[0,0,-1] * (w[0,0,-1] + w[0,1,-1]) - tzc2 * v[0,0,1] * (w[0,0,0] + w[0,1,0])
//! at the top:
//! sv  = sv + tzc1 * v[0,0,-1] * (w[0,0,-1] + w[0,1,-1])
//!
//! sw  = tcx * (w[-1,0,0] * (u[-1,0,0] + u[-1,0,up]) - w[1,0,0] * (u[0,0,0] + u[0,0,up]))
//! sw += tcy * (w[0,-1,0] * (v[0,-1,0] + v[0,-1,up]) - w[0,1,0] * (v[0,0,0] + v[0,0,up]))
//! sw  = sw + tzc1 * w[0,0,-1] * (w[0,0,0] + w[0,0,-1]) - tzc2 * w[0,0,up] * (w[0,0,0] + w[0,0,up])
//! ```
//!
//! Every `a + b * c * d - e * f * g` groups as `(a + ((b * c) * d)) - ((e * f) * g)`.
//! `u` is staggered in X, `v` in Y and `w` in Z (each at the upper face of
//! its cell). Each expression costs 21 operations below the top; at the top
//! `su` and `sv` drop their upper Z flux (17 each) while `sw` closes the
//! column by reusing level `k` for `k + 1` and keeps all 21.

use std::cell::Cell;
use std::ops::{Add, Mul, Sub};

use crate::grid::AdvectionCoeffs;

/// Arithmetic the source expressions need.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

/// An `f64` that counts every `+`, `-` and `*` it takes part in.
///
/// Counts accumulate in a thread-local; use [`count_ops`] to read them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counted(pub f64);

macro_rules! counted_op {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr for Counted {
            type Output = Counted;

            #[inline]
            fn $method(self, rhs: Counted) -> Counted {
                OPS.with(|c| c.set(c.get() + 1));
                Counted(self.0 $op rhs.0)
            }
        }
    };
}

counted_op!(Add, add, +);
counted_op!(Sub, sub, -);
counted_op!(Mul, mul, *);

impl Scalar for Counted {
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }

    fn to_f64(self) -> f64 {
        self.0
    }
}

/// Run `f` and return its result together with the number of [`Counted`]
/// operations it performed on this thread.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = OPS.with(Cell::get);
    let out = f();
    let after = OPS.with(Cell::get);
    (out, after - before)
}

/// One of the three advected velocity components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    U = 0,
    V = 1,
    W = 2,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::U, Component::V, Component::W];

    pub fn name(self) -> &'static str {
        match self {
            Component::U => "u",
            Component::V => "v",
            Component::W => "w",
        }
    }
}

/// Read access to the 3x3x3 neighbourhood of `u`, `v` and `w` around one
/// centre cell.
pub trait Neighborhood {
    fn at(&self, field: Component, di: i8, dj: i8, dk: i8) -> f64;
}

/// Coefficients at the centre level, already lifted into `T`.
#[derive(Debug, Clone, Copy)]
pub struct LevelCoeffs<T> {
    pub tcx: T,
    pub tcy: T,
    pub tzc1: T,
    pub tzc2: T,
}

impl<T: Scalar> LevelCoeffs<T> {
    pub fn at_level(coeffs: &AdvectionCoeffs, k: usize) -> Self {
        Self {
            tcx: T::from_f64(coeffs.tcx),
            tcy: T::from_f64(coeffs.tcy),
            tzc1: T::from_f64(coeffs.tzc1[k]),
            tzc2: T::from_f64(coeffs.tzc2[k]),
        }
    }
}

struct Taps<'a, N>(&'a N);

impl<N: Neighborhood> Taps<'_, N> {
    #[inline(always)]
    fn get<T: Scalar>(&self, f: Component, di: i8, dj: i8, dk: i8) -> T {
        T::from_f64(self.0.at(f, di, dj, dk))
    }
}

#[inline]
pub fn source_u<T: Scalar, N: Neighborhood>(n: &N, c: LevelCoeffs<T>, top: bool) -> T {
    let t = Taps(n);
    let u = |i, j, k| t.get::<T>(Component::U, i, j, k);
    let v = |i, j, k| t.get::<T>(Component::V, i, j, k);
    let w = |i, j, k| t.get::<T>(Component::W, i, j, k);

    let mut s =
        c.tcx * (u(-1, 0, 0) * (u(0, 0, 0) + u(-1, 0, 0)) - u(1, 0, 0) * (u(0, 0, 0) + u(1, 0, 0)));
    s = s + c.tcy
        * (u(0, -1, 0) * (v(0, -1, 0) + v(1, -1, 0)) - u(0, 1, 0) * (v(0, 0, 0) + v(1, 0, 0)));
    if !top {
        s = s + c.tzc1 * u(0, 0, -1) * (w(0, 0, -1) + w(1, 0, -1))
            - c.tzc2 * u(0, 0, 1) * (w(0, 0, 0) + w(1, 0, 0));
    } else {
        s = s + c.tzc1 * u(0, 0, -1) * (w(0, 0, -1) + w(1, 0, -1));
    }
    s
}

#[inline]
pub fn source_v<T: Scalar, N: Neighborhood>(n: &N, c: LevelCoeffs<T>, top: bool) -> T {
    let t = Taps(n);
    let u = |i, j, k| t.get::<T>(Component::U, i, j, k);
    let v = |i, j, k| t.get::<T>(Component::V, i, j, k);
    let w = |i, j, k| t.get::<T>(Component::W, i, j, k);

    let mut s = c.tcx
        * (v(-1, 0, 0) * (u(-1, 0, 0) + u(-1, 1, 0)) - v(1, 0, 0) * (u(0, 0, 0) + u(0, 1, 0)));
    s = s + c.tcy
        * (v(0, -1, 0) * (v(0, 0, 0) + v(0, -1, 0)) - v(0, 1, 0) * (v(0, 0, 0) + v(0, 1, 0)));
    if !top {
        s = s + c.tzc1 * v(0, 0, -1) * (w(0, 0, -1) + w(0, 1, -1))
            - c.tzc2 * v(0, 0, 1) * (w(0, 0, 0) + w(0, 1, 0));
    } else {
        s = s + c.tzc1 * v(0, 0, -1) * (w(0, 0, -1) + w(0, 1, -1));
    }
    s
}

#[inline]
pub fn source_w<T: Scalar, N: Neighborhood>(n: &N, c: LevelCoeffs<T>, top: bool) -> T {
    let t = Taps(n);
    let u = |i, j, k| t.get::<T>(Component::U, i, j, k);
    let v = |i, j, k| t.get::<T>(Component::V, i, j, k);
    let w = |i, j, k| t.get::<T>(Component::W, i, j, k);
    let up: i8 = if top { 0 } else { 1 };

    let mut s = c.tcx
        * (w(-1, 0, 0) * (u(-1, 0, 0) + u(-1, 0, up)) - w(1, 0, 0) * (u(0, 0, 0) + u(0, 0, up)));
    s = s + c.tcy
        * (w(0, -1, 0) * (v(0, -1, 0) + v(0, -1, up)) - w(0, 1, 0) * (v(0, 0, 0) + v(0, 0, up)));
    s = s + c.tzc1 * w(0, 0, -1) * (w(0, 0, 0) + w(0, 0, -1))
        - c.tzc2 * w(0, 0, up) * (w(0, 0, 0) + w(0, 0, up));
    s
}

/// Dispatch on the component.
#[inline]
pub fn source<T: Scalar, N: Neighborhood>(
    which: Component,
    n: &N,
    c: LevelCoeffs<T>,
    top: bool,
) -> T {
    match which {
        Component::U => source_u(n, c, top),
        Component::V => source_v(n, c, top),
        Component::W => source_w(n, c, top),
    }
}

/// Operation count of one component's expression, measured by evaluating it
/// with [`Counted`].
pub fn ops_per_cell(which: Component, top: bool) -> u64 {
    struct Ones;
    impl Neighborhood for Ones {
        fn at(&self, _: Component, _: i8, _: i8, _: i8) -> f64 {
            1.0
        }
    }
    let c = LevelCoeffs {
        tcx: Counted(1.0),
        tcy: Counted(1.0),
        tzc1: Counted(1.0),
        tzc2: Counted(1.0),
    };
    count_ops(|| source(which, &Ones, c, top)).1
}
