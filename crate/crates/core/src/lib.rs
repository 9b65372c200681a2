//! Removal of curtaining artifacts (stripes and laminar corruption) from
//! volumetric images.
//!
//! A corrupted volume `f` is split into a clean image `u`, a stripe part `s`
//! that is constant along `y`, and a laminar part `l` that is spread out in
//! the `x`-`y` plane but thin along `z`. The split minimizes a sum of
//! directional total-variation terms under the constraint `u + s + l = f`,
//! `0 <= u <= 1`, and is computed with a primal-dual hybrid gradient scheme.
//!
//! Storage convention used throughout: voxel `(i, j, k)` lives at
//! `i + nx * (j + ny * k)`, i.e. `x` fastest and `z` slowest. This is the
//! same layout as a C-order array of shape `[nz][ny][nx]`.

pub mod diffops;
pub mod error;
pub mod io;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod pipeline;
pub mod prox;
pub mod solver;
pub mod volume;

pub use diffops::{DiffOperator, Model};
pub use error::{Error, ErrorKind, Result};
pub use metrics::MetricsReport;
pub use phantom::{generate_phantom, Phantom, PhantomSpec};
pub use solver::{solve_m1, solve_pdhg, ModelParams, SolveReport};
pub use volume::{Axis, Dims, SplitState, StackedField, Volume};
