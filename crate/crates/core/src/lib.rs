//! Translation-equivariant factor point processes and balancing allocations
//! for measures on the flat torus `[0, L)^d`.

pub mod alloc;
pub mod error;
pub mod factor;
pub mod genlab;
pub mod harness;
pub mod geometry;
pub mod io;
pub mod measure;
pub mod metric;
pub mod pattern;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::{GridVec, TorusGeometry};
pub use measure::{Atom, Measure, ShiftKind};
pub use metric::{ball_contains, prokhorov, theta_shell_distance, ProkhorovBracket, Shell, ShellDistance};
pub use pattern::PointPattern;
