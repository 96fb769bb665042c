//! Pointwise Jacobi-type equations along a Lagrangian path.
//!
//! * [`full`]: the 3×3 operator `(ΛΥ')' + ω₀ × Υ' = 0` and its determinant zeros.
//! * [`reduced`]: the WKB-reduced 2×2 system and the `Tr W = 2` criterion.
//! * [`transport`]: right- and left-translated amplitude equations.
//! * [`index_form`]: discretized index form and its smallest eigenvalue.
//! * [`annulus`]: closed-form solution operator for the annulus example.
//! * [`degeneracy`]: the scalar two-dimensional reduction, which never has
//!   conjugate points.

pub mod annulus;
pub mod degeneracy;
pub mod full;
pub mod index_form;
pub mod reduced;
pub mod transport;

use std::fmt;

pub use annulus::{annulus_det_upsilon, AnnulusSolution};
pub use degeneracy::{two_dim_degeneracy_check, DegeneracyCertificate};
pub use full::{conjugate_times_full, first_conjugate_time_full, solve_full_operator, FullOperatorPath};
pub use index_form::{index_form_lambda, morse_index, IndexFormOptions};
pub use reduced::{
    evolve_w, reduced_coefficients, wkb_conjugate_times, ReducedSystem, WPath, WkbDirection,
};
pub use transport::{solve_left_form, solve_right_form, LeftFormPath, RightFormPath, RightFormState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventMode {
    DetZero3D,
    TraceCrossing,
    TangentialContact,
}

impl EventMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventMode::DetZero3D => "det_zero_3d",
            EventMode::TraceCrossing => "trace_crossing",
            EventMode::TangentialContact => "tangential_contact",
        }
    }
}

impl fmt::Display for EventMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A conjugate time. `kernel` spans the null space of the solution operator:
/// three frame components for the full operator, two `(ξ₁, ξ₂)` components
/// for the reduced one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateEvent {
    pub t: f64,
    pub mode: EventMode,
    pub direction: Option<WkbDirection>,
    pub kernel: Vec<f64>,
}
