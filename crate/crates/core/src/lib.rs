//! Fractional mass of oriented polygonal 1-currents: Riesz-type energies,
//! first variation and fractional curvature, Fourier-side evaluation,
//! planar fractional perimeter and the approximation of divergence-free
//! fields by weighted closed polygons.

pub mod cellmass;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod loops;
pub mod perimeter;
pub mod point;
pub mod quadrature;
pub mod riesz;
pub mod smirnov;
pub mod spectral;
pub mod variation;

pub use cellmass::fractional_mass_cells;
pub use error::{Error, Result};
pub use field::{field_riesz_energy, FieldSpec};
pub use geometry::{
    boundary, curve_to_current, curves_to_current, default_merge_tol, sample_smooth_curve, transform, BoundaryChain,
    CurveKind, OrientedSegment, PolyCurve, SegmentCurrent,
};
pub use loops::loop_decompose;
pub use perimeter::{boundary_mass_perimeter, fractional_perimeter_mc, PlanarRegion};
pub use point::Point;
pub use riesz::{fractional_mass, kernel, regularized_mass_m1, FracParams, Kernel, QuadConfig};
pub use smirnov::{approximate, ApproxParams, Approximation, Diagnostics};
pub use spectral::{fourier_of_current, riesz_constant, spectral_mass, FourierSample, SpectralConfig};
pub use variation::{first_variation, fractional_curvature, gradient_flow_step, Perturbation};
