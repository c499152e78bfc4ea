//! Hausdorff and fractal dimension bounds from squeezing constants, the
//! constants of the two model equations, and a parameter search.

mod application;
mod formulas;
mod optimize;

pub use application::{
    absorbing_radius, absorbing_time, rde_absorbing_envelope, rde_constants, rde_fractal_m1, rde_hausdorff_m1, rde_m3,
    rfde_constants, rfde_fractal_m1, rfde_hausdorff_m1, EnvelopeParams, M1Choice,
};
pub use formulas::{
    autonomous_bounds, bound_report, eta, fractal_alpha_free, fractal_bound, hausdorff_alpha_free, hausdorff_bound,
    nonautonomous_bounds, zeta, Bound, BoundReport, Infeasibility, SqueezeConstants, Variant,
};
pub use optimize::{fixed, optimize_bound, GridCell, OptimizeReport, Optimum, Target, GRID_POINTS, REFINE_TOL};
