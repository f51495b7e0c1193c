//! Exact DoF accounting: symbol counts, hop durations, closed forms, bounds and exports.

mod bounds;
mod export;
mod recursion;
mod scaling;
mod theorem;
mod two_hop;

pub use bounds::{m_hop_extension, verify_hop_bounds, HopBoundReport, HopExtension};
pub use export::{hop_rows, write_dof_table_json, write_hop_durations_csv, write_scaling_csv, HopRow};
pub use recursion::{durations, lambda_klj, minimal_n1, n_sequence, n_sequence_product, DurationProfile, SchemeParams};
pub use scaling::{scaling_curve, scaling_point, ScalingPoint, ScalingRecord};
pub use theorem::{
    dof_at, dof_report, endpoint_totals, miso_bc_upper, t1_exact, t1_gamma, t2, t2_alpha_form, DofRecord, DofReport,
};
pub use two_hop::{beta_star, eta2, two_hop_3user, TwoHopRecord, TwoHopResult};
