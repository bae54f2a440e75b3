//! Inputs shared by the criterion benches.

use ulc_core::oracle::sample_log_concave;
use ulc_core::Seq;

/// Mean targets and support sizes used by the extremal benches.
pub const EXTREMAL_CASES: &[(u64, u64)] = &[(1, 10), (4, 44), (8, 48)];

/// A fixed batch of positive log-concave sequences with 1-4 distinct slopes.
pub fn dof_inputs(count: u64) -> Vec<Seq> {
    (0..count)
        .map(|i| sample_log_concave(13, 1 + (i % 4) as usize, i).expect("valid shape"))
        .collect()
}
