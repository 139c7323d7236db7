//! Instance segmentation scoring: contingency tables, injective IoU
//! matching, IPQ with optional recall and paired significance tests.

pub mod assignment;
pub mod contingency;
pub mod ipq;
pub mod stats;

pub use assignment::{injective_match, match_sparse};
pub use contingency::{contingency, Contingency};
pub use ipq::{ipq_from_table, ipq_sparse, match_instances, InstanceScore, IpqOptions, IpqReport, MatchTable, MatchedPair};
pub use stats::{mean_and_sem, paired_t_test, t_two_sided_p, TTest};
