//! The two per-round optimisation problems: choosing cluster heads under an
//! RB budget and attaching the other vehicles to heads.
//!
//! Both solvers ship with brute-force oracles in [`oracle`] for testing.

mod heads;
mod matching;
pub mod oracle;
mod v2v;

pub use heads::{select_heads, CandidateInfo, HeadAssignment, HeadSelection};
pub use matching::{compute_zeta, head_deadline, match_vehicles, ClusterAssignment, MatchInstance};
pub use v2v::{allocate_v2v, conservative_share, V2vShare};
