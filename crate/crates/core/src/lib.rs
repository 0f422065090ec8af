//! Parallel Chung–Lu random graph generation.
//!
//! Nodes carry expected degrees; each pair `{u, v}` becomes an edge with
//! probability `min(w_u w_v / S, 1)`. Candidate edges are visited by
//! geometric skipping, and the node range is split across workers by one of
//! three partitioning schemes (equal counts, round robin, or equal expected
//! cost). Every source node draws from its own random stream, so the output
//! does not depend on the worker count or the scheme.

pub mod analysis;
pub mod comm;
pub mod cost;
pub mod degree_model;
pub mod edge_skip;
pub mod error;
pub mod exact_sum;
pub mod partition;
pub mod runtime;

pub use comm::{run_inproc, Backend, Communicator, InProcComm};
pub use degree_model::{SortPolicy, WeightSequence};
pub use edge_skip::{Edge, EdgeSink};
pub use error::{CommError, Error, Result};
pub use partition::{PartitionPlan, Scheme};
pub use runtime::{run_generate, GenConfig, GenReport};
