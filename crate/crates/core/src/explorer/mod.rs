//! Concrete interleaving semantics and exhaustive exploration.
//!
//! Each location runs at most one task at a time. `await` suspends the
//! running task and frees its location; `get` on an unresolved future
//! freezes the location until the future resolves. A state is a deadlock
//! when nothing can fire but some task has not finished.

mod compile;
mod machine;
mod search;
mod state;

pub use machine::{Machine, TraceStep, Transition, TransitionKind};
pub use search::{
    explore, explore_from, explore_main, replay, ExplorationReport, ExploreOptions, Limits, SearchOrder, Trace,
    Verdict,
};
pub use state::{Frame, Loc, Origin, Queued, State, Status, Value};
