//! Infinite graphs as lazy adjacency oracles.

mod family;
mod hairy;
mod metric;
mod vertex;

pub use family::{GraphFamily, MaxDegree, Modification, ShellRule};
pub use hairy::{hairy_schedule, HairySchedule, ScheduleMode, DESK_HAIR_CAP};
pub use metric::Distance;
pub use vertex::{Edge, Point, VertexId, ENCODED_LEN, MAX_DIM};
