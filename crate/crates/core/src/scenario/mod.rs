//! Traffic scene data model, track-log ingestion, interaction graphs and
//! synthetic scenario generators.

mod archetype;
mod graph;
mod tracks;
mod types;

pub use archetype::{lateral_cut_in_entry_time, make_archetype, Archetype, EGO_ID};
pub use graph::{
    build_graph, graph_for, neighbors_within, relative_geometry, scene_graph, InteractionGraph, EPS_SPEED,
};
pub use tracks::{export_tracks, load_tracks, read_tracks, save_tracks, LoadOptions, TrackSchema};
pub use types::{AgentId, AgentInfo, AgentKind, AgentState, KindTable, Rect, Scenario};
