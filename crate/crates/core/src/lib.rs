//! Graph-based exploration planning over a volumetric map, with a simulated world,
//! artifact localization and a mission runner.

pub mod artifact;
pub mod dtw;
pub mod geometry;
pub mod global_planner;
pub mod graph;
pub mod local_planner;
pub mod mission;
pub mod path_refiner;
pub mod sensor;
pub mod voxel_map;
pub mod world;

pub use artifact::{Artifact, ArtifactClass, ArtifactHypothesis, Detection, Report};
pub use geometry::{Aabb, Point, Vec3};
pub use global_planner::{GlobalGraph, TimeBudget};
pub use graph::{ExplorationGraph, PathKind, PlannedPath, VertexId};
pub use local_planner::{LocalPlanner, LocalPlannerParams, SamplingMode};
pub use sensor::{GainEvaluator, SensorFrustum};
pub use voxel_map::{LocalBound, RobotConfig, VoxelMap, VoxelState};
pub use world::{RobotClass, RobotModel, World};
