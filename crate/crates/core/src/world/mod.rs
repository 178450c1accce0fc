//! Maze environments, the raycast sensor and pre-planned trajectories.

pub mod maze;
pub mod sensor;
pub mod trajectory;

pub use maze::{parse_maze, MazeMap};
pub use sensor::{
    cast_ray, gt_accumulated_local, observe_in_frame, observe_local, raycast, three_valued, view_from_scan,
    Accumulator, DepthScan, LocalView, ObservationCorruption, Observed, SensorConfig,
};
pub use trajectory::{load_trajectory, Trajectory, TrajectoryBuilder};
