//! Mission records and their line-oriented renderings.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::ArtifactClass;
use crate::geometry::Point;
use crate::graph::{PathKind, PlannedPath, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    Execute,
    Reposition,
    Blocked,
    Home,
    Terminated,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Explore => "explore",
            Mode::Execute => "execute",
            Mode::Reposition => "reposition",
            Mode::Blocked => "blocked",
            Mode::Home => "home",
            Mode::Terminated => "terminated",
        }
    }

    /// Whether the state machine may move from `self` to `to`.
    pub fn can_transition(self, to: Mode) -> bool {
        use Mode::*;
        matches!(
            (self, to),
            (Explore, Execute | Reposition | Home) | (Execute, Explore | Blocked | Home) | (Blocked, Explore) | (Reposition, Explore) | (Home, Terminated)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomingReason {
    Budget,
    NoFrontiers,
}

fn p3(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    MissionStarted { position: [f64; 3], home: [f64; 3] },
    ModeChange { from: Mode, to: Mode },
    LocalPlan { path: usize, gain: f64, length: f64, graph_vertices: usize },
    LocalCompletion { graph_vertices: usize },
    FrontiersUpdated { added: Vec<VertexId>, removed: Vec<VertexId>, total: usize },
    FrontierSelected { vertex: VertexId, position: [f64; 3], volume_gain: f64, global_gain: f64, remaining_time: f64, path: usize },
    FrontierReached { vertex: VertexId },
    Blocked { position: [f64; 3], hit: [f64; 3] },
    Reversed { position: [f64; 3], distance: f64 },
    GeofenceAdded { min: [f64; 3], max: [f64; 3], added: bool, pruned_vertices: usize },
    HomingTriggered { reason: HomingReason, remaining_time: f64, time_to_home: f64, path: usize },
    HomeReached { position: [f64; 3] },
    DegenerateRoot { position: [f64; 3], attempt: usize },
    DetectionDiscarded { class: ArtifactClass },
    ArtifactConfirmed { hypothesis: usize, class: ArtifactClass, position: [f64; 3], detections: usize },
    ArtifactReported { hypothesis: usize, class: ArtifactClass, position: [f64; 3] },
    ArtifactScored { hypothesis: usize, artifact: Option<String>, scored: bool },
    AdmissibilityViolation { position: [f64; 3] },
    TimeExpired { position: [f64; 3] },
    TickLimit { ticks: u64 },
    Aborted { reason: String },
}

impl Event {
    pub fn point(p: &Point) -> [f64; 3] {
        p3(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub position: [f64; 3],
    pub heading: f64,
    pub reported: [f64; 3],
    pub mode: Mode,
    pub known_voxels: usize,
    pub distance: f64,
}

pub const METRICS_HEADER: &str = "tick,t,x,y,z,heading,reported_x,reported_y,reported_z,mode,known_voxels,distance";

impl TickRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.1},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{:.4}",
            self.tick,
            self.t,
            self.position[0],
            self.position[1],
            self.position[2],
            self.heading,
            self.reported[0],
            self.reported[1],
            self.reported[2],
            self.mode.as_str(),
            self.known_voxels,
            self.distance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub t: f64,
    pub hypothesis: usize,
    pub class: ArtifactClass,
    pub position: [f64; 3],
    pub scored: bool,
    pub artifact: Option<String>,
    /// Distance to the nearest ground-truth artifact of the reported class.
    pub error: Option<f64>,
}

impl ReportRecord {
    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub id: usize,
    pub t: f64,
    pub kind: PathKind,
    pub gain: f64,
    pub length: f64,
    /// `[x, y, z, heading]` per waypoint.
    pub vertices: Vec<[f64; 4]>,
}

impl PathRecord {
    pub fn new(id: usize, t: f64, path: &PlannedPath) -> Self {
        Self {
            id,
            t,
            kind: path.kind,
            gain: path.gain,
            length: path.length,
            vertices: path.waypoints.iter().map(|w| [w.position.x, w.position.y, w.position.z, w.heading]).collect(),
        }
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("path serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MissionLog {
    pub ticks: Vec<TickRecord>,
    pub events: Vec<EventRecord>,
    pub reports: Vec<ReportRecord>,
    pub paths: Vec<PathRecord>,
    /// Wall-clock seconds per planning iteration. Kept out of the line-oriented outputs.
    pub planning_times: Vec<f64>,
}

fn lines<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    let mut out = String::new();
    for i in items {
        out.push_str(&f(i));
        out.push('\n');
    }
    out
}

impl MissionLog {
    pub fn metrics_csv(&self) -> String {
        format!("{METRICS_HEADER}\n{}", lines(&self.ticks, TickRecord::csv_line))
    }

    pub fn events_jsonl(&self) -> String {
        lines(&self.events, EventRecord::json_line)
    }

    pub fn reports_jsonl(&self) -> String {
        lines(&self.reports, ReportRecord::json_line)
    }

    pub fn paths_jsonl(&self) -> String {
        lines(&self.paths, PathRecord::json_line)
    }

    pub fn events_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.events.iter().filter(move |e| event_name(&e.event) == name)
    }
}

/// The `event` tag of an event as written to the log.
pub fn event_name(e: &Event) -> String {
    match serde_json::to_value(e).expect("event serializes").get("event") {
        Some(serde_json::Value::String(s)) => s.clone(),
        _ => unreachable!("events are internally tagged"),
    }
}

/// Records produced since the previous flush.
#[derive(Debug, Clone, Copy)]
pub struct LogChunk<'a> {
    pub ticks: &'a [TickRecord],
    pub events: &'a [EventRecord],
    pub reports: &'a [ReportRecord],
    pub paths: &'a [PathRecord],
}

pub trait LogSink {
    fn write_chunk(&mut self, chunk: LogChunk<'_>) -> io::Result<()>;
}

/// Discards chunks; the complete log is still returned by the runner.
#[derive(Debug, Default)]
pub struct NullSink;

impl LogSink for NullSink {
    fn write_chunk(&mut self, _chunk: LogChunk<'_>) -> io::Result<()> {
        Ok(())
    }
}

/// Appends chunks to `metrics.csv`, `events.jsonl`, `reports.jsonl` and `paths.jsonl` in a directory.
#[derive(Debug)]
pub struct DirectorySink {
    dir: PathBuf,
    chunks: usize,
}

impl DirectorySink {
    /// Creates the directory and truncates the output files.
    pub fn create(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("metrics.csv"), format!("{METRICS_HEADER}\n"))?;
        for f in ["events.jsonl", "reports.jsonl", "paths.jsonl"] {
            File::create(dir.join(f))?;
        }
        Ok(Self { dir, chunks: 0 })
    }

    pub fn chunks_written(&self) -> usize {
        self.chunks
    }

    fn append(&self, name: &str, text: &str) -> io::Result<()> {
        let mut w = BufWriter::new(OpenOptions::new().append(true).open(self.dir.join(name))?);
        w.write_all(text.as_bytes())?;
        w.flush()
    }
}

impl LogSink for DirectorySink {
    fn write_chunk(&mut self, chunk: LogChunk<'_>) -> io::Result<()> {
        self.append("metrics.csv", &lines(chunk.ticks, TickRecord::csv_line))?;
        self.append("events.jsonl", &lines(chunk.events, EventRecord::json_line))?;
        self.append("reports.jsonl", &lines(chunk.reports, ReportRecord::json_line))?;
        self.append("paths.jsonl", &lines(chunk.paths, PathRecord::json_line))?;
        self.chunks += 1;
        Ok(())
    }
}
