//! Domain types shared by every solver: tasks, instances, schedules and
//! solve reports, plus the JSON file formats and feasibility checks.
//!
//! Edges are indexed from 0. A task starting at edge `s` with width `w`
//! occupies edges `s, s + 1, ..., s + w - 1`, so a start is valid when
//! `0 ≤ s` and `s + w ≤ W`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::DemandProfile;
use crate::ratio::{self, Rational};

pub type TaskId = u64;

/// A job with an integer duration (`width`, in edges) and demand (`height`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    #[serde(rename = "w")]
    pub width: i64,
    #[serde(rename = "h")]
    pub height: i64,
}

impl Task {
    pub fn new(id: TaskId, width: i64, height: i64) -> Self {
        Task { id, width, height }
    }

    /// `w · h`. Fits in `i64` for every task of a validated instance.
    pub fn area(&self) -> i64 {
        self.width * self.height
    }
}

/// The unvalidated file representation of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    #[serde(rename = "W")]
    pub width: i64,
    pub tasks: Vec<Task>,
}

/// One violated instance invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyPath { width: i64 },
    DuplicateId { id: TaskId },
    WidthTooSmall { id: TaskId, width: i64 },
    WidthExceedsPath { id: TaskId, width: i64, path: i64 },
    NegativeHeight { id: TaskId, height: i64 },
    AreaOverflow,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyPath { width } => write!(f, "path must have at least one edge (W = {width})"),
            Violation::DuplicateId { id } => write!(f, "duplicate task id {id}"),
            Violation::WidthTooSmall { id, width } => write!(f, "task {id}: width {width} < 1"),
            Violation::WidthExceedsPath { id, width, path } => {
                write!(f, "task {id}: width {width} exceeds W = {path}")
            }
            Violation::NegativeHeight { id, height } => write!(f, "task {id}: negative height {height}"),
            Violation::AreaOverflow => write!(f, "total area overflows 64-bit arithmetic"),
        }
    }
}

/// Every invariant a raw instance violates.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid instance: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InstanceError {
    pub violations: Vec<Violation>,
}

/// A validated instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    width: i64,
    tasks: Vec<Task>,
    #[serde(skip)]
    index: HashMap<TaskId, usize>,
    #[serde(skip)]
    area: i64,
}

impl TryFrom<RawInstance> for Instance {
    type Error = InstanceError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        validate_instance(raw)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance { width: inst.width, tasks: inst.tasks }
    }
}

/// Checks every instance invariant, reporting all violations at once.
pub fn validate_instance(raw: RawInstance) -> Result<Instance, InstanceError> {
    let mut violations = Vec::new();
    if raw.width < 1 {
        violations.push(Violation::EmptyPath { width: raw.width });
    }
    let mut seen = BTreeSet::new();
    let mut area: Option<i64> = Some(0);
    for t in &raw.tasks {
        if !seen.insert(t.id) {
            violations.push(Violation::DuplicateId { id: t.id });
        }
        if t.width < 1 {
            violations.push(Violation::WidthTooSmall { id: t.id, width: t.width });
        } else if raw.width >= 1 && t.width > raw.width {
            violations.push(Violation::WidthExceedsPath { id: t.id, width: t.width, path: raw.width });
        }
        if t.height < 0 {
            violations.push(Violation::NegativeHeight { id: t.id, height: t.height });
        }
        area = area.and_then(|a| t.width.checked_mul(t.height).and_then(|x| a.checked_add(x)));
    }
    if violations.is_empty() && area.is_none() {
        violations.push(Violation::AreaOverflow);
    }
    if !violations.is_empty() {
        return Err(InstanceError { violations });
    }
    let index = raw.tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    Ok(Instance { width: raw.width, tasks: raw.tasks, index, area: area.unwrap_or(0) })
}

impl Instance {
    pub fn new(width: i64, tasks: Vec<Task>) -> Result<Self, InstanceError> {
        validate_instance(RawInstance { width, tasks })
    }

    /// Number of edges `W` of the path.
    pub fn width(&self) -> i64 {
        self.width
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.index.get(&id).map(|&i| &self.tasks[i])
    }

    pub fn contains(&self, id: TaskId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> BTreeSet<TaskId> {
        self.tasks.iter().map(|t| t.id).collect()
    }

    /// Total area `a(𝓘)`.
    pub fn area(&self) -> i64 {
        self.area
    }

    pub fn h_max(&self) -> i64 {
        self.tasks.iter().map(|t| t.height).max().unwrap_or(0)
    }

    pub fn w_max(&self) -> i64 {
        self.tasks.iter().map(|t| t.width).max().unwrap_or(0)
    }

    pub fn total_height(&self) -> i64 {
        self.tasks.iter().map(|t| t.height).sum()
    }

    fn pick<'a>(&'a self, ids: &'a BTreeSet<TaskId>) -> impl Iterator<Item = &'a Task> + 'a {
        ids.iter().filter_map(move |id| self.task(*id))
    }

    pub fn area_of(&self, ids: &BTreeSet<TaskId>) -> i64 {
        self.pick(ids).map(Task::area).sum()
    }

    pub fn h_max_of(&self, ids: &BTreeSet<TaskId>) -> i64 {
        self.pick(ids).map(|t| t.height).max().unwrap_or(0)
    }

    pub fn w_max_of(&self, ids: &BTreeSet<TaskId>) -> i64 {
        self.pick(ids).map(|t| t.width).max().unwrap_or(0)
    }

    pub fn height_of(&self, ids: &BTreeSet<TaskId>) -> i64 {
        self.pick(ids).map(|t| t.height).sum()
    }

    /// The instance restricted to `ids`, on the same path.
    pub fn restrict(&self, ids: &BTreeSet<TaskId>) -> Instance {
        let tasks: Vec<Task> = self.tasks.iter().filter(|t| ids.contains(&t.id)).copied().collect();
        let index = tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
        let area = tasks.iter().map(Task::area).sum();
        Instance { width: self.width, tasks, index, area }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Assignment of start edges to (a subset of) the tasks. Tasks without an
/// entry are unscheduled and contribute no demand.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub starts: BTreeMap<TaskId, i64>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn place(&mut self, id: TaskId, start: i64) {
        self.starts.insert(id, start);
    }

    pub fn start(&self, id: TaskId) -> Option<i64> {
        self.starts.get(&id).copied()
    }

    pub fn is_scheduled(&self, id: TaskId) -> bool {
        self.starts.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<TaskId> {
        self.starts.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, i64)> + '_ {
        self.starts.iter().map(|(&id, &s)| (id, s))
    }

    /// Entries of `other` override entries of `self`.
    pub fn merge(&mut self, other: &Schedule) {
        for (id, s) in other.iter() {
            self.starts.insert(id, s);
        }
    }

    pub fn restrict(&self, ids: &BTreeSet<TaskId>) -> Schedule {
        Schedule { starts: self.starts.iter().filter(|(id, _)| ids.contains(id)).map(|(&i, &s)| (i, s)).collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl FromIterator<(TaskId, i64)> for Schedule {
    fn from_iter<I: IntoIterator<Item = (TaskId, i64)>>(iter: I) -> Self {
        Schedule { starts: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("schedule references unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {id} starting at {start} with width {width} leaves the path of {path} edges")]
    OutOfBounds { id: TaskId, start: i64, width: i64, path: i64 },
    #[error("schedule is missing {} task(s): {:?}", .missing.len(), .missing)]
    Incomplete { missing: Vec<TaskId> },
}

/// Checks `schedule` against `instance` and returns its peak.
pub fn validate_schedule(instance: &Instance, schedule: &Schedule, require_total: bool) -> Result<i64, ScheduleError> {
    for (id, start) in schedule.iter() {
        let task = instance.task(id).ok_or(ScheduleError::UnknownTask(id))?;
        if start < 0 || start + task.width > instance.width() {
            return Err(ScheduleError::OutOfBounds { id, start, width: task.width, path: instance.width() });
        }
    }
    if require_total {
        let missing: Vec<TaskId> = instance.tasks().iter().map(|t| t.id).filter(|id| !schedule.is_scheduled(*id)).collect();
        if !missing.is_empty() {
            return Err(ScheduleError::Incomplete { missing });
        }
    }
    Ok(DemandProfile::build(instance, schedule).peak())
}

/// Outcome summary attached to every solver result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    pub peak: i64,
    pub lower_bound: i64,
    /// `peak / lower_bound` as an exact fraction, `"p/q"`.
    pub ratio: String,
    pub ratio_value: f64,
    pub wall_ms: f64,
    pub params: BTreeMap<String, String>,
    /// Guarantee the returned schedule is certified to meet.
    pub certified: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<String>,
}

impl SolveReport {
    pub fn new(algorithm: &str, peak: i64, lower_bound: i64, wall: std::time::Duration) -> Self {
        let ratio = if lower_bound > 0 { Rational::new(peak as i128, lower_bound as i128) } else { Rational::from_integer(1) };
        SolveReport {
            algorithm: algorithm.to_string(),
            peak,
            lower_bound,
            ratio: ratio::display(&ratio),
            ratio_value: ratio::to_f64(&ratio),
            wall_ms: wall.as_secs_f64() * 1e3,
            params: BTreeMap::new(),
            certified: String::new(),
            trace: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_certified(mut self, text: impl Into<String>) -> Self {
        self.certified = text.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1a_raw() -> RawInstance {
        RawInstance {
            width: 7,
            tasks: vec![
                Task::new(1, 2, 3),
                Task::new(2, 2, 3),
                Task::new(3, 4, 1),
                Task::new(4, 4, 1),
                Task::new(5, 3, 1),
                Task::new(6, 1, 1),
                Task::new(7, 1, 2),
                Task::new(8, 1, 2),
            ],
        }
    }

    fn fig1a_schedule() -> Schedule {
        [(1, 0), (2, 5), (3, 0), (4, 3), (5, 2), (6, 3), (7, 4), (8, 2)].into_iter().collect()
    }

    #[test]
    fn fig1a_is_valid_with_peak_four() {
        let inst = validate_instance(fig1a_raw()).unwrap();
        assert_eq!(inst.area(), 28);
        assert_eq!(validate_schedule(&inst, &fig1a_schedule(), true), Ok(4));
    }

    #[test]
    fn width_exceeding_path_is_rejected() {
        let err = Instance::new(5, vec![Task::new(0, 6, 1)]).unwrap_err();
        assert_eq!(err.violations, vec![Violation::WidthExceedsPath { id: 0, width: 6, path: 5 }]);
        assert!(err.to_string().contains("exceeds W"));
    }

    #[test]
    fn single_edge_zero_height_is_valid() {
        let inst = Instance::new(1, vec![Task::new(0, 1, 0)]).unwrap();
        assert_eq!(inst.area(), 0);
    }

    #[test]
    fn all_violations_are_listed() {
        let raw = RawInstance { width: 0, tasks: vec![Task::new(1, 0, -1), Task::new(1, 1, 1)] };
        let err = validate_instance(raw).unwrap_err();
        assert!(err.violations.contains(&Violation::EmptyPath { width: 0 }));
        assert!(err.violations.contains(&Violation::DuplicateId { id: 1 }));
        assert!(err.violations.contains(&Violation::WidthTooSmall { id: 1, width: 0 }));
        assert!(err.violations.contains(&Violation::NegativeHeight { id: 1, height: -1 }));
    }

    #[test]
    fn area_overflow_is_checked() {
        let err = Instance::new(4, vec![Task::new(0, 4, i64::MAX / 2)]).unwrap_err();
        assert_eq!(err.violations, vec![Violation::AreaOverflow]);
    }

    #[test]
    fn empty_partial_schedule_has_zero_peak() {
        let inst = validate_instance(fig1a_raw()).unwrap();
        assert_eq!(validate_schedule(&inst, &Schedule::new(), false), Ok(0));
    }

    #[test]
    fn incomplete_schedule_fails_when_total_required() {
        let inst = validate_instance(fig1a_raw()).unwrap();
        let mut s = fig1a_schedule();
        s.starts.remove(&8);
        assert_eq!(validate_schedule(&inst, &s, true), Err(ScheduleError::Incomplete { missing: vec![8] }));
        assert_eq!(validate_schedule(&inst, &s, false), Ok(4));
    }

    #[test]
    fn out_of_bounds_and_unknown_ids_fail() {
        let inst = validate_instance(fig1a_raw()).unwrap();
        let s: Schedule = [(1, 6)].into_iter().collect();
        assert!(matches!(validate_schedule(&inst, &s, false), Err(ScheduleError::OutOfBounds { id: 1, .. })));
        let s: Schedule = [(99, 0)].into_iter().collect();
        assert_eq!(validate_schedule(&inst, &s, false), Err(ScheduleError::UnknownTask(99)));
    }

    #[test]
    fn file_formats_use_exact_field_names() {
        let inst = Instance::from_json(r#"{"W": 3, "tasks": [{"id": 4, "w": 2, "h": 5}]}"#).unwrap();
        assert_eq!(inst.task(4), Some(&Task::new(4, 2, 5)));
        let s = Schedule::from_json(r#"{"starts": {"4": 1}}"#).unwrap();
        assert_eq!(s.start(4), Some(1));
        assert!(s.to_json().contains("\"4\": 1"));
        assert!(Instance::from_json(r#"{"W": 3, "tasks": [{"id": 4, "w": 5, "h": 5}]}"#).is_err());
    }
}
