//! Run-length encoded demand profiles and left-pushing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Schedule, TaskId};

/// Total demand per edge as a step function over `[0, W)`.
///
/// `runs[k] = (start, demand)` holds on edges `start .. runs[k + 1].0`.
/// Canonical: starts strictly increase from 0 and neighbouring runs differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandProfile {
    width: i64,
    runs: Vec<(i64, i64)>,
}

impl DemandProfile {
    /// The zero profile on `width` edges.
    pub fn zero(width: i64) -> Self {
        DemandProfile { width, runs: vec![(0, 0)] }
    }

    pub fn build(instance: &Instance, schedule: &Schedule) -> Self {
        let mut events: Vec<(i64, i64)> = Vec::with_capacity(2 * schedule.len());
        for (id, s) in schedule.iter() {
            if let Some(t) = instance.task(id) {
                if t.height != 0 {
                    events.push((s, t.height));
                    events.push((s + t.width, -t.height));
                }
            }
        }
        Self::from_events(instance.width(), events)
    }

    /// Profile of `(start, width, height)` intervals.
    pub fn from_intervals(width: i64, items: impl IntoIterator<Item = (i64, i64, i64)>) -> Self {
        let mut events = Vec::new();
        for (s, w, h) in items {
            events.push((s, h));
            events.push((s + w, -h));
        }
        Self::from_events(width, events)
    }

    fn from_events(width: i64, mut events: Vec<(i64, i64)>) -> Self {
        events.sort_unstable();
        let mut runs = vec![(0, 0)];
        let mut level = 0;
        let mut i = 0;
        while i < events.len() {
            let x = events[i].0;
            while i < events.len() && events[i].0 == x {
                level += events[i].1;
                i += 1;
            }
            if x >= width {
                break;
            }
            push_run(&mut runs, x, level);
        }
        DemandProfile { width, runs }
    }

    /// Per-edge demands, canonicalized.
    pub fn from_demands(demands: &[i64]) -> Self {
        let mut runs = vec![(0, demands.first().copied().unwrap_or(0))];
        for (e, &d) in demands.iter().enumerate().skip(1) {
            push_run(&mut runs, e as i64, d);
        }
        DemandProfile { width: demands.len().max(1) as i64, runs }
    }

    /// Runs as given, canonicalized. Starts must be increasing from 0.
    pub fn from_runs(width: i64, runs: &[(i64, i64)]) -> Self {
        let mut out = vec![(0, runs.first().map(|r| r.1).unwrap_or(0))];
        for &(s, d) in runs.iter().skip(1) {
            if s < width {
                push_run(&mut out, s, d);
            }
        }
        DemandProfile { width, runs: out }
    }

    pub fn width(&self) -> i64 {
        self.width
    }

    pub fn runs(&self) -> &[(i64, i64)] {
        &self.runs
    }

    /// Number of value changes along the path.
    pub fn jumps(&self) -> usize {
        self.runs.len() - 1
    }

    pub fn peak(&self) -> i64 {
        self.runs.iter().map(|r| r.1).max().unwrap_or(0).max(0)
    }

    fn run_index(&self, edge: i64) -> usize {
        self.runs.partition_point(|r| r.0 <= edge) - 1
    }

    fn run_end(&self, k: usize) -> i64 {
        self.runs.get(k + 1).map(|r| r.0).unwrap_or(self.width)
    }

    pub fn at(&self, edge: i64) -> i64 {
        self.runs[self.run_index(edge)].1
    }

    /// Start of the first run strictly right of `edge`, or `W`.
    pub fn next_change(&self, edge: i64) -> i64 {
        self.run_end(self.run_index(edge))
    }

    /// Maximum demand over edges `from .. to` (0 when empty).
    pub fn max_on(&self, from: i64, to: i64) -> i64 {
        if from.max(0) >= to.min(self.width) {
            return 0;
        }
        self.fold_on(from, to, i64::MIN, i64::max)
    }

    /// Minimum demand over edges `from .. to`, `None` when empty.
    pub fn min_on(&self, from: i64, to: i64) -> Option<i64> {
        if from >= to {
            return None;
        }
        Some(self.fold_on(from, to, i64::MAX, i64::min))
    }

    fn fold_on(&self, from: i64, to: i64, init: i64, f: fn(i64, i64) -> i64) -> i64 {
        let from = from.max(0);
        let to = to.min(self.width);
        if from >= to {
            return init;
        }
        let mut acc = init;
        let mut k = self.run_index(from);
        while k < self.runs.len() && self.runs[k].0 < to {
            acc = f(acc, self.runs[k].1);
            k += 1;
        }
        acc
    }

    /// Adds `delta` on edges `from .. to`.
    pub fn add(&mut self, from: i64, to: i64, delta: i64) {
        let from = from.max(0);
        let to = to.min(self.width);
        if from >= to || delta == 0 {
            return;
        }
        let mut next = Vec::with_capacity(self.runs.len() + 2);
        for k in 0..self.runs.len() {
            let (s, d) = self.runs[k];
            let e = self.run_end(k);
            // Split the run into the parts before, inside and after [from, to).
            let pieces = [(s, from.min(e), 0), (s.max(from), e.min(to), delta), (s.max(to), e, 0)];
            for (a, b, dd) in pieces {
                if a < b {
                    push_run(&mut next, a, d + dd);
                }
            }
        }
        self.runs = next;
    }

    /// Rightmost edge `e < before` with demand `> threshold`.
    pub fn last_above(&self, before: i64, threshold: i64) -> Option<i64> {
        if before <= 0 {
            return None;
        }
        let mut k = self.run_index((before - 1).min(self.width - 1));
        loop {
            if self.runs[k].1 > threshold {
                return Some(self.run_end(k).min(before) - 1);
            }
            if k == 0 {
                return None;
            }
            k -= 1;
        }
    }

    /// Pointwise `self ≤ other` on a common path.
    pub fn dominated_by(&self, other: &DemandProfile) -> bool {
        let mut diff = self.clone();
        for (k, &(s, d)) in other.runs.iter().enumerate() {
            diff.add(s, other.run_end(k), -d);
        }
        diff.runs.iter().all(|r| r.1 <= 0)
    }

    /// One value per edge. Intended for small paths and tests.
    pub fn to_vec(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.width as usize);
        for k in 0..self.runs.len() {
            for _ in self.runs[k].0..self.run_end(k) {
                out.push(self.runs[k].1);
            }
        }
        out
    }
}

fn push_run(runs: &mut Vec<(i64, i64)>, start: i64, demand: i64) {
    match runs.last_mut() {
        Some(last) if last.1 == demand => {}
        Some(last) if last.0 == start => {
            last.1 = demand;
            // Overwriting may create equal neighbours.
            if runs.len() >= 2 && runs[runs.len() - 2].1 == demand {
                runs.pop();
            }
        }
        _ => runs.push((start, demand)),
    }
}

impl Serialize for DemandProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.runs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DemandProfile {
    /// Only the runs are stored; the width is taken as one past the last start.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let runs = Vec::<(i64, i64)>::deserialize(deserializer)?;
        let width = runs.last().map(|r| r.0 + 1).unwrap_or(1);
        Ok(DemandProfile::from_runs(width, &runs))
    }
}

pub fn build_profile(instance: &Instance, schedule: &Schedule) -> DemandProfile {
    DemandProfile::build(instance, schedule)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PushError {
    #[error("input peak {peak} already exceeds the push bound {bound}")]
    PeakAboveBound { peak: i64, bound: i64 },
}

/// Repeatedly shifts non-frozen tasks left while the peak stays `≤ pi_prime`.
///
/// Tasks are visited in ascending `(start, id)` order, pass after pass, and
/// each one jumps straight to the leftmost start it could reach one edge at
/// a time. Every pass costs `O(n · runs)`.
pub fn left_push(instance: &Instance, schedule: &Schedule, pi_prime: i64, frozen: &BTreeSet<TaskId>) -> Result<Schedule, PushError> {
    let mut profile = DemandProfile::build(instance, schedule);
    let peak = profile.peak();
    if peak > pi_prime {
        return Err(PushError::PeakAboveBound { peak, bound: pi_prime });
    }
    let mut out = schedule.clone();
    loop {
        let mut order: Vec<(i64, TaskId)> = out.iter().filter(|(id, _)| !frozen.contains(id)).map(|(id, s)| (s, id)).collect();
        order.sort_unstable();
        let mut moved = false;
        for (_, id) in order {
            let Some(task) = instance.task(id) else { continue };
            let cur = out.start(id).expect("scheduled");
            if cur == 0 {
                continue;
            }
            if task.height == 0 {
                out.place(id, 0);
                moved = true;
                continue;
            }
            profile.add(cur, cur + task.width, -task.height);
            let target = profile.last_above(cur, pi_prime - task.height).map_or(0, |e| e + 1);
            profile.add(target, target + task.width, task.height);
            if target != cur {
                out.place(id, target);
                moved = true;
            }
        }
        if !moved {
            return Ok(out);
        }
    }
}

/// Certificate that a profile is `(q, t_star)`-sorted: demand at least `q`
/// on every edge left of node `t_star`, non-increasing from there on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortednessWitness {
    pub q: i64,
    pub t_star: i64,
}

/// Witness for a profile, with `q` measured against the profile's own peak
/// as the push bound.
///
/// `t_star` is the smallest node such that demand is non-increasing from
/// edge `t_star − 1` onward (0 when the whole profile is non-increasing), so
/// the edge where the last increase lands counts as left of `t_star`.
pub fn sortedness_witness(profile: &DemandProfile, h_cap: i64) -> SortednessWitness {
    sortedness_witness_at(profile, profile.peak(), h_cap)
}

/// As [`sortedness_witness`] with an explicit push bound `pi_prime`:
/// `q = min(pi_prime − h_cap, min demand left of t_star)`, floored at 0.
pub fn sortedness_witness_at(profile: &DemandProfile, pi_prime: i64, h_cap: i64) -> SortednessWitness {
    let runs = profile.runs();
    let t_star = (1..runs.len()).rev().find(|&k| runs[k].1 > runs[k - 1].1).map_or(0, |k| runs[k].0 + 1);
    let left_min = profile.min_on(0, t_star).unwrap_or(i64::MAX);
    SortednessWitness { q: (pi_prime - h_cap).min(left_min).max(0), t_star }
}

/// Whether `profile` is `(q, t_star)`-sorted.
pub fn is_sorted(profile: &DemandProfile, q: i64, t_star: i64) -> bool {
    if profile.min_on(0, t_star).is_some_and(|m| m < q) {
        return false;
    }
    let runs = profile.runs();
    let first = runs.partition_point(|r| r.0 <= t_star).saturating_sub(1);
    runs[first..].windows(2).all(|p| p[1].1 <= p[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Task;

    fn fig1a() -> (Instance, Schedule) {
        let inst = Instance::new(
            7,
            vec![
                Task::new(1, 2, 3),
                Task::new(2, 2, 3),
                Task::new(3, 4, 1),
                Task::new(4, 4, 1),
                Task::new(5, 3, 1),
                Task::new(6, 1, 1),
                Task::new(7, 1, 2),
                Task::new(8, 1, 2),
            ],
        )
        .unwrap();
        let s = [(1, 0), (2, 5), (3, 0), (4, 3), (5, 2), (6, 3), (7, 4), (8, 2)].into_iter().collect();
        (inst, s)
    }

    #[test]
    fn build_examples() {
        let (inst, s) = fig1a();
        assert_eq!(DemandProfile::build(&inst, &Schedule::new()).runs(), &[(0, 0)]);
        let p = DemandProfile::build(&inst, &s);
        assert_eq!(p.runs(), &[(0, 4)]);
        assert_eq!(p.peak(), 4);
        let inst = Instance::new(3, vec![Task::new(0, 2, 1), Task::new(1, 2, 1)]).unwrap();
        let s = [(0, 0), (1, 1)].into_iter().collect();
        let p = DemandProfile::build(&inst, &s);
        assert_eq!(p.runs(), &[(0, 1), (1, 2), (2, 1)]);
        assert_eq!(p.peak(), 2);
    }

    #[test]
    fn add_keeps_canonical_form() {
        let mut p = DemandProfile::from_demands(&[1, 2, 1]);
        p.add(0, 1, 1);
        p.add(2, 3, 1);
        assert_eq!(p.runs(), &[(0, 2)]);
        p.add(1, 2, -2);
        assert_eq!(p.to_vec(), vec![2, 0, 2]);
        assert_eq!(p.last_above(3, 1), Some(2));
        assert_eq!(p.last_above(2, 1), Some(0));
        assert_eq!(p.last_above(3, 2), None);
        assert_eq!(p.max_on(1, 2), 0);
        assert_eq!(p.min_on(0, 3), Some(0));
    }

    #[test]
    fn push_examples() {
        let inst = Instance::new(7, vec![Task::new(0, 2, 3)]).unwrap();
        let s: Schedule = [(0, 3)].into_iter().collect();
        assert_eq!(left_push(&inst, &s, 3, &BTreeSet::new()).unwrap().start(0), Some(0));

        let inst = Instance::new(7, vec![Task::new(0, 1, 3), Task::new(1, 1, 3)]).unwrap();
        let s: Schedule = [(0, 0), (1, 5)].into_iter().collect();
        let out = left_push(&inst, &s, 3, &BTreeSet::new()).unwrap();
        assert_eq!(out.start(1), Some(1));

        let (inst, s) = fig1a();
        assert_eq!(left_push(&inst, &s, 4, &BTreeSet::new()).unwrap(), s);
        assert!(left_push(&inst, &s, 3, &BTreeSet::new()).is_err());
    }

    #[test]
    fn frozen_tasks_stay_put() {
        let inst = Instance::new(7, vec![Task::new(0, 2, 3)]).unwrap();
        let s: Schedule = [(0, 3)].into_iter().collect();
        let frozen = [0].into_iter().collect();
        assert_eq!(left_push(&inst, &s, 3, &frozen).unwrap(), s);
    }

    #[test]
    fn witness_examples() {
        let w = sortedness_witness(&DemandProfile::from_demands(&[5, 4, 2]), 0);
        assert_eq!(w.t_star, 0);
        let w = sortedness_witness(&DemandProfile::from_demands(&[3, 5, 4, 2]), 0);
        assert_eq!(w, SortednessWitness { q: 3, t_star: 2 });
        let w = sortedness_witness(&DemandProfile::zero(4), 0);
        assert_eq!(w, SortednessWitness { q: 0, t_star: 0 });
    }

    #[test]
    fn serializes_as_run_pairs() {
        let p = DemandProfile::from_demands(&[1, 2, 2]);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[0,1],[1,2]]");
    }
}
