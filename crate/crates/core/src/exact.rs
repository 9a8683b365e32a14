//! Exact oracles for small instances.
//!
//! Both searches answer "is peak `T` achievable?" for `T` rising from the
//! lower bound, so the first feasible `T` is optimal. A search that runs out
//! of budget yields the best known solution together with the largest `T`
//! proven infeasible plus one, never a false claim of optimality.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baseline::two_approx_schedule;
use crate::bounds::lower_bound;
use crate::geom::{GeomPlacement, Rect};
use crate::model::{Instance, Schedule};

/// Limits for one oracle call. Exceeding any of them ends the search early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub max_nodes: u64,
    pub time_limit: Duration,
    pub max_width: i64,
    pub max_tasks: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_nodes: 200_000_000, time_limit: Duration::from_secs(60), max_width: 4096, max_tasks: 24 }
    }
}

impl OracleBudget {
    pub fn unlimited() -> Self {
        OracleBudget { max_nodes: u64::MAX, time_limit: Duration::from_secs(u64::MAX / 4), max_width: i64::MAX, max_tasks: usize::MAX }
    }

    /// Parses `nodes=N,ms=N,w=N,n=N` (any subset, any order).
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut b = OracleBudget::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("budget item `{part}` is not key=value"))?;
            let v: u64 = v.trim().parse().map_err(|_| format!("budget value `{v}` is not an integer"))?;
            match k.trim() {
                "nodes" => b.max_nodes = v,
                "ms" => b.time_limit = Duration::from_millis(v),
                "w" => b.max_width = v as i64,
                "n" => b.max_tasks = v as usize,
                other => return Err(format!("unknown budget key `{other}`")),
            }
        }
        Ok(b)
    }

    pub fn admits(&self, instance: &Instance) -> bool {
        instance.width() <= self.max_width && instance.len() <= self.max_tasks
    }
}

/// Result of an oracle call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOutcome<S> {
    /// Best peak found.
    pub peak: i64,
    pub solution: S,
    pub proven_optimal: bool,
    /// Proven lower bound on the optimum; equals `peak` when proven.
    pub lower_bound: i64,
    pub nodes: u64,
}

struct Meter {
    nodes: u64,
    budget: OracleBudget,
    clock: Instant,
    out_of_budget: bool,
}

impl Meter {
    fn new(budget: OracleBudget) -> Self {
        Meter { nodes: 0, budget, clock: Instant::now(), out_of_budget: false }
    }

    /// Counts a node; true once the budget is exhausted.
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes >= self.budget.max_nodes || (self.nodes.is_multiple_of(4096) && self.clock.elapsed() >= self.budget.time_limit) {
            self.out_of_budget = true;
        }
        self.out_of_budget
    }
}

enum Answer<T> {
    Yes(T),
    No,
    Unknown,
}

/// Every sum of a sub-multiset of `widths` below `limit`, or `None` when
/// the set would exceed `cap` elements.
pub fn subset_sums(widths: &[i64], limit: i64, cap: usize) -> Option<BTreeSet<i64>> {
    let mut reach = vec![false; limit.max(1) as usize];
    reach[0] = true;
    let mut count = 1;
    for &w in widths {
        if w <= 0 || w >= limit {
            continue;
        }
        for s in (w as usize..limit as usize).rev() {
            if reach[s - w as usize] && !reach[s] {
                reach[s] = true;
                count += 1;
                if count > cap {
                    return None;
                }
            }
        }
    }
    Some(reach.iter().enumerate().filter(|(_, &r)| r).map(|(s, _)| s as i64).collect())
}

const CANDIDATE_CAP: usize = 200_000;

struct DspSearch<'a> {
    width: i64,
    /// Distinct `(w, h)` types, widest first.
    types: Vec<(i64, i64)>,
    counts: Vec<usize>,
    members: Vec<Vec<u64>>,
    is_candidate: Vec<bool>,
    target: i64,
    profile: Vec<i64>,
    starts: Vec<Vec<i64>>,
    waste_left: i64,
    failed: HashSet<(i64, Vec<usize>, Vec<i64>)>,
    meter: &'a mut Meter,
}

impl DspSearch<'_> {
    /// Enters edge `p` with every start left of it decided.
    fn enter(&mut self, p: i64) -> Option<bool> {
        if p == self.width {
            return Some(self.counts.iter().all(|&c| c == 0));
        }
        let key = (p, self.counts.clone(), self.profile[p as usize..].to_vec());
        if self.failed.contains(&key) {
            return Some(false);
        }
        let r = self.at(p, 0);
        if r == Some(false) && self.failed.len() < 2_000_000 {
            self.failed.insert(key);
        }
        r
    }

    /// Starts another task of type `>= from` at `p`, or closes `p`.
    fn at(&mut self, p: i64, from: usize) -> Option<bool> {
        if self.meter.tick() {
            return None;
        }
        if self.is_candidate[p as usize] {
            for k in from..self.types.len() {
                if self.counts[k] == 0 {
                    continue;
                }
                let (w, h) = self.types[k];
                let end = p + w;
                if end > self.width {
                    continue;
                }
                let (a, b) = (p as usize, end as usize);
                if self.profile[a..b].iter().any(|&d| d + h > self.target) {
                    continue;
                }
                self.profile[a..b].iter_mut().for_each(|d| *d += h);
                self.counts[k] -= 1;
                self.starts[k].push(p);
                let r = self.at(p, k);
                if r != Some(false) {
                    if r.is_none() {
                        self.undo(k, p);
                    }
                    return r;
                }
                self.undo(k, p);
            }
        }
        // Close edge p: its demand is final from here on.
        let waste = self.target - self.profile[p as usize];
        if waste > self.waste_left {
            return Some(false);
        }
        let room = self.width - (p + 1);
        if self.types.iter().zip(&self.counts).any(|(&(w, _), &c)| c > 0 && w > room) {
            return Some(false);
        }
        self.waste_left -= waste;
        let r = self.enter(p + 1);
        self.waste_left += waste;
        r
    }

    fn undo(&mut self, k: usize, p: i64) {
        let (w, h) = self.types[k];
        self.profile[p as usize..(p + w) as usize].iter_mut().for_each(|d| *d -= h);
        self.counts[k] += 1;
        self.starts[k].pop();
    }

    fn schedule(&self) -> Schedule {
        let mut s = Schedule::new();
        for k in 0..self.types.len() {
            for (id, &start) in self.members[k].iter().zip(&self.starts[k]) {
                s.place(*id, start);
            }
        }
        s
    }
}

fn dsp_feasible(instance: &Instance, target: i64, meter: &mut Meter) -> Answer<Schedule> {
    let w = instance.width();
    let mut types: Vec<(i64, i64)> = Vec::new();
    let mut members: Vec<Vec<u64>> = Vec::new();
    let mut tasks: Vec<_> = instance.tasks().to_vec();
    tasks.sort_by_key(|t| (std::cmp::Reverse(t.width), std::cmp::Reverse(t.height), t.id));
    let mut zero_height = Vec::new();
    for t in &tasks {
        if t.height == 0 {
            zero_height.push(t.id);
            continue;
        }
        if t.height > target {
            return Answer::No;
        }
        if types.last() == Some(&(t.width, t.height)) {
            members.last_mut().unwrap().push(t.id);
        } else {
            types.push((t.width, t.height));
            members.push(vec![t.id]);
        }
    }
    let widths: Vec<i64> = tasks.iter().filter(|t| t.height > 0).map(|t| t.width).collect();
    let is_candidate = match subset_sums(&widths, w, CANDIDATE_CAP) {
        Some(set) => {
            let mut v = vec![false; w as usize];
            set.into_iter().for_each(|s| v[s as usize] = true);
            v
        }
        None => vec![true; w as usize],
    };
    let waste = target as i128 * w as i128 - instance.area() as i128;
    if waste < 0 {
        return Answer::No;
    }
    let mut search = DspSearch {
        width: w,
        counts: members.iter().map(Vec::len).collect(),
        starts: vec![Vec::new(); types.len()],
        types,
        members,
        is_candidate,
        target,
        profile: vec![0; w as usize],
        waste_left: waste.min(i64::MAX as i128) as i64,
        failed: HashSet::new(),
        meter,
    };
    match search.enter(0) {
        Some(true) => {
            let mut s = search.schedule();
            zero_height.into_iter().for_each(|id| s.place(id, 0));
            Answer::Yes(s)
        }
        Some(false) => Answer::No,
        None => Answer::Unknown,
    }
}

/// Minimum peak schedule by branch and bound over left-pushed schedules.
///
/// Starts are restricted to sums of task widths, which some optimal
/// left-pushed schedule always satisfies. Edges are decided left to right;
/// an edge is closed once no further task may start on it, and the unused
/// capacity of closed edges is charged against `T · W − a`.
pub fn exact_dsp(instance: &Instance, budget: &OracleBudget) -> ExactOutcome<Schedule> {
    let lb = lower_bound(instance).value;
    let (incumbent, inc_peak) = two_approx_schedule(instance).expect("2-approximation succeeds on valid instances");
    let mut meter = Meter::new(*budget);
    if !budget.admits(instance) {
        return ExactOutcome { peak: inc_peak, solution: incumbent, proven_optimal: inc_peak == lb, lower_bound: lb, nodes: 0 };
    }
    for target in lb..inc_peak {
        match dsp_feasible(instance, target, &mut meter) {
            Answer::Yes(s) => {
                return ExactOutcome { peak: target, solution: s, proven_optimal: true, lower_bound: target, nodes: meter.nodes }
            }
            Answer::No => {}
            Answer::Unknown => {
                return ExactOutcome { peak: inc_peak, solution: incumbent, proven_optimal: false, lower_bound: target, nodes: meter.nodes }
            }
        }
    }
    ExactOutcome { peak: inc_peak, solution: incumbent, proven_optimal: true, lower_bound: inc_peak, nodes: meter.nodes }
}

/// Rectangles of an instance, task id as rectangle id.
pub fn instance_rects(instance: &Instance) -> Vec<Rect> {
    instance.tasks().iter().map(|t| Rect::new(t.id, t.width, t.height)).collect()
}

/// Shelf packing: rectangles by decreasing height, next fit into shelves.
pub fn shelf_pack(rects: &[Rect], box_w: i64) -> GeomPlacement {
    let mut order: Vec<&Rect> = rects.iter().collect();
    order.sort_by_key(|r| (std::cmp::Reverse(r.h), std::cmp::Reverse(r.w), r.id));
    let mut p = GeomPlacement::new(box_w, 0);
    let (mut x, mut y, mut shelf_h) = (0, 0, 0);
    for r in order {
        if x + r.w > box_w {
            y += shelf_h;
            x = 0;
            shelf_h = 0;
        }
        if shelf_h == 0 {
            shelf_h = r.h;
        }
        p.positions.insert(r.id, (x, y));
        x += r.w;
    }
    p.box_h = y + shelf_h;
    p
}

struct GspSearch<'a> {
    width: i64,
    height: i64,
    /// Bit `x` of `rows[y]` is set when cell `(x, y)` is used or wasted.
    rows: Vec<u128>,
    types: Vec<(i64, i64)>,
    counts: Vec<usize>,
    members: Vec<Vec<u64>>,
    placed: Vec<Vec<(i64, i64)>>,
    waste_left: i64,
    min_w: i64,
    failed: HashSet<(Vec<u128>, Vec<usize>)>,
    meter: &'a mut Meter,
}

impl GspSearch<'_> {
    fn full(&self) -> u128 {
        if self.width >= 128 {
            u128::MAX
        } else {
            (1u128 << self.width) - 1
        }
    }

    fn first_empty(&self) -> Option<(i64, i64)> {
        let full = self.full();
        for (y, &row) in self.rows.iter().enumerate() {
            if row != full {
                return Some(((!row).trailing_zeros() as i64, y as i64));
            }
        }
        None
    }

    fn run(&mut self) -> Option<bool> {
        if self.meter.tick() {
            return None;
        }
        let Some((x, y)) = self.first_empty() else {
            return Some(self.counts.iter().all(|&c| c == 0));
        };
        let key = (self.rows[y as usize..].to_vec(), self.counts.clone());
        if self.failed.contains(&key) {
            return Some(false);
        }
        let r = self.branch(x, y);
        if r == Some(false) && self.failed.len() < 4_000_000 {
            self.failed.insert(key);
        }
        r
    }

    fn branch(&mut self, x: i64, y: i64) -> Option<bool> {
        let row = self.rows[y as usize];
        let gap = ((row >> x).trailing_zeros() as i64).min(self.width - x);
        if self.counts.iter().all(|&c| c == 0) || self.min_remaining_width() > gap {
            // Nothing can start here: the whole gap is waste.
            if gap > self.waste_left {
                return Some(false);
            }
            let mask = ((1u128 << gap) - 1) << x;
            self.rows[y as usize] |= mask;
            self.waste_left -= gap;
            let r = self.run();
            self.waste_left += gap;
            self.rows[y as usize] &= !mask;
            return r;
        }
        for k in 0..self.types.len() {
            if self.counts[k] == 0 {
                continue;
            }
            let (w, h) = self.types[k];
            if w > gap || y + h > self.height {
                continue;
            }
            let mask = ((1u128 << w) - 1) << x;
            if (y..y + h).any(|yy| self.rows[yy as usize] & mask != 0) {
                continue;
            }
            (y..y + h).for_each(|yy| self.rows[yy as usize] |= mask);
            self.counts[k] -= 1;
            self.placed[k].push((x, y));
            let r = self.run();
            if r != Some(false) {
                if r.is_none() {
                    self.lift(k, mask, y, h);
                }
                return r;
            }
            self.lift(k, mask, y, h);
        }
        if self.waste_left == 0 {
            return Some(false);
        }
        let bit = 1u128 << x;
        self.rows[y as usize] |= bit;
        self.waste_left -= 1;
        let r = self.run();
        self.waste_left += 1;
        if r != Some(true) {
            self.rows[y as usize] &= !bit;
        }
        r
    }

    fn lift(&mut self, k: usize, mask: u128, y: i64, h: i64) {
        (y..y + h).for_each(|yy| self.rows[yy as usize] &= !mask);
        self.counts[k] += 1;
        self.placed[k].pop();
    }

    fn min_remaining_width(&self) -> i64 {
        self.types.iter().zip(&self.counts).filter(|(_, &c)| c > 0).map(|(t, _)| t.0).min().unwrap_or(self.min_w)
    }
}

fn gsp_feasible(instance: &Instance, height: i64, meter: &mut Meter) -> Answer<GeomPlacement> {
    let w = instance.width();
    let mut tasks: Vec<_> = instance.tasks().to_vec();
    tasks.sort_by_key(|t| (std::cmp::Reverse(t.width * t.height), std::cmp::Reverse(t.width), t.height, t.id));
    let mut types: Vec<(i64, i64)> = Vec::new();
    let mut members: Vec<Vec<u64>> = Vec::new();
    let mut flat = Vec::new();
    for t in &tasks {
        if t.height == 0 {
            flat.push(t.id);
            continue;
        }
        if t.height > height {
            return Answer::No;
        }
        match types.iter().position(|&ty| ty == (t.width, t.height)) {
            Some(k) => members[k].push(t.id),
            None => {
                types.push((t.width, t.height));
                members.push(vec![t.id]);
            }
        }
    }
    let waste = height as i128 * w as i128 - instance.area() as i128;
    if waste < 0 {
        return Answer::No;
    }
    let mut search = GspSearch {
        width: w,
        height,
        rows: vec![0; height as usize],
        counts: members.iter().map(Vec::len).collect(),
        placed: vec![Vec::new(); types.len()],
        min_w: types.iter().map(|t| t.0).min().unwrap_or(1),
        failed: HashSet::new(),
        types,
        members,
        waste_left: waste as i64,
        meter,
    };
    match search.run() {
        Some(true) => {
            let mut p = GeomPlacement::new(w, height);
            for k in 0..search.types.len() {
                for (id, &xy) in search.members[k].iter().zip(&search.placed[k]) {
                    p.positions.insert(*id, xy);
                }
            }
            flat.into_iter().for_each(|id| {
                p.positions.insert(id, (0, 0));
            });
            Answer::Yes(p)
        }
        Some(false) => Answer::No,
        None => Answer::Unknown,
    }
}

/// Minimum strip height for the instance read as rectangles.
///
/// Cells are filled bottom row first, left to right; the first empty cell
/// either receives the bottom-left corner of a rectangle or is declared
/// waste, with total waste bounded by `H · W − a`. Paths wider than 128
/// edges are outside the oracle's range and return the shelf packing.
pub fn exact_gsp(instance: &Instance, budget: &OracleBudget) -> ExactOutcome<GeomPlacement> {
    let rects = instance_rects(instance);
    let shelf = shelf_pack(&rects, instance.width());
    let shelf_h = shelf.box_h;
    let lb = lower_bound(instance).value;
    let mut meter = Meter::new(*budget);
    if !budget.admits(instance) || instance.width() > 128 {
        return ExactOutcome { peak: shelf_h, solution: shelf, proven_optimal: shelf_h == lb, lower_bound: lb, nodes: 0 };
    }
    for height in lb..shelf_h {
        match gsp_feasible(instance, height, &mut meter) {
            Answer::Yes(p) => {
                return ExactOutcome { peak: height, solution: p, proven_optimal: true, lower_bound: height, nodes: meter.nodes }
            }
            Answer::No => {}
            Answer::Unknown => {
                return ExactOutcome { peak: shelf_h, solution: shelf, proven_optimal: false, lower_bound: height, nodes: meter.nodes }
            }
        }
    }
    ExactOutcome { peak: shelf_h, solution: shelf, proven_optimal: true, lower_bound: shelf_h, nodes: meter.nodes }
}

/// Reference value for tests: the optimal peak over every start vector.
/// `O(W^n)`; only for tiny instances.
pub fn brute_force_dsp(instance: &Instance) -> i64 {
    let tasks = instance.tasks();
    let w = instance.width();
    let mut profile = vec![0i64; w as usize];
    fn rec(k: usize, tasks: &[crate::model::Task], w: i64, profile: &mut Vec<i64>, best: &mut i64) {
        let cur = profile.iter().copied().max().unwrap_or(0);
        if cur >= *best {
            return;
        }
        if k == tasks.len() {
            *best = cur;
            return;
        }
        let t = tasks[k];
        for s in 0..=(w - t.width) {
            (s..s + t.width).for_each(|e| profile[e as usize] += t.height);
            rec(k + 1, tasks, w, profile, best);
            (s..s + t.width).for_each(|e| profile[e as usize] -= t.height);
        }
    }
    let mut best = i64::MAX;
    rec(0, tasks, w, &mut profile, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::verify_placement;
    use crate::model::{validate_schedule, Task};

    #[test]
    fn single_task_is_its_height() {
        let inst = Instance::new(5, vec![Task::new(0, 3, 4)]).unwrap();
        let r = exact_dsp(&inst, &OracleBudget::default());
        assert_eq!((r.peak, r.proven_optimal), (4, true));
        let g = exact_gsp(&inst, &OracleBudget::default());
        assert_eq!((g.peak, g.proven_optimal), (4, true));
    }

    #[test]
    fn subset_sums_respect_cap_and_limit() {
        assert_eq!(subset_sums(&[3, 5], 10, 100).unwrap().into_iter().collect::<Vec<_>>(), vec![0, 3, 5, 8]);
        assert!(subset_sums(&[1, 2, 4], 8, 3).is_none());
    }

    #[test]
    fn dsp_beats_gsp_on_staircase() {
        // Two L-shaped demand patterns interleave in DSP but not as rectangles.
        let inst = Instance::new(3, vec![Task::new(0, 2, 1), Task::new(1, 2, 1), Task::new(2, 1, 1), Task::new(3, 1, 1)]).unwrap();
        let d = exact_dsp(&inst, &OracleBudget::default());
        assert_eq!(validate_schedule(&inst, &d.solution, true), Ok(d.peak));
        let g = exact_gsp(&inst, &OracleBudget::default());
        verify_placement(&instance_rects(&inst), &g.solution).unwrap();
        assert!(g.peak >= d.peak);
        assert_eq!(d.peak, brute_force_dsp(&inst));
    }

    #[test]
    fn exhausted_budget_is_not_optimal() {
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
        let tiny = OracleBudget { max_nodes: 2, ..OracleBudget::default() };
        let r = exact_gsp(&inst, &tiny);
        assert!(!r.proven_optimal);
        assert!(r.lower_bound <= 5 && r.peak >= 5);
        verify_placement(&instance_rects(&inst), &r.solution).unwrap();
    }

    #[test]
    fn budget_spec_parses() {
        let b = OracleBudget::parse("nodes=10, ms=250").unwrap();
        assert_eq!(b.max_nodes, 10);
        assert_eq!(b.time_limit, Duration::from_millis(250));
        assert!(OracleBudget::parse("x=1").is_err());
    }
}
