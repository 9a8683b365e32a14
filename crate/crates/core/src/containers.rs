//! Containers and the (5/3 + ε)-approximation.
//!
//! The pipeline for one guess `g` of the optimum: classify tasks by height
//! and width relative to `g` and `W`, pack tall, large, horizontal and
//! medium tasks into a constant number of containers, schedule the
//! containers, left-push the result without moving tall tasks, and place
//! the narrow tasks with [`qt_fill`](crate::baseline::qt_fill). A guess for which some step fails is
//! too small and the next one is tried.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{push_and_fill, two_approx_schedule};
use crate::bounds::lower_bound;
use crate::error::{DspError, Result};
use crate::exact::{exact_dsp, subset_sums, OracleBudget};
use crate::model::{Instance, Schedule, SolveReport, Task, TaskId};
use crate::profile::DemandProfile;
use crate::ratio::{self, rat, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContainerKind {
    /// Packed tasks sit side by side: heights `≤ height`, total width `≤ width`.
    Vertical,
    /// Packed tasks are stacked: widths `≤ width`, total height `≤ height`.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Container {
    pub id: usize,
    pub kind: ContainerKind,
    pub width: i64,
    pub height: i64,
}

impl Container {
    pub fn accepts(&self, t: &Task) -> bool {
        match self.kind {
            ContainerKind::Vertical => t.height <= self.height && t.width <= self.width,
            ContainerKind::Horizontal => t.width <= self.width && t.height <= self.height,
        }
    }

    /// The amount of capacity `t` uses.
    pub fn load(&self, t: &Task) -> i64 {
        match self.kind {
            ContainerKind::Vertical => t.width,
            ContainerKind::Horizontal => t.height,
        }
    }

    pub fn capacity(&self) -> i64 {
        match self.kind {
            ContainerKind::Vertical => self.width,
            ContainerKind::Horizontal => self.height,
        }
    }
}

/// Containers, their contents and their start edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContainerPacking {
    pub containers: Vec<Container>,
    pub assignment: BTreeMap<TaskId, usize>,
    pub container_schedule: BTreeMap<usize, i64>,
    pub leftovers: BTreeSet<TaskId>,
    /// Widths of assigned tasks, used to lay out vertical containers.
    pub widths: BTreeMap<TaskId, i64>,
}

impl ContainerPacking {
    fn push(&mut self, kind: ContainerKind, width: i64, height: i64, start: i64) -> usize {
        let id = self.containers.len();
        self.containers.push(Container { id, kind, width, height });
        self.container_schedule.insert(id, start);
        id
    }

    pub fn container_profile(&self, width: i64) -> DemandProfile {
        DemandProfile::from_intervals(width, self.containers.iter().map(|c| (self.container_schedule[&c.id], c.width, c.height)))
    }

    /// Task starts implied by the packing: tasks of a vertical container
    /// side by side from its start in id order, tasks of a horizontal
    /// container all at its start.
    pub fn induced_schedule(&self) -> Schedule {
        let mut out = Schedule::new();
        let mut offset: BTreeMap<usize, i64> = BTreeMap::new();
        for (&id, &c) in &self.assignment {
            let container = &self.containers[c];
            let start = self.container_schedule[&c];
            match container.kind {
                ContainerKind::Vertical => {
                    let off = offset.entry(c).or_insert(0);
                    out.place(id, start + *off);
                    *off += self.widths.get(&id).copied().unwrap_or(0);
                }
                ContainerKind::Horizontal => out.place(id, start),
            }
        }
        out
    }

    /// Checks capacities, containment in the path, and that the induced
    /// task profile stays below the container profile.
    pub fn verify(&self, instance: &Instance) -> Result<()> {
        let mut used: BTreeMap<usize, i64> = BTreeMap::new();
        for (&id, &c) in &self.assignment {
            let t = instance.task(id).ok_or_else(|| DspError::Defect(format!("packing references unknown task {id}")))?;
            let container = self.containers.get(c).ok_or_else(|| DspError::Defect(format!("unknown container {c}")))?;
            if !container.accepts(t) {
                return Err(DspError::Defect(format!("task {id} does not fit container {c}")));
            }
            *used.entry(c).or_insert(0) += container.load(t);
        }
        for (&c, &u) in &used {
            if u > self.containers[c].capacity() {
                return Err(DspError::Defect(format!("container {c} over capacity: {u} > {}", self.containers[c].capacity())));
            }
        }
        for c in &self.containers {
            let s = self.container_schedule[&c.id];
            if s < 0 || s + c.width > instance.width() {
                return Err(DspError::Defect(format!("container {} leaves the path", c.id)));
            }
        }
        let induced = DemandProfile::build(instance, &self.induced_schedule());
        if !induced.dominated_by(&self.container_profile(instance.width())) {
            return Err(DspError::Defect("induced profile exceeds the container profile".into()));
        }
        Ok(())
    }
}

// Vertical containers need task widths to lay tasks out; they are recorded
// alongside the assignment.
impl ContainerPacking {
    fn assign(&mut self, task: &Task, container: usize) {
        self.assignment.insert(task.id, container);
        self.widths.insert(task.id, task.width);
    }
}

/// Task classes for one guess `opt_guess` of the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub eps: Rational,
    pub mu: Rational,
    pub delta: Rational,
    pub opt_guess: i64,
    pub tall: BTreeSet<TaskId>,
    pub large: BTreeSet<TaskId>,
    pub horizontal: BTreeSet<TaskId>,
    pub narrow: BTreeSet<TaskId>,
    pub medium: BTreeSet<TaskId>,
}

/// Outcome of [`choose_delta_mu`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMu {
    pub delta: Rational,
    pub mu: Rational,
    /// Divisor in `μ = δ / K`.
    pub k: i64,
    /// The container-count bound exceeded the cap and was clipped.
    pub k_capped: bool,
    /// Some candidate met the medium-area bound; when false the returned
    /// pair minimises the medium area instead, which means the guess is
    /// below the optimum.
    pub qualified: bool,
}

pub const K_CAP: i64 = 10_000;

/// Container-count bound for horizontal containers, clipped at [`K_CAP`].
pub fn container_bound(eps: &Rational) -> (i64, bool) {
    let e = ratio::to_f64(eps);
    let raw = (1.0 / e + 2.0 / (e * e)) * (1.0 / (e * e) + 1.0).powf(1.0 / e) * (1.0 / (e * e));
    if !raw.is_finite() || raw > K_CAP as f64 {
        (K_CAP, true)
    } else {
        (raw.ceil().max(1.0) as i64, false)
    }
}

fn medium_area(instance: &Instance, eps: &Rational, mu: &Rational, delta: &Rational, g: i64) -> i128 {
    let w = instance.width();
    instance
        .tasks()
        .iter()
        .filter(|t| ratio::gt_scaled(t.width, eps, w) && ratio::gt_scaled(t.height, mu, g) && ratio::le_scaled(t.height, delta, g))
        .map(|t| t.area() as i128)
        .sum()
}

/// Picks `δ` from `y₁ = ε, y_{j+1} = y_j / K` (at most `⌈2/ε²⌉` values)
/// such that medium tasks have area `≤ ε² · g · W`, and `μ = δ / K`.
///
/// Once `y_j · g < 1` no positive integer height lies in the medium band,
/// so the scan stops there.
pub fn choose_delta_mu(instance: &Instance, eps: &Rational, opt_guess: i64) -> DeltaMu {
    let (k, k_capped) = container_bound(eps);
    let kr = ratio::int(k);
    let count = ratio::ceil(&(Rational::from_integer(2) / (eps * eps))).max(1);
    let budget = eps * eps * ratio::int(opt_guess) * ratio::int(instance.width());
    let mut y = *eps;
    let mut best: Option<(i128, Rational)> = None;
    for _ in 0..count {
        let mu = y / kr;
        let area = medium_area(instance, eps, &mu, &y, opt_guess);
        if Rational::from_integer(area) <= budget {
            return DeltaMu { delta: y, mu, k, k_capped, qualified: true };
        }
        if best.as_ref().is_none_or(|b| area < b.0) {
            best = Some((area, y));
        }
        if y * ratio::int(opt_guess) < Rational::from_integer(1) {
            break;
        }
        y = mu;
    }
    let delta = best.map(|b| b.1).unwrap_or(*eps);
    DeltaMu { delta, mu: delta / kr, k, k_capped, qualified: false }
}

pub fn classify_tasks(instance: &Instance, eps: &Rational, mu: &Rational, delta: &Rational, opt_guess: i64) -> Result<Classification> {
    if !(mu < delta && delta <= eps) {
        return Err(DspError::Precondition("classification needs mu < delta <= eps".into()));
    }
    let g = opt_guess;
    let w = instance.width();
    let mut c = Classification {
        eps: *eps,
        mu: *mu,
        delta: *delta,
        opt_guess,
        tall: BTreeSet::new(),
        large: BTreeSet::new(),
        horizontal: BTreeSet::new(),
        narrow: BTreeSet::new(),
        medium: BTreeSet::new(),
    };
    for t in instance.tasks() {
        if t.height > g {
            return Err(DspError::Infeasible(format!("opt_guess {g} below the height {} of task {}", t.height, t.id)));
        }
        let wide = ratio::gt_scaled(t.width, eps, w);
        let set = if 3 * t.height > 2 * g {
            &mut c.tall
        } else if !wide {
            &mut c.narrow
        } else if ratio::gt_scaled(t.height, delta, g) {
            &mut c.large
        } else if ratio::gt_scaled(t.height, mu, g) {
            &mut c.medium
        } else {
            &mut c.horizontal
        };
        set.insert(t.id);
    }
    Ok(c)
}

/// Moves the tall tasks to a prefix of the path in non-increasing height
/// order.
///
/// Edges covered by a tall task are valley edges, the rest mountain edges.
/// Valley edges are regrouped tall by tall (sorted by height, then id)
/// ahead of the mountain edges, which keep their relative order. Tasks
/// lying inside one tall task's edges move with it, tasks lying on mountain
/// edges only move with those, and every other task keeps its start.
pub fn restructure_tall(instance: &Instance, schedule: &Schedule, tall_set: &BTreeSet<TaskId>) -> Result<Schedule> {
    let w = instance.width();
    let mut talls: Vec<(Task, i64)> = Vec::new();
    for id in tall_set {
        let t = *instance.task(*id).ok_or_else(|| DspError::Precondition(format!("unknown tall task {id}")))?;
        let s = schedule.start(*id).ok_or_else(|| DspError::Precondition(format!("tall task {id} is unscheduled")))?;
        talls.push((t, s));
    }
    talls.sort_by_key(|&(t, s)| (s, t.id));
    for pair in talls.windows(2) {
        let (a, sa) = pair[0];
        if sa + a.width > pair[1].1 {
            return Err(DspError::Precondition(format!("tall tasks {} and {} overlap", a.id, pair[1].0.id)));
        }
    }
    // owner[e] = index of the tall covering edge e.
    let mut owner: Vec<Option<usize>> = vec![None; w as usize];
    for (k, &(t, s)) in talls.iter().enumerate() {
        (s..s + t.width).for_each(|e| owner[e as usize] = Some(k));
    }
    let mut order: Vec<usize> = (0..talls.len()).collect();
    order.sort_by_key(|&k| (Reverse(talls[k].0.height), talls[k].0.id));
    let mut new_tall_start = vec![0; talls.len()];
    let mut x = 0;
    for &k in &order {
        new_tall_start[k] = x;
        x += talls[k].0.width;
    }
    // Mountain edges keep their order after the tall prefix.
    let mut mountain_pos = vec![-1; w as usize];
    for e in 0..w as usize {
        if owner[e].is_none() {
            mountain_pos[e] = x;
            x += 1;
        }
    }
    let mut out = Schedule::new();
    for (id, s) in schedule.iter() {
        let t = instance.task(id).ok_or_else(|| DspError::Precondition(format!("unknown task {id}")))?;
        let edges = s as usize..(s + t.width) as usize;
        let first = owner[edges.start];
        if let Some(k) = first.filter(|_| owner[edges.clone()].iter().all(|o| *o == first)) {
            out.place(id, new_tall_start[k] + (s - talls[k].1));
        } else if owner[edges.clone()].iter().all(Option::is_none) {
            out.place(id, mountain_pos[edges.start]);
        } else {
            out.place(id, s);
        }
    }
    Ok(out)
}

fn level(h: i64, eps: &Rational, g: i64) -> i64 {
    // ⌈h / (ε g)⌉
    ratio::ceil(&(ratio::int(h) / (eps * ratio::int(g))))
}

/// Tall containers over the tall prefix plus one container per large task.
///
/// Tall heights are rounded up to multiples of `ε · g`; each maximal run of
/// consecutive tall tasks with the same rounded level becomes one vertical
/// container of height `⌈k ε g⌉` spanning the run.
pub fn build_tall_large_containers(instance: &Instance, structured: &Schedule, class: &Classification) -> Result<ContainerPacking> {
    let eps = &class.eps;
    let g = class.opt_guess;
    if class.opt_guess <= 0 {
        return Err(DspError::Precondition("opt_guess must be positive".into()));
    }
    let mut talls: Vec<(i64, Task)> = class
        .tall
        .iter()
        .map(|id| {
            let s = structured.start(*id).ok_or_else(|| DspError::Precondition(format!("tall task {id} unscheduled")))?;
            Ok((s, *instance.task(*id).expect("classified ids exist")))
        })
        .collect::<Result<_>>()?;
    talls.sort_by_key(|&(s, t)| (s, t.id));
    let mut expected = 0;
    for pair in talls.windows(2) {
        if pair[1].1.height > pair[0].1.height {
            return Err(DspError::Precondition("tall tasks are not in non-increasing height order".into()));
        }
    }
    for &(s, t) in &talls {
        if s != expected {
            return Err(DspError::Precondition(format!("tall task {} is not on the prefix", t.id)));
        }
        expected += t.width;
    }
    let mut packing = ContainerPacking::default();
    let mut k = 0;
    while k < talls.len() {
        let lv = level(talls[k].1.height, eps, g);
        let mut j = k;
        while j < talls.len() && level(talls[j].1.height, eps, g) == lv {
            j += 1;
        }
        let width: i64 = talls[k..j].iter().map(|(_, t)| t.width).sum();
        let height = ratio::ceil(&(ratio::int(lv) * eps * ratio::int(g)));
        let c = packing.push(ContainerKind::Vertical, width, height, talls[k].0);
        for (_, t) in &talls[k..j] {
            packing.assign(t, c);
        }
        k = j;
    }
    if ratio::int(class.large.len() as i64) * eps * class.delta > Rational::from_integer(1) {
        return Err(DspError::Infeasible(format!("{} large tasks exceed 1/(eps delta)", class.large.len())));
    }
    for id in &class.large {
        let t = *instance.task(*id).expect("classified ids exist");
        let s = structured.start(*id).ok_or_else(|| DspError::Precondition(format!("large task {id} unscheduled")))?;
        let c = packing.push(ContainerKind::Vertical, t.width, t.height, s);
        packing.assign(&t, c);
    }
    Ok(packing)
}

/// Horizontal containers and the tasks that did not fit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizontalContainers {
    /// Containers with their start edges; the last one is the full-width
    /// container for `removed`.
    pub packing: ContainerPacking,
    pub removed: BTreeSet<TaskId>,
    pub removed_height: i64,
}

/// Linear grouping of unit-height slices of the horizontal tasks.
///
/// Slices are piled widest first; groups of `⌊ε g⌋` (at least 1) slices are
/// formed from the bottom. Tasks with a slice in the first group are
/// removed. Slices of later groups take the width of the narrowest slice of
/// the previous group and the start of the slice one group below them, so
/// the rounded slices never exceed the reference profile. Rounded slices
/// are then shifted left while staying below `d`, grouped by `(start,
/// width)` into containers, tasks are repacked first fit by width class,
/// split tasks are removed, and container heights are rounded up to
/// multiples of `ε g / K`. One extra full-width container holds the
/// removed tasks; it is as tall as their total height, which must not
/// exceed `⌈3 ε g⌉`.
pub fn build_horizontal_containers(
    instance: &Instance,
    h_reference: &Schedule,
    d: &DemandProfile,
    class: &Classification,
    k: i64,
) -> Result<HorizontalContainers> {
    let w = instance.width();
    let g = class.opt_guess;
    let eps = &class.eps;
    let mut tasks: Vec<Task> =
        class.horizontal.iter().map(|id| *instance.task(*id).expect("classified ids exist")).filter(|t| t.height > 0).collect();
    let reference = h_reference.restrict(&tasks.iter().map(|t| t.id).collect());
    for t in &tasks {
        if !reference.is_scheduled(t.id) {
            return Err(DspError::Precondition(format!("horizontal task {} missing from the reference", t.id)));
        }
    }
    if !DemandProfile::build(instance, &reference).dominated_by(d) {
        return Err(DspError::Infeasible("horizontal reference profile exceeds the available profile".into()));
    }
    tasks.sort_by_key(|t| (Reverse(t.width), t.id));
    let group = ratio::floor_mul(eps, g).max(1) as usize;
    // The pile, bottom first: one entry per slice.
    let pile: Vec<&Task> = tasks.iter().flat_map(|t| std::iter::repeat_n(t, t.height as usize)).collect();
    let mut removed: BTreeSet<TaskId> = pile.iter().take(group).map(|t| t.id).collect();
    // batches[(start, width)] = number of rounded slices
    let mut batches: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    let mut slice_owner: Vec<(TaskId, i64)> = Vec::new();
    for (p, t) in pile.iter().enumerate().skip(group) {
        if removed.contains(&t.id) {
            continue;
        }
        let gi = p / group;
        let prev = &pile[(gi - 1) * group..gi * group];
        let rounded = prev.iter().map(|s| s.width).min().expect("previous group is full");
        let below = pile[p - group];
        let start = reference.start(below.id).expect("checked above");
        *batches.entry((start, rounded)).or_insert(0) += 1;
        slice_owner.push((t.id, rounded));
    }

    // Shift batches left while the slice profile stays below d.
    let mut profile = DemandProfile::from_intervals(w, batches.iter().map(|(&(s, wd), &n)| (s, wd, n)));
    loop {
        let mut moved = false;
        let keys: Vec<(i64, i64)> = batches.keys().copied().collect();
        for key in keys {
            let Some(&n) = batches.get(&key) else { continue };
            let (s, wd) = key;
            profile.add(s, s + wd, -n);
            let mut target = s;
            while target > 0 && profile.at(target - 1) + n <= d.at(target - 1) {
                target -= 1;
            }
            profile.add(target, target + wd, n);
            if target != s {
                batches.remove(&key);
                *batches.entry((target, wd)).or_insert(0) += n;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    let mut packing = ContainerPacking::default();
    let mut by_width: BTreeMap<i64, Vec<(usize, i64)>> = BTreeMap::new();
    for (&(s, wd), &n) in &batches {
        let c = packing.push(ContainerKind::Horizontal, wd, n, s);
        by_width.entry(wd).or_default().push((c, n));
    }
    // First-fit repack of rounded slices, siblings consecutive.
    let mut fill: BTreeMap<usize, i64> = BTreeMap::new();
    let mut task_slices: BTreeMap<TaskId, (i64, BTreeSet<usize>)> = BTreeMap::new();
    for &(id, wd) in &slice_owner {
        let list = by_width.get(&wd).expect("width class exists");
        let &(c, _) = list.iter().find(|&&(c, cap)| fill.get(&c).copied().unwrap_or(0) < cap).expect("slice count equals capacity");
        *fill.entry(c).or_insert(0) += 1;
        let entry = task_slices.entry(id).or_insert((wd, BTreeSet::new()));
        entry.1.insert(c);
    }
    for (id, (_, cs)) in &task_slices {
        if cs.len() == 1 {
            let t = instance.task(*id).expect("classified ids exist");
            packing.assign(t, *cs.iter().next().unwrap());
        } else {
            removed.insert(*id);
        }
    }
    let step = eps * ratio::int(g) / ratio::int(k);
    for c in packing.containers.iter_mut() {
        c.height = ratio::ceil(&(ratio::int(ratio::ceil(&(ratio::int(c.height) / step))) * step));
    }
    let removed_height = instance.height_of(&removed);
    let cap = ratio::ceil(&(rat(3, 1) * eps * ratio::int(g)));
    if removed_height > cap {
        return Err(DspError::Infeasible(format!("removed horizontal height {removed_height} exceeds 3 eps g = {cap}")));
    }
    let extra = packing.push(ContainerKind::Horizontal, w, removed_height, 0);
    for id in &removed {
        packing.assign(instance.task(*id).expect("classified ids exist"), extra);
    }
    Ok(HorizontalContainers { packing, removed, removed_height })
}

/// Area-maximising assignment of tasks to containers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapOutcome {
    /// Task id to index into the container slice.
    pub assignment: BTreeMap<TaskId, usize>,
    pub leftovers: BTreeSet<TaskId>,
    pub assigned_area: i64,
    /// The search finished within its node budget.
    pub complete: bool,
}

const GAP_NODE_BUDGET: u64 = 5_000_000;

/// Branch and bound over tasks in decreasing area order; each task goes to
/// a compatible container with room, or stays out. A branch is cut when
/// even packing every remaining compatible task could not beat the
/// incumbent by more than a factor `1 / (1 − ε′)`, so the result is within
/// `(1 − ε′)` of the best packing when the search completes.
pub fn gap_pack(tasks: &[Task], containers: &[Container], eps_prime: &Rational) -> GapOutcome {
    let mut order: Vec<Task> = tasks.iter().copied().filter(|t| containers.iter().any(|c| c.accepts(t))).collect();
    order.sort_by_key(|t| (Reverse(t.area()), Reverse(t.width.max(t.height)), t.id));
    let zero: Vec<Task> = order.iter().copied().filter(|t| t.area() == 0).collect();
    order.retain(|t| t.area() > 0);

    struct Search<'a> {
        order: &'a [Task],
        containers: &'a [Container],
        suffix: Vec<i64>,
        used: Vec<i64>,
        current: Vec<Option<usize>>,
        cur_area: i64,
        best: Vec<Option<usize>>,
        best_area: i64,
        keep: Rational,
        nodes: u64,
    }
    impl Search<'_> {
        fn run(&mut self, k: usize) {
            self.nodes += 1;
            if self.nodes > GAP_NODE_BUDGET {
                return;
            }
            if self.cur_area > self.best_area {
                self.best_area = self.cur_area;
                self.best = self.current.clone();
            }
            if k == self.order.len() {
                return;
            }
            let free: i64 = self
                .containers
                .iter()
                .zip(&self.used)
                .map(|(c, &u)| (c.capacity() - u) * if c.kind == ContainerKind::Vertical { c.height } else { c.width })
                .sum();
            let bound = self.cur_area + self.suffix[k].min(free);
            if Rational::from_integer(bound as i128) * self.keep <= Rational::from_integer(self.best_area as i128) {
                return;
            }
            let t = self.order[k];
            for (j, c) in self.containers.iter().enumerate() {
                if c.accepts(&t) && self.used[j] + c.load(&t) <= c.capacity() {
                    self.used[j] += c.load(&t);
                    self.current[k] = Some(j);
                    self.cur_area += t.area();
                    self.run(k + 1);
                    self.cur_area -= t.area();
                    self.current[k] = None;
                    self.used[j] -= c.load(&t);
                }
            }
            self.run(k + 1);
        }
    }

    let mut suffix = vec![0; order.len() + 1];
    for k in (0..order.len()).rev() {
        suffix[k] = suffix[k + 1] + order[k].area();
    }
    // Greedy warm start.
    let mut used = vec![0; containers.len()];
    let mut greedy = vec![None; order.len()];
    let mut greedy_area = 0;
    for (k, t) in order.iter().enumerate() {
        if let Some(j) =
            (0..containers.len()).find(|&j| containers[j].accepts(t) && used[j] + containers[j].load(t) <= containers[j].capacity())
        {
            used[j] += containers[j].load(t);
            greedy[k] = Some(j);
            greedy_area += t.area();
        }
    }
    let mut search = Search {
        order: &order,
        containers,
        suffix,
        used: vec![0; containers.len()],
        current: vec![None; order.len()],
        cur_area: 0,
        best: greedy,
        best_area: greedy_area,
        keep: Rational::from_integer(1) - eps_prime,
        nodes: 0,
    };
    search.run(0);
    let complete = search.nodes <= GAP_NODE_BUDGET;
    let mut assignment = BTreeMap::new();
    for (k, slot) in search.best.iter().enumerate() {
        if let Some(j) = slot {
            assignment.insert(order[k].id, *j);
        }
    }
    for t in &zero {
        if let Some(j) = containers.iter().position(|c| c.accepts(t) && c.kind == ContainerKind::Horizontal) {
            assignment.insert(t.id, j);
        }
    }
    let leftovers = tasks.iter().map(|t| t.id).filter(|id| !assignment.contains_key(id)).collect();
    GapOutcome { assignment, leftovers, assigned_area: search.best_area, complete }
}

/// Exhaustive optimum of the area-maximising assignment, for tests.
pub fn gap_optimum(tasks: &[Task], containers: &[Container]) -> i64 {
    fn rec(k: usize, tasks: &[Task], cs: &[Container], used: &mut Vec<i64>, area: i64, best: &mut i64) {
        if k == tasks.len() {
            *best = (*best).max(area);
            return;
        }
        rec(k + 1, tasks, cs, used, area, best);
        let t = &tasks[k];
        for j in 0..cs.len() {
            if cs[j].accepts(t) && used[j] + cs[j].load(t) <= cs[j].capacity() {
                used[j] += cs[j].load(t);
                rec(k + 1, tasks, cs, used, area + t.area(), best);
                used[j] -= cs[j].load(t);
            }
        }
    }
    let mut best = 0;
    rec(0, tasks, containers, &mut vec![0; containers.len()], 0, &mut best);
    best
}

/// Non-narrow schedule for one guess, with its containers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonNarrow {
    pub schedule: Schedule,
    pub packing: ContainerPacking,
    pub trace: Vec<String>,
}

fn peak_cap(class: &Classification, extra: Rational) -> i64 {
    ratio::floor(&((rat(5, 3) + extra) * ratio::int(class.opt_guess)))
}

/// Schedules every task outside the narrow class with peak at most
/// `⌊(5/3 + 7ε) g⌋`, using `reference` for the tall/large layout and the
/// horizontal profile.
pub fn schedule_non_narrow(instance: &Instance, class: &Classification, reference: &Schedule, k: i64) -> Result<NonNarrow> {
    let w = instance.width();
    let g = class.opt_guess;
    let eps = class.eps;
    let mut trace = Vec::new();
    let structured = restructure_tall(instance, reference, &class.tall).map_err(|e| match e {
        DspError::Precondition(m) => DspError::Infeasible(format!("restructuring: {m}")),
        other => other,
    })?;
    let mut packing = build_tall_large_containers(instance, &structured, class)?;
    let tl_profile = packing.container_profile(w);
    let mut d = DemandProfile::zero(w);
    d.add(0, w, peak_cap(class, eps));
    for (k2, &(s, dem)) in tl_profile.runs().iter().enumerate() {
        let end = tl_profile.runs().get(k2 + 1).map_or(w, |r| r.0);
        d.add(s, end, -dem);
    }
    if d.runs().iter().any(|r| r.1 < 0) {
        return Err(DspError::Infeasible("tall and large containers exceed (5/3 + eps) g".into()));
    }
    let horizontal = build_horizontal_containers(instance, &structured, &d, class, k)?;
    trace.push(format!("{} horizontal containers, removed height {}", horizontal.packing.containers.len(), horizontal.removed_height));

    // Containers from the horizontal construction, minus their contents,
    // receive the horizontal tasks through the assignment step.
    let offset = packing.containers.len();
    let h_containers: Vec<Container> = horizontal.packing.containers.iter().map(|c| Container { id: c.id + offset, ..*c }).collect();
    let extra_id = h_containers.last().map(|c| c.id);
    for c in &h_containers {
        let start = horizontal.packing.container_schedule[&(c.id - offset)];
        packing.containers.push(*c);
        packing.container_schedule.insert(c.id, start);
    }
    let removed_tasks: Vec<Task> = horizontal.removed.iter().map(|id| *instance.task(*id).unwrap()).collect();
    for t in &removed_tasks {
        packing.assign(t, extra_id.expect("extra container exists"));
    }
    let gap_tasks: Vec<Task> =
        class.horizontal.iter().filter(|id| !horizontal.removed.contains(id)).map(|id| *instance.task(*id).unwrap()).collect();
    let gap_bins = &h_containers[..h_containers.len() - 1];
    let gap = gap_pack(&gap_tasks, gap_bins, &(eps * eps));
    for (&id, &j) in &gap.assignment {
        packing.assign(instance.task(id).unwrap(), gap_bins[j].id);
    }
    let leftover_h = instance.height_of(&gap.leftovers);
    if ratio::gt_scaled(leftover_h, &eps, g) {
        trace.push(format!("assignment leftovers of height {leftover_h} exceed eps g"));
    }
    let lc = packing.push(ContainerKind::Horizontal, w, leftover_h, 0);
    for id in &gap.leftovers {
        packing.assign(instance.task(*id).unwrap(), lc);
    }
    let medium_h = instance.height_of(&class.medium);
    if ratio::gt_scaled(medium_h, &eps, g) {
        trace.push(format!("medium height {medium_h} exceeds eps g"));
    }
    let mc = packing.push(ContainerKind::Horizontal, w, medium_h, 0);
    for id in &class.medium {
        packing.assign(instance.task(*id).unwrap(), mc);
    }
    let cap = peak_cap(class, rat(7, 1) * eps);
    let container_peak = packing.container_profile(w).peak();
    if container_peak > cap {
        return Err(DspError::Infeasible(format!("container schedule peak {container_peak} exceeds (5/3 + 7 eps) g = {cap}")));
    }
    packing.verify(instance)?;
    let mut schedule = packing.induced_schedule();
    for t in instance.tasks() {
        if t.height == 0 && !class.narrow.contains(&t.id) {
            schedule.place(t.id, 0);
        }
    }
    Ok(NonNarrow { schedule, packing, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContainerMode {
    /// Containers derived from a concrete reference schedule.
    Guided,
    /// Container shapes enumerated and scheduled by brute force.
    Enumerate,
}

impl std::str::FromStr for ContainerMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "guided" => Ok(ContainerMode::Guided),
            "enumerate" => Ok(ContainerMode::Enumerate),
            other => Err(format!("unknown mode `{other}` (expected guided or enumerate)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiveThirdsOptions {
    pub eps: Rational,
    pub mode: ContainerMode,
    /// Budget of the exact oracle used as the guided reference.
    pub budget: OracleBudget,
    /// Largest instance handed to the exact oracle.
    pub oracle_max_tasks: usize,
}

impl FiveThirdsOptions {
    pub fn new(eps: Rational) -> Self {
        FiveThirdsOptions {
            eps,
            mode: ContainerMode::Guided,
            budget: OracleBudget { max_nodes: 20_000_000, time_limit: std::time::Duration::from_secs(10), ..OracleBudget::default() },
            oracle_max_tasks: 12,
        }
    }
}

/// Largest admissible `ε`.
pub fn eps_max() -> Rational {
    rat(1, 3)
}

pub fn five_thirds(instance: &Instance, eps: &Rational) -> Result<(Schedule, SolveReport)> {
    five_thirds_with(instance, &FiveThirdsOptions::new(*eps))
}

/// Guesses `v₀ = LB, v_{k+1} = ⌈v_k (1 + ε)⌉` up to `2 LB`, with `2 LB`
/// always included. Consecutive guesses are within a factor `1 + ε` plus
/// one unit of each other.
pub fn guess_grid(lb: i64, eps: &Rational) -> Vec<i64> {
    let lb = lb.max(1);
    let step = Rational::from_integer(1) + eps;
    let mut out = vec![lb];
    loop {
        let v = ratio::ceil(&(step * ratio::int(*out.last().unwrap())));
        if v >= 2 * lb {
            break;
        }
        out.push(v);
    }
    if lb < 2 * lb {
        out.push(2 * lb);
    }
    out
}

pub fn five_thirds_with(instance: &Instance, opts: &FiveThirdsOptions) -> Result<(Schedule, SolveReport)> {
    let clock = Instant::now();
    let eps = opts.eps;
    if !(ratio::is_positive(&eps) && eps <= eps_max()) {
        return Err(DspError::Precondition(format!("eps must lie in (0, 1/3], got {}", ratio::display(&eps))));
    }
    let lb = lower_bound(instance).value;
    let (fallback, fallback_peak) = two_approx_schedule(instance)?;
    let mut trace = Vec::new();
    let mut mode = opts.mode;
    let mut reference: Option<(Schedule, i64, &'static str)> = None;
    if mode == ContainerMode::Enumerate && !enumerate_admissible(instance, &eps, lb) {
        trace.push("instance outside the enumeration gate; using guided mode".to_string());
        mode = ContainerMode::Guided;
    }
    if mode == ContainerMode::Guided {
        reference = Some(if instance.len() <= opts.oracle_max_tasks && opts.budget.admits(instance) {
            let r = exact_dsp(instance, &opts.budget);
            (r.solution, r.peak, if r.proven_optimal { "exact" } else { "exact-bounded" })
        } else {
            (fallback.clone(), fallback_peak, "two-approx")
        });
    }
    let mut accepted: Option<(Schedule, i64, i64)> = None;
    if lb > 0 {
        for g in guess_grid(lb, &eps) {
            let attempt = match mode {
                ContainerMode::Guided => {
                    let (r, _, _) = reference.as_ref().unwrap();
                    five_thirds_guess(instance, &eps, g, |class, k| schedule_non_narrow(instance, class, r, k))
                }
                ContainerMode::Enumerate => five_thirds_guess(instance, &eps, g, |class, _| enumerate_non_narrow(instance, class)),
            };
            match attempt {
                Ok((s, peak)) => {
                    trace.push(format!("guess {g}: accepted with peak {peak}"));
                    accepted = Some((s, peak, g));
                    break;
                }
                Err(e) if e.is_defect() => return Err(e),
                Err(e) => trace.push(format!("guess {g}: {e}")),
            }
        }
    }
    let accepted_guess = accepted.as_ref().map(|a| a.2);
    let (schedule, peak, source) = match accepted {
        Some((s, p, _)) if p <= fallback_peak => (s, p, "containers"),
        Some(_) => (fallback, fallback_peak, "two-approx (lower peak)"),
        None => {
            trace.push("no guess accepted; using the 2-approximation".into());
            (fallback, fallback_peak, "two-approx (fallback)")
        }
    };
    let mut report = SolveReport::new("five-thirds", peak, lb, clock.elapsed())
        .with_param("eps", ratio::display(&eps))
        .with_param("mode", format!("{mode:?}").to_lowercase())
        .with_param("source", source)
        .with_certified("peak <= 2 LB; peak <= (5/3 + 7 eps) g for the accepted guess g");
    if let Some((_, p, kind)) = &reference {
        report = report.with_param("reference", format!("{kind} peak {p}"));
    }
    if let Some(g) = accepted_guess {
        report = report.with_param("opt_guess", g);
    }
    report.trace = trace;
    Ok((schedule, report))
}

fn five_thirds_guess(
    instance: &Instance,
    eps: &Rational,
    g: i64,
    non_narrow: impl Fn(&Classification, i64) -> Result<NonNarrow>,
) -> Result<(Schedule, i64)> {
    let dm = choose_delta_mu(instance, eps, g);
    if !dm.qualified {
        return Err(DspError::Infeasible("no delta bounds the medium area".into()));
    }
    let class = classify_tasks(instance, eps, &dm.mu, &dm.delta, g)?;
    let part = non_narrow(&class, dm.k)?;
    let pi = peak_cap(&class, rat(7, 1) * eps);
    let narrow: BTreeSet<TaskId> = class.narrow.iter().copied().filter(|id| !part.schedule.is_scheduled(*id)).collect();
    let full = push_and_fill(instance, &part.schedule, &narrow, &class.tall, &(rat(7, 1) * eps), g, pi)?;
    let peak = DemandProfile::build(instance, &full).peak();
    if peak > pi || full.len() != instance.len() {
        return Err(DspError::Defect(format!("assembled schedule has peak {peak} > {pi} or misses tasks")));
    }
    Ok((full, peak))
}

const ENUM_MAX_HORIZONTAL: usize = 6;
const ENUM_MAX_LARGE: usize = 4;
const ENUM_MAX_PRODUCT: f64 = 1e6;

fn enumerate_admissible(instance: &Instance, eps: &Rational, lb: i64) -> bool {
    // The gate uses the classification at the lower bound, where the
    // horizontal and large classes are largest.
    let g = lb.max(1);
    let dm = choose_delta_mu(instance, eps, g);
    match classify_tasks(instance, eps, &dm.mu, &dm.delta, g) {
        Ok(c) => c.horizontal.len() <= ENUM_MAX_HORIZONTAL && c.large.len() <= ENUM_MAX_LARGE && instance.width() <= 64,
        Err(_) => false,
    }
}

/// Container guessing on tiny instances: tall containers over the sorted
/// tall prefix, one container per large task, and every partition of the
/// horizontal tasks into horizontal containers (width of the widest member,
/// height rounded up to a multiple of `ε g / K`). Non-tall containers are
/// tried at every start that is a sum of container widths; the first
/// assignment of starts with peak `≤ ⌊(5/3 + 7ε) g⌋` wins.
pub fn enumerate_non_narrow(instance: &Instance, class: &Classification) -> Result<NonNarrow> {
    let w = instance.width();
    let g = class.opt_guess;
    let eps = class.eps;
    let (k, _) = container_bound(&eps);
    let mut tall: Vec<Task> = class.tall.iter().map(|id| *instance.task(*id).unwrap()).collect();
    tall.sort_by_key(|t| (Reverse(t.height), t.id));
    let mut prefix = Schedule::new();
    let mut x = 0;
    for t in &tall {
        prefix.place(t.id, x);
        x += t.width;
    }
    if x > w {
        return Err(DspError::Infeasible("tall tasks do not fit side by side".into()));
    }
    let mut base = build_tall_large_containers(instance, &prefix, &Classification { large: BTreeSet::new(), ..class.clone() })?;
    let horizontal: Vec<Task> = class.horizontal.iter().map(|id| *instance.task(*id).unwrap()).filter(|t| t.height > 0).collect();
    let large: Vec<Task> = class.large.iter().map(|id| *instance.task(*id).unwrap()).collect();
    let step = eps * ratio::int(g) / ratio::int(k);
    let round = |h: i64| ratio::ceil(&(ratio::int(ratio::ceil(&(ratio::int(h) / step))) * step));
    let cap = peak_cap(class, rat(7, 1) * eps);
    let medium_h = instance.height_of(&class.medium);

    let mut best: Option<(i64, ContainerPacking)> = None;
    let mut evaluated = 0f64;
    for partition in set_partitions(horizontal.len()) {
        let mut shapes: Vec<(i64, i64, Vec<Task>)> = large.iter().map(|t| (t.width, t.height, vec![*t])).collect();
        for block in &partition {
            let members: Vec<Task> = block.iter().map(|&i| horizontal[i]).collect();
            let wd = members.iter().map(|t| t.width).max().unwrap();
            let ht = round(members.iter().map(|t| t.height).sum());
            shapes.push((wd, ht, members));
        }
        let mut widths: Vec<i64> = base.containers.iter().map(|c| c.width).collect();
        widths.extend(shapes.iter().map(|s| s.0));
        let starts: Vec<i64> = subset_sums(&widths, w, 100_000).map(|s| s.into_iter().collect()).unwrap_or_else(|| (0..w).collect());
        let combos = (starts.len() as f64).powi(shapes.len() as i32);
        evaluated += combos;
        if evaluated > ENUM_MAX_PRODUCT {
            return Err(DspError::Limit("container enumeration exceeds its candidate budget".into()));
        }
        let mut prof = base.container_profile(w);
        prof.add(0, w, medium_h);
        let mut chosen = vec![0; shapes.len()];
        if let Some(peak) = place_shapes(&shapes, &starts, 0, &mut prof, &mut chosen, cap) {
            if best.as_ref().is_none_or(|b| peak < b.0) {
                let mut p = base.clone();
                for (s, &start) in shapes.iter().zip(&chosen) {
                    let kind = if class.large.contains(&s.2[0].id) { ContainerKind::Vertical } else { ContainerKind::Horizontal };
                    let c = p.push(kind, s.0, s.1, start);
                    for t in &s.2 {
                        p.assign(t, c);
                    }
                }
                best = Some((peak, p));
            }
        }
    }
    let Some((_, mut packing)) = best else {
        return Err(DspError::Infeasible("no container configuration fits (5/3 + 7 eps) g".into()));
    };
    let mc = packing.push(ContainerKind::Horizontal, w, medium_h, 0);
    for id in &class.medium {
        packing.assign(instance.task(*id).unwrap(), mc);
    }
    packing.verify(instance)?;
    let mut schedule = packing.induced_schedule();
    for t in instance.tasks() {
        if t.height == 0 && !class.narrow.contains(&t.id) {
            schedule.place(t.id, 0);
        }
    }
    base = packing;
    Ok(NonNarrow { schedule, packing: base, trace: Vec::new() })
}

fn place_shapes(
    shapes: &[(i64, i64, Vec<Task>)],
    starts: &[i64],
    k: usize,
    prof: &mut DemandProfile,
    chosen: &mut [i64],
    cap: i64,
) -> Option<i64> {
    if k == shapes.len() {
        return Some(prof.peak());
    }
    let (wd, ht, _) = shapes[k];
    let mut best: Option<(i64, Vec<i64>)> = None;
    for &s in starts {
        if s + wd > prof.width() || prof.max_on(s, s + wd) + ht > cap {
            continue;
        }
        prof.add(s, s + wd, ht);
        chosen[k] = s;
        if let Some(p) = place_shapes(shapes, starts, k + 1, prof, chosen, cap) {
            if best.as_ref().is_none_or(|b| p < b.0) {
                best = Some((p, chosen.to_vec()));
            }
        }
        prof.add(s, s + wd, -ht);
    }
    best.map(|(p, c)| {
        chosen.copy_from_slice(&c);
        p
    })
}

/// Every partition of `0..n` into non-empty blocks.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schedule;

    fn inst(w: i64, dims: &[(i64, i64)]) -> Instance {
        Instance::new(w, dims.iter().enumerate().map(|(i, &(a, b))| Task::new(i as u64, a, b)).collect()).unwrap()
    }

    #[test]
    fn classification_thresholds_are_exact() {
        let i = inst(10, &[(10, 6), (3, 4), (3, 5), (1, 4), (3, 1)]);
        let c = classify_tasks(&i, &rat(1, 5), &rat(1, 100), &rat(1, 5), 6).unwrap();
        assert!(c.tall.contains(&0));
        // h = 4 = (2/3)·6 is not tall.
        assert!(c.large.contains(&1));
        assert!(c.tall.contains(&2));
        assert!(c.narrow.contains(&3));
        assert!(c.medium.contains(&4));
        assert!(classify_tasks(&i, &rat(1, 5), &rat(1, 100), &rat(1, 5), 5).is_err());
    }

    #[test]
    fn narrow_only_instance_picks_first_delta() {
        let i = inst(10, &[(1, 1), (2, 1)]);
        let dm = choose_delta_mu(&i, &rat(1, 2), 4);
        assert_eq!(dm.delta, rat(1, 2));
        assert!(dm.qualified);
        assert_eq!((dm.k, dm.k_capped), (1000, false));
        assert!(container_bound(&rat(1, 4)).1);
    }

    #[test]
    fn restructure_moves_lone_tall_to_front() {
        let i = inst(7, &[(2, 5)]);
        let s: Schedule = [(0, 5)].into_iter().collect();
        let out = restructure_tall(&i, &s, &[0].into_iter().collect()).unwrap();
        assert_eq!(out.start(0), Some(0));
        let none = restructure_tall(&i, &s, &BTreeSet::new()).unwrap();
        assert_eq!(none, s);
    }

    #[test]
    fn restructure_rejects_overlapping_talls() {
        let i = inst(7, &[(2, 5), (2, 5)]);
        let s: Schedule = [(0, 0), (1, 1)].into_iter().collect();
        assert!(restructure_tall(&i, &s, &[0, 1].into_iter().collect()).is_err());
    }

    #[test]
    fn single_tall_container_is_rounded_up() {
        let i = inst(6, &[(3, 9)]);
        let s: Schedule = [(0, 0)].into_iter().collect();
        let c = classify_tasks(&i, &rat(1, 2), &rat(1, 1000), &rat(1, 2), 10).unwrap();
        let p = build_tall_large_containers(&i, &s, &c).unwrap();
        assert_eq!(p.containers.len(), 1);
        assert_eq!((p.containers[0].width, p.containers[0].height), (3, 10));
    }

    #[test]
    fn two_tall_levels_give_two_containers() {
        let i = inst(8, &[(2, 20), (3, 14)]);
        let s: Schedule = [(0, 0), (1, 2)].into_iter().collect();
        let c = classify_tasks(&i, &rat(1, 4), &rat(1, 1000), &rat(1, 4), 20).unwrap();
        let p = build_tall_large_containers(&i, &s, &c).unwrap();
        let dims: Vec<(i64, i64)> = p.containers.iter().map(|c| (c.width, c.height)).collect();
        assert_eq!(dims, vec![(2, 20), (3, 15)]);
        p.verify(&i).unwrap();
    }

    #[test]
    fn gap_exact_fill_has_no_leftovers() {
        let tasks = [Task::new(0, 2, 1), Task::new(1, 3, 1)];
        let cs = [Container { id: 0, kind: ContainerKind::Vertical, width: 5, height: 1 }];
        let out = gap_pack(&tasks, &cs, &rat(1, 10));
        assert!(out.leftovers.is_empty());
        assert_eq!(out.assigned_area, 5);
    }

    #[test]
    fn incompatible_task_is_left_over() {
        let tasks = [Task::new(0, 9, 9)];
        let cs = [
            Container { id: 0, kind: ContainerKind::Vertical, width: 10, height: 3 },
            Container { id: 1, kind: ContainerKind::Horizontal, width: 4, height: 20 },
        ];
        let out = gap_pack(&tasks, &cs, &rat(1, 10));
        assert_eq!(out.leftovers, [0].into_iter().collect());
    }

    #[test]
    fn guess_grid_is_sorted_and_bounded() {
        assert_eq!(guess_grid(4, &rat(1, 2)), vec![4, 6, 8]);
        assert_eq!(guess_grid(1, &rat(1, 10)), vec![1, 2]);
    }

    #[test]
    fn five_thirds_on_single_task() {
        let i = inst(5, &[(3, 7)]);
        let (s, r) = five_thirds(&i, &rat(1, 10)).unwrap();
        assert_eq!(validate_schedule(&i, &s, true), Ok(7));
        assert_eq!(r.peak, 7);
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let counts: Vec<usize> = (0..6).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52]);
    }
}
