//! Next-fit style filling of sorted profiles and the 2-approximation.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::bounds::lower_bound;
use crate::error::{DspError, Result};
use crate::model::{Instance, Schedule, SolveReport, Task, TaskId};
use crate::profile::{is_sorted, left_push, sortedness_witness, DemandProfile};
use crate::ratio::{self, Rational};

/// Places `remaining` on top of a sorted partial schedule with peak `≤ pi`.
///
/// A single frontier edge `e_check` moves left to right over the demand
/// breakpoints; at each frontier every still-unplaced task, in descending
/// `(height, width, id)` order, is started there if it fits. The partial
/// schedule is never modified.
pub fn nfd_fill(instance: &Instance, sorted_partial: &Schedule, remaining: &BTreeSet<TaskId>, pi: i64) -> Result<Schedule> {
    if remaining.is_empty() {
        return Ok(sorted_partial.clone());
    }
    let w = instance.width();
    let mut tasks: Vec<Task> = remaining
        .iter()
        .map(|id| instance.task(*id).copied().ok_or_else(|| DspError::Precondition(format!("unknown task {id}"))))
        .collect::<Result<_>>()?;
    if let Some(t) = tasks.iter().find(|t| sorted_partial.is_scheduled(t.id)) {
        return Err(DspError::Precondition(format!("task {} is both scheduled and remaining", t.id)));
    }
    let mut profile = DemandProfile::build(instance, sorted_partial);
    if profile.peak() > pi {
        return Err(DspError::Precondition(format!("partial peak {} exceeds {pi}", profile.peak())));
    }
    if !is_sorted(&profile, 0, 0) {
        return Err(DspError::Precondition("partial schedule is not sorted".into()));
    }

    let h2 = tasks.iter().map(|t| t.height).max().unwrap_or(0) as i128;
    let w2 = tasks.iter().map(|t| t.width).max().unwrap_or(0) as i128;
    let area = (instance.area_of(&sorted_partial.ids()) + tasks.iter().map(Task::area).sum::<i64>()) as i128;
    let (wi, pii) = (w as i128, pi as i128);
    if pii * wi < h2 * wi + area.max(h2 * wi) {
        return Err(DspError::Precondition(format!(
            "first bullet: pi = {pi} < h_max + max(a/W, h_max) with h_max = {h2}, a = {area}, W = {w}"
        )));
    }
    if 2 * w2 > wi {
        return Err(DspError::Precondition(format!("second bullet: w_max = {w2} > W/2 with W = {w}")));
    }
    if (wi - w2) * (pii - h2) + w2 * h2 < area {
        return Err(DspError::Precondition(format!(
            "third bullet: (W - w_max)(pi - h_max) + w_max h_max < a with W = {w}, w_max = {w2}, h_max = {h2}, a = {area}"
        )));
    }

    tasks.sort_by_key(|t| (std::cmp::Reverse(t.height), std::cmp::Reverse(t.width), t.id));
    let mut out = sorted_partial.clone();
    let mut e_check = 0;
    loop {
        tasks.retain(|t| {
            let fits = e_check + t.width <= w && profile.max_on(e_check, e_check + t.width) + t.height <= pi;
            if fits {
                profile.add(e_check, e_check + t.width, t.height);
                out.place(t.id, e_check);
            }
            !fits
        });
        if tasks.is_empty() {
            return Ok(out);
        }
        e_check = profile.next_change(e_check);
        if e_check >= w {
            return Err(DspError::Defect(format!("task {} could not be placed although all preconditions hold", tasks[0].id)));
        }
    }
}

/// Places `remaining` on top of a `((1 + alpha) · opt_guess, t*)`-sorted
/// partial schedule.
///
/// The part of the partial profile right of `t*` is non-increasing; it is
/// rebuilt as one synthetic task per run on a path of `W − t*` edges,
/// filled with [`nfd_fill`], and shifted back by `t*`.
pub fn qt_fill(
    instance: &Instance,
    partial: &Schedule,
    remaining: &BTreeSet<TaskId>,
    alpha: &Rational,
    opt_guess: i64,
    pi: i64,
) -> Result<Schedule> {
    if remaining.is_empty() {
        return Ok(partial.clone());
    }
    let w = instance.width();
    let profile = DemandProfile::build(instance, partial);
    if profile.peak() > pi {
        return Err(DspError::Precondition(format!("partial peak {} exceeds {pi}", profile.peak())));
    }
    let witness = sortedness_witness(&profile, 0);
    let t_star = witness.t_star;
    let level = (Rational::from_integer(1) + alpha) * ratio::int(opt_guess);
    if let Some(m) = profile.min_on(0, t_star) {
        if ratio::int(m) < level {
            return Err(DspError::Precondition(format!(
                "partial is not sorted at level (1 + alpha) opt_guess: demand {m} left of t* = {t_star}"
            )));
        }
    }
    let h2 = instance.h_max_of(remaining);
    let w2 = instance.w_max_of(remaining);
    if ratio::int(pi) < level + ratio::int(h2) {
        return Err(DspError::Precondition(format!(
            "pi = {pi} < (1 + alpha) opt_guess + h_max(remaining) = {}",
            ratio::display(&(level + ratio::int(h2)))
        )));
    }
    let width_cap = alpha / (Rational::from_integer(2) * (alpha + Rational::from_integer(1)));
    if ratio::gt_scaled(w2, &width_cap, w) {
        return Err(DspError::Precondition(format!(
            "w_max(remaining) = {w2} > alpha / (2 (alpha + 1)) W = {}",
            ratio::display(&(width_cap * ratio::int(w)))
        )));
    }
    let w_tilde = w - t_star;
    if w_tilde < w2 {
        return Err(DspError::Infeasible(format!("no room right of t* = {t_star} for width {w2}")));
    }

    let mut next_id = remaining.iter().next_back().copied().unwrap_or(0).max(instance.tasks().iter().map(|t| t.id).max().unwrap_or(0)) + 1;
    let mut synth_tasks = Vec::new();
    let mut synth_partial = Schedule::new();
    for (k, &(s, d)) in profile.runs().iter().enumerate() {
        let end = profile.runs().get(k + 1).map_or(w, |r| r.0);
        let (a, b) = (s.max(t_star), end);
        if a < b && d > 0 {
            synth_tasks.push(Task::new(next_id, b - a, d));
            synth_partial.place(next_id, a - t_star);
            next_id += 1;
        }
    }
    for id in remaining {
        let t = instance.task(*id).ok_or_else(|| DspError::Precondition(format!("unknown task {id}")))?;
        synth_tasks.push(*t);
    }
    let synthetic = Instance::new(w_tilde, synth_tasks).map_err(|e| DspError::Defect(format!("synthetic instance: {e}")))?;
    let filled = nfd_fill(&synthetic, &synth_partial, remaining, pi).map_err(|e| e.context("suffix fill"))?;

    let mut out = partial.clone();
    for id in remaining {
        let s = filled.start(*id).ok_or_else(|| DspError::Defect(format!("suffix fill dropped task {id}")))?;
        out.place(*id, s + t_star);
    }
    Ok(out)
}

/// Left-pushes `partial` and fills in `narrow` with [`qt_fill`].
///
/// The push level starts at the lowest value that can satisfy the sortedness
/// requirement of the fill, `max(peak, ⌈(1 + alpha) g⌉ + h_max)`, and falls
/// back to `pi` if the fill fails there. A best-fit placement of `narrow`
/// on the unpushed partial is returned instead when its peak is lower. With
/// nothing to fill the partial schedule is returned unchanged.
pub fn push_and_fill(
    instance: &Instance,
    partial: &Schedule,
    narrow: &BTreeSet<TaskId>,
    frozen: &BTreeSet<TaskId>,
    alpha: &Rational,
    opt_guess: i64,
    pi: i64,
) -> Result<Schedule> {
    if narrow.is_empty() {
        return Ok(partial.clone());
    }
    let peak = DemandProfile::build(instance, partial).peak();
    let h = instance.h_max_of(&partial.ids()).max(instance.h_max_of(narrow));
    let low = peak.max(ratio::ceil(&((Rational::from_integer(1) + alpha) * ratio::int(opt_guess))) + h).min(pi);
    let mut last = None;
    for level in if low < pi { vec![low, pi] } else { vec![pi] } {
        let pushed = left_push(instance, partial, level, frozen)?;
        match qt_fill(instance, &pushed, narrow, alpha, opt_guess, pi) {
            Ok(s) => {
                let fitted = best_fit(instance, partial, narrow);
                let better = DemandProfile::build(instance, &fitted).peak() < DemandProfile::build(instance, &s).peak();
                return Ok(if better { fitted } else { s });
            }
            Err(DspError::Precondition(m)) => last = Some(DspError::Infeasible(format!("narrow fill: {m}"))),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one level tried"))
}

/// Adds `tasks` to `partial` tallest first, each at the start that
/// minimises its own top.
pub(crate) fn best_fit(instance: &Instance, partial: &Schedule, tasks: &BTreeSet<TaskId>) -> Schedule {
    let w = instance.width();
    let mut profile = DemandProfile::build(instance, partial);
    let mut out = partial.clone();
    let mut order: Vec<_> = tasks.iter().map(|id| *instance.task(*id).expect("known task")).collect();
    order.sort_by_key(|t| (std::cmp::Reverse(t.height), std::cmp::Reverse(t.width), t.id));
    for t in order {
        let s = (0..=w - t.width).min_by_key(|&s| (profile.max_on(s, s + t.width), s)).expect("task fits the path");
        profile.add(s, s + t.width, t.height);
        out.place(t.id, s);
    }
    out
}

/// Wide tasks (`2w > W`) stacked at edge 0, everything else by [`nfd_fill`]
/// with `pi = 2 · LB`.
pub fn two_approx(instance: &Instance) -> Result<(Schedule, SolveReport)> {
    let clock = Instant::now();
    let lb = lower_bound(instance);
    let (schedule, peak) = two_approx_schedule(instance)?;
    let report = SolveReport::new("two-approx", peak, lb.value, clock.elapsed()).with_certified("peak <= 2 LB");
    Ok((schedule, report))
}

pub(crate) fn two_approx_schedule(instance: &Instance) -> Result<(Schedule, i64)> {
    let lb = lower_bound(instance);
    let w = instance.width();
    let mut wide = Schedule::new();
    let mut rest = BTreeSet::new();
    for t in instance.tasks() {
        if 2 * t.width > w {
            wide.place(t.id, 0);
        } else {
            rest.insert(t.id);
        }
    }
    let schedule = nfd_fill(instance, &wide, &rest, 2 * lb.value).map_err(|e| match e {
        DspError::Precondition(m) => DspError::Defect(format!("2-approximation precondition: {m}")),
        other => other,
    })?;
    let peak = DemandProfile::build(instance, &schedule).peak();
    if peak > 2 * lb.value {
        return Err(DspError::Defect(format!("2-approximation reached peak {peak} > 2 LB")));
    }
    Ok((schedule, peak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schedule;

    fn unit_tasks(n: u64) -> Vec<Task> {
        (0..n).map(|i| Task::new(i, 1, 1)).collect()
    }

    #[test]
    fn empty_remaining_returns_partial() {
        let inst = Instance::new(3, unit_tasks(1)).unwrap();
        let s: Schedule = [(0, 2)].into_iter().collect();
        assert_eq!(nfd_fill(&inst, &s, &BTreeSet::new(), 1).unwrap(), s);
    }

    #[test]
    fn four_unit_tasks_on_four_edges() {
        let inst = Instance::new(4, unit_tasks(4)).unwrap();
        let out = nfd_fill(&inst, &Schedule::new(), &inst.ids(), 2).unwrap();
        assert_eq!(validate_schedule(&inst, &out, true), Ok(2));
        // The scan fills edge 0 twice before moving on.
        assert_eq!(out.iter().filter(|&(_, s)| s == 0).count(), 2);
    }

    #[test]
    fn bullets_are_named() {
        let inst = Instance::new(4, unit_tasks(4)).unwrap();
        let err = nfd_fill(&inst, &Schedule::new(), &inst.ids(), 1).unwrap_err();
        assert!(err.to_string().contains("first bullet"));
        let inst = Instance::new(4, vec![Task::new(0, 3, 1)]).unwrap();
        let err = nfd_fill(&inst, &Schedule::new(), &inst.ids(), 10).unwrap_err();
        assert!(err.to_string().contains("second bullet"));
    }

    #[test]
    fn unsorted_partial_is_rejected() {
        let inst = Instance::new(4, vec![Task::new(0, 1, 1), Task::new(1, 1, 1)]).unwrap();
        let s: Schedule = [(0, 2)].into_iter().collect();
        let rest = [1].into_iter().collect();
        assert!(nfd_fill(&inst, &s, &rest, 4).is_err());
    }

    #[test]
    fn two_approx_single_task_is_exact() {
        let inst = Instance::new(6, vec![Task::new(3, 4, 9)]).unwrap();
        let (s, r) = two_approx(&inst).unwrap();
        assert_eq!(s.start(3), Some(0));
        assert_eq!(r.peak, 9);
        assert_eq!(r.ratio, "1");
    }

    #[test]
    fn qt_fill_with_sorted_partial_matches_nfd_fill() {
        let inst = Instance::new(8, vec![Task::new(0, 8, 2), Task::new(1, 1, 1), Task::new(2, 2, 1), Task::new(3, 1, 2)]).unwrap();
        let partial: Schedule = [(0, 0)].into_iter().collect();
        let rest: BTreeSet<_> = [1, 2, 3].into_iter().collect();
        let a = qt_fill(&inst, &partial, &rest, &ratio::rat(1, 1), 1, 5).unwrap();
        let b = nfd_fill(&inst, &partial, &rest, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn qt_fill_places_right_of_t_star() {
        // Demand 3 on edges 0..2, a dip, then 4 on edge 3: t* = 4.
        let inst =
            Instance::new(12, vec![Task::new(0, 2, 3), Task::new(1, 1, 2), Task::new(2, 1, 4), Task::new(3, 1, 1), Task::new(4, 1, 1)])
                .unwrap();
        let partial: Schedule = [(0, 0), (1, 2), (2, 3)].into_iter().collect();
        let rest: BTreeSet<_> = [3, 4].into_iter().collect();
        let out = qt_fill(&inst, &partial, &rest, &ratio::rat(1, 1), 1, 4).unwrap();
        assert!(out.start(3).unwrap() >= 4 && out.start(4).unwrap() >= 4);
        assert!(validate_schedule(&inst, &out, true).unwrap() <= 4);
    }
}
