//! Bounded aspect ratio instances: geometric packing under an area
//! condition, profile discretisation, long-task grouping and the
//! 3/2-approximation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{nfd_fill, two_approx_schedule};
use crate::bounds::lower_bound;
use crate::containers::{five_thirds, guess_grid};
use crate::error::{DspError, Result};
use crate::exact::{exact_dsp, OracleBudget};
use crate::geom::{verify_placement, GeomPlacement, Rect};
use crate::model::{Instance, Schedule, SolveReport, Task, TaskId};
use crate::profile::DemandProfile;
use crate::ratio::{self, rat, Rational};

/// Checks `h_max ≤ box_h`, `w_max ≤ box_w` and
/// `a(B) ≥ 2 a(R) + (2 h_max − h(B))₊ (2 w_max − w(B))₊`.
pub fn steinberg_condition(rects: &[Rect], box_w: i64, box_h: i64) -> Result<()> {
    let h_max = rects.iter().map(|r| r.h).max().unwrap_or(0);
    let w_max = rects.iter().map(|r| r.w).max().unwrap_or(0);
    if h_max > box_h {
        return Err(DspError::Precondition(format!("h_max = {h_max} exceeds the box height {box_h}")));
    }
    if w_max > box_w {
        return Err(DspError::Precondition(format!("w_max = {w_max} exceeds the box width {box_w}")));
    }
    let area: i128 = rects.iter().map(|r| r.area() as i128).sum();
    let slack = ((2 * h_max - box_h).max(0) as i128) * ((2 * w_max - box_w).max(0) as i128);
    if (box_w as i128) * (box_h as i128) < 2 * area + slack {
        return Err(DspError::Precondition(format!("area inequality: {box_w}·{box_h} < 2·{area} + {slack}")));
    }
    Ok(())
}

/// Smallest box height over width `box_w` for which
/// [`steinberg_condition`] holds.
pub fn steinberg_height(rects: &[Rect], box_w: i64) -> Option<i64> {
    if rects.iter().any(|r| r.w > box_w) {
        return None;
    }
    let h_max = rects.iter().map(|r| r.h).max().unwrap_or(0);
    let area: i128 = rects.iter().map(|r| r.area() as i128).sum();
    let bw = box_w.max(1) as i128;
    let mut h = h_max.max(((2 * area + bw - 1) / bw) as i64);
    while steinberg_condition(rects, box_w, h).is_err() {
        h += 1;
    }
    Some(h)
}

const SEARCH_NODES: u64 = 20_000_000;

/// Packs `rects` into the box whenever the area condition holds.
///
/// A portfolio of constructive packings (skyline bottom-left under four
/// orders, shelves, columns) is tried first; each result is checked with
/// [`verify_placement`]. If none succeeds, a complete search over
/// normal-pattern positions decides. Failing under a satisfied condition
/// is reported as a defect.
pub fn steinberg_pack(rects: &[Rect], box_w: i64, box_h: i64) -> Result<GeomPlacement> {
    steinberg_condition(rects, box_w, box_h)?;
    if let Some(p) = pack_rects(rects, box_w, box_h) {
        return Ok(p);
    }
    Err(DspError::Defect(format!("no packing of {} rectangles into {box_w}×{box_h} found", rects.len())))
}

/// Portfolio plus complete search, without the area condition.
pub fn pack_rects(rects: &[Rect], box_w: i64, box_h: i64) -> Option<GeomPlacement> {
    let orders: [fn(&Rect) -> (Reverse<i64>, Reverse<i64>, u64); 4] = [
        |r| (Reverse(r.h), Reverse(r.w), r.id),
        |r| (Reverse(r.w), Reverse(r.h), r.id),
        |r| (Reverse(r.area()), Reverse(r.h), r.id),
        |r| (Reverse(r.w + r.h), Reverse(r.h), r.id),
    ];
    for key in orders {
        let mut sorted = rects.to_vec();
        sorted.sort_by_key(key);
        if let Some(p) = skyline(&sorted, box_w, box_h) {
            if verify_placement(rects, &p).is_ok() {
                return Some(p);
            }
        }
    }
    for p in [shelves(rects, box_w, box_h), columns(rects, box_w, box_h)].into_iter().flatten() {
        if verify_placement(rects, &p).is_ok() {
            return Some(p);
        }
    }
    normal_pattern_search(rects, box_w, box_h)
}

/// Bottom-left placement against a skyline; each rectangle goes to the
/// lowest, then leftmost, position among skyline corners.
fn skyline(rects: &[Rect], box_w: i64, box_h: i64) -> Option<GeomPlacement> {
    let mut out = GeomPlacement::new(box_w, box_h);
    let mut sky = DemandProfile::zero(box_w.max(1));
    for r in rects {
        if r.area() == 0 {
            out.positions.insert(r.id, (0, 0));
            continue;
        }
        let mut xs: BTreeSet<i64> = BTreeSet::new();
        for &(s, _) in sky.runs() {
            xs.insert(s);
            let end = sky.next_change(s);
            xs.insert(end - r.w);
        }
        let best = xs
            .into_iter()
            .filter(|&x| x >= 0 && x + r.w <= box_w)
            .map(|x| (sky.max_on(x, x + r.w), x))
            .filter(|&(y, _)| y + r.h <= box_h)
            .min()?;
        let (y, x) = best;
        // Raise the skyline to the rectangle's top across its span.
        let cur = sky.clone();
        let mut e = x;
        while e < x + r.w {
            let next = cur.next_change(e).min(x + r.w);
            sky.add(e, next, y + r.h - cur.at(e));
            e = next;
        }
        out.positions.insert(r.id, (x, y));
    }
    Some(out)
}

/// Next-fit decreasing height shelves.
fn shelves(rects: &[Rect], box_w: i64, box_h: i64) -> Option<GeomPlacement> {
    let mut sorted = rects.to_vec();
    sorted.sort_by_key(|r| (Reverse(r.h), Reverse(r.w), r.id));
    let mut out = GeomPlacement::new(box_w, box_h);
    let (mut x, mut y, mut shelf_h) = (0, 0, 0);
    for r in &sorted {
        if x + r.w > box_w {
            y += shelf_h;
            x = 0;
            shelf_h = 0;
        }
        if y + r.h > box_h {
            return None;
        }
        out.positions.insert(r.id, (x, y));
        x += r.w;
        shelf_h = shelf_h.max(r.h);
    }
    Some(out)
}

/// Shelves turned on their side: columns filled bottom to top.
fn columns(rects: &[Rect], box_w: i64, box_h: i64) -> Option<GeomPlacement> {
    let mut sorted = rects.to_vec();
    sorted.sort_by_key(|r| (Reverse(r.w), Reverse(r.h), r.id));
    let mut out = GeomPlacement::new(box_w, box_h);
    let (mut x, mut y, mut col_w) = (0, 0, 0);
    for r in &sorted {
        if y + r.h > box_h {
            x += col_w;
            y = 0;
            col_w = 0;
        }
        if x + r.w > box_w {
            return None;
        }
        out.positions.insert(r.id, (x, y));
        y += r.h;
        col_w = col_w.max(r.w);
    }
    Some(out)
}

/// Depth-first search placing rectangles (largest first) at positions whose
/// coordinates are sums of other rectangles' widths and heights; every
/// feasible packing can be moved into such positions.
fn normal_pattern_search(rects: &[Rect], box_w: i64, box_h: i64) -> Option<GeomPlacement> {
    let mut order: Vec<Rect> = rects.iter().copied().filter(|r| r.area() > 0).collect();
    order.sort_by_key(|r| (Reverse(r.area()), r.id));
    let sums = |dims: Vec<i64>, cap: i64| -> Vec<i64> {
        let mut reach = vec![false; cap.max(0) as usize + 1];
        reach[0] = true;
        for d in dims {
            for s in (d..=cap).rev() {
                if reach[(s - d) as usize] {
                    reach[s as usize] = true;
                }
            }
        }
        (0..=cap).filter(|&s| reach[s as usize]).collect()
    };
    let xs = sums(order.iter().map(|r| r.w).collect(), box_w);
    let ys = sums(order.iter().map(|r| r.h).collect(), box_h);
    let mut placed: Vec<(Rect, i64, i64)> = Vec::new();
    let mut nodes = 0u64;
    fn rec(
        k: usize,
        order: &[Rect],
        xs: &[i64],
        ys: &[i64],
        bw: i64,
        bh: i64,
        placed: &mut Vec<(Rect, i64, i64)>,
        nodes: &mut u64,
    ) -> bool {
        if k == order.len() {
            return true;
        }
        *nodes += 1;
        if *nodes > SEARCH_NODES {
            return false;
        }
        let r = order[k];
        for &y in ys.iter().take_while(|&&y| y + r.h <= bh) {
            for &x in xs.iter().take_while(|&&x| x + r.w <= bw) {
                let free = placed.iter().all(|&(o, ox, oy)| x >= ox + o.w || ox >= x + r.w || y >= oy + o.h || oy >= y + r.h);
                if free {
                    placed.push((r, x, y));
                    if rec(k + 1, order, xs, ys, bw, bh, placed, nodes) {
                        return true;
                    }
                    placed.pop();
                }
            }
        }
        false
    }
    if !rec(0, &order, &xs, &ys, box_w, box_h, &mut placed, &mut nodes) {
        return None;
    }
    let mut out = GeomPlacement::new(box_w, box_h);
    for r in rects {
        out.positions.insert(r.id, (0, 0));
    }
    for (r, x, y) in placed {
        out.positions.insert(r.id, (x, y));
    }
    Some(out)
}

/// Rounds `d` up to a profile with few jumps.
///
/// Scanning left to right, the stored level `ℓ` is the demand at the last
/// restart edge and the output is `ℓ + ⌊ε g⌋`. The scan restarts where the
/// demand leaves `[ℓ − ε g, ℓ + ε g]` and at every edge `⌈k δ W⌉`. The
/// result satisfies `d ≤ d′ ≤ d + 2 ε g`.
pub fn discretize_profile(d: &DemandProfile, eps: &Rational, delta: &Rational, opt_guess: i64) -> DemandProfile {
    let w = d.width();
    let lift = ratio::floor_mul(eps, opt_guess);
    let band = eps * ratio::int(opt_guess);
    let mut grid: BTreeSet<i64> = BTreeSet::new();
    if ratio::is_positive(delta) {
        let mut k = 1;
        loop {
            let e = ratio::ceil(&(ratio::int(k) * delta * ratio::int(w)));
            if e >= w {
                break;
            }
            grid.insert(e);
            k += 1;
        }
    }
    // Candidate restart edges: demand breakpoints and grid edges.
    let mut points: BTreeSet<i64> = d.runs().iter().map(|r| r.0).collect();
    points.extend(grid.iter().copied());
    let mut runs = Vec::new();
    let mut level: Option<i64> = None;
    for &e in &points {
        let v = d.at(e);
        let leave = match level {
            None => true,
            Some(l) => grid.contains(&e) || ratio::int(v) > ratio::int(l) + band || ratio::int(v) < ratio::int(l) - band,
        };
        if leave {
            level = Some(v);
            runs.push((e, v + lift));
        }
    }
    DemandProfile::from_runs(w, &runs)
}

/// Jump bound `2/(ε δ) + 1/δ` for [`discretize_profile`] on profiles of
/// tasks wider than `δ W` with peak at most `g`.
pub fn discretize_jump_bound(eps: &Rational, delta: &Rational) -> Rational {
    rat(2, 1) / (eps * delta) + Rational::from_integer(1) / delta
}

/// A box of free space with the long tasks crossing each unit column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceBox {
    pub start: i64,
    pub height: i64,
    /// `stripes[j]` lists the long tasks with a unit slice in column
    /// `start + j`.
    pub stripes: Vec<Vec<TaskId>>,
}

impl SliceBox {
    pub fn width(&self) -> i64 {
        self.stripes.len() as i64
    }
}

/// A vertical container inside a box, with its long tasks side by side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongContainer {
    pub box_index: usize,
    pub start: i64,
    /// Height below the container inside its box.
    pub base: i64,
    pub width: i64,
    pub height: i64,
    pub tasks: Vec<TaskId>,
}

/// Outcome of [`group_long_slices`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongGrouping {
    pub containers: Vec<LongContainer>,
    pub discarded: BTreeSet<TaskId>,
    /// Discarded area exceeded `ε² W g`.
    pub over_budget: bool,
}

/// Linear grouping of long-task slices into vertical containers.
///
/// Heights are rounded up to multiples of `δ² g`. Inside each box, columns
/// with the same sorted height sequence (configuration) are grouped; a
/// configuration `(h₁, …, h_q)` used by `w(C)` columns yields `q` stacked
/// containers of width `w(C)` rounded down to a multiple of `μ W / ε`.
/// Slices are then poured into the containers, both in decreasing height
/// order with a task's slices consecutive; tasks split across two
/// containers, landing in the overflow, or taller than their container are
/// discarded.
pub fn group_long_slices(
    instance: &Instance,
    boxes: &[SliceBox],
    long_tasks: &BTreeSet<TaskId>,
    eps: &Rational,
    delta: &Rational,
    mu: &Rational,
    opt_guess: i64,
) -> Result<LongGrouping> {
    let w = instance.width();
    let step = delta * delta * ratio::int(opt_guess);
    let round = |h: i64| -> i64 {
        if ratio::is_positive(&step) {
            ratio::ceil(&(ratio::int(ratio::ceil(&(ratio::int(h) / step))) * step))
        } else {
            h
        }
    };
    let unit = mu / eps * ratio::int(w);
    let mut containers = Vec::new();
    for (b, bx) in boxes.iter().enumerate() {
        // configuration -> column count
        let mut configs: BTreeMap<Vec<Reverse<i64>>, i64> = BTreeMap::new();
        for stripe in &bx.stripes {
            let mut c: Vec<Reverse<i64>> = stripe
                .iter()
                .filter(|id| long_tasks.contains(id))
                .map(|id| Reverse(round(instance.task(*id).map(|t| t.height).unwrap_or(0))))
                .collect();
            c.sort();
            if !c.is_empty() {
                *configs.entry(c).or_insert(0) += 1;
            }
        }
        let mut x = bx.start;
        for (config, count) in configs {
            let width = if ratio::is_positive(&unit) {
                ratio::floor(&(ratio::int(ratio::floor(&(ratio::int(count) / unit))) * unit))
            } else {
                count
            };
            let mut base = 0;
            for Reverse(h) in &config {
                if width > 0 {
                    containers.push(LongContainer { box_index: b, start: x, base, width, height: *h, tasks: Vec::new() });
                }
                base += h;
            }
            x += count;
        }
    }
    containers.sort_by_key(|c| (Reverse(c.height), c.box_index, c.start, c.base));

    let mut tasks: Vec<Task> = long_tasks.iter().filter_map(|id| instance.task(*id).copied()).collect();
    tasks.sort_by_key(|t| (Reverse(round(t.height)), t.id));
    let mut discarded = BTreeSet::new();
    let mut k = 0;
    let mut used = 0;
    for t in &tasks {
        // Skip full containers.
        while k < containers.len() && used == containers[k].width {
            k += 1;
            used = 0;
        }
        if k == containers.len() {
            discarded.insert(t.id);
            continue;
        }
        let c = &mut containers[k];
        if used + t.width <= c.width && t.height <= c.height {
            c.tasks.push(t.id);
            used += t.width;
        } else {
            // Split across containers, or too tall: the slices still consume
            // the space they would have occupied.
            discarded.insert(t.id);
            let mut rest = t.width;
            while rest > 0 && k < containers.len() {
                let take = rest.min(containers[k].width - used);
                rest -= take;
                used += take;
                if used == containers[k].width {
                    k += 1;
                    used = 0;
                }
            }
        }
    }
    let area = ratio::int(instance.area_of(&discarded));
    let over_budget = area > eps * eps * ratio::int(w) * ratio::int(opt_guess);
    Ok(LongGrouping { containers, discarded, over_budget })
}

/// Task classes relative to `g` and `W` for thresholds `μ < δ`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BandClassification {
    pub big: BTreeSet<TaskId>,
    pub wide: BTreeSet<TaskId>,
    pub long: BTreeSet<TaskId>,
    pub tiny: BTreeSet<TaskId>,
    pub intermediate: BTreeSet<TaskId>,
}

/// Big: `h > δg, w > δW`; wide: `h ≤ μg, w > δW`; long: `h > δg, w ≤ μW`;
/// tiny: `h ≤ μg, w ≤ μW`; everything else is intermediate.
pub fn classify_bands(instance: &Instance, mu: &Rational, delta: &Rational, opt_guess: i64) -> BandClassification {
    let (w, g) = (instance.width(), opt_guess);
    let mut c = BandClassification::default();
    for t in instance.tasks() {
        let h_hi = ratio::gt_scaled(t.height, delta, g);
        let h_lo = ratio::le_scaled(t.height, mu, g);
        let w_hi = ratio::gt_scaled(t.width, delta, w);
        let w_lo = ratio::le_scaled(t.width, mu, w);
        let set = match (h_hi, h_lo, w_hi, w_lo) {
            (true, _, true, _) => &mut c.big,
            (_, true, true, _) => &mut c.wide,
            (true, _, _, true) => &mut c.long,
            (_, true, _, true) => &mut c.tiny,
            _ => &mut c.intermediate,
        };
        set.insert(t.id);
    }
    c
}

/// Thresholds for [`bansal_pec_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct PecParams {
    pub eps: Rational,
    pub delta: Rational,
    pub mu: Rational,
    pub opt_guess: i64,
}

/// Picks `δ` from `ε, ε/K, ε/K², …` (`K = min(10⁴, ⌈4/ε²⌉)`, `μ = δ/K`)
/// so that intermediate tasks have area at most `ε² W g`.
pub fn choose_pec_params(instance: &Instance, eps: &Rational, opt_guess: i64) -> PecParams {
    let k = ratio::ceil(&(rat(4, 1) / (eps * eps))).clamp(2, 10_000);
    let kr = ratio::int(k);
    let budget = eps * eps * ratio::int(instance.width()) * ratio::int(opt_guess);
    let mut delta = *eps;
    let mut best = (None, delta);
    for _ in 0..ratio::ceil(&(rat(2, 1) / (eps * eps))).max(1) {
        let mu = delta / kr;
        let c = classify_bands(instance, &mu, &delta, opt_guess);
        let area = ratio::int(instance.area_of(&c.intermediate));
        if area <= budget {
            return PecParams { eps: *eps, delta, mu, opt_guess };
        }
        if best.0.is_none_or(|a| area < a) {
            best = (Some(area), delta);
        }
        delta = mu;
    }
    PecParams { eps: *eps, delta: best.1, mu: best.1 / kr, opt_guess }
}

/// Result of [`bansal_pec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PecOutcome {
    pub schedule: Schedule,
    pub leftovers: BTreeSet<TaskId>,
    pub peak: i64,
    pub trace: Vec<String>,
}

pub fn bansal_pec(instance: &Instance, eps: &Rational, reference: &Schedule) -> Result<PecOutcome> {
    let g = DemandProfile::build(instance, reference).peak();
    let params = choose_pec_params(instance, eps, g.max(1));
    bansal_pec_with(instance, &params, reference)
}

/// Most tasks under `⌊(1 + 3ε) g⌋`, guided by a reference schedule of
/// peak `g`.
///
/// Intermediate tasks are left over. Big and wide tasks keep their
/// reference starts; the wide profile is discretised, which only leaves
/// more room below the cap. The space between the cap and wide plus big
/// demand is cut into boxes at its breakpoints; long tasks crossing each
/// column in the reference form the box slices and are grouped into
/// containers by [`group_long_slices`]. Tiny tasks are added first fit
/// left to right below the cap; any that do not fit are left over.
pub fn bansal_pec_with(instance: &Instance, params: &PecParams, reference: &Schedule) -> Result<PecOutcome> {
    let w = instance.width();
    let PecParams { eps, delta, mu, opt_guess: g } = params.clone();
    if !(mu < delta && delta <= eps) {
        return Err(DspError::Precondition("band thresholds need mu < delta <= eps".into()));
    }
    for t in instance.tasks() {
        if !reference.is_scheduled(t.id) {
            return Err(DspError::Precondition(format!("reference misses task {}", t.id)));
        }
    }
    let class = classify_bands(instance, &mu, &delta, g);
    let mut trace = vec![format!(
        "big {}, wide {}, long {}, tiny {}, intermediate {}",
        class.big.len(),
        class.wide.len(),
        class.long.len(),
        class.tiny.len(),
        class.intermediate.len()
    )];
    let cap = ratio::floor(&((Rational::from_integer(1) + rat(3, 1) * eps) * ratio::int(g)));
    let mut leftovers: BTreeSet<TaskId> = class.intermediate.clone();
    let mut schedule = Schedule::new();
    for id in class.big.iter().chain(&class.wide) {
        schedule.place(*id, reference.start(*id).unwrap());
    }
    let wide_profile = DemandProfile::build(instance, &reference.restrict(&class.wide));
    let lifted = discretize_profile(&wide_profile, &eps, &delta, g);
    let big_profile = DemandProfile::build(instance, &reference.restrict(&class.big));
    let floor_profile =
        DemandProfile::from_demands(&lifted.to_vec().iter().zip(big_profile.to_vec()).map(|(a, b)| a + b).collect::<Vec<_>>());

    // Boxes between the floor and the cap, one per floor run.
    let mut boxes = Vec::new();
    for (k, &(s, d)) in floor_profile.runs().iter().enumerate() {
        let end = floor_profile.runs().get(k + 1).map_or(w, |r| r.0);
        if d >= cap {
            continue;
        }
        let stripes = (s..end)
            .map(|e| {
                class
                    .long
                    .iter()
                    .copied()
                    .filter(|id| {
                        let st = reference.start(*id).unwrap();
                        st <= e && e < st + instance.task(*id).unwrap().width
                    })
                    .collect()
            })
            .collect();
        boxes.push(SliceBox { start: s, height: cap - d, stripes });
    }
    let grouping = group_long_slices(instance, &boxes, &class.long, &eps, &delta, &mu, g)?;
    if grouping.over_budget {
        trace.push("long-task discard exceeds eps^2 W g".into());
    }
    leftovers.extend(grouping.discarded.iter().copied());
    let mut profile = DemandProfile::build(instance, &schedule);
    for c in &grouping.containers {
        let mut x = c.start;
        for id in &c.tasks {
            let t = instance.task(*id).unwrap();
            if profile.max_on(x, x + t.width) + t.height <= cap {
                profile.add(x, x + t.width, t.height);
                schedule.place(*id, x);
            } else {
                leftovers.insert(*id);
            }
            x += t.width;
        }
    }
    let mut tiny: Vec<Task> = class.tiny.iter().map(|id| *instance.task(*id).unwrap()).collect();
    tiny.sort_by_key(|t| (Reverse(t.height), Reverse(t.width), t.id));
    let mut e = 0;
    while !tiny.is_empty() && e < w {
        tiny.retain(|t| {
            let fits = e + t.width <= w && profile.max_on(e, e + t.width) + t.height <= cap;
            if fits {
                profile.add(e, e + t.width, t.height);
                schedule.place(t.id, e);
            }
            !fits
        });
        e += 1;
    }
    leftovers.extend(tiny.iter().map(|t| t.id));
    let peak = profile.peak();
    if peak > cap {
        return Err(DspError::Defect(format!("guided schedule peak {peak} exceeds {cap}")));
    }
    trace.push(format!("{} leftover tasks of area {}", leftovers.len(), instance.area_of(&leftovers)));
    Ok(PecOutcome { schedule, leftovers, peak, trace })
}

/// Places `ids` on top of everything through a full-width geometric packing.
fn steinberg_box(instance: &Instance, ids: &BTreeSet<TaskId>) -> Result<(Schedule, i64)> {
    let rects: Vec<Rect> = ids
        .iter()
        .map(|id| {
            let t = instance.task(*id).unwrap();
            Rect::new(t.id, t.width, t.height)
        })
        .collect();
    let h = steinberg_height(&rects, instance.width()).ok_or_else(|| DspError::Precondition("leftover task wider than the path".into()))?;
    let placement = steinberg_pack(&rects, instance.width(), h)?;
    Ok((placement.positions.iter().map(|(&id, &(x, _))| (id, x)).collect(), h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareOptions {
    pub beta: Rational,
    pub eps: Option<Rational>,
    pub budget: OracleBudget,
    /// Largest instance handed to the exact oracle in the small-`W` branch.
    pub oracle_max_tasks: usize,
}

impl SquareOptions {
    pub fn new(beta: Rational) -> Self {
        SquareOptions {
            beta,
            eps: None,
            budget: OracleBudget { max_nodes: 20_000_000, time_limit: std::time::Duration::from_secs(10), ..OracleBudget::default() },
            oracle_max_tasks: 12,
        }
    }
}

pub fn square_dsp(instance: &Instance, beta: &Rational) -> Result<(Schedule, SolveReport)> {
    square_dsp_with(instance, &SquareOptions::new(*beta))
}

/// Checks `h ≤ w ≤ β h` for every task.
pub fn check_aspect(instance: &Instance, beta: &Rational) -> Result<()> {
    if *beta < rat(1, 1) {
        return Err(DspError::Precondition(format!("beta = {} must be at least 1", ratio::display(beta))));
    }
    for t in instance.tasks() {
        if t.height > t.width || ratio::gt_scaled(t.width, beta, t.height) {
            return Err(DspError::Precondition(format!(
                "task {} ({}×{}) violates h <= w <= beta h with beta = {}",
                t.id,
                t.width,
                t.height,
                ratio::display(beta)
            )));
        }
    }
    Ok(())
}

/// The 3/2-approximation for aspect ratio at most `β`.
///
/// For each guess `g` of the optimum in increasing order: if
/// `W ≤ 100 β g` the guided small-width branch runs ([`bansal_pec`] on an
/// exact reference, leftovers in a geometric box on top), otherwise the
/// tall tasks (`h > 0.49 g`) are laid out in two rows (Case 1, with the
/// rest in a box of height `⌊g/2⌋`) or as two sorted rows filled with
/// [`nfd_fill`] (Case 2). The result is never worse than the
/// 2-approximation.
pub fn square_dsp_with(instance: &Instance, opts: &SquareOptions) -> Result<(Schedule, SolveReport)> {
    let clock = Instant::now();
    check_aspect(instance, &opts.beta)?;
    let lb = lower_bound(instance).value;
    let (fallback, fallback_peak) = two_approx_schedule(instance)?;
    let mut trace = Vec::new();
    let mut best: Option<(Schedule, i64, String)> = None;
    let w = instance.width();
    let small_w = ratio::le_scaled(w, &(rat(100, 1) * opts.beta), lb.max(1));
    if lb == 0 {
        best = Some((fallback.clone(), fallback_peak, "two-approx".into()));
    } else if small_w {
        let eps = opts.eps.unwrap_or_else(|| Rational::from_integer(1) / (rat(4, 1) * opts.beta));
        match small_width_branch(instance, &eps, opts) {
            Ok((s, p, note)) => {
                trace.push(format!("small-W branch: peak {p} ({note})"));
                best = Some((s, p, note));
            }
            Err(e) if e.is_defect() => return Err(e),
            Err(e) => trace.push(format!("small-W branch: {e}")),
        }
    } else {
        let eps = opts.eps.unwrap_or(rat(1, 1000));
        if eps > rat(1, 1000) {
            trace.push("eps above 1e-3: case 2 constants are outside their stated range".into());
        }
        for g in guess_grid(lb, &eps) {
            match large_width_guess(instance, g) {
                Ok((s, p, case)) => {
                    trace.push(format!("guess {g}: case {case} with peak {p}"));
                    best = Some((s, p, format!("case {case}")));
                    break;
                }
                Err(e) if e.is_defect() => return Err(e),
                Err(e) => trace.push(format!("guess {g}: {e}")),
            }
        }
    }
    let (schedule, peak, source) = match best {
        Some((s, p, src)) if p <= fallback_peak => (s, p, src),
        _ => (fallback, fallback_peak, "two-approx".to_string()),
    };
    let mut report = SolveReport::new("square", peak, lb, clock.elapsed())
        .with_param("beta", ratio::display(&opts.beta))
        .with_param("branch", if small_w { "small-W" } else { "large-W" })
        .with_param("source", source)
        .with_certified("peak <= 2 LB");
    report.trace = trace;
    Ok((schedule, report))
}

fn small_width_branch(instance: &Instance, eps: &Rational, opts: &SquareOptions) -> Result<(Schedule, i64, String)> {
    if instance.len() > opts.oracle_max_tasks || !opts.budget.admits(instance) {
        let (s, r) = five_thirds(instance, &rat(1, 10))?;
        return Ok((s, r.peak, "five-thirds fallback; certified ratio 5/3 + eps only".into()));
    }
    let reference = exact_dsp(instance, &opts.budget);
    let pec_eps = eps * eps / rat(100, 1);
    let pec = bansal_pec(instance, &pec_eps, &reference.solution)?;
    let mut schedule = pec.schedule.clone();
    let mut note = format!("guided by exact peak {}", reference.peak);
    if !pec.leftovers.is_empty() {
        let (boxed, h) = steinberg_box(instance, &pec.leftovers)?;
        note.push_str(&format!(", leftover box height {h}"));
        schedule.merge(&boxed);
    }
    let peak = DemandProfile::build(instance, &schedule).peak();
    Ok((schedule, peak, note))
}

/// Layout of one guess `g` when `W > 100 β g`.
pub fn large_width_guess(instance: &Instance, g: i64) -> Result<(Schedule, i64, u8)> {
    let w = instance.width();
    let mut tasks: Vec<Task> = instance.tasks().to_vec();
    tasks.sort_by_key(|t| (Reverse(t.height), t.id));
    // i1 = number of tasks with h > 0.49 g, i2 = longest prefix of width < W
    let i1 = tasks.iter().take_while(|t| 100 * t.height > 49 * g).count();
    let mut i2 = 0;
    let mut prefix = 0;
    while i2 < tasks.len() && prefix + tasks[i2].width < w {
        prefix += tasks[i2].width;
        i2 += 1;
    }
    let tall_width: i64 = tasks[..i1].iter().map(|t| t.width).sum();
    let mut schedule = Schedule::new();
    let mut x = 0;
    for t in &tasks[..i2] {
        schedule.place(t.id, x);
        x += t.width;
    }
    if 10 * tall_width > 18 * w {
        // Case 1: second row from the right, skipping task i2 + 1.
        let mut right = w;
        for t in tasks.iter().take(i1.saturating_sub(1)).skip(i2 + 1) {
            right -= t.width;
            schedule.place(t.id, right);
        }
        let profile = DemandProfile::build(instance, &schedule);
        if profile.peak() > g {
            return Err(DspError::Infeasible(format!("two rows reach {} > {g}", profile.peak())));
        }
        let rest: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).filter(|id| !schedule.is_scheduled(*id)).collect();
        let rects: Vec<Rect> = rest
            .iter()
            .map(|id| {
                let t = instance.task(*id).unwrap();
                Rect::new(t.id, t.width, t.height)
            })
            .collect();
        let placement = steinberg_pack(&rects, w, g / 2).map_err(|e| match e {
            DspError::Precondition(m) => DspError::Infeasible(format!("top box: {m}")),
            other => other,
        })?;
        for (&id, &(x, _)) in &placement.positions {
            schedule.place(id, x);
        }
        let peak = DemandProfile::build(instance, &schedule).peak();
        Ok((schedule, peak, 1))
    } else {
        // Case 2: second row from the left, then fill the sorted profile.
        let mut x = 0;
        for t in tasks.iter().take(i1).skip(i2) {
            if x + t.width > w {
                return Err(DspError::Infeasible("second row does not fit".into()));
            }
            schedule.place(t.id, x);
            x += t.width;
        }
        let rest: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).filter(|id| !schedule.is_scheduled(*id)).collect();
        let h1 = tasks.first().map_or(0, |t| t.height);
        let h_next = tasks.get(i2).map_or(0, |t| t.height);
        let pi = (h1 + h_next).max(3 * g / 2);
        let full = nfd_fill(instance, &schedule, &rest, pi).map_err(|e| match e {
            DspError::Precondition(m) => DspError::Infeasible(format!("case 2 fill: {m}")),
            other => other,
        })?;
        let peak = DemandProfile::build(instance, &full).peak();
        Ok((full, peak, 2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schedule;

    #[test]
    fn single_rect_goes_to_origin() {
        let p = steinberg_pack(&[Rect::new(4, 2, 3)], 5, 6).unwrap();
        assert_eq!(p.positions[&4], (0, 0));
    }

    #[test]
    fn area_violation_is_named() {
        let err = steinberg_pack(&[Rect::new(0, 3, 3), Rect::new(1, 3, 3)], 6, 3).unwrap_err();
        assert!(err.to_string().contains("area inequality"));
        let err = steinberg_pack(&[Rect::new(0, 7, 1)], 6, 3).unwrap_err();
        assert!(err.to_string().contains("w_max"));
    }

    #[test]
    fn flat_profile_is_lifted() {
        let d = DemandProfile::from_demands(&[4; 10]);
        let out = discretize_profile(&d, &rat(1, 4), &rat(1, 2), 8);
        assert_eq!(out.to_vec(), vec![6; 10]);
        assert_eq!(out.jumps(), 0);
    }

    #[test]
    fn single_step_keeps_one_jump() {
        let mut demands = vec![2; 8];
        demands.extend(vec![8; 8]);
        let d = DemandProfile::from_demands(&demands);
        // g = 8, eps = 1/4: the step of 6 > eps g forces a restart at 8,
        // which is also a grid edge for delta = 1/2.
        let out = discretize_profile(&d, &rat(1, 4), &rat(1, 2), 8);
        let mut expect = vec![4; 8];
        expect.extend(vec![10; 8]);
        assert_eq!(out.to_vec(), expect);
    }

    #[test]
    fn sawtooth_flattens_per_block() {
        let d = DemandProfile::from_demands(&[3, 4, 3, 4, 3, 4, 3, 4]);
        let out = discretize_profile(&d, &rat(1, 4), &rat(1, 2), 8);
        assert_eq!(out.to_vec(), vec![5, 5, 5, 5, 5, 5, 5, 5]);
    }

    #[test]
    fn equal_slices_make_one_container_class() {
        let inst = Instance::new(4, vec![Task::new(0, 1, 3), Task::new(1, 1, 3), Task::new(2, 1, 3)]).unwrap();
        let bx = SliceBox { start: 0, height: 3, stripes: vec![vec![0], vec![1], vec![2]] };
        let g = group_long_slices(&inst, &[bx], &inst.ids(), &rat(1, 2), &rat(1, 2), &rat(1, 8), 6).unwrap();
        assert_eq!(g.containers.len(), 1);
        assert_eq!((g.containers[0].width, g.containers[0].height), (3, 3));
        assert!(g.discarded.is_empty());
    }

    #[test]
    fn overflow_is_discarded() {
        let inst = Instance::new(4, vec![Task::new(0, 1, 3), Task::new(1, 1, 3)]).unwrap();
        let bx = SliceBox { start: 0, height: 3, stripes: vec![vec![0]] };
        let g = group_long_slices(&inst, &[bx], &inst.ids(), &rat(1, 2), &rat(1, 2), &rat(1, 8), 6).unwrap();
        assert_eq!(g.discarded, [1].into_iter().collect());
    }

    #[test]
    fn tiny_only_instance_is_greedy() {
        let inst = Instance::new(10, (0..10).map(|k| Task::new(k, 1, 1)).collect()).unwrap();
        let reference: Schedule = (0..10).map(|k| (k, k as i64)).collect();
        let params = PecParams { eps: rat(1, 2), delta: rat(1, 2), mu: rat(1, 5), opt_guess: 5 };
        let out = bansal_pec_with(&inst, &params, &reference).unwrap();
        assert!(out.leftovers.is_empty());
        assert_eq!(validate_schedule(&inst, &out.schedule, true), Ok(out.peak));
    }

    #[test]
    fn single_square() {
        let inst = Instance::new(9, vec![Task::new(0, 4, 4)]).unwrap();
        let (s, r) = square_dsp(&inst, &rat(1, 1)).unwrap();
        assert_eq!(validate_schedule(&inst, &s, true), Ok(4));
        assert_eq!(r.peak, 4);
        let bad = Instance::new(9, vec![Task::new(0, 2, 4)]).unwrap();
        assert!(square_dsp(&bad, &rat(1, 1)).is_err());
    }
}
