//! The `(1 + O(ε))`-approximation for instances whose tasks are all short.
//!
//! Wide tasks get a start-edge LP over a small candidate set, are rounded
//! with randomized rounding with alterations, the unplaced ones go into a
//! thin full-width box, and narrow tasks fill the sorted result.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{best_fit, push_and_fill, two_approx_schedule};
use crate::bounds::lower_bound;
use crate::containers::guess_grid;
use crate::error::{DspError, Result};
use crate::model::{Instance, Schedule, SolveReport, TaskId};
use crate::profile::DemandProfile;
use crate::ratio::{self, rat, Rational};

/// Start edges that can hold a wide task in some left-pushed optimum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartCandidates {
    pub edges: BTreeSet<i64>,
    pub widths: Vec<i64>,
    /// Most widths summed into one candidate.
    pub term_limit: usize,
}

pub const CANDIDATE_CAP: usize = 1_000_000;

/// Sums of at most `⌊1/δ_w⌋` widths of distinct tasks wider than `δ_w · W`,
/// below `W`.
pub fn horizontal_start_candidates(instance: &Instance, delta_w: &Rational) -> Result<StartCandidates> {
    if !(ratio::is_positive(delta_w) && *delta_w < rat(1, 1)) {
        return Err(DspError::Precondition("delta_w must lie in (0, 1)".into()));
    }
    let w = instance.width();
    let widths: Vec<i64> = instance.tasks().iter().filter(|t| ratio::gt_scaled(t.width, delta_w, w)).map(|t| t.width).collect();
    let limit = ratio::floor(&(Rational::from_integer(1) / delta_w)).max(0) as usize;
    let edges = sums_with_few_terms(&widths, limit, w);
    if edges.len() > CANDIDATE_CAP {
        return Err(DspError::Limit(format!("{} start candidates exceed the cap {CANDIDATE_CAP}; raise eps", edges.len())));
    }
    Ok(StartCandidates { edges, widths, term_limit: limit })
}

/// Values `< bound` that are sums of at most `limit` entries of `items`
/// (each entry used once).
fn sums_with_few_terms(items: &[i64], limit: usize, bound: i64) -> BTreeSet<i64> {
    // fewest[s] = fewest entries summing to s
    let mut fewest = vec![usize::MAX; bound.max(1) as usize];
    fewest[0] = 0;
    for &x in items {
        for s in (x..bound).rev() {
            let prev = fewest[(s - x) as usize];
            if prev != usize::MAX && prev + 1 < fewest[s as usize] {
                fewest[s as usize] = prev + 1;
            }
        }
    }
    (0..bound).filter(|&s| fewest[s as usize] <= limit).collect()
}

/// A verified fractional solution of the start LP.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalStart {
    /// Task id to its non-zero `(edge, weight)` pairs; weights sum to 1.
    pub x: BTreeMap<TaskId, Vec<(i64, Rational)>>,
    /// How far the snapped solution exceeds `opt_guess` on its worst
    /// candidate edge; float noise from the solver, bounded by `1e-6 · opt_guess`.
    pub excess: Rational,
}

impl FractionalStart {
    pub fn is_integral(&self) -> bool {
        self.x.values().all(|v| v.len() == 1)
    }
}

const SNAP: i128 = 1 << 24;

/// Solves the LP relaxation: every task of `horizontal_set` picks a
/// distribution over candidate starts that keep it inside the path, and the
/// expected demand at every candidate edge is at most `opt_guess`. Demand
/// only rises at candidate edges, so these constraints cover every edge.
/// Returns `Ok(None)` when the LP is infeasible.
pub fn solve_start_lp(
    instance: &Instance,
    horizontal_set: &BTreeSet<TaskId>,
    candidates: &StartCandidates,
    opt_guess: i64,
) -> Result<Option<FractionalStart>> {
    let w = instance.width();
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut vars: BTreeMap<TaskId, Vec<(i64, microlp::Variable)>> = BTreeMap::new();
    let mut rows: BTreeMap<i64, Vec<(microlp::Variable, f64)>> = candidates.edges.iter().map(|&q| (q, Vec::new())).collect();
    for id in horizontal_set {
        let t = instance.task(*id).ok_or_else(|| DspError::Precondition(format!("unknown task {id}")))?;
        let mut list = Vec::new();
        for &k in candidates.edges.iter().filter(|&&k| k + t.width <= w) {
            let v = problem.add_var(0.0, (0.0, 1.0));
            list.push((k, v));
            for (_, row) in rows.range_mut(k..k + t.width) {
                row.push((v, t.height as f64));
            }
        }
        if list.is_empty() {
            return Ok(None);
        }
        problem.add_constraint(list.iter().map(|&(_, v)| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
        vars.insert(*id, list);
    }
    for row in rows.into_values().filter(|r| !r.is_empty()) {
        problem.add_constraint(row, ComparisonOp::Le, opt_guess as f64);
    }
    let outcome = match problem.solve() {
        Ok(o) => o,
        Err(microlp::Error::Infeasible) => return Ok(None),
        Err(e) => return Err(DspError::Numeric(format!("start LP: {e}"))),
    };
    let Some(solution) = outcome.solution() else {
        return Err(DspError::Numeric("start LP stopped without a solution".into()));
    };

    // Snap to multiples of 2^-24, renormalise exactly, and re-check.
    let mut x = BTreeMap::new();
    for (id, list) in &vars {
        let snapped: Vec<(i64, i128)> = list
            .iter()
            .map(|&(k, v)| (k, (solution.var_value(v).clamp(0.0, 1.0) * SNAP as f64).round() as i128))
            .filter(|&(_, n)| n > 0)
            .collect();
        let total: i128 = snapped.iter().map(|p| p.1).sum();
        if total == 0 {
            return Err(DspError::Numeric(format!("start LP gave task {id} no weight")));
        }
        x.insert(*id, snapped.into_iter().map(|(k, n)| (k, Rational::new(n, total))).collect::<Vec<_>>());
    }
    let mut worst = Rational::from_integer(0);
    for &q in &candidates.edges {
        let mut load = Rational::from_integer(0);
        for (id, list) in &x {
            let t = instance.task(*id).expect("checked above");
            for (k, p) in list {
                if *k <= q && q < k + t.width {
                    load += p * Rational::from_integer(t.height as i128);
                }
            }
        }
        worst = worst.max(load - ratio::int(opt_guess));
    }
    if worst > rat(1, 1_000_000) * ratio::int(opt_guess.max(1)) {
        return Err(DspError::Numeric(format!("start LP solution exceeds opt_guess by {}", ratio::display(&worst))));
    }
    Ok(Some(FractionalStart { x, excess: worst }))
}

/// Result of [`round_with_alterations`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rounding {
    pub schedule: Schedule,
    pub leftovers: BTreeSet<TaskId>,
    /// Seed of the accepted sample.
    pub seed: u64,
    pub attempts: u32,
}

pub const RETRY_BUDGET: u32 = 64;

/// Samples one start per task from `fractional`, then scans samples by
/// `(edge, id)` and keeps a task when the peak stays at most
/// `⌊(1 + ε) opt_guess⌋`. Samples whose dropped area exceeds
/// `2 ε W opt_guess` are redrawn with the next seed.
pub fn round_with_alterations(
    instance: &Instance,
    fractional: &FractionalStart,
    opt_guess: i64,
    eps: &Rational,
    seed: u64,
) -> Result<Rounding> {
    round_with_budget(instance, fractional, opt_guess, eps, seed, RETRY_BUDGET)
}

pub fn round_with_budget(
    instance: &Instance,
    fractional: &FractionalStart,
    opt_guess: i64,
    eps: &Rational,
    seed: u64,
    budget: u32,
) -> Result<Rounding> {
    let w = instance.width();
    let cap = ratio::floor(&((Rational::from_integer(1) + eps) * ratio::int(opt_guess)));
    let area_cap = rat(2, 1) * eps * ratio::int(w) * ratio::int(opt_guess);
    for attempt in 0..budget {
        let s = seed.wrapping_add(attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut sampled: Vec<(i64, TaskId)> = Vec::with_capacity(fractional.x.len());
        for (id, list) in &fractional.x {
            // Exact sampling: draw u uniformly from [0, common denominator).
            let den = list.iter().fold(1i128, |acc, (_, p)| num_integer_lcm(acc, *p.denom()));
            let u = rng.gen_range(0..den);
            let mut acc = 0i128;
            let mut pick = list.last().expect("non-empty distribution").0;
            for (k, p) in list {
                acc += p.numer() * (den / p.denom());
                if u < acc {
                    pick = *k;
                    break;
                }
            }
            sampled.push((pick, *id));
        }
        sampled.sort_unstable();
        let mut profile = DemandProfile::zero(w);
        let mut schedule = Schedule::new();
        let mut leftovers = BTreeSet::new();
        for (k, id) in sampled {
            let t = instance.task(id).ok_or_else(|| DspError::Precondition(format!("unknown task {id}")))?;
            if profile.max_on(k, k + t.width) + t.height <= cap {
                profile.add(k, k + t.width, t.height);
                schedule.place(id, k);
            } else {
                leftovers.insert(id);
            }
        }
        if profile.peak() > cap {
            return Err(DspError::Defect(format!("rounded peak {} exceeds {cap}", profile.peak())));
        }
        if ratio::int(instance.area_of(&leftovers)) <= area_cap {
            return Ok(Rounding { schedule, leftovers, seed: s, attempts: attempt + 1 });
        }
    }
    Err(DspError::Limit(format!("{budget} rounding attempts all dropped more than 2 eps W opt_guess of area")))
}

fn num_integer_lcm(a: i128, b: i128) -> i128 {
    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// `δ(ε) = min(ε/4, (1 + 4ε)² ln(1/ε) / 54)`, the second term rounded down
/// to a multiple of `2^-24`.
pub fn short_delta(eps: &Rational) -> Rational {
    let e = ratio::to_f64(eps);
    let second = (1.0 + 4.0 * e).powi(2) * (1.0 / e).ln() / 54.0;
    let second = ratio::from_f64_floor(second, SNAP);
    let first = eps / Rational::from_integer(4);
    if ratio::is_positive(&second) {
        first.min(second)
    } else {
        first
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtasOptions {
    pub eps: Rational,
    pub seed: u64,
    pub retry_budget: u32,
}

impl PtasOptions {
    pub fn new(eps: Rational) -> Self {
        PtasOptions { eps, seed: 0, retry_budget: RETRY_BUDGET }
    }
}

pub fn ptas_short(instance: &Instance, eps: &Rational) -> Result<(Schedule, SolveReport)> {
    ptas_short_with(instance, &PtasOptions::new(*eps))
}

/// Requires every height to be at most `δ(ε) · LB`; since `LB ≤ OPT` this
/// implies the `δ · OPT` bound of the analysis.
pub fn ptas_short_with(instance: &Instance, opts: &PtasOptions) -> Result<(Schedule, SolveReport)> {
    let clock = Instant::now();
    let eps = opts.eps;
    if !(ratio::is_positive(&eps) && eps <= rat(1, 4)) {
        return Err(DspError::Precondition(format!("eps must lie in (0, 1/4], got {}", ratio::display(&eps))));
    }
    let delta = short_delta(&eps);
    let lb = lower_bound(instance).value;
    if ratio::gt_scaled(instance.h_max(), &delta, lb) {
        return Err(DspError::Precondition(format!("h_max = {} exceeds delta LB = {} · {lb}", instance.h_max(), ratio::display(&delta))));
    }
    let w = instance.width();
    let horizontal: BTreeSet<TaskId> = instance.tasks().iter().filter(|t| ratio::gt_scaled(t.width, &delta, w)).map(|t| t.id).collect();
    let narrow: BTreeSet<TaskId> = instance.ids().difference(&horizontal).copied().collect();
    let candidates = horizontal_start_candidates(instance, &delta)?;
    let mut trace = vec![format!("{} wide tasks, {} start candidates", horizontal.len(), candidates.edges.len())];
    let mut accepted = None;
    if lb == 0 {
        accepted = Some((instance.ids().into_iter().map(|id| (id, 0)).collect::<Schedule>(), 0, 0, 0u64, 0u32));
    }
    for g in if lb > 0 { guess_grid(lb, &eps) } else { Vec::new() } {
        match ptas_guess(instance, &eps, g, &horizontal, &narrow, &candidates, opts) {
            Ok((s, peak, seed, attempts)) => {
                trace.push(format!("guess {g}: accepted with peak {peak} after {attempts} rounding attempts"));
                accepted = Some((s, peak, g, seed, attempts));
                break;
            }
            Err(e) if e.is_defect() || matches!(e, DspError::Numeric(_)) => return Err(e),
            Err(e) => trace.push(format!("guess {g}: {e}")),
        }
    }
    let (schedule, peak, source, guess) = match accepted {
        Some((s, p, g, seed, attempts)) => {
            trace.push(format!("rounding seed {seed}, {attempts} attempts"));
            (s, p, "lp-rounding", Some(g))
        }
        None => {
            trace.push("no guess accepted; using the 2-approximation".into());
            let (s, p) = two_approx_schedule(instance)?;
            (s, p, "two-approx (fallback)", None)
        }
    };
    let mut report = SolveReport::new("ptas-short", peak, lb, clock.elapsed())
        .with_param("eps", ratio::display(&eps))
        .with_param("delta", ratio::display(&delta))
        .with_param("seed", opts.seed)
        .with_param("source", source)
        .with_certified("peak <= (1 + 5 eps) g for the accepted guess g");
    if let Some(g) = guess {
        report = report.with_param("opt_guess", g);
    }
    report.trace = trace;
    Ok((schedule, report))
}

fn ptas_guess(
    instance: &Instance,
    eps: &Rational,
    g: i64,
    horizontal: &BTreeSet<TaskId>,
    narrow: &BTreeSet<TaskId>,
    candidates: &StartCandidates,
    opts: &PtasOptions,
) -> Result<(Schedule, i64, u64, u32)> {
    let w = instance.width();
    let fractional =
        solve_start_lp(instance, horizontal, candidates, g)?.ok_or_else(|| DspError::Infeasible(format!("start LP infeasible at {g}")))?;
    let rounding = round_with_budget(instance, &fractional, g, eps, opts.seed, opts.retry_budget)?;
    let pi = ratio::floor(&((Rational::from_integer(1) + rat(5, 1) * eps) * ratio::int(g)));

    // Leftovers go into a full-width box of height ⌊4 ε g⌋ on top.
    let box_h = ratio::floor(&(rat(4, 1) * eps * ratio::int(g)));
    let mut partial = rounding.schedule.clone();
    if !rounding.leftovers.is_empty() {
        let sub = instance.restrict(&rounding.leftovers);
        let (boxed, box_peak) = two_approx_schedule(&sub)?;
        if box_peak > box_h {
            return Err(DspError::Infeasible(format!("leftover box needs height {box_peak} > 4 eps g = {box_h}")));
        }
        partial.merge(&boxed);
        let fitted = best_fit(instance, &rounding.schedule, &rounding.leftovers);
        if DemandProfile::build(instance, &fitted).peak() < DemandProfile::build(instance, &partial).peak() {
            partial = fitted;
        }
    }
    let peak = DemandProfile::build(instance, &partial).peak();
    if peak > pi {
        return Err(DspError::Defect(format!("rounded tasks and box reach {peak} > {pi}")));
    }
    let full = push_and_fill(instance, &partial, narrow, &BTreeSet::new(), &(rat(4, 1) * eps), g, pi)?;
    let peak = DemandProfile::build(instance, &full).peak();
    if peak > pi || full.len() != instance.len() || full.iter().any(|(id, s)| s + instance.task(id).unwrap().width > w) {
        return Err(DspError::Defect(format!("assembled schedule has peak {peak} > {pi} or is incomplete")));
    }
    Ok((full, peak, rounding.seed, rounding.attempts))
}
