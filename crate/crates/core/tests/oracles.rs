//! Library results checked against independent reference computations.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use demand_strip::bounds::lower_bound;
use demand_strip::containers::{gap_optimum, gap_pack, Container, ContainerKind};
use demand_strip::exact::{exact_dsp, exact_gsp, instance_rects, OracleBudget};
use demand_strip::fixtures::{fig1a_schedule, named_instance, random_instance, GeneratorParams};
use demand_strip::geom::verify_placement;
use demand_strip::model::validate_schedule;
use demand_strip::profile::DemandProfile;
use demand_strip::ptas::{horizontal_start_candidates, solve_start_lp};
use demand_strip::ratio::{self, rat, Rational};
use demand_strip::square::{discretize_jump_bound, discretize_profile, large_width_guess, square_dsp};
use demand_strip::{Instance, Schedule, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-edge demand by direct summation.
fn naive_demands(inst: &Instance, s: &Schedule) -> Vec<i64> {
    let mut d = vec![0; inst.width() as usize];
    for t in inst.tasks() {
        let x = s.start(t.id).unwrap();
        for e in x..x + t.width {
            d[e as usize] += t.height;
        }
    }
    d
}

/// Optimum over every start vector.
fn naive_opt(inst: &Instance) -> i64 {
    let tasks = inst.tasks();
    let w = inst.width();
    let mut starts = vec![0i64; tasks.len()];
    let mut best = i64::MAX;
    loop {
        let s: Schedule = tasks.iter().zip(&starts).map(|(t, &x)| (t.id, x)).collect();
        best = best.min(naive_demands(inst, &s).into_iter().max().unwrap_or(0));
        let mut k = 0;
        loop {
            if k == tasks.len() {
                return if best == i64::MAX { 0 } else { best };
            }
            starts[k] += 1;
            if starts[k] + tasks[k].width <= w {
                break;
            }
            starts[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn fig1a_schedule_has_flat_profile_four() {
    let inst = named_instance("fig1a").unwrap();
    let s = fig1a_schedule();
    assert_eq!(naive_demands(&inst, &s), vec![4; 7]);
    assert_eq!(validate_schedule(&inst, &s, true).unwrap(), 4);
    assert_eq!(lower_bound(&inst).value, 4);
}

#[test]
fn fig1b_lower_bound_meets_optimum() {
    let inst = named_instance("fig1b").unwrap();
    assert_eq!(lower_bound(&inst).value, 11);
    assert_eq!(exact_dsp(&inst, &OracleBudget::default()).peak, 11);
}

#[test]
fn exact_dsp_matches_naive_enumeration() {
    for seed in 0..300 {
        let inst = random_instance(&GeneratorParams { seed, n: (1, 5), width: (1, 6), task_width: (1, 6), ..Default::default() }).unwrap();
        let r = exact_dsp(&inst, &OracleBudget::default());
        assert!(r.proven_optimal);
        assert_eq!(r.peak, naive_opt(&inst), "seed {seed}: {}", inst.to_json());
        assert_eq!(validate_schedule(&inst, &r.solution, true).unwrap(), r.peak);
    }
}

#[test]
fn gsp_dominates_dsp_and_packs_cleanly() {
    for seed in 0..120 {
        let inst = random_instance(&GeneratorParams {
            seed: 500 + seed,
            n: (1, 7),
            width: (1, 8),
            task_width: (1, 8),
            task_height: (1, 5),
            ..Default::default()
        })
        .unwrap();
        let d = exact_dsp(&inst, &OracleBudget::default());
        let g = exact_gsp(&inst, &OracleBudget::default());
        assert!(g.proven_optimal);
        assert!(g.peak >= d.peak, "seed {seed}");
        verify_placement(&instance_rects(&inst), &g.solution).unwrap();
        assert!(g.solution.positions.iter().all(|(id, &(_, y))| y + inst.task(*id).unwrap().height <= g.peak));
    }
}

#[test]
fn gap_pack_is_exact_at_tiny_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.gen_range(1..=7);
        let tasks: Vec<Task> = (0..n).map(|id| Task::new(id, rng.gen_range(1..=6), rng.gen_range(1..=6))).collect();
        let containers: Vec<Container> = (0..rng.gen_range(1..=3))
            .map(|id| Container {
                id,
                kind: if rng.gen_bool(0.5) { ContainerKind::Vertical } else { ContainerKind::Horizontal },
                width: rng.gen_range(1..=10),
                height: rng.gen_range(1..=10),
            })
            .collect();
        let best = gap_optimum(&tasks, &containers);
        let got = gap_pack(&tasks, &containers, &rat(1, 1_000_000));
        assert!(got.complete);
        assert_eq!(got.assigned_area, best);
        // The assignment itself respects capacities.
        for (k, c) in containers.iter().enumerate() {
            let load: i64 = got.assignment.iter().filter(|(_, &j)| j == k).map(|(id, _)| c.load(&tasks[*id as usize])).sum();
            assert!(load <= c.capacity());
        }
    }
}

#[test]
fn start_lp_is_feasible_at_the_optimum_of_wide_instances() {
    let delta_w = rat(1, 5);
    for seed in 0..60 {
        let inst = random_instance(&GeneratorParams {
            seed: 900 + seed,
            n: (1, 5),
            width: (5, 12),
            task_width: (3, 12),
            task_height: (1, 4),
            ..Default::default()
        })
        .unwrap();
        if inst.tasks().iter().any(|t| !ratio::gt_scaled(t.width, &delta_w, inst.width())) {
            continue;
        }
        let all: BTreeSet<_> = inst.ids();
        let cands = horizontal_start_candidates(&inst, &delta_w).unwrap();
        let opt = exact_dsp(&inst, &OracleBudget::default()).peak;
        let sol = solve_start_lp(&inst, &all, &cands, opt).unwrap().expect("an optimal schedule is LP-feasible");
        // Independent exact check on every edge, not only candidates.
        let mut load = vec![Rational::from_integer(0); inst.width() as usize];
        for (id, list) in &sol.x {
            let t = inst.task(*id).unwrap();
            let total: Rational = list.iter().map(|(_, p)| *p).sum();
            assert_eq!(total, rat(1, 1));
            for (k, p) in list {
                assert!(k + t.width <= inst.width());
                for e in *k..k + t.width {
                    load[e as usize] += p * ratio::int(t.height);
                }
            }
        }
        let cap = ratio::int(opt) + sol.excess;
        assert!(load.iter().all(|l| *l <= cap), "seed {seed}");
        // Fractional area still has to fit under the cap, so the LP is
        // infeasible strictly below the area bound.
        let lb_area = lower_bound(&inst).area_avg;
        if lb_area > 1 {
            assert!(solve_start_lp(&inst, &all, &cands, lb_area - 1).unwrap().is_none(), "seed {seed}");
        }
    }
}

#[test]
fn discretized_profile_stays_in_band_with_few_jumps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let w = rng.gen_range(20..=200);
        let eps = rat(1, rng.gen_range(3..=10));
        let delta = rat(1, rng.gen_range(2..=8));
        let min_w = ratio::floor_mul(&delta, w) + 1;
        let g = rng.gen_range(10..=60);
        let mut prof = DemandProfile::zero(w);
        for _ in 0..rng.gen_range(0..12) {
            let tw = rng.gen_range(min_w..=w);
            let h = rng.gen_range(1..=g / 2);
            let x = rng.gen_range(0..=w - tw);
            let mut p = prof.clone();
            p.add(x, x + tw, h);
            if p.peak() <= g {
                prof = p;
            }
        }
        let d2 = discretize_profile(&prof, &eps, &delta, g);
        let lift_band = ratio::floor_mul(&(eps * ratio::int(2)), g);
        for e in 0..w {
            assert!(prof.at(e) <= d2.at(e));
            assert!(d2.at(e) <= prof.at(e) + lift_band, "edge {e}");
        }
        assert!(ratio::int(d2.jumps() as i64) <= discretize_jump_bound(&eps, &delta));
    }
}

/// 380 side-10 squares and 20 side-2 squares on 2100 edges: optimum 20,
/// and the tall widths exceed 1.8 W.
fn case_one_instance() -> Instance {
    let mut tasks: Vec<Task> = (0..380).map(|id| Task::new(id, 10, 10)).collect();
    tasks.extend((380..400).map(|id| Task::new(id, 2, 2)));
    Instance::new(2100, tasks).unwrap()
}

#[test]
fn square_case_one_rows_never_triple_stack() {
    let inst = case_one_instance();
    let opt = 20;
    let (sched, peak, case) = large_width_guess(&inst, opt).unwrap();
    assert_eq!(case, 1);
    assert_eq!(validate_schedule(&inst, &sched, true).unwrap(), peak);
    assert!(2 * peak <= 3 * opt);
    // Recompute the two rows from the sorted order.
    let mut order: Vec<&Task> = inst.tasks().iter().collect();
    order.sort_by_key(|t| (Reverse(t.height), t.id));
    let i1 = order.iter().filter(|t| 100 * t.height > 49 * opt).count();
    let (mut i2, mut sum) = (0, 0);
    while sum + order[i2].width < inst.width() {
        sum += order[i2].width;
        i2 += 1;
    }
    let rows: Vec<&Task> = order[..i2].iter().chain(&order[i2 + 1..i1 - 1]).copied().collect();
    let mut tall_count = vec![0; inst.width() as usize];
    for t in rows {
        let x = sched.start(t.id).unwrap();
        (x..x + t.width).for_each(|e| tall_count[e as usize] += 1);
    }
    assert!(tall_count.iter().all(|&c| c <= 2));
    let (_, r) = square_dsp(&inst, &rat(1, 1)).unwrap();
    assert!(2 * r.peak <= 3 * opt);
}
