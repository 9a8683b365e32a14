//! Property tests over generated instances and schedules.

use std::collections::BTreeSet;

use demand_strip::baseline::two_approx;
use demand_strip::bounds::lower_bound;
use demand_strip::containers::{five_thirds, guess_grid};
use demand_strip::exact::{exact_dsp, OracleBudget};
use demand_strip::geom::{verify_placement, Rect};
use demand_strip::model::validate_schedule;
use demand_strip::profile::{left_push, DemandProfile};
use demand_strip::ratio::{self, rat};
use demand_strip::square::{steinberg_height, steinberg_pack};
use demand_strip::{Instance, Schedule, Task};
use proptest::prelude::*;

fn instance(max_n: usize, max_w: i64) -> impl Strategy<Value = Instance> {
    (1..=max_w).prop_flat_map(move |w| {
        prop::collection::vec((1..=w, 0..=6i64), 1..=max_n).prop_map(move |dims| {
            Instance::new(w, dims.iter().enumerate().map(|(i, &(tw, h))| Task::new(i as u64, tw, h)).collect()).unwrap()
        })
    })
}

fn instance_with_schedule(max_n: usize, max_w: i64) -> impl Strategy<Value = (Instance, Schedule)> {
    instance(max_n, max_w).prop_flat_map(|inst| {
        let ranges: Vec<_> = inst.tasks().iter().map(|t| 0..=inst.width() - t.width).collect();
        (Just(inst), ranges).prop_map(|(inst, starts)| {
            let s = inst.tasks().iter().zip(starts).map(|(t, x)| (t.id, x)).collect();
            (inst, s)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn profile_equals_per_edge_sum((inst, s) in instance_with_schedule(10, 20)) {
        let mut d = vec![0i64; inst.width() as usize];
        for t in inst.tasks() {
            let x = s.start(t.id).unwrap();
            (x..x + t.width).for_each(|e| d[e as usize] += t.height);
        }
        let p = DemandProfile::build(&inst, &s);
        prop_assert_eq!(p.to_vec(), d.clone());
        prop_assert_eq!(p.peak(), d.iter().copied().max().unwrap_or(0));
        prop_assert!(p.runs().windows(2).all(|r| r[0].1 != r[1].1));
    }

    #[test]
    fn left_push_keeps_peak_and_moves_left((inst, s) in instance_with_schedule(10, 16)) {
        let pi = DemandProfile::build(&inst, &s).peak();
        let pushed = left_push(&inst, &s, pi, &BTreeSet::new()).unwrap();
        prop_assert!(validate_schedule(&inst, &pushed, true).unwrap() <= pi);
        for t in inst.tasks() {
            prop_assert!(pushed.start(t.id).unwrap() <= s.start(t.id).unwrap());
        }
    }

    #[test]
    fn frozen_tasks_do_not_move((inst, s) in instance_with_schedule(8, 16)) {
        let frozen: BTreeSet<_> = inst.tasks().iter().filter(|t| t.id % 2 == 0).map(|t| t.id).collect();
        let pi = DemandProfile::build(&inst, &s).peak();
        let pushed = left_push(&inst, &s, pi, &frozen).unwrap();
        for id in &frozen {
            prop_assert_eq!(pushed.start(*id), s.start(*id));
        }
    }

    #[test]
    fn two_approx_is_within_twice_the_bound(inst in instance(12, 30)) {
        let (s, r) = two_approx(&inst).unwrap();
        let peak = validate_schedule(&inst, &s, true).unwrap();
        prop_assert_eq!(peak, r.peak);
        prop_assert!(peak <= 2 * lower_bound(&inst).value);
    }

    #[test]
    fn five_thirds_outputs_validate(inst in instance(9, 12)) {
        let (s, r) = five_thirds(&inst, &rat(1, 10)).unwrap();
        let peak = validate_schedule(&inst, &s, true).unwrap();
        prop_assert_eq!(peak, r.peak);
        prop_assert!(peak <= 2 * lower_bound(&inst).value);
    }

    #[test]
    fn bound_never_exceeds_optimum(inst in instance(6, 8)) {
        let r = exact_dsp(&inst, &OracleBudget::default());
        prop_assert!(r.proven_optimal);
        prop_assert!(lower_bound(&inst).value <= r.peak);
    }

    #[test]
    fn schedules_round_trip_through_json((inst, s) in instance_with_schedule(8, 12)) {
        prop_assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
        prop_assert_eq!(Schedule::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn guess_grid_brackets_the_optimum(lb in 1i64..5000, inv in 2i128..200) {
        let eps = rat(1, inv);
        let grid = guess_grid(lb, &eps);
        prop_assert_eq!(grid[0], lb);
        prop_assert_eq!(*grid.last().unwrap(), 2 * lb);
        for p in grid.windows(2) {
            prop_assert!(p[0] < p[1]);
            // Consecutive guesses differ by at most a factor 1 + eps, rounded up.
            prop_assert!(p[1] <= ratio::ceil_mul(&(rat(1, 1) + eps), p[0]));
        }
    }

    #[test]
    fn steinberg_height_boxes_always_pack(dims in prop::collection::vec((1i64..20, 1i64..20), 1..10), extra in 0i64..10) {
        let rects: Vec<Rect> = dims.iter().enumerate().map(|(i, &(w, h))| Rect::new(i as u64, w, h)).collect();
        let bw = rects.iter().map(|r| r.w).max().unwrap() + extra;
        let bh = steinberg_height(&rects, bw).unwrap();
        let p = steinberg_pack(&rects, bw, bh).unwrap();
        prop_assert!(verify_placement(&rects, &p).is_ok());
    }
}
