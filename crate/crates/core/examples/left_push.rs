//! Left-push a right-heavy schedule and print the sortedness witness.
use std::collections::BTreeSet;

use demand_strip::profile::{is_sorted, left_push, sortedness_witness_at, DemandProfile};
use demand_strip::{Instance, Schedule, Task};

fn main() -> demand_strip::Result<()> {
    let inst = Instance::new(10, vec![Task::new(1, 3, 2), Task::new(2, 2, 3), Task::new(3, 4, 1), Task::new(4, 1, 2)])?;
    let sched: Schedule = [(1, 7), (2, 5), (3, 6), (4, 9)].into_iter().collect();
    let before = DemandProfile::build(&inst, &sched);
    let pi = before.peak();
    let pushed = left_push(&inst, &sched, pi, &BTreeSet::new())?;
    let after = DemandProfile::build(&inst, &pushed);
    let w = sortedness_witness_at(&after, pi, inst.h_max());
    println!("before {:?}", before.to_vec());
    println!("after  {:?}", after.to_vec());
    println!("starts {:?}", pushed.iter().collect::<Vec<_>>());
    println!("witness q={} t*={} sorted={}", w.q, w.t_star, is_sorted(&after, w.q, w.t_star));
    Ok(())
}
