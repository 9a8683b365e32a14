//! Assign tasks to containers, maximising packed area.
use demand_strip::containers::{gap_optimum, gap_pack, Container, ContainerKind};
use demand_strip::ratio::rat;
use demand_strip::Task;

fn main() {
    let tasks: Vec<Task> =
        [(3, 2), (2, 4), (5, 1), (1, 3), (4, 2), (2, 2)].iter().enumerate().map(|(i, &(w, h))| Task::new(i as u64, w, h)).collect();
    let containers = [
        Container { id: 0, kind: ContainerKind::Vertical, width: 6, height: 4 },
        Container { id: 1, kind: ContainerKind::Horizontal, width: 5, height: 3 },
    ];
    let out = gap_pack(&tasks, &containers, &rat(1, 10));
    println!("assigned {:?}", out.assignment);
    println!("area {} of optimum {} (leftovers {:?})", out.assigned_area, gap_optimum(&tasks, &containers), out.leftovers);
}
