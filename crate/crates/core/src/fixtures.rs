//! Named instances, the balanced-partition reduction, and seeded generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DspError, Result};
use crate::model::{Instance, Schedule, Task};

const FIG1A: &str = include_str!("../data/fig1a.json");
const FIG1A_SCHEDULE: &str = include_str!("../data/fig1a.sched.json");
const FIG1B: &str = include_str!("../data/fig1b.json");

pub const NAMES: [&str; 2] = ["fig1a", "fig1b"];

/// `fig1a`: 8 tasks on 7 edges, optimal peak 4 but no rectangle packing of
/// height 4. `fig1b`: 11 squares on 13 edges, optimal peak 11.
pub fn named_instance(name: &str) -> Result<Instance> {
    let text = match name {
        "fig1a" => FIG1A,
        "fig1b" => FIG1B,
        other => return Err(DspError::Precondition(format!("unknown instance `{other}`; known: {}", NAMES.join(", ")))),
    };
    Instance::from_json(text).map_err(|e| DspError::Defect(format!("bundled instance {name}: {e}")))
}

/// A peak-4 schedule of `fig1a`.
pub fn fig1a_schedule() -> Schedule {
    Schedule::from_json(FIG1A_SCHEDULE).expect("bundled schedule parses")
}

/// Parameters of the balanced-partition reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub instance: Instance,
    pub c: i64,
    /// Half of the sum of `A`.
    pub b: i64,
}

/// Squares of side `C + a_i` on `W = n·C + B` edges, where `2n = |A|`,
/// `C = inv_eps · Σ a` and `B = Σ a / 2`. A balanced partition gives two
/// shelves of `n` squares each and peak at most `2(C + max a)`; without one,
/// some edge carries three squares.
pub fn hardness_instance(a: &[i64], inv_eps: i64) -> Result<Reduction> {
    if a.is_empty() || !a.len().is_multiple_of(2) {
        return Err(DspError::Precondition(format!("|A| = {} must be even and positive", a.len())));
    }
    if a.iter().any(|&x| x < 1) || inv_eps < 1 {
        return Err(DspError::Precondition("entries of A and 1/eps must be positive".into()));
    }
    let sum: i64 = a.iter().sum();
    if sum % 2 != 0 {
        return Err(DspError::Precondition(format!("sum of A = {sum} is odd")));
    }
    let n = (a.len() / 2) as i64;
    let c = inv_eps * sum;
    let b = sum / 2;
    let tasks = a.iter().enumerate().map(|(i, &x)| Task::new(i as u64, c + x, c + x)).collect();
    Ok(Reduction { instance: Instance::new(n * c + b, tasks)?, c, b })
}

/// Whether `a` splits into two halves of equal size and equal sum.
pub fn has_balanced_partition(a: &[i64]) -> bool {
    let m = a.len();
    if !m.is_multiple_of(2) || m > 24 {
        return false;
    }
    let total: i64 = a.iter().sum();
    if total % 2 != 0 {
        return false;
    }
    (0u32..1 << m)
        .any(|mask| mask.count_ones() as usize == m / 2 && (0..m).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).sum::<i64>() * 2 == total)
}

/// Ranges for [`random_instance`]; bounds are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: (usize, usize),
    pub width: (i64, i64),
    pub task_width: (i64, i64),
    pub task_height: (i64, i64),
    /// When set, every task satisfies `h ≤ w ≤ beta · h`, with `beta` a
    /// ratio `(num, den)`; `(1, 1)` gives squares.
    pub aspect: Option<(i64, i64)>,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams { n: (1, 9), width: (1, 12), task_width: (1, 12), task_height: (0, 6), aspect: None, seed: 0 }
    }
}

pub fn random_instance(params: &GeneratorParams) -> Result<Instance> {
    let p = params;
    let empty = p.n.0 > p.n.1 || p.width.0 > p.width.1 || p.task_width.0 > p.task_width.1 || p.task_height.0 > p.task_height.1;
    if empty || p.width.0 < 1 || p.task_width.0 < 1 || p.task_height.0 < 0 {
        return Err(DspError::Precondition("empty or invalid generator range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = rng.gen_range(p.n.0..=p.n.1);
    let w = rng.gen_range(p.width.0..=p.width.1);
    let wmax = p.task_width.1.min(w);
    if p.task_width.0 > wmax {
        return Err(DspError::Precondition(format!("no task width in range fits W = {w}")));
    }
    let mut tasks = Vec::with_capacity(n);
    for id in 0..n as u64 {
        let task = match p.aspect {
            None => Task::new(id, rng.gen_range(p.task_width.0..=wmax), rng.gen_range(p.task_height.0..=p.task_height.1)),
            Some((num, den)) => {
                let hmin = p.task_height.0.max(1);
                let hmax = p.task_height.1.min(wmax);
                if hmin > hmax {
                    return Err(DspError::Precondition("aspect constraint leaves no admissible height".into()));
                }
                let h = rng.gen_range(hmin..=hmax);
                let hi = (h * num / den).min(wmax).max(h);
                Task::new(id, rng.gen_range(h..=hi), h)
            }
        };
        tasks.push(task);
    }
    Ok(Instance::new(w, tasks)?)
}

/// An instance with a known optimum: `levels` full-width layers are cut
/// into pieces of random widths, and each piece into slices of height at
/// most `max_height`. The layers form a schedule of peak `levels · layer_h`
/// equal to the area bound, so that value is optimal. Piece widths are at
/// most `max_piece_w`.
pub fn sliced_instance(width: i64, layers: usize, layer_h: i64, max_height: i64, max_piece_w: i64, seed: u64) -> (Instance, Schedule) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::new();
    let mut schedule = Schedule::new();
    let mut id = 0u64;
    for _ in 0..layers {
        let mut x = 0;
        while x < width {
            let w = rng.gen_range(1..=max_piece_w.min(width - x));
            let mut left = layer_h;
            while left > 0 {
                let h = rng.gen_range(1..=max_height.min(left));
                tasks.push(Task::new(id, w, h));
                schedule.place(id, x);
                id += 1;
                left -= h;
            }
            x += w;
        }
    }
    // Shuffle ids so the instance order carries no layout information.
    let mut perm: Vec<u64> = (0..id).collect();
    perm.shuffle(&mut rng);
    let tasks: Vec<Task> = tasks.into_iter().map(|t| Task::new(perm[t.id as usize], t.width, t.height)).collect();
    let schedule = schedule.iter().map(|(i, s)| (perm[i as usize], s)).collect();
    (Instance::new(width, tasks).expect("sliced instance is valid"), schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_schedule;

    #[test]
    fn named_instances_have_expected_areas() {
        let a = named_instance("fig1a").unwrap();
        assert_eq!((a.width(), a.len(), a.area()), (7, 8, 28));
        assert_eq!(validate_schedule(&a, &fig1a_schedule(), true), Ok(4));
        let b = named_instance("fig1b").unwrap();
        assert_eq!((b.width(), b.len(), b.area()), (13, 11, 143));
        assert!(b.tasks().iter().all(|t| t.width == t.height));
        assert!(named_instance("fig2").is_err());
    }

    #[test]
    fn reduction_dimensions() {
        let r = hardness_instance(&[1, 1, 1, 1], 4).unwrap();
        assert_eq!((r.c, r.instance.width()), (16, 34));
        assert!(r.instance.tasks().iter().all(|t| t.width == 17 && t.height == 17));
        assert!(hardness_instance(&[1, 1, 1, 2], 4).is_err());
        assert!(hardness_instance(&[1, 1, 2], 4).is_err());
    }

    #[test]
    fn balanced_partition_oracle() {
        assert!(has_balanced_partition(&[1, 1, 1, 1]));
        assert!(has_balanced_partition(&[1, 2, 3, 4]));
        assert!(!has_balanced_partition(&[1, 1, 1, 3]));
        assert!(!has_balanced_partition(&[1, 1, 2, 4]));
    }

    #[test]
    fn generator_is_deterministic() {
        let p = GeneratorParams { seed: 7, ..Default::default() };
        assert_eq!(random_instance(&p).unwrap(), random_instance(&p).unwrap());
        let sq = GeneratorParams { aspect: Some((1, 1)), task_height: (1, 6), ..p.clone() };
        assert!(random_instance(&sq).unwrap().tasks().iter().all(|t| t.width == t.height));
        let none = GeneratorParams { n: (0, 0), ..p };
        assert!(random_instance(&none).unwrap().is_empty());
    }

    #[test]
    fn sliced_instances_are_tight() {
        let (inst, s) = sliced_instance(10, 3, 4, 2, 4, 1);
        assert_eq!(validate_schedule(&inst, &s, true), Ok(12));
        assert_eq!(inst.area(), 120);
        assert!(inst.h_max() <= 2);
    }
}
