//! Lower bounds on the optimal peak.

use serde::{Deserialize, Serialize};

use crate::model::Instance;

/// The three classical bounds and their maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerBound {
    pub h_max: i64,
    /// Total height of tasks with `2w > W`; they all share the middle edge.
    pub wide_sum: i64,
    /// `⌈a / W⌉`.
    pub area_avg: i64,
    pub value: i64,
}

pub fn lower_bound(instance: &Instance) -> LowerBound {
    let w = instance.width();
    let h_max = instance.h_max();
    let wide_sum = instance.tasks().iter().filter(|t| 2 * t.width > w).map(|t| t.height).sum();
    let area_avg = div_ceil(instance.area(), w);
    LowerBound { h_max, wide_sum, area_avg, value: h_max.max(wide_sum).max(area_avg) }
}

pub(crate) fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && (a > 0) == (b > 0) {
        q + 1
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Task;

    #[test]
    fn single_full_width_task() {
        let inst = Instance::new(5, vec![Task::new(0, 5, 7)]).unwrap();
        assert_eq!(lower_bound(&inst), LowerBound { h_max: 7, wide_sum: 7, area_avg: 7, value: 7 });
    }

    #[test]
    fn half_width_is_not_wide() {
        let inst = Instance::new(4, vec![Task::new(0, 2, 3), Task::new(1, 2, 3)]).unwrap();
        let lb = lower_bound(&inst);
        assert_eq!(lb.wide_sum, 0);
        assert_eq!(lb.area_avg, 3);
        let inst = Instance::new(5, vec![Task::new(0, 3, 3), Task::new(1, 3, 3)]).unwrap();
        assert_eq!(lower_bound(&inst).wide_sum, 6);
    }

    #[test]
    fn area_rounds_up() {
        let inst = Instance::new(3, vec![Task::new(0, 1, 1)]).unwrap();
        assert_eq!(lower_bound(&inst).area_avg, 1);
        assert_eq!(div_ceil(0, 3), 0);
        assert_eq!(div_ceil(7, 7), 1);
    }
}
