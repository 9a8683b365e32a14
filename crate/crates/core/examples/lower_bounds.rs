//! Lower bounds on the bundled instances.
use demand_strip::bounds::lower_bound;
use demand_strip::fixtures::{named_instance, NAMES};

fn main() -> demand_strip::Result<()> {
    for name in NAMES {
        let inst = named_instance(name)?;
        let lb = lower_bound(&inst);
        println!(
            "{name}: W={} n={} h_max={} wide_sum={} area_avg={} => LB={}",
            inst.width(),
            inst.len(),
            lb.h_max,
            lb.wide_sum,
            lb.area_avg,
            lb.value
        );
    }
    Ok(())
}
