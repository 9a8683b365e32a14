//! The short-task scheme on an instance with a known optimum.
use demand_strip::fixtures::sliced_instance;
use demand_strip::ptas::{ptas_short_with, short_delta, PtasOptions};
use demand_strip::ratio::{display, floor_mul, int, rat};

fn main() -> demand_strip::Result<()> {
    let eps = rat(1, 5);
    let (inst, layered) = sliced_instance(30, 6, 20, 1, 12, 3);
    let opt = demand_strip::profile::DemandProfile::build(&inst, &layered).peak();
    println!("n={} W={} delta={} OPT={opt}", inst.len(), inst.width(), display(&short_delta(&eps)));
    for seed in 0..3 {
        let mut opts = PtasOptions::new(eps);
        opts.seed = seed;
        let (_, r) = ptas_short_with(&inst, &opts)?;
        println!("seed {seed}: peak {} <= {}", r.peak, floor_mul(&(int(1) + eps * int(5)), opt));
    }
    Ok(())
}
