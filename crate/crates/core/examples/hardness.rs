//! The partition reduction: optimal peaks on yes and no instances.
use demand_strip::exact::{exact_dsp, OracleBudget};
use demand_strip::fixtures::{hardness_instance, has_balanced_partition};

fn main() -> demand_strip::Result<()> {
    for a in [[1, 1, 2, 2], [1, 1, 1, 3]] {
        let red = hardness_instance(&a, 4)?;
        let opt = exact_dsp(&red.instance, &OracleBudget::default()).peak;
        println!(
            "A={a:?} balanced={} C={} W={} OPT={opt} yes-bound={} no-bound={}",
            has_balanced_partition(&a),
            red.c,
            red.instance.width(),
            2 * (red.c + a.iter().max().unwrap()),
            3 * (red.c + 1)
        );
    }
    Ok(())
}
