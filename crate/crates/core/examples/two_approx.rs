//! The 2-approximation on a generated instance.
use demand_strip::baseline::two_approx;
use demand_strip::fixtures::{random_instance, GeneratorParams};

fn main() -> demand_strip::Result<()> {
    let inst = random_instance(&GeneratorParams {
        n: (30, 30),
        width: (40, 40),
        task_width: (1, 30),
        task_height: (1, 9),
        seed: 7,
        ..Default::default()
    })?;
    let (_, report) = two_approx(&inst)?;
    println!("peak {} LB {} ratio {} ({:.3} ms)", report.peak, report.lower_bound, report.ratio, report.wall_ms);
    Ok(())
}
