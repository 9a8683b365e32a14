//! Square tasks: the bundled instance and a wide generated one.
use demand_strip::fixtures::{named_instance, random_instance, GeneratorParams};
use demand_strip::ratio::rat;
use demand_strip::square::square_dsp;

fn main() -> demand_strip::Result<()> {
    let fig = named_instance("fig1b")?;
    let (_, r) = square_dsp(&fig, &rat(1, 1))?;
    println!("fig1b: peak {} LB {} {:?}", r.peak, r.lower_bound, r.params);
    let wide = random_instance(&GeneratorParams {
        n: (300, 300),
        width: (4000, 4000),
        task_width: (1, 12),
        task_height: (1, 12),
        aspect: Some((1, 1)),
        seed: 1,
    })?;
    let (_, r) = square_dsp(&wide, &rat(1, 1))?;
    println!("wide: peak {} LB {} branch {}", r.peak, r.lower_bound, r.params.get("branch").map_or("?", |s| s.as_str()));
    Ok(())
}
