//! Write SVG drawings of the optimal schedule and packing of fig1a.
use demand_strip::cli::render_svg;
use demand_strip::exact::{exact_gsp, OracleBudget};
use demand_strip::fixtures::{fig1a_schedule, named_instance};

fn main() -> demand_strip::Result<()> {
    let inst = named_instance("fig1a")?;
    let dir = std::env::temp_dir();
    std::fs::write(dir.join("fig1a_dsp.svg"), render_svg(&inst, &fig1a_schedule(), None)).expect("write");
    let g = exact_gsp(&inst, &OracleBudget::default());
    let sched = g.solution.positions.iter().map(|(&id, &(x, _))| (id, x)).collect();
    std::fs::write(dir.join("fig1a_gsp.svg"), render_svg(&inst, &sched, Some(&g.solution))).expect("write");
    println!("wrote {}", dir.join("fig1a_{dsp,gsp}.svg").display());
    Ok(())
}
