//! DSP versus GSP optimum on the first bundled instance.
use demand_strip::exact::{exact_dsp, exact_gsp, OracleBudget};
use demand_strip::fixtures::named_instance;

fn main() -> demand_strip::Result<()> {
    let inst = named_instance("fig1a")?;
    let budget = OracleBudget::default();
    let d = exact_dsp(&inst, &budget);
    let g = exact_gsp(&inst, &budget);
    println!("DSP optimum {} (proven {}, {} nodes)", d.peak, d.proven_optimal, d.nodes);
    println!("GSP optimum {} (proven {}, {} nodes)", g.peak, g.proven_optimal, g.nodes);
    for (id, (x, y)) in &g.solution.positions {
        println!("  rect {id} at ({x}, {y})");
    }
    Ok(())
}
