//! The container-based algorithm in both modes, compared with the optimum.
use demand_strip::containers::{five_thirds_with, ContainerMode, FiveThirdsOptions};
use demand_strip::exact::{exact_dsp, OracleBudget};
use demand_strip::fixtures::named_instance;
use demand_strip::ratio::rat;

fn main() -> demand_strip::Result<()> {
    for name in ["fig1a", "fig1b"] {
        let inst = named_instance(name)?;
        let opt = exact_dsp(&inst, &OracleBudget::default()).peak;
        for mode in [ContainerMode::Guided, ContainerMode::Enumerate] {
            let mut opts = FiveThirdsOptions::new(rat(1, 10));
            opts.mode = mode;
            let (_, r) = five_thirds_with(&inst, &opts)?;
            println!("{name} {mode:?}: peak {} (OPT {opt}) via {}", r.peak, r.params.get("source").map_or("?", |s| s.as_str()));
        }
    }
    Ok(())
}
