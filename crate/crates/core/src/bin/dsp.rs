fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(demand_strip::cli::run_cli(&argv));
}
