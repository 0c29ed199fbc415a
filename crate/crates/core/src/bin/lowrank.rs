fn main() {
    std::process::exit(lowrank::cli::run(std::env::args()));
}
