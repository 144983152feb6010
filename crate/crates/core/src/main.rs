//! `bergman-lab`: reproducible experiments driven by a TOML config.

fn main() {
    std::process::exit(bergman_lab::cli::run(std::env::args().collect()));
}
