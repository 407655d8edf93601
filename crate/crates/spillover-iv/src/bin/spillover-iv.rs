use clap::Parser;

fn main() {
    let cli = spillover_iv::cli::Cli::parse();
    std::process::exit(spillover_iv::cli::run(cli));
}
