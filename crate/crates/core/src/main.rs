use clap::Parser;

fn main() {
    let cli = facegm::cli::Cli::parse();
    std::process::exit(facegm::cli::run(cli));
}
