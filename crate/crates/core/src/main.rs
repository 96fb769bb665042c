use clap::Parser;

fn main() {
    let cli = epiconj::cli::Cli::parse();
    std::process::exit(epiconj::cli::run(cli));
}
