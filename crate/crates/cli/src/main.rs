use clap::Parser;

fn main() {
    let cli = ergolab_cli::Cli::parse();
    std::process::exit(ergolab_cli::run(cli));
}
