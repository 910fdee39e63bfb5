use clap::Parser;

fn main() {
    std::process::exit(ccr_quant::cli::run(ccr_quant::cli::Cli::parse()));
}
