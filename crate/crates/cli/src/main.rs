use clap::Parser;

fn main() {
    let cli = edgewit_cli::Cli::parse();
    if let Err(e) = edgewit_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
