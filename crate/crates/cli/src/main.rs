use clap::Parser;

fn main() {
    let cli = gainpdf_cli::Cli::parse();
    if let Err(e) = gainpdf_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(gainpdf_cli::exit_code(&e));
    }
}
