use clap::Parser;

fn main() {
    let cli = emunet_cli::Cli::parse();
    if let Err(err) = emunet_cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
