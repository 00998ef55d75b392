use clap::Parser;

fn main() {
    let cli = promptaudit::cli::Cli::parse();
    std::process::exit(promptaudit::cli::execute(cli));
}
