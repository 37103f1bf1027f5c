use codimflow::cli;

fn main() {
    if let Err(e) = cli::configure_threads() {
        eprintln!("{}", cli::error_line(&e));
        std::process::exit(cli::exit_code(&e));
    }
    std::process::exit(cli::main_with(std::env::args_os().skip(1)));
}
