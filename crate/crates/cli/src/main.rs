use clap::Parser;
use palmpat_cli::{configure_threads, run, Cli};

fn main() {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("palmpat: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
