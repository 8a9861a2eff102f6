use clap::Parser;

use subvox::cli::{self, Cli};

/// Exit codes: 0 success, 1 usage, 2 data error, 3 model/decode error.
fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; they print to stdout
            // and exit 0, while genuine usage errors exit 1.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(failure) = cli::run(cli) {
        eprintln!("error: {:#}", failure.error());
        std::process::exit(failure.code());
    }
}
