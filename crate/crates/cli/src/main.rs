use std::process::ExitCode;

fn main() -> ExitCode {
    match pdmp_cli::run(std::env::args_os()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprint!("{}", failure.message());
            if !failure.message().ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
