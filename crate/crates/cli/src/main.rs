use std::process::ExitCode;

fn main() -> ExitCode {
    let result = rfcollapse_cli::invoke_args(std::env::args_os());
    let (out, err): (Vec<_>, Vec<_>) = result.summary.iter().partition(|_| result.exit_code <= 1);
    for line in out {
        println!("{line}");
    }
    for line in err {
        eprintln!("{line}");
    }
    ExitCode::from(result.exit_code as u8)
}
