use std::io;

fn main() {
    let code = rthkp_server::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
