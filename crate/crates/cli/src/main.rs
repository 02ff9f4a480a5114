use std::io;

fn main() {
    let env_seed = std::env::var(combwalk_cli::SEED_ENV).ok();
    let code = combwalk_cli::run(
        std::env::args_os(),
        env_seed,
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
