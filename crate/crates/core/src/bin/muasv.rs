use clap::Parser;
use muasv::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let code = match builder.build() {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            2
        }
    };
    std::process::exit(code);
}
