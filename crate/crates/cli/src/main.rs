use clap::Parser;
use kpp_lab::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("KPP_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .expect("thread pool is configured once");
        }
    }
    std::process::exit(run(&cli));
}
