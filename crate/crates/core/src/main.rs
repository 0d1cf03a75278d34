fn main() {
    if let Some(n) = std::env::var("PHASEMIX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    std::process::exit(phasemix::cli::run(std::env::args_os()));
}
