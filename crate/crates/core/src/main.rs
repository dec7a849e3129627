fn main() {
    std::process::exit(mcmc_cert::cli::run(std::env::args_os()));
}
