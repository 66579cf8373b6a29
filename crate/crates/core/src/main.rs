fn main() {
    bsplace::blas::init();
    std::process::exit(bsplace::cli::run(std::env::args_os()));
}
