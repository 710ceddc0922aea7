fn main() {
    std::process::exit(zeno_core::cli::run(std::env::args_os()));
}
