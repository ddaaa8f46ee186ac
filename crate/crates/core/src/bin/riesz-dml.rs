fn main() {
    std::process::exit(riesz_dml::cli::run(std::env::args_os()));
}
