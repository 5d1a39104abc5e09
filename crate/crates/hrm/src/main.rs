fn main() {
    env_logger::init();
    std::process::exit(hrm::cli::run(std::env::args_os()));
}
