fn main() {
    spagat_cli::init_logging();
    std::process::exit(spagat_cli::main_with_args(std::env::args_os()));
}
