fn main() {
    std::process::exit(oscidamp_cli::run(std::env::args_os()));
}
