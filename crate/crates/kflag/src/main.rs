fn main() {
    std::process::exit(kflag::cli::run(std::env::args_os()));
}
