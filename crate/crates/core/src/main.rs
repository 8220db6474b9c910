fn main() {
    std::process::exit(ctxprobe::cli::run(std::env::args_os()));
}
