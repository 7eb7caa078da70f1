fn main() {
    std::process::exit(locfo::run(std::env::args_os()));
}
