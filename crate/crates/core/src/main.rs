fn main() {
    std::process::exit(wavesep::cli::run());
}
