fn main() {
    std::process::exit(divseq::cli::run(std::env::args_os()));
}
