fn main() { std::process::exit(coinsieve::cli::run()); }
