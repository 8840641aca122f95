fn main() {
    std::process::exit(synth_eval::cli::run(std::env::args_os()));
}
