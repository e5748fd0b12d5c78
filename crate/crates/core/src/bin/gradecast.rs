fn main() {
    std::process::exit(gradecast::cli::run(std::env::args_os()));
}
