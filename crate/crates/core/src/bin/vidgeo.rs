fn main() {
    std::process::exit(vidgeo::cli::run(std::env::args_os()));
}
