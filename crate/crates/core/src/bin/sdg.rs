fn main() {
    std::process::exit(stokes_darcy::cli::main_with(std::env::args_os()));
}
