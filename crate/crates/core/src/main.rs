fn main() {
    std::process::exit(lattice_zeta::cli::run(std::env::args_os()));
}
