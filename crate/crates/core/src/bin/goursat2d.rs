fn main() {
    std::process::exit(goursat2d::cli::main());
}
