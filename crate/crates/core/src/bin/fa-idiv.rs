fn main() {
    std::process::exit(factor_idiv::harness::cli_main(std::env::args_os()));
}
