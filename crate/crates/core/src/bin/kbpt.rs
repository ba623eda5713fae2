fn main() {
    std::process::exit(program_transfer::harness::main_with_args(std::env::args_os()));
}
