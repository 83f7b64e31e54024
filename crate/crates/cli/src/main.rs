fn main() {
    std::process::exit(wheelsim::main_with_args(std::env::args_os()));
}
