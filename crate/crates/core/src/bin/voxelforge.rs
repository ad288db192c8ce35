fn main() {
    std::process::exit(voxelforge::cli::main_with_args(std::env::args_os()));
}
