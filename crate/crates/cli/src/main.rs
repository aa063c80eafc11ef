fn main() {
    let env = xyzca_cli::config::env_overrides();
    std::process::exit(xyzca_cli::main_with(std::env::args_os(), &env));
}
