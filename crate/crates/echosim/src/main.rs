fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECHOSIM_LOG", "warn")).init();
    let code = echosim::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
