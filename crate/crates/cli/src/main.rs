fn main() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .init();
    std::process::exit(protoner_cli::run(std::env::args_os()));
}
