fn main() {
    std::process::exit(archshift::run_cli());
}
