fn main() {
    eprintln!("cyforms: command interface not wired up yet");
    std::process::exit(2);
}
