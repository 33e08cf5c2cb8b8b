fn main() {
    std::process::exit(ticketq::harness::main(std::env::args_os()));
}
