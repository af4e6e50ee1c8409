fn main() {
    flick::cli::main()
}
