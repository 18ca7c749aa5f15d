fn main() {
    println!("statarb");
}
