fn main() {
    println!("eqlab");
}
