use std::io::Write;
use translator_core::series::coefficients;
use translator_core::Dimension;

fn main() {
    for l in [100usize, 200, 300, 400] {
        let t0 = std::time::Instant::now();
        let t = coefficients(Dimension::new(2).unwrap(), l).unwrap();
        println!("n=2 L={l}: {:.2?} (bits of a_L: {})", t0.elapsed(), t.get(l).numer().bits());
        std::io::stdout().flush().unwrap();
    }
}
