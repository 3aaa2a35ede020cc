//! Runs the finite-difference gradient check over every network architecture.

use dogfight::nn::gradcheck::{run_all, GradcheckConfig};

fn main() {
    let cfg = GradcheckConfig::default();
    let start = std::time::Instant::now();
    let mut ok = true;
    for r in run_all(&cfg) {
        println!("{r}");
        ok &= r.passed;
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    std::process::exit(if ok { 0 } else { 1 });
}
