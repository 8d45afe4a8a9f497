use accor::ctensor::gemm;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, ta: bool, tb: bool, reps: usize) {
    let a = vec![1.0f64; m * k];
    let b = vec![0.5f64; k * n];
    let mut c = vec![0.0f64; m * n];
    // warm
    gemm(&mut c, &a, &b, m, k, n, ta, tb, 1.0, false);
    let t0 = Instant::now();
    for _ in 0..reps {
        gemm(&mut c, &a, &b, m, k, n, ta, tb, 1.0, false);
    }
    let dt = t0.elapsed().as_secs_f64();
    let gflops = (2.0 * (m * k * n * reps) as f64) / dt / 1e9;
    println!("m={m:5} k={k:5} n={n:5} ta={ta:5} tb={tb:5}  {gflops:6.2} GF/s");
}

fn main() {
    bench(3200, 2000, 32, false, false, 8);   // conv1 forward
    bench(2000, 3200, 32, true, false, 8);    // conv1 weight grad
    bench(3200, 160, 64, false, true, 40);    // conv2 forward
    bench(3200, 320, 128, false, true, 20);   // conv3 forward
    bench(3200, 128, 320, false, false, 20);  // conv3 dcol
    bench(320, 256, 256, false, false, 40);   // attention projections
    bench(512, 512, 512, false, false, 10);   // square reference
}
