use gtgan_core::graph::in_degrees;
use gtgan_core::synth::{derive_seed, gen_scale_free_pair};

fn main() {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut total = 0usize;
    for i in 0..1000u64 {
        let pair = gen_scale_free_pair(50, 0.54, derive_seed(1234, i)).unwrap();
        for d in in_degrees(&pair.input) {
            *counts.entry(d).or_insert(0) += 1;
            total += 1;
        }
    }
    // least-squares slope of ln p vs ln d over degrees >= 1
    let points: Vec<(f64, f64)> = counts
        .iter()
        .filter(|(&d, &c)| d >= 1 && c > 0)
        .map(|(&d, &c)| ((d as f64).ln(), (c as f64 / total as f64).ln()))
        .collect();
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!("points={} slope={:.3}", points.len(), slope);
    // octave-bucket means for the monotone-tail check
    let mut buckets: Vec<(usize, f64, usize)> = Vec::new();
    let mut lo = 1usize;
    while lo <= *counts.keys().last().unwrap() {
        let hi = lo * 2;
        let mass: f64 = counts
            .iter()
            .filter(|(&d, _)| d >= lo && d < hi)
            .map(|(_, &c)| c as f64 / total as f64)
            .sum();
        let width = (hi - lo) as f64;
        buckets.push((lo, mass / width, hi - lo));
        lo = hi;
    }
    println!("octave densities: {:?}", buckets.iter().map(|b| (b.0, format!("{:.2e}", b.1))).collect::<Vec<_>>());
    let dec = buckets.windows(2).all(|w| w[0].1 >= w[1].1);
    println!("monotone decreasing: {dec}");
}
