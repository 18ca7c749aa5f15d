// scratch probe: select_k + ARI behavior on planted models
use statarb::sponge::*;
use statarb::synthetic::planted_signed_graph;

fn main() {
    // two 5-node groups, +-0.9, no noise
    let (g, truth) = planted_signed_graph(10, 2, 0.9, -0.9, 0.0, 1).unwrap();
    println!("n=10 2-block: select_k(0.9) = {}", select_k(&g, 0.9).unwrap());

    // n=60 3-block, +-0.8, sigma 0.1
    let mut k_counts = std::collections::BTreeMap::new();
    let mut ari_auto = Vec::new();
    let mut ari_fixed = Vec::new();
    for seed in 0..20u64 {
        let (g, truth) = planted_signed_graph(60, 3, 0.8, -0.8, 0.1, seed).unwrap();
        let k = select_k(&g, 0.9).unwrap();
        *k_counts.entry(k).or_insert(0) += 1;
        let cfg = SpongeConfig { seed, ..SpongeConfig::default() };
        let a = sponge_sym(&g, &cfg).unwrap();
        ari_auto.push(adjusted_rand_index(a.labels(), &truth).unwrap());
        // manual pipeline with k=3
        let split = statarb::graph::sign_split(&g);
        let (lp, lm) = statarb::graph::sym_laplacians(&split);
        let eye = ndarray::Array2::<f64>::eye(60);
        let m1 = &lp + &eye;
        let m2 = &lm + &eye;
        let emb = generalized_eigvecs(&m1, &m2, 3).unwrap();
        let opts = KMeansOptions { seed, ..KMeansOptions::default() };
        let fit = kmeans_pp(&emb, 3, &opts).unwrap();
        ari_fixed.push(adjusted_rand_index(&fit.labels, &truth).unwrap());
    }
    println!("k distribution over 20 seeds: {k_counts:?}");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("ARI with select_k: mean {:.3} min {:.3}", mean(&ari_auto), min(&ari_auto));
    println!("ARI with k=3:      mean {:.3} min {:.3}", mean(&ari_fixed), min(&ari_fixed));
    let _ = truth;
}
