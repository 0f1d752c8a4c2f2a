//! Property tests over the synthetic generators and dataset assembly.

use gtgan_core::synth::{
    gen_poisson_pair, gen_scale_free_pair, make_dataset, DatasetKind, Split,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_free_pairs_are_simple_supersets(n in 3usize..24, seed in any::<u64>()) {
        let pair = gen_scale_free_pair(n, 0.54, seed).unwrap();
        prop_assert_eq!(pair.input.n(), n);
        prop_assert_eq!(pair.target.n(), n);
        for (i, j, _) in pair.input.edges() {
            prop_assert!(pair.target.has_edge(i, j));
        }
        for g in [&pair.input, &pair.target] {
            for i in 0..n {
                prop_assert!(!g.has_edge(i, i));
            }
        }
    }

    #[test]
    fn poisson_pairs_obey_edge_arithmetic(n in 3usize..24, seed in any::<u64>()) {
        let pair = gen_poisson_pair(n, 5.0, seed).unwrap();
        let e_in = pair.input.edge_count();
        prop_assert_eq!(e_in, n - 1);
        let k = pair.meta_k().unwrap() as usize;
        let capacity = n * (n - 1) - e_in;
        prop_assert_eq!(pair.target.edge_count(), e_in + (k * e_in).min(capacity));
        let capped = pair.meta.get("capped").unwrap().as_bool().unwrap();
        if !capped {
            prop_assert_eq!(pair.target.edge_count(), (1 + k) * e_in);
        }
        for (i, j, _) in pair.input.edges() {
            prop_assert!(pair.target.has_edge(i, j));
        }
    }

    #[test]
    fn datasets_split_cleanly_and_deterministically(
        n in 3usize..12,
        count in 2usize..14,
        tf in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let kind = if seed % 2 == 0 { DatasetKind::Poisson } else { DatasetKind::ScaleFree };
        let ds = make_dataset(kind, n, count, tf, seed).unwrap();
        let again = make_dataset(kind, n, count, tf, seed).unwrap();
        prop_assert_eq!(&ds, &again);

        let train = ds.splits().filter(|&s| s == Split::Train).count();
        prop_assert_eq!(train, (count as f64 * tf).floor() as usize);
        prop_assert_eq!(ds.len(), count);
        prop_assert_eq!(ds.n(), Some(n));
        prop_assert_eq!(ds.train_pairs().count() + ds.test_pairs().count(), count);
    }
}
