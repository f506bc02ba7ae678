use aggrolab_numerics::{softmax, Graph, ParamStore, PoolMode, Tensor};
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_lies_on_the_simplex(z in prop::collection::vec(-50.0f64..50.0, 2..8)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = z.iter().map(|v| v + 7.0).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_is_invariant_to_appended_padding(
        rows in 1usize..6,
        extra in 0usize..5,
        seed_vals in prop::collection::vec(-10.0f64..10.0, 60),
        pad_value in -100.0f64..100.0,
    ) {
        let c = 3;
        let x = Tensor::new(vec![rows, c], seed_vals[..rows * c].to_vec()).unwrap();
        let mut data = x.data().to_vec();
        data.extend(std::iter::repeat_n(pad_value, extra * c));
        let padded = Tensor::new(vec![rows + extra, c], data).unwrap();
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let (a, b) = (g.constant(x), g.constant(padded));
        for mode in [PoolMode::Max, PoolMode::Mean] {
            let pa = g.global_pool(a, rows, mode).unwrap();
            let pb = g.global_pool(b, rows, mode).unwrap();
            prop_assert_eq!(g.value(pa), g.value(pb));
        }
    }

    #[test]
    fn maxpool_halves_length_and_bounds_values(vals in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let n = vals.len();
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::new(vec![n, 1], vals.clone()).unwrap());
        let y = g.maxpool2(x).unwrap();
        prop_assert_eq!(g.shape(y), &[n.div_ceil(2), 1]);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(g.value(y).data().contains(&max));
    }
}
