use gpstate_core::grid::Grid;
use gpstate_nn::layers::Conv;
use gpstate_nn::{GroundStateNet, NetConfig, Tensor};
use proptest::prelude::*;

fn trained_stats_net() -> GroundStateNet {
    let grid = Grid::line(-5.0, 5.0, 24).unwrap();
    let mut cfg = NetConfig::for_grid(&grid, 2, (0.0, 50.0));
    cfg.channels = 4;
    let mut net = GroundStateNet::new(cfg).unwrap();
    net.forward(&[0.0, 12.0, 35.0, 50.0]).unwrap();
    net
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predictions_stay_in_open_unit_interval(c in prop::collection::vec(-200.0f64..200.0, 1..6)) {
        let net = trained_stats_net();
        let y = net.predict(&c).unwrap();
        prop_assert_eq!(y.shape(), &[c.len(), 2, 24]);
        prop_assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn forward_passes_are_repeatable(c in prop::collection::vec(0.0f64..50.0, 1..5)) {
        let mut a = trained_stats_net();
        let mut b = trained_stats_net();
        prop_assert_eq!(a.forward(&c).unwrap(), b.forward(&c).unwrap());
        prop_assert_eq!(a.predict(&c).unwrap(), a.predict(&c).unwrap());
    }

    #[test]
    fn identity_kernel_composes_without_drift(
        values in prop::collection::vec(-3.0f64..3.0, 2 * 20),
        dilation in 1usize..12,
        repeats in 1usize..8,
    ) {
        let mut w = vec![0.0; 2 * 2 * 3];
        // channel-diagonal delta kernel
        w[1] = 1.0;
        w[(2 + 1) * 3 + 1] = 1.0;
        let conv = Conv::from_params(2, 2, 3, dilation, 1, w, vec![0.0, 0.0]).unwrap();
        let x = Tensor::new(vec![1, 2, 20], values).unwrap();
        let mut y = x.clone();
        for _ in 0..repeats {
            y = conv.infer(&y).unwrap();
        }
        prop_assert_eq!(y, x);
    }
}
