use hrsim_core::feats::{frame_count, logmel, FeatConfig, LogMel};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn output_shape_matches_frame_count(n in 400usize..6000, n_mels in 8usize..64, sr in prop_oneof![Just(8000u32), Just(16000u32)]) {
        let cfg = FeatConfig { n_mels, ..FeatConfig::default() };
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).sin() * 0.3).collect();
        let m = logmel(&x, &cfg, sr).unwrap();
        prop_assert_eq!(m.shape(), (frame_count(n, &cfg, sr).unwrap(), n_mels));
    }
}

#[test]
fn every_filter_has_positive_weight() {
    for (n_mels, sr) in [(80, 16000), (40, 8000), (128, 44100)] {
        let cfg = FeatConfig { n_mels, ..FeatConfig::default() };
        let bank = LogMel::new(&cfg, sr).unwrap();
        let f = bank.filters();
        for i in 0..f.rows() {
            assert!(f.row(i).iter().sum::<f64>() > 0.0, "band {i} at {sr} Hz");
        }
        let centres = bank.band_centers_hz();
        assert!(centres.windows(2).all(|w| w[0] < w[1]));
        assert!(centres[0] > 0.0 && *centres.last().unwrap() < f64::from(sr) / 2.0);
    }
}
