use proptest::prelude::*;
use swarm_avatar::lstm::{featurize, GestureSequence, LstmModel, FEATURES, SEQUENCE_LEN};
use swarm_avatar::synthetic::generate_stream;
use swarm_avatar::{Emotion, Vec3};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one(seed in any::<u64>(), scale in 0.1f64..50.0, xs in prop::collection::vec(-1.0f64..1.0, SEQUENCE_LEN * FEATURES)) {
        let mut model = LstmModel::new(FEATURES, &[6, 4], Emotion::COUNT, seed);
        model.params_mut().iter_mut().for_each(|p| *p *= scale);
        let probs = model.forward(&GestureSequence::new(xs, None).unwrap()).unwrap();
        prop_assert_eq!(probs.len(), Emotion::COUNT);
        prop_assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn features_ignore_global_offset(seed in 0u64..1000, off in prop::array::uniform3(-2.0f64..2.0)) {
        let frames = generate_stream(&[Emotion::Confused], 0.01, seed);
        let off = Vec3::new(off[0], off[1], off[2]);
        let moved: Vec<_> = frames.iter().map(|f| f.translated(off)).collect();
        let a = featurize(&frames).unwrap();
        let b = featurize(&moved).unwrap();
        for (x, y) in a.features.iter().zip(&b.features) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
