use linkpred::dataset::{read_dataset, write_dataset};
use linkpred_core::netsim::LinkSample;
use linkpred_core::queueing::QueueParams;
use proptest::prelude::*;

prop_compose! {
    fn arb_sample()(
        ids in (0u32..1000, 0u32..1000, 0u32..100),
        capacity in 1.0f64..1e9,
        bits in 1.0f64..1e5,
        lambda in 0.0f64..1e6,
        accept in 0.0f64..=1.0,
        k in 1u32..64,
        fill in 0.0f64..=1.0,
        delay in 0.0f64..1e3,
        blocked in 0.0f64..=1.0,
    ) -> LinkSample {
        let params = QueueParams::new(lambda, lambda * accept, capacity / bits, k).unwrap();
        LinkSample {
            scenario_id: ids.0,
            snapshot_id: ids.1,
            link_id: ids.2,
            capacity,
            mean_packet_bits: bits,
            params,
            occupancy: fill * k as f64,
            delay,
            blocked_fraction: blocked,
        }
    }
}

proptest! {
    #[test]
    fn roundtrip_identity(samples in proptest::collection::vec(arb_sample(), 0..20)) {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &samples, &["# prop".to_string()]).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back, samples);
    }
}
