use eyecod::mapper::{act_address, act_index, map_layer, ActLayout};
use eyecod::oracle::{check_case, random_case, replay_network, weight_len};
use eyecod::sim::HardwareConfig;
use eyecod::tensor::DenseTensor;
use eyecod::workload::LayerKind;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

fn kind() -> impl Strategy<Value = LayerKind> {
    (0..LayerKind::ALL.len()).prop_map(|i| LayerKind::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn plan_replay_matches_dense(k in kind(), seed in any::<u64>()) {
        let case = random_case(k, &mut ChaCha8Rng::seed_from_u64(seed));
        let d = check_case(&case, &HardwareConfig::default()).unwrap();
        if case.integer {
            prop_assert_eq!(d, 0.0);
        } else {
            prop_assert!(d <= 1e-6, "diff {}", d);
        }
    }

    #[test]
    fn lane_assignment_stays_in_bounds(k in kind(), seed in any::<u64>()) {
        let case = random_case(k, &mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = HardwareConfig::default();
        let m = map_layer(case.layer(), case.lanes, &cfg).unwrap();
        prop_assert!(m.utilization() <= 1.0 + 1e-12);
        let mut seen = std::collections::HashSet::new();
        let mut clash = false;
        m.for_each_unit(|round, lane, _| {
            clash |= lane >= case.lanes || !seen.insert((round, lane));
        });
        prop_assert!(!clash, "a lane is outside the assignment or used twice in a round");
        if k.is_compute() && k != LayerKind::FullyConnected {
            prop_assert_eq!(seen.len() as u64, m.units);
        }
    }

    #[test]
    fn address_map_round_trips(h in 1usize..=16, w in 1usize..=16, c in 1usize..=32) {
        let layout = ActLayout::new([h, w, c], &HardwareConfig::default());
        let mut seen = std::collections::HashSet::new();
        for r in 0..h {
            for q in 0..w {
                for ch in 0..c {
                    let a = act_address(&layout, r, q, ch).unwrap();
                    prop_assert!(seen.insert((a.bank, a.bank_addr, a.lane)));
                    prop_assert_eq!(act_index(&layout, a).unwrap(), [r, q, ch]);
                }
            }
        }
    }
}

#[test]
fn whole_network_replay_matches_layer_by_layer() {
    let cfg = HardwareConfig::default();
    let net = eyecod::networks::fbnet_like(24, 24, &eyecod::networks::GAZE_STAGES[..3]);
    let plan = eyecod::mapper::plan_with_grid(&net, [2, 2], eyecod::mapper::HaloMode::Recompute, 8).unwrap();
    let mut weights = HashMap::new();
    for (i, l) in net.layers.iter().enumerate() {
        let w: Vec<f64> = (0..weight_len(l)).map(|j| ((i * 7 + j * 3) % 5) as f64 - 2.0).collect();
        weights.insert(l.id.clone(), w);
    }
    let x = DenseTensor::from_fn([24, 24, 1], |h, w, _| ((h * 5 + w) % 7) as f64 - 3.0);
    let ext = HashMap::from([("input".to_string(), x.clone())]);
    let got = replay_network(&net, &plan, &weights, &ext, 128, &cfg).unwrap();
    let mut want: HashMap<String, DenseTensor> = HashMap::new();
    for l in &net.layers {
        let ins: Vec<DenseTensor> = if l.pred.is_empty() {
            vec![x.clone()]
        } else {
            l.pred.iter().map(|p| want[p].clone()).collect()
        };
        let out = eyecod::oracle::dense_layer(l, &ins, &weights[&l.id]).unwrap();
        want.insert(l.id.clone(), out);
    }
    for l in &net.layers {
        let scale = want[&l.id].data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let d = got[&l.id].max_abs_diff(&want[&l.id]);
        assert!(d <= 1e-12 * scale, "layer {}: diff {d} at scale {scale}", l.id);
    }
}
