use eyecod::networks::{fbnet_like, shipped_pipeline, ritnet_like, GAZE_STAGES};
use eyecod::workload::{
    amortized_frame_macs, apply_optical_first_layer, load_network, load_workload, network_macs, resize_network,
    save_network, save_workload, LayerKind,
};
use proptest::prelude::*;
use tempfile::TempDir;

#[test]
fn pipeline_files_round_trip() {
    let d = TempDir::new().unwrap();
    let p = shipped_pipeline();
    save_workload(&p, d.path().join("p.json")).unwrap();
    let back = load_workload(d.path().join("p.json")).unwrap();
    assert_eq!(back.seg_net, p.seg_net);
    assert_eq!(back.gaze_net, p.gaze_net);
    assert_eq!(back.recon, p.recon);
    assert_eq!(amortized_frame_macs(&back).unwrap(), amortized_frame_macs(&p).unwrap());
}

#[test]
fn unknown_layer_field_is_rejected_with_pointer() {
    let d = TempDir::new().unwrap();
    let f = d.path().join("n.json");
    save_network(&ritnet_like(32, 32), &f).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
    v["layers"][2]["dilation"] = 2.into();
    std::fs::write(&f, v.to_string()).unwrap();
    let e = load_network(&f).unwrap_err().to_string();
    assert!(e.contains("/layers/2"), "{e}");
}

#[test]
fn optical_first_layer_removes_stem_work() {
    let seg = shipped_pipeline().seg_net;
    let (net, s) = apply_optical_first_layer(&seg, None, 8).unwrap();
    assert_eq!(s.removed_layer, "stem");
    assert_eq!(net.layers.len(), seg.layers.len());
    assert_eq!(net.layers[0].kind, LayerKind::Upsample);
    net.validate().unwrap();
    let before = network_macs(&seg).unwrap().total;
    assert_eq!(network_macs(&net).unwrap().total, before - s.removed_macs as f64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn resizing_matches_building_at_that_size(h in 8usize..=64, w in 8usize..=64) {
        let (h, w) = (h * 4, w * 4);
        let built = fbnet_like(h, w, GAZE_STAGES);
        let resized = resize_network(&fbnet_like(96, 160, GAZE_STAGES), h, w).unwrap();
        prop_assert_eq!(resized, built);
    }

    #[test]
    fn gaze_work_grows_with_area(s in 4usize..=16) {
        let a = fbnet_like(16 * s, 16 * s, GAZE_STAGES).total_macs().unwrap() as f64;
        let b = fbnet_like(32 * s, 32 * s, GAZE_STAGES).total_macs().unwrap() as f64;
        prop_assert!(b / a > 3.5 && b / a <= 4.0 + 1e-9);
    }
}
