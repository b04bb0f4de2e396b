//! Predict-then-focus geometry: ROI from a segmentation mask, how it
//! follows the pupil, and which segmentation each frame relies on.

use eyecod::roi::{crop, mask_scene, predict_roi, roi_for_frame, synth_eye_mask, RoiPolicy, SynthEye};

fn main() -> eyecod::error::Result<()> {
    let policy = RoiPolicy::default();
    let eye = synth_eye_mask(&SynthEye::centered(256, 256), 3)?;
    for (dr, dc) in [(0, 0), (10, -20), (-30, 40)] {
        let moved = eye.translated(dr, dc);
        let r = predict_roi(&moved, &policy)?;
        let patch = crop(&mask_scene(&moved), &r)?;
        println!("pupil shift ({dr:3},{dc:3}) -> ROI at ({:3},{:3}) size {}x{}", r.row0, r.col0, patch.height(), patch.width());
    }
    for t in [0, 49, 50, 75, 99, 100, 149, 150] {
        println!("frame {t:3}: {:?}", roi_for_frame(t, &policy));
    }
    Ok(())
}
