// scratch (removed before finalizing)
use mvpoison_core::buffer::ImageBuffer;
use mvpoison_core::features::{build_pyramid, detect_keypoints};
use mvpoison_core::pattern::generate_checkerboard;
use std::sync::atomic::Ordering;

#[test]
fn attrition_counters() {
    let mask = generate_checkerboard(100, 4, 255, 0).unwrap();
    let data: Vec<u8> = mask.cells().iter().map(|&v| (v * 255.0).round() as u8).collect();
    let img = ImageBuffer::from_vec(100, 100, 1, data).unwrap();
    let pyr = build_pyramid(&img, 4, 3, 1.6).unwrap();
    let kps = detect_keypoints(&pyr, 0.03, 10.0);
    use mvpoison_core::features::detect_dbg::*;
    println!("solve_fail={} oob={} noconv={} contrast={} edge={} bounds={} ok={} final={}",
        solve_fail(), oob(), noconv(), contrast(), edge(), bounds(), ok(), kps.len());
}
