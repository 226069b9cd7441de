// scratch: where do patch keypoints go? (removed before finalizing)
use mvpoison_core::buffer::{ImageBuffer, Region};
use mvpoison_core::features::{build_pyramid, detect_keypoints, detect_and_describe, match_descriptors, FeatureConfig};
use mvpoison_core::geometry::{render_views, synth_two_view};
use mvpoison_core::pattern::{generate_checkerboard, Corner};
use mvpoison_core::poison::embed_patch;

fn mask_image(size: u32, block: u32) -> ImageBuffer {
    let mask = generate_checkerboard(size, block, 255, 0).unwrap();
    let data = mask.cells().iter().map(|&v| (v * 255.0).round() as u8).collect();
    ImageBuffer::from_vec(size, size, 1, data).unwrap()
}

#[test]
fn explore_patch_keypoints() {
    for b in [1u32, 4, 8, 50] {
        let img = mask_image(100, b);
        let pyr = build_pyramid(&img, 4, 3, 1.6).unwrap();
        let kps = detect_keypoints(&pyr, 0.03, 10.0);
        println!("100x100 mask b={b}: {} keypoints", kps.len());
    }

    let scene = synth_two_view(120, 1.0, 0.0, 1);
    let (view_a, view_b) = render_views(&scene, 13, 2);
    let mask = generate_checkerboard(100, 4, 255, 0).unwrap();
    let pa = embed_patch(&view_a, &mask, 1.0, Corner::TopLeft, 0).unwrap();
    let pb = embed_patch(&view_b, &mask, 1.0, Corner::TopLeft, 0).unwrap();
    let region = Region { x: 0, y: 0, width: 100, height: 100 };
    let cfg = FeatureConfig::default();
    let (kps_a, descs_a) = detect_and_describe(&pa, &cfg).unwrap();
    let (kps_b, descs_b) = detect_and_describe(&pb, &cfg).unwrap();
    let in_a = kps_a.iter().filter(|k| region.contains(k.x, k.y)).count();
    let in_b = kps_b.iter().filter(|k| region.contains(k.x, k.y)).count();
    println!("poisoned A: {} kps, {in_a} in patch; B: {} kps, {in_b} in patch", kps_a.len(), kps_b.len());

    let matches = match_descriptors(&descs_a, &descs_b, cfg.match_ratio, cfg.cross_check);
    let both_in = matches.iter().filter(|m| {
        let a = &kps_a[m.index_a];
        let b = &kps_b[m.index_b];
        region.contains(a.x, a.y) && region.contains(b.x, b.y)
    }).count();
    println!("matches: {} total, {both_in} with both endpoints in patch", matches.len());

    // where are the patch keypoints in A matched to?
    let mut a_in_patch_matched = 0;
    for m in &matches {
        let a = &kps_a[m.index_a];
        if region.contains(a.x, a.y) { a_in_patch_matched += 1; }
    }
    println!("matches whose A endpoint is in patch: {a_in_patch_matched}");
}
