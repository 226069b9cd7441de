// scratch: full acceptance-scenario scan (removed later)
use mvpoison_core::buffer::Region;
use mvpoison_core::geometry::{diagnose_pair, render_views, synth_two_view, DiagnoseParams};
use mvpoison_core::metrics::ssim;
use mvpoison_core::pattern::{generate_checkerboard, Corner};
use mvpoison_core::poison::{baseline_perturb, embed_patch, BaselineKind};

#[test]
fn scan_scenarios() {
    let params = DiagnoseParams::default();
    for &(n, stamp) in &[(50usize, 17u32), (70, 17), (50, 21), (70, 21)] {
        for seed in 1..=6u64 {
            let scene = synth_two_view(n, 1.0, 0.0, seed);
            let (a, b) = render_views(&scene, stamp, seed + 100);
            let gt = scene.ground_truth();
            let clean = diagnose_pair(&a, &b, None, Some(&gt), &params);
            let nr = clean.no_ransac.as_ref();
            let max_s = nr.map(|e| e.max_sampson_px).unwrap_or(-1.0);
            let rot_nr = nr.and_then(|e| e.rotation_error_deg).unwrap_or(-1.0);
            let rot_r = clean.ransac.as_ref().and_then(|e| e.rotation_error_deg).unwrap_or(-1.0);
            if max_s > 1.5 {
                println!("n={n} st={stamp} seed={seed}: IMPURE max_s={max_s:.1} rot_nr={rot_nr:.3}");
                continue;
            }
            // blur baseline
            let ba = baseline_perturb(&a, &BaselineKind::GaussianBlur { kernel: 21 }).unwrap();
            let bb = baseline_perturb(&b, &BaselineKind::GaussianBlur { kernel: 21 }).unwrap();
            let blurred = diagnose_pair(&ba, &bb, None, Some(&gt), &params);
            let rot_r_blur = blurred.ransac.as_ref().and_then(|e| e.rotation_error_deg).unwrap_or(-1.0);
            let rot_nr_blur = blurred.no_ransac.as_ref().and_then(|e| e.rotation_error_deg).unwrap_or(-1.0);
            let ssim_blur = ssim(&ba, &a).unwrap();
            // noise baseline
            let na = baseline_perturb(&a, &BaselineKind::GaussianNoise { stddev: 25.0, seed: 5 }).unwrap();
            let ssim_noise = ssim(&na, &a).unwrap();
            // poisoned
            let mask = generate_checkerboard(100, 4, 255, 0).unwrap();
            let pa = embed_patch(&a, &mask, 1.0, Corner::TopLeft, 0).unwrap();
            let pb = embed_patch(&b, &mask, 1.0, Corner::TopLeft, 0).unwrap();
            let region = Region { x: 0, y: 0, width: 100, height: 100 };
            let poisoned = diagnose_pair(&pa, &pb, Some(region), Some(&gt), &params);
            let rot_nr_poison = poisoned.no_ransac.as_ref().and_then(|e| e.rotation_error_deg).unwrap_or(-1.0);
            println!(
                "n={n} st={stamp} seed={seed}: PURE max_s={max_s:.2} rot_nr={rot_nr:.3} rot_r={rot_r:.3} | blur: rot_r={rot_r_blur:.3} rot_nr={rot_nr_blur:.3} ssim={ssim_blur:.3} | noise ssim={ssim_noise:.3} | poison: frac={:.3} rot_nr={rot_nr_poison:.2} matches={}",
                poisoned.patch_match_fraction, poisoned.total_matches
            );
        }
    }
}
