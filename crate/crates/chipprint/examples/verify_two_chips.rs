//! Renders two small chips, enrolls one clip of each plus a second clip of
//! the first chip, and prints the verification outcomes.

use chipprint::bench::CaptureSource;
use chipprint::cli::verify;
use chipprint::config::PipelineConfig;
use chipprint::simulate::SimSource;
use chipprint_core::registration::ClipAligner;
use chipprint_core::specular_auth::{build_mask_with, observed_specular_points, sample_frames, Fingerprint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = PipelineConfig::default();
    cfg.surface.rows = 192;
    cfg.surface.cols = 192;
    cfg.render.n_frames = 30;
    cfg.render.glare.rim_width_px = 10.0;
    cfg.render.glare.corner_radius_px = 24.0;
    cfg.mask.edge_margin_px = 12;
    cfg.specular.n_points = 40;
    cfg.specular.frame_count = 6;

    let src = SimSource::new(&cfg, 2, 2, 1)?;
    let mask = build_mask_with(&src.mask_template()?, &cfg.mask.params())?;
    let estimator = cfg.registration.estimator();

    let mut fingerprints = Vec::new();
    for clip in 0..src.clips().len() {
        let template = src.template(clip)?;
        let renderer = src.renderer(clip)?;
        let ids = sample_frames(renderer.len(), cfg.specular.frame_count, 7)?;
        let mut aligner = ClipAligner::new(&estimator, &template);
        let mut sets = Vec::new();
        for t in 0..renderer.len() {
            let aligned = aligner.push(&renderer.frame(t)?)?.frame;
            if ids.contains(&t) {
                sets.push(observed_specular_points(&aligned, &mask, cfg.specular.n_points, t)?);
            }
        }
        let id = &src.clips()[clip];
        fingerprints.push(Fingerprint::new(id.chip_id.clone(), id.clip_id.clone(), sets, mask.digest(), cfg.specular.n_points, 7)?);
    }

    for (a, b) in [(0, 1), (0, 2), (2, 3), (1, 3)] {
        let d = verify(&cfg, &fingerprints[a], &fingerprints[b])?;
        println!(
            "{}/{} vs {}/{}: T^r = {}, zero ratio {:.2} -> {}",
            fingerprints[a].chip_id,
            fingerprints[a].clip_id,
            fingerprints[b].chip_id,
            fingerprints[b].clip_id,
            d.bundle.t_robust,
            d.bundle.zero_ratio,
            if d.accept { "accept" } else { "reject" }
        );
    }
    Ok(())
}
