//! Experiment-runner behavior: convergence trends, subdivision edge cases,
//! ablation consistency.

use glintlab::ltc::{bake_table, LtcTable};
use glintlab::microfacet::MicrofacetKind;
use glintlab_cli::experiments::{
    convergence_csv, experiment_ablation, experiment_convergence, experiment_match_r,
    experiment_subdivision, match_r_csv, SubdivisionProbs,
};
use glintlab_cli::scene::{directional_scene_file, figure_scene_file, Scene};
use std::sync::OnceLock;

fn table() -> &'static LtcTable {
    static TABLE: OnceLock<LtcTable> = OnceLock::new();
    TABLE.get_or_init(|| bake_table(MicrofacetKind::Ggx, 8).unwrap().0)
}

#[test]
fn convergence_rms_shrinks_with_footprint_count() {
    let scene = Scene::from_file(&figure_scene_file(5.0, 0.5, 2e4, "glint", 96)).unwrap();
    let report = experiment_convergence(&scene, table(), 4, 5).unwrap();
    assert_eq!(report.levels.len(), 4);
    let first = report.levels.first().unwrap().rms_vs_smooth;
    let last = report.levels.last().unwrap().rms_vs_smooth;
    assert!(
        last < first,
        "rms should shrink: first {first:.4} last {last:.4}"
    );
    assert_eq!(report.strip.width(), 96);

    let csv = convergence_csv(&report);
    assert!(csv.starts_with("level,density_scale,rms_vs_smooth\n"));
    assert_eq!(csv.lines().count(), 5);

    assert!(experiment_convergence(&scene, table(), 1, 5).is_err());
}

#[test]
fn convergence_follows_binomial_variance_law() {
    // a directional light through a long lens gives a nearly uniform
    // reflection probability, where rms scales as 1 / sqrt(N p)
    let mut file = directional_scene_file(5.0, 0.7, 4e5, "glint", 96);
    file.camera.position = [0.0, -30.0, 20.0];
    file.camera.fov_y_degrees = 6.0;
    let scene = Scene::from_file(&file).unwrap();
    let report = experiment_convergence(&scene, table(), 4, 9).unwrap();
    for pair in report.levels.windows(2) {
        let ratio = pair[1].rms_vs_smooth / pair[0].rms_vs_smooth;
        // quadrupling N halves the rms, within sampling slack
        assert!(
            (0.35..=0.7).contains(&ratio),
            "rms ratio {ratio:.3} (levels {} -> {})",
            pair[0].rms_vs_smooth,
            pair[1].rms_vs_smooth
        );
    }
}

#[test]
fn subdivision_with_single_patch_is_bit_identical() {
    let scene = Scene::from_file(&figure_scene_file(5.0, 0.5, 2e4, "glint", 48)).unwrap();
    let report =
        experiment_subdivision(&scene, table(), 1, &[42], SubdivisionProbs::Ltc).unwrap();
    assert_eq!(report.unsubdivided, report.subdivided);
    assert_eq!(report.per_seed_mean_diff, vec![0.0]);
}

#[test]
fn subdivision_rejects_non_square_patch_counts() {
    let scene = Scene::from_file(&figure_scene_file(5.0, 0.5, 2e4, "glint", 16)).unwrap();
    for bad in [0u32, 2, 3, 5, 8, 15] {
        assert!(
            experiment_subdivision(&scene, table(), bad, &[1], SubdivisionProbs::Ltc).is_err(),
            "{bad} accepted"
        );
    }
    assert!(
        experiment_subdivision(&scene, table(), 4, &[1], SubdivisionProbs::Ltc).is_ok()
    );
}

#[test]
fn subdivision_requires_a_quad_light() {
    let scene = Scene::from_file(&directional_scene_file(1.3, 0.5, 2e4, "glint", 16)).unwrap();
    assert!(
        experiment_subdivision(&scene, table(), 4, &[1], SubdivisionProbs::Ltc).is_err()
    );
}

#[test]
fn match_r_rows_monotone_in_gamma_and_vanishing() {
    let gammas = [0.05, 0.26, 1.0, 2.5, 5.0, 10.0];
    let rows = experiment_match_r(&gammas, &[0.5], MicrofacetKind::Ggx);
    let mut prev = 0.0;
    for row in &rows {
        assert!(row.r > prev, "R must grow with gamma");
        prev = row.r;
    }
    // R -> 0 with the opening angle
    let tiny = experiment_match_r(&[1e-4], &[0.5], MicrofacetKind::Ggx);
    assert!(tiny[0].r < 1e-9);

    let csv = match_r_csv(&rows);
    assert!(csv.starts_with("gamma_degrees,sqrt_alpha,r\n"));
    assert_eq!(csv.lines().count(), 1 + rows.len());
}

#[test]
fn ablation_all_ltc_cell_matches_renderer_output() {
    use glintlab_cli::render::render;
    use glintlab_cli::scene::RenderMode;

    let mut file = figure_scene_file(5.0, 0.5, 3e4, "glint", 32);
    file.render.spp = 96;
    let scene = Scene::from_file(&file).unwrap();
    let report = experiment_ablation(&scene, table(), 96).unwrap();

    // the all-LTC cell is the production glint path
    let (direct, _) = render(
        &scene.clone().with_mode(RenderMode::Glint),
        Some(table()),
        scene.surface.seed,
    )
    .unwrap();
    // identical probabilities, counts and smooth terms; allow only float
    // noise from the montage copy
    let mut max_diff = 0.0f32;
    for (a, b) in report.lo_ltc_p_ltc.pixels().iter().zip(direct.pixels()) {
        for k in 0..3 {
            max_diff = max_diff.max((a[k] - b[k]).abs());
        }
    }
    assert!(
        max_diff <= 1e-6,
        "ablation all-LTC cell deviates from render(): {max_diff}"
    );

    assert_eq!(report.grid.width(), 64);
    assert_eq!(report.grid.height(), 64);
    // MC cells carry energy too
    assert!(report.lo_mc_p_mc.pixels().iter().any(|p| p[1] > 0.0));
    assert!(report.lo_ltc_p_ndf_ltc.pixels().iter().any(|p| p[1] > 0.0));
}
