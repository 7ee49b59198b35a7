//! Renderer and CLI integration: determinism, mode dispatch, and the
//! command-line round trip.

use glintlab::ltc::{bake_table, LtcTable};
use glintlab::microfacet::MicrofacetKind;
use glintlab_cli::image::Image;
use glintlab_cli::render::render;
use glintlab_cli::scene::{
    directional_scene_file, figure_scene_file, RenderMode, Scene, SceneFile,
};
use glintlab_cli::thread_pool;
use std::process::Command;
use std::sync::OnceLock;

fn table() -> &'static LtcTable {
    static TABLE: OnceLock<LtcTable> = OnceLock::new();
    TABLE.get_or_init(|| bake_table(MicrofacetKind::Ggx, 8).unwrap().0)
}

fn pfm_bytes(img: &Image) -> Vec<u8> {
    let mut buf = Vec::new();
    img.write_pfm(&mut buf).unwrap();
    buf
}

fn glint_scene() -> Scene {
    let file = figure_scene_file(5.0, 0.5, 5e4, "glint", 64);
    Scene::from_file(&file).unwrap()
}

#[test]
fn renders_are_bit_identical_across_runs_and_thread_counts() {
    let scene = glint_scene();
    let single = thread_pool(1);
    let quad = thread_pool(4);

    let (a, _) = single.install(|| render(&scene, Some(table()), 7)).unwrap();
    let (b, _) = single.install(|| render(&scene, Some(table()), 7)).unwrap();
    let (c, _) = quad.install(|| render(&scene, Some(table()), 7)).unwrap();
    assert_eq!(pfm_bytes(&a), pfm_bytes(&b));
    assert_eq!(pfm_bytes(&a), pfm_bytes(&c));

    let (d, _) = single.install(|| render(&scene, Some(table()), 8)).unwrap();
    assert_ne!(pfm_bytes(&a), pfm_bytes(&d), "seed must matter");
}

#[test]
fn zero_radiance_gives_black_image() {
    let mut file = figure_scene_file(5.0, 0.5, 5e4, "glint", 32);
    if let glintlab_cli::scene::LightSpecFile::Quad { radiance, .. } = &mut file.lights[0] {
        *radiance = [0.0, 0.0, 0.0];
    }
    let scene = Scene::from_file(&file).unwrap();
    let (img, _) = render(&scene, Some(table()), 7).unwrap();
    assert!(img.pixels().iter().all(|p| *p == [0.0, 0.0, 0.0]));
}

#[test]
fn missing_table_is_a_startup_error() {
    let scene = glint_scene();
    let err = render(&scene, None, 7).unwrap_err();
    assert!(err.to_string().contains("table"), "{err}");
}

#[test]
fn directional_and_point_lights_render() {
    let file = directional_scene_file(1.3, 0.5, 5e4, "glint", 48);
    let scene = Scene::from_file(&file).unwrap();
    // cap lights need no table
    let (img, stats) = render(&scene, None, 3).unwrap();
    assert!(stats.shaded_pixels > 0);
    assert!(img.pixels().iter().any(|p| p[1] > 0.0));

    let mut point_file = directional_scene_file(1.3, 0.5, 5e4, "glint", 48);
    point_file.lights = vec![glintlab_cli::scene::LightSpecFile::Point {
        position: [0.0, -0.5, 1.5],
        radius: 0.08,
        intensity: [40.0, 40.0, 40.0],
    }];
    let scene = Scene::from_file(&point_file).unwrap();
    let (img, _) = render(&scene, None, 3).unwrap();
    assert!(img.pixels().iter().any(|p| p[1] > 0.0));
}

#[test]
fn clipping_is_observable_for_wide_caps_on_smooth_surfaces() {
    // gamma = 5 degrees at sqrt(alpha) = 0.1 drives the cap probability
    // past 1 at the highlight center
    let file = directional_scene_file(5.0, 0.1, 5e4, "glint", 96);
    let scene = Scene::from_file(&file).unwrap();
    let (_, stats) = render(&scene, None, 3).unwrap();
    assert!(stats.clipped_probability_pixels > 0);
}

#[test]
fn baseline_mode_renders_and_differs_from_physical_probability() {
    let mut file = directional_scene_file(5.0, 0.5, 5e4, "glint", 48);
    let scene_glint = Scene::from_file(&file).unwrap();
    file.render.mode = "glint_baseline".into();
    file.render.baseline_r = Some(0.02686);
    let scene_base = Scene::from_file(&file).unwrap();

    let (glint, _) = render(&scene_glint, None, 7).unwrap();
    let (base, _) = render(&scene_base, None, 7).unwrap();
    assert!(base.pixels().iter().any(|p| p[1] > 0.0));
    assert_ne!(pfm_bytes(&glint), pfm_bytes(&base));
}

#[test]
fn oracle_mode_agrees_with_glint_in_the_mean() {
    // tiny image, low density so the brute-force oracle is exact
    let mut file = figure_scene_file(5.0, 0.7, 2e3, "oracle", 24);
    file.render.spp = 4000;
    let oracle_scene = Scene::from_file(&file).unwrap();
    file.render.mode = "glint".into();
    let glint_scene = Scene::from_file(&file).unwrap();

    let mut oracle_mean = 0.0;
    let mut glint_mean = 0.0;
    let seeds = 12;
    for seed in 0..seeds {
        let (o, _) = render(&oracle_scene, Some(table()), seed).unwrap();
        let (g, _) = render(&glint_scene, Some(table()), seed).unwrap();
        oracle_mean += o.pixels().iter().map(|p| p[1] as f64).sum::<f64>();
        glint_mean += g.pixels().iter().map(|p| p[1] as f64).sum::<f64>();
    }
    oracle_mean /= seeds as f64;
    glint_mean /= seeds as f64;
    let rel = (oracle_mean - glint_mean).abs() / oracle_mean;
    assert!(rel < 0.15, "oracle {oracle_mean} vs glint {glint_mean} (rel {rel:.3})");
}

#[test]
fn oracle_mode_rejects_cap_lights() {
    let mut file = directional_scene_file(1.3, 0.5, 2e3, "oracle", 16);
    file.render.spp = 16;
    let scene = Scene::from_file(&file).unwrap();
    assert!(render(&scene, Some(table()), 1).is_err());
}

#[test]
fn cli_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_glintlab");

    let table_path = dir.path().join("t.gltb");
    let status = Command::new(exe)
        .args(["bake", "--model", "ggx", "--res", "4", "--out"])
        .arg(&table_path)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(table_path.exists());

    let scene_path = dir.path().join("scene.json");
    let file: SceneFile = figure_scene_file(5.0, 0.5, 5e4, "glint", 32);
    std::fs::write(&scene_path, serde_json::to_string_pretty(&file).unwrap()).unwrap();

    let out_pfm = dir.path().join("img.pfm");
    let out_ppm = dir.path().join("img.ppm");
    let status = Command::new(exe)
        .args(["render", "--scene"])
        .arg(&scene_path)
        .args(["--table"])
        .arg(&table_path)
        .args(["--seed", "7", "--out"])
        .arg(&out_pfm)
        .arg("--png-out")
        .arg(&out_ppm)
        .status()
        .unwrap();
    assert!(status.success());

    let first = std::fs::read(&out_pfm).unwrap();
    assert!(std::fs::read(&out_ppm).unwrap().starts_with(b"P6\n"));

    // a second run with one worker thread reproduces the bytes
    let status = Command::new(exe)
        .env("GLINTLAB_THREADS", "1")
        .args(["render", "--scene"])
        .arg(&scene_path)
        .args(["--table"])
        .arg(&table_path)
        .args(["--seed", "7", "--out"])
        .arg(&out_pfm)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(first, std::fs::read(&out_pfm).unwrap());

    // bad scene: error mentions the field path, exit code nonzero
    let mut broken: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&scene_path).unwrap()).unwrap();
    broken["render"]["mode"] = "warp-drive".into();
    std::fs::write(&scene_path, broken.to_string()).unwrap();
    let output = Command::new(exe)
        .args(["render", "--scene"])
        .arg(&scene_path)
        .args(["--out"])
        .arg(dir.path().join("x.pfm"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("render.mode"), "stderr: {stderr}");
}

#[test]
fn match_r_cli_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_glintlab");
    let csv_path = dir.path().join("match_r.csv");
    let status = Command::new(exe)
        .args(["experiment", "match-r", "--out"])
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma_degrees,sqrt_alpha,r"));
    assert_eq!(lines.count(), 6);
}
