use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glintlab::ltc::{bake_table, LtcTable};
use glintlab::microfacet::MicrofacetKind;
use glintlab_cli::experiments::{
    convergence_csv, experiment_ablation, experiment_convergence, experiment_match_r,
    experiment_subdivision, match_r_csv, SubdivisionProbs,
};
use glintlab_cli::image::Image;
use glintlab_cli::render::render;
use glintlab_cli::scene::{
    directional_scene_file, figure_scene_file, RenderMode, Scene, SceneFile,
};
use glintlab_cli::{thread_pool, worker_threads};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "glintlab",
    about = "Glint shading under area lights: table baking, rendering and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ggx,
    Beckmann,
}

impl From<ModelArg> for MicrofacetKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ggx => MicrofacetKind::Ggx,
            ModelArg::Beckmann => MicrofacetKind::Beckmann,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    SmoothLtc,
    SmoothMc,
    Glint,
    GlintBaseline,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Bake the LTC + FGD + D_PR lookup table.
    Bake {
        #[arg(long, value_enum, default_value = "ggx")]
        model: ModelArg,
        #[arg(long, default_value_t = 64)]
        res: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scene file.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Overrides the scene's render mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Overrides the scene's surface seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Required when --mode glint-baseline overrides the scene.
        #[arg(long)]
        baseline_r: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Optional tonemapped 8-bit preview (PPM).
        #[arg(long)]
        png_out: Option<PathBuf>,
    },
    /// Reproduce the evaluation experiments.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
}

#[derive(Args)]
struct PresetArgs {
    /// Scene file; when omitted a figure-style preset is built.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Preset emitter: quad side length (world units) at z = 1.
    #[arg(long, default_value_t = 5.0)]
    light_side: f64,
    /// Preset directional light instead of a quad, with this half-angle.
    #[arg(long)]
    directional_degrees: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    sqrt_alpha: f64,
    #[arg(long, default_value_t = 1e6)]
    density: f64,
    #[arg(long, default_value_t = 192)]
    res: u32,
}

impl PresetArgs {
    fn scene_file(&self) -> Result<SceneFile> {
        if let Some(path) = &self.scene {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scene {}", path.display()))?;
            return Ok(serde_json::from_str(&text)?);
        }
        Ok(match self.directional_degrees {
            Some(deg) => {
                directional_scene_file(deg, self.sqrt_alpha, self.density, "glint", self.res)
            }
            None => {
                figure_scene_file(self.light_side, self.sqrt_alpha, self.density, "glint", self.res)
            }
        })
    }
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Quadruple the footprint count per strip and track RMS vs smooth.
    Convergence {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Split the quad light into patches sharing one multinomial count.
    Subdivision {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        table: PathBuf,
        /// Total patch count; must be a perfect square.
        #[arg(long, default_value_t = 256)]
        patches: u32,
        #[arg(long, default_value_t = 16)]
        seeds: u32,
        /// Per-patch integrals via the shared LTC lobe or Monte Carlo.
        #[arg(long, default_value = "ltc")]
        probs: String,
        #[arg(long, default_value_t = 128)]
        spp: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Tabulate the baseline R matching the cap probability.
    MatchR {
        /// Comma-separated opening half-angles in degrees.
        #[arg(long, default_value = "0.26,5")]
        gammas: String,
        /// Comma-separated perceptual roughness values.
        #[arg(long, default_value = "0.1,0.5,0.9")]
        sqrt_alphas: String,
        #[arg(long, value_enum, default_value = "ggx")]
        model: ModelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the MC/LTC approximation grid plus the NDF-lobe variant.
    Ablation {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 256)]
        spp: u32,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_table(path: &Path) -> Result<LtcTable> {
    let file = File::open(path).with_context(|| format!("opening table {}", path.display()))?;
    Ok(LtcTable::read_from(&mut BufReader::new(file))?)
}

fn write_pfm(img: &Image, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    img.write_pfm(&mut BufWriter::new(file))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("parsing {what} entry {t:?}"))
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let pool = thread_pool(worker_threads());
    pool.install(|| run(cli))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bake { model, res, out } => {
            let started = std::time::Instant::now();
            let (table, log) = bake_table(model.into(), res)?;
            let file =
                File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            table.write_to(&mut BufWriter::new(file))?;
            println!(
                "baked {res}x{res} table in {:.1}s ({} flagged cells, max neighbor jump {:.3}) -> {}",
                started.elapsed().as_secs_f64(),
                log.flagged.len(),
                log.max_neighbor_jump,
                out.display()
            );
        }
        Command::Render { scene, table, mode, seed, baseline_r, out, png_out } => {
            let text = std::fs::read_to_string(&scene)
                .with_context(|| format!("reading scene {}", scene.display()))?;
            let mut parsed = Scene::from_json(&text)?;
            if let Some(mode) = mode {
                parsed.settings.mode = match mode {
                    ModeArg::SmoothLtc => RenderMode::SmoothLtc,
                    ModeArg::SmoothMc => RenderMode::SmoothMc,
                    ModeArg::Glint => RenderMode::Glint,
                    ModeArg::GlintBaseline => {
                        let r = baseline_r
                            .context("--baseline-r is required with --mode glint-baseline")?;
                        RenderMode::GlintBaseline(r)
                    }
                    ModeArg::Oracle => RenderMode::Oracle,
                };
            }
            let table = table.map(|p| load_table(&p)).transpose()?;
            let seed = seed.unwrap_or(parsed.surface.seed);
            let (img, stats) = render(&parsed, table.as_ref(), seed)?;
            write_pfm(&img, &out)?;
            if let Some(ppm) = png_out {
                let file = File::create(&ppm)
                    .with_context(|| format!("creating {}", ppm.display()))?;
                img.write_ppm(
                    &mut BufWriter::new(file),
                    parsed.settings.exposure,
                    parsed.settings.tonemap,
                )?;
                println!("wrote {}", ppm.display());
            }
            println!(
                "shaded {} pixels; {} with clipped probability; {} skipped lights",
                stats.shaded_pixels, stats.clipped_probability_pixels, stats.skipped_lights
            );
        }
        Command::Experiment { which } => run_experiment(which)?,
    }
    Ok(())
}

fn run_experiment(cmd: ExperimentCommand) -> Result<()> {
    match cmd {
        ExperimentCommand::Convergence { preset, table, levels, seed, out_dir } => {
            let scene = Scene::from_file(&preset.scene_file()?)?;
            let table = load_table(&table)?;
            std::fs::create_dir_all(&out_dir)?;
            let report = experiment_convergence(&scene, &table, levels, seed)?;
            write_pfm(&report.strip, &out_dir.join("convergence_strips.pfm"))?;
            write_pfm(&report.smooth, &out_dir.join("convergence_smooth.pfm"))?;
            let csv_path = out_dir.join("convergence.csv");
            File::create(&csv_path)?.write_all(convergence_csv(&report).as_bytes())?;
            println!("wrote {}", csv_path.display());
            for level in &report.levels {
                println!(
                    "level {}: density x{:.0}, rms vs smooth {:.4}",
                    level.level, level.density_scale, level.rms_vs_smooth
                );
            }
        }
        ExperimentCommand::Subdivision {
            preset,
            table,
            patches,
            seeds,
            probs,
            spp,
            seed,
            out_dir,
        } => {
            let scene = Scene::from_file(&preset.scene_file()?)?;
            let table = load_table(&table)?;
            let probs = match probs.as_str() {
                "ltc" => SubdivisionProbs::Ltc,
                "mc" => SubdivisionProbs::McIntegrand { spp },
                other => bail!("--probs must be ltc or mc, got {other:?}"),
            };
            std::fs::create_dir_all(&out_dir)?;
            let seed_list: Vec<u64> = (0..seeds as u64).map(|s| seed ^ (s + 1)).collect();
            let report = experiment_subdivision(&scene, &table, patches, &seed_list, probs)?;
            write_pfm(&report.unsubdivided, &out_dir.join("subdivision_whole.pfm"))?;
            write_pfm(&report.subdivided, &out_dir.join("subdivision_split.pfm"))?;
            let csv_path = out_dir.join("subdivision.csv");
            let mut csv = String::from("seed_index,mean_luminance_diff\n");
            for (i, d) in report.per_seed_mean_diff.iter().enumerate() {
                csv.push_str(&format!("{i},{d}\n"));
            }
            File::create(&csv_path)?.write_all(csv.as_bytes())?;
            println!("wrote {}", csv_path.display());
            println!(
                "mean-diff rms {:.3e} (mean lit luminance {:.3e})",
                report.rms_of_mean_diff, report.mean_luminance
            );
        }
        ExperimentCommand::MatchR { gammas, sqrt_alphas, model, out } => {
            let rows = experiment_match_r(
                &parse_list(&gammas, "gammas")?,
                &parse_list(&sqrt_alphas, "sqrt_alphas")?,
                model.into(),
            );
            File::create(&out)?.write_all(match_r_csv(&rows).as_bytes())?;
            println!("wrote {}", out.display());
            for row in &rows {
                println!(
                    "gamma {:>6.2} deg, sqrt_alpha {:.2}: R = {:.4e}{}",
                    row.gamma_degrees,
                    row.sqrt_alpha,
                    row.r,
                    if row.r > 1.0 { " (clipped to 1)" } else { "" }
                );
            }
        }
        ExperimentCommand::Ablation { preset, table, spp, out_dir } => {
            let scene = Scene::from_file(&preset.scene_file()?)?;
            let table = load_table(&table)?;
            std::fs::create_dir_all(&out_dir)?;
            let report = experiment_ablation(&scene, &table, spp)?;
            write_pfm(&report.lo_mc_p_mc, &out_dir.join("ablation_lo-mc_p-mc.pfm"))?;
            write_pfm(&report.lo_mc_p_ltc, &out_dir.join("ablation_lo-mc_p-ltc.pfm"))?;
            write_pfm(&report.lo_ltc_p_mc, &out_dir.join("ablation_lo-ltc_p-mc.pfm"))?;
            write_pfm(&report.lo_ltc_p_ltc, &out_dir.join("ablation_lo-ltc_p-ltc.pfm"))?;
            write_pfm(
                &report.lo_ltc_p_ndf_ltc,
                &out_dir.join("ablation_lo-ltc_p-ndf-ltc.pfm"),
            )?;
            write_pfm(&report.grid, &out_dir.join("ablation_grid.pfm"))?;
            let ppm_path = out_dir.join("ablation_grid.ppm");
            let file = File::create(&ppm_path)?;
            report.grid.write_ppm(&mut BufWriter::new(file), 1.0, true)?;
            println!("wrote {}", ppm_path.display());
        }
    }
    Ok(())
}
