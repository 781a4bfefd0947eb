use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use tefs_core::capture::{run_session, spatial_offset, CaptureError, CaptureMethod};
use tefs_core::dataset_io::{
    read_calibration, read_depth, read_trajectory, read_vo_frames, write_depth, write_ndc,
    write_trajectory, DatasetWriter,
};
use tefs_core::depth::{depth_to_ndc, ndc_to_depth, DepthSemantics, Frustum, ProfileKind};
use tefs_core::render::ConditionName;
use tefs_core::scenario::ScenarioConfig;
use tefs_core::traj_eval::{ape, rpe, scale_correct, Alignment, MetricReport};
use tefs_core::validation::{
    capture_and_evaluate, nominal_offsets, Comparison, PipelineError, RunEvaluation,
};
use tefs_core::vo::{run_vo, VoOptions};
use tefs_core::{DepthProfile, MapUv, Trajectory};

use crate::table::{num, Cell, Table};
use crate::{
    AlignArg, CaptureArgs, ConditionArg, ConvertArgs, EvaluateArgs, MethodArg, Outcome, ProfileArg,
    ReportArgs, ScenarioOverrides, SemanticsArg, ValidateArgs, VoArgs,
};

/// Maximum allowed |APE% TeFS − APE% dual viewport|.
const APE_PCT_DELTA_LIMIT: f64 = 0.2;
/// Cycle count used when a stationary override leaves the path end unreachable.
const STATIONARY_CYCLES: usize = 20;
/// Frame interval of a nominal 60 fps display, seconds.
const NOMINAL_FRAME: f64 = 0.0167;

impl MethodArg {
    fn method(self) -> CaptureMethod {
        match self {
            Self::Tefs => CaptureMethod::Tefs,
            Self::Naive => CaptureMethod::NaiveSwap,
            Self::Dual => CaptureMethod::DualViewport,
        }
    }
}

impl ConditionArg {
    fn condition(self) -> ConditionName {
        match self {
            Self::Sunny => ConditionName::ExtraSunny,
            Self::Rain => ConditionName::CloudyRain,
            Self::Storm => ConditionName::NightThunderstorm,
        }
    }
}

impl AlignArg {
    fn alignment(self) -> Alignment {
        match self {
            Self::None => Alignment::None,
            Self::Rigid => Alignment::Rigid,
            Self::Similarity => Alignment::Similarity,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Rigid => "rigid",
            Self::Similarity => "similarity",
        }
    }
}

impl ProfileArg {
    fn kind(self) -> ProfileKind {
        match self {
            Self::SimNative => ProfileKind::SimNative,
            Self::ScaledReciprocal => ProfileKind::ScaledReciprocal,
            Self::OffsetReciprocal => ProfileKind::OffsetReciprocal,
        }
    }
}

impl SemanticsArg {
    fn semantics(self) -> DepthSemantics {
        match self {
            Self::Ray => DepthSemantics::Ray,
            Self::Planar => DepthSemantics::Planar,
        }
    }
}

fn effective(command: &str, entries: &[(&str, String)]) {
    println!("[effective]");
    println!("command = \"{command}\"");
    for (k, v) in entries {
        println!("{k} = {v}");
    }
}

fn quoted(p: impl AsRef<Path>) -> String {
    format!("{:?}", p.as_ref().display().to_string())
}

fn load_scenario(o: &ScenarioOverrides) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&o.scenario)?;
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(speed) = o.speed {
        cfg.speed_kmh = speed;
    }
    if let Some(cycles) = o.cycles {
        cfg.cycles = Some(cycles);
    }
    if let Some(d) = o.disparity_ms {
        cfg.capture.engine_disparity_ms = d;
    }
    if cfg.speed_kmh == 0.0 && cfg.cycles.is_none() {
        cfg.cycles = Some(STATIONARY_CYCLES);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_scenario(cfg: &ScenarioConfig) {
    println!("# scenario (save as a scenario file to rerun)");
    print!("{}", cfg.to_toml());
    println!();
}

pub fn capture(a: CaptureArgs) -> Result<Outcome> {
    let cfg = load_scenario(&a.scenario)?;
    let method = a.method.method();
    let condition = a.condition.condition();
    effective(
        "capture",
        &[
            ("method", format!("\"{}\"", method.as_str())),
            ("condition", format!("\"{}\"", condition.as_str())),
            ("out", quoted(&a.out)),
        ],
    );
    print_scenario(&cfg);
    let mut writer = DatasetWriter::create(&a.out)?;
    let result = run_session(&cfg, method, condition, &mut writer);
    let manifest = fs::read_to_string(a.out.join("manifest.toml")).context("reading manifest")?;
    println!("# manifest");
    print!("{manifest}");
    let summary = result?;
    if summary.frames == 0 {
        bail!("session captured no frames");
    }
    Ok(Outcome::Success)
}

pub fn convert_depth(a: ConvertArgs) -> Result<Outcome> {
    effective(
        "convert-depth",
        &[
            ("input", quoted(&a.input)),
            ("output", quoted(&a.output)),
            ("hfov", a.hfov.to_string()),
            ("vfov", a.vfov.to_string()),
            ("near", a.near.to_string()),
            ("far", a.far.to_string()),
            ("profile", format!("\"{}\"", a.profile.kind().name())),
            ("to_ndc", a.to_ndc.to_string()),
        ],
    );
    let name = a.input.display().to_string();
    let file = read_depth(
        &fs::read(&a.input).with_context(|| format!("reading {name}"))?,
        &name,
    )?;
    let frustum = Frustum {
        width: file.width,
        height: file.height,
        hfov_deg: a.hfov,
        vfov_deg: a.vfov,
        near: a.near,
        far: a.far,
    };
    let map = MapUv::compute(&frustum)?;
    let profile = DepthProfile::new(a.profile.kind(), a.near, a.far)?;
    if a.to_ndc {
        let metric = file.into_metric(&name)?;
        let ndc = depth_to_ndc(&metric, &map, &profile)?;
        fs::write(&a.output, write_ndc(frustum.width, frustum.height, &ndc))?;
        println!("converted {} pixels to NDC", ndc.len());
    } else {
        if file.semantics.is_some() {
            bail!("{name} already holds metric depth; use --to-ndc for the reverse direction");
        }
        let ndc: Vec<f64> = file.data.iter().map(|&v| v as f64).collect();
        let out = ndc_to_depth(&ndc, &map, &profile, a.semantics.semantics())?;
        fs::write(&a.output, write_depth(&out.depth))?;
        println!(
            "converted {} pixels ({} cleared, {} outside the profile's valid range)",
            ndc.len(),
            out.cleared,
            out.invalid
        );
    }
    Ok(Outcome::Success)
}

pub fn vo(a: VoArgs) -> Result<Outcome> {
    let max_depth = (a.max_depth_baselines > 0.0).then_some(a.max_depth_baselines);
    effective(
        "vo",
        &[
            ("dataset", quoted(&a.dataset)),
            ("out", quoted(&a.out)),
            ("noise", a.noise.to_string()),
            ("seed", a.seed.to_string()),
            ("max_depth_baselines", a.max_depth_baselines.to_string()),
        ],
    );
    let calib = read_calibration(&a.dataset)?;
    let frames = read_vo_frames(&a.dataset)?;
    let gt = read_trajectory(&a.dataset)?;
    let first = gt.poses().first().context("dataset has no frames")?.pose;
    let options = VoOptions {
        noise_sigma: a.noise,
        seed: a.seed,
        max_depth_baselines: max_depth,
    };
    let result = run_vo(&frames, &calib.stereo(), first, &options)?;
    write_trajectory(&a.out, &result.trajectory)?;
    println!("frames = {}", frames.len());
    println!("estimated = {}", result.trajectory.len());
    println!("holes = {:?}", result.holes);
    println!("partial = {}", result.is_partial());
    Ok(Outcome::Success)
}

fn metric_row(t: &mut Table, name: &str, r: &MetricReport<f64>) {
    let s = &r.stats;
    t.row(vec![
        name.into(),
        r.kind.label().into(),
        num(Some(s.mean)),
        num(Some(s.median)),
        num(Some(s.rmse)),
        num(Some(s.max)),
        s.count.to_string().into(),
    ]);
}

fn prepare_estimate(est: Trajectory, gt: &Trajectory, scale: bool) -> Result<Trajectory> {
    Ok(if scale { scale_correct(&est, gt)? } else { est })
}

fn write_csv(path: &Option<std::path::PathBuf>, table: &Table) -> Result<()> {
    if let Some(p) = path {
        fs::write(p, table.csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<Outcome> {
    effective(
        "evaluate",
        &[
            ("est", quoted(&a.est)),
            ("gt", quoted(&a.gt)),
            ("align", format!("\"{}\"", a.align.name())),
            ("scale_correct", a.scale_correct.to_string()),
            ("delta", a.delta.to_string()),
        ],
    );
    let gt = read_trajectory(&a.gt)?;
    let est = prepare_estimate(read_trajectory(&a.est)?, &gt, a.scale_correct)?;
    let ape = ape(&est, &gt, a.align.alignment())?;
    let rpe = rpe(&est, &gt, a.delta)?;
    let mut t = Table::new(&["run", "metric", "mean", "median", "rmse", "max", "count"]);
    metric_row(&mut t, "est", &ape.meters);
    if let Some(p) = &ape.percent {
        metric_row(&mut t, "est", p);
    }
    metric_row(&mut t, "est", &rpe.translation);
    metric_row(&mut t, "est", &rpe.rotation);
    println!("trajectory_length = {:.6}", ape.meters.trajectory_length);
    println!("unmatched = {}", ape.meters.unmatched);
    print!("{}", t.text());
    write_csv(&a.csv, &t)?;
    Ok(Outcome::Success)
}

fn run_row(t: &mut Table, r: &RunEvaluation) {
    t.row(vec![
        r.method.as_str().into(),
        r.frames.to_string().into(),
        num(Some(r.ground_truth.length().unwrap_or(0.0))),
        num(Some(r.ape.meters.stats.mean)),
        num(Some(r.ape.meters.stats.max)),
        num(Some(r.ape_m())),
        num(r.ape_pct()),
        num(Some(r.rpe.translation.stats.rmse)),
        num(Some(r.rpe.rotation.stats.rmse)),
        Cell::Sci(r.mean_pair_offset),
    ]);
}

pub fn validate_tefs(a: ValidateArgs) -> Result<Outcome> {
    let cfg = load_scenario(&a.scenario)?;
    let method = a.method.method();
    if method == CaptureMethod::DualViewport {
        bail!("--method dual compares the reference with itself; pick tefs or naive");
    }
    let condition = a.condition.condition();
    effective(
        "validate-tefs",
        &[
            ("method", format!("\"{}\"", method.as_str())),
            ("condition", format!("\"{}\"", condition.as_str())),
            ("noise", a.noise.to_string()),
            (
                "out",
                a.out.as_ref().map(quoted).unwrap_or_else(|| "\"\"".into()),
            ),
        ],
    );
    print_scenario(&cfg);
    let options = VoOptions {
        noise_sigma: a.noise,
        ..VoOptions::default()
    };
    let n = nominal_offsets(&cfg);
    let v = cfg.speed();
    println!("speed_mps = {v:.6}");
    println!("tefs_offset_m = {:.6e}", n.tefs);
    println!(
        "naive_offset_m = {:.6e}  (one {:.4} ms tick)",
        n.naive,
        cfg.tick_duration * 1e3
    );
    println!(
        "naive_offset_nominal_m = {:.6e}  ({} ms frame)",
        spatial_offset(v, NOMINAL_FRAME),
        NOMINAL_FRAME * 1e3
    );
    if n.tefs > 0.0 {
        println!("offset_ratio = {:.4}", n.naive / n.tefs);
        println!(
            "offset_ratio_nominal = {:.4}",
            spatial_offset(v, NOMINAL_FRAME) / n.tefs
        );
    }
    println!();

    let run = |m: CaptureMethod| -> Result<RunEvaluation, PipelineError> {
        let mut writer = match &a.out {
            Some(dir) => {
                Some(DatasetWriter::create(dir.join(m.as_str())).map_err(CaptureError::from)?)
            }
            None => None,
        };
        capture_and_evaluate(&cfg, m, condition, writer.as_mut(), &options)
    };
    let reference = run(CaptureMethod::DualViewport)?;
    let candidate = match run(method) {
        Ok(c) => c,
        // Odometry failing on corrupted pairs is a result, not a crash.
        Err(PipelineError::Vo(e)) => {
            return Ok(Outcome::ThresholdFailed(format!(
                "{}: odometry failed on scenario `{}`: {e}",
                method.as_str(),
                cfg.name
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let cmp = Comparison {
        candidate,
        reference,
    };

    let mut t = Table::new(&[
        "method",
        "frames",
        "length_m",
        "ape_mean_m",
        "ape_max_m",
        "ape_rmse_m",
        "ape_rmse_pct",
        "rpe_t_rmse_m",
        "rpe_r_rmse_deg",
        "pair_offset_m",
    ]);
    run_row(&mut t, &cmp.candidate);
    run_row(&mut t, &cmp.reference);
    print!("{}", t.text());
    println!();
    println!("ape_m_delta = {:e}", cmp.ape_m_delta());
    println!("rpe_t_delta = {:e}", cmp.rpe_delta());
    match cmp.ape_pct_delta() {
        Some(d) => println!("ape_pct_delta = {d:.6}"),
        None => println!("ape_pct_delta = n/a  (stationary ground truth)"),
    }

    if method == CaptureMethod::Tefs {
        if let Some(d) = cmp.ape_pct_delta() {
            if d > APE_PCT_DELTA_LIMIT {
                return Ok(Outcome::ThresholdFailed(format!(
                    "ape_pct_delta {d:.6} > {APE_PCT_DELTA_LIMIT} on scenario `{}`",
                    cfg.name
                )));
            }
        }
        println!("check ape_pct_delta <= {APE_PCT_DELTA_LIMIT}: pass");
    }
    Ok(Outcome::Success)
}

pub fn report(a: ReportArgs) -> Result<Outcome> {
    effective(
        "report",
        &[
            ("gt", quoted(&a.gt)),
            (
                "est",
                format!(
                    "[{}]",
                    a.estimates
                        .iter()
                        .map(|e| format!("{e:?}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ),
            ("align", format!("\"{}\"", a.align.name())),
            ("scale_correct", a.scale_correct.to_string()),
        ],
    );
    let gt = read_trajectory(&a.gt)?;
    let mut t = Table::new(&[
        "run",
        "ape_mean_m",
        "ape_max_m",
        "ape_mean_pct",
        "ape_max_pct",
        "rpe_t_rmse_m",
        "rpe_r_rmse_deg",
    ]);
    for spec in &a.estimates {
        let Some((name, path)) = spec.split_once('=') else {
            bail!("estimate `{spec}` must be NAME=PATH");
        };
        let est = prepare_estimate(read_trajectory(path)?, &gt, a.scale_correct)?;
        let ape = ape(&est, &gt, a.align.alignment())?;
        let rpe = rpe(&est, &gt, 1)?;
        t.row(vec![
            name.into(),
            num(Some(ape.meters.stats.mean)),
            num(Some(ape.meters.stats.max)),
            num(ape.percent.map(|p| p.stats.mean)),
            num(ape.percent.map(|p| p.stats.max)),
            num(Some(rpe.translation.stats.rmse)),
            num(Some(rpe.rotation.stats.rmse)),
        ]);
    }
    print!("{}", t.text());
    write_csv(&a.csv, &t)?;
    Ok(Outcome::Success)
}
