//! On-disk dataset layout.
//!
//! ```text
//! manifest.toml          session metadata
//! calib.txt              intrinsics, baseline, clip planes, depth semantics
//! poses.txt              left camera pose per pair, 12 values (3×4 row-major)
//! times.txt              in-game capture time per pair, seconds
//! gps.txt                "x y" world position of the ego per pair
//! image_{L,R}/NNNNNN.ppm binary PPM (P6)
//! depth_{L,R}/NNNNNN.bin 16-byte header + f32 LE metric depth
//! features/NNNNNN.txt    "id uL vL uR vR" per beacon seen in both views
//! ```
//!
//! Readers are strict: anything the writer could not have produced is an
//! error.

mod format;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use format::{
    parse_features, parse_kitti_poses, parse_times, read_depth, read_ppm, write_depth, write_ndc,
    write_ppm, DepthFile, Image,
};

use crate::capture::{
    CaptureError, CaptureMethod, CycleSchedule, SampleSink, SessionInfo, SessionSummary,
    StereoSample,
};
use crate::depth::DepthSemantics;
use crate::render::{ConditionName, Intrinsics, RigSpec, Side};
use crate::traj_eval::Stamped;
use crate::vo::{FeatureObservation, StereoCalibration, VoFrame};
use crate::{DepthRaster, Pose, Trajectory};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{file}: {msg}")]
    Format { file: String, msg: String },
    #[error("sample {0} already exists")]
    Collision(usize),
    #[error("{0} already holds a dataset")]
    Occupied(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Session metadata written last, once the frame count is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub scenario: String,
    pub method: CaptureMethod,
    pub condition: ConditionName,
    pub seed: u64,
    pub speed_kmh: f64,
    pub tick_duration: f64,
    pub leak_fraction: f64,
    pub engine_disparity_ms: f64,
    pub depth_semantics: DepthSemantics,
    pub frame_count: usize,
    pub trajectory_length: f64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub schedule: CycleSchedule,
    pub rig: RigSpec,
}

impl Manifest {
    pub fn new(info: &SessionInfo, summary: &SessionSummary) -> Self {
        Self {
            version: FORMAT_VERSION,
            scenario: info.scenario.clone(),
            method: info.method,
            condition: info.condition,
            seed: info.seed,
            speed_kmh: info.speed_kmh,
            tick_duration: info.tick_duration,
            leak_fraction: info.leak_fraction,
            engine_disparity_ms: info.engine_disparity_ms,
            depth_semantics: info.depth_semantics,
            frame_count: summary.frames,
            trajectory_length: summary.trajectory_length,
            complete: summary.complete,
            error: summary.error.clone(),
            schedule: info.schedule,
            rig: info.rig.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, DatasetError> {
        let m: Self = toml::from_str(text).map_err(|e| DatasetError::Format {
            file: "manifest.toml".into(),
            msg: e.to_string(),
        })?;
        if m.version != FORMAT_VERSION {
            return Err(DatasetError::Format {
                file: "manifest.toml".into(),
                msg: format!("unsupported version {}", m.version),
            });
        }
        Ok(m)
    }
}

/// Camera calibration of the rectified pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub width: usize,
    pub height: usize,
    pub left: Intrinsics,
    pub right: Intrinsics,
    pub baseline: f64,
    pub near: f64,
    pub far: f64,
    pub semantics: DepthSemantics,
}

impl CalibrationRecord {
    pub fn from_rig(rig: &RigSpec, semantics: DepthSemantics) -> Result<Self, CaptureError> {
        let rig = crate::render::CameraRig::new(rig.clone())?;
        let k = rig.intrinsics();
        let s = rig.spec();
        Ok(Self {
            width: s.width,
            height: s.height,
            left: k,
            right: k,
            baseline: s.baseline,
            near: s.near,
            far: s.far,
            semantics,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        for k in [&self.left, &self.right] {
            if !(k.fx > 0.0 && k.fy > 0.0) {
                return Err("focal lengths must be positive".into());
            }
            if !(k.cx > 0.0 && k.cy > 0.0 && k.cx < self.width as f64 && k.cy < self.height as f64)
            {
                return Err("principal point outside the image".into());
            }
        }
        if self.left != self.right {
            return Err("left and right intrinsics differ on a rectified rig".into());
        }
        if !(self.baseline > 0.0) {
            return Err("baseline must be positive".into());
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err("clip planes need 0 < near < far".into());
        }
        Ok(())
    }

    pub fn stereo(&self) -> StereoCalibration<f64> {
        StereoCalibration {
            fx: self.left.fx,
            fy: self.left.fy,
            cx: self.left.cx,
            cy: self.left.cy,
            baseline: self.baseline,
        }
    }
}

fn frame_name(index: usize, ext: &str) -> String {
    format!("{index:06}.{ext}")
}

fn side_dir(kind: &str, side: Side) -> String {
    format!("{kind}_{}", side.letter())
}

const SUBDIRS: [&str; 5] = ["image_L", "image_R", "depth_L", "depth_R", "features"];

/// Streams a capture session into a dataset directory.
pub struct DatasetWriter {
    root: PathBuf,
    poses: Option<BufWriter<File>>,
    times: Option<BufWriter<File>>,
    gps: Option<BufWriter<File>>,
    next: usize,
}

impl DatasetWriter {
    /// Prepares `root`, which must not already contain a dataset.
    pub fn create(root: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let root = root.as_ref().to_path_buf();
        if root.join("manifest.toml").exists() || root.join("poses.txt").exists() {
            return Err(DatasetError::Occupied(root.display().to_string()));
        }
        for d in SUBDIRS {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(Self {
            root,
            poses: None,
            times: None,
            gps: None,
            next: 0,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn table(&self, name: &str) -> Result<BufWriter<File>, DatasetError> {
        let p = self.root.join(name);
        let f = OpenOptions::new()
            .create_new(true)
            .write(true)
            .open(&p)
            .map_err(io_err(&p))?;
        Ok(BufWriter::new(f))
    }

    fn write_new(&self, path: PathBuf, bytes: &[u8], index: usize) -> Result<(), DatasetError> {
        let mut f = match OpenOptions::new().create_new(true).write(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(DatasetError::Collision(index))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        f.write_all(bytes).map_err(io_err(&path))
    }

    pub fn write_sample(
        &mut self,
        index: usize,
        sample: &StereoSample,
    ) -> Result<(), DatasetError> {
        if index != self.next {
            return Err(if index < self.next {
                DatasetError::Collision(index)
            } else {
                DatasetError::Inconsistent(format!("sample {index} written before {}", self.next))
            });
        }
        for (side, frame, depth) in [
            (Side::Left, &sample.left, &sample.left_depth),
            (Side::Right, &sample.right, &sample.right_depth),
        ] {
            let image = Image {
                width: frame.width,
                height: frame.height,
                rgb: frame.rgb.clone(),
            };
            let dir = self.root.join(side_dir("image", side));
            self.write_new(
                dir.join(frame_name(index, "ppm")),
                &write_ppm(&image),
                index,
            )?;
            let dir = self.root.join(side_dir("depth", side));
            self.write_new(
                dir.join(frame_name(index, "bin")),
                &write_depth(depth),
                index,
            )?;
        }
        let features = format::format_features(&sample.features);
        let p = self.root.join("features").join(frame_name(index, "txt"));
        self.write_new(p, features.as_bytes(), index)?;

        if self.poses.is_none() {
            self.poses = Some(self.table("poses.txt")?);
            self.times = Some(self.table("times.txt")?);
            self.gps = Some(self.table("gps.txt")?);
        }
        let line = |w: &mut BufWriter<File>, name: &str, text: String| {
            writeln!(w, "{text}").map_err(io_err(&self.root.join(name)))
        };
        line(
            self.poses.as_mut().expect("opened above"),
            "poses.txt",
            format::format_pose(sample.camera_pose()),
        )?;
        line(
            self.times.as_mut().expect("opened above"),
            "times.txt",
            format!("{:e}", sample.in_game_time),
        )?;
        line(
            self.gps.as_mut().expect("opened above"),
            "gps.txt",
            format!("{:e} {:e}", sample.gps[0], sample.gps[1]),
        )?;
        self.next += 1;
        Ok(())
    }

    /// Flushes the tables and writes calibration and manifest.
    pub fn finish(
        &mut self,
        info: &SessionInfo,
        summary: &SessionSummary,
    ) -> Result<Manifest, DatasetError> {
        for (name, w) in [
            ("poses.txt", &mut self.poses),
            ("times.txt", &mut self.times),
            ("gps.txt", &mut self.gps),
        ] {
            match w {
                Some(w) => w.flush().map_err(io_err(&self.root.join(name)))?,
                None => {
                    let p = self.root.join(name);
                    File::create(&p).map_err(io_err(&p))?;
                }
            }
        }
        let calib = CalibrationRecord::from_rig(&info.rig, info.depth_semantics).map_err(|e| {
            DatasetError::Format {
                file: "calib.txt".into(),
                msg: e.to_string(),
            }
        })?;
        let p = self.root.join("calib.txt");
        fs::write(&p, format::format_calibration(&calib)).map_err(io_err(&p))?;
        let manifest = Manifest::new(info, summary);
        let p = self.root.join("manifest.toml");
        fs::write(&p, manifest.to_toml()).map_err(io_err(&p))?;
        Ok(manifest)
    }
}

impl From<DatasetError> for CaptureError {
    fn from(e: DatasetError) -> Self {
        CaptureError::Sink(e.to_string())
    }
}

impl SampleSink for DatasetWriter {
    fn begin(&mut self, _: &SessionInfo) -> Result<(), CaptureError> {
        Ok(())
    }

    fn write(&mut self, index: usize, sample: &StereoSample) -> Result<(), CaptureError> {
        Ok(self.write_sample(index, sample)?)
    }

    fn finish(&mut self, info: &SessionInfo, summary: &SessionSummary) -> Result<(), CaptureError> {
        DatasetWriter::finish(self, info, summary)?;
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_manifest(root: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    Manifest::from_toml(&read_text(&root.as_ref().join("manifest.toml"))?)
}

pub fn read_calibration(root: impl AsRef<Path>) -> Result<CalibrationRecord, DatasetError> {
    let text = read_text(&root.as_ref().join("calib.txt"))?;
    format::parse_calibration(&text)
}

/// Loads a trajectory. `path` is either a dataset (or VO output) directory
/// holding `poses.txt` and `times.txt`, or a pose file; a pose file takes
/// its timestamps from a sibling `times.txt` when there is one and uses
/// the row index otherwise.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, DatasetError> {
    let path = path.as_ref();
    let (poses_path, times_path) = if path.is_dir() {
        (path.join("poses.txt"), Some(path.join("times.txt")))
    } else {
        let sibling = path.with_file_name("times.txt");
        (path.to_path_buf(), sibling.exists().then_some(sibling))
    };
    let file = poses_path.display().to_string();
    let poses = parse_kitti_poses(&read_text(&poses_path)?, &file)?;
    let times = match times_path {
        Some(t) => parse_times(&read_text(&t)?, &t.display().to_string())?,
        None => (0..poses.len()).map(|i| i as f64).collect(),
    };
    if times.len() != poses.len() {
        return Err(DatasetError::Inconsistent(format!(
            "{} poses but {} timestamps",
            poses.len(),
            times.len()
        )));
    }
    let stamped = times
        .into_iter()
        .zip(poses)
        .map(|(time, pose)| Stamped { time, pose })
        .collect();
    Trajectory::new(stamped).map_err(|e| DatasetError::Format {
        file,
        msg: e.to_string(),
    })
}

/// Writes a trajectory as `poses.txt` + `times.txt` into `dir`.
pub fn write_trajectory(dir: impl AsRef<Path>, traj: &Trajectory) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut poses = String::new();
    let mut times = String::new();
    for s in traj.iter() {
        poses.push_str(&format::format_pose(&s.pose));
        poses.push('\n');
        times.push_str(&format!("{:e}\n", s.time));
    }
    let p = dir.join("poses.txt");
    fs::write(&p, poses).map_err(io_err(&p))?;
    let p = dir.join("times.txt");
    fs::write(&p, times).map_err(io_err(&p))
}

pub fn read_features(
    root: impl AsRef<Path>,
    index: usize,
) -> Result<Vec<FeatureObservation<f64>>, DatasetError> {
    let p = root
        .as_ref()
        .join("features")
        .join(frame_name(index, "txt"));
    parse_features(&read_text(&p)?, &p.display().to_string())
}

/// One pair as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub index: usize,
    pub left: Image,
    pub right: Image,
    pub left_depth: DepthRaster,
    pub right_depth: DepthRaster,
    pub pose: Pose,
    pub time: f64,
    pub gps: [f64; 2],
    pub features: Vec<FeatureObservation<f64>>,
}

fn read_rows(root: &Path, name: &str) -> Result<Vec<String>, DatasetError> {
    Ok(read_text(&root.join(name))?
        .lines()
        .map(str::to_string)
        .collect())
}

pub fn read_sample(root: impl AsRef<Path>, index: usize) -> Result<DatasetSample, DatasetError> {
    let root = root.as_ref();
    let image = |side| -> Result<Image, DatasetError> {
        let p = root
            .join(side_dir("image", side))
            .join(frame_name(index, "ppm"));
        read_ppm(&fs::read(&p).map_err(io_err(&p))?, &p.display().to_string())
    };
    let depth = |side| -> Result<DepthRaster, DatasetError> {
        let p = root
            .join(side_dir("depth", side))
            .join(frame_name(index, "bin"));
        let file = read_depth(&fs::read(&p).map_err(io_err(&p))?, &p.display().to_string())?;
        file.into_metric(&p.display().to_string())
    };
    let poses = parse_kitti_poses(&read_text(&root.join("poses.txt"))?, "poses.txt")?;
    let times = parse_times(&read_text(&root.join("times.txt"))?, "times.txt")?;
    let gps_rows = read_rows(root, "gps.txt")?;
    let (Some(pose), Some(time), Some(gps_row)) =
        (poses.get(index), times.get(index), gps_rows.get(index))
    else {
        return Err(DatasetError::Inconsistent(format!(
            "no table rows for sample {index}"
        )));
    };
    let gps = format::parse_fixed::<2>(gps_row, "gps.txt", index + 1)?;
    Ok(DatasetSample {
        index,
        left: image(Side::Left)?,
        right: image(Side::Right)?,
        left_depth: depth(Side::Left)?,
        right_depth: depth(Side::Right)?,
        pose: *pose,
        time: *time,
        gps,
        features: read_features(root, index)?,
    })
}

/// Frames for the odometry baseline, in capture order.
pub fn read_vo_frames(root: impl AsRef<Path>) -> Result<Vec<VoFrame<f64>>, DatasetError> {
    let root = root.as_ref();
    let times = parse_times(&read_text(&root.join("times.txt"))?, "times.txt")?;
    times
        .into_iter()
        .enumerate()
        .map(|(i, time)| {
            Ok(VoFrame {
                time,
                features: read_features(root, i)?,
            })
        })
        .collect()
}

/// Checks the cross-file invariants of a dataset.
pub fn verify(root: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
    let root = root.as_ref();
    let manifest = read_manifest(root)?;
    let calib = read_calibration(root)?;
    calib.validate().map_err(|msg| DatasetError::Format {
        file: "calib.txt".into(),
        msg,
    })?;
    let n = manifest.frame_count;
    for name in ["poses.txt", "times.txt", "gps.txt"] {
        let rows = read_rows(root, name)?.len();
        if rows != n {
            return Err(DatasetError::Inconsistent(format!(
                "{name} has {rows} rows, manifest says {n}"
            )));
        }
    }
    for d in SUBDIRS {
        let p = root.join(d);
        let count = fs::read_dir(&p).map_err(io_err(&p))?.count();
        if count != n {
            return Err(DatasetError::Inconsistent(format!(
                "{d} holds {count} files, manifest says {n}"
            )));
        }
    }
    read_trajectory(root)?;
    Ok(manifest)
}

/// SHA-256 over every file's relative path and contents, in path order.
pub fn tree_hash(root: impl AsRef<Path>) -> Result<String, DatasetError> {
    let root = root.as_ref();
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Io {
            path: root.display().to_string(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root).expect("walked under root");
        let rel = rel.to_string_lossy().replace('\\', "/");
        let bytes = fs::read(&f).map_err(io_err(&f))?;
        h.update((rel.len() as u64).to_le_bytes());
        h.update(rel.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::run_session;
    use crate::scenario::ScenarioConfig;

    fn config() -> ScenarioConfig {
        ScenarioConfig::from_toml(
            r#"
name = "io"
seed = 5
speed_kmh = 20.0
cycles = 3

[path]
start = [0.0, 0.0, 0.0]
segments = [{ kind = "straight", length = 30.0 }]

[rig]
width = 64
height = 36
"#,
        )
        .unwrap()
    }

    fn capture(dir: &Path) -> Vec<StereoSample> {
        let cfg = config();
        let mut mem = Vec::new();
        run_session(
            &cfg,
            CaptureMethod::Tefs,
            ConditionName::CloudyRain,
            &mut mem,
        )
        .unwrap();
        let mut w = DatasetWriter::create(dir).unwrap();
        run_session(&cfg, CaptureMethod::Tefs, ConditionName::CloudyRain, &mut w).unwrap();
        mem
    }

    #[test]
    fn write_then_read_sample() {
        let dir = tempfile::tempdir().unwrap();
        let samples = capture(dir.path());
        let m = verify(dir.path()).unwrap();
        assert_eq!(m.frame_count, 3);
        assert!(m.complete);
        for (i, s) in samples.iter().enumerate() {
            let r = read_sample(dir.path(), i).unwrap();
            assert_eq!(r.left.rgb, s.left.rgb);
            assert_eq!(r.right.rgb, s.right.rgb);
            assert_eq!(&r.pose, s.camera_pose());
            assert_eq!(r.time, s.in_game_time);
            assert_eq!(r.gps, s.gps);
            assert_eq!(r.features, s.features);
            for (a, b) in r.left_depth.data.iter().zip(&s.left_depth.data) {
                assert_eq!(*a, *b as f32 as f64);
            }
            let p = dir.path().join("depth_R").join(frame_name(i, "bin"));
            assert_eq!(fs::metadata(p).unwrap().len(), 16 + 4 * 64 * 36);
        }
        let traj = read_trajectory(dir.path()).unwrap();
        assert_eq!(traj.len(), 3);
    }

    #[test]
    fn manifest_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        capture(dir.path());
        let text = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        assert_eq!(Manifest::from_toml(&text).unwrap().to_toml(), text);
    }

    #[test]
    fn occupied_directory_and_collisions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let samples = capture(dir.path());
        assert!(matches!(
            DatasetWriter::create(dir.path()),
            Err(DatasetError::Occupied(_))
        ));
        let fresh = tempfile::tempdir().unwrap();
        let mut w = DatasetWriter::create(fresh.path()).unwrap();
        w.write_sample(0, &samples[0]).unwrap();
        assert!(matches!(
            w.write_sample(0, &samples[0]),
            Err(DatasetError::Collision(0))
        ));
    }

    #[test]
    fn verify_catches_missing_rows() {
        let dir = tempfile::tempdir().unwrap();
        capture(dir.path());
        let p = dir.path().join("gps.txt");
        let text = fs::read_to_string(&p).unwrap();
        fs::write(
            &p,
            text.lines()
                .take(2)
                .map(|l| format!("{l}\n"))
                .collect::<String>(),
        )
        .unwrap();
        assert!(matches!(
            verify(dir.path()),
            Err(DatasetError::Inconsistent(_))
        ));
    }

    #[test]
    fn identity_pose_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("est.txt");
        fs::write(&p, "1 0 0 0 0 1 0 0 0 0 1 0\n".repeat(4)).unwrap();
        let t = read_trajectory(&p).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|s| s.pose == Pose::identity()));
        assert_eq!(t.poses()[3].time, 3.0);
    }

    #[test]
    fn tree_hash_is_content_addressed() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        capture(a.path());
        capture(b.path());
        assert_eq!(tree_hash(a.path()).unwrap(), tree_hash(b.path()).unwrap());
        fs::write(a.path().join("features/000000.txt"), "").unwrap();
        assert_ne!(tree_hash(a.path()).unwrap(), tree_hash(b.path()).unwrap());
    }
}
