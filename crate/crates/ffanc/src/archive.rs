//! On-disk scene archives.
//!
//! Layout:
//!
//! ```text
//! <dir>/
//!   manifest.json
//!   rep000/
//!     hx_az270000.csv   source -> external mic, per DoA (angle in millidegrees)
//!     hd_az270000.csv   source -> ear drum, per DoA
//!     s.csv             loudspeaker -> ear drum
//!     bx.csv            loudspeaker -> external mic
//!   rep001/
//!     ...
//! ```
//!
//! Impulse responses are stored either as plain-text CSV (one sample per
//! line, full f64 precision; the default) or as single-channel float32 WAV.
//! A reserved role prefix `hi_` (inner microphone) is tolerated and ignored
//! on ingest so archives converted from richer databases stay valid.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{AcousticPathSet, DirectionalPaths, Doa};
use crate::spectral::ImpulseResponse;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

/// Storage format of the impulse-response payload files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioFormat {
    /// One sample per line, shortest round-tripping decimal representation.
    Csv,
    /// Single-channel IEEE float32 WAV.
    Wav,
}

impl AudioFormat {
    fn extension(self) -> &'static str {
        match self {
            AudioFormat::Csv => "csv",
            AudioFormat::Wav => "wav",
        }
    }
}

/// Archive manifest, written alongside the payload files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub sample_rate_hz: f64,
    /// DoA grid, ascending, in millidegrees.
    pub doas_millideg: Vec<u32>,
    pub repetitions: usize,
    pub audio_format: AudioFormat,
    /// Whether the feedback path carries energy (informational).
    pub has_feedback: bool,
}

fn rep_dir(root: &Path, repetition: usize) -> PathBuf {
    root.join(format!("rep{repetition:03}"))
}

fn doa_file(dir: &Path, role: &str, doa: Doa, format: AudioFormat) -> PathBuf {
    dir.join(format!(
        "{role}_az{:06}.{}",
        doa.millidegrees(),
        format.extension()
    ))
}

fn role_file(dir: &Path, role: &str, format: AudioFormat) -> PathBuf {
    dir.join(format!("{role}.{}", format.extension()))
}

/// Writes a scene archive. The directory is created if needed.
pub fn export_scene(root: &Path, sets: &[AcousticPathSet], format: AudioFormat) -> Result<()> {
    let first = sets.first().ok_or(Error::InvalidConfig {
        field: "repetitions",
        reason: "cannot export an empty scene".into(),
    })?;
    let doas = first.doas();
    for set in sets {
        if set.doas() != doas {
            return Err(Error::DoaCoverageMismatch {
                repetition: set.repetition_id,
            });
        }
        if set.sample_rate != first.sample_rate {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: "all repetitions must share one sample rate".into(),
            });
        }
    }
    fs::create_dir_all(root)?;
    let has_feedback = sets
        .iter()
        .any(|s| s.feedback.samples().iter().any(|&v| v != 0.0));
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        sample_rate_hz: first.sample_rate,
        doas_millideg: doas.iter().map(|d| d.millidegrees()).collect(),
        repetitions: sets.len(),
        audio_format: format,
        has_feedback,
    };
    let file = fs::File::create(root.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(file, &manifest)?;

    for set in sets {
        let dir = rep_dir(root, set.repetition_id);
        fs::create_dir_all(&dir)?;
        for (doa, paths) in &set.doa_paths {
            write_samples(&doa_file(&dir, "hx", *doa, format), &paths.to_mic, format)?;
            write_samples(&doa_file(&dir, "hd", *doa, format), &paths.to_drum, format)?;
        }
        write_samples(&role_file(&dir, "s", format), &set.secondary, format)?;
        write_samples(&role_file(&dir, "bx", format), &set.feedback, format)?;
    }
    Ok(())
}

/// Reads and fully validates a scene archive.
pub fn ingest_scene(root: &Path) -> Result<Vec<AcousticPathSet>> {
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let manifest: Manifest = serde_json::from_reader(fs::File::open(&manifest_path)?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::CorruptPayload {
            path: manifest_path,
            reason: format!("unsupported format_version {}", manifest.format_version),
        });
    }
    if manifest.repetitions == 0 || manifest.doas_millideg.is_empty() {
        return Err(Error::CorruptPayload {
            path: manifest_path,
            reason: "manifest declares no repetitions or no DoAs".into(),
        });
    }
    let fs_hz = manifest.sample_rate_hz;
    let format = manifest.audio_format;
    let doas: Vec<Doa> = manifest
        .doas_millideg
        .iter()
        .map(|&m| Doa::from_millidegrees(m))
        .collect();

    let mut sets = Vec::with_capacity(manifest.repetitions);
    for r in 0..manifest.repetitions {
        let dir = rep_dir(root, r);
        if !dir.is_dir() {
            return Err(Error::DoaCoverageMismatch { repetition: r });
        }
        let mut doa_paths = BTreeMap::new();
        for &doa in &doas {
            let to_mic = read_samples(&doa_file(&dir, "hx", doa, format), fs_hz, format)
                .map_err(|e| annotate_missing(e, r, "hx", doa))?;
            let to_drum = read_samples(&doa_file(&dir, "hd", doa, format), fs_hz, format)
                .map_err(|e| annotate_missing(e, r, "hd", doa))?;
            doa_paths.insert(doa, DirectionalPaths { to_mic, to_drum });
        }
        let secondary = read_samples(&role_file(&dir, "s", format), fs_hz, format)?;
        let feedback = read_samples(&role_file(&dir, "bx", format), fs_hz, format)?;
        sets.push(AcousticPathSet::new(r, doa_paths, secondary, feedback)?);
    }
    Ok(sets)
}

fn annotate_missing(err: Error, repetition: usize, role: &str, doa: Doa) -> Error {
    match err {
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => Error::MissingPathFile {
            repetition,
            role: role.to_string(),
            doa_deg: doa.degrees(),
            path: PathBuf::new(),
        },
        Error::MissingPathFile { path, .. } => Error::MissingPathFile {
            repetition,
            role: role.to_string(),
            doa_deg: doa.degrees(),
            path,
        },
        other => other,
    }
}

fn write_samples(path: &Path, ir: &ImpulseResponse, format: AudioFormat) -> Result<()> {
    match format {
        AudioFormat::Csv => {
            let mut out = String::with_capacity(ir.len() * 12);
            for s in ir.samples() {
                // `{}` prints the shortest decimal that round-trips the f64.
                out.push_str(&format!("{s}\n"));
            }
            let mut file = fs::File::create(path)?;
            file.write_all(out.as_bytes())?;
        }
        AudioFormat::Wav => {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: ir.sample_rate().round() as u32,
                bits_per_sample: 32,
                sample_format: hound::SampleFormat::Float,
            };
            let mut writer = hound::WavWriter::create(path, spec)?;
            for &s in ir.samples() {
                writer.write_sample(s as f32)?;
            }
            writer.finalize()?;
        }
    }
    Ok(())
}

fn read_samples(path: &Path, expected_fs: f64, format: AudioFormat) -> Result<ImpulseResponse> {
    if !path.is_file() {
        return Err(Error::MissingPathFile {
            repetition: 0,
            role: String::new(),
            doa_deg: 0.0,
            path: path.to_path_buf(),
        });
    }
    match format {
        AudioFormat::Csv => {
            let reader = BufReader::new(fs::File::open(path)?);
            let mut samples = Vec::new();
            for (line_no, line) in reader.lines().enumerate() {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let value: f64 = trimmed.parse().map_err(|_| Error::CorruptPayload {
                    path: path.to_path_buf(),
                    reason: format!("line {}: not a number: {trimmed:?}", line_no + 1),
                })?;
                samples.push(value);
            }
            if samples.is_empty() {
                return Err(Error::CorruptPayload {
                    path: path.to_path_buf(),
                    reason: "no samples".into(),
                });
            }
            ImpulseResponse::new(samples, expected_fs)
        }
        AudioFormat::Wav => {
            let mut reader = hound::WavReader::open(path)?;
            let spec = reader.spec();
            if spec.sample_rate as f64 != expected_fs {
                return Err(Error::MixedSampleRate {
                    expected: expected_fs,
                    found: spec.sample_rate as f64,
                    path: path.to_path_buf(),
                });
            }
            if spec.channels != 1
                || spec.sample_format != hound::SampleFormat::Float
                || spec.bits_per_sample != 32
            {
                return Err(Error::CorruptPayload {
                    path: path.to_path_buf(),
                    reason: "expected single-channel float32 WAV".into(),
                });
            }
            let samples: std::result::Result<Vec<f32>, _> = reader.samples::<f32>().collect();
            let samples = samples.map_err(|e| Error::CorruptPayload {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            ImpulseResponse::new(samples.into_iter().map(f64::from).collect(), expected_fs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{synthesize_scene, SceneConfig};

    fn small_scene() -> Vec<AcousticPathSet> {
        let mut config = SceneConfig::fast();
        config.repetitions = 3;
        config.doa_resolution_deg = 90.0;
        synthesize_scene(&config).unwrap().repetitions
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let sets = small_scene();
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path(), &sets, AudioFormat::Csv).unwrap();
        let back = ingest_scene(dir.path()).unwrap();
        assert_eq!(sets, back);
    }

    #[test]
    fn wav_round_trip_is_float32_accurate() {
        let sets = small_scene();
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path(), &sets, AudioFormat::Wav).unwrap();
        let back = ingest_scene(dir.path()).unwrap();
        for (a, b) in sets.iter().zip(back.iter()) {
            for (doa, pa) in &a.doa_paths {
                let pb = &b.doa_paths[doa];
                for (x, y) in pa.to_mic.samples().iter().zip(pb.to_mic.samples()) {
                    assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn missing_manifest_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            ingest_scene(dir.path()),
            Err(Error::MissingManifest(_))
        ));
    }

    #[test]
    fn missing_doa_file_is_named() {
        let sets = small_scene();
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path(), &sets, AudioFormat::Csv).unwrap();
        let victim = doa_file(
            &rep_dir(dir.path(), 1),
            "hd",
            Doa::from_degrees(90.0),
            AudioFormat::Csv,
        );
        fs::remove_file(&victim).unwrap();
        match ingest_scene(dir.path()) {
            Err(Error::MissingPathFile {
                repetition,
                role,
                doa_deg,
                ..
            }) => {
                assert_eq!(repetition, 1);
                assert_eq!(role, "hd");
                assert!((doa_deg - 90.0).abs() < 1e-9);
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn corrupt_payload_is_reported() {
        let sets = small_scene();
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path(), &sets, AudioFormat::Csv).unwrap();
        let victim = role_file(&rep_dir(dir.path(), 0), "s", AudioFormat::Csv);
        fs::write(&victim, "0.5\nnot-a-number\n").unwrap();
        assert!(matches!(
            ingest_scene(dir.path()),
            Err(Error::CorruptPayload { .. })
        ));
    }

    #[test]
    fn repetition_count_matches_manifest() {
        let sets = small_scene();
        let dir = tempfile::tempdir().unwrap();
        export_scene(dir.path(), &sets, AudioFormat::Csv).unwrap();
        let back = ingest_scene(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        for (i, set) in back.iter().enumerate() {
            assert_eq!(set.repetition_id, i);
        }
    }
}
