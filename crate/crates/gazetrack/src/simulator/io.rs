//! Sequence persistence: PGM frame dumps, ground-truth CSV, and the
//! big-endian IDX image format used by handwriting corpora.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::simulator::GroundTruth;
use crate::state_space::State;

/// Write every frame as `frame_0000.pgm`, `frame_0001.pgm`, ... into
/// `dir`.
pub fn write_frames(frames: &[Frame], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (t, frame) in frames.iter().enumerate() {
        frame.write_pgm(&dir.join(format!("frame_{t:04}.pgm")))?;
    }
    Ok(())
}

/// Ground-truth CSV: header plus one `frame,x,y,scale,orientation` row
/// per frame.
pub fn write_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "frame,x,y,scale,orientation")?;
    for (t, s) in truth.states.iter().enumerate() {
        writeln!(
            w,
            "{t},{:.6},{:.6},{:.6},{:.6}",
            s.position[0],
            s.position[1],
            s.scale(),
            s.orientation
        )?;
    }
    Ok(())
}

/// Read a CSV written by [`write_ground_truth`]. Velocities are not
/// stored; they come back as zero.
pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let bad = |line: usize, reason: &str| Error::BadFile {
        path: path.display().to_string(),
        reason: format!("line {line}: {reason}"),
    };
    let reader = BufReader::new(File::open(path)?);
    let mut states = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "frame,x,y,scale,orientation" {
                return Err(bad(1, "unexpected header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(i + 1, "expected 5 fields"));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        let x = parse(fields[1])?;
        let y = parse(fields[2])?;
        let scale = parse(fields[3])?;
        if scale.is_nan() || scale <= 0.0 {
            return Err(bad(i + 1, "scale must be positive"));
        }
        let orientation = parse(fields[4])?;
        states.push(
            State {
                position: [x, y],
                velocity: [0.0, 0.0],
                log_scale: scale.ln(),
                orientation,
            }
            .canonicalized(),
        );
    }
    if states.is_empty() {
        return Err(Error::BadFile {
            path: path.display().to_string(),
            reason: "no data rows".into(),
        });
    }
    Ok(GroundTruth { states })
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Load an IDX3 unsigned-byte image file (the handwriting-corpus
/// layout): big-endian magic `0x00000803`, then count, rows, cols, then
/// row-major pixels. Intensities are mapped to `[0, 1]`.
pub fn load_idx_images(path: &Path) -> Result<Vec<Frame>> {
    let bad = |reason: &str| Error::BadFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    let word = |i: usize| u32::from_be_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
    if word(0) != IDX_IMAGES_MAGIC {
        return Err(bad("wrong magic"));
    }
    let count = word(1) as usize;
    let rows = word(2) as usize;
    let cols = word(3) as usize;
    if rows == 0 || cols == 0 || rows > 4096 || cols > 4096 {
        return Err(bad("implausible image size"));
    }
    let mut frames = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| bad("truncated pixels"))?;
        let data = buf.iter().map(|&b| f64::from(b) / 255.0).collect();
        frames.push(Frame::from_data(cols, rows, data)?);
    }
    Ok(frames)
}
