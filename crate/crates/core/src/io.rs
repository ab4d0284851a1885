//! File formats: correspondence CSV, RSFLOW flow fields, binary PNM images,
//! key-value motion files and benchmark CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::bench::BenchmarkRecord;
use crate::error::{Error, Result};
use crate::geometry::{Correspondence, MotionEstimate, MotionModel};
use crate::rectify::{DepthMap, FlowField, OcclusionMask, Raster};

pub const CORRESPONDENCE_HEADER: &str = "u1,v1,u2,v2";
pub const FLOW_MAGIC: &str = "RSFLOW";

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(bytes)?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| parse_err(0, 0, format!("not UTF-8: {e}")))
}

// --- correspondences -------------------------------------------------------

pub fn format_correspondences(corrs: &[Correspondence]) -> String {
    let mut s = String::with_capacity(32 * (corrs.len() + 1));
    s.push_str(CORRESPONDENCE_HEADER);
    s.push('\n');
    for c in corrs {
        // Display prints the shortest representation that parses back exactly
        s.push_str(&format!("{},{},{},{}\n", c.first.u, c.first.v, c.second.u, c.second.v));
    }
    s
}

/// Lines starting with `#` are comments. The header is optional.
pub fn parse_correspondences(text: &str) -> Result<Vec<Correspondence>> {
    Ok(parse_rows::<4>(text, CORRESPONDENCE_HEADER)?
        .into_iter()
        .map(|v| Correspondence::from_coords(v[0], v[1], v[2], v[3]))
        .collect())
}

/// Rows of `N` finite numbers with an optional header line and `#` comments.
fn parse_rows<const N: usize>(text: &str, header: &str) -> Result<Vec<[f64; N]>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        if !seen_content && line.replace(' ', "") == header {
            seen_content = true;
            continue;
        }
        seen_content = true;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N {
            return Err(parse_err(lineno, fields.len().min(N) + 1, format!("expected {N} fields, found {}", fields.len())));
        }
        let mut v = [0.0; N];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(lineno, k + 1, format!("not a finite number: {:?}", f.trim())))?;
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub const POINTS_HEADER: &str = "x,y,z";

/// Point cloud as `x,y,z` rows in camera 1's frame, same rules as
/// correspondence files.
pub fn parse_points(text: &str) -> Result<Vec<Vector3<f64>>> {
    Ok(parse_rows::<3>(text, POINTS_HEADER)?.into_iter().map(Vector3::from).collect())
}

pub fn read_points(path: &Path) -> Result<Vec<Vector3<f64>>> {
    parse_points(&read_text(path)?)
}

pub fn write_correspondences(path: &Path, corrs: &[Correspondence]) -> Result<()> {
    write_file(path, format_correspondences(corrs).as_bytes())
}

pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence>> {
    parse_correspondences(&read_text(path)?)
}

/// One `0`/`1` per line.
pub fn write_mask(path: &Path, mask: &[bool]) -> Result<()> {
    let s: String = mask.iter().map(|b| if *b { "1\n" } else { "0\n" }).collect();
    write_file(path, s.as_bytes())
}

pub fn read_mask(path: &Path) -> Result<Vec<bool>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(parse_err(i + 1, 1, format!("expected 0 or 1, found {other:?}"))),
        })
        .collect()
}

// --- flow ------------------------------------------------------------------

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = format!("{FLOW_MAGIC} {} {}\n", flow.width, flow.height).into_bytes();
    out.reserve(flow.data.len() * 8);
    for f in &flow.data {
        let f = if f[0].is_finite() && f[1].is_finite() { *f } else { [f32::NAN; 2] };
        out.extend_from_slice(&f[0].to_le_bytes());
        out.extend_from_slice(&f[1].to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or(Error::BadMagic)?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::BadMagic)?;
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some(FLOW_MAGIC) {
        return Err(Error::BadMagic);
    }
    let mut dim = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::CorruptHeader(format!("bad {what} in {header:?}")))
    };
    let (width, height) = (dim("width")?, dim("height")?);
    if parts.next().is_some() {
        return Err(Error::CorruptHeader(format!("trailing fields in {header:?}")));
    }
    let payload = &bytes[nl + 1..];
    let expected = width * height * 8;
    if payload.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::CorruptHeader(format!(
            "{} bytes of trailing data",
            payload.len() - expected
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    Ok(FlowField { width, height, data })
}

pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    write_file(path, &encode_flow(flow))
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    decode_flow(&read_file(path)?)
}

// --- images ----------------------------------------------------------------

/// Reads the next header token, skipping whitespace and `#` comments.
fn pnm_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::CorruptHeader("unexpected end of header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::UnsupportedFormat("not a PNM file".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        b'1'..=b'4' | b'7' => {
            return Err(Error::UnsupportedFormat(format!(
                "P{} (only binary P5/P6 are supported)",
                bytes[1] as char
            )))
        }
        _ => return Err(Error::UnsupportedFormat("unknown PNM variant".into())),
    };
    let mut pos = 2;
    let mut num = |what: &str| -> Result<usize> {
        let tok = pnm_token(bytes, &mut pos)?;
        tok.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::CorruptHeader(format!("bad {what}: {tok:?}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 && maxval != 65535 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval}")));
    }
    // exactly one whitespace byte before the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::CorruptHeader("missing separator after maxval".into()));
    }
    pos += 1;
    let bps = if maxval == 255 { 1 } else { 2 };
    let n = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < n * bps {
        return Err(Error::TruncatedData {
            expected: n * bps,
            found: payload.len(),
        });
    }
    let scale = 1.0 / maxval as f32;
    let data = if bps == 1 {
        payload[..n].iter().map(|b| *b as f32 * scale).collect()
    } else {
        payload[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 * scale)
            .collect()
    };
    Raster::from_data(width, height, channels, data)
}

/// Invalid pixels are written as zero.
pub fn encode_pnm(img: &Raster, sixteen_bit: bool) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let maxval: u32 = if sixteen_bit { 65535 } else { 255 };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width, img.height).into_bytes();
    for (i, v) in img.data.iter().enumerate() {
        let s = if img.valid[i / img.channels] { *v } else { 0.0 };
        let q = (s.clamp(0.0, 1.0) * maxval as f32).round() as u32;
        if sixteen_bit {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    out
}

pub fn read_image(path: &Path) -> Result<Raster> {
    decode_pnm(&read_file(path)?)
}

pub fn write_image(path: &Path, img: &Raster) -> Result<()> {
    write_file(path, &encode_pnm(img, false))
}

/// Depth as a 16-bit graymap scaled so that `max_depth` maps to white;
/// invalid pixels are black.
pub fn write_depth_image(path: &Path, depth: &DepthMap, max_depth: f64) -> Result<()> {
    let data: Vec<f32> = depth
        .depth
        .iter()
        .map(|d| if *d > 0.0 { (d / max_depth).min(1.0) as f32 } else { 0.0 })
        .collect();
    let mut r = Raster::from_data(depth.width, depth.height, 1, data)?;
    r.valid = depth.depth.iter().map(|d| *d > 0.0).collect();
    write_file(path, &encode_pnm(&r, true))
}

/// Binary mask as a graymap, `true` white.
pub fn write_bool_image(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    let data = mask.iter().map(|a| if *a { 1.0 } else { 0.0 }).collect();
    write_file(path, &encode_pnm(&Raster::from_data(width, height, 1, data)?, false))
}

/// Allowed pixels white.
pub fn write_mask_image(path: &Path, mask: &OcclusionMask) -> Result<()> {
    write_bool_image(path, mask.width, mask.height, &mask.allowed)
}

/// Non-zero pixels of a graymap.
pub fn read_bool_image(path: &Path) -> Result<Vec<bool>> {
    let img = read_image(path)?;
    if img.channels != 1 {
        return Err(Error::UnsupportedFormat("mask must be a graymap".into()));
    }
    Ok(img.data.iter().map(|v| *v > 0.0).collect())
}

// --- motion ----------------------------------------------------------------

pub fn format_motion(m: &MotionEstimate) -> String {
    let v = |x: &Vector3<f64>| format!("{:.16e} {:.16e} {:.16e}", x.x, x.y, x.z);
    format!(
        "model {}\nomega {}\nt {}\nscale_known {}\n",
        m.model.tag(),
        v(&m.omega),
        v(&m.t),
        m.scale_known
    )
}

/// Key-value lines. `#` comments and unknown keys are skipped.
pub fn parse_motion(text: &str) -> Result<MotionEstimate> {
    let (mut model, mut omega, mut t, mut scale) = (None, None, None, None);
    let vec3 = |line: usize, fields: &[&str]| -> Result<Vector3<f64>> {
        if fields.len() != 3 {
            return Err(parse_err(line, 2, format!("expected 3 values, found {}", fields.len())));
        }
        let mut v = Vector3::zeros();
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(line, k + 2, format!("not a finite number: {f:?}")))?;
        }
        Ok(v)
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = i + 1;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        match fields[0] {
            "model" => {
                let tag = fields.get(1).ok_or_else(|| parse_err(n, 2, "missing model tag"))?;
                model = Some(MotionModel::from_tag(tag).ok_or_else(|| parse_err(n, 2, format!("unknown model {tag:?}")))?);
            }
            "omega" => omega = Some(vec3(n, &fields[1..])?),
            "t" => t = Some(vec3(n, &fields[1..])?),
            "scale_known" => {
                scale = Some(match fields.get(1) {
                    Some(&"true") => true,
                    Some(&"false") => false,
                    _ => return Err(parse_err(n, 2, "expected true or false")),
                })
            }
            _ => {}
        }
    }
    let missing = |k: &str| parse_err(0, 0, format!("missing key {k}"));
    Ok(MotionEstimate {
        model: model.ok_or_else(|| missing("model"))?,
        omega: omega.ok_or_else(|| missing("omega"))?,
        t: t.ok_or_else(|| missing("t"))?,
        scale_known: scale.ok_or_else(|| missing("scale_known"))?,
    })
}

/// `comments` are written first as `# ` lines.
pub fn write_motion(path: &Path, m: &MotionEstimate, comments: &[String]) -> Result<()> {
    let mut s: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    s.push_str(&format_motion(m));
    write_file(path, s.as_bytes())
}

pub fn read_motion(path: &Path) -> Result<MotionEstimate> {
    parse_motion(&read_text(path)?)
}

// --- benchmark -------------------------------------------------------------

/// Metadata as leading `# key=value` lines, then the fixed header and rows.
pub fn format_benchmark(records: &[BenchmarkRecord], metadata: &[(String, String)]) -> String {
    let mut s: String = metadata.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
    s.push_str(BenchmarkRecord::HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != BenchmarkRecord::HEADER {
                return Err(parse_err(i + 1, 1, "unexpected benchmark header"));
            }
            header = true;
            continue;
        }
        out.push(BenchmarkRecord::from_csv(line).ok_or_else(|| parse_err(i + 1, 1, "malformed benchmark row"))?);
    }
    if !header {
        return Err(Error::EmptyFile);
    }
    Ok(out)
}

pub fn write_benchmark(path: &Path, records: &[BenchmarkRecord], metadata: &[(String, String)]) -> Result<()> {
    write_file(path, format_benchmark(records, metadata).as_bytes())
}

pub fn read_benchmark(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    parse_benchmark(&read_text(path)?)
}
