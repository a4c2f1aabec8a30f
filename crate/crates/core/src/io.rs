//! Flow, coefficient and snapshot files.
//!
//! CSV is the canonical format. Every CSV file starts with a one-line
//! `#splineflow-<kind> v1 key=value ...` header; further lines starting with
//! `#` are comments (used to embed the run configuration) and are ignored by
//! the readers except for the `#options` line of coefficient files.
//!
//! Binary layouts (all little-endian):
//!
//! * flow: `SFLW`, version `u32`, `M u64`, `S u64`, `dims u8`, then
//!   `M·S·dims` `f64` values ordered trajectory, sample, coordinate.
//! * coefficients: `SCOF`, version `u32`, `M u64`, `N u64`, `dims u8`,
//!   convention `u8` (0 = bezier-A, 1 = paper-literal), raw `u8`,
//!   unnormalized `u8`, alpha `f64`, beta `f64`, then `3N·dims·M` rows of four
//!   `f64` ordered group, segment, dimension, trajectory.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::batch_sparse::CoeffPlane;
use crate::error::{Error, Result};
use crate::evaluator::Snapshot;
use crate::flow_model::Flow;
use crate::pipeline::CoeffSet;
use crate::spline_kernel::{BlendParams, FifthElement};
use crate::Point;

pub const FLOW_MAGIC: &[u8; 4] = b"SFLW";
pub const COEFF_MAGIC: &[u8; 4] = b"SCOF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Bin,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" => Ok(Format::Bin),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

fn write_comments<W: Write + ?Sized>(w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "#{line}")?;
        }
    }
    Ok(())
}

/// Parse `#splineflow-<kind> v1 k=v ...` into its key-value map.
fn parse_header(line: &str, kind: &str) -> Result<HashMap<String, String>> {
    let mut parts = line.split_whitespace();
    let tag = format!("#splineflow-{kind}");
    if parts.next() != Some(tag.as_str()) {
        return Err(Error::parse(1, format!("expected '{tag}' header")));
    }
    match parts.next() {
        Some("v1") => {}
        Some(v) => return Err(Error::parse(1, format!("unsupported version '{v}'"))),
        None => return Err(Error::parse(1, "missing version")),
    }
    parts
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(1, format!("malformed header field '{kv}'")))
        })
        .collect()
}

fn header_value<T: std::str::FromStr>(h: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = h
        .get(key)
        .ok_or_else(|| Error::parse(1, format!("header is missing '{key}'")))?;
    raw.parse()
        .map_err(|_| Error::parse(1, format!("header field {key}='{raw}' is not valid")))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let raw = field.ok_or_else(|| Error::parse(line, format!("missing column '{what}'")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("column '{what}' has invalid value '{raw}'")))
}

/// Header fields, comment lines without the `#`, and numbered data rows.
type ParsedText = (HashMap<String, String>, Vec<String>, Vec<(usize, String)>);

/// Data rows (1-based line number, fields) after the header, skipping `#`
/// comments and blank lines.
fn data_rows<R: BufRead>(reader: R, kind: &str) -> Result<ParsedText> {
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(l) => l?,
        None => return Err(Error::parse(1, "empty file")),
    };
    let header = parse_header(first.trim_end(), kind)?;
    let mut comments = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(c) = trimmed.strip_prefix('#') {
            comments.push(c.to_string());
        } else {
            rows.push((i + 2, trimmed.to_string()));
        }
    }
    Ok((header, comments, rows))
}

fn fmt_dt(dt: Option<f64>) -> String {
    dt.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn write_flow_csv<W: Write + ?Sized>(
    w: &mut W,
    flow: &Flow,
    comments: &[String],
) -> Result<()> {
    writeln!(
        w,
        "#splineflow-flow v1 M={} S={} dims={} dt={}",
        flow.m(),
        flow.s(),
        flow.dims(),
        fmt_dt(flow.dt())
    )?;
    write_comments(w, comments)?;
    for (i, traj) in flow.trajectories().iter().enumerate() {
        for (j, p) in traj.iter().enumerate() {
            writeln!(w, "{i},{j},{},{},{}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}

pub fn read_flow_csv<R: BufRead>(r: R) -> Result<Flow> {
    let (h, _, rows) = data_rows(r, "flow")?;
    let m: usize = header_value(&h, "M")?;
    let s: usize = header_value(&h, "S")?;
    let dims: u8 = header_value(&h, "dims")?;
    let dt = match h.get("dt").map(String::as_str) {
        None | Some("none") => None,
        Some(_) => Some(header_value::<f64>(&h, "dt")?),
    };
    if m == 0 || s == 0 {
        return Err(Error::parse(1, "M and S must be positive"));
    }
    let mut trajectories: Vec<Vec<Option<Point>>> = vec![vec![None; s]; m];
    for (line, row) in &rows {
        let mut f = row.split(',');
        let i: usize = parse_field(f.next(), *line, "traj_id")?;
        let j: usize = parse_field(f.next(), *line, "point_idx")?;
        let p = [
            parse_field(f.next(), *line, "x")?,
            parse_field(f.next(), *line, "y")?,
            parse_field(f.next(), *line, "z")?,
        ];
        if f.next().is_some() {
            return Err(Error::parse(*line, "too many columns"));
        }
        let slot = trajectories
            .get_mut(i)
            .and_then(|t| t.get_mut(j))
            .ok_or_else(|| {
                Error::parse(*line, format!("sample ({i}, {j}) outside M={m}, S={s}"))
            })?;
        if slot.replace(p).is_some() {
            return Err(Error::parse(*line, format!("duplicate sample ({i}, {j})")));
        }
    }
    let trajectories = trajectories
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            t.into_iter()
                .enumerate()
                .map(|(j, p)| {
                    p.ok_or_else(|| {
                        Error::IncompleteInput(format!("flow file lacks sample ({i}, {j})"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Flow::new(trajectories, dims, dt)
}

pub fn write_flow_bin<W: Write + ?Sized>(w: &mut W, flow: &Flow) -> Result<()> {
    w.write_all(FLOW_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(flow.m() as u64).to_le_bytes())?;
    w.write_all(&(flow.s() as u64).to_le_bytes())?;
    w.write_all(&[flow.dims()])?;
    let dims = flow.dims() as usize;
    for traj in flow.trajectories() {
        for p in traj {
            for c in &p[..dims] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

struct BinReader<R> {
    inner: R,
    offset: usize,
}

impl<R: Read> BinReader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::parse(
                    0,
                    format!("truncated file at byte {} reading {what}", self.offset),
                )
            } else {
                Error::Io(e)
            }
        })?;
        self.offset += N;
        Ok(buf)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>("magic")?;
        if &got != expected {
            return Err(Error::parse(0, format!("bad magic {got:?}")));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            return Err(Error::parse(0, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn at_eof(&mut self) -> Result<bool> {
        let mut probe = [0u8; 1];
        Ok(self.inner.read(&mut probe)? == 0)
    }
}

/// Binary flows do not carry the sample interval; it reads back as `None`.
pub fn read_flow_bin<R: Read>(r: R) -> Result<Flow> {
    let mut r = BinReader {
        inner: r,
        offset: 0,
    };
    r.magic(FLOW_MAGIC)?;
    let m = r.u64("M")? as usize;
    let s = r.u64("S")? as usize;
    let dims = r.u8("dims")?;
    if dims != 2 && dims != 3 {
        return Err(Error::parse(0, format!("dims must be 2 or 3, got {dims}")));
    }
    let mut trajectories = Vec::with_capacity(m);
    for _ in 0..m {
        let mut traj = Vec::with_capacity(s);
        for _ in 0..s {
            let mut p = [0.0; 3];
            for c in p.iter_mut().take(dims as usize) {
                *c = r.f64("coordinate")?;
            }
            traj.push(p);
        }
        trajectories.push(traj);
    }
    if !r.at_eof()? {
        return Err(Error::parse(0, "trailing bytes after flow data"));
    }
    Flow::new(trajectories, dims, None)
}

pub fn write_coeffs_csv<W: Write + ?Sized>(
    w: &mut W,
    set: &CoeffSet,
    comments: &[String],
) -> Result<()> {
    writeln!(
        w,
        "#splineflow-coeffs v1 M={} N={} dims={} conv={} alpha={} beta={}",
        set.m(),
        set.n_groups(),
        set.dims(),
        set.convention,
        set.blend.alpha(),
        set.blend.beta()
    )?;
    writeln!(
        w,
        "#options raw={} unnormalized={}",
        set.raw,
        set.blend.is_unnormalized()
    )?;
    write_comments(w, comments)?;
    for plane in set.planes() {
        for (i, [a, b, c, d]) in plane.rows.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{a},{b},{c},{d}",
                plane.group_index, plane.k, plane.dim
            )?;
        }
    }
    Ok(())
}

fn blend_from(alpha: f64, beta: f64, unnormalized: bool) -> Result<BlendParams> {
    if unnormalized {
        BlendParams::unnormalized(alpha, beta)
    } else {
        BlendParams::new(alpha, beta)
    }
}

/// (group, segment, dimension)
type PlaneKey = (usize, u8, usize);

pub fn read_coeffs_csv<R: BufRead>(r: R) -> Result<CoeffSet> {
    let (h, comments, rows) = data_rows(r, "coeffs")?;
    let m: usize = header_value(&h, "M")?;
    let n: usize = header_value(&h, "N")?;
    let dims: u8 = header_value(&h, "dims")?;
    let conv: FifthElement = header_value::<String>(&h, "conv")?
        .parse()
        .map_err(|_| Error::parse(1, "unknown convention"))?;
    let alpha: f64 = header_value(&h, "alpha")?;
    let beta: f64 = header_value(&h, "beta")?;
    let mut raw = false;
    let mut unnormalized = false;
    for c in &comments {
        if let Some(opts) = c.strip_prefix("options ") {
            for kv in opts.split_whitespace() {
                match kv.split_once('=') {
                    Some(("raw", v)) => raw = v == "true",
                    Some(("unnormalized", v)) => unnormalized = v == "true",
                    _ => {}
                }
            }
        }
    }
    if m == 0 || n == 0 || !(dims == 2 || dims == 3) {
        return Err(Error::parse(1, "header has invalid M, N or dims"));
    }
    let blend =
        blend_from(alpha, beta, unnormalized).map_err(|e| Error::parse(1, e.to_string()))?;
    let mut planes: HashMap<PlaneKey, Vec<Option<[f64; 4]>>> = HashMap::new();
    for (line, row) in &rows {
        let mut f = row.split(',');
        let i: usize = parse_field(f.next(), *line, "traj_id")?;
        let g: usize = parse_field(f.next(), *line, "group_idx")?;
        let k: u8 = parse_field(f.next(), *line, "segment_k")?;
        let d: usize = parse_field(f.next(), *line, "dim")?;
        let c = [
            parse_field(f.next(), *line, "a")?,
            parse_field(f.next(), *line, "b")?,
            parse_field(f.next(), *line, "c")?,
            parse_field(f.next(), *line, "d")?,
        ];
        if f.next().is_some() {
            return Err(Error::parse(*line, "too many columns"));
        }
        if i >= m || g >= n || !(1..=3).contains(&k) || d >= dims as usize {
            return Err(Error::parse(
                *line,
                format!("row ({i}, {g}, {k}, {d}) outside M={m}, N={n}, dims={dims}"),
            ));
        }
        let rows = planes.entry((g, k, d)).or_insert_with(|| vec![None; m]);
        if rows[i].replace(c).is_some() {
            return Err(Error::parse(
                *line,
                format!("duplicate row ({i}, {g}, {k}, {d})"),
            ));
        }
    }
    let planes = planes
        .into_iter()
        .map(|((g, k, d), rows)| {
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    r.ok_or_else(|| {
                        Error::IncompleteInput(format!(
                            "missing row {i} of plane (group {g}, segment {k}, dim {d})"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CoeffPlane {
                group_index: g,
                k,
                dim: d,
                rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CoeffSet::from_planes(m, n, dims, conv, blend, raw, planes)
}

pub fn write_coeffs_bin<W: Write + ?Sized>(w: &mut W, set: &CoeffSet) -> Result<()> {
    w.write_all(COEFF_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(set.m() as u64).to_le_bytes())?;
    w.write_all(&(set.n_groups() as u64).to_le_bytes())?;
    let conv = match set.convention {
        FifthElement::BezierA => 0u8,
        FifthElement::PaperLiteral => 1u8,
    };
    w.write_all(&[
        set.dims(),
        conv,
        u8::from(set.raw),
        u8::from(set.blend.is_unnormalized()),
    ])?;
    w.write_all(&set.blend.alpha().to_le_bytes())?;
    w.write_all(&set.blend.beta().to_le_bytes())?;
    for plane in set.planes() {
        for row in &plane.rows {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_coeffs_bin<R: Read>(r: R) -> Result<CoeffSet> {
    let mut r = BinReader {
        inner: r,
        offset: 0,
    };
    r.magic(COEFF_MAGIC)?;
    let m = r.u64("M")? as usize;
    let n = r.u64("N")? as usize;
    let dims = r.u8("dims")?;
    let conv = match r.u8("convention")? {
        0 => FifthElement::BezierA,
        1 => FifthElement::PaperLiteral,
        other => return Err(Error::parse(0, format!("unknown convention code {other}"))),
    };
    let raw = r.u8("raw")? != 0;
    let unnormalized = r.u8("unnormalized")? != 0;
    let alpha = r.f64("alpha")?;
    let beta = r.f64("beta")?;
    if m == 0 || n == 0 || !(dims == 2 || dims == 3) {
        return Err(Error::parse(0, "invalid M, N or dims"));
    }
    let blend =
        blend_from(alpha, beta, unnormalized).map_err(|e| Error::parse(0, e.to_string()))?;
    let mut planes = Vec::with_capacity(3 * n * dims as usize);
    for g in 0..n {
        for k in 1..=3u8 {
            for d in 0..dims as usize {
                let mut rows = Vec::with_capacity(m);
                for _ in 0..m {
                    rows.push([r.f64("a")?, r.f64("b")?, r.f64("c")?, r.f64("d")?]);
                }
                planes.push(CoeffPlane {
                    group_index: g,
                    k,
                    dim: d,
                    rows,
                });
            }
        }
    }
    if !r.at_eof()? {
        return Err(Error::parse(0, "trailing bytes after coefficient data"));
    }
    CoeffSet::from_planes(m, n, dims, conv, blend, raw, planes)
}

pub fn write_snapshot_csv<W: Write + ?Sized>(
    w: &mut W,
    snap: &Snapshot,
    comments: &[String],
) -> Result<()> {
    writeln!(
        w,
        "#splineflow-snap v1 M={} points={} dims={} V={}",
        snap.m(),
        snap.points_per_trajectory(),
        snap.dims(),
        snap.v()
    )?;
    write_comments(w, comments)?;
    for i in 0..snap.m() {
        for (j, p) in snap.trajectory(i).iter().enumerate() {
            writeln!(w, "{i},{j},{},{},{}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}

pub fn read_snapshot_csv<R: BufRead>(r: R) -> Result<Snapshot> {
    let (h, _, rows) = data_rows(r, "snap")?;
    let m: usize = header_value(&h, "M")?;
    let per: usize = header_value(&h, "points")?;
    let dims: u8 = header_value(&h, "dims")?;
    let v: usize = header_value(&h, "V")?;
    if m == 0 || v == 0 || per < 1 || !(per - 1).is_multiple_of(3 * v) {
        return Err(Error::parse(
            1,
            format!("points={per} is not 3NV+1 for V={v}"),
        ));
    }
    let n = (per - 1) / (3 * v);
    let mut points = vec![None; m * per];
    for (line, row) in &rows {
        let mut f = row.split(',');
        let i: usize = parse_field(f.next(), *line, "traj_id")?;
        let j: usize = parse_field(f.next(), *line, "sample_idx")?;
        let p: Point = [
            parse_field(f.next(), *line, "x")?,
            parse_field(f.next(), *line, "y")?,
            parse_field(f.next(), *line, "z")?,
        ];
        if i >= m || j >= per {
            return Err(Error::parse(
                *line,
                format!("sample ({i}, {j}) out of range"),
            ));
        }
        if points[i * per + j].replace(p).is_some() {
            return Err(Error::parse(*line, format!("duplicate sample ({i}, {j})")));
        }
    }
    let points = points
        .into_iter()
        .enumerate()
        .map(|(idx, p)| {
            p.ok_or_else(|| Error::IncompleteInput(format!("snapshot lacks sample {idx}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Snapshot::new(m, dims, v, n, points)
}

fn sniff<P: AsRef<Path>>(path: P, magic: &[u8; 4]) -> Result<bool> {
    let mut buf = [0u8; 4];
    let mut f = File::open(path)?;
    let n = f.read(&mut buf)?;
    Ok(n == 4 && &buf == magic)
}

/// Read a flow file, detecting binary files by their magic bytes.
pub fn read_flow_path<P: AsRef<Path>>(path: P) -> Result<Flow> {
    if sniff(&path, FLOW_MAGIC)? {
        read_flow_bin(BufReader::new(File::open(path)?))
    } else {
        read_flow_csv(BufReader::new(File::open(path)?))
    }
}

pub fn write_flow_path<P: AsRef<Path>>(
    path: P,
    flow: &Flow,
    format: Format,
    comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_flow_csv(&mut w, flow, comments)?,
        Format::Bin => write_flow_bin(&mut w, flow)?,
    }
    w.flush()?;
    Ok(())
}

pub fn read_coeffs_path<P: AsRef<Path>>(path: P) -> Result<CoeffSet> {
    if sniff(&path, COEFF_MAGIC)? {
        read_coeffs_bin(BufReader::new(File::open(path)?))
    } else {
        read_coeffs_csv(BufReader::new(File::open(path)?))
    }
}

pub fn write_coeffs_path<P: AsRef<Path>>(
    path: P,
    set: &CoeffSet,
    format: Format,
    comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_coeffs_csv(&mut w, set, comments)?,
        Format::Bin => write_coeffs_bin(&mut w, set)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot_path<P: AsRef<Path>>(
    path: P,
    snap: &Snapshot,
    comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot_csv(&mut w, snap, comments)?;
    w.flush()?;
    Ok(())
}

/// Paired reference and reconstructed polylines for external plotting:
/// `series,traj_id,sample_idx,x,y,z` with `series` in {truth, spline}.
pub fn write_paired_polylines<W: Write>(
    w: &mut W,
    pairs: &[(Vec<Point>, Vec<Point>)],
    comments: &[String],
) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "series,traj_id,sample_idx,x,y,z")?;
    for (i, (truth, spline)) in pairs.iter().enumerate() {
        for (series, line) in [("truth", truth), ("spline", spline)] {
            for (j, p) in line.iter().enumerate() {
                writeln!(w, "{series},{i},{j},{},{},{}", p[0], p[1], p[2])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_model::{generate_flow, FlowField};
    use crate::pipeline::{fit_flow, FitOptions};

    fn sample_flow() -> Flow {
        let mut f = FlowField::vortex(3.0, 2.0);
        f.jitter = 0.3;
        f.seed = 9;
        generate_flow(&f, 3, 7, 0.37).unwrap()
    }

    #[test]
    fn flow_csv_header_and_rows() {
        let flow = generate_flow(&FlowField::uniform(1.0), 1, 4, 1.0).unwrap();
        let mut buf = Vec::new();
        write_flow_csv(&mut buf, &flow, &["config {}".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "#splineflow-flow v1 M=1 S=4 dims=2 dt=1");
        assert_eq!(lines[1], "#config {}");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[3], "0,1,1,0,0");
    }

    #[test]
    fn flow_round_trips() {
        let flow = sample_flow();
        let mut buf = Vec::new();
        write_flow_csv(&mut buf, &flow, &[]).unwrap();
        assert_eq!(read_flow_csv(buf.as_slice()).unwrap(), flow);
        let mut bin = Vec::new();
        write_flow_bin(&mut bin, &flow).unwrap();
        assert_eq!(&bin[..4], b"SFLW");
        assert_eq!(bin.len(), 4 + 4 + 8 + 8 + 1 + 3 * 7 * 2 * 8);
        let back = read_flow_bin(bin.as_slice()).unwrap();
        assert_eq!(back.trajectories(), flow.trajectories());
        assert_eq!(back.dt(), None);
    }

    #[test]
    fn coeff_round_trips() {
        let flow = sample_flow();
        let opts = FitOptions {
            convention: FifthElement::PaperLiteral,
            blend: BlendParams::new(0.25, 0.75).unwrap(),
            ..FitOptions::default()
        };
        let set = fit_flow(&flow, &opts).unwrap();
        let mut buf = Vec::new();
        write_coeffs_csv(&mut buf, &set, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "#splineflow-coeffs v1 M=3 N=2 dims=2 conv=paper-literal alpha=0.25 beta=0.75\n"
        ));
        assert_eq!(read_coeffs_csv(buf.as_slice()).unwrap(), set);
        let mut bin = Vec::new();
        write_coeffs_bin(&mut bin, &set).unwrap();
        assert_eq!(read_coeffs_bin(bin.as_slice()).unwrap(), set);
    }

    #[test]
    fn snapshot_round_trips() {
        let set = fit_flow(&sample_flow(), &FitOptions::default()).unwrap();
        let snap = crate::evaluator::assemble_snapshot(&set, 4).unwrap();
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &snap, &[]).unwrap();
        assert!(String::from_utf8_lossy(&buf)
            .starts_with("#splineflow-snap v1 M=3 points=25 dims=2 V=4\n"));
        assert_eq!(read_snapshot_csv(buf.as_slice()).unwrap(), snap);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_header = "#splineflow-flw v1 M=1 S=4 dims=2 dt=1\n";
        assert!(matches!(
            read_flow_csv(bad_header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_row = "#splineflow-flow v1 M=1 S=4 dims=2 dt=1\n0,0,0,0,0\n0,1,x,0,0\n";
        assert!(matches!(
            read_flow_csv(bad_row.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        let short = "#splineflow-flow v1 M=1 S=4 dims=2 dt=1\n0,0,0,0,0\n";
        assert!(matches!(
            read_flow_csv(short.as_bytes()),
            Err(Error::IncompleteInput(_))
        ));
        let dup = "#splineflow-flow v1 M=1 S=4 dims=2 dt=1\n0,0,0,0,0\n0,0,0,0,0\n";
        assert!(matches!(
            read_flow_csv(dup.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read_flow_bin(&b"SFLX"[..]),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            read_flow_bin(&b"SFLW\x01\x00"[..]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn coefficient_file_missing_plane() {
        let set = fit_flow(&sample_flow(), &FitOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_coeffs_csv(&mut buf, &set, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let kept: String = text
            .lines()
            .filter(|l| !l.contains(",1,3,1,"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            read_coeffs_csv(kept.as_bytes()),
            Err(Error::IncompleteInput(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_is_value_exact(
                coords in prop::collection::vec(prop::array::uniform3(prop::num::f64::NORMAL), 8)
            ) {
                let traj: Vec<Point> = coords;
                let flow = Flow::new(vec![traj[..4].to_vec(), traj[4..].to_vec()], 3, Some(0.1)).unwrap();
                let mut buf = Vec::new();
                write_flow_csv(&mut buf, &flow, &[]).unwrap();
                let back = read_flow_csv(buf.as_slice()).unwrap();
                for (a, b) in back.trajectories().iter().flatten().zip(flow.trajectories().iter().flatten()) {
                    for d in 0..3 {
                        prop_assert_eq!(a[d].to_bits(), b[d].to_bits());
                    }
                }
            }
        }
    }
}
