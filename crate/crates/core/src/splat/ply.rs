//! Binary little-endian splat PLY in the common 3DGS export layout:
//! `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`, all
//! float32. `f_rest` is stored channel-major (all red rest coefficients,
//! then green, then blue).

use std::collections::HashMap;

use super::{GaussianSplat, ShCoefficients, SplatSet};
use crate::transform::Vec3;
use nalgebra::{Quaternion, UnitQuaternion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlyError {
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("missing required property `{0}`")]
    MissingProperty(String),
    #[error("unsupported type `{ty}` for property `{name}` (only float is supported)")]
    UnsupportedType { name: String, ty: String },
    #[error("unsupported f_rest count {0} (expected 0, 9, 24 or 45)")]
    RestCount(usize),
    #[error("element count mismatch: header declares {declared} vertices ({expected} bytes from offset {offset}) but {found} bytes follow")]
    CountMismatch { declared: usize, expected: usize, found: usize, offset: usize },
    #[error("non-finite value in property `{property}` of vertex {vertex} at byte {offset}")]
    NonFinite { property: String, vertex: usize, offset: usize },
    #[error("zero-norm quaternion in vertex {vertex} at byte {offset}")]
    ZeroQuaternion { vertex: usize, offset: usize },
}

fn header_err(offset: usize, reason: impl Into<String>) -> PlyError {
    PlyError::Header { offset, reason: reason.into() }
}

struct Header {
    vertex_count: usize,
    properties: Vec<String>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut offset = 0usize;
    let next_line = |offset: &mut usize| -> Result<(usize, String), PlyError> {
        let start = *offset;
        let rel = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_err(start, "unterminated header line"))?;
        let line = std::str::from_utf8(&bytes[start..start + rel])
            .map_err(|_| header_err(start, "header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .to_string();
        *offset = start + rel + 1;
        Ok((start, line))
    };

    let (at, magic) = next_line(&mut offset)?;
    if magic != "ply" {
        return Err(header_err(at, "missing `ply` magic"));
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut properties = Vec::new();
    loop {
        let (at, line) = next_line(&mut offset)?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let fmt = words.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(header_err(at, format!("unsupported format `{fmt}`")));
                }
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = words.next().unwrap_or("");
                if name != "vertex" || vertex_count.is_some() {
                    return Err(header_err(at, format!("unsupported element `{name}`")));
                }
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(at, "bad vertex count"))?;
                vertex_count = Some(count);
                in_vertex = true;
            }
            Some("property") => {
                if !in_vertex {
                    return Err(header_err(at, "property outside an element"));
                }
                let ty = words.next().unwrap_or("");
                let name = words.next().ok_or_else(|| header_err(at, "property without a name"))?;
                if ty != "float" && ty != "float32" {
                    return Err(PlyError::UnsupportedType { name: name.to_string(), ty: ty.to_string() });
                }
                properties.push(name.to_string());
            }
            Some("end_header") => break,
            _ => return Err(header_err(at, format!("unexpected header line `{line}`"))),
        }
    }
    let vertex_count = vertex_count.ok_or_else(|| header_err(offset, "no vertex element"))?;
    Ok(Header { vertex_count, properties, body_offset: offset })
}

/// Settles a float32 quaternion onto a normalization fixpoint: the returned
/// float32 components re-encode the returned unit quaternion exactly. Both
/// the reader and the writer pass quaternions through here, which makes
/// parse/write an exact involution after one pass.
fn settle(q: [f32; 4]) -> Option<([f32; 4], UnitQuaternion<f64>)> {
    let as_f64 = |q: [f32; 4]| Quaternion::new(q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64);
    let mut seen = vec![q];
    loop {
        let cur = *seen.last().expect("non-empty");
        let raw = as_f64(cur);
        let norm = raw.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        let u = UnitQuaternion::from_quaternion(raw);
        let rounded = [u.w as f32, u.i as f32, u.j as f32, u.k as f32];
        if rounded == cur {
            return Some((cur, u));
        }
        if let Some(pos) = seen.iter().position(|s| *s == rounded) {
            // rounding cycles between neighbours; every member of the cycle
            // leads to the same representative, which is unit to float32
            // precision and kept verbatim
            let rep = *seen[pos..].iter().min_by_key(|s| s.map(f32::to_bits)).expect("non-empty cycle");
            return Some((rep, UnitQuaternion::new_unchecked(as_f64(rep))));
        }
        seen.push(rounded);
    }
}

pub fn parse_splat_ply(bytes: &[u8]) -> Result<SplatSet, PlyError> {
    let header = parse_header(bytes)?;
    let index: HashMap<&str, usize> = header.properties.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let need = |name: &str| -> Result<usize, PlyError> {
        index.get(name).copied().ok_or_else(|| PlyError::MissingProperty(name.to_string()))
    };
    let xyz = [need("x")?, need("y")?, need("z")?];
    let dc = [need("f_dc_0")?, need("f_dc_1")?, need("f_dc_2")?];
    let opacity = need("opacity")?;
    let scale = [need("scale_0")?, need("scale_1")?, need("scale_2")?];
    let rot = [need("rot_0")?, need("rot_1")?, need("rot_2")?, need("rot_3")?];

    let rest_count = header.properties.iter().filter(|p| p.starts_with("f_rest_")).count();
    let degree: u8 = match rest_count {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        n => return Err(PlyError::RestCount(n)),
    };
    let rest: Vec<usize> = (0..rest_count).map(|k| need(&format!("f_rest_{k}"))).collect::<Result<_, _>>()?;
    let per_channel = rest_count / 3;

    let stride = header.properties.len() * 4;
    let body = &bytes[header.body_offset..];
    let expected = header.vertex_count * stride;
    if body.len() != expected {
        return Err(PlyError::CountMismatch {
            declared: header.vertex_count,
            expected,
            found: body.len(),
            offset: header.body_offset,
        });
    }

    let mut splats = Vec::with_capacity(header.vertex_count);
    let mut row = vec![0f32; header.properties.len()];
    for v in 0..header.vertex_count {
        let base = v * stride;
        for (k, slot) in row.iter_mut().enumerate() {
            let at = base + 4 * k;
            let val = f32::from_le_bytes(body[at..at + 4].try_into().unwrap());
            if !val.is_finite() {
                return Err(PlyError::NonFinite {
                    property: header.properties[k].clone(),
                    vertex: v,
                    offset: header.body_offset + at,
                });
            }
            *slot = val;
        }
        let f = |i: usize| row[i] as f64;
        let mut coefficients = vec![[f(dc[0]), f(dc[1]), f(dc[2])]];
        for k in 0..per_channel {
            coefficients.push([f(rest[k]), f(rest[per_channel + k]), f(rest[2 * per_channel + k])]);
        }
        let (_, rotation) = settle([row[rot[0]], row[rot[1]], row[rot[2]], row[rot[3]]])
            .ok_or(PlyError::ZeroQuaternion { vertex: v, offset: header.body_offset + base + 4 * rot[0] })?;
        splats.push(GaussianSplat {
            mean: Vec3::new(f(xyz[0]), f(xyz[1]), f(xyz[2])),
            log_scales: Vec3::new(f(scale[0]), f(scale[1]), f(scale[2])),
            rotation,
            opacity_logit: f(opacity),
            sh: ShCoefficients { degree, coefficients },
        });
    }
    Ok(SplatSet::new(splats, ""))
}

/// Writes the canonical layout. The SH degree of the first splat determines
/// the `f_rest` count; lower-degree splats are zero-padded and higher ones
/// truncated, so mixed-degree sets should be avoided.
pub fn write_splat_ply(set: &SplatSet) -> Vec<u8> {
    let degree = set.splats.first().map(|g| g.sh.degree()).unwrap_or(0);
    let per_channel = ShCoefficients::count_for_degree(degree) - 1;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", set.len()));
    for name in ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"] {
        header.push_str(&format!("property float {name}\n"));
    }
    for k in 0..3 * per_channel {
        header.push_str(&format!("property float f_rest_{k}\n"));
    }
    for name in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("end_header\n");

    let floats_per_vertex = 17 + 3 * per_channel;
    let mut out = Vec::with_capacity(header.len() + set.len() * floats_per_vertex * 4);
    out.extend_from_slice(header.as_bytes());
    let mut push = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for g in &set.splats {
        for v in g.mean.iter() {
            push(*v);
        }
        for _ in 0..3 {
            push(0.0);
        }
        let coeffs = g.sh.coefficients();
        for c in 0..3 {
            push(coeffs[0][c]);
        }
        for c in 0..3 {
            for k in 1..=per_channel {
                push(coeffs.get(k).map(|t| t[c]).unwrap_or(0.0));
            }
        }
        push(g.opacity_logit);
        for v in g.log_scales.iter() {
            push(*v);
        }
        let q = [g.rotation.w, g.rotation.i, g.rotation.j, g.rotation.k].map(|v| v as f32);
        let (q, _) = settle(q).expect("unit quaternion");
        for v in q {
            push(v as f64);
        }
    }
    out
}
