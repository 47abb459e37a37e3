//! On-disk cache for enumerated balls.
//!
//! File layout: 8-byte magic, little-endian `u32` format version, `u32` header
//! length, a JSON header, then the binary payload. The header records the
//! group, generating set, center, radius and the SHA-256 of the payload.
//! Files live at `<dir>/<hash of group and center>/r<radius>.ball`, so a
//! request with a different generating set finds the file and fails with a
//! key mismatch rather than silently reusing it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balls::CayleyBall;
use crate::groups::{GeneratingSet, GroupElement, GroupSpec};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PHBALL\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    spec: GroupSpec,
    convention: String,
    generators: String,
    center: String,
    radius: u32,
    vertex_count: u64,
    payload_sha256: String,
}

fn key_dir(dir: &Path, spec: &GroupSpec, center: &GroupElement) -> PathBuf {
    let digest = Sha256::digest(format!("{}|{}", spec.text(), center).as_bytes());
    dir.join(hex::encode(&digest[..8]))
}

pub fn cache_path(dir: &Path, spec: &GroupSpec, center: &GroupElement, radius: u32) -> PathBuf {
    key_dir(dir, spec, center).join(format!("r{radius}.ball"))
}

fn encode_payload(ball: &CayleyBall) -> Vec<u8> {
    let (offsets, adj) = ball.adjacency_parts();
    let coord_len = ball.spec().coord_len();
    let mut out =
        Vec::with_capacity(ball.len() * (8 * coord_len + 12) + adj.len() * 4 + 8);
    for v in ball.vertices() {
        for c in v.coords() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for &d in ball.dists() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &o in offsets {
        out.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &j in adj {
        out.extend_from_slice(&j.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::InvalidInput("truncated cache payload".into()))?;
        self.pos += N;
        Ok(bytes.try_into().expect("slice length checked"))
    }
}

/// Writes the ball atomically (temp file, then rename) and returns its path.
pub fn store(ball: &CayleyBall, dir: &Path) -> Result<PathBuf> {
    let payload = encode_payload(ball);
    let header = Header {
        spec: ball.spec().clone(),
        convention: ball.generators().convention().to_string(),
        generators: ball.generators().text(),
        center: ball.center().to_string(),
        radius: ball.radius(),
        vertex_count: ball.len() as u64,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
    };
    let header = serde_json::to_vec(&header).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let path = cache_path(dir, ball.spec(), ball.center(), ball.radius());
    let parent = path.parent().expect("cache path has a parent");
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".r{}.ball.tmp.{}",
        ball.radius(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(MAGIC)?;
        f.write_all(&FORMAT_VERSION.to_le_bytes())?;
        f.write_all(&(header.len() as u32).to_le_bytes())?;
        f.write_all(&header)?;
        f.write_all(&payload)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn load(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    center: &GroupElement,
    radius: u32,
    dir: &Path,
) -> Result<CayleyBall> {
    let path = cache_path(dir, spec, center, radius);
    let bytes = fs::read(&path)?;
    let bad = || Error::InvalidInput(format!("{} is not a ball cache file", path.display()));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad());
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(16..16 + hlen).ok_or_else(bad)?;
    let payload = &bytes[16 + hlen..];
    let header: Header = serde_json::from_slice(header_bytes).map_err(|_| Error::ChecksumMismatch {
        path: path.display().to_string(),
    })?;

    let mismatch = |what: &str, want: String, got: String| {
        Error::KeyMismatch(format!("{what}: requested {want}, cached {got}"))
    };
    if &header.spec != spec {
        return Err(mismatch("group", spec.text(), header.spec.text()));
    }
    if header.convention != generators.convention() || header.generators != generators.text() {
        return Err(mismatch(
            "generators",
            generators.convention().to_string(),
            header.convention,
        ));
    }
    if header.center != center.to_string() {
        return Err(mismatch("center", center.to_string(), header.center));
    }
    if header.radius != radius {
        return Err(mismatch("radius", radius.to_string(), header.radius.to_string()));
    }
    if hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
        return Err(Error::ChecksumMismatch {
            path: path.display().to_string(),
        });
    }

    let n = header.vertex_count as usize;
    let coord_len = spec.coord_len();
    let mut r = Reader { buf: payload, pos: 0 };
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = Vec::with_capacity(coord_len);
        for _ in 0..coord_len {
            c.push(i64::from_le_bytes(r.take()?));
        }
        vertices.push(GroupElement::new(c));
    }
    let dist = (0..n)
        .map(|_| r.take().map(u32::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    let offsets = (0..=n)
        .map(|_| r.take().map(|b| u64::from_le_bytes(b) as usize))
        .collect::<Result<Vec<_>>>()?;
    let m = *offsets.last().unwrap_or(&0);
    let adj = (0..m)
        .map(|_| r.take().map(u32::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    CayleyBall::from_parts(
        spec.clone(),
        generators.clone(),
        center.clone(),
        radius,
        vertices,
        dist,
        offsets,
        adj,
    )
}

/// Loads the ball if a valid cache entry exists, otherwise enumerates and stores it.
/// A corrupt or mismatched entry is an error, never silently replaced.
pub fn load_or_enumerate(
    spec: &GroupSpec,
    generators: &GeneratingSet,
    center: &GroupElement,
    radius: u32,
    dir: &Path,
) -> Result<CayleyBall> {
    if cache_path(dir, spec, center, radius).exists() {
        return load(spec, generators, center, radius, dir);
    }
    let ball = CayleyBall::enumerate(spec, generators, center, radius)?;
    store(&ball, dir)?;
    Ok(ball)
}
