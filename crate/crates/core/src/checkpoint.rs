//! Versioned binary model container.
//!
//! Layout: the 7-byte magic `HDRGS1\0`, then length-prefixed sections, each a
//! 4-byte tag, a little-endian `u64` payload length and the payload:
//!
//! | tag    | payload                                                          |
//! |--------|------------------------------------------------------------------|
//! | `GAUS` | count `u64`, then 14 `f64` per Gaussian                          |
//! | `GRID` | domain, densities, leak slope, node count, 3 × nodes `f64`       |
//! | `SCAL` | `r`, `s` as `f64`                                                |
//! | `STAT` | phase `u8`, iteration `u64`, SHA-256 of the config JSON          |
//! | `CONF` | UTF-8 JSON of the training configuration                         |
//!
//! `GRID` is absent while the sigmoid tone mapper is active. All floats are
//! stored bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, Vector3};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exposure::ExposureScaler;
use crate::geometry::Gaussian3D;
use crate::model::HdrModel;
use crate::tone::{AsymmetricGrid, GridConfig, ToneMapper};

pub const MAGIC: &[u8; 7] = b"HDRGS1\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Coarse,
    Fine,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Coarse => "coarse",
            Phase::Fine => "fine",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub model: HdrModel,
    pub phase: Phase,
    pub iteration: u64,
    pub config_hash: [u8; 32],
    pub config_json: String,
}

pub fn config_hash(config_json: &str) -> [u8; 32] {
    Sha256::digest(config_json.as_bytes()).into()
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

impl ModelCheckpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();

        let mut gaus = Vec::with_capacity(8 + self.model.gaussians.len() * 14 * 8);
        gaus.extend_from_slice(&(self.model.gaussians.len() as u64).to_le_bytes());
        for g in &self.model.gaussians {
            let q = &g.rotation;
            let vals = [
                g.mean.x,
                g.mean.y,
                g.mean.z,
                g.log_scale.x,
                g.log_scale.y,
                g.log_scale.z,
                q.w,
                q.i,
                q.j,
                q.k,
                g.opacity_logit,
                g.radiance.x,
                g.radiance.y,
                g.radiance.z,
            ];
            vals.iter().for_each(|&v| put_f64(&mut gaus, v));
        }
        section(&mut out, b"GAUS", &gaus);

        if let ToneMapper::Grid(grid) = &self.model.tone {
            let c = grid.config();
            let mut buf = Vec::new();
            for v in [c.x_lo, c.x_mid, c.x_hi] {
                put_f64(&mut buf, v);
            }
            buf.extend_from_slice(&c.dense_density.to_le_bytes());
            buf.extend_from_slice(&c.sparse_density.to_le_bytes());
            put_f64(&mut buf, c.leak_beta);
            buf.extend_from_slice(&(grid.node_count() as u64).to_le_bytes());
            for ch in 0..3 {
                grid.values(ch).iter().for_each(|&v| put_f64(&mut buf, v));
            }
            section(&mut out, b"GRID", &buf);
        }

        let mut scal = Vec::new();
        put_f64(&mut scal, self.model.scaler.r);
        put_f64(&mut scal, self.model.scaler.s);
        section(&mut out, b"SCAL", &scal);

        let mut stat = vec![match self.phase {
            Phase::Coarse => 0u8,
            Phase::Fine => 1u8,
        }];
        stat.extend_from_slice(&self.iteration.to_le_bytes());
        stat.extend_from_slice(&self.config_hash);
        section(&mut out, b"STAT", &stat);

        section(&mut out, b"CONF", self.config_json.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut pos = MAGIC.len();
        let (mut gaus, mut grid, mut scal, mut stat, mut conf) = (None, None, None, None, None);
        while pos < bytes.len() {
            if bytes.len() - pos < 12 {
                return Err(Error::Checkpoint("truncated section header".into()));
            }
            let tag: [u8; 4] = bytes[pos..pos + 4].try_into().expect("4 bytes");
            let len = u64::from_le_bytes(bytes[pos + 4..pos + 12].try_into().expect("8 bytes"));
            pos += 12;
            let len = usize::try_from(len)
                .ok()
                .filter(|&l| l <= bytes.len() - pos)
                .ok_or_else(|| Error::Checkpoint(format!("section {} overruns the file", tag_name(&tag))))?;
            let payload = &bytes[pos..pos + len];
            pos += len;
            let slot = match &tag {
                b"GAUS" => &mut gaus,
                b"GRID" => &mut grid,
                b"SCAL" => &mut scal,
                b"STAT" => &mut stat,
                b"CONF" => &mut conf,
                _ => return Err(Error::Checkpoint(format!("unknown section {}", tag_name(&tag)))),
            };
            if slot.replace(payload).is_some() {
                return Err(Error::Checkpoint(format!("duplicate section {}", tag_name(&tag))));
            }
        }
        let missing = |t: &str| Error::Checkpoint(format!("missing section {t}"));
        let gaussians = parse_gaussians(gaus.ok_or_else(|| missing("GAUS"))?)?;
        let tone = match grid {
            Some(p) => ToneMapper::Grid(parse_grid(p)?),
            None => ToneMapper::Sigmoid,
        };
        let mut r = Reader::new(scal.ok_or_else(|| missing("SCAL"))?, "SCAL");
        let scaler = ExposureScaler {
            r: r.f64()?,
            s: r.f64()?,
        };
        r.finish()?;
        let mut r = Reader::new(stat.ok_or_else(|| missing("STAT"))?, "STAT");
        let phase = match r.take(1)?[0] {
            0 => Phase::Coarse,
            1 => Phase::Fine,
            p => return Err(Error::Checkpoint(format!("unknown phase marker {p}"))),
        };
        let iteration = r.u64()?;
        let stored_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        r.finish()?;
        let config_json = String::from_utf8(conf.ok_or_else(|| missing("CONF"))?.to_vec())
            .map_err(|_| Error::Checkpoint("config section is not UTF-8".into()))?;
        if config_hash(&config_json) != stored_hash {
            return Err(Error::Checkpoint("config hash does not match the stored config".into()));
        }
        if matches!(tone, ToneMapper::Sigmoid) != (phase == Phase::Coarse) {
            return Err(Error::Checkpoint("phase marker disagrees with the tone mapper".into()));
        }
        Ok(Self {
            model: HdrModel {
                gaussians,
                tone,
                scaler,
            },
            phase,
            iteration,
            config_hash: stored_hash,
            config_json,
        })
    }

    /// Writes to a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = path
            .file_name()
            .ok_or_else(|| Error::Checkpoint(format!("{} is not a file path", path.display())))?;
        let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        Self::from_bytes(&bytes)
    }
}

fn tag_name(tag: &[u8; 4]) -> String {
    String::from_utf8_lossy(tag).into_owned()
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], name: &'static str) -> Self {
        Self { buf, pos: 0, name }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("section {} is truncated", self.name)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!("trailing bytes in section {}", self.name)));
        }
        Ok(())
    }
}

fn parse_gaussians(p: &[u8]) -> Result<Vec<Gaussian3D>> {
    let mut r = Reader::new(p, "GAUS");
    let n = r.u64()? as usize;
    if n.checked_mul(14 * 8) != Some(p.len() - 8) {
        return Err(Error::Checkpoint(format!("GAUS section size does not match {n} gaussians")));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0.0; 14];
        for x in &mut v {
            *x = r.f64()?;
        }
        out.push(Gaussian3D {
            mean: Vector3::new(v[0], v[1], v[2]),
            log_scale: Vector3::new(v[3], v[4], v[5]),
            rotation: Quaternion::new(v[6], v[7], v[8], v[9]),
            opacity_logit: v[10],
            radiance: Vector3::new(v[11], v[12], v[13]),
        });
    }
    Ok(out)
}

fn parse_grid(p: &[u8]) -> Result<AsymmetricGrid> {
    let mut r = Reader::new(p, "GRID");
    let config = GridConfig {
        x_lo: r.f64()?,
        x_mid: r.f64()?,
        x_hi: r.f64()?,
        dense_density: r.u32()?,
        sparse_density: r.u32()?,
        leak_beta: r.f64()?,
    };
    let n = r.u64()? as usize;
    let mut values: [Vec<f64>; 3] = Default::default();
    for v in &mut values {
        *v = (0..n).map(|_| r.f64()).collect::<Result<_>>()?;
    }
    r.finish()?;
    let grid = AsymmetricGrid::from_values(config, values.clone())?;
    if grid.node_count() != n || (0..3).any(|c| grid.values(c) != values[c].as_slice()) {
        return Err(Error::Checkpoint("stored grid is inconsistent with its layout".into()));
    }
    Ok(grid)
}
