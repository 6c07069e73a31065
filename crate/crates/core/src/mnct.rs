//! Multi-link channel tensor and its binary file format.
//!
//! Layout (little endian):
//!
//! ```text
//! "MNCT" 0x01
//! u32 L, u32 n_links, u32 T, u32 Q
//! f64 f_c_hz, f64 delta_f_hz, f64 t_sys_s
//! u8 freq_convention
//! n_links x { u16 a, u16 b, T*Q x (f32 re, f32 im) }   time-major
//! ```
//!
//! `freq_convention` is a bit field: bit 0 set means the frequency axis is
//! baseband centered (`f_q = (q - floor(Q/2)) * delta_f`), bit 1 set means
//! reversed links are stored as complex conjugates of the forward link.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;

use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"MNCT\x01";
const HEADER_LEN: u64 = 5 + 16 + 24 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreqConvention {
    pub centered: bool,
    pub conjugate_reciprocity: bool,
}

impl Default for FreqConvention {
    fn default() -> Self {
        Self {
            centered: true,
            conjugate_reciprocity: true,
        }
    }
}

impl FreqConvention {
    pub fn to_byte(self) -> u8 {
        u8::from(self.centered) | (u8::from(self.conjugate_reciprocity) << 1)
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        (b & !0b11 == 0).then_some(Self {
            centered: b & 1 != 0,
            conjugate_reciprocity: b & 2 != 0,
        })
    }
}

/// Time/frequency sampling grid of a tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorGrid {
    /// Number of nodes of the sounder (L).
    pub nodes: u32,
    /// Time samples.
    pub t: usize,
    /// Frequency samples.
    pub q: usize,
    pub f_c: f64,
    pub delta_f: f64,
    pub t_sys: f64,
    pub convention: FreqConvention,
}

impl TensorGrid {
    /// Baseband frequency of subcarrier `q`, Hz.
    pub fn freq(&self, q: usize) -> f64 {
        if self.convention.centered {
            (q as f64 - (self.q / 2) as f64) * self.delta_f
        } else {
            q as f64 * self.delta_f
        }
    }

    pub fn duration(&self) -> f64 {
        self.t as f64 * self.t_sys
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.q == 0 {
            return Err(Error::Validation("tensor grid is empty".into()));
        }
        if !(self.f_c > 0.0 && self.delta_f > 0.0 && self.t_sys > 0.0) {
            return Err(Error::Validation("tensor grid spacings must be positive".into()));
        }
        if u32::try_from(self.t).is_err() || u32::try_from(self.q).is_err() {
            return Err(Error::Validation("tensor grid too large for the file format".into()));
        }
        Ok(())
    }
}

/// Sampled time-variant frequency responses `g[link][m][q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub grid: TensorGrid,
    pub links: Vec<(u16, u16)>,
    /// Per link, `T * Q` samples, time-major.
    pub data: Vec<Vec<Complex32>>,
}

impl ChannelTensor {
    pub fn zeros(grid: TensorGrid, links: Vec<(u16, u16)>) -> Result<Self> {
        grid.validate()?;
        if let Some(&(a, b)) = links.iter().find(|(a, b)| a == b) {
            return Err(Error::Validation(format!("link ({a}, {b}) connects a node to itself")));
        }
        let data = links.iter().map(|_| vec![Complex32::new(0.0, 0.0); grid.t * grid.q]).collect();
        Ok(Self { grid, links, data })
    }

    pub fn link_index(&self, a: u16, b: u16) -> Option<usize> {
        self.links.iter().position(|&l| l == (a, b))
    }

    pub fn snapshot(&self, link: usize, m: usize) -> &[Complex32] {
        let q = self.grid.q;
        &self.data[link][m * q..(m + 1) * q]
    }

    pub fn snapshot_mut(&mut self, link: usize, m: usize) -> &mut [Complex32] {
        let q = self.grid.q;
        &mut self.data[link][m * q..(m + 1) * q]
    }

    pub fn at(&self, link: usize, m: usize, q: usize) -> Complex32 {
        self.data[link][m * self.grid.q + q]
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let g = &self.grid;
        w.write_all(MAGIC)?;
        for v in [g.nodes, self.links.len() as u32, g.t as u32, g.q as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [g.f_c, g.delta_f, g.t_sys] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[g.convention.to_byte()])?;
        for (&(a, b), samples) in self.links.iter().zip(&self.data) {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
            let mut buf = Vec::with_capacity(samples.len() * 8);
            for s in samples {
                buf.extend_from_slice(&s.re.to_le_bytes());
                buf.extend_from_slice(&s.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = CountingReader {
            inner: BufReader::new(r),
            offset: 0,
        };
        let mut magic = [0u8; 5];
        r.fill(&mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "not an MNCT file (bad magic or version)".into(),
            });
        }
        let nodes = r.u32("node count")?;
        let n_links = r.u32("link count")? as usize;
        let t = r.u32("time sample count")? as usize;
        let q = r.u32("subcarrier count")? as usize;
        let f_c = r.f64("carrier frequency")?;
        let delta_f = r.f64("subcarrier spacing")?;
        let t_sys = r.f64("snapshot interval")?;
        let conv_offset = r.offset;
        let mut conv = [0u8; 1];
        r.fill(&mut conv, "frequency convention")?;
        let convention = FreqConvention::from_byte(conv[0]).ok_or_else(|| Error::Format {
            offset: conv_offset,
            message: format!("unknown frequency convention 0x{:02x}", conv[0]),
        })?;
        let grid = TensorGrid {
            nodes,
            t,
            q,
            f_c,
            delta_f,
            t_sys,
            convention,
        };
        grid.validate().map_err(|e| Error::Format {
            offset: 5,
            message: e.to_string(),
        })?;
        debug_assert_eq!(r.offset, HEADER_LEN);
        let mut links = Vec::with_capacity(n_links);
        let mut data = Vec::with_capacity(n_links);
        let mut buf = vec![0u8; q * 8];
        for li in 0..n_links {
            let link_offset = r.offset;
            let a = r.u16("link endpoint")?;
            let b = r.u16("link endpoint")?;
            if a == b {
                return Err(Error::Format {
                    offset: link_offset,
                    message: format!("link {li} connects node {a} to itself"),
                });
            }
            let mut samples = Vec::with_capacity(t * q);
            for _ in 0..t {
                let row_offset = r.offset;
                r.fill(&mut buf, "channel samples")?;
                for c in buf.chunks_exact(8) {
                    let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                    let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                    if !(re.is_finite() && im.is_finite()) {
                        return Err(Error::Format {
                            offset: row_offset,
                            message: "non-finite channel sample".into(),
                        });
                    }
                    samples.push(Complex32::new(re, im));
                }
            }
            links.push((a, b));
            data.push(samples);
        }
        let mut extra = [0u8; 1];
        if r.inner.read(&mut extra)? != 0 {
            return Err(Error::Format {
                offset: r.offset,
                message: "trailing bytes after the last link".into(),
            });
        }
        Ok(Self { grid, links, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut done = 0;
        while done < buf.len() {
            match self.inner.read(&mut buf[done..]) {
                Ok(0) => {
                    return Err(Error::Format {
                        offset: self.offset + done as u64,
                        message: format!("file truncated while reading {what}"),
                    })
                }
                Ok(n) => done += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.fill(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}
