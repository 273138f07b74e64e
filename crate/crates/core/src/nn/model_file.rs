//! Binary model container: `LFNN`, version, then tagged sections of layer
//! stacks. Each stack lists its layer descriptors followed by the raw
//! little-endian f64 parameters in descriptor order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::layers::{BatchNorm2d, PRelu};
use super::{Conv2d, Layer, Padding, Stack};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"LFNN";
pub const MODEL_VERSION: u16 = 1;

const KIND_CONV: u8 = 1;
const KIND_BN: u8 = 2;
const KIND_PRELU: u8 = 3;
const KIND_SIGMOID: u8 = 4;
const KIND_SOFTPLUS: u8 = 5;
const KIND_GAP: u8 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub role: String,
    pub stacks: Vec<Stack>,
}

impl ModelSection {
    pub fn new(role: impl Into<String>, stacks: Vec<Stack>) -> Self {
        Self {
            role: role.into(),
            stacks,
        }
    }
}

fn descriptor(layer: &Layer) -> (u8, [u32; 4], u8, u8) {
    let d = |v: usize| v as u32;
    match layer {
        Layer::Conv(c) => (
            KIND_CONV,
            [d(c.out_channels()), d(c.in_channels()), d(c.kernel()), d(c.kernel())],
            c.padding().tag(),
            c.stride() as u8,
        ),
        Layer::BatchNorm(b) => (KIND_BN, [d(b.channels()), 1, 1, 1], 0, 1),
        Layer::PRelu(p) => (KIND_PRELU, [d(p.channels()), 1, 1, 1], 0, 1),
        Layer::Sigmoid => (KIND_SIGMOID, [1; 4], 0, 1),
        Layer::Softplus => (KIND_SOFTPLUS, [1; 4], 0, 1),
        Layer::GlobalAvgPool => (KIND_GAP, [1; 4], 0, 1),
    }
}

fn payload(layer: &Layer) -> Vec<&[f64]> {
    match layer {
        Layer::Conv(c) => vec![&c.weight.value, &c.bias.value],
        Layer::BatchNorm(b) => vec![&b.gamma.value, &b.beta.value, &b.running_mean, &b.running_var],
        Layer::PRelu(p) => vec![&p.slope.value],
        _ => Vec::new(),
    }
}

fn payload_mut(layer: &mut Layer) -> Vec<&mut Vec<f64>> {
    match layer {
        Layer::Conv(c) => vec![&mut c.weight.value, &mut c.bias.value],
        Layer::BatchNorm(b) => vec![
            &mut b.gamma.value,
            &mut b.beta.value,
            &mut b.running_mean,
            &mut b.running_var,
        ],
        Layer::PRelu(p) => vec![&mut p.slope.value],
        _ => Vec::new(),
    }
}

pub fn write_model<W: Write>(mut w: W, sections: &[ModelSection]) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(sections.len() as u16).to_le_bytes())?;
    for section in sections {
        let role = section.role.as_bytes();
        if role.len() > u8::MAX as usize {
            return Err(Error::Model(format!("role tag too long: {}", section.role)));
        }
        w.write_all(&[role.len() as u8])?;
        w.write_all(role)?;
        w.write_all(&(section.stacks.len() as u16).to_le_bytes())?;
        for stack in &section.stacks {
            w.write_all(&(stack.layers.len() as u32).to_le_bytes())?;
            for layer in &stack.layers {
                let (kind, dims, pad, stride) = descriptor(layer);
                w.write_all(&[kind])?;
                for d in dims {
                    w.write_all(&d.to_le_bytes())?;
                }
                w.write_all(&[pad, stride])?;
            }
            for layer in &stack.layers {
                for buf in payload(layer) {
                    for v in buf {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Input<R>(R);

impl<R: Read> Input<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|_| Error::Model("truncated model file".into()))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

fn layer_from(kind: u8, dims: [u32; 4], pad: u8, stride: u8) -> Result<Layer> {
    let [a, b, c, d] = dims.map(|v| v as usize);
    Ok(match kind {
        KIND_CONV => {
            if c != d {
                return Err(Error::Model(format!("non-square kernel {c}x{d}")));
            }
            Layer::Conv(
                Conv2d::zeroed(b, a, c, stride as usize, Padding::from_tag(pad)?)
                    .map_err(|e| Error::Model(e.to_string()))?,
            )
        }
        KIND_BN => Layer::BatchNorm(BatchNorm2d::new(a)),
        KIND_PRELU => Layer::PRelu(PRelu::new(a)),
        KIND_SIGMOID => Layer::Sigmoid,
        KIND_SOFTPLUS => Layer::Softplus,
        KIND_GAP => Layer::GlobalAvgPool,
        _ => return Err(Error::Model(format!("unknown layer kind {kind}"))),
    })
}

pub fn read_model<R: Read>(r: R) -> Result<Vec<ModelSection>> {
    let mut r = Input(r);
    if &r.bytes::<4>()? != MODEL_MAGIC {
        return Err(Error::Model("bad magic".into()));
    }
    let version = r.u16()?;
    if version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported model version {version}")));
    }
    let count = r.u16()?;
    let mut sections = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u8()? as usize;
        let mut role = vec![0u8; len];
        r.0.read_exact(&mut role)
            .map_err(|_| Error::Model("truncated model file".into()))?;
        let role = String::from_utf8(role).map_err(|_| Error::Model("role tag is not UTF-8".into()))?;
        let nstacks = r.u16()?;
        let mut stacks = Vec::with_capacity(nstacks as usize);
        for _ in 0..nstacks {
            let nlayers = r.u32()?;
            let mut layers = Vec::new();
            for _ in 0..nlayers {
                let kind = r.u8()?;
                let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?];
                let pad = r.u8()?;
                let stride = r.u8()?;
                layers.push(layer_from(kind, dims, pad, stride)?);
            }
            for layer in &mut layers {
                for buf in payload_mut(layer) {
                    for v in buf.iter_mut() {
                        *v = r.f64()?;
                    }
                }
            }
            stacks.push(Stack::new(layers));
        }
        sections.push(ModelSection { role, stacks });
    }
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        return Err(Error::Model("trailing bytes after model".into()));
    }
    Ok(sections)
}

pub fn save_model(path: &Path, sections: &[ModelSection]) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), sections)
}

pub fn load_model(path: &Path) -> Result<Vec<ModelSection>> {
    read_model(BufReader::new(File::open(path)?))
}

/// Finds the single section carrying `role`.
pub fn take_section(sections: &mut Vec<ModelSection>, role: &str) -> Result<ModelSection> {
    let idx = sections
        .iter()
        .position(|s| s.role == role)
        .ok_or_else(|| Error::Model(format!("no section tagged {role}")))?;
    Ok(sections.remove(idx))
}
