//! Directory checkpoints: a manifest listing block kinds, hyperparameters
//! and shapes, plus one numkit text file per parameter tensor.
//!
//! Manifest layout (one record per line, `key=value` fields):
//!
//! ```text
//! stablenet-checkpoint 1
//! budget <real|none>
//! block <kind> key=value ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::io::{read_matrix, vector_as_column, write_matrix};
use crate::numkit::{Matrix, SpectralEstimate, Vector};

use super::{
    Activation, Block, ClampedScale, HamiltonianBlock, LiftLayer, LinearLayer, MlpLayer, Network,
    NonExpansiveBlock, ProjectLayer, ResidualBlock,
};

pub const MANIFEST_FILE: &str = "network.manifest";
const HEADER: &str = "stablenet-checkpoint 1";

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

struct Writer<'a> {
    dir: &'a Path,
    index: usize,
    line: String,
}

impl Writer<'_> {
    fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = write!(self.line, " {key}={value}");
    }

    fn matrix(&mut self, key: &str, m: &Matrix) -> Result<()> {
        let name = format!("block{:02}_{key}.txt", self.index);
        write_matrix(&self.dir.join(&name), m)?;
        self.field(key, name);
        Ok(())
    }

    fn vector(&mut self, key: &str, v: &Vector) -> Result<()> {
        self.matrix(key, &vector_as_column(v))
    }
}

/// Writes `net` into `dir` (created if missing).
pub fn save_checkpoint(net: &Network, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from(HEADER);
    manifest.push('\n');
    match net.lipschitz_budget {
        Some(b) => {
            let _ = writeln!(manifest, "budget {b:?}");
        }
        None => manifest.push_str("budget none\n"),
    }
    for (index, block) in net.blocks().iter().enumerate() {
        let mut w = Writer { dir, index, line: format!("block {}", block.kind()) };
        match block {
            Block::NonExpansive(b) => {
                w.field("total_time", format!("{:?}", b.total_time));
                w.field("n_steps", b.n_steps);
                w.field("inflation", format!("{:?}", b.inflation));
                w.field("spectral_norm", format!("{:?}", b.spectral.norm));
                w.matrix("weight", &b.weight)?;
                w.vector("bias", &b.bias)?;
                w.vector("spectral", &b.spectral.vector)?;
            }
            Block::Residual(b) => {
                w.field("h", format!("{:?}", b.h));
                w.field("activation", b.activation.name());
                w.matrix("a", &b.a)?;
                w.vector("bias", &b.bias)?;
                w.matrix("b", &b.b)?;
            }
            Block::Mlp(b) => {
                w.field("activation", b.activation.name());
                w.matrix("a", &b.a)?;
                w.vector("bias", &b.bias)?;
                w.matrix("b", &b.b)?;
            }
            Block::Hamiltonian(b) => {
                w.field("h", format!("{:?}", b.h));
                w.field("activation", b.activation.name());
                w.matrix("b", &b.b)?;
                w.vector("b_bias", &b.b_bias)?;
                w.matrix("c", &b.c)?;
                w.vector("c_bias", &b.c_bias)?;
            }
            Block::Linear(b) => {
                w.matrix("weight", &b.weight)?;
                w.vector("bias", &b.bias)?;
            }
            Block::Lift(b) => {
                w.field("in", b.in_dim);
                w.field("out", b.out_dim);
            }
            Block::Project(b) => {
                w.field("in", b.in_dim);
                w.field("out", b.out_dim);
            }
            Block::Scale(b) => {
                w.field("dim", b.dim);
                w.field("c", format!("{:?}", b.c));
                w.field("bound", format!("{:?}", b.bound));
            }
        }
        manifest.push_str(&w.line);
        manifest.push('\n');
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

struct Record<'a> {
    dir: &'a Path,
    line: usize,
    fields: BTreeMap<&'a str, &'a str>,
}

impl Record<'_> {
    fn raw(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(format!("manifest line {}: missing field {key:?}", self.line)))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| parse_err(format!("manifest line {}: bad value {raw:?} for {key}", self.line)))
    }

    fn activation(&self) -> Result<Activation> {
        Activation::parse(self.raw("activation")?)
    }

    fn matrix(&self, key: &str) -> Result<Matrix> {
        read_matrix(&self.dir.join(self.raw(key)?))
    }

    fn vector(&self, key: &str) -> Result<Vector> {
        let m = self.matrix(key)?;
        if m.cols() != 1 {
            return Err(parse_err(format!("{key}: expected a column vector, got {:?}", m.shape())));
        }
        Ok(Vector::from(m.as_slice()))
    }
}

fn parse_block(rec: &Record<'_>, kind: &str) -> Result<Block> {
    Ok(match kind {
        "nonexpansive" => {
            let weight = rec.matrix("weight")?;
            let bias = rec.vector("bias")?;
            let vector = rec.vector("spectral")?;
            if bias.len() != weight.rows() || vector.len() != weight.cols() {
                return Err(parse_err("non-expansive block tensors have inconsistent shapes"));
            }
            let total_time: f64 = rec.num("total_time")?;
            let n_steps: usize = rec.num("n_steps")?;
            if !(total_time > 0.0) || n_steps == 0 {
                return Err(parse_err("non-expansive block needs T > 0 and n_steps >= 1"));
            }
            NonExpansiveBlock {
                weight,
                bias,
                total_time,
                spectral: SpectralEstimate { vector, norm: rec.num("spectral_norm")? },
                n_steps,
                inflation: rec.num("inflation")?,
            }
            .into()
        }
        "residual" => ResidualBlock::from_parts(
            rec.matrix("a")?,
            rec.matrix("b")?,
            rec.vector("bias")?,
            rec.num("h")?,
            rec.activation()?,
        )?
        .into(),
        "mlp" => MlpLayer::from_parts(
            rec.matrix("a")?,
            rec.matrix("b")?,
            rec.vector("bias")?,
            rec.activation()?,
        )?
        .into(),
        "hamiltonian" => HamiltonianBlock::from_parts(
            rec.matrix("b")?,
            rec.matrix("c")?,
            rec.vector("b_bias")?,
            rec.vector("c_bias")?,
            rec.num("h")?,
            rec.activation()?,
        )?
        .into(),
        "linear" => LinearLayer::from_parts(rec.matrix("weight")?, rec.vector("bias")?)?.into(),
        "lift" => LiftLayer::new(rec.num("in")?, rec.num("out")?)?.into(),
        "project" => ProjectLayer::new(rec.num("in")?, rec.num("out")?)?.into(),
        "scale" => ClampedScale::new(rec.num("dim")?, rec.num("c")?, rec.num("bound")?)?.into(),
        other => return Err(parse_err(format!("manifest line {}: unknown block {other:?}", rec.line))),
    })
}

/// Reads a network written by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<Network> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == HEADER => {}
        _ => return Err(parse_err("not a stablenet checkpoint manifest")),
    }
    let budget = match lines.next() {
        Some((_, l)) => match l.trim().strip_prefix("budget ") {
            Some("none") => None,
            Some(v) => Some(v.parse::<f64>().map_err(|_| parse_err(format!("bad budget {v:?}")))?),
            None => return Err(parse_err("manifest line 2 must be the budget")),
        },
        None => return Err(parse_err("manifest ends before the budget line")),
    };
    let mut blocks = Vec::new();
    for (i, line) in lines {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("block") {
            return Err(parse_err(format!("manifest line {}: expected a block record", i + 1)));
        }
        let kind = tokens
            .next()
            .ok_or_else(|| parse_err(format!("manifest line {}: missing block kind", i + 1)))?;
        let mut fields = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| parse_err(format!("manifest line {}: bad field {tok:?}", i + 1)))?;
            fields.insert(k, v);
        }
        let rec = Record { dir, line: i + 1, fields };
        blocks.push(parse_block(&rec, kind)?);
    }
    let mut net = Network::new(blocks)?;
    net.lipschitz_budget = budget;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vector, seeded};

    #[test]
    fn round_trip_every_kind() {
        let mut rng = seeded(3);
        let net = Network::new(vec![
            LiftLayer::new(2, 4).unwrap().into(),
            NonExpansiveBlock::new(&mut rng, 4, 5, 1.0).unwrap().into(),
            ResidualBlock::new(&mut rng, 4, 3, 0.2, Activation::Relu).into(),
            HamiltonianBlock::new(&mut rng, 2, 0.5, Activation::Tanh).into(),
            MlpLayer::new(&mut rng, 4, 6, 4, Activation::Tanh).into(),
            ProjectLayer::new(4, 3).unwrap().into(),
            LinearLayer::new(&mut rng, 3, 2).into(),
            ClampedScale::new(2, 0.7, 2.0).unwrap().into(),
        ])
        .unwrap()
        .with_budget(2.0);
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&net, dir.path()).unwrap();
        let loaded = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded, net);
        let x = normal_vector(&mut rng, 2);
        assert_eq!(loaded.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn missing_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
        fs::write(dir.path().join(MANIFEST_FILE), "something else\n").unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Parse(_))));
    }
}
