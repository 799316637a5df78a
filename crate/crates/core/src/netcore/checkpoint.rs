//! Plain-text model checkpoints.
//!
//! ```text
//! smoothcert-checkpoint
//! format_version=1
//! activation=relu
//! loss=cross-entropy
//! layer_sizes=2,16,2
//! layer=0 rows=16 cols=2
//! weights
//! <16 lines of 2 values>
//! bias
//! <1 line of 16 values>
//! ...
//! end
//! ```
//!
//! Values use 17 significant digits so reading back is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, DenseNetwork, Layer, LossKind};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "smoothcert-checkpoint";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: DenseNetwork,
    /// Loss the network was trained with.
    pub loss: LossKind,
}

fn fmt_row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

impl Checkpoint {
    pub fn new(network: DenseNetwork, loss: LossKind) -> Self {
        Self { network, loss }
    }

    pub fn to_text(&self) -> String {
        let net = &self.network;
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let _ = writeln!(out, "format_version={FORMAT_VERSION}");
        let _ = writeln!(out, "activation={}", net.activation().name());
        let _ = writeln!(out, "loss={}", self.loss.name());
        let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "layer_sizes={}", sizes.join(","));
        for (i, layer) in net.layers().iter().enumerate() {
            let _ = writeln!(out, "layer={i} rows={} cols={}", layer.outputs, layer.inputs);
            out.push_str("weights\n");
            for row in layer.weights.chunks_exact(layer.inputs) {
                fmt_row(&mut out, row);
            }
            out.push_str("bias\n");
            fmt_row(&mut out, &layer.bias);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        // `#` lines carry free-form annotations such as a run's configuration
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.starts_with('#'));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of checkpoint, expected {what}"),
            })
        };
        let (line, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::MalformedHeader { line, message: format!("expected `{MAGIC}`") });
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (line, l) = next(key)?;
            match l.split_once('=') {
                Some((k, v)) if k == key => Ok((line, v.to_string())),
                _ => Err(Error::Parse { line, message: format!("expected `{key}=...`") }),
            }
        };
        let (line, version) = field("format_version")?;
        if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
            return Err(Error::Parse { line, message: format!("unsupported format_version {version}") });
        }
        let (line, act) = field("activation")?;
        let activation = Activation::parse(&act)
            .ok_or_else(|| Error::Parse { line, message: format!("unknown activation `{act}`") })?;
        let (line, loss) = field("loss")?;
        let loss = LossKind::parse(&loss)
            .ok_or_else(|| Error::Parse { line, message: format!("unknown loss `{loss}`") })?;
        let (line, sizes) = field("layer_sizes")?;
        let sizes: Vec<usize> = sizes
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line, message: format!("layer_sizes: {e}") })?;
        if sizes.len() < 2 {
            return Err(Error::Parse { line, message: "layer_sizes needs two or more entries".into() });
        }

        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, w) in sizes.windows(2).enumerate() {
            let (cols, rows) = (w[0], w[1]);
            let (line, header) = next("layer header")?;
            if header != format!("layer={i} rows={rows} cols={cols}") {
                return Err(Error::Parse { line, message: format!("bad layer header `{header}`") });
            }
            let (line, tag) = next("weights")?;
            if tag != "weights" {
                return Err(Error::Parse { line, message: "expected `weights`".into() });
            }
            let mut layer = Layer::zeros(cols, rows);
            for r in 0..rows {
                let (line, l) = next("weight row")?;
                let row = parse_row(line, l, cols)?;
                layer.weights[r * cols..(r + 1) * cols].copy_from_slice(&row);
            }
            let (line, tag) = next("bias")?;
            if tag != "bias" {
                return Err(Error::Parse { line, message: "expected `bias`".into() });
            }
            let (line, l) = next("bias row")?;
            layer.bias = parse_row(line, l, rows)?;
            layers.push(layer);
        }
        let (line, end) = next("end")?;
        if end != "end" {
            return Err(Error::Parse { line, message: "expected `end`".into() });
        }
        Ok(Self { network: DenseNetwork::from_layers(layers, activation)?, loss })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_row(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line, message: e.to_string() })?;
    if values.len() != expected {
        return Err(Error::RaggedRow { line, expected, got: values.len() });
    }
    Ok(values)
}
