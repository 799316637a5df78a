//! Datasets: CSV and IDX loading, CSV writing, and a Gaussian-blob generator.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    /// Free-form tag describing where the rows came from.
    pub provenance: String,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Option<Vec<usize>>, provenance: impl Into<String>) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::RaggedRow { line: i + 1, expected: d, got: row.len() });
            }
        }
        if let Some(l) = &labels {
            crate::error::ensure_dim(features.len(), l.len())?;
        }
        Ok(Self { features, labels, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Labels, or an error naming the operation that needed them.
    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::invalid("labels", format!("dataset `{}` has no label column", self.provenance)))
    }

    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            provenance: self.provenance.clone(),
        }
    }

    pub fn without_labels(&self) -> Dataset {
        Dataset { labels: None, ..self.clone() }
    }

    /// Parses CSV text. The header is mandatory; a leading `label` column is
    /// optional and the remaining columns must be `f0..f{d-1}`. Blank lines and
    /// lines starting with `#` are skipped. With `classes` set, labels must lie
    /// in `[0, classes)`.
    pub fn from_csv_str(text: &str, classes: Option<usize>, provenance: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Empty("csv file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let labelled = cols.first() == Some(&"label");
        let feature_cols = &cols[usize::from(labelled)..];
        if feature_cols.is_empty() {
            return Err(Error::MalformedHeader { line: hline, message: "no feature columns".into() });
        }
        for (j, c) in feature_cols.iter().enumerate() {
            if *c != format!("f{j}") {
                return Err(Error::MalformedHeader {
                    line: hline,
                    message: format!("expected column `f{j}`, found `{c}`"),
                });
            }
        }

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, row) in lines {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::RaggedRow { line, expected: cols.len(), got: fields.len() });
            }
            let mut rest = &fields[..];
            if labelled {
                let label: usize = fields[0].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("label `{}` is not a non-negative integer", fields[0]),
                })?;
                if let Some(c) = classes.filter(|c| label >= *c) {
                    return Err(Error::LabelOutOfRange { line, label, classes: c });
                }
                labels.push(label);
                rest = &fields[1..];
            }
            let x = rest
                .iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse { line, message: format!("`{f}` is not a finite number") }),
                })
                .collect::<Result<Vec<f64>>>()?;
            features.push(x);
        }
        Dataset::new(features, labelled.then_some(labels), provenance)
    }

    pub fn load_csv(path: &Path, classes: Option<usize>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_csv_str(&text, classes, &path.display().to_string())
    }

    /// Loads an IDX image file and an optional IDX label file. Pixels are scaled to `[0, 1]`.
    pub fn load_idx(images: &Path, labels: Option<&Path>, classes: Option<usize>) -> Result<Self> {
        let features = parse_idx_images(&fs::read(images)?)?;
        let labels = match labels {
            Some(p) => {
                let l = parse_idx_labels(&fs::read(p)?)?;
                crate::error::ensure_dim(features.len(), l.len())?;
                if let Some(c) = classes {
                    if let Some((i, &bad)) = l.iter().enumerate().find(|(_, v)| **v >= c) {
                        return Err(Error::LabelOutOfRange { line: i + 1, label: bad, classes: c });
                    }
                }
                Some(l)
            }
            None => None,
        };
        Dataset::new(features, labels, images.display().to_string())
    }

    /// Writes CSV with 17 significant digits, so reading back is exact.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        if self.labels.is_some() {
            header.insert(0, "label".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, row) in self.features.iter().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            if let Some(l) = &self.labels {
                fields.insert(0, l[i].to_string());
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn idx_header(bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, &[u8])> {
    let header_len = 4 + 4 * dims;
    if bytes.len() < header_len {
        return Err(Error::MalformedHeader { line: 1, message: "truncated idx header".into() });
    }
    let word = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    if word(0) != magic {
        return Err(Error::MalformedHeader {
            line: 1,
            message: format!("idx magic {:#06x}, expected {magic:#06x}", word(0)),
        });
    }
    let shape: Vec<usize> = (0..dims).map(|k| word(4 + 4 * k) as usize).collect();
    let body = &bytes[header_len..];
    let expected: usize = shape.iter().product();
    if body.len() != expected {
        return Err(Error::MalformedHeader {
            line: 1,
            message: format!("idx body holds {} bytes, header promises {expected}", body.len()),
        });
    }
    Ok((shape, body))
}

fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let (shape, body) = idx_header(bytes, 0x0803, 3)?;
    let d = shape[1] * shape[2];
    if d == 0 {
        return Err(Error::Empty("idx images"));
    }
    Ok(body
        .chunks(d)
        .map(|px| px.iter().map(|&p| f64::from(p) / 255.0).collect())
        .collect())
}

fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, body) = idx_header(bytes, 0x0801, 1)?;
    Ok(body.iter().map(|&b| usize::from(b)).collect())
}

/// Gaussian blobs. Two classes sit at `±separation/2` along the diagonal;
/// more classes sit at `separation/2` along successive axes (alternating sign
/// once the axes run out). `shift` is added to every coordinate of every
/// point, emulating a transfer set drawn from a displaced distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct BlobConfig {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub spread: f64,
    pub shift: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self { classes: 2, dim: 2, per_class: 500, separation: 8.0, spread: 1.0, shift: 0.0 }
    }
}

impl BlobConfig {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let half = self.separation / 2.0;
        if self.classes == 2 {
            // unit diagonal scaled so the centers are `separation` apart
            let c = half / (self.dim as f64).sqrt();
            return vec![vec![-c; self.dim], vec![c; self.dim]];
        }
        (0..self.classes)
            .map(|k| {
                let mut c = vec![0.0; self.dim];
                let sign = if (k / self.dim).is_multiple_of(2) { 1.0 } else { -1.0 };
                c[k % self.dim] = sign * half;
                c
            })
            .collect()
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        if self.classes < 2 || self.dim == 0 || self.per_class == 0 {
            return Err(Error::invalid("blobs", "need at least two classes, one dimension and one point per class"));
        }
        if self.classes > 2 * self.dim {
            return Err(Error::invalid("classes", "at most two classes per dimension"));
        }
        if !(self.spread > 0.0) || !self.separation.is_finite() || !self.shift.is_finite() {
            return Err(Error::invalid("spread", "must be positive with finite separation and shift"));
        }
        let centers = self.centers();
        let mut features = Vec::with_capacity(self.classes * self.per_class);
        let mut labels = Vec::with_capacity(features.capacity());
        for _ in 0..self.per_class {
            for (k, c) in centers.iter().enumerate() {
                let x = c
                    .iter()
                    .map(|m| m + self.shift + self.spread * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                features.push(x);
                labels.push(k);
            }
        }
        Dataset::new(
            features,
            Some(labels),
            format!(
                "blobs classes={} dim={} separation={} spread={} shift={}",
                self.classes, self.dim, self.separation, self.spread, self.shift
            ),
        )
    }
}
