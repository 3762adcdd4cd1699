//! JSON interchange formats: operators as {dims, re, im} grids, channels as
//! Kraus lists, superoperator matrices, or stochastic matrices, and the
//! expectation profiles consumed by the verification suite.
//!
//! Numbers are serialized with the shortest representation that round-trips
//! the underlying double exactly, so re-reading an emitted operator
//! reproduces it bit for bit.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::operator::{DimsSpec, Operator};

/// Raw complex matrix as separate real and imaginary grids (row-major).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_dmatrix(m: &DMatrix<Complex64>) -> Self {
        let re = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
            .collect();
        MatrixJson { re, im }
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<Complex64>> {
        let rows = self.re.len();
        if rows == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let cols = self.re[0].len();
        if self.im.len() != rows
            || self.re.iter().any(|r| r.len() != cols)
            || self.im.iter().any(|r| r.len() != cols)
        {
            return Err(Error::InvalidInput(
                "re/im grids must share one rectangular shape".into(),
            ));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

/// Operator interchange format: subsystem dims, optional block decomposition,
/// and row-major re/im grids. `metadata` carries auxiliary values attached by
/// tools (for example marginal self-check deviations) and is ignored on read.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_subsystem: Option<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl OperatorJson {
    pub fn from_operator(op: &Operator) -> Self {
        let m = MatrixJson::from_dmatrix(op.mat());
        let (blocks, block_subsystem) = match op.dims().blocks() {
            Some(b) => (Some(b.sizes.clone()), Some(b.subsystem)),
            None => (None, None),
        };
        OperatorJson {
            dims: op.dims().dims().to_vec(),
            blocks,
            block_subsystem,
            re: m.re,
            im: m.im,
            metadata: None,
        }
    }

    pub fn to_operator(&self) -> Result<Operator> {
        let m = MatrixJson {
            re: self.re.clone(),
            im: self.im.clone(),
        }
        .to_dmatrix()?;
        let mut dims = DimsSpec::new(self.dims.clone())?;
        if let Some(sizes) = &self.blocks {
            dims = dims.with_blocks(self.block_subsystem.unwrap_or(0), sizes.clone())?;
        }
        Operator::new(m, dims)
    }

    pub fn with_metadata(mut self, metadata: serde_json::Value) -> Self {
        self.metadata = Some(metadata);
        self
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson::from_operator(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(d)?;
        raw.to_operator().map_err(serde::de::Error::custom)
    }
}

/// Channel interchange format: declared dims plus exactly one presentation
/// (Kraus list, superoperator matrix, or column-stochastic matrix). Emitted
/// channels always carry the superoperator and keep the Kraus presentation
/// when one is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub superop: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<Vec<Vec<f64>>>,
}

impl ChannelJson {
    pub fn from_channel(ch: &Channel) -> Self {
        ChannelJson {
            in_dims: ch.in_dims().dims().to_vec(),
            out_dims: ch.out_dims().dims().to_vec(),
            kraus: ch
                .kraus()
                .map(|ks| ks.iter().map(MatrixJson::from_dmatrix).collect()),
            superop: Some(MatrixJson::from_dmatrix(ch.superop())),
            stochastic: None,
        }
    }

    pub fn to_channel(&self) -> Result<Channel> {
        let in_dims = DimsSpec::new(self.in_dims.clone())?;
        let out_dims = DimsSpec::new(self.out_dims.clone())?;
        if let Some(s) = &self.superop {
            return Channel::from_superop(s.to_dmatrix()?, in_dims, out_dims);
        }
        if let Some(ks) = &self.kraus {
            let ops = ks
                .iter()
                .map(|k| k.to_dmatrix())
                .collect::<Result<Vec<_>>>()?;
            return Channel::from_kraus(ops, in_dims, out_dims);
        }
        if let Some(p) = &self.stochastic {
            let ch = Channel::classical(p)?;
            if ch.in_dim() != in_dims.total_dim() || ch.out_dim() != out_dims.total_dim() {
                return Err(Error::DimensionMismatch(
                    "stochastic matrix shape disagrees with declared dims".into(),
                ));
            }
            return Ok(ch);
        }
        Err(Error::InvalidInput(
            "channel json needs one of kraus, superop, or stochastic".into(),
        ))
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson::from_channel(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ChannelJson::deserialize(d)?;
        raw.to_channel().map_err(serde::de::Error::custom)
    }
}

/// Expectation profile: axiom id -> "pass" | "fail". Axioms missing from the
/// profile are not gated.
pub type ExpectationProfile = BTreeMap<String, String>;

pub fn parse_operator(text: &str) -> Result<Operator> {
    let raw: OperatorJson = serde_json::from_str(text)?;
    raw.to_operator()
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    let raw: ChannelJson = serde_json::from_str(text)?;
    raw.to_channel()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_channel;
    use crate::operator::kron;

    #[test]
    fn operator_roundtrip_is_bit_exact() {
        let rho = crate::channel::random_state(3, 17).unwrap();
        let rho2 = kron(&rho, &crate::channel::random_state(2, 18).unwrap());
        for op in [rho, rho2] {
            let text = serde_json::to_string(&op).unwrap();
            let back: Operator = serde_json::from_str(&text).unwrap();
            assert_eq!(back.mat(), op.mat(), "bit-exact roundtrip");
            assert_eq!(back.dims(), op.dims());
        }
    }

    #[test]
    fn operator_json_blocks_roundtrip() {
        let spec = DimsSpec::scalar(3)
            .unwrap()
            .with_blocks(0, vec![2, 1])
            .unwrap();
        let op = Operator::identity(spec);
        let text = serde_json::to_string(&op).unwrap();
        let back: Operator = serde_json::from_str(&text).unwrap();
        assert_eq!(back.dims().blocks().unwrap().sizes, vec![2, 1]);
    }

    #[test]
    fn channel_roundtrip_preserves_superop() {
        let ch = random_channel(2, 3, 2, 5).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: Channel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.superop(), ch.superop(), "bit-exact superop");
        assert_eq!(back.is_tp(), ch.is_tp());
        assert_eq!(back.is_cp(), ch.is_cp());
    }

    #[test]
    fn stochastic_channel_json() {
        let text = r#"{"in_dims":[2],"out_dims":[2],"stochastic":[[0.9,0.2],[0.1,0.8]]}"#;
        let ch = parse_channel(text).unwrap();
        assert!(ch.is_tp());
        let rho = Operator::from_fn(DimsSpec::scalar(2).unwrap(), |i, j| {
            if i == j && i == 0 {
                Complex64::new(0.25, 0.0)
            } else if i == j {
                Complex64::new(0.75, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let out = ch.apply(&rho).unwrap();
        assert!((out.entry(0, 0).re - 0.375).abs() < 1e-15);
    }

    #[test]
    fn operator_metadata_is_ignored_on_read() {
        let text = r#"{"dims":[2],"re":[[1.0,0.0],[0.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]],"metadata":{"note":"x"}}"#;
        let op = parse_operator(text).unwrap();
        assert_eq!(op.side(), 2);
    }

    #[test]
    fn malformed_operator_errors() {
        let text = r#"{"dims":[2],"re":[[1.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(parse_operator(text).is_err());
        let text2 = r#"{"dims":[3],"re":[[1.0,0.0],[0.0,1.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(parse_operator(text2).is_err());
    }
}
