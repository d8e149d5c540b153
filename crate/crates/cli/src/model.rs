use std::f64::consts::PI;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::ValueEnum;
use mtsf::synthetic::{gen_connection, gen_eps_graph, gen_er, BlockModel, Skeleton, SyntheticConnection};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Er,
    Sbm,
    Dcsbm1,
    Dcsbm2,
    Eps,
}

/// Connection noise level: a number of radians, `pi/K`, or `weak` for
/// `pi / (2n)` on the generated graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Radians(f64),
    Weak,
}

impl Default for Eta {
    fn default() -> Self {
        Eta::Radians(0.0)
    }
}

impl FromStr for Eta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "weak" {
            return Ok(Eta::Weak);
        }
        let value = match s.strip_prefix("pi/") {
            Some(k) => k.parse::<f64>().map(|k| PI / k),
            None => s.parse::<f64>(),
        }
        .map_err(|_| format!("expected radians, `pi/K` or `weak`, got `{s}`"))?;
        Eta::radians(value)
    }
}

impl Eta {
    fn radians(value: f64) -> Result<Self, String> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(format!("eta must be finite and nonnegative, got {value}"));
        }
        Ok(Eta::Radians(value))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EtaRepr {
    Number(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match EtaRepr::deserialize(d)? {
            EtaRepr::Number(x) => Eta::radians(x),
            EtaRepr::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

fn default_n() -> usize {
    1000
}

fn default_degree() -> f64 {
    10.0
}

fn default_radius() -> f64 {
    0.1
}

fn default_scale() -> f64 {
    1.0
}

/// A random graph family with its parameters.
#[derive(Debug, Clone, clap::Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Nodes before the largest-component cleanup.
    #[arg(long, default_value_t = default_n())]
    #[serde(default = "default_n")]
    pub n: usize,
    /// Mean degree of the Erdős-Rényi model.
    #[arg(long, default_value_t = default_degree())]
    #[serde(default = "default_degree")]
    pub degree: f64,
    /// Connection radius of the epsilon-graph.
    #[arg(long, default_value_t = default_radius())]
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Multiplier on the block-model edge rates.
    #[arg(long, default_value_t = default_scale())]
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Connection noise: radians, `pi/K`, or `weak`.
    #[arg(long, default_value = "0")]
    #[serde(default)]
    pub eta: Eta,
}

impl ModelSpec {
    pub fn skeleton<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Skeleton> {
        let mut blocks = |m: BlockModel| {
            if !(self.scale > 0.0 && self.scale.is_finite()) {
                bail!("scale must be positive, got {}", self.scale);
            }
            Ok(m.scaled(self.scale).generate(rng)?)
        };
        match self.model {
            Model::Er => Ok(gen_er(self.n, self.degree, rng)?),
            Model::Sbm => blocks(BlockModel::sbm(self.n)),
            Model::Dcsbm1 => blocks(BlockModel::dcsbm1(self.n)),
            Model::Dcsbm2 => blocks(BlockModel::dcsbm2(self.n)),
            Model::Eps => Ok(gen_eps_graph(self.n, self.radius, rng)?),
        }
    }

    pub fn eta_for(&self, n_nodes: usize) -> f64 {
        match self.eta {
            Eta::Radians(x) => x,
            Eta::Weak => PI / (2.0 * n_nodes as f64),
        }
    }

    /// Skeleton and connection drawn in sequence from `rng`.
    pub fn instance<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Skeleton, SyntheticConnection)> {
        let skeleton = self.skeleton(rng)?;
        let connection = gen_connection(&skeleton, self.eta_for(skeleton.n_nodes), rng)?;
        Ok((skeleton, connection))
    }

    /// Bandwidth used when none is given: 2 for block models, 5 otherwise.
    pub fn default_bandlimit(&self) -> usize {
        match self.model {
            Model::Sbm | Model::Dcsbm1 | Model::Dcsbm2 => 2,
            Model::Er | Model::Eps => 5,
        }
    }
}
