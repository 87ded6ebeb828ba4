//! Network and training configuration, serialized as `key = value` lines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureSelection;
use crate::nn::{AdamConfig, DualConvKind};

/// Which convolution fills the `conv` slots of the layer list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    DualConvMax,
    DualConvInv,
    /// Neighbor-averaging convolution on the primal vertex graph; a control,
    /// not a dual-mesh operator. `d2p` entries are identities in this mode.
    PrimalMean,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::DualConvMax => "dualconvmax",
            OperatorKind::DualConvInv => "dualconvinv",
            OperatorKind::PrimalMean => "primalmean",
        }
    }

    pub fn dual_kind(self) -> Option<DualConvKind> {
        match self {
            OperatorKind::DualConvMax => Some(DualConvKind::Max),
            OperatorKind::DualConvInv => Some(DualConvKind::Inv),
            OperatorKind::PrimalMean => None,
        }
    }

    pub fn is_dual(self) -> bool {
        self.dual_kind().is_some()
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "dualconvmax" | "max" => Ok(OperatorKind::DualConvMax),
            "dualconvinv" | "inv" => Ok(OperatorKind::DualConvInv),
            "primalmean" | "primal" => Ok(OperatorKind::PrimalMean),
            other => Err(Error::Config(format!("unknown operator '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Linear(usize),
    Conv(usize),
    Dual2Primal,
    Dropout,
    /// Final linear layer of width N_T.
    Output,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Linear(k) => write!(f, "lin{k}"),
            LayerSpec::Conv(k) => write!(f, "conv{k}"),
            LayerSpec::Dual2Primal => f.write_str("d2p"),
            LayerSpec::Dropout => f.write_str("dropout"),
            LayerSpec::Output => f.write_str("out"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let width = |rest: &str| -> Result<usize> {
            rest.parse()
                .map_err(|_| Error::Config(format!("bad layer width in '{s}'")))
        };
        if let Some(rest) = s.strip_prefix("lin") {
            Ok(LayerSpec::Linear(width(rest)?))
        } else if let Some(rest) = s.strip_prefix("conv") {
            Ok(LayerSpec::Conv(width(rest)?))
        } else {
            match s.as_str() {
                "d2p" | "dual2primal" => Ok(LayerSpec::Dual2Primal),
                "dropout" | "drop" => Ok(LayerSpec::Dropout),
                "out" | "output" => Ok(LayerSpec::Output),
                _ => Err(Error::Config(format!("unknown layer '{s}'"))),
            }
        }
    }
}

pub fn parse_layers(s: &str) -> Result<Vec<LayerSpec>> {
    s.split([',', ' '])
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn format_layers(layers: &[LayerSpec]) -> String {
    layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

/// Lin(16) -> DualConv(32) -> DualConv(64) -> DualConv(128) -> Dual2Primal ->
/// Lin(256) -> Dropout -> Lin(N_T).
pub fn default_layers() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Linear(16),
        Conv(32),
        Conv(64),
        Conv(128),
        Dual2Primal,
        Linear(256),
        Dropout,
        Output,
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub operator: OperatorKind,
    pub layers: Vec<LayerSpec>,
    pub dropout: f64,
    pub features: FeatureSelection,
    /// N_T: number of reference vertices / labels.
    pub n_targets: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub bias: bool,
    /// Standardize each input channel per mesh.
    pub normalize_features: bool,
    /// Accumulate gradients over all training meshes before one step.
    pub accumulate: bool,
}

impl NetworkConfig {
    pub fn new(operator: OperatorKind, features: FeatureSelection, n_targets: usize) -> Self {
        Self {
            operator,
            layers: default_layers(),
            dropout: 0.5,
            features,
            n_targets,
            seed: 0,
            adam: AdamConfig::default(),
            epochs: 300,
            bias: true,
            normalize_features: false,
            accumulate: false,
        }
    }

    /// Checks the layer list: widths positive, exactly one `d2p` before the
    /// head, no `conv` after it, and a final layer of width N_T.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n_targets == 0 {
            return err("n_targets must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout rate {} not in [0, 1)", self.dropout));
        }
        let Some(first) = self.layers.first() else {
            return err("empty layer list".into());
        };
        if !matches!(first, LayerSpec::Linear(_) | LayerSpec::Conv(_)) {
            return err(format!("first layer must be lin or conv, found {first}"));
        }
        match self.layers.last() {
            Some(LayerSpec::Output) => {}
            Some(LayerSpec::Linear(k)) if *k == self.n_targets => {}
            Some(LayerSpec::Linear(k)) => {
                return err(format!(
                    "last layer width {k} does not match {} targets",
                    self.n_targets
                ))
            }
            Some(other) => return err(format!("last layer must be linear, found {other}")),
            None => unreachable!(),
        }
        let d2p: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == LayerSpec::Dual2Primal)
            .map(|(i, _)| i)
            .collect();
        if d2p.len() != 1 {
            return err(format!("expected exactly one d2p layer, found {}", d2p.len()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            match l {
                LayerSpec::Linear(0) | LayerSpec::Conv(0) => {
                    return err(format!("layer {i} ({l}) has zero width"))
                }
                LayerSpec::Conv(_) if i > d2p[0] => {
                    return err(format!("conv layer {i} after dual2primal"))
                }
                LayerSpec::Output if i + 1 != self.layers.len() => {
                    return err("'out' must be the last layer".into())
                }
                _ => {}
            }
        }
        if d2p[0] + 1 == self.layers.len() {
            return err("dual2primal cannot be the last layer".into());
        }
        if self.operator == OperatorKind::PrimalMean && self.features.has_dihedral() {
            return err("dihedral features need a dual operator".into());
        }
        if self.adam.lr <= 0.0 || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return err("invalid Adam hyperparameters".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("operator", self.operator.name().to_string());
        m.insert("layers", format_layers(&self.layers));
        m.insert("dropout", self.dropout.to_string());
        m.insert("features", self.features.to_string());
        m.insert("targets", self.n_targets.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("lr", self.adam.lr.to_string());
        m.insert("beta1", self.adam.beta1.to_string());
        m.insert("beta2", self.adam.beta2.to_string());
        m.insert("eps", self.adam.eps.to_string());
        m.insert("epochs", self.epochs.to_string());
        m.insert("bias", self.bias.to_string());
        m.insert("normalize", self.normalize_features.to_string());
        m.insert("accumulate", self.accumulate.to_string());
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses `key = value` text over `base`; unknown keys are rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let get = |key: &str| {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Config(format!("missing key '{key}'")))
        };
        let mut cfg = NetworkConfig::new(
            get("operator")?.parse()?,
            get("features")?.parse()?,
            parse_value("targets", get("targets")?)?,
        );
        for (k, v) in &kv {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "operator" => self.operator = value.parse()?,
            "layers" => self.layers = parse_layers(value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "features" => self.features = value.parse()?,
            "targets" => self.n_targets = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "lr" => self.adam.lr = parse_value(key, value)?,
            "beta1" => self.adam.beta1 = parse_value(key, value)?,
            "beta2" => self.adam.beta2 = parse_value(key, value)?,
            "eps" => self.adam.eps = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "bias" => self.bias = parse_value(key, value)?,
            "normalize" => self.normalize_features = parse_value(key, value)?,
            "accumulate" => self.accumulate = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> NetworkConfig {
        NetworkConfig::new(OperatorKind::DualConvMax, "xyz".parse().unwrap(), 10)
    }

    #[test]
    fn text_round_trip() {
        let mut c = base();
        c.adam.lr = 0.0123456789;
        c.dropout = 0.25;
        c.features = "normal,area,dihedral".parse().unwrap();
        c.bias = false;
        let back = NetworkConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn default_layers_validate() {
        assert!(base().validate().is_ok());
        assert_eq!(format_layers(&default_layers()), "lin16,conv32,conv64,conv128,d2p,lin256,dropout,out");
    }

    #[test]
    fn width_mismatches_are_config_errors() {
        let bad = [
            "lin16,conv32,d2p,lin9",
            "lin16,conv0,d2p,out",
            "lin16,d2p,conv8,out",
            "lin16,conv8,out",
            "d2p,lin4,out",
            "lin16,conv8,d2p,out,lin4",
            "lin16,conv8,d2p,d2p,out",
        ];
        for layers in bad {
            let mut c = base();
            c.layers = parse_layers(layers).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{layers}");
        }
        let mut c = base();
        c.layers = parse_layers("conv8,d2p,lin10").unwrap();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut c = base();
        assert!(c.apply_text("lr = 0.01\nmomentum = 3\n").is_err());
        assert_eq!(c.adam.lr, 0.01);
        assert!(c.apply_text("just words").is_err());
    }
}
