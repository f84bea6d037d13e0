//! Model selection and the `family:key=value,...` model-string grammar.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelParseError {
    #[error("unknown model family '{0}' (expected qh, qre, aqre, levelk, ch or nash)")]
    UnknownFamily(String),
    #[error("model '{family}' does not take parameter '{key}'")]
    UnknownKey { family: String, key: String },
    #[error("model '{family}' is missing parameter '{key}'")]
    MissingKey { family: String, key: String },
    #[error("parameter '{key}' given more than once")]
    DuplicateKey { key: String },
    #[error("cannot parse value '{value}' for '{key}'")]
    BadValue { key: String, value: String },
    #[error("malformed parameter list '{0}' (expected key=value pairs separated by commas)")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelFamily {
    QuantalHierarchy,
    LevelK,
    CognitiveHierarchy,
    QRE,
    AgentQRE,
    Nash,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 6] = [
        ModelFamily::QuantalHierarchy,
        ModelFamily::LevelK,
        ModelFamily::CognitiveHierarchy,
        ModelFamily::QRE,
        ModelFamily::AgentQRE,
        ModelFamily::Nash,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ModelFamily::QuantalHierarchy => "qh",
            ModelFamily::LevelK => "levelk",
            ModelFamily::CognitiveHierarchy => "ch",
            ModelFamily::QRE => "qre",
            ModelFamily::AgentQRE => "aqre",
            ModelFamily::Nash => "nash",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelFamily::QuantalHierarchy => "Quantal Hierarchy",
            ModelFamily::LevelK => "Level-k",
            ModelFamily::CognitiveHierarchy => "Cognitive Hierarchy",
            ModelFamily::QRE => "QRE",
            ModelFamily::AgentQRE => "Agent QRE",
            ModelFamily::Nash => "Nash",
        }
    }

    /// Parameter names, in canonical order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            ModelFamily::QuantalHierarchy => &["beta", "gamma", "epsilon"],
            ModelFamily::LevelK => &["k"],
            ModelFamily::CognitiveHierarchy => &["tau"],
            ModelFamily::QRE | ModelFamily::AgentQRE => &["lambda"],
            ModelFamily::Nash => &[],
        }
    }

    /// Usage line for help output.
    pub fn usage(self) -> &'static str {
        match self {
            ModelFamily::QuantalHierarchy => "qh:beta=<b>,gamma=<g>[,epsilon=<e>]",
            ModelFamily::LevelK => "levelk:k=<int>",
            ModelFamily::CognitiveHierarchy => "ch:tau=<t>",
            ModelFamily::QRE => "qre:lambda=<l>",
            ModelFamily::AgentQRE => "aqre:lambda=<l>",
            ModelFamily::Nash => "nash",
        }
    }

    /// The five families compared by default (on trees `qre` is solved in
    /// agent form).
    pub fn default_comparison() -> [ModelFamily; 5] {
        [
            ModelFamily::QuantalHierarchy,
            ModelFamily::LevelK,
            ModelFamily::CognitiveHierarchy,
            ModelFamily::QRE,
            ModelFamily::Nash,
        ]
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelFamily {
    type Err = ModelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.key() == s.trim())
            .ok_or_else(|| ModelParseError::UnknownFamily(s.to_string()))
    }
}

/// A fully parameterized model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelSpec {
    QuantalHierarchy { beta: f64, gamma: f64, epsilon: f64 },
    QRE { lambda: f64 },
    AgentQRE { lambda: f64 },
    LevelK { k: usize },
    CognitiveHierarchy { tau: f64 },
    Nash,
}

impl ModelSpec {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelSpec::QuantalHierarchy { .. } => ModelFamily::QuantalHierarchy,
            ModelSpec::QRE { .. } => ModelFamily::QRE,
            ModelSpec::AgentQRE { .. } => ModelFamily::AgentQRE,
            ModelSpec::LevelK { .. } => ModelFamily::LevelK,
            ModelSpec::CognitiveHierarchy { .. } => ModelFamily::CognitiveHierarchy,
            ModelSpec::Nash => ModelFamily::Nash,
        }
    }

    pub fn qh(beta: f64, gamma: f64) -> Self {
        ModelSpec::QuantalHierarchy {
            beta,
            gamma,
            epsilon: crate::qh::DEFAULT_EPSILON,
        }
    }

    /// Parameter values in the order of [`ModelFamily::params`].
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ModelSpec::QuantalHierarchy { beta, gamma, epsilon } => vec![beta, gamma, epsilon],
            ModelSpec::QRE { lambda } | ModelSpec::AgentQRE { lambda } => vec![lambda],
            ModelSpec::LevelK { k } => vec![k as f64],
            ModelSpec::CognitiveHierarchy { tau } => vec![tau],
            ModelSpec::Nash => vec![],
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelSpec::QuantalHierarchy { beta, gamma, epsilon } => {
                write!(f, "qh:beta={beta},gamma={gamma}")?;
                if epsilon != crate::qh::DEFAULT_EPSILON {
                    write!(f, ",epsilon={epsilon}")?;
                }
                Ok(())
            }
            ModelSpec::QRE { lambda } => write!(f, "qre:lambda={lambda}"),
            ModelSpec::AgentQRE { lambda } => write!(f, "aqre:lambda={lambda}"),
            ModelSpec::LevelK { k } => write!(f, "levelk:k={k}"),
            ModelSpec::CognitiveHierarchy { tau } => write!(f, "ch:tau={tau}"),
            ModelSpec::Nash => f.write_str("nash"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = ModelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (fam, rest) = match s.split_once(':') {
            Some((f, r)) => (f, Some(r)),
            None => (s, None),
        };
        let family: ModelFamily = fam.parse()?;
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(rest) = rest {
            if rest.trim().is_empty() {
                return Err(ModelParseError::Malformed(rest.to_string()));
            }
            for item in rest.split(',') {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| ModelParseError::Malformed(rest.to_string()))?;
                let k = k.trim().to_string();
                if !family.params().contains(&k.as_str()) {
                    return Err(ModelParseError::UnknownKey {
                        family: family.key().into(),
                        key: k,
                    });
                }
                if pairs.iter().any(|(pk, _)| *pk == k) {
                    return Err(ModelParseError::DuplicateKey { key: k });
                }
                pairs.push((k, v.trim().to_string()));
            }
        }
        let get = |key: &str| -> Result<f64, ModelParseError> {
            let (_, v) = pairs
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| ModelParseError::MissingKey {
                    family: family.key().into(),
                    key: key.into(),
                })?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ModelParseError::BadValue {
                    key: key.into(),
                    value: v.clone(),
                })
        };
        Ok(match family {
            ModelFamily::QuantalHierarchy => ModelSpec::QuantalHierarchy {
                beta: get("beta")?,
                gamma: get("gamma")?,
                epsilon: if pairs.iter().any(|(k, _)| k == "epsilon") {
                    get("epsilon")?
                } else {
                    crate::qh::DEFAULT_EPSILON
                },
            },
            ModelFamily::QRE => ModelSpec::QRE { lambda: get("lambda")? },
            ModelFamily::AgentQRE => ModelSpec::AgentQRE { lambda: get("lambda")? },
            ModelFamily::CognitiveHierarchy => ModelSpec::CognitiveHierarchy { tau: get("tau")? },
            ModelFamily::LevelK => {
                let (_, raw) = pairs.iter().find(|(k, _)| k == "k").ok_or(ModelParseError::MissingKey {
                    family: "levelk".into(),
                    key: "k".into(),
                })?;
                ModelSpec::LevelK {
                    k: raw.parse().map_err(|_| ModelParseError::BadValue {
                        key: "k".into(),
                        value: raw.clone(),
                    })?,
                }
            }
            ModelFamily::Nash => ModelSpec::Nash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_family() {
        assert_eq!("qh:beta=0.08,gamma=0.76".parse::<ModelSpec>().unwrap(), ModelSpec::qh(0.08, 0.76));
        assert_eq!(
            "qh:beta=1,gamma=0.5,epsilon=1e-9".parse::<ModelSpec>().unwrap(),
            ModelSpec::QuantalHierarchy {
                beta: 1.0,
                gamma: 0.5,
                epsilon: 1e-9
            }
        );
        assert_eq!("qre:lambda=2".parse::<ModelSpec>().unwrap(), ModelSpec::QRE { lambda: 2.0 });
        assert_eq!("aqre:lambda=2".parse::<ModelSpec>().unwrap(), ModelSpec::AgentQRE { lambda: 2.0 });
        assert_eq!("levelk:k=3".parse::<ModelSpec>().unwrap(), ModelSpec::LevelK { k: 3 });
        assert_eq!("ch:tau=1.5".parse::<ModelSpec>().unwrap(), ModelSpec::CognitiveHierarchy { tau: 1.5 });
        assert_eq!("nash".parse::<ModelSpec>().unwrap(), ModelSpec::Nash);
    }

    #[test]
    fn strict_errors() {
        assert!(matches!("qh:beta=1,gama=0.5".parse::<ModelSpec>(), Err(ModelParseError::UnknownKey { .. })));
        assert!(matches!("qh:beta=1".parse::<ModelSpec>(), Err(ModelParseError::MissingKey { .. })));
        assert!(matches!("foo".parse::<ModelSpec>(), Err(ModelParseError::UnknownFamily(_))));
        assert!(matches!("levelk:k=1.5".parse::<ModelSpec>(), Err(ModelParseError::BadValue { .. })));
        assert!(matches!("qre:lambda=1,lambda=2".parse::<ModelSpec>(), Err(ModelParseError::DuplicateKey { .. })));
        assert!(matches!("nash:x=1".parse::<ModelSpec>(), Err(ModelParseError::UnknownKey { .. })));
        assert!(matches!("qre:lambda".parse::<ModelSpec>(), Err(ModelParseError::Malformed(_))));
        assert!(matches!("qre:lambda=nan".parse::<ModelSpec>(), Err(ModelParseError::BadValue { .. })));
    }

    #[test]
    fn display_round_trips() {
        for s in ["qh:beta=0.5,gamma=0.7", "qre:lambda=3", "levelk:k=2", "ch:tau=1.5", "nash", "aqre:lambda=1"] {
            let m: ModelSpec = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
    }
}
