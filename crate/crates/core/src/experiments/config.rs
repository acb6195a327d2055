use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::concentration::MIN_SAMPLES;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::sampler::RowModel;

/// The closed set of named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sample,
    Esd,
    Reduce,
    LogdetCompare,
    Singvals,
    Smallball,
    Gap,
    Talagrand,
    IdentitySuite,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Sample,
        Experiment::Esd,
        Experiment::Reduce,
        Experiment::LogdetCompare,
        Experiment::Singvals,
        Experiment::Smallball,
        Experiment::Gap,
        Experiment::Talagrand,
        Experiment::IdentitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Esd => "esd",
            Experiment::Reduce => "reduce",
            Experiment::LogdetCompare => "logdet-compare",
            Experiment::Singvals => "singvals",
            Experiment::Smallball => "smallball",
            Experiment::Gap => "gap",
            Experiment::Talagrand => "talagrand",
            Experiment::IdentitySuite => "identity-suite",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid("experiment", format!("unknown experiment `{s}`")))
    }
}

/// A complex shift written as `a`, `bi`, `a+bi` or `a-bi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift(pub C64);

impl FromStr for Shift {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::invalid("z", format!("cannot parse `{text}` as a complex number"));
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(bad());
        }
        let Some(body) = t.strip_suffix('i') else {
            return t.parse().map(|re| Shift(C64::new(re, 0.0))).map_err(|_| bad());
        };
        // split before the last sign that is not an exponent sign or the leading sign
        let split = body
            .char_indices()
            .filter(|&(i, c)| (c == '+' || c == '-') && i > 0 && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
            .map(|(i, _)| i)
            .next_back();
        let imag = |s: &str| -> Result<f64> {
            match s {
                "" | "+" => Ok(1.0),
                "-" => Ok(-1.0),
                s => s.parse().map_err(|_| bad()),
            }
        };
        let z = match split {
            Some(i) => C64::new(body[..i].parse().map_err(|_| bad())?, imag(&body[i..])?),
            None => C64::new(0.0, imag(body)?),
        };
        Ok(Shift(z))
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0.im.is_sign_negative() { '-' } else { '+' };
        write!(f, "{}{}{}i", self.0.re, sign, self.0.im.abs())
    }
}

impl Serialize for Shift {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Shift {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Flat experiment configuration; each field mirrors one command-line flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub s: i64,
    pub trials: usize,
    pub seed: u64,
    /// Row law; each experiment has its own default.
    pub model: Option<RowModel>,
    pub z: Vec<Shift>,
    pub beta: f64,
    pub a_exponent: Vec<f64>,
    pub t_ladder: Vec<f64>,
    pub m_split: Option<usize>,
    /// Subspace dimension (talagrand), deleted rows (singvals, identity-suite)
    /// or GAP rank (gap).
    pub k: Option<usize>,
    pub grid: usize,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Sample,
            n: 10,
            s: 0,
            trials: 1,
            seed: 0,
            model: None,
            z: vec![Shift(C64::new(1.0, 0.5))],
            beta: 1.0,
            a_exponent: vec![0.5, 1.0, 1.5],
            t_ladder: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            m_split: None,
            k: None,
            grid: 101,
            samples: MIN_SAMPLES,
            out: None,
        }
    }
}

fn field(name: &'static str, reason: impl Into<String>) -> Error {
    Error::invalid(name, reason)
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, ..Default::default() }
    }

    /// Parses a configuration document; the `experiment` field is required.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("experiment").is_none() {
            return Err(field("experiment", "missing from configuration"));
        }
        serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))
    }

    /// Row law actually used by the experiment.
    pub fn row_model(&self) -> RowModel {
        self.model.unwrap_or(match self.experiment {
            Experiment::LogdetCompare => RowModel::UnionS,
            Experiment::Talagrand => RowModel::Iid,
            _ => RowModel::FixedSum,
        })
    }

    /// Effective `k` for the experiments that use it.
    pub fn k_or_default(&self) -> usize {
        self.k.unwrap_or(match self.experiment {
            Experiment::Talagrand => self.n / 2,
            Experiment::Gap => 2,
            _ => 5.min(self.n.saturating_sub(1)),
        })
    }

    fn check_rows(&self, model: RowModel) -> Result<()> {
        model.validate(self.n, self.s).map_err(|e| field("s", e.to_string()))
    }

    /// Rejects configurations the named experiment cannot run, naming the field.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(field("n", "must be positive"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(field("beta", "must be finite and non-negative"));
        }
        match self.experiment {
            Experiment::Sample => self.check_rows(self.row_model())?,
            Experiment::Esd => {
                self.check_rows(self.row_model())?;
                if self.grid < 2 {
                    return Err(field("grid", "need at least 2 grid points per axis"));
                }
            }
            Experiment::Reduce => {
                if self.row_model() != RowModel::FixedSum {
                    return Err(field("model", "reduction needs fixed-sum rows"));
                }
                if n < 2 {
                    return Err(field("n", "need n ≥ 2"));
                }
                self.check_rows(RowModel::FixedSum)?;
            }
            Experiment::LogdetCompare => {
                self.check_rows(RowModel::UnionS)?;
                if self.model.is_some_and(|m| m != RowModel::UnionS) {
                    return Err(field("model", "the constrained ensemble is union-s"));
                }
                if self.z.is_empty() {
                    return Err(field("z", "need at least one shift"));
                }
                if self.m_split.is_some_and(|m| m > n) {
                    return Err(field("m_split", "must not exceed n"));
                }
            }
            Experiment::Singvals => {
                self.check_rows(self.row_model())?;
                if n < 2 || self.k_or_default() == 0 || self.k_or_default() >= n {
                    return Err(field("k", "need 1 ≤ k ≤ n − 1"));
                }
                if self.a_exponent.is_empty() {
                    return Err(field("a_exponent", "need at least one exponent"));
                }
            }
            Experiment::Smallball => {
                if n > 16 {
                    return Err(field("n", "exact small-ball oracles run up to n = 16"));
                }
                if (n as i64 + self.s).rem_euclid(2) != 1 || self.s.unsigned_abs() >= n as u64 {
                    return Err(field("s", "need n + s odd and |s| < n"));
                }
            }
            Experiment::Gap => {
                if n > 12 {
                    return Err(field("n", "GAP experiments run up to n = 12"));
                }
                if !(1..=3).contains(&self.k_or_default()) {
                    return Err(field("k", "GAP rank must be 1, 2 or 3"));
                }
                if self.s.unsigned_abs() > n as u64 {
                    return Err(field("s", "need |s| ≤ n"));
                }
            }
            Experiment::Talagrand => {
                let model = self.row_model();
                if model == RowModel::FixedSum {
                    return Err(field("model", "talagrand uses iid or union-s rows"));
                }
                self.check_rows(model)?;
                if self.k_or_default() + 10 > n {
                    return Err(field("k", "need k ≤ n − 10"));
                }
                if self.samples < MIN_SAMPLES {
                    return Err(field("samples", format!("need at least {MIN_SAMPLES}")));
                }
                if self.t_ladder.is_empty() {
                    return Err(field("t_ladder", "need at least one t"));
                }
            }
            Experiment::IdentitySuite => {
                if n < 2 {
                    return Err(field("n", "need n ≥ 2"));
                }
                self.check_rows(RowModel::FixedSum)?;
                if self.z.is_empty() {
                    return Err(field("z", "need at least one shift"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_parse() {
        let cases = [
            ("1+0.5i", C64::new(1.0, 0.5)),
            ("1-0.5i", C64::new(1.0, -0.5)),
            ("-2", C64::new(-2.0, 0.0)),
            ("i", C64::new(0.0, 1.0)),
            ("-0.25i", C64::new(0.0, -0.25)),
            ("1e-3+2e+1i", C64::new(1e-3, 20.0)),
        ];
        for (text, z) in cases {
            assert_eq!(text.parse::<Shift>().unwrap().0, z, "{text}");
            let shown = Shift(z).to_string();
            assert_eq!(shown.parse::<Shift>().unwrap().0, z);
        }
        assert!("abc".parse::<Shift>().is_err());
        assert!("".parse::<Shift>().is_err());
    }

    #[test]
    fn config_round_trip_and_names() {
        let mut c = ExperimentConfig::new(Experiment::LogdetCompare);
        c.m_split = Some(3);
        c.out = Some("x".into());
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(serde_json::to_string(&e).unwrap(), format!("\"{e}\""));
        }
        assert!("nope".parse::<Experiment>().is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n":3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"esd","bogus":1}"#).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::new(Experiment::Esd);
        c.n = 5;
        c.s = 0;
        match c.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "s"),
            other => panic!("{other:?}"),
        }
        c.s = 1;
        assert!(c.validate().is_ok());
        c.grid = 1;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "grid", .. })));
        let mut t = ExperimentConfig::new(Experiment::Talagrand);
        t.n = 12;
        assert!(matches!(t.validate(), Err(Error::InvalidParameter { name: "k", .. })));
    }
}
