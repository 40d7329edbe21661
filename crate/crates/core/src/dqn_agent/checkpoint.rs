use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "pqos-checkpoint";
const VERSION: u32 = 1;

/// Saved agent state.
///
/// Text layout, one record per line:
///
/// ```text
/// pqos-checkpoint 1
/// actions 1450 1451 1452        # action index → application mode id
/// layers 8 12 6 3
/// train_steps <n>
/// adam_step <n>
/// online <count> <values...>    # QNetwork::parameters() order
/// target <count> <values...>
/// adam_m <count> <values...>
/// adam_v <count> <values...>
/// ```
///
/// Values use Rust's shortest round-trip float formatting, so save followed
/// by load reproduces every bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub action_ids: Vec<u16>,
    pub layer_sizes: Vec<usize>,
    pub train_steps: u64,
    pub online: Vec<f64>,
    pub target: Vec<f64>,
    pub adam_step: u64,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

fn push_vector(out: &mut String, key: &str, values: &[f64]) {
    write!(out, "{key} {}", values.len()).unwrap();
    for v in values {
        write!(out, " {v:?}").unwrap();
    }
    out.push('\n');
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let join = |xs: &[String]| xs.join(" ");
        let mut out = format!("{MAGIC} {VERSION}\n");
        writeln!(
            out,
            "actions {}",
            join(&self.action_ids.iter().map(u16::to_string).collect::<Vec<_>>())
        )
        .unwrap();
        writeln!(
            out,
            "layers {}",
            join(&self.layer_sizes.iter().map(usize::to_string).collect::<Vec<_>>())
        )
        .unwrap();
        writeln!(out, "train_steps {}", self.train_steps).unwrap();
        writeln!(out, "adam_step {}", self.adam_step).unwrap();
        push_vector(&mut out, "online", &self.online);
        push_vector(&mut out, "target", &self.target);
        push_vector(&mut out, "adam_m", &self.adam_m);
        push_vector(&mut out, "adam_v", &self.adam_v);
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("missing `{key}` record")))?;
            let mut fields = line.split_whitespace();
            match fields.next() {
                Some(k) if k == key => Ok(fields.map(str::to_owned).collect()),
                other => Err(Error::Checkpoint(format!(
                    "expected `{key}` record, found {other:?}"
                ))),
            }
        };
        let header = next(MAGIC)?;
        if header != [VERSION.to_string()] {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {header:?}")));
        }
        let parse_all = |key: &str, fields: Vec<String>| -> Result<Vec<u64>> {
            fields
                .iter()
                .map(|f| {
                    f.parse::<u64>()
                        .map_err(|e| Error::Checkpoint(format!("{key}: bad integer {f:?}: {e}")))
                })
                .collect()
        };
        let single = |key: &str, fields: Vec<String>| -> Result<u64> {
            match parse_all(key, fields)?.as_slice() {
                [v] => Ok(*v),
                other => Err(Error::Checkpoint(format!("{key}: expected one value, got {other:?}"))),
            }
        };
        let vector = |key: &str, fields: Vec<String>| -> Result<Vec<f64>> {
            let (count, values) = fields
                .split_first()
                .ok_or_else(|| Error::Checkpoint(format!("{key}: missing count")))?;
            let count: usize = count
                .parse()
                .map_err(|e| Error::Checkpoint(format!("{key}: bad count: {e}")))?;
            if values.len() != count {
                return Err(Error::Checkpoint(format!(
                    "{key}: declared {count} values, found {}",
                    values.len()
                )));
            }
            values
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Checkpoint(format!("{key}: bad value {v:?}")))
                })
                .collect()
        };
        let action_ids = parse_all("actions", next("actions")?)?
            .into_iter()
            .map(|v| u16::try_from(v).map_err(|_| Error::Checkpoint(format!("action id {v} too large"))))
            .collect::<Result<Vec<u16>>>()?;
        let layer_sizes: Vec<usize> = parse_all("layers", next("layers")?)?
            .into_iter()
            .map(|v| v as usize)
            .collect();
        let train_steps = single("train_steps", next("train_steps")?)?;
        let adam_step = single("adam_step", next("adam_step")?)?;
        let ckpt = Self {
            action_ids,
            layer_sizes,
            train_steps,
            adam_step,
            online: vector("online", next("online")?)?,
            target: vector("target", next("target")?)?,
            adam_m: vector("adam_m", next("adam_m")?)?,
            adam_v: vector("adam_v", next("adam_v")?)?,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<()> {
        let expected = super::QNetwork::zeros(&self.layer_sizes)
            .map_err(|e| Error::Checkpoint(e.to_string()))?
            .parameters()
            .len();
        for (name, v) in [
            ("online", &self.online),
            ("target", &self.target),
            ("adam_m", &self.adam_m),
            ("adam_v", &self.adam_v),
        ] {
            if v.len() != expected {
                return Err(Error::Checkpoint(format!(
                    "{name} has {} values, layers {:?} need {expected}",
                    v.len(),
                    self.layer_sizes
                )));
            }
        }
        let outputs = *self.layer_sizes.last().unwrap_or(&0);
        if self.action_ids.len() != outputs {
            return Err(Error::Checkpoint(format!(
                "{} action ids for {outputs} network outputs",
                self.action_ids.len()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{AgentConfig, DqnAgent, Transition};
    use super::*;
    use proptest::prelude::*;

    fn trained_agent() -> DqnAgent {
        let mut agent = DqnAgent::new(AgentConfig { batch_size: 2, ..Default::default() }).unwrap();
        let t = Transition {
            state: vec![0.1; 8],
            action: 2,
            reward: 0.3,
            next_state: vec![0.7; 8],
            terminal: false,
        };
        agent.train_batch(&[t.clone(), t]).unwrap();
        agent
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let agent = trained_agent();
        let ckpt = agent.to_checkpoint(&[1450, 1451, 1452]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.online), bits(&ckpt.online));
        assert_eq!(bits(&back.adam_v), bits(&ckpt.adam_v));
        let restored = DqnAgent::from_checkpoint(agent.config().clone(), &back).unwrap();
        assert_eq!(restored.online(), agent.online());
        assert_eq!(restored.train_steps(), 1);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let text = trained_agent().to_checkpoint(&[1450, 1451, 1452]).to_text();
        assert!(Checkpoint::parse("").is_err());
        assert!(Checkpoint::parse(&text.replace("pqos-checkpoint 1", "pqos-checkpoint 9")).is_err());
        assert!(Checkpoint::parse(&text.replace("actions 1450 1451 1452", "actions 1450 1451")).is_err());
        assert!(Checkpoint::parse(&text.replace("layers 8 12 6 3", "layers 8 12 6 4")).is_err());
        let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::parse(&truncated).is_err());
        let nan: Vec<String> = text
            .lines()
            .map(|l| match l.strip_prefix("online 207 ") {
                Some(rest) => format!("online 207 NaN {}", rest.split_once(' ').unwrap().1),
                None => l.to_owned(),
            })
            .collect();
        assert_ne!(nan.join("\n"), text.trim_end());
        assert!(Checkpoint::parse(&nan.join("\n")).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(v in prop::collection::vec(-1e300f64..1e300, 12), steps in any::<u64>()) {
            // 2 → 2 → 2 network: 12 parameters
            let sizes = vec![2, 2, 2];
            let ckpt = Checkpoint {
                action_ids: vec![7, 9],
                layer_sizes: sizes,
                train_steps: steps,
                online: v.clone(),
                target: v.iter().map(|x| -x).collect(),
                adam_step: steps / 2,
                adam_m: v.iter().map(|x| x * 1e-7).collect(),
                adam_v: v.iter().map(|x| x.abs()).collect(),
            };
            let back = Checkpoint::parse(&ckpt.to_text()).unwrap();
            prop_assert_eq!(back, ckpt);
        }
    }
}
