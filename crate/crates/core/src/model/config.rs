use crate::error::{Error, Result};
use crate::kernels::{ConvSpec, PoolSpec};

pub const INPUT_SIZE: usize = 137;
pub const NUM_CLASSES: usize = 2;
pub const CONV_STAGES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Flatten, dense + ReLU, dropout, dense + sigmoid.
    Dense,
    /// Sum-pool over the last conv featuremaps, dropout, bias-free class weights, softmax.
    Gap,
}

impl Head {
    pub fn as_u8(self) -> u8 {
        match self {
            Head::Dense => 0,
            Head::Gap => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Head::Dense),
            1 => Some(Head::Gap),
            _ => None,
        }
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Head::Dense),
            "gap" => Ok(Head::Gap),
            other => Err(Error::Config(format!("unknown head `{other}` (expected dense|gap)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Side of the square single-channel input. 137 for the real pipeline;
    /// smaller values exist for gradient checks.
    pub input_size: usize,
    pub conv_filters: [usize; CONV_STAGES],
    pub head: Head,
    pub dense_hidden: usize,
    /// Drop probability applied to the head input during training.
    pub dropout_rate: f32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: INPUT_SIZE,
            conv_filters: [32, 64, 128, 128],
            head: Head::Gap,
            dense_hidden: 512,
            dropout_rate: 0.8,
        }
    }
}

/// Spatial sizes through the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeTrace {
    /// `(conv output, pool output)` per stage; the last pool is `None` for the gap head.
    pub stages: Vec<(usize, Option<usize>)>,
}

impl SizeTrace {
    /// Side of the featuremaps the head consumes.
    pub fn head_input(&self) -> usize {
        let (conv, pool) = *self.stages.last().expect("four stages");
        pool.unwrap_or(conv)
    }

    /// Side of the last conv output (the CAM source).
    pub fn last_conv(&self) -> usize {
        self.stages.last().expect("four stages").0
    }
}

impl ModelConfig {
    pub fn num_classes(&self) -> usize {
        NUM_CLASSES
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.conv_filters.iter().position(|&f| f == 0) {
            return Err(Error::Config(format!("conv_filters[{i}] must be positive")));
        }
        if self.head == Head::Dense && self.dense_hidden == 0 {
            return Err(Error::Config("dense_hidden must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        self.size_trace().map(|_| ())
    }

    /// `137 -> 135 -> 67 -> 65 -> 32 -> 30 -> 15 -> 13 (-> 6)` for the default input.
    pub fn size_trace(&self) -> Result<SizeTrace> {
        let mut side = self.input_size;
        let mut stages = Vec::with_capacity(CONV_STAGES);
        for stage in 0..CONV_STAGES {
            let conv = ConvSpec::output_dim(side).ok_or_else(|| {
                Error::Config(format!(
                    "input size {} too small: conv{} receives {side}x{side}",
                    self.input_size,
                    stage + 1
                ))
            })?;
            let last = stage + 1 == CONV_STAGES;
            let pool = if last && self.head == Head::Gap {
                None
            } else {
                Some(PoolSpec::output_dim(conv).ok_or_else(|| {
                    Error::Config(format!(
                        "input size {} too small: pool{} receives {conv}x{conv}",
                        self.input_size,
                        stage + 1
                    ))
                })?)
            };
            stages.push((conv, pool));
            if let Some(p) = pool {
                side = p;
            }
        }
        Ok(SizeTrace { stages })
    }

    pub fn stage_channels(&self, stage: usize) -> (usize, usize) {
        let c_in = if stage == 0 { 1 } else { self.conv_filters[stage - 1] };
        (c_in, self.conv_filters[stage])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_trace() {
        let mut cfg = ModelConfig { head: Head::Dense, ..ModelConfig::default() };
        let t = cfg.size_trace().unwrap();
        let flat: Vec<usize> = t.stages.iter().flat_map(|&(c, p)| [c, p.unwrap()]).collect();
        assert_eq!(flat, vec![135, 67, 65, 32, 30, 15, 13, 6]);
        assert_eq!(t.head_input(), 6);
        cfg.head = Head::Gap;
        let t = cfg.size_trace().unwrap();
        assert_eq!(t.stages[3], (13, None));
        assert_eq!(t.head_input(), 13);
    }

    #[test]
    fn minimal_sizes() {
        let gap = |s| ModelConfig { input_size: s, head: Head::Gap, ..ModelConfig::default() };
        let dense = |s| ModelConfig { input_size: s, head: Head::Dense, ..ModelConfig::default() };
        assert!(gap(38).validate().is_ok());
        assert!(gap(37).validate().is_err());
        assert!(dense(46).validate().is_ok());
        assert!(dense(45).validate().is_err());
        assert!(gap(21).validate().is_err());
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = ModelConfig { dropout_rate: 1.0, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.dropout_rate = 0.5;
        cfg.conv_filters[2] = 0;
        assert!(cfg.validate().is_err());
    }
}
