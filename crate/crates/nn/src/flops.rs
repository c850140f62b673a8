//! Closed-form per-inference operation counts.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    /// Three hidden layers of equal width.
    Dense { inputs: u64, hidden: u64, classes: u64 },
    Cnn { len: u64, classes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopEstimate {
    pub flops: u64,
    /// Any dimension was zero; the count is still reported.
    pub invalid: bool,
}

pub fn flops_estimate(spec: ModelSpec) -> FlopEstimate {
    match spec {
        ModelSpec::Dense { inputs, hidden, classes } => FlopEstimate {
            flops: 2 * (inputs * hidden + 2 * hidden * hidden + hidden * classes),
            invalid: inputs == 0 || hidden == 0 || classes == 0,
        },
        ModelSpec::Cnn { len, classes } => FlopEstimate {
            flops: 24_960 * len + 256 * classes,
            invalid: len == 0 || classes == 0,
        },
    }
}
