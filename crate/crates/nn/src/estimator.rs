//! Trained networks wrapped as source-count estimators.

use std::path::Path;

use crate::dataset::InputKind;
use crate::network::Network;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Dense net on five spectral statistics.
    Dense,
    /// Same dense net without the entropy statistic.
    Fcnn,
    /// Convolutional net on the log-spectrum.
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dense, ModelKind::Fcnn, ModelKind::Cnn];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Dense => "dnn",
            ModelKind::Fcnn => "fcnn",
            ModelKind::Cnn => "cnn",
        }
    }

    pub fn input(self) -> InputKind {
        match self {
            ModelKind::Dense => InputKind::Features,
            ModelKind::Fcnn => InputKind::FeaturesNoEntropy,
            ModelKind::Cnn => InputKind::LogSpectrum,
        }
    }

    /// Default model file name inside a model directory.
    pub fn file_name(self) -> &'static str {
        match self {
            ModelKind::Dense => "dnn.h2adnn",
            ModelKind::Fcnn => "fcnn.h2adnn",
            ModelKind::Cnn => "cnn.h2adnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountEstimator {
    pub network: Network,
    pub kind: ModelKind,
}

impl CountEstimator {
    /// Infers the model kind from the network's layers and input size.
    pub fn new(network: Network) -> Result<Self> {
        let kind = if network.is_convolutional() {
            ModelKind::Cnn
        } else {
            match network.input_size()? {
                5 => ModelKind::Dense,
                4 => ModelKind::Fcnn,
                n => return Err(Error::Input(format!("dense model with {n} inputs is not a known estimator"))),
            }
        };
        Ok(Self { network, kind })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(Network::load(path)?)
    }

    /// Source count (`class + 1`) for each spectrum.
    pub fn estimate_batch(&self, spectra: &[Vec<f64>]) -> Result<Vec<usize>> {
        if spectra.is_empty() {
            return Ok(Vec::new());
        }
        let inputs: Vec<Vec<f64>> = spectra
            .iter()
            .map(|s| self.kind.input().transform(s))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let x = self.network.batch_tensor(&refs)?;
        Ok(self.network.predict(&x)?.into_iter().map(|c| c + 1).collect())
    }

    pub fn estimate(&self, eigenvalues: &[f64]) -> Result<usize> {
        Ok(self.estimate_batch(&[eigenvalues.to_vec()])?[0])
    }
}
