//! params.json: calibrated model parameters plus fit diagnostics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassicError, FitDiagnostics, GravityFit, GravityParams, HuffFit, HuffParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ParamsFile {
    Gravity { params: GravityParams, method: super::FitMethod, diagnostics: FitDiagnostics },
    Huff { params: HuffParams, diagnostics: FitDiagnostics },
}

impl From<GravityFit> for ParamsFile {
    fn from(fit: GravityFit) -> Self {
        ParamsFile::Gravity { params: fit.params, method: fit.method, diagnostics: fit.diagnostics }
    }
}

impl From<HuffFit> for ParamsFile {
    fn from(fit: HuffFit) -> Self {
        ParamsFile::Huff { params: fit.params, diagnostics: fit.diagnostics }
    }
}

pub fn write_params(path: &Path, params: &ParamsFile) -> Result<(), ClassicError> {
    let mut text = serde_json::to_string_pretty(params)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<ParamsFile, ClassicError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let file = ParamsFile::Gravity {
            params: GravityParams { k: 2.0, alpha: 1.0, beta: 0.5, gamma: 1.5 },
            method: super::super::FitMethod::Poisson,
            diagnostics: FitDiagnostics {
                deviance: 10.0,
                pseudo_r2: 0.9,
                log_likelihood: -42.0,
                n_obs: 100,
                n_dropped_zeros: 3,
                iterations: 7,
            },
        };
        write_params(&path, &file).unwrap();
        match read_params(&path).unwrap() {
            ParamsFile::Gravity { params, .. } => assert_eq!(params.gamma, 1.5),
            _ => panic!("wrong model tag"),
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"model\": \"gravity\""));
    }
}
