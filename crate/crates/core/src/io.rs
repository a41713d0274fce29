//! JSON documents for states, channels and protocol transcripts. All
//! documents are `f64`; floats round-trip bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channels::{GaussianChannel, Port};
use crate::entanglement::EntanglementReport;
use crate::error::{Error, Result};
use crate::phase::{CovMatrix, QuadVector};
use crate::protocols::{Fig1Run, Fig2Protocol, ThreeModeCanonicalForm};
use crate::state::GaussianState;
use crate::symplectic::SymplecticMatrix;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub modes: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl StateDoc {
    pub fn from_state(s: &GaussianState<f64>) -> Self {
        Self {
            modes: s.modes(),
            mean: s.mean().as_vector().iter().copied().collect(),
            cov: rows(s.cov().as_matrix()),
        }
    }

    /// Validates shape, symmetry and physicality.
    pub fn to_state(&self) -> Result<GaussianState<f64>> {
        let cov = CovMatrix::new(matrix(&self.cov)?)?;
        if cov.modes() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: cov.modes(),
            });
        }
        let mean = if self.mean.is_empty() {
            QuadVector::zeros(self.modes)
        } else {
            QuadVector::new(DVector::from_vec(self.mean.clone()))?
        };
        if mean.modes() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: mean.modes(),
            });
        }
        GaussianState::new(mean, cov)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub n_in: usize,
    pub n_out: usize,
    /// Role of each Choi mode.
    pub partition: Vec<Port>,
    pub choi_mean: Vec<f64>,
    pub choi_cov: Vec<Vec<f64>>,
}

impl ChannelDoc {
    pub fn from_channel(ch: &GaussianChannel<f64>) -> Self {
        let choi = StateDoc::from_state(ch.choi());
        Self {
            n_in: ch.n_in(),
            n_out: ch.n_out(),
            partition: ch.partition().to_vec(),
            choi_mean: choi.mean,
            choi_cov: choi.cov,
        }
    }

    pub fn to_channel(&self) -> Result<GaussianChannel<f64>> {
        let choi = StateDoc {
            modes: self.partition.len(),
            mean: self.choi_mean.clone(),
            cov: self.choi_cov.clone(),
        }
        .to_state()?;
        let ch = GaussianChannel::new(self.partition.clone(), choi)?;
        if ch.n_in() != self.n_in || ch.n_out() != self.n_out {
            return Err(Error::Format(format!(
                "partition has {} inputs and {} outputs, header says {} and {}",
                ch.n_in(),
                ch.n_out(),
                self.n_in,
                self.n_out
            )));
        }
        Ok(ch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticDoc {
    pub modes: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl SymplecticDoc {
    pub fn from_symplectic(s: &SymplecticMatrix<f64>) -> Self {
        Self {
            modes: s.modes(),
            matrix: rows(s.as_matrix()),
        }
    }

    pub fn to_symplectic(&self) -> Result<SymplecticMatrix<f64>> {
        let s = SymplecticMatrix::new(matrix(&self.matrix)?)?;
        if s.modes() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: s.modes(),
            });
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1SampleDoc {
    pub outcome: Vec<f64>,
    pub correction: Vec<f64>,
    pub corrected_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub seed: u64,
    pub n_samples: usize,
    pub gain_scale: f64,
    pub max_cov_deviation: f64,
    pub max_mean_deviation: f64,
    pub tolerance: f64,
    pub verified: bool,
    pub reference_output: StateDoc,
    pub samples: Vec<Fig1SampleDoc>,
}

impl Fig1Report {
    pub fn new(run: &Fig1Run<f64>, seed: u64, gain_scale: f64, tolerance: f64) -> Self {
        Self {
            seed,
            n_samples: run.samples.len(),
            gain_scale,
            max_cov_deviation: run.max_cov_deviation,
            max_mean_deviation: run.max_mean_deviation,
            tolerance,
            verified: run.verified(tolerance),
            reference_output: StateDoc::from_state(&run.reference_output),
            samples: run
                .samples
                .iter()
                .map(|s| Fig1SampleDoc {
                    outcome: s.outcome.iter().copied().collect(),
                    correction: s.correction.iter().copied().collect(),
                    corrected_mean: s.corrected_output.mean().as_vector().iter().copied().collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Report {
    pub s_a: SymplecticDoc,
    pub s_b: SymplecticDoc,
    pub outcome: Vec<f64>,
    pub correction: Vec<f64>,
    pub output: StateDoc,
    pub input_log_negativity: f64,
    pub entanglement: EntanglementReport,
}

impl Fig2Report {
    pub fn new(p: &Fig2Protocol<f64>, input_log_negativity: f64) -> Self {
        Self {
            s_a: SymplecticDoc::from_symplectic(&p.s_a),
            s_b: SymplecticDoc::from_symplectic(&p.s_b),
            outcome: p.outcome.iter().copied().collect(),
            correction: p.correction.iter().copied().collect(),
            output: StateDoc::from_state(&p.output),
            input_log_negativity,
            entanglement: p.report.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d1: f64,
    pub d2: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub input_symplectic: SymplecticDoc,
    pub output_symplectic: SymplecticDoc,
    pub canonical_cov: Vec<Vec<f64>>,
}

impl CanonicalReport {
    pub fn new(cf: &ThreeModeCanonicalForm<f64>) -> Self {
        Self {
            a: cf.a,
            b: cf.b,
            c: cf.c,
            d1: cf.d1,
            d2: cf.d2,
            e1: cf.e1,
            e2: cf.e2,
            e3: cf.e3,
            input_symplectic: SymplecticDoc::from_symplectic(&cf.input_symplectic),
            output_symplectic: SymplecticDoc::from_symplectic(&cf.output_symplectic),
            canonical_cov: rows(cf.canonical_cov.as_matrix()),
        }
    }
}

pub fn to_json<S: Serialize>(doc: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<D: for<'de> Deserialize<'de>>(text: &str) -> Result<D> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::attenuation;
    use crate::state::tmsv;
    use rand::SeedableRng;

    #[test]
    fn state_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = crate::symplectic::random_symplectic::<f64, _>(2, 0.7, &mut rng);
        let st = tmsv(0.37).apply_symplectic(&s).unwrap().displace(&DVector::from_vec(vec![0.1, 1.0 / 3.0, -2.0, 1e-17])).unwrap();
        let text = to_json(&StateDoc::from_state(&st)).unwrap();
        let back = from_json::<StateDoc>(&text).unwrap().to_state().unwrap();
        assert_eq!(back.cov().as_matrix(), st.cov().as_matrix());
        assert_eq!(back.mean().as_vector(), st.mean().as_vector());
    }

    #[test]
    fn channel_round_trip() {
        let ch = attenuation(0.6f64, 2.0, 1.0).unwrap();
        let doc = ChannelDoc::from_channel(&ch);
        let text = to_json(&doc).unwrap();
        assert!(text.contains("\"in\"") && text.contains("\"out\""));
        let back = from_json::<ChannelDoc>(&text).unwrap().to_channel().unwrap();
        assert_eq!(back.choi().cov().as_matrix(), ch.choi().cov().as_matrix());
        assert_eq!(back.partition(), ch.partition());
    }

    #[test]
    fn unphysical_state_names_eigenvalue() {
        let doc = StateDoc {
            modes: 1,
            mean: vec![],
            cov: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        };
        match doc.to_state() {
            Err(Error::NotPhysical { value, .. }) => assert!((value - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_documents() {
        let ragged = StateDoc {
            modes: 1,
            mean: vec![],
            cov: vec![vec![1.0, 0.0], vec![0.0]],
        };
        assert!(matches!(ragged.to_state(), Err(Error::Format(_))));
        let wrong_modes = StateDoc {
            modes: 2,
            mean: vec![],
            cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(matches!(wrong_modes.to_state(), Err(Error::DimensionMismatch { .. })));
        assert!(from_json::<StateDoc>("{\"modes\": 1}").is_err());
    }
}
