use serde::{Deserialize, Serialize};

use crate::model::{ModelError, PopulationParams};

/// One population configuration for the simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SettingRepr", into = "SettingRepr")]
pub struct SimulationSetting {
    pub id: usize,
    /// Display identifier from the reference settings list; differs from
    /// `id` for the two rows whose printed ids are duplicated.
    pub label: String,
    pub n: u32,
    pub params: PopulationParams,
}

#[derive(Serialize, Deserialize)]
struct SettingRepr {
    #[serde(default)]
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    n: u32,
    alpha: Vec<f64>,
    pi1: Vec<f64>,
    pi2: Vec<f64>,
}

impl TryFrom<SettingRepr> for SimulationSetting {
    type Error = ModelError;

    fn try_from(r: SettingRepr) -> Result<Self, ModelError> {
        let params = PopulationParams::new(r.alpha, r.pi1, r.pi2)?;
        let label = r.label.unwrap_or_else(|| r.id.to_string());
        Ok(SimulationSetting { id: r.id, label, n: r.n, params })
    }
}

impl From<SimulationSetting> for SettingRepr {
    fn from(s: SimulationSetting) -> Self {
        SettingRepr {
            id: s.id,
            label: (s.label != s.id.to_string()).then_some(s.label),
            n: s.n,
            alpha: s.params.alpha().to_vec(),
            pi1: s.params.pi1().to_vec(),
            pi2: s.params.pi2().to_vec(),
        }
    }
}

impl SimulationSetting {
    pub fn k(&self) -> usize {
        self.params.k()
    }
}

const PI3: [f64; 3] = [0.2, 0.3, 0.5];
const PI5: [f64; 5] = [0.1, 0.15, 0.2, 0.25, 0.3];
const ALPHA3: [[f64; 3]; 4] = [[0.05, 0.15, 0.2], [0.13, 0.13, 0.14], [0.15, 0.25, 0.4], [0.26, 0.26, 0.28]];
const ALPHA5: [[f64; 5]; 4] = [
    [0.05, 0.05, 0.05, 0.1, 0.15],
    [0.08, 0.08, 0.08, 0.08, 0.08],
    [0.1, 0.15, 0.15, 0.2, 0.2],
    [0.16, 0.16, 0.16, 0.16, 0.16],
];
const SIZES: [u32; 3] = [30, 50, 100];

/// The 48 built-in settings.
///
/// Ids run 1..=48. Within each block of 24 (three categories, then five) the
/// first 12 use the lower-agreement alpha vectors and the last 12 the higher
/// ones; each group of four cycles through two alpha vectors, each with the
/// second rater's random distribution equal to or reversed from the first's.
pub fn builtin_settings() -> Vec<SimulationSetting> {
    let mut out = Vec::with_capacity(48);
    for (block, k) in [3usize, 5].into_iter().enumerate() {
        let pi: Vec<f64> = if k == 3 { PI3.to_vec() } else { PI5.to_vec() };
        let reversed: Vec<f64> = pi.iter().rev().copied().collect();
        for level in 0..2 {
            for &n in &SIZES {
                for variant in 0..2 {
                    let alpha: Vec<f64> = if k == 3 {
                        ALPHA3[2 * level + variant].to_vec()
                    } else {
                        ALPHA5[2 * level + variant].to_vec()
                    };
                    for pi2 in [&pi, &reversed] {
                        let id = out.len() + 1;
                        let label = match id {
                            29 => "28".to_string(),
                            39 => "38".to_string(),
                            _ => id.to_string(),
                        };
                        let params = PopulationParams::new(alpha.clone(), pi.clone(), pi2.clone())
                            .expect("built-in settings are valid");
                        out.push(SimulationSetting { id, label, n, params });
                    }
                }
            }
        }
        debug_assert_eq!(out.len(), 24 * (block + 1));
    }
    out
}
