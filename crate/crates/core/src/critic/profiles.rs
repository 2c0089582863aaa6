use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::{IssueCategory, PerceptionNoise};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeverityTolerance {
    Strict,
    /// Intermediate and Final passes let Minor issues through as Clean half
    /// of the time.
    Tolerant,
}

/// Reliability model of a simulated critic. The shipped values are invented
/// knobs meant to order the configurations, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticProfile {
    pub name: String,
    pub p_detect: BTreeMap<IssueCategory, f64>,
    pub p_false_positive: f64,
    pub p_color_misread: f64,
    #[serde(default)]
    pub p_block_unseen: f64,
    #[serde(default)]
    pub p_miscount: f64,
    /// (mean, spread) of a uniform distribution, clamped to [0, 1].
    pub confidence_when_correct: (f64, f64),
    pub confidence_when_wrong: (f64, f64),
    pub severity_tolerance: SeverityTolerance,
    /// The actor is handed exact block colours.
    #[serde(default)]
    pub block_info: bool,
}

fn uniform(p: f64) -> BTreeMap<IssueCategory, f64> {
    IssueCategory::ALL.iter().map(|&c| (c, p)).collect()
}

impl CriticProfile {
    pub fn detect(&self, category: IssueCategory) -> f64 {
        self.p_detect.get(&category).copied().unwrap_or(0.0)
    }

    pub fn perception(&self) -> PerceptionNoise {
        PerceptionNoise {
            p_color_misread: self.p_color_misread,
            p_miscount: self.p_miscount,
            p_block_unseen: self.p_block_unseen,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let mut probs: Vec<(String, f64)> = self
            .p_detect
            .iter()
            .map(|(c, p)| (format!("p_detect[{c:?}]"), *p))
            .collect();
        probs.extend([
            ("p_false_positive".into(), self.p_false_positive),
            ("p_color_misread".into(), self.p_color_misread),
            ("p_block_unseen".into(), self.p_block_unseen),
            ("p_miscount".into(), self.p_miscount),
            ("confidence_when_correct.0".into(), self.confidence_when_correct.0),
            ("confidence_when_wrong.0".into(), self.confidence_when_wrong.0),
        ]);
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name}={p} is outside [0, 1]"));
            }
        }
        if self.confidence_when_correct.1 < 0.0 || self.confidence_when_wrong.1 < 0.0 {
            return Err("confidence spread must be non-negative".into());
        }
        Ok(())
    }

    /// Sees and reports everything, never invents anything.
    pub fn perfect() -> Self {
        CriticProfile {
            name: "perfect".into(),
            p_detect: uniform(1.0),
            p_false_positive: 0.0,
            p_color_misread: 0.0,
            p_block_unseen: 0.0,
            p_miscount: 0.0,
            confidence_when_correct: (0.95, 0.0),
            confidence_when_wrong: (0.95, 0.0),
            severity_tolerance: SeverityTolerance::Strict,
            block_info: false,
        }
    }

    /// Reports nothing.
    pub fn blind() -> Self {
        CriticProfile {
            name: "blind".into(),
            p_detect: uniform(0.0),
            confidence_when_correct: (0.5, 0.0),
            confidence_when_wrong: (0.5, 0.0),
            ..CriticProfile::perfect()
        }
    }

    /// Small fine-tuned model: good detection, calibrated.
    pub fn ft_3b() -> Self {
        CriticProfile {
            name: "ft-3b".into(),
            p_detect: uniform(0.85),
            p_false_positive: 0.05,
            p_color_misread: 0.10,
            p_block_unseen: 0.02,
            p_miscount: 0.05,
            confidence_when_correct: (0.75, 0.1),
            confidence_when_wrong: (0.5, 0.15),
            severity_tolerance: SeverityTolerance::Tolerant,
            block_info: false,
        }
    }

    /// Larger general model without fine-tuning: weaker, overconfident.
    pub fn vl_7b() -> Self {
        CriticProfile {
            name: "7b".into(),
            p_detect: uniform(0.55),
            p_false_positive: 0.25,
            p_color_misread: 0.30,
            p_block_unseen: 0.10,
            p_miscount: 0.15,
            confidence_when_correct: (0.75, 0.2),
            confidence_when_wrong: (0.8, 0.15),
            severity_tolerance: SeverityTolerance::Tolerant,
            block_info: false,
        }
    }

    /// Strong proprietary model: very good detection, calibrated.
    pub fn gemini() -> Self {
        CriticProfile {
            name: "gemini".into(),
            p_detect: uniform(0.95),
            p_false_positive: 0.03,
            p_color_misread: 0.05,
            p_block_unseen: 0.01,
            p_miscount: 0.02,
            confidence_when_correct: (0.9, 0.05),
            confidence_when_wrong: (0.6, 0.1),
            severity_tolerance: SeverityTolerance::Tolerant,
            block_info: false,
        }
    }

    /// `gemini` with exact block colours handed to the actor.
    pub fn gemini_block_info() -> Self {
        CriticProfile {
            name: "gemini+blockinfo".into(),
            block_info: true,
            ..CriticProfile::gemini()
        }
    }

    /// Shipped profile by name.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name {
            "perfect" => Self::perfect(),
            "blind" => Self::blind(),
            "ft-3b" => Self::ft_3b(),
            "7b" => Self::vl_7b(),
            "gemini" => Self::gemini(),
            "gemini+blockinfo" => Self::gemini_block_info(),
            _ => return None,
        })
    }

    pub const SHIPPED: [&'static str; 6] =
        ["perfect", "blind", "ft-3b", "7b", "gemini", "gemini+blockinfo"];
}
