use serde::{Deserialize, Serialize};

use super::{ClusterSummary, ModeFeature};
use crate::forward_model::MixtureModel;

/// One learned contact mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mode {
    pub id: usize,
    pub summary: ClusterSummary,
    pub model: MixtureModel,
    /// Non-updating copy of `model` used by the force-error change check.
    pub reference: Option<MixtureModel>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModeRegistry {
    pub modes: Vec<Mode>,
    pub active: Option<usize>,
}

/// Outcome of classifying one feature batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Winning existing mode, if any cluster received a vote.
    pub best: Option<usize>,
    pub confidence: f64,
    pub runner_up: f64,
    pub is_new: bool,
}

impl ModeRegistry {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Mode> {
        self.modes.iter().find(|m| m.id == id)
    }

    pub fn get_mut(&mut self, id: usize) -> Option<&mut Mode> {
        self.modes.iter_mut().find(|m| m.id == id)
    }

    pub fn active_mode(&self) -> Option<&Mode> {
        self.active.and_then(|id| self.get(id))
    }

    pub fn active_mode_mut(&mut self) -> Option<&mut Mode> {
        let id = self.active?;
        self.get_mut(id)
    }

    /// Register a new mode and return its id.
    pub fn push(&mut self, summary: ClusterSummary, model: MixtureModel) -> usize {
        let id = self.modes.iter().map(|m| m.id + 1).max().unwrap_or(0);
        self.modes.push(Mode {
            id,
            summary,
            model,
            reference: None,
        });
        id
    }
}

/// Vote each feature to its nearest cluster within `distance_threshold`.
/// The winner's vote share is the confidence; below `confidence_threshold`
/// the batch is a new mode. Read-only: callers absorb the batch afterwards.
pub fn classify_batch(
    features: &[ModeFeature],
    registry: &ModeRegistry,
    distance_threshold: f64,
    confidence_threshold: f64,
) -> Classification {
    let n = registry.modes.len();
    let mut votes = vec![0usize; n];
    for f in features {
        let nearest = registry
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| (i, m.summary.distance(f.value)))
            .filter(|(_, d)| *d <= distance_threshold)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = nearest {
            votes[i] += 1;
        }
    }
    let total = features.len().max(1) as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
    let share = |k: usize| order.get(k).map_or(0.0, |&i| votes[i] as f64 / total);
    let confidence = share(0);
    let best = order
        .first()
        .filter(|&&i| votes[i] > 0)
        .map(|&i| registry.modes[i].id);
    Classification {
        best,
        confidence,
        runner_up: share(1),
        is_new: best.is_none() || confidence < confidence_threshold,
    }
}
