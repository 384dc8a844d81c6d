use crate::kinematics::FollowState;
use crate::neural::Normalization;

/// Number of recent states visible to a model: 1 s at 25 Hz.
pub const HISTORY_LEN: usize = 25;

/// Fixed-length history of the most recent states, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct StateWindow {
    states: [FollowState; HISTORY_LEN],
    /// Index of the oldest entry.
    head: usize,
}

impl StateWindow {
    /// A window back-filled with `state`, as at the start of an episode.
    pub fn filled(state: FollowState) -> Self {
        Self {
            states: [state; HISTORY_LEN],
            head: 0,
        }
    }

    pub fn push(&mut self, state: FollowState) {
        self.states[self.head] = state;
        self.head = (self.head + 1) % HISTORY_LEN;
    }

    pub fn newest(&self) -> &FollowState {
        &self.states[(self.head + HISTORY_LEN - 1) % HISTORY_LEN]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FollowState> + '_ {
        (0..HISTORY_LEN).map(move |k| &self.states[(self.head + k) % HISTORY_LEN])
    }

    pub fn len(&self) -> usize {
        HISTORY_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Raw `(S, V^f, ΔV)` triples flattened oldest to newest.
    pub fn raw_features(&self) -> Vec<f64> {
        self.iter().flat_map(|s| s.as_features()).collect()
    }

    /// Standardized triples flattened oldest to newest (`3 * HISTORY_LEN`).
    pub fn flat_features(&self, norm: &Normalization) -> Vec<f64> {
        self.iter().flat_map(|s| norm.apply(s)).collect()
    }

    /// Standardized triples as a sequence for recurrent models.
    pub fn sequence_features(&self, norm: &Normalization) -> Vec<Vec<f64>> {
        self.iter().map(|s| norm.apply(s).to_vec()).collect()
    }
}
