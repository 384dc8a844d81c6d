use rand::Rng;

/// Experience record. `state` and `next_state` are flattened normalized
/// windows; `terminal` stops bootstrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer that overwrites the oldest entry when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Storage slot `i` (not age order).
    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Distinct storage slots drawn uniformly, at most `len()` of them.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.items.len(), batch.min(self.items.len())).into_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    proptest! {
        #[test]
        fn keeps_the_most_recent(capacity in 1usize..50, n in 0usize..200) {
            let mut buf = ReplayBuffer::new(capacity);
            for i in 0..n {
                buf.push(i);
            }
            prop_assert_eq!(buf.len(), n.min(capacity));
            let got: Vec<usize> = buf.iter().copied().collect();
            let want: Vec<usize> = (n.saturating_sub(capacity)..n).collect();
            prop_assert_eq!(got, want);
        }

        #[test]
        fn samples_without_replacement(n in 1usize..100, batch in 1usize..120, seed in any::<u64>()) {
            let mut buf = ReplayBuffer::new(64);
            for i in 0..n {
                buf.push(i);
            }
            let idx = buf.sample(&mut ChaCha8Rng::seed_from_u64(seed), batch);
            prop_assert_eq!(idx.len(), batch.min(buf.len()));
            prop_assert_eq!(idx.iter().collect::<HashSet<_>>().len(), idx.len());
        }
    }
}
