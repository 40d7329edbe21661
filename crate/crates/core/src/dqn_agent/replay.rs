use rand::seq::index;
use rand::Rng;

use super::Transition;

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
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

    /// Appends, evicting the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample without replacement; `None` while fewer than
    /// `batch_size` transitions are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), batch_size)
                .into_iter()
                .map(|i| self.items[i].clone())
                .collect(),
        )
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            action: 0,
            reward: 0.0,
            next_state: vec![tag],
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..4 {
            buf.push(t(i as f64));
        }
        let tags: Vec<f64> = buf.iter().map(|t| t.state[0]).collect();
        assert_eq!(tags, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn not_ready_below_batch_size() {
        let mut buf = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        buf.push(t(0.0));
        assert!(buf.sample(2, &mut rng).is_none());
        buf.push(t(1.0));
        assert_eq!(buf.sample(2, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn batch_has_no_repeats() {
        let mut buf = ReplayBuffer::new(20);
        for i in 0..20 {
            buf.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut tags: Vec<i64> = buf
                .sample(10, &mut rng)
                .unwrap()
                .iter()
                .map(|t| t.state[0] as i64)
                .collect();
            tags.sort_unstable();
            tags.dedup();
            assert_eq!(tags.len(), 10);
        }
    }

    #[test]
    fn sampling_is_uniform() {
        // 10 slots, batches of 1, 10,000 draws: each count ~ Binomial(10^4, 0.1),
        // sigma = 30. Allow 3 sigma plus a chi-square sanity bound.
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            let s = buf.sample(1, &mut rng).unwrap();
            counts[s[0].state[0] as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 90.0, "{counts:?}");
        }
    }
}
