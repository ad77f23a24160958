use rand::Rng;

use crate::model::{ActionId, FactoredState};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: FactoredState,
    pub action: ActionId,
    pub reward: f64,
    pub next: FactoredState,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer; the oldest entry is overwritten once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::new(), head: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// `n` distinct entries drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<&Transition> {
        rand::seq::index::sample(rng, self.items.len(), n.min(self.items.len()))
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        let s = FactoredState::from(vec![1]);
        Transition { state: s.clone(), action: ActionId(0), reward: r, next: s, terminal: false }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = b.items.iter().map(|x| x.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut got: Vec<f64> = b.sample(&mut rng, 10).iter().map(|x| x.reward).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, (0..10).map(f64::from).collect::<Vec<_>>());
    }
}
