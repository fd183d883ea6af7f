use rand::Rng;

/// One stored step. States are the normalised feature pairs fed to the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; 2],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; 2],
    /// Levels affordable in the next state; the TD maximum runs over these.
    pub next_feasible: usize,
}

/// Fixed-capacity ring buffer; once full, the oldest transition is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
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

    /// Oldest-to-newest view.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (a, b) = self.items.split_at(self.head);
        b.iter().chain(a.iter())
    }

    /// Uniform minibatch without replacement; at most `len()` items.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, size: usize) -> Vec<&Transition> {
        let n = size.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n)
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

    fn t(i: usize) -> Transition {
        Transition {
            state: [i as f64, 0.0],
            action: i,
            reward: 0.0,
            next_state: [0.0; 2],
            next_feasible: 1,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut m = ReplayMemory::new(3);
        for i in 0..5 {
            m.push(t(i));
            assert!(m.len() <= 3);
        }
        let order: Vec<usize> = m.iter().map(|x| x.action).collect();
        assert_eq!(order, vec![2, 3, 4]);
    }

    #[test]
    fn minibatch_has_no_repeats() {
        let mut m = ReplayMemory::new(100);
        for i in 0..100 {
            m.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut got: Vec<usize> = m.sample(&mut rng, 40).iter().map(|x| x.action).collect();
        got.sort();
        got.dedup();
        assert_eq!(got.len(), 40);
        assert_eq!(m.sample(&mut rng, 500).len(), 100);
    }
}
