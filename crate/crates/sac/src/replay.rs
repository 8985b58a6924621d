//! Fixed-capacity FIFO replay memory.

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use crate::Scalar;

/// A sampled minibatch, one row per transition.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub states: Array2<T>,
    pub actions: Array2<T>,
    /// Column of rewards.
    pub rewards: Array2<T>,
    pub next_states: Array2<T>,
    /// 1 for terminal transitions.
    pub dones: Array2<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ring store that grows on demand up to `capacity`, then overwrites the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<T>,
    actions: Vec<T>,
    rewards: Vec<T>,
    next_states: Vec<T>,
    dones: Vec<T>,
    len: usize,
    cursor: usize,
    pushed: u64,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            len: 0,
            cursor: 0,
            pushed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Transitions ever pushed, including evicted ones.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, state: &[T], action: &[T], reward: T, next_state: &[T], done: bool) {
        assert_eq!(state.len(), self.state_dim);
        assert_eq!(next_state.len(), self.state_dim);
        assert_eq!(action.len(), self.action_dim);
        let d = if done { T::one() } else { T::zero() };
        if self.len < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.dones.push(d);
            self.len += 1;
        } else {
            let i = self.cursor;
            let (sd, ad) = (self.state_dim, self.action_dim);
            self.states[i * sd..(i + 1) * sd].copy_from_slice(state);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_states[i * sd..(i + 1) * sd].copy_from_slice(next_state);
            self.dones[i] = d;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Reward stored at slot `i`.
    pub fn reward_at(&self, i: usize) -> T {
        self.rewards[i]
    }

    /// Uniform minibatch without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Batch<T> {
        assert!(batch > 0 && batch <= self.len, "batch {batch} from {} transitions", self.len);
        let picks = index::sample(rng, self.len, batch);
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut out = Batch {
            states: Array2::zeros((batch, sd)),
            actions: Array2::zeros((batch, ad)),
            rewards: Array2::zeros((batch, 1)),
            next_states: Array2::zeros((batch, sd)),
            dones: Array2::zeros((batch, 1)),
        };
        for (row, i) in picks.into_iter().enumerate() {
            for c in 0..sd {
                out.states[[row, c]] = self.states[i * sd + c];
                out.next_states[[row, c]] = self.next_states[i * sd + c];
            }
            for c in 0..ad {
                out.actions[[row, c]] = self.actions[i * ad + c];
            }
            out.rewards[[row, 0]] = self.rewards[i];
            out.dones[[row, 0]] = self.dones[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn push_n(b: &mut ReplayBuffer<f64>, n: usize) {
        for k in 0..n {
            let v = k as f64;
            b.push(&[v, v], &[v], v, &[v + 1.0, v + 1.0], k % 10 == 9);
        }
    }

    #[test]
    fn fifo_eviction_and_capacity() {
        let mut b = ReplayBuffer::new(5, 2, 1);
        push_n(&mut b, 12);
        assert_eq!(b.len(), 5);
        assert_eq!(b.total_pushed(), 12);
        let mut kept: Vec<f64> = (0..5).map(|i| b.reward_at(i)).collect();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, vec![7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn sampling_without_replacement_keeps_rows_aligned() {
        let mut b = ReplayBuffer::new(100, 2, 1);
        push_n(&mut b, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(&mut rng, 40);
        let mut seen: Vec<f64> = batch.rewards.iter().copied().collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 40);
        for r in 0..40 {
            let v = batch.rewards[[r, 0]];
            assert_eq!(batch.states[[r, 1]], v);
            assert_eq!(batch.actions[[r, 0]], v);
            assert_eq!(batch.next_states[[r, 0]], v + 1.0);
            assert_eq!(batch.dones[[r, 0]], if v as usize % 10 == 9 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    #[should_panic]
    fn oversized_batch_is_rejected() {
        let mut b = ReplayBuffer::new(10, 2, 1);
        push_n(&mut b, 3);
        b.sample(&mut ChaCha8Rng::seed_from_u64(0), 4);
    }
}
