use ndarray::{Array1, Array2};
use rand::Rng;

/// A sampled minibatch; `done[i]` is 1 for transitions that end the
/// bootstrapped return.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Array1<f64>,
    pub s2: Array2<f64>,
    pub done: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Ring buffer holding the most recent `capacity` transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s2: Vec<f64>,
    done: Vec<bool>,
    len: usize,
    head: usize,
}

/// One stored transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s2: Vec<f64>,
    pub done: bool,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            state_dim,
            action_dim,
            s: vec![0.0; capacity * state_dim],
            a: vec![0.0; capacity * action_dim],
            r: vec![0.0; capacity],
            s2: vec![0.0; capacity * state_dim],
            done: vec![false; capacity],
            len: 0,
            head: 0,
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

    pub fn push(&mut self, s: &[f64], a: &[f64], r: f64, s2: &[f64], done: bool) {
        let (d, k, i) = (self.state_dim, self.action_dim, self.head);
        self.s[i * d..(i + 1) * d].copy_from_slice(s);
        self.a[i * k..(i + 1) * k].copy_from_slice(a);
        self.r[i] = r;
        self.s2[i * d..(i + 1) * d].copy_from_slice(s2);
        self.done[i] = done;
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// The `k`-th oldest stored transition.
    pub fn get(&self, k: usize) -> Option<Transition> {
        if k >= self.len {
            return None;
        }
        let i = (self.head + self.capacity - self.len + k) % self.capacity;
        let (d, n) = (self.state_dim, self.action_dim);
        Some(Transition {
            s: self.s[i * d..(i + 1) * d].to_vec(),
            a: self.a[i * n..(i + 1) * n].to_vec(),
            r: self.r[i],
            s2: self.s2[i * d..(i + 1) * d].to_vec(),
            done: self.done[i],
        })
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Batch {
        assert!(self.len > 0, "sampling from an empty buffer");
        let (d, k) = (self.state_dim, self.action_dim);
        let mut s = Array2::zeros((n, d));
        let mut a = Array2::zeros((n, k));
        let mut r = Array1::zeros(n);
        let mut s2 = Array2::zeros((n, d));
        let mut done = Array1::zeros(n);
        for row in 0..n {
            let i = rng.gen_range(0..self.len);
            for j in 0..d {
                s[[row, j]] = self.s[i * d + j];
                s2[[row, j]] = self.s2[i * d + j];
            }
            for j in 0..k {
                a[[row, j]] = self.a[i * k + j];
            }
            r[row] = self.r[i];
            done[row] = if self.done[i] { 1.0 } else { 0.0 };
        }
        Batch { s, a, r, s2, done }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn ring_keeps_latest(cap in 1usize..20, extra in 0usize..30, seed in any::<u64>()) {
            let mut buf = ReplayBuffer::new(cap, 2, 1);
            let total = cap + extra;
            for t in 0..total {
                let x = t as f64;
                buf.push(&[x, -x], &[x], x, &[x + 1.0, 0.0], t % 3 == 0);
            }
            prop_assert_eq!(buf.len(), cap);
            let oldest = total - cap;
            for k in 0..cap {
                let tr = buf.get(k).unwrap();
                prop_assert_eq!(tr.r, (oldest + k) as f64);
            }
            prop_assert!(buf.get(cap).is_none());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let batch = buf.sample(&mut rng, 16);
            for i in 0..16 {
                let r = batch.r[i];
                prop_assert!(r >= oldest as f64 && r < total as f64);
                prop_assert_eq!(batch.s[[i, 0]], r);
                prop_assert_eq!(batch.s[[i, 1]], -r);
                prop_assert_eq!(batch.a[[i, 0]], r);
                prop_assert_eq!(batch.s2[[i, 0]], r + 1.0);
                prop_assert_eq!(batch.done[i], if (r as usize) % 3 == 0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut buf = ReplayBuffer::new(4, 1, 1);
        for t in 0..4 {
            buf.push(&[0.0], &[0.0], t as f64, &[0.0], false);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample(&mut rng, 8000);
        for t in 0..4 {
            let c = batch.r.iter().filter(|&&r| r == t as f64).count();
            assert!((c as f64 / 8000.0 - 0.25).abs() < 0.02);
        }
    }
}
