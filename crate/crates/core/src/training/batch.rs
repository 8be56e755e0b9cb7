use crate::rng::Prng;

/// Endless minibatch index stream: each epoch is a fresh
/// [`Prng::shuffle`] of `0..n`, and batches may straddle epochs.
#[derive(Clone, Debug)]
pub struct Batcher {
    order: Vec<usize>,
    pos: usize,
    rng: Prng,
}

impl Batcher {
    pub fn new(n: usize, mut rng: Prng) -> Self {
        assert!(n > 0, "batcher over an empty set");
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Batcher { order, pos: 0, rng }
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}
