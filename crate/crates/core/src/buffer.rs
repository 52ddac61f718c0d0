//! Fixed-capacity FIFO training buffer of (input, action) pairs.

use std::collections::VecDeque;

/// Bounded dataset buffer; inserting past capacity drops the oldest pairs.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<F> {
    capacity: usize,
    entries: VecDeque<(Vec<F>, Vec<F>)>,
}

impl<F: Clone> ReplayBuffer<F> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, input: Vec<F>, action: Vec<F>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((input, action));
    }

    pub fn extend<I: IntoIterator<Item = (Vec<F>, Vec<F>)>>(&mut self, pairs: I) {
        for (x, a) in pairs {
            self.push(x, a);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Vec<F>, Vec<F>)> {
        self.entries.iter()
    }

    /// Contiguous view of the stored pairs, oldest first.
    pub fn as_slice(&mut self) -> &[(Vec<F>, Vec<F>)] {
        self.entries.make_contiguous();
        self.entries.as_slices().0
    }

    /// Owned copy of the stored pairs, oldest first.
    pub fn to_vec(&self) -> Vec<(Vec<F>, Vec<F>)> {
        self.entries.iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction_preserves_order() {
        let mut buf = ReplayBuffer::new(5);
        for i in 0..9 {
            buf.push(vec![i as f64], vec![i as f64 * 10.0]);
        }
        assert_eq!(buf.len(), 5);
        // First four evicted, order of the rest preserved.
        let kept: Vec<f64> = buf.iter().map(|(x, _)| x[0]).collect();
        assert_eq!(kept, vec![4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn under_capacity_keeps_everything() {
        let mut buf = ReplayBuffer::new(10);
        buf.extend((0..4).map(|i| (vec![i as f64], vec![0.0])));
        assert_eq!(buf.len(), 4);
        assert_eq!(buf.as_slice().len(), 4);
    }
}
