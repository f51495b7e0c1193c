use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::NetworkShape;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, RandomStream};

/// Channel coefficients `h(hop, slot)[rx][tx]` for every hop and slot. Hops and slots are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTensor {
    shape: NetworkShape,
    slots: usize,
    stream: RandomStream,
    entries: Vec<Complex64>,
}

/// Draws i.i.d. nonzero complex Gaussian coefficients for `slots` slots.
pub fn draw_channels(shape: NetworkShape, slots: usize, stream: RandomStream) -> Result<ChannelTensor> {
    if slots < 1 {
        return Err(Error::Domain("channel tensor needs at least one slot".into()));
    }
    let k = shape.users;
    let mut rng = stream.rng();
    let entries = (0..slots * shape.hops * k * k).map(|_| rng.nonzero_complex_normal()).collect();
    Ok(ChannelTensor { shape, slots, stream, entries })
}

impl ChannelTensor {
    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn stream(&self) -> RandomStream {
        self.stream
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn check(&self, hop: usize, slot: usize) -> Result<()> {
        if hop == 0 || hop > self.shape.hops {
            return Err(Error::Index(format!("hop {hop} outside 1..={}", self.shape.hops)));
        }
        if slot == 0 || slot > self.slots {
            return Err(Error::Index(format!("slot {slot} outside 1..={}", self.slots)));
        }
        Ok(())
    }

    fn offset(&self, hop: usize, slot: usize) -> usize {
        let k = self.shape.users;
        ((slot - 1) * self.shape.hops + (hop - 1)) * k * k
    }

    /// Coefficient from transmitter `tx` to receiver `rx` (zero-based users).
    pub fn h(&self, hop: usize, slot: usize, rx: usize, tx: usize) -> Complex64 {
        self.check(hop, slot).expect("channel index");
        let k = self.shape.users;
        assert!(rx < k && tx < k, "user index out of range");
        self.entries[self.offset(hop, slot) + rx * k + tx]
    }

    /// The K×K matrix of one hop at one slot.
    pub fn hop_matrix(&self, hop: usize, slot: usize) -> Result<ComplexMatrix> {
        self.check(hop, slot)?;
        let k = self.shape.users;
        let o = self.offset(hop, slot);
        ComplexMatrix::new(k, k, self.entries[o..o + k * k].to_vec())
    }

    /// Row `rx` of one hop matrix.
    pub fn row(&self, hop: usize, slot: usize, rx: usize) -> Vec<Complex64> {
        (0..self.shape.users).map(|j| self.h(hop, slot, rx, j)).collect()
    }
}

/// Noise-free propagation `yᵢ = Σⱼ h(hop, slot)[i][j]·xⱼ`.
pub fn propagate(ch: &ChannelTensor, hop: usize, slot: usize, x: &[Complex64]) -> Result<Vec<Complex64>> {
    ch.check(hop, slot)?;
    let k = ch.shape.users;
    if x.len() != k {
        return Err(Error::Dimension(format!("transmit vector has length {}, expected {k}", x.len())));
    }
    let o = ch.offset(hop, slot);
    Ok((0..k).map(|i| (0..k).map(|j| ch.entries[o + i * k + j] * x[j]).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(seed: u64) -> ChannelTensor {
        draw_channels(NetworkShape::new(3, 3).unwrap(), 200, RandomStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn deterministic_and_nonzero() {
        let a = tensor(5);
        assert_eq!(a, tensor(5));
        assert_ne!(a, tensor(6));
        assert_eq!(a.entries().len(), 5400);
        assert!(a.entries().iter().all(|z| z.norm() > 0.0));
    }

    #[test]
    fn unit_vector_reads_column() {
        let ch = tensor(1);
        let zero = vec![Complex64::new(0.0, 0.0); 3];
        assert_eq!(propagate(&ch, 2, 7, &zero).unwrap(), zero);
        let mut e = zero.clone();
        e[1] = Complex64::new(1.0, 0.0);
        let y = propagate(&ch, 2, 7, &e).unwrap();
        for (i, yi) in y.iter().enumerate() {
            assert_eq!(*yi, ch.h(2, 7, i, 1));
        }
    }

    #[test]
    fn index_errors() {
        let ch = tensor(1);
        let x = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(propagate(&ch, 0, 1, &x), Err(Error::Index(_))));
        assert!(matches!(propagate(&ch, 4, 1, &x), Err(Error::Index(_))));
        assert!(matches!(propagate(&ch, 1, 201, &x), Err(Error::Index(_))));
        assert!(matches!(propagate(&ch, 1, 1, &x[..2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn hop_matrix_matches_entries() {
        let ch = tensor(2);
        let m = ch.hop_matrix(3, 11).unwrap();
        assert_eq!(m[(2, 0)], ch.h(3, 11, 2, 0));
    }

    proptest! {
        #[test]
        fn superposition(seed in 0u64..100, hop in 1usize..4, slot in 1usize..201) {
            let ch = tensor(seed);
            let mut rng = RandomStream::new(seed, 99).rng();
            let a = rng.complex_vec(3);
            let b = rng.complex_vec(3);
            let sum: Vec<_> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
            let ya = propagate(&ch, hop, slot, &a).unwrap();
            let yb = propagate(&ch, hop, slot, &b).unwrap();
            let ys = propagate(&ch, hop, slot, &sum).unwrap();
            for i in 0..3 {
                prop_assert!((ys[i] - ya[i] - yb[i]).norm() < 1e-12);
            }
        }

        #[test]
        fn slot_isolation(seed in 0u64..50, slot in 2usize..200) {
            // Output at one slot depends only on that slot's coefficients.
            let ch = tensor(seed);
            let x = RandomStream::new(seed, 7).rng().complex_vec(3);
            let y = propagate(&ch, 1, slot, &x).unwrap();
            let m = ch.hop_matrix(1, slot).unwrap();
            let direct = m.mul_vec(&x).unwrap();
            for i in 0..3 {
                prop_assert!((y[i] - direct[i]).norm() < 1e-12);
            }
        }
    }
}
