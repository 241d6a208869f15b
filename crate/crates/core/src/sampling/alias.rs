use super::RngState;
use crate::error::{Error, Result};
use crate::numeric::Scalar;

/// Walker/Vose alias table for O(1) draws from a fixed distribution.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn build<T: Scalar>(weights: &[T]) -> Result<Self> {
        let w: Vec<f64> = weights.iter().map(|x| x.to_f()).collect();
        if w.is_empty() || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("alias weights must be finite and nonnegative".into()));
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("alias weights sum to zero".into()));
        }
        let n = w.len();
        let mut scaled: Vec<f64> = w.iter().map(|x| x * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, s) in scaled.iter().enumerate() {
            if *s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Ok(Self { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngState) -> usize {
        self.sample_with(rng.uniform())
    }

    /// Draw driven by a single uniform `u ∈ [0,1)`: the integer part picks a slot, the fraction decides alias.
    #[inline]
    pub fn sample_with(&self, u: f64) -> usize {
        let n = self.prob.len();
        let x = u * n as f64;
        let slot = (x as usize).min(n - 1);
        if x - (slot as f64) < self.prob[slot] {
            slot
        } else {
            self.alias[slot]
        }
    }

    /// The distribution the table actually samples from.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.prob.len();
        let mut p = vec![0.0; n];
        for i in 0..n {
            p[i] += self.prob[i] / n as f64;
            p[self.alias[i]] += (1.0 - self.prob[i]) / n as f64;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Stream;

    fn frequencies(table: &AliasTable, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngState::for_role(seed, Stream::Test);
        let mut counts = vec![0usize; table.len()];
        for _ in 0..draws {
            counts[table.sample(&mut rng)] += 1;
        }
        counts.iter().map(|c| *c as f64 / draws as f64).collect()
    }

    #[test]
    fn singleton_table() {
        let t = AliasTable::build(&[1.0]).unwrap();
        let mut rng = RngState::for_role(0, Stream::Test);
        assert!((0..1000).all(|_| t.sample(&mut rng) == 0));
    }

    #[test]
    fn empirical_frequencies() {
        let f = frequencies(&AliasTable::build(&[0.5, 0.5]).unwrap(), 1_000_000, 1);
        assert!((f[0] - 0.5).abs() < 0.002);
        let f = frequencies(&AliasTable::build(&[1.0, 3.0]).unwrap(), 1_000_000, 2);
        assert!((f[0] - 0.25).abs() < 0.002 && (f[1] - 0.75).abs() < 0.002);
    }

    #[test]
    fn reconstruction_is_exact() {
        let w = [0.1, 0.0, 2.5, 1.0, 0.4];
        let total: f64 = w.iter().sum();
        let r = AliasTable::build(&w).unwrap().reconstruct();
        for (a, b) in r.iter().zip(&w) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AliasTable::build(&[0.0, 0.0]).is_err());
        assert!(AliasTable::build(&[1.0, -1.0]).is_err());
        assert!(AliasTable::build::<f64>(&[]).is_err());
    }
}
