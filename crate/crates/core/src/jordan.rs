//! Product signatures and generalized Jordan products
//! `T_{i1}···T_{im} + T_{im}···T_{i1}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Longest accepted slot sequence.
pub const MAX_ORDER: usize = 32;

/// A validated slot sequence. Slots are numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ProductSignature {
    seq: Vec<usize>,
    k: usize,
    p: usize,
}

impl ProductSignature {
    /// Validates `seq` and takes the first position whose slot occurs once.
    pub fn new(seq: Vec<usize>) -> Result<Self> {
        let k = Self::validate(&seq)?;
        let p = (0..seq.len())
            .find(|&i| seq.iter().filter(|&&v| v == seq[i]).count() == 1)
            .ok_or_else(|| Error::InvalidSignature("no slot occurs exactly once".into()))?;
        Ok(Self { seq, k, p: p + 1 })
    }

    /// Like [`new`](Self::new) with an explicit distinguished position (1-based).
    pub fn with_position(seq: Vec<usize>, p: usize) -> Result<Self> {
        let k = Self::validate(&seq)?;
        if p == 0 || p > seq.len() {
            return Err(Error::InvalidSignature(format!("position {p} outside 1..={}", seq.len())));
        }
        let slot = seq[p - 1];
        if seq.iter().filter(|&&v| v == slot).count() != 1 {
            return Err(Error::InvalidSignature(format!(
                "slot {slot} at position {p} occurs more than once"
            )));
        }
        Ok(Self { seq, k, p })
    }

    fn validate(seq: &[usize]) -> Result<usize> {
        if seq.len() < 2 || seq.len() > MAX_ORDER {
            return Err(Error::InvalidSignature(format!(
                "length {} outside 2..={MAX_ORDER}",
                seq.len()
            )));
        }
        let k = *seq.iter().max().unwrap();
        if seq.contains(&0) {
            return Err(Error::InvalidSignature("slots are numbered from 1".into()));
        }
        if k < 2 {
            return Err(Error::InvalidSignature("at least two slots are required".into()));
        }
        if let Some(missing) = (1..=k).find(|i| !seq.contains(i)) {
            return Err(Error::InvalidSignature(format!("slot {missing} is never used")));
        }
        Ok(k)
    }

    pub fn seq(&self) -> &[usize] {
        &self.seq
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.seq.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Slot index placed at the distinguished position.
    pub fn unique_slot(&self) -> usize {
        self.seq[self.p - 1]
    }

    pub fn r(&self) -> u32 {
        (self.p - 1).min(self.m() - self.p) as u32
    }

    pub fn s(&self) -> u32 {
        (self.p - 1).max(self.m() - self.p) as u32
    }

    pub fn reversed(&self) -> Self {
        let seq: Vec<usize> = self.seq.iter().rev().copied().collect();
        let p = self.m() + 1 - self.p;
        Self { seq, k: self.k, p }
    }
}

impl FromStr for ProductSignature {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let seq = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidSignature(format!("bad slot index {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(seq)
    }
}

impl fmt::Display for ProductSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.seq.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<Vec<usize>> for ProductSignature {
    type Error = Error;
    fn try_from(seq: Vec<usize>) -> Result<Self> {
        Self::new(seq)
    }
}

impl From<ProductSignature> for Vec<usize> {
    fn from(sig: ProductSignature) -> Self {
        sig.seq
    }
}

fn check_dims(ops: &[&ComplexMatrix]) -> Result<usize> {
    let n = ops[0].dim();
    for op in ops {
        if op.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: op.dim() });
        }
    }
    Ok(n)
}

/// `T_{i1}···T_{im} + T_{im}···T_{i1}` for the `k` operators in `ops`.
pub fn general_product(sig: &ProductSignature, ops: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if ops.len() != sig.k() {
        return Err(Error::DimensionMismatch { expected: sig.k(), found: ops.len() });
    }
    let refs: Vec<&ComplexMatrix> = ops.iter().collect();
    let n = check_dims(&refs)?;
    // both words use the same left fold, so reversing the signature swaps them bit for bit
    let word = |seq: &mut dyn Iterator<Item = &usize>| seq.fold(ComplexMatrix::identity(n), |acc, &i| &acc * &ops[i - 1]);
    let forward = word(&mut sig.seq().iter());
    let backward = word(&mut sig.seq().iter().rev());
    Ok(forward + backward)
}

/// `BʳABˢ + BˢABʳ` with `B⁰ = I`.
pub fn two_slot_product(a: &ComplexMatrix, b: &ComplexMatrix, r: u32, s: u32) -> Result<ComplexMatrix> {
    check_dims(&[a, b])?;
    if r > s || s == 0 || s as usize >= MAX_ORDER {
        return Err(Error::BadExponents { r, s });
    }
    let br = b.pow(r);
    let bs = if r == s { br.clone() } else { b.pow(s) };
    let left = &(&br * a) * &bs;
    if r == s {
        return Ok(&left + &left);
    }
    Ok(left + &(&(&bs * a) * &br))
}

/// `A` in the distinguished slot and `B` in every other slot.
pub fn specialize(sig: &ProductSignature, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    two_slot_product(a, b, sig.r(), sig.s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::random::{gaussian_matrix, rng_for};

    fn sig(text: &str) -> ProductSignature {
        text.parse().unwrap()
    }

    #[test]
    fn parses_and_derives_exponents() {
        let s = sig("2,1,2");
        assert_eq!((s.k(), s.m(), s.p(), s.r(), s.s()), (2, 3, 2, 1, 1));
        let s = sig("1,2,2");
        assert_eq!((s.p(), s.r(), s.s()), (1, 0, 2));
        assert_eq!(s.to_string(), "1,2,2");
    }

    #[test]
    fn rejects_invalid_sequences() {
        for bad in ["1,1", "1,3", "2,2,1,1", "0,1", "1", "a,b"] {
            assert!(matches!(bad.parse::<ProductSignature>(), Err(Error::InvalidSignature(_))), "{bad}");
        }
        assert!(ProductSignature::with_position(vec![1, 2, 1], 1).is_err());
    }

    #[test]
    fn jordan_and_triple_products() {
        let mut rng = rng_for(11, 0);
        let a = gaussian_matrix(&mut rng, 3);
        let b = gaussian_matrix(&mut rng, 3);
        let c = gaussian_matrix(&mut rng, 3);
        let jp = general_product(&sig("1,2"), &[a.clone(), b.clone()]).unwrap();
        assert!((&jp - &(&(&a * &b) + &(&b * &a))).frobenius_norm() < 1e-12);
        let tp = general_product(&sig("1,2,3"), &[a.clone(), b.clone(), c.clone()]).unwrap();
        let direct = &(&(&a * &b) * &c) + &(&(&c * &b) * &a);
        assert!((&tp - &direct).frobenius_norm() < 1e-12);
        let i = ComplexMatrix::identity(3);
        let two = general_product(&sig("1,2"), &[i.clone(), i]).unwrap();
        assert_eq!(two, ComplexMatrix::identity(3).scale(c64(2.0, 0.0)));
    }

    #[test]
    fn two_slot_small_cases() {
        let mut rng = rng_for(12, 0);
        let a = gaussian_matrix(&mut rng, 4);
        let b = gaussian_matrix(&mut rng, 4);
        let jordan = two_slot_product(&a, &b, 0, 1).unwrap();
        assert!((&jordan - &(&(&a * &b) + &(&b * &a))).frobenius_norm() < 1e-12);
        let sym = two_slot_product(&a, &b, 1, 1).unwrap();
        let bab = &(&b * &a) * &b;
        assert!((&sym - &(&bab + &bab)).frobenius_norm() < 1e-12);
        assert!(matches!(two_slot_product(&a, &b, 0, 0), Err(Error::BadExponents { .. })));
        let small = ComplexMatrix::identity(2);
        assert!(matches!(two_slot_product(&a, &small, 0, 1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn specialize_examples() {
        let mut rng = rng_for(13, 0);
        let a = gaussian_matrix(&mut rng, 3);
        let b = gaussian_matrix(&mut rng, 3);
        let bab = &(&b * &a) * &b;
        let got = specialize(&sig("2,1,2"), &a, &b).unwrap();
        assert!((&got - &(&bab + &bab)).frobenius_norm() < 1e-12);
        let b2 = &b * &b;
        let got = specialize(&sig("1,2,2"), &a, &b).unwrap();
        assert!((&got - &(&(&a * &b2) + &(&b2 * &a))).frobenius_norm() < 1e-12);
    }
}
