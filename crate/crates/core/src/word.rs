//! Words in the surface group: free and cyclic reduction, rotations,
//! canonical cyclic forms. All operations here are exact.

use serde::{Deserialize, Serialize};

/// A freely reduced word. Letters are signed 1-based generator indices:
/// letter `k` is the k-th generator, `-k` its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<i8>);

fn letter_key(l: i8) -> (u8, bool) {
    (l.unsigned_abs(), l < 0)
}

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: i8) -> Self {
        debug_assert!(l != 0);
        Word(vec![l])
    }

    pub fn from_letters(ls: &[i8]) -> Self {
        free_reduce_vec(ls.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    /// Concatenate and freely reduce.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        for &l in &other.0 {
            if v.last() == Some(&-l) {
                v.pop();
            } else {
                v.push(l);
            }
        }
        Word(v)
    }

    /// Remove cancelling prefix/suffix pairs; the result represents the same
    /// conjugacy class.
    pub fn cyclic_reduce(&self) -> Word {
        let mut v = self.0.clone();
        while v.len() >= 2 && *v.first().unwrap() == -*v.last().unwrap() {
            v.pop();
            v.remove(0);
        }
        Word(v)
    }

    /// Lexicographically minimal rotation (generator index, then exponent) of
    /// the cyclic reduction: the canonical conjugacy-class form at word level.
    pub fn canonical_cyclic(&self) -> Word {
        let w = self.cyclic_reduce();
        if w.0.len() <= 1 {
            return w;
        }
        let n = w.0.len();
        let mut best = 0usize;
        for start in 1..n {
            for k in 0..n {
                let a = letter_key(w.0[(start + k) % n]);
                let b = letter_key(w.0[(best + k) % n]);
                match a.cmp(&b) {
                    std::cmp::Ordering::Less => {
                        best = start;
                        break;
                    }
                    std::cmp::Ordering::Greater => break,
                    std::cmp::Ordering::Equal => {}
                }
            }
        }
        Word((0..n).map(|k| w.0[(best + k) % n]).collect())
    }

    /// Exponent-sum vector of length `ngens`.
    pub fn abelianize(&self, ngens: usize) -> Vec<i64> {
        let mut v = vec![0i64; ngens];
        for &l in &self.0 {
            let idx = (l.unsigned_abs() - 1) as usize;
            v[idx] += if l > 0 { 1 } else { -1 };
        }
        v
    }
}

pub fn free_reduce_vec(ls: Vec<i8>) -> Word {
    let mut v: Vec<i8> = Vec::with_capacity(ls.len());
    for l in ls {
        debug_assert!(l != 0);
        if v.last() == Some(&-l) {
            v.pop();
        } else {
            v.push(l);
        }
    }
    Word(v)
}

/// Exact word-level conjugacy in the free group: cyclic reductions are
/// rotations of each other.
pub fn are_conjugate(w1: &Word, w2: &Word) -> bool {
    w1.canonical_cyclic() == w2.canonical_cyclic()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_basics() {
        assert!(Word::from_letters(&[1, -1]).is_empty());
        assert_eq!(Word::from_letters(&[1, 2, -2, 1]), Word(vec![1, 1]));
        assert_eq!(Word::from_letters(&[-2, 1, 2]).cyclic_reduce(), Word(vec![1]));
    }

    #[test]
    fn conjugacy_by_rotation() {
        let w = Word::from_letters(&[1, 2, -3, 4]);
        let g = Word::from_letters(&[3, -2]);
        let conj = g.concat(&w).concat(&g.inverse());
        assert!(are_conjugate(&w, &conj));
        assert!(!are_conjugate(&Word::letter(1), &Word::letter(2)));
    }

    #[test]
    fn reverse_inverse_generic() {
        // the reverse-inverse of a generic word is usually not conjugate to it;
        // exhaustive rotation check is the oracle
        let w = Word::from_letters(&[1, 2, 1, -3]);
        let ri = w.inverse();
        let c1 = w.canonical_cyclic();
        let c2 = ri.canonical_cyclic();
        let mut is_rot = false;
        let n = c1.len();
        if n == c2.len() {
            for s in 0..n {
                if (0..n).all(|k| c1.0[(s + k) % n] == c2.0[k]) {
                    is_rot = true;
                }
            }
        }
        assert_eq!(are_conjugate(&w, &ri), is_rot);
        assert!(!is_rot);
    }

    #[test]
    fn abelianize_is_homomorphism() {
        let u = Word::from_letters(&[1, 1, -2]);
        assert_eq!(u.abelianize(4), vec![2, -1, 0, 0]);
        let v = Word::from_letters(&[2, -1, 3]);
        let uv = u.concat(&v);
        let sum: Vec<i64> = u
            .abelianize(4)
            .iter()
            .zip(v.abelianize(4))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(uv.abelianize(4), sum);
        let comm = Word::from_letters(&[1, 2, -1, -2]);
        assert_eq!(comm.abelianize(4), vec![0; 4]);
    }

    #[test]
    fn canonical_invariant_under_rotation() {
        let w = Word::from_letters(&[1, -2, 3, -4, 2]);
        let c = w.canonical_cyclic();
        for s in 0..w.len() {
            let rot: Vec<i8> = (0..w.len()).map(|k| w.0[(s + k) % w.len()]).collect();
            assert_eq!(Word(rot).canonical_cyclic(), c);
        }
    }
}
