//! Finite multisets with deterministic (sorted) iteration.

use std::collections::btree_map::{self, BTreeMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A finite multiset. Elements with multiplicity zero are never stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord> {
    entries: BTreeMap<T, usize>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset {
            entries: BTreeMap::new(),
        }
    }
}

impl<T: Ord> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(elem: T, count: usize) -> Self {
        let mut m = Self::new();
        m.insert_n(elem, count);
        m
    }

    pub fn insert(&mut self, elem: T) {
        self.insert_n(elem, 1);
    }

    pub fn insert_n(&mut self, elem: T, count: usize) {
        if count > 0 {
            *self.entries.entry(elem).or_insert(0) += count;
        }
    }

    /// Removes up to `count` copies; returns how many were actually removed.
    pub fn remove_n(&mut self, elem: &T, count: usize) -> usize {
        match self.entries.get_mut(elem) {
            None => 0,
            Some(c) if *c > count => {
                *c -= count;
                count
            }
            Some(_) => self.entries.remove(elem).unwrap_or(0),
        }
    }

    pub fn remove_one(&mut self, elem: &T) -> bool {
        self.remove_n(elem, 1) == 1
    }

    pub fn count(&self, elem: &T) -> usize {
        self.entries.get(elem).copied().unwrap_or(0)
    }

    pub fn contains(&self, elem: &T) -> bool {
        self.entries.contains_key(elem)
    }

    /// Total number of copies.
    pub fn size(&self) -> usize {
        self.entries.values().sum()
    }

    /// Number of distinct elements.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates `(element, multiplicity)` in ascending element order.
    pub fn iter(&self) -> btree_map::Iter<'_, T, usize> {
        self.entries.iter()
    }

    pub fn elements(&self) -> btree_map::Keys<'_, T, usize> {
        self.entries.keys()
    }

    /// Every copy, repeated by multiplicity, in ascending order.
    pub fn iter_copies(&self) -> impl Iterator<Item = &T> + '_ {
        self.entries
            .iter()
            .flat_map(|(e, &n)| std::iter::repeat_n(e, n))
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.entries.iter().all(|(e, &n)| other.count(e) >= n)
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &n) in other.iter() {
            out.insert_n(e.clone(), n);
        }
        out
    }

    /// Saturating difference: counts never go below zero.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &n) in other.iter() {
            out.remove_n(e, n);
        }
        out
    }

    pub fn map<U: Ord, F: FnMut(&T) -> U>(&self, mut f: F) -> Multiset<U> {
        let mut out = Multiset::new();
        for (e, &n) in self.iter() {
            out.insert_n(f(e), n);
        }
        out
    }
}

pub fn union<T: Ord + Clone>(a: &Multiset<T>, b: &Multiset<T>) -> Multiset<T> {
    a.union(b)
}

pub fn difference<T: Ord + Clone>(a: &Multiset<T>, b: &Multiset<T>) -> Multiset<T> {
    a.difference(b)
}

pub fn subset<T: Ord>(a: &Multiset<T>, b: &Multiset<T>) -> bool {
    a.is_subset(b)
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Multiset::new();
        for e in iter {
            m.insert(e);
        }
        m
    }
}

impl<T: Ord> FromIterator<(T, usize)> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = (T, usize)>>(iter: I) -> Self {
        let mut m = Multiset::new();
        for (e, n) in iter {
            m.insert_n(e, n);
        }
        m
    }
}

impl<'a, T: Ord> IntoIterator for &'a Multiset<T> {
    type Item = (&'a T, &'a usize);
    type IntoIter = btree_map::Iter<'a, T, usize>;
    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

impl<T: Ord + fmt::Display> fmt::Display for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⦃")?;
        for (i, (e, n)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}{e}")?;
        }
        f.write_str("⦄")
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("⦃")?;
        for (i, (e, n)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n} {e:?}")?;
        }
        f.write_str("⦄")
    }
}

/// Serialized as a flat sorted list with repeats, e.g. `["A", "A", "B"]`.
impl<T: Ord + Serialize> Serialize for Multiset<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter_copies())
    }
}

impl<'de, T: Ord + Deserialize<'de>> Deserialize<'de> for Multiset<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<T>::deserialize(d)?;
        Ok(items.into_iter().collect())
    }
}
