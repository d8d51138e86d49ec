//! Canonical relabeling of lifted states.
//!
//! Labels are pointers, so two lifted states that differ only by a renaming
//! of labels (or by an order of entities) describe the same distribution. The
//! canonical form picks one representative per isomorphism class:
//!
//! 1. single-valued urns become point masses, and point masses with equal
//!    value share one label;
//! 2. urn labels (the only labels shared in a non-trivial way) are refined by
//!    their content and reference profile;
//! 3. the remaining ties among urn labels are broken by trying every
//!    permutation inside each tie class and keeping the smallest encoding;
//! 4. labels are then assigned in first-seen order over the sorted encoding.

use std::collections::BTreeMap;

use crate::distributions::{DistributionRep, Gaussian};
use crate::lifted::{Context, EntityStructure, Label, LiftedState, Structure};
use crate::multiset::Multiset;
use crate::value::Value;

/// Beyond this many tie-breaking permutations the first one found is used.
const MAX_PERMUTATIONS: usize = 40_320;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Token {
    Dirac(Value),
    Urn(usize),
    Gauss(Gaussian),
}

impl Token {
    fn is_gauss(&self) -> bool {
        matches!(self, Token::Gauss(_))
    }
}

type Encoding = Vec<(Vec<(String, Token)>, usize)>;

/// How a property slot resolves before urn labels are numbered.
#[derive(Clone)]
enum Slot {
    Known(Token),
    UrnRef(usize),
}

pub fn canonicalize(l: &LiftedState) -> LiftedState {
    let context = l.context();

    // urn labels in ascending label order; index into `urns`
    let mut urns: Vec<Multiset<Value>> = Vec::new();
    let mut urn_index: BTreeMap<Label, usize> = BTreeMap::new();
    let mut resolve = |lab: Label| -> Slot {
        match &context[&lab] {
            DistributionRep::Dirac(v) => Slot::Known(Token::Dirac(v.clone())),
            DistributionRep::Urn(u) if u.distinct() == 1 => {
                Slot::Known(Token::Dirac(u.elements().next().expect("non-empty").clone()))
            }
            DistributionRep::Urn(u) => {
                let i = *urn_index.entry(lab).or_insert_with(|| {
                    urns.push(u.clone());
                    urns.len() - 1
                });
                Slot::UrnRef(i)
            }
            DistributionRep::Gaussian(g) => Slot::Known(Token::Gauss(*g)),
        }
    };

    let entities: Vec<(Vec<(String, Slot)>, usize)> = l
        .structure()
        .iter()
        .map(|(e, &m)| (e.iter().map(|(p, lab)| (p.to_string(), resolve(lab))).collect(), m))
        .collect();

    let classes = refine(&entities, &urns);
    let best = best_encoding(&entities, &classes);
    rebuild(best, &urns)
}

struct Classes {
    /// urn indices in class order
    order: Vec<usize>,
    /// (start, len) ranges of `order` holding tied urns
    ties: Vec<(usize, usize)>,
    /// class rank per urn index
    rank: Vec<usize>,
}

fn refine(entities: &[(Vec<(String, Slot)>, usize)], urns: &[Multiset<Value>]) -> Classes {
    let n = urns.len();
    let mut rank = ranks(&urns.iter().collect::<Vec<_>>());
    let mut classes = distinct(&rank);
    while classes < n {
        // entity signature with urns replaced by their current class
        let sigs: Vec<Vec<(String, Token)>> = entities
            .iter()
            .map(|(props, _)| {
                props
                    .iter()
                    .map(|(p, s)| {
                        let t = match s {
                            Slot::Known(t) => t.clone(),
                            Slot::UrnRef(u) => Token::Urn(rank[*u]),
                        };
                        (p.clone(), t)
                    })
                    .collect()
            })
            .collect();
        let mut profiles: Vec<(usize, Vec<(String, Vec<(String, Token)>, usize)>)> =
            (0..n).map(|u| (rank[u], Vec::new())).collect();
        for ((props, m), sig) in entities.iter().zip(&sigs) {
            for (p, s) in props {
                if let Slot::UrnRef(u) = s {
                    profiles[*u].1.push((p.clone(), sig.clone(), *m));
                }
            }
        }
        for p in &mut profiles {
            p.1.sort();
        }
        let next = ranks(&profiles.iter().collect::<Vec<_>>());
        let next_classes = distinct(&next);
        rank = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| (rank[u], u));
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && rank[order[j]] == rank[order[i]] {
            j += 1;
        }
        if j - i > 1 {
            ties.push((i, j - i));
        }
        i = j;
    }
    Classes { order, ties, rank }
}

fn ranks<T: Ord>(items: &[T]) -> Vec<usize> {
    let mut sorted: Vec<&T> = items.iter().collect();
    sorted.sort();
    sorted.dedup();
    items
        .iter()
        .map(|x| sorted.binary_search(&x).expect("present"))
        .collect()
}

fn distinct(rank: &[usize]) -> usize {
    let mut r = rank.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn encode(entities: &[(Vec<(String, Slot)>, usize)], position: &[usize]) -> Encoding {
    let mut enc: Encoding = entities
        .iter()
        .map(|(props, m)| {
            let props = props
                .iter()
                .map(|(p, s)| {
                    let t = match s {
                        Slot::Known(t) => t.clone(),
                        Slot::UrnRef(u) => Token::Urn(position[*u]),
                    };
                    (p.clone(), t)
                })
                .collect();
            (props, *m)
        })
        .collect();
    enc.sort();
    // entity structures that only differed by equal point-mass labels coincide now
    let mut merged: Encoding = Vec::with_capacity(enc.len());
    for (props, m) in enc {
        match merged.last_mut() {
            Some((last, lm)) if *last == props && !props.iter().any(|(_, t)| t.is_gauss()) => *lm += m,
            _ => merged.push((props, m)),
        }
    }
    merged
}

fn best_encoding(entities: &[(Vec<(String, Slot)>, usize)], classes: &Classes) -> (Encoding, Vec<usize>) {
    let n = classes.order.len();
    let mut order = classes.order.clone();
    let to_position = |order: &[usize]| {
        let mut pos = vec![0; n];
        for (i, &u) in order.iter().enumerate() {
            pos[u] = i;
        }
        pos
    };

    let total: usize = classes
        .ties
        .iter()
        .map(|&(_, len)| (1..=len).product::<usize>())
        .try_fold(1usize, |acc, x| acc.checked_mul(x))
        .unwrap_or(usize::MAX);

    let first = encode(entities, &to_position(&order));
    let mut best = (first, order.clone());
    if total <= 1 || total > MAX_PERMUTATIONS {
        return best;
    }
    permute_ties(&classes.ties, 0, &mut order, &mut |order| {
        let enc = encode(entities, &to_position(order));
        if enc < best.0 {
            best = (enc, order.to_vec());
        }
    });
    let _ = &classes.rank;
    best
}

fn permute_ties(ties: &[(usize, usize)], t: usize, order: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if t == ties.len() {
        visit(order);
        return;
    }
    let (start, len) = ties[t];
    heap_permute(order, start, len, &mut |order| permute_ties(ties, t + 1, order, visit));
}

fn heap_permute(order: &mut Vec<usize>, start: usize, k: usize, visit: &mut dyn FnMut(&mut Vec<usize>)) {
    if k <= 1 {
        visit(order);
        return;
    }
    for i in 0..k - 1 {
        heap_permute(order, start, k - 1, visit);
        if k.is_multiple_of(2) {
            order.swap(start + i, start + k - 1);
        } else {
            order.swap(start, start + k - 1);
        }
    }
    heap_permute(order, start, k - 1, visit);
}

fn rebuild(best: (Encoding, Vec<usize>), urns: &[Multiset<Value>]) -> LiftedState {
    let (enc, order) = best;
    let mut next = 0u32;
    let mut fresh = || {
        next += 1;
        Label(next - 1)
    };
    let mut context = Context::new();
    let mut dirac: BTreeMap<Value, Label> = BTreeMap::new();
    let mut urn_label: BTreeMap<usize, Label> = BTreeMap::new();
    let mut structure = Structure::new();
    for (props, m) in enc {
        let mut es = EntityStructure::new();
        for (p, t) in props {
            let lab = match t {
                Token::Dirac(v) => *dirac.entry(v.clone()).or_insert_with(|| {
                    let l = fresh();
                    context.insert(l, DistributionRep::Dirac(v));
                    l
                }),
                Token::Urn(pos) => *urn_label.entry(pos).or_insert_with(|| {
                    let l = fresh();
                    context.insert(l, DistributionRep::Urn(urns[order[pos]].clone()));
                    l
                }),
                Token::Gauss(g) => {
                    let l = fresh();
                    context.insert(l, DistributionRep::Gaussian(g));
                    l
                }
            };
            es.set(p, lab);
        }
        structure.insert_n(es, m);
    }
    LiftedState::from_parts(structure, context)
}
