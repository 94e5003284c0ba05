//! Canonical string keys for molecular graphs.
//!
//! Ranks atoms by iterative neighborhood refinement, breaks remaining ties by
//! individualizing each member of the first ambiguous cell and taking the
//! lexicographically smallest serialization. The resulting key is invariant
//! under any relabeling of atom indices; distinct graphs receive distinct
//! keys because the serialization encodes the full graph.

use super::{BondOrder, MoleculeGraph};

type Adjacency = Vec<Vec<(usize, BondOrder)>>;

/// Canonical key of a graph; `""` for the empty graph. Stereochemistry is
/// not part of the key.
pub fn canonical_form(mol: &MoleculeGraph) -> String {
    if mol.atom_count() == 0 {
        return String::new();
    }
    let adj = mol.adjacency();
    let ranks = refine(&adj, initial_ranks(mol));
    serialize_min(mol, &adj, ranks)
}

fn initial_ranks(mol: &MoleculeGraph) -> Vec<u32> {
    let adj = mol.adjacency();
    let keys: Vec<(String, bool, i8, u16, u8, usize)> = mol
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.element.clone(),
                a.aromatic,
                a.charge,
                a.isotope.unwrap_or(0),
                a.explicit_h.unwrap_or(0),
                adj[i].len(),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap() as u32)
        .collect()
}

fn distinct(ranks: &[u32]) -> usize {
    let mut seen: Vec<u32> = ranks.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Refine ranks until the partition stops splitting. The signature of an
/// atom is its own rank plus the sorted multiset of (bond order, neighbor
/// rank) pairs, so refinement is order-compatible and stable.
fn refine(adj: &Adjacency, mut ranks: Vec<u32>) -> Vec<u32> {
    let mut cells = distinct(&ranks);
    loop {
        let sigs: Vec<(u32, Vec<(char, u32)>)> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let mut nbrs: Vec<(char, u32)> =
                    adj[i].iter().map(|&(j, o)| (o.code(), ranks[j])).collect();
                nbrs.sort_unstable();
                (r, nbrs)
            })
            .collect();
        let next = dense_ranks(&sigs);
        let next_cells = distinct(&next);
        if next_cells == cells {
            return next;
        }
        cells = next_cells;
        ranks = next;
    }
}

fn serialize_min(mol: &MoleculeGraph, adj: &Adjacency, ranks: Vec<u32>) -> String {
    let n = ranks.len();
    if distinct(&ranks) == n {
        return serialize(mol, &ranks);
    }
    // first (lowest-rank) cell with more than one member
    let mut counts = vec![0u32; n];
    for &r in &ranks {
        counts[r as usize] += 1;
    }
    let cell = counts.iter().position(|&c| c > 1).unwrap() as u32;
    let mut best: Option<String> = None;
    for m in (0..n).filter(|&i| ranks[i] == cell) {
        let mut split: Vec<u32> = ranks.iter().map(|&r| r * 2 + 1).collect();
        split[m] -= 1;
        let candidate = serialize_min(mol, adj, refine(adj, dense_ranks(&split)));
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
    }
    best.unwrap()
}

/// Serialize under a discrete ranking: atom tokens in rank order, then bonds
/// as (position, position, order) triples sorted.
fn serialize(mol: &MoleculeGraph, ranks: &[u32]) -> String {
    let mut atom_tokens = vec![String::new(); ranks.len()];
    for (i, atom) in mol.atoms().iter().enumerate() {
        let mut t = if atom.aromatic {
            atom.element.to_lowercase()
        } else {
            atom.element.clone()
        };
        if let Some(iso) = atom.isotope {
            t.push_str(&format!("*{iso}"));
        }
        if atom.charge != 0 {
            t.push_str(&format!("{:+}", atom.charge));
        }
        if let Some(h) = atom.explicit_h {
            t.push_str(&format!("H{h}"));
        }
        atom_tokens[ranks[i] as usize] = t;
    }
    let mut bond_tokens: Vec<(u32, u32, char)> = mol
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (ranks[b.a], ranks[b.b]);
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    bond_tokens.sort_unstable();
    let bonds: Vec<String> = bond_tokens
        .iter()
        .map(|(x, y, o)| format!("{x}-{y}{o}"))
        .collect();
    format!("{}|{}", atom_tokens.join(","), bonds.join(","))
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    #[test]
    fn spelling_invariance() {
        let a = canonical_form(&parse_smiles("OCC").unwrap());
        let b = canonical_form(&parse_smiles("CCO").unwrap());
        assert_eq!(a, b);
        assert_ne!(
            canonical_form(&parse_smiles("CCO").unwrap()),
            canonical_form(&parse_smiles("CCN").unwrap())
        );
    }

    #[test]
    fn ring_rotation_invariance() {
        let benzene = canonical_form(&parse_smiles("c1ccccc1").unwrap());
        let toluene = canonical_form(&parse_smiles("Cc1ccccc1").unwrap());
        // every rotation of the ring spelling names the same graph
        for s in [
            "c1ccccc1C",
            "c1ccc(C)cc1",
            "c1cc(C)ccc1",
            "c1c(C)cccc1",
            "c1(C)ccccc1",
        ] {
            assert_eq!(canonical_form(&parse_smiles(s).unwrap()), toluene, "{s}");
        }
        assert_ne!(toluene, benzene);
    }

    #[test]
    fn attributes_distinguish_graphs() {
        let plain = canonical_form(&parse_smiles("CC").unwrap());
        let iso = canonical_form(&parse_smiles("[13CH3]C").unwrap());
        let charged = canonical_form(&parse_smiles("[CH2-]C").unwrap());
        assert_ne!(plain, iso);
        assert_ne!(plain, charged);
        assert_ne!(iso, charged);
        assert_ne!(
            canonical_form(&parse_smiles("C=C").unwrap()),
            canonical_form(&parse_smiles("CC").unwrap())
        );
    }

    #[test]
    fn empty_graph_has_empty_key() {
        assert_eq!(canonical_form(&MoleculeGraph::empty()), "");
    }

    #[test]
    fn symmetric_graphs_need_individualization() {
        // cyclohexane: every refinement cell stays ambiguous until branching
        let a = canonical_form(&parse_smiles("C1CCCCC1").unwrap());
        let b = canonical_form(&parse_smiles("C2CCCCC2").unwrap());
        assert_eq!(a, b);
    }
}
