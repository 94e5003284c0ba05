//! SMILES writer with caller-controlled traversal order.
//!
//! Used to respell a graph along an arbitrary atom permutation: the priority
//! order picks the DFS start atom and neighbor visitation order, so two
//! different priorities give two different (but equivalent) spellings of the
//! same molecule. Output stays inside the subset the parser accepts, so
//! `parse(write(mol, order))` reproduces the graph up to relabeling.

use std::collections::HashMap;

use thiserror::Error;

use super::{Atom, BondOrder, MoleculeGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WriteError {
    #[error("cannot write an empty graph")]
    EmptyGraph,
    #[error("cannot write a disconnected graph")]
    Disconnected,
    #[error("priority is not a permutation of the atom indices")]
    BadPriority,
    #[error("more than 99 ring closures open at once")]
    TooManyRings,
}

const ORGANIC_SUBSET: &[&str] = &["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];

/// Writes `mol` as SMILES, visiting atoms in the order given by `priority`
/// (a permutation of `0..atom_count`; earlier entries are visited first).
pub fn write_smiles(mol: &MoleculeGraph, priority: &[usize]) -> Result<String, WriteError> {
    let n = mol.atom_count();
    if n == 0 {
        return Err(WriteError::EmptyGraph);
    }
    if !mol.is_connected() {
        return Err(WriteError::Disconnected);
    }
    if priority.len() != n {
        return Err(WriteError::BadPriority);
    }
    let mut rank = vec![usize::MAX; n];
    for (pos, &atom) in priority.iter().enumerate() {
        if atom >= n || rank[atom] != usize::MAX {
            return Err(WriteError::BadPriority);
        }
        rank[atom] = pos;
    }

    // DFS in priority order; non-tree edges become ring closures.
    let mut adj = mol.adjacency();
    for nbrs in adj.iter_mut() {
        nbrs.sort_by_key(|&(j, _)| rank[j]);
    }
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    // ring closures per atom in discovery order: (partner, order)
    let mut closures: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    let start = priority[0];
    let mut stack: Vec<usize> = vec![start];
    let mut seen_edges = std::collections::HashSet::new();
    visited[start] = true;
    while let Some(&a) = stack.last() {
        let mut advanced = false;
        for &(b, o) in &adj[a] {
            let key = (a.min(b), a.max(b));
            if seen_edges.contains(&key) {
                continue;
            }
            if visited[b] {
                seen_edges.insert(key);
                closures[a].push((b, o));
                closures[b].push((a, o));
            } else {
                seen_edges.insert(key);
                visited[b] = true;
                children[a].push((b, o));
                stack.push(b);
                advanced = true;
                break;
            }
        }
        if !advanced {
            stack.pop();
        }
    }

    // assign ring digits in emission order, reusing freed digits
    let mut digit_of: HashMap<(usize, usize), u16> = HashMap::new();
    let mut free: Vec<u16> = (1..100).rev().collect();
    let mut opened: HashMap<(usize, usize), bool> = HashMap::new();
    let mut out = String::new();
    emit(
        mol,
        start,
        &children,
        &closures,
        &mut digit_of,
        &mut free,
        &mut opened,
        &mut out,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn emit(
    mol: &MoleculeGraph,
    a: usize,
    children: &[Vec<(usize, BondOrder)>],
    closures: &[Vec<(usize, BondOrder)>],
    digit_of: &mut HashMap<(usize, usize), u16>,
    free: &mut Vec<u16>,
    opened: &mut HashMap<(usize, usize), bool>,
    out: &mut String,
) -> Result<(), WriteError> {
    out.push_str(&atom_token(&mol.atoms()[a]));
    for &(b, o) in &closures[a] {
        let key = (a.min(b), a.max(b));
        match opened.get(&key) {
            None => {
                let Some(digit) = free.pop() else {
                    return Err(WriteError::TooManyRings);
                };
                digit_of.insert(key, digit);
                opened.insert(key, true);
                out.push_str(bond_symbol(mol, a, b, o));
                push_digit(out, digit);
            }
            Some(_) => {
                let digit = digit_of.remove(&key).unwrap();
                push_digit(out, digit);
                free.push(digit);
                opened.remove(&key);
            }
        }
    }
    let kids = &children[a];
    for (i, &(b, o)) in kids.iter().enumerate() {
        let last = i + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(mol, a, b, o));
        emit(mol, b, children, closures, digit_of, free, opened, out)?;
        if !last {
            out.push(')');
        }
    }
    Ok(())
}

fn push_digit(out: &mut String, digit: u16) {
    if digit < 10 {
        out.push_str(&digit.to_string());
    } else {
        out.push_str(&format!("%{digit:02}"));
    }
}

fn bond_symbol(mol: &MoleculeGraph, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = mol.atoms()[a].aromatic && mol.atoms()[b].aromatic;
    match order {
        BondOrder::Single => {
            if both_aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => {
            if both_aromatic {
                ""
            } else {
                ":"
            }
        }
    }
}

fn atom_token(atom: &Atom) -> String {
    let bare_ok = atom.isotope.is_none()
        && atom.charge == 0
        && atom.explicit_h.is_none()
        && ORGANIC_SUBSET.contains(&atom.element.as_str())
        && (!atom.aromatic || matches!(atom.element.as_str(), "B" | "C" | "N" | "O" | "P" | "S"));
    let symbol = if atom.aromatic {
        atom.element.to_lowercase()
    } else {
        atom.element.clone()
    };
    if bare_ok {
        return symbol;
    }
    let mut t = String::from("[");
    if let Some(iso) = atom.isotope {
        t.push_str(&iso.to_string());
    }
    t.push_str(&symbol);
    match atom.explicit_h {
        Some(0) | None => {}
        Some(1) => t.push('H'),
        Some(h) => t.push_str(&format!("H{h}")),
    }
    match atom.charge {
        0 => {}
        1 => t.push('+'),
        -1 => t.push('-'),
        c if c > 0 => t.push_str(&format!("+{c}")),
        c => t.push_str(&c.to_string()),
    }
    t.push(']');
    t
}

#[cfg(test)]
mod tests {
    use super::super::{canonical_form, parse_smiles};
    use super::*;

    fn respell(smiles: &str, priority: &[usize]) -> String {
        let mol = parse_smiles(smiles).unwrap();
        write_smiles(&mol, priority).unwrap()
    }

    #[test]
    fn identity_order_round_trips() {
        for s in ["CCO", "c1ccccc1", "CC(=O)O", "C1CCNCC1", "[13CH3]C", "CC[O-]"] {
            let mol = parse_smiles(s).unwrap();
            let order: Vec<usize> = (0..mol.atom_count()).collect();
            let rewritten = write_smiles(&mol, &order).unwrap();
            let reparsed = parse_smiles(&rewritten).unwrap();
            assert_eq!(canonical_form(&reparsed), canonical_form(&mol), "{s} -> {rewritten}");
        }
    }

    #[test]
    fn reversed_order_preserves_the_graph() {
        let spelled = respell("CC(=O)Oc1ccccc1", &[9, 8, 7, 6, 5, 4, 3, 2, 1, 0]);
        assert_eq!(
            canonical_form(&parse_smiles(&spelled).unwrap()),
            canonical_form(&parse_smiles("CC(=O)Oc1ccccc1").unwrap())
        );
    }

    #[test]
    fn aromatic_single_bonds_stay_explicit() {
        // biphenyl: the inter-ring bond is single between two aromatic atoms
        let mol = parse_smiles("c1ccc(-c2ccccc2)cc1").unwrap();
        let order: Vec<usize> = (0..mol.atom_count()).collect();
        let spelled = write_smiles(&mol, &order).unwrap();
        assert_eq!(
            canonical_form(&parse_smiles(&spelled).unwrap()),
            canonical_form(&mol)
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let mol = parse_smiles("CC").unwrap();
        assert_eq!(write_smiles(&mol, &[0]), Err(WriteError::BadPriority));
        assert_eq!(write_smiles(&mol, &[0, 0]), Err(WriteError::BadPriority));
        assert_eq!(
            write_smiles(&MoleculeGraph::empty(), &[]),
            Err(WriteError::EmptyGraph)
        );
    }
}
