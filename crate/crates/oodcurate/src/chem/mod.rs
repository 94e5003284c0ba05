//! Molecular graphs parsed from SMILES, plus the graph-level operations the
//! curation pipeline needs: valence legality, heavy-atom counts, canonical
//! graph keys, and Bemis–Murcko scaffolds.
//!
//! The supported SMILES subset covers organic-subset atoms, bracket atoms
//! (isotope, charge, explicit H count), the bond symbols `- = # :`, branches,
//! ring-bond digits (including `%nn`), and aromatic lowercase atoms. Stereo
//! markers (`/`, `\`, `@`) are accepted and discarded. Implicit hydrogens are
//! never materialized as atoms. Dot-separated components and wildcard atoms
//! are not supported.

mod canon;
mod parser;
mod scaffold;
mod writer;

pub use canon::canonical_form;
pub use parser::parse_smiles;
pub use scaffold::{murcko_scaffold, Scaffold};
pub use writer::{write_smiles, WriteError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One heavy (or explicitly written) atom of a molecule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    /// Element symbol in canonical capitalization, e.g. `"C"`, `"Cl"`.
    pub element: String,
    pub aromatic: bool,
    pub charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside a bracket atom. `None` for bare
    /// organic-subset atoms, whose hydrogens stay implicit.
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: &str) -> Atom {
        Atom {
            element: element.to_string(),
            aromatic: false,
            charge: 0,
            isotope: None,
            explicit_h: None,
        }
    }

    pub fn aromatic(element: &str) -> Atom {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Twice the bond order, so aromatic (1.5) stays integral.
    pub fn doubled(&self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn code(&self) -> char {
        match self {
            BondOrder::Single => '1',
            BondOrder::Double => '2',
            BondOrder::Triple => '3',
            BondOrder::Aromatic => 'a',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Structural problems rejected by [`MoleculeGraph::new`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond endpoint {0} out of range for {1} atoms")]
    EndpointOutOfRange(usize, usize),
    #[error("self-loop bond on atom {0}")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

/// An attributed molecular graph. Ring membership is derived from the bond
/// list at construction time and marks exactly the atoms lying on at least
/// one cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoleculeGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    ring_membership: Vec<bool>,
}

impl MoleculeGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MoleculeGraph, GraphError> {
        let n = atoms.len();
        let mut seen = std::collections::HashSet::new();
        for bond in &bonds {
            if bond.a >= n {
                return Err(GraphError::EndpointOutOfRange(bond.a, n));
            }
            if bond.b >= n {
                return Err(GraphError::EndpointOutOfRange(bond.b, n));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(bond.a));
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateBond(key.0, key.1));
            }
        }
        let ring_membership = ring_atoms(n, &bonds);
        Ok(MoleculeGraph {
            atoms,
            bonds,
            ring_membership,
        })
    }

    pub fn empty() -> MoleculeGraph {
        MoleculeGraph {
            atoms: Vec::new(),
            bonds: Vec::new(),
            ring_membership: Vec::new(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_ring_atom(&self, idx: usize) -> bool {
        self.ring_membership[idx]
    }

    pub fn ring_membership(&self) -> &[bool] {
        &self.ring_membership
    }

    /// Neighbor lists as `(atom index, bond order)` pairs, index-aligned.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for bond in &self.bonds {
            adj[bond.a].push((bond.b, bond.order));
            adj[bond.b].push((bond.a, bond.order));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        if n <= 1 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(a) = stack.pop() {
            for &(b, _) in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    count += 1;
                    stack.push(b);
                }
            }
        }
        count == n
    }

    /// Induced subgraph on `keep` (ascending atom indices of `self`).
    /// Ring membership is recomputed for the new graph.
    pub fn induced_subgraph(&self, keep: &[usize]) -> MoleculeGraph {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        MoleculeGraph::new(atoms, bonds).expect("subgraph of a valid graph is valid")
    }
}

/// Atoms lying on at least one cycle: exactly the endpoints of non-bridge
/// edges (iterative Tarjan bridge search).
fn ring_atoms(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (neighbor, bond idx)
    for (idx, bond) in bonds.iter().enumerate() {
        adj[bond.a].push((bond.b, idx));
        adj[bond.b].push((bond.a, idx));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0usize;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // frames: (node, parent edge idx, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (a, pedge, ref mut pos)) = stack.last_mut() {
            if *pos < adj[a].len() {
                let (b, eidx) = adj[a][*pos];
                *pos += 1;
                if eidx == pedge {
                    continue;
                }
                if disc[b] == usize::MAX {
                    disc[b] = timer;
                    low[b] = timer;
                    timer += 1;
                    stack.push((b, eidx, 0));
                } else {
                    low[a] = low[a].min(disc[b]);
                }
            } else {
                stack.pop();
                if let Some(&mut (parent, _, _)) = stack.last_mut() {
                    low[parent] = low[parent].min(low[a]);
                    if low[a] > disc[parent] {
                        is_bridge[pedge] = true;
                    }
                }
            }
        }
    }

    let mut ring = vec![false; n];
    for (idx, bond) in bonds.iter().enumerate() {
        if !is_bridge[idx] {
            ring[bond.a] = true;
            ring[bond.b] = true;
        }
    }
    ring
}

/// Number of non-hydrogen atoms. Explicit bracket hydrogens (`[H]`, `[2H]`)
/// are excluded; bracket H counts on heavy atoms never count as atoms.
pub fn heavy_atom_count(mol: &MoleculeGraph) -> u32 {
    mol.atoms().iter().filter(|a| a.element != "H").count() as u32
}

/// A valence check failure: the atom's bond order total (plus explicit
/// hydrogens) exceeds what its element and formal charge allow.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("valence violation at atom {atom} ({element}): total {total} exceeds allowed {allowed}")]
pub struct ValenceViolation {
    pub atom: usize,
    pub element: String,
    pub total: u32,
    pub allowed: u32,
}

/// Maximum allowed valence for the elements the legality check knows about.
/// Bracket atoms of any other element are trusted.
fn max_valence(element: &str) -> Option<u32> {
    match element {
        "B" => Some(3),
        "C" => Some(4),
        "N" => Some(3),
        "O" => Some(2),
        "P" => Some(5),
        "S" => Some(6),
        "F" | "Cl" | "Br" | "I" => Some(1),
        _ => None,
    }
}

/// Checks each atom's total bond order (aromatic counted 1.5, summed and
/// ceiled) plus explicit hydrogens against the allowed valence of its
/// element, adjusted by formal charge. Elements outside the table pass
/// unconditionally.
///
/// Note the 1.5-per-aromatic-bond rule means aromatic fusion atoms carrying
/// three aromatic bonds total 5 and fail for carbon; fused ring systems must
/// be written kekulized to pass legality.
pub fn validate_valence(mol: &MoleculeGraph) -> Result<(), ValenceViolation> {
    let mut doubled = vec![0u32; mol.atom_count()];
    for bond in mol.bonds() {
        doubled[bond.a] += bond.order.doubled();
        doubled[bond.b] += bond.order.doubled();
    }
    for (idx, atom) in mol.atoms().iter().enumerate() {
        let Some(base) = max_valence(&atom.element) else {
            continue;
        };
        let total = doubled[idx].div_ceil(2) + u32::from(atom.explicit_h.unwrap_or(0));
        let allowed = (base as i32 + i32::from(atom.charge)).max(0) as u32;
        if total > allowed {
            return Err(ValenceViolation {
                atom: idx,
                element: atom.element.clone(),
                total,
                allowed,
            });
        }
    }
    Ok(())
}

/// Errors from [`parse_smiles`]. Positions are byte offsets into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("SMILES syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unmatched ring closure {digit} opened at position {pos}")]
    UnmatchedRingClosure { pos: usize, digit: u16 },
    #[error("unmatched parenthesis at position {pos}")]
    UnmatchedParenthesis { pos: usize },
    #[error(transparent)]
    Valence(#[from] ValenceViolation),
}

impl SmilesError {
    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> SmilesError {
        SmilesError::Syntax {
            pos,
            msg: msg.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_rejects_structural_defects() {
        let atoms = vec![Atom::new("C"), Atom::new("C")];
        let bond = |a, b| Bond {
            a,
            b,
            order: BondOrder::Single,
        };
        assert_eq!(
            MoleculeGraph::new(atoms.clone(), vec![bond(0, 2)]),
            Err(GraphError::EndpointOutOfRange(2, 2))
        );
        assert_eq!(
            MoleculeGraph::new(atoms.clone(), vec![bond(1, 1)]),
            Err(GraphError::SelfLoop(1))
        );
        assert_eq!(
            MoleculeGraph::new(atoms, vec![bond(0, 1), bond(1, 0)]),
            Err(GraphError::DuplicateBond(0, 1))
        );
    }

    #[test]
    fn ring_membership_marks_cycle_atoms_only() {
        // cyclopropane with a one-atom tail: C1CC1C
        let mol = parse_smiles("C1CC1C").unwrap();
        assert_eq!(mol.ring_membership(), &[true, true, true, false]);
    }

    #[test]
    fn ring_membership_covers_linked_rings() {
        // two rings joined by a two-atom linker: linker atoms are not ring atoms
        let mol = parse_smiles("C1CC1CCC1CC1").unwrap();
        let expect = [true, true, true, false, false, true, true, true];
        assert_eq!(mol.ring_membership(), &expect);
    }

    #[test]
    fn heavy_atoms_skip_explicit_hydrogens() {
        assert_eq!(heavy_atom_count(&parse_smiles("CCO").unwrap()), 3);
        assert_eq!(heavy_atom_count(&parse_smiles("c1ccccc1").unwrap()), 6);
        assert_eq!(heavy_atom_count(&parse_smiles("C[C@H](N)C(=O)O").unwrap()), 6);
        assert_eq!(heavy_atom_count(&parse_smiles("[2H]OC").unwrap()), 2);
    }

    #[test]
    fn valence_standard_cases() {
        assert!(validate_valence(&parse_smiles("CCO").unwrap()).is_ok());
        // neutral nitrogen with four single bonds fails at that atom
        let atoms = vec![
            Atom::new("N"),
            Atom::new("C"),
            Atom::new("C"),
            Atom::new("C"),
            Atom::new("C"),
        ];
        let bonds = (1..5)
            .map(|b| Bond {
                a: 0,
                b,
                order: BondOrder::Single,
            })
            .collect();
        let mol = MoleculeGraph::new(atoms, bonds).unwrap();
        let err = validate_valence(&mol).unwrap_err();
        assert_eq!(err.atom, 0);
        assert_eq!(err.total, 4);
        assert_eq!(err.allowed, 3);
        // charge-adjusted quaternary nitrogen passes
        assert!(parse_smiles("[N+](C)(C)(C)C").is_ok());
    }

    #[test]
    fn valence_charge_lowers_allowance() {
        // alkoxide oxygen: one bond allowed
        assert!(parse_smiles("CC[O-]").is_ok());
        // negatively charged oxygen with two bonds is over-bonded
        assert!(matches!(
            parse_smiles("C[O-]C"),
            Err(SmilesError::Valence(_))
        ));
    }

    #[test]
    fn aromatic_bond_orders_ceil() {
        // pyridine nitrogen: two aromatic bonds -> ceil(3.0) = 3 <= 3
        assert!(parse_smiles("c1ccncc1").is_ok());
        // aromatic fusion carbon: three aromatic bonds -> ceil(4.5) = 5 > 4
        assert!(matches!(
            parse_smiles("c1ccc2ccccc2c1"),
            Err(SmilesError::Valence(_))
        ));
        // the kekulized spelling of the same ring system is legal
        assert!(parse_smiles("C1=CC2=CC=CC=C2C=C1").is_ok());
    }
}
