//! Bemis–Murcko scaffolds by iterative terminal pruning.
//!
//! The scaffold is the fixed point of deleting atoms with degree ≤ 1 that
//! are not ring members: ring systems plus the linker atoms between them.
//! Exocyclic multiply-bonded atoms are pruned like any other side chain,
//! which diverges from toolkit flavors that retain them. Acyclic molecules
//! yield the empty scaffold with the reserved key `""`, so all acyclic
//! molecules share one scaffold domain.

use super::{canonical_form, MoleculeGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct Scaffold {
    pub graph: MoleculeGraph,
    /// Canonical key of the scaffold graph; `""` when the scaffold is empty.
    pub key: String,
}

impl Scaffold {
    pub fn is_empty(&self) -> bool {
        self.graph.atom_count() == 0
    }
}

/// Strip terminal atoms until only rings and inter-ring linkers remain.
pub fn murcko_scaffold(mol: &MoleculeGraph) -> Scaffold {
    let n = mol.atom_count();
    let adj = mol.adjacency();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = adj.iter().map(|nbrs| nbrs.len()).collect();

    loop {
        let removable: Vec<usize> = (0..n)
            .filter(|&i| alive[i] && degree[i] <= 1 && !mol.is_ring_atom(i))
            .collect();
        if removable.is_empty() {
            break;
        }
        for &i in &removable {
            alive[i] = false;
            for &(j, _) in &adj[i] {
                if alive[j] {
                    degree[j] -= 1;
                }
            }
            degree[i] = 0;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let graph = if keep.is_empty() {
        MoleculeGraph::empty()
    } else {
        mol.induced_subgraph(&keep)
    };
    let key = canonical_form(&graph);
    Scaffold { graph, key }
}

#[cfg(test)]
mod tests {
    use super::super::{heavy_atom_count, parse_smiles};
    use super::*;

    #[test]
    fn side_chains_strip_to_the_ring() {
        let scaffold = murcko_scaffold(&parse_smiles("CCc1ccccc1").unwrap());
        assert_eq!(scaffold.graph.atom_count(), 6);
        assert_eq!(
            scaffold.key,
            canonical_form(&parse_smiles("c1ccccc1").unwrap())
        );
    }

    #[test]
    fn acyclic_molecules_share_the_empty_scaffold() {
        let scaffold = murcko_scaffold(&parse_smiles("CCO").unwrap());
        assert!(scaffold.is_empty());
        assert_eq!(scaffold.key, "");
        assert_eq!(murcko_scaffold(&parse_smiles("CC(C)CO").unwrap()).key, "");
    }

    #[test]
    fn linkers_between_rings_survive() {
        let scaffold = murcko_scaffold(&parse_smiles("c1ccccc1-c1ccccc1").unwrap());
        assert_eq!(scaffold.graph.atom_count(), 12);
        // a two-carbon bridge stays; its own side chain strips
        let bridged = murcko_scaffold(&parse_smiles("C1CC1CC(C)C1CC1").unwrap());
        assert_eq!(bridged.graph.atom_count(), 8);
    }

    #[test]
    fn exocyclic_double_bonds_are_pruned() {
        let scaffold = murcko_scaffold(&parse_smiles("O=C1CCCCC1").unwrap());
        assert_eq!(scaffold.graph.atom_count(), 6);
        assert_eq!(heavy_atom_count(&scaffold.graph), 6);
    }

    #[test]
    fn scaffolding_is_idempotent() {
        for s in ["CCc1ccc(CC(=O)O)cc1", "C1CC1CCC1CC1", "CCCC", "c1ccncc1C"] {
            let first = murcko_scaffold(&parse_smiles(s).unwrap());
            let second = murcko_scaffold(&first.graph);
            assert_eq!(second.key, first.key, "{s}");
        }
    }
}
