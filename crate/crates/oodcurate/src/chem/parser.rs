//! Recursive-descent SMILES reader for the subset the pipeline supports.

use std::collections::HashMap;

use super::{validate_valence, Atom, Bond, BondOrder, MoleculeGraph, SmilesError};

/// All element symbols accepted inside bracket atoms.
const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu",
    "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt",
    "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np",
    "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

fn is_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

/// Lowercase symbols allowed as aromatic atoms (bare or bracketed).
fn aromatic_element(lower: &str) -> Option<&'static str> {
    match lower {
        "b" => Some("B"),
        "c" => Some("C"),
        "n" => Some("N"),
        "o" => Some("O"),
        "p" => Some("P"),
        "s" => Some("S"),
        "se" => Some("Se"),
        "as" => Some("As"),
        _ => None,
    }
}

/// Parses a SMILES string into a [`MoleculeGraph`] and validates valence
/// legality. Stereo markers (`/`, `\`, `@`) and bracket atom classes are
/// accepted and discarded; implicit hydrogens are not materialized.
pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SmilesError> {
    let mut parser = Parser {
        input: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        bond_keys: std::collections::HashSet::new(),
        prev: None,
        pending: None,
        branch_stack: Vec::new(),
        rings: HashMap::new(),
    };
    parser.run()?;
    let mol = MoleculeGraph::new(parser.atoms, parser.bonds)
        .map_err(|e| SmilesError::syntax(text.len(), e.to_string()))?;
    validate_valence(&mol)?;
    Ok(mol)
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_keys: std::collections::HashSet<(usize, usize)>,
    prev: Option<usize>,
    /// Explicit bond symbol waiting for its right-hand atom or ring digit.
    pending: Option<(BondOrder, usize)>,
    /// Atoms to return to at `)`; pushed at `(`, each entry stores the
    /// opening position for error reporting.
    branch_stack: Vec<(usize, usize)>,
    /// Open ring closures: digit -> (atom, optional bond symbol, open position).
    rings: HashMap<u16, (usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            match c {
                b'A'..=b'Z' => self.bare_atom()?,
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                    let elem = aromatic_element(&(c as char).to_string()).unwrap();
                    self.pos += 1;
                    self.add_atom(Atom::aromatic(elem))?;
                }
                b'[' => self.bracket_atom()?,
                b'0'..=b'9' => {
                    let digit = u16::from(c - b'0');
                    self.pos += 1;
                    self.ring_bond(digit, self.pos - 1)?;
                }
                b'%' => {
                    let start = self.pos;
                    self.pos += 1;
                    let digit = self.two_digit_ring(start)?;
                    self.ring_bond(digit, start)?;
                }
                b'-' => self.set_pending(BondOrder::Single)?,
                b'=' => self.set_pending(BondOrder::Double)?,
                b'#' => self.set_pending(BondOrder::Triple)?,
                b':' => self.set_pending(BondOrder::Aromatic)?,
                b'/' | b'\\' => self.set_pending(BondOrder::Single)?, // stereo discarded
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(SmilesError::syntax(self.pos, "branch before any atom"));
                    };
                    if self.pending.is_some() {
                        return Err(SmilesError::syntax(self.pos, "bond symbol before '('"));
                    }
                    self.branch_stack.push((prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    if let Some((_, pos)) = self.pending {
                        return Err(SmilesError::syntax(pos, "dangling bond before ')'"));
                    }
                    let Some((back, open_pos)) = self.branch_stack.pop() else {
                        return Err(SmilesError::UnmatchedParenthesis { pos: self.pos });
                    };
                    if self.prev == Some(back) {
                        return Err(SmilesError::syntax(open_pos, "empty branch"));
                    }
                    self.prev = Some(back);
                    self.pos += 1;
                }
                b'.' => {
                    return Err(SmilesError::syntax(
                        self.pos,
                        "disconnected components ('.') are not supported",
                    ));
                }
                b'*' => {
                    return Err(SmilesError::syntax(
                        self.pos,
                        "wildcard atoms are not supported",
                    ));
                }
                _ => {
                    return Err(SmilesError::syntax(
                        self.pos,
                        format!("unexpected character '{}'", c as char),
                    ));
                }
            }
        }
        if let Some((_, pos)) = self.pending {
            return Err(SmilesError::syntax(pos, "dangling bond at end of input"));
        }
        if let Some(&(_, pos)) = self.branch_stack.first() {
            return Err(SmilesError::UnmatchedParenthesis { pos });
        }
        if let Some((&digit, &(_, _, pos))) = self.rings.iter().min_by_key(|(d, _)| **d) {
            return Err(SmilesError::UnmatchedRingClosure { pos, digit });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::syntax(0, "expected an atom"));
        }
        Ok(())
    }

    fn set_pending(&mut self, order: BondOrder) -> Result<(), SmilesError> {
        if self.prev.is_none() {
            return Err(SmilesError::syntax(self.pos, "bond symbol before any atom"));
        }
        if self.pending.is_some() {
            return Err(SmilesError::syntax(self.pos, "two bond symbols in a row"));
        }
        self.pending = Some((order, self.pos));
        self.pos += 1;
        Ok(())
    }

    fn bare_atom(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let c = self.bump().unwrap() as char;
        // two-letter organic-subset symbols first
        let elem = if c == 'C' && self.peek() == Some(b'l') {
            self.pos += 1;
            "Cl"
        } else if c == 'B' && self.peek() == Some(b'r') {
            self.pos += 1;
            "Br"
        } else {
            match c {
                'B' => "B",
                'C' => "C",
                'N' => "N",
                'O' => "O",
                'P' => "P",
                'S' => "S",
                'F' => "F",
                'I' => "I",
                _ => {
                    return Err(SmilesError::syntax(
                        start,
                        format!("element '{c}' must be written in brackets"),
                    ));
                }
            }
        };
        self.add_atom(Atom::new(elem))
    }

    fn bracket_atom(&mut self) -> Result<(), SmilesError> {
        let open = self.pos;
        self.pos += 1; // '['
        let isotope = self.read_number(3).map(|n| n as u16);

        let sym_start = self.pos;
        let mut aromatic = false;
        let element: String = match self.peek() {
            Some(c @ b'A'..=b'Z') => {
                self.pos += 1;
                let mut sym = (c as char).to_string();
                if let Some(l @ b'a'..=b'z') = self.peek() {
                    let two = format!("{}{}", c as char, l as char);
                    if is_element(&two) {
                        self.pos += 1;
                        sym = two;
                    }
                }
                if !is_element(&sym) {
                    return Err(SmilesError::syntax(
                        sym_start,
                        format!("unknown element '{sym}'"),
                    ));
                }
                sym
            }
            Some(c @ b'a'..=b'z') => {
                self.pos += 1;
                let mut low = (c as char).to_string();
                if let Some(l @ b'a'..=b'z') = self.peek() {
                    let two = format!("{}{}", c as char, l as char);
                    if aromatic_element(&two).is_some() {
                        self.pos += 1;
                        low = two;
                    }
                }
                let Some(elem) = aromatic_element(&low) else {
                    return Err(SmilesError::syntax(
                        sym_start,
                        format!("'{low}' is not an aromatic element"),
                    ));
                };
                aromatic = true;
                elem.to_string()
            }
            _ => {
                return Err(SmilesError::syntax(self.pos, "expected element symbol in bracket"));
            }
        };

        // chirality: discarded
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }

        let explicit_h = if self.peek() == Some(b'H') {
            self.pos += 1;
            let count = self.read_number(2).unwrap_or(1);
            if count > 9 {
                return Err(SmilesError::syntax(self.pos, "hydrogen count too large"));
            }
            Some(count as u8)
        } else {
            Some(0)
        };

        let charge = match self.peek() {
            Some(sign @ (b'+' | b'-')) => {
                self.pos += 1;
                let mut magnitude = 1i16;
                if let Some(n) = self.read_number(2) {
                    magnitude = n as i16;
                } else {
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        magnitude += 1;
                    }
                }
                if magnitude > 15 {
                    return Err(SmilesError::syntax(self.pos, "charge magnitude too large"));
                }
                if sign == b'+' {
                    magnitude as i8
                } else {
                    -(magnitude as i8)
                }
            }
            _ => 0,
        };

        // atom class: accepted and discarded
        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number(4).is_none() {
                return Err(SmilesError::syntax(self.pos, "expected atom class number"));
            }
        }

        if self.bump() != Some(b']') {
            return Err(SmilesError::syntax(open, "expected ']' to close bracket atom"));
        }

        self.add_atom(Atom {
            element,
            aromatic,
            charge,
            isotope,
            explicit_h,
        })
    }

    fn read_number(&mut self, max_digits: usize) -> Option<u32> {
        let mut n: u32 = 0;
        let mut digits = 0;
        while digits < max_digits {
            match self.peek() {
                Some(c @ b'0'..=b'9') => {
                    n = n * 10 + u32::from(c - b'0');
                    digits += 1;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        (digits > 0).then_some(n)
    }

    fn two_digit_ring(&mut self, start: usize) -> Result<u16, SmilesError> {
        let mut n = 0u16;
        for _ in 0..2 {
            match self.bump() {
                Some(c @ b'0'..=b'9') => n = n * 10 + u16::from(c - b'0'),
                _ => return Err(SmilesError::syntax(start, "expected two digits after '%'")),
            }
        }
        Ok(n)
    }

    fn add_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.default_order(prev, idx),
            };
            self.push_bond(prev, idx, order, self.pos)?;
        } else if let Some((_, pos)) = self.pending.take() {
            return Err(SmilesError::syntax(pos, "bond symbol before any atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_bond(&mut self, digit: u16, pos: usize) -> Result<(), SmilesError> {
        let Some(here) = self.prev else {
            return Err(SmilesError::syntax(pos, "ring bond before any atom"));
        };
        let annotation = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&digit) {
            Some((other, open_order, _)) => {
                let order = match (open_order, annotation) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::syntax(pos, "ring bond order mismatch"));
                    }
                    (Some(o), _) | (_, Some(o)) => o,
                    (None, None) => self.default_order(other, here),
                };
                if other == here {
                    return Err(SmilesError::syntax(pos, "ring closure on the same atom"));
                }
                self.push_bond(other, here, order, pos)?;
            }
            None => {
                self.rings.insert(digit, (here, annotation, pos));
            }
        }
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        pos: usize,
    ) -> Result<(), SmilesError> {
        let key = (a.min(b), a.max(b));
        if !self.bond_keys.insert(key) {
            return Err(SmilesError::syntax(pos, "duplicate bond between atoms"));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::heavy_atom_count;
    use super::*;

    #[test]
    fn benzene_is_six_aromatic_ring_atoms() {
        let mol = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(mol.atom_count(), 6);
        assert_eq!(mol.bond_count(), 6);
        assert!(mol.atoms().iter().all(|a| a.aromatic && a.element == "C"));
        assert!(mol
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic));
        assert!((0..6).all(|i| mol.is_ring_atom(i)));
    }

    #[test]
    fn unclosed_ring_is_rejected() {
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnmatchedRingClosure { digit: 1, .. })
        ));
    }

    #[test]
    fn five_bond_carbon_is_a_valence_violation() {
        match parse_smiles("CC(C)(C)(C)C") {
            Err(SmilesError::Valence(v)) => {
                assert_eq!(v.atom, 1);
                assert_eq!(v.total, 5);
            }
            other => panic!("expected valence violation, got {other:?}"),
        }
    }

    #[test]
    fn branches_and_bond_symbols() {
        let mol = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(mol.atom_count(), 4);
        assert_eq!(
            mol.bonds()
                .iter()
                .filter(|b| b.order == BondOrder::Double)
                .count(),
            1
        );
        assert!(parse_smiles("C#N").is_ok());
        assert!(parse_smiles("C/C=C/C").is_ok());
    }

    #[test]
    fn bracket_atoms_capture_fields() {
        let mol = parse_smiles("[13CH3+]").unwrap();
        let atom = &mol.atoms()[0];
        assert_eq!(atom.isotope, Some(13));
        assert_eq!(atom.explicit_h, Some(3));
        assert_eq!(atom.charge, 1);
        let mol = parse_smiles("[O--]").unwrap();
        assert_eq!(mol.atoms()[0].charge, -2);
        let mol = parse_smiles("[Fe+3]").unwrap();
        assert_eq!(mol.atoms()[0].charge, 3);
        // atom class accepted and discarded
        assert!(parse_smiles("[CH3:7]C").is_ok());
    }

    #[test]
    fn percent_ring_numbers() {
        let mol = parse_smiles("C%12CCCCC%12").unwrap();
        assert_eq!(mol.atom_count(), 6);
        assert!(mol.is_ring_atom(0));
    }

    #[test]
    fn rejected_syntax() {
        assert!(matches!(parse_smiles(""), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("CC)C"), Err(SmilesError::UnmatchedParenthesis { .. })));
        assert!(matches!(parse_smiles("CC(C"), Err(SmilesError::UnmatchedParenthesis { .. })));
        assert!(matches!(parse_smiles("C..C"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C1CC2"), Err(SmilesError::UnmatchedRingClosure { .. })));
        assert!(matches!(parse_smiles("CCX"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C=="), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C=-C"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("*CC"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("[Zz]"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("(CC)"), Err(SmilesError::Syntax { .. })));
    }

    #[test]
    fn ring_closure_bond_annotations() {
        // annotation on either side works; conflicting sides are an error
        assert!(parse_smiles("C=1CCCCC=1").is_ok());
        assert!(parse_smiles("C=1CCCCC1").is_ok());
        assert!(matches!(
            parse_smiles("C=1CCCCC#1"),
            Err(SmilesError::Syntax { .. })
        ));
    }

    #[test]
    fn stereo_markers_are_discarded() {
        let mol = parse_smiles("C[C@H](N)C(=O)O").unwrap();
        assert_eq!(heavy_atom_count(&mol), 6);
        assert_eq!(mol.atoms()[1].explicit_h, Some(1));
    }
}
