//! The supported element set and its per-element constants.

/// Elements accepted by the SMILES grammar in this crate.
///
/// Hydrogen atoms only appear transiently while parsing bracket `[H]`
/// expressions; they are folded into the neighbouring heavy atom's hydrogen
/// count before a `Molecule` is returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
    H,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::H,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::H => "H",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Some(match s {
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "P" => Element::P,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            "H" => Element::H,
            _ => return None,
        })
    }

    /// Standard atomic mass in g/mol.
    pub fn atomic_mass(self) -> f64 {
        match self {
            Element::B => 10.811,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::P => 30.974,
            Element::S => 32.065,
            Element::F => 18.998,
            Element::Cl => 35.453,
            Element::Br => 79.904,
            Element::I => 126.904,
            Element::H => 1.008,
        }
    }

    /// Allowed valences for implicit-hydrogen assignment, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3, 5],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::H => &[1],
        }
    }

    /// Pauling electronegativity, used by the charge-equalization featurizer.
    pub fn electronegativity(self) -> f64 {
        match self {
            Element::B => 2.04,
            Element::C => 2.55,
            Element::N => 3.04,
            Element::O => 3.44,
            Element::P => 2.19,
            Element::S => 2.58,
            Element::F => 3.98,
            Element::Cl => 3.16,
            Element::Br => 2.96,
            Element::I => 2.66,
            Element::H => 2.20,
        }
    }

    /// Whether the element may carry the aromatic (lowercase) flag.
    pub fn aromatic_capable(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Index into `ALL`, used as a compact canonical-invariant component.
    pub fn rank(self) -> u8 {
        Element::ALL.iter().position(|e| *e == self).unwrap() as u8
    }
}
