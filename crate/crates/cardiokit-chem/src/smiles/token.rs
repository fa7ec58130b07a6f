//! SMILES tokenizer.
//!
//! One token per atom (bracket atoms included), bond symbol, branch
//! parenthesis, ring-closure digit (or `%nn` pair) and component separator.
//! Concatenating the token texts always reproduces the input exactly.

use crate::element::Element;
use crate::error::SmilesError;

use super::molecule::{BondOrder, StereoMark};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomToken {
    pub element: Element,
    pub aromatic: bool,
    pub bracket: bool,
    /// Explicit hydrogen count; `None` for organic-subset atoms.
    pub h_count: Option<u8>,
    pub charge: i8,
    pub stereo: StereoMark,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Atom(AtomToken),
    Bond(BondOrder),
    OpenBranch,
    CloseBranch,
    /// Ring-closure label (0-99).
    Ring(u8),
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesToken {
    pub text: String,
    pub kind: TokenKind,
}

/// Splits `smiles` into tokens; `join(token texts) == smiles` on success.
pub fn tokenize(smiles: &str) -> Result<Vec<SmilesToken>, SmilesError> {
    let bytes = smiles.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let kind = match c {
            'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                organic(Element::Cl, false)
            }
            'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                organic(Element::Br, false)
            }
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => {
                i += 1;
                organic(Element::from_symbol(&c.to_string()).unwrap(), false)
            }
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => {
                i += 1;
                organic(
                    Element::from_symbol(&c.to_uppercase().to_string()).unwrap(),
                    true,
                )
            }
            '[' => {
                let (atom, consumed) = bracket_atom(bytes, i)?;
                i += consumed;
                TokenKind::Atom(atom)
            }
            '-' => {
                i += 1;
                TokenKind::Bond(BondOrder::Single)
            }
            '=' => {
                i += 1;
                TokenKind::Bond(BondOrder::Double)
            }
            '#' => {
                i += 1;
                TokenKind::Bond(BondOrder::Triple)
            }
            ':' => {
                i += 1;
                TokenKind::Bond(BondOrder::Aromatic)
            }
            '(' => {
                i += 1;
                TokenKind::OpenBranch
            }
            ')' => {
                i += 1;
                TokenKind::CloseBranch
            }
            '0'..='9' => {
                i += 1;
                TokenKind::Ring(c as u8 - b'0')
            }
            '%' => {
                let d1 = bytes.get(i + 1).copied().filter(u8::is_ascii_digit);
                let d2 = bytes.get(i + 2).copied().filter(u8::is_ascii_digit);
                match (d1, d2) {
                    (Some(a), Some(b)) => {
                        i += 3;
                        TokenKind::Ring((a - b'0') * 10 + (b - b'0'))
                    }
                    _ => {
                        return Err(SmilesError::UnknownCharacter {
                            position: i,
                            found: '%',
                        })
                    }
                }
            }
            '.' => {
                i += 1;
                TokenKind::Dot
            }
            other => {
                return Err(SmilesError::UnknownCharacter {
                    position: i,
                    found: other,
                })
            }
        };
        out.push(SmilesToken {
            text: smiles[start..i].to_string(),
            kind,
        });
    }
    Ok(out)
}

/// Token texts only, for vocabulary work.
pub fn token_strings(smiles: &str) -> Result<Vec<String>, SmilesError> {
    Ok(tokenize(smiles)?.into_iter().map(|t| t.text).collect())
}

fn organic(element: Element, aromatic: bool) -> TokenKind {
    TokenKind::Atom(AtomToken {
        element,
        aromatic,
        bracket: false,
        h_count: None,
        charge: 0,
        stereo: StereoMark::None,
    })
}

/// Parses one bracket atom starting at `bytes[open]` (which is `[`).
/// Returns the atom and the number of bytes consumed including brackets.
///
/// Grammar subset: `[` symbol chirality? hcount? charge? `]`. Isotope
/// prefixes, wildcard atoms and atom-class suffixes are rejected.
fn bracket_atom(bytes: &[u8], open: usize) -> Result<(AtomToken, usize), SmilesError> {
    let err = |pos: usize| SmilesError::UnknownCharacter {
        position: pos,
        found: if pos < bytes.len() {
            bytes[pos] as char
        } else {
            ']'
        },
    };
    let mut j = open + 1;
    let peek = |j: usize| bytes.get(j).copied();

    // Element symbol (aromatic lowercase allowed for the subset).
    let (element, aromatic, adv) = match peek(j).map(|b| b as char) {
        Some('C') if peek(j + 1) == Some(b'l') => (Element::Cl, false, 2),
        Some('B') if peek(j + 1) == Some(b'r') => (Element::Br, false, 2),
        Some(c @ ('B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' | 'H')) => (
            Element::from_symbol(&c.to_string()).ok_or_else(|| err(j))?,
            false,
            1,
        ),
        Some(c @ ('b' | 'c' | 'n' | 'o' | 'p' | 's')) => (
            Element::from_symbol(&c.to_uppercase().to_string()).ok_or_else(|| err(j))?,
            true,
            1,
        ),
        _ => return Err(err(j)),
    };
    j += adv;

    // Chirality.
    let stereo = if peek(j) == Some(b'@') {
        if peek(j + 1) == Some(b'@') {
            j += 2;
            StereoMark::AtAt
        } else {
            j += 1;
            StereoMark::At
        }
    } else {
        StereoMark::None
    };

    // Hydrogen count. `[H...]` as the element itself cannot take an H spec.
    let mut h_count: u8 = 0;
    if element != Element::H && peek(j) == Some(b'H') {
        j += 1;
        h_count = 1;
        if let Some(d) = peek(j).filter(u8::is_ascii_digit) {
            h_count = d - b'0';
            j += 1;
        }
    }

    // Charge.
    let mut charge: i8 = 0;
    match peek(j) {
        Some(b'+') | Some(b'-') => {
            let sign: i8 = if peek(j) == Some(b'+') { 1 } else { -1 };
            let symbol = bytes[j];
            j += 1;
            let mut magnitude: i8 = 1;
            if let Some(d) = peek(j).filter(u8::is_ascii_digit) {
                magnitude = (d - b'0') as i8;
                j += 1;
            } else {
                // ++ / -- forms
                while peek(j) == Some(symbol) {
                    magnitude += 1;
                    j += 1;
                }
            }
            if magnitude > 4 {
                return Err(err(j - 1));
            }
            charge = sign * magnitude;
        }
        _ => {}
    }

    if peek(j) != Some(b']') {
        return Err(err(j.min(bytes.len())));
    }
    j += 1;

    Ok((
        AtomToken {
            element,
            aromatic,
            bracket: true,
            h_count: Some(h_count),
            charge,
            stereo,
        },
        j - open,
    ))
}
