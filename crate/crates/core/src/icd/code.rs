use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodeKind {
    Numeric,
    /// Supplementary classification of health-status factors (`V01`–`V91`).
    V,
    /// Supplementary classification of external causes (`E000`–`E999`).
    E,
}

/// A diagnosis code in canonical dotted form.
///
/// Accepts MIMIC's undotted style (`4280`, `V3000`, `E8809`) and dotted
/// style (`428.0`, `V30.00`, `E880.9`, `38.9`). Numeric and V roots are
/// three characters, E roots four; subdivisions are up to two digits for
/// numeric and V codes and one digit for E codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IcdCode {
    canonical: String,
    kind: CodeKind,
}

impl IcdCode {
    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }

    /// Root without subdivision, e.g. `"428"`, `"V30"`, `"E880"`.
    pub fn root(&self) -> &str {
        self.canonical.split('.').next().unwrap()
    }

    pub fn subdivision(&self) -> Option<&str> {
        self.canonical.split_once('.').map(|(_, s)| s)
    }

    /// Numeric value of the root for numeric codes.
    pub fn numeric_root(&self) -> Option<u16> {
        match self.kind {
            CodeKind::Numeric => self.root().parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for IcdCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl FromStr for IcdCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_code(s)
    }
}

pub fn parse_code(raw: &str) -> Result<IcdCode> {
    let bad = || Error::BadCode(raw.to_owned());
    let s = raw.trim().to_ascii_uppercase();
    if s.is_empty() {
        return Err(bad());
    }
    let (kind, body) = match s.as_bytes()[0] {
        b'V' => (CodeKind::V, &s[1..]),
        b'E' => (CodeKind::E, &s[1..]),
        _ => (CodeKind::Numeric, &s[..]),
    };
    let (root_digits, max_sub) = match kind {
        CodeKind::Numeric => (3, 2),
        CodeKind::V => (2, 2),
        CodeKind::E => (3, 1),
    };
    let (root, sub) = match body.split_once('.') {
        Some((r, sub)) => {
            if r.is_empty() || r.len() > root_digits || sub.is_empty() {
                return Err(bad());
            }
            (format!("{r:0>root_digits$}"), sub.to_owned())
        }
        None => {
            if body.len() < root_digits {
                return Err(bad());
            }
            let (r, sub) = body.split_at(root_digits);
            (r.to_owned(), sub.to_owned())
        }
    };
    if !root.bytes().all(|b| b.is_ascii_digit()) || !sub.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if sub.len() > max_sub {
        return Err(bad());
    }
    if kind == CodeKind::Numeric && root == "000" {
        return Err(bad());
    }
    let prefix = match kind {
        CodeKind::Numeric => "",
        CodeKind::V => "V",
        CodeKind::E => "E",
    };
    let canonical = if sub.is_empty() {
        format!("{prefix}{root}")
    } else {
        format!("{prefix}{root}.{sub}")
    };
    Ok(IcdCode { canonical, kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undotted_and_dotted_agree() {
        let a = parse_code("4280").unwrap();
        assert_eq!(a.root(), "428");
        assert_eq!(a.subdivision(), Some("0"));
        assert_eq!(a, parse_code("428.0").unwrap());
        assert_eq!(a.numeric_root(), Some(428));
    }

    #[test]
    fn supplementary_prefixes() {
        let v = parse_code("V30.00").unwrap();
        assert_eq!(v.kind(), CodeKind::V);
        assert_eq!(v, parse_code("V3000").unwrap());
        assert_eq!(v.as_str(), "V30.00");
        let e = parse_code("e8809").unwrap();
        assert_eq!(e.kind(), CodeKind::E);
        assert_eq!(e.as_str(), "E880.9");
        assert_eq!(e.numeric_root(), None);
    }

    #[test]
    fn short_dotted_roots_are_zero_padded() {
        assert_eq!(parse_code("38.9").unwrap().as_str(), "038.9");
        assert_eq!(parse_code("0389").unwrap().as_str(), "038.9");
        assert_eq!(parse_code("001").unwrap().as_str(), "001");
    }

    #[test]
    fn malformed_codes_rejected() {
        for raw in ["", "42", "4x80", "428.", ".5", "428.123", "000", "V3", "E880.12", "1234.5", "42800"] {
            let is_bad = raw == "42800";
            let r = parse_code(raw);
            if is_bad {
                // five digits undotted: root 428, subdivision 00
                assert_eq!(r.unwrap().as_str(), "428.00");
            } else {
                match r {
                    Err(Error::BadCode(s)) => assert_eq!(s, raw),
                    other => panic!("{raw:?} → {other:?}"),
                }
            }
        }
    }
}
