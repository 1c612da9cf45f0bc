//! Structure expressions: recursive descriptions of hierarchies built from sets,
//! cycles and unstructured index sets.
//!
//! Grammar (whitespace-insensitive, arbitrary nesting):
//!
//! ```text
//! expr := "S(" n ")" | "C(" n ")" | "trivial(" n ")"
//!       | "prod(" OUTER "," INNER ")"
//!       | "wr(" INNER "," OUTER ")"
//! ```
//!
//! In `wr` the outer structure comes second, as in `K ≀ H`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::perm::PermGroup;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StructureExpr {
    /// Natural action of the symmetric group on `n` exchangeable elements.
    Set(usize),
    /// Regular action of the cyclic group: a periodic sequence of length `n`.
    Cycle(usize),
    /// `n` points with no symmetry.
    Trivial(usize),
    Prod {
        outer: Box<StructureExpr>,
        inner: Box<StructureExpr>,
    },
    Wreath {
        inner: Box<StructureExpr>,
        outer: Box<StructureExpr>,
    },
}

impl StructureExpr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(e)
    }

    pub fn prod(outer: StructureExpr, inner: StructureExpr) -> Self {
        Self::Prod {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn wreath(inner: StructureExpr, outer: StructureExpr) -> Self {
        Self::Wreath {
            inner: Box::new(inner),
            outer: Box::new(outer),
        }
    }

    /// Total number of points: the product of the leaf sizes.
    pub fn degree(&self) -> usize {
        match self {
            Self::Set(n) | Self::Cycle(n) | Self::Trivial(n) => *n,
            Self::Prod { outer, inner } => outer.degree() * inner.degree(),
            Self::Wreath { inner, outer } => outer.degree() * inner.degree(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Set(_) | Self::Cycle(_) | Self::Trivial(_) => 0,
            Self::Prod { outer, inner } => 1 + outer.depth().max(inner.depth()),
            Self::Wreath { inner, outer } => 1 + outer.depth().max(inner.depth()),
        }
    }

    /// The permutation group acting on the vectorized structure.
    pub fn group(&self) -> Result<PermGroup> {
        match self {
            Self::Set(n) => PermGroup::symmetric(*n),
            Self::Cycle(n) => PermGroup::cyclic(*n),
            Self::Trivial(n) => PermGroup::trivial(*n),
            Self::Prod { outer, inner } => {
                PermGroup::direct_product(&outer.group()?, &inner.group()?)
            }
            Self::Wreath { inner, outer } => {
                PermGroup::wreath_product(&inner.group()?, &outer.group()?)
            }
        }
    }

    /// Whether the group acts transitively, decided structurally.
    pub fn is_transitive(&self) -> bool {
        match self {
            Self::Set(_) | Self::Cycle(_) => true,
            Self::Trivial(n) => *n == 1,
            Self::Prod { outer, inner } | Self::Wreath { inner, outer } => {
                outer.is_transitive() && inner.is_transitive()
            }
        }
    }

    /// Number of free parameters by the counting rules: sets have 2 (1 when `n = 1`),
    /// cycles `n`, trivial `n²`, products multiply and wreaths add minus one.
    ///
    /// The wreath rule holds for transitive factors; see
    /// [`crate::basis::pattern_of_structure`] for the exact count in general.
    pub fn param_count(&self) -> usize {
        match self {
            Self::Set(1) => 1,
            Self::Set(_) => 2,
            Self::Cycle(n) => *n,
            Self::Trivial(n) => n * n,
            Self::Prod { outer, inner } => outer.param_count() * inner.param_count(),
            Self::Wreath { inner, outer } => outer.param_count() + inner.param_count() - 1,
        }
    }

    /// Re-associates every `wr(wr(A, B), C)` into `wr(A, wr(B, C))`, recursively.
    pub fn reassociate_wreaths(&self) -> Self {
        match self {
            Self::Set(_) | Self::Cycle(_) | Self::Trivial(_) => self.clone(),
            Self::Prod { outer, inner } => {
                Self::prod(outer.reassociate_wreaths(), inner.reassociate_wreaths())
            }
            Self::Wreath { inner, outer } => match inner.as_ref() {
                Self::Wreath { inner: a, outer: b } => Self::wreath(
                    a.reassociate_wreaths(),
                    Self::wreath(b.as_ref().clone(), outer.as_ref().clone()).reassociate_wreaths(),
                ),
                _ => Self::wreath(inner.reassociate_wreaths(), outer.reassociate_wreaths()),
            },
        }
    }

    pub fn has_nested_wreath(&self) -> bool {
        match self {
            Self::Set(_) | Self::Cycle(_) | Self::Trivial(_) => false,
            Self::Prod { outer, inner } => outer.has_nested_wreath() || inner.has_nested_wreath(),
            Self::Wreath { inner, outer } => {
                matches!(inner.as_ref(), Self::Wreath { .. })
                    || inner.has_nested_wreath()
                    || outer.has_nested_wreath()
            }
        }
    }
}

impl fmt::Display for StructureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Set(n) => write!(f, "S({n})"),
            Self::Cycle(n) => write!(f, "C({n})"),
            Self::Trivial(n) => write!(f, "trivial({n})"),
            Self::Prod { outer, inner } => write!(f, "prod({outer},{inner})"),
            Self::Wreath { inner, outer } => write!(f, "wr({inner},{outer})"),
        }
    }
}

impl FromStr for StructureExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn ident(&mut self) -> Result<&str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a structure name"));
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
    }

    fn size(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a size"));
        }
        let n: usize = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| self.error("size out of range"))?;
        if n == 0 {
            return Err(Error::Parse {
                offset: start,
                message: "sizes must be at least 1".into(),
            });
        }
        Ok(n)
    }

    fn expr(&mut self) -> Result<StructureExpr> {
        let start = self.pos;
        let name = self.ident()?.to_string();
        self.expect(b'(')?;
        let e = match name.as_str() {
            "S" => StructureExpr::Set(self.size()?),
            "C" => StructureExpr::Cycle(self.size()?),
            "trivial" => StructureExpr::Trivial(self.size()?),
            "prod" => {
                let outer = self.expr()?;
                self.expect(b',')?;
                let inner = self.expr()?;
                StructureExpr::prod(outer, inner)
            }
            "wr" => {
                let inner = self.expr()?;
                self.expect(b',')?;
                let outer = self.expr()?;
                StructureExpr::wreath(inner, outer)
            }
            other => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unknown structure '{other}'"),
                })
            }
        };
        self.expect(b')')?;
        Ok(e)
    }
}
