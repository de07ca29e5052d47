//! Generalized signature values and the widening rule.
//!
//! A value starts as a single observed scalar and is widened each time a
//! different observation has to be absorbed: `concrete -> set -> range | any`.
//! Sets are capped (see [`WidenPolicy`]); once a set would exceed the cap it
//! becomes a numeric range when every element is an integer, otherwise `any`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A single observed value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Text(String),
}

impl Scalar {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Scalar::Int(v) => Some(*v),
            Scalar::Text(_) => None,
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Text(v.to_string())
    }
}

impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::Text(v)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// Shape of a generalized value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Concrete {
        value: Scalar,
    },
    /// Sorted, duplicate-free, at least two elements.
    Set {
        values: Vec<Scalar>,
    },
    /// Inclusive integer range with `lo < hi`.
    Range {
        lo: i64,
        hi: i64,
    },
    Any,
}

impl Shape {
    fn rank(&self) -> u8 {
        match self {
            Shape::Concrete { .. } => 0,
            Shape::Set { .. } => 1,
            Shape::Range { .. } => 2,
            Shape::Any => 3,
        }
    }

    /// Brings a shape to its normal form: one-element sets and one-point
    /// ranges collapse to `concrete`, set elements are sorted and deduplicated.
    fn normalized(self) -> Shape {
        match self {
            Shape::Set { values } => {
                let values: Vec<Scalar> = values
                    .into_iter()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                match values.len() {
                    1 => Shape::Concrete {
                        value: values.into_iter().next().expect("len 1"),
                    },
                    _ => Shape::Set { values },
                }
            }
            Shape::Range { lo, hi } if lo == hi => Shape::Concrete {
                value: Scalar::Int(lo),
            },
            Shape::Range { lo, hi } if lo > hi => Shape::Range { lo: hi, hi: lo },
            other => other,
        }
    }
}

/// Tuning for [`widen`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidenPolicy {
    /// Largest set kept before escalating to a range or `any`.
    pub set_cap: usize,
}

impl Default for WidenPolicy {
    fn default() -> Self {
        Self { set_cap: 4 }
    }
}

/// A value that covers one or more observations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneralizedValue {
    shape: Shape,
    widened: u32,
}

impl GeneralizedValue {
    pub fn concrete(value: impl Into<Scalar>) -> Self {
        Self {
            shape: Shape::Concrete {
                value: value.into(),
            },
            widened: 0,
        }
    }

    pub fn set<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<Scalar>,
    {
        Self::from_shape(
            Shape::Set {
                values: values.into_iter().map(Into::into).collect(),
            },
            0,
        )
    }

    pub fn range(lo: i64, hi: i64) -> Self {
        Self::from_shape(Shape::Range { lo, hi }, 0)
    }

    pub fn any() -> Self {
        Self {
            shape: Shape::Any,
            widened: 0,
        }
    }

    /// Builds a value from a shape, normalizing it first. An empty set has no
    /// meaning as an observation and is treated as `any`.
    pub fn from_shape(shape: Shape, widened: u32) -> Self {
        let shape = match shape {
            Shape::Set { values } if values.is_empty() => Shape::Any,
            s => s.normalized(),
        };
        Self { shape, widened }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// How many times this value was actually generalized.
    pub fn widen_count(&self) -> u32 {
        self.widened
    }

    pub fn is_any(&self) -> bool {
        matches!(self.shape, Shape::Any)
    }

    pub fn contains(&self, x: &Scalar) -> bool {
        match &self.shape {
            Shape::Concrete { value } => value == x,
            Shape::Set { values } => values.binary_search(x).is_ok(),
            Shape::Range { lo, hi } => matches!(x, Scalar::Int(v) if lo <= v && v <= hi),
            Shape::Any => true,
        }
    }

    /// True when every scalar covered by `other` is covered by `self`.
    pub fn covers(&self, other: &GeneralizedValue) -> bool {
        match (&self.shape, &other.shape) {
            (Shape::Any, _) => true,
            (_, Shape::Any) => false,
            (_, Shape::Concrete { value }) => self.contains(value),
            (_, Shape::Set { values }) => values.iter().all(|v| self.contains(v)),
            (Shape::Range { lo: a, hi: b }, Shape::Range { lo, hi }) => a <= lo && hi <= b,
            (Shape::Set { values }, Shape::Range { lo, hi }) => {
                let width = (*hi as i128 - *lo as i128 + 1) as u128;
                width <= values.len() as u128
                    && (*lo..=*hi).all(|v| values.binary_search(&Scalar::Int(v)).is_ok())
            }
            (Shape::Concrete { .. }, Shape::Range { .. }) => false,
        }
    }

    /// True when the covered sets of the two values intersect.
    pub fn overlaps(&self, other: &GeneralizedValue) -> bool {
        match (&self.shape, &other.shape) {
            (Shape::Any, _) | (_, Shape::Any) => true,
            (Shape::Concrete { value }, _) => other.contains(value),
            (_, Shape::Concrete { value }) => self.contains(value),
            (Shape::Set { values }, _) => values.iter().any(|v| other.contains(v)),
            (_, Shape::Set { values }) => values.iter().any(|v| self.contains(v)),
            (Shape::Range { lo: a, hi: b }, Shape::Range { lo, hi }) => a <= hi && lo <= b,
        }
    }

    /// The finite list of covered scalars, if the value is finite.
    fn elements(&self) -> Option<Vec<Scalar>> {
        match &self.shape {
            Shape::Concrete { value } => Some(vec![value.clone()]),
            Shape::Set { values } => Some(values.clone()),
            _ => None,
        }
    }

    /// Integer bounds of the covered values, or `None` if anything non-numeric
    /// (or `any`) is covered.
    fn int_bounds(&self) -> Option<(i64, i64)> {
        match &self.shape {
            Shape::Concrete { value } => value.as_int().map(|v| (v, v)),
            Shape::Set { values } => {
                let ints: Option<Vec<i64>> = values.iter().map(Scalar::as_int).collect();
                let ints = ints?;
                Some((*ints.iter().min()?, *ints.iter().max()?))
            }
            Shape::Range { lo, hi } => Some((*lo, *hi)),
            Shape::Any => None,
        }
    }
}

impl fmt::Display for GeneralizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Concrete { value } => write!(f, "{value}"),
            Shape::Set { values } => {
                write!(f, "{{")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
            Shape::Range { lo, hi } => write!(f, "{lo}..{hi}"),
            Shape::Any => write!(f, "*"),
        }
    }
}

/// Smallest generalization covering both inputs.
///
/// When one input already covers the other the covering input is returned and
/// the widen count does not move; the count only grows when a strictly larger
/// shape has to be synthesized. Commutative and idempotent.
pub fn widen(a: &GeneralizedValue, b: &GeneralizedValue, policy: WidenPolicy) -> GeneralizedValue {
    let widened = a.widened.max(b.widened);
    if a.shape == b.shape {
        return GeneralizedValue {
            shape: a.shape.clone(),
            widened,
        };
    }
    let a_covers = a.covers(b);
    let b_covers = b.covers(a);
    let keep = match (a_covers, b_covers) {
        (true, true) => Some(if a.shape.rank() >= b.shape.rank() {
            a
        } else {
            b
        }),
        (true, false) => Some(a),
        (false, true) => Some(b),
        (false, false) => None,
    };
    if let Some(v) = keep {
        return GeneralizedValue {
            shape: v.shape.clone(),
            widened,
        };
    }

    let shape = match (a.elements(), b.elements()) {
        (Some(xs), Some(ys)) => {
            let union: BTreeSet<Scalar> = xs.into_iter().chain(ys).collect();
            if union.len() <= policy.set_cap.max(1) {
                Shape::Set {
                    values: union.into_iter().collect(),
                }
            } else {
                numeric_hull(a, b)
            }
        }
        _ => numeric_hull(a, b),
    };
    GeneralizedValue::from_shape(shape, widened + 1)
}

fn numeric_hull(a: &GeneralizedValue, b: &GeneralizedValue) -> Shape {
    match (a.int_bounds(), b.int_bounds()) {
        (Some((l1, h1)), Some((l2, h2))) => Shape::Range {
            lo: l1.min(l2),
            hi: h1.max(h2),
        },
        _ => Shape::Any,
    }
}
