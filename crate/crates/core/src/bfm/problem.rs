//! Standard-form conic program `min c'x  s.t.  Ax + s = b,  s ∈ K`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::CscMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: ConeKind::Zero,
            dim,
        }
    }

    pub fn nonnegative(dim: usize) -> Self {
        Self {
            kind: ConeKind::Nonnegative,
            dim,
        }
    }

    pub fn second_order(dim: usize) -> Self {
        Self {
            kind: ConeKind::SecondOrder,
            dim,
        }
    }

    /// Barrier degree: 0 for the zero cone, `dim` for the orthant, 1 for a SOC.
    pub fn degree(&self) -> usize {
        match self.kind {
            ConeKind::Zero => 0,
            ConeKind::Nonnegative => self.dim,
            ConeKind::SecondOrder => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem<T> {
    pub c: Vec<T>,
    pub a: CscMatrix<T>,
    pub b: Vec<T>,
    pub cones: Vec<ConeSpec>,
}

impl<T: Scalar> ConicProblem<T> {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.ncols != self.c.len() || self.a.nrows != self.b.len() {
            return Err(Error::InvalidProblem(format!(
                "A is {}x{} but c has {} and b has {} entries",
                self.a.nrows,
                self.a.ncols,
                self.c.len(),
                self.b.len()
            )));
        }
        let total: usize = self.cones.iter().map(|k| k.dim).sum();
        if total != self.b.len() {
            return Err(Error::InvalidProblem(format!(
                "cone dimensions sum to {total}, A has {} rows",
                self.b.len()
            )));
        }
        for cone in &self.cones {
            let min = if cone.kind == ConeKind::SecondOrder { 2 } else { 1 };
            if cone.dim < min {
                return Err(Error::InvalidProblem(format!(
                    "{:?} cone of dimension {}",
                    cone.kind, cone.dim
                )));
            }
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !finite(&self.b) || !finite(&self.a.nzval) {
            return Err(Error::InvalidProblem("non-finite problem data".into()));
        }
        Ok(())
    }

    /// Row ranges of each cone block, in order.
    pub fn cone_ranges(&self) -> Vec<Range<usize>> {
        cone_ranges(&self.cones)
    }

    pub fn to_dump(&self) -> ProblemDump<T> {
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for (i, j, v) in self.a.triplets() {
            rows.push(i);
            cols.push(j);
            vals.push(v);
        }
        ProblemDump {
            c: self.c.clone(),
            a: TripletMatrix {
                rows,
                cols,
                vals,
                shape: [self.a.nrows, self.a.ncols],
            },
            b: self.b.clone(),
            cones: self.cones.clone(),
        }
    }

    pub fn from_dump(dump: &ProblemDump<T>) -> Result<Self> {
        let [m, n] = dump.a.shape;
        let a = CscMatrix::from_triplets(m, n, &dump.a.rows, &dump.a.cols, &dump.a.vals)?;
        let prob = Self {
            c: dump.c.clone(),
            a,
            b: dump.b.clone(),
            cones: dump.cones.clone(),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_dump())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: ProblemDump<T> = serde_json::from_str(text)?;
        Self::from_dump(&dump)
    }
}

pub(crate) fn cone_ranges(cones: &[ConeSpec]) -> Vec<Range<usize>> {
    let mut start = 0;
    cones
        .iter()
        .map(|k| {
            let r = start..start + k.dim;
            start += k.dim;
            r
        })
        .collect()
}

/// JSON interchange form of a [`ConicProblem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProblemDump<T> {
    pub c: Vec<T>,
    #[serde(rename = "A")]
    pub a: TripletMatrix<T>,
    pub b: Vec<T>,
    pub cones: Vec<ConeSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TripletMatrix<T> {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
    pub shape: [usize; 2],
}
