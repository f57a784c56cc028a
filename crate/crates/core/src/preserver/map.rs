//! Black-box maps on `M_n` and their document forms.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::PreserverModel;
use crate::error::{Error, Result};
use crate::io::MatrixDocument;
use crate::linalg::{c64, ComplexMatrix, C64};

type Query = dyn Fn(&ComplexMatrix) -> ComplexMatrix + Send + Sync;

/// A deterministic map `M_n -> M_n` known only through queries.
#[derive(Clone)]
pub struct BlackBoxMap {
    n: usize,
    query: Arc<Query>,
    calls: Arc<AtomicUsize>,
}

impl fmt::Debug for BlackBoxMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxMap").field("n", &self.n).field("calls", &self.calls()).finish()
    }
}

impl BlackBoxMap {
    pub fn new(n: usize, query: impl Fn(&ComplexMatrix) -> ComplexMatrix + Send + Sync + 'static) -> Self {
        Self { n, query: Arc::new(query), calls: Arc::new(AtomicUsize::new(0)) }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, |x| x.clone())
    }

    /// The canonical form described by `model`.
    pub fn from_model(model: &PreserverModel) -> Result<Self> {
        let model = model.clone();
        let inverse = model.transform.inverse()?;
        Ok(Self::new(model.transform.dim(), move |x| model.apply_with_inverse(x, &inverse)))
    }

    pub fn from_table(table: LinearMapTable) -> Self {
        Self::new(table.dim(), move |x| table.apply(x))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.dim() });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let y = (self.query)(x);
        if y.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: y.dim() });
        }
        if !y.is_finite() {
            return Err(Error::NotPreserver("map produced a non-finite image".into()));
        }
        Ok(y)
    }

    /// `X -> Φ(Xᵗ)`.
    pub fn composed_with_transpose(&self) -> Self {
        let inner = self.clone();
        Self {
            n: self.n,
            query: Arc::new(move |x: &ComplexMatrix| (inner.query)(&x.transpose())),
            calls: Arc::clone(&self.calls),
        }
    }
}

/// Images of the matrix units `E_ij`, stored row-major; applied linearly.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMapTable {
    n: usize,
    images: Vec<ComplexMatrix>,
}

impl LinearMapTable {
    pub fn new(n: usize, images: Vec<ComplexMatrix>) -> Result<Self> {
        if images.len() != n * n {
            return Err(Error::Schema {
                path: "images".into(),
                message: format!("expected {} images, found {}", n * n, images.len()),
            });
        }
        for m in &images {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
            }
        }
        Ok(Self { n, images })
    }

    /// Tabulates a black box on the matrix units.
    pub fn probe(map: &BlackBoxMap) -> Result<Self> {
        let n = map.dim();
        let images = (0..n * n).map(|k| map.apply(&unit(n, k / n, k % n))).collect::<Result<_>>()?;
        Self::new(n, images)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn image(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.images[i * self.n + j]
    }

    pub fn images(&self) -> &[ComplexMatrix] {
        &self.images
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let z = x.get(i, j);
                if z != c64(0.0, 0.0) {
                    out = out + self.image(i, j).scale(z);
                }
            }
        }
        out
    }
}

/// Matrix unit `E_ij`.
pub fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |a, b| if (a, b) == (i, j) { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
}

/// A map supplied as a document: a canonical-form generator or a table of
/// images over the standard basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapDocument {
    Generator {
        lambda: [f64; 2],
        transform: MatrixDocument,
        #[serde(default)]
        transposed: bool,
        #[serde(default)]
        unitary: bool,
    },
    Table {
        n: usize,
        images: Vec<MatrixDocument>,
    },
}

impl MapDocument {
    pub fn from_model(model: &PreserverModel) -> Self {
        Self::Generator {
            lambda: [model.lambda.re, model.lambda.im],
            transform: MatrixDocument::from(&model.transform),
            transposed: model.transposed,
            unitary: model.unitary,
        }
    }

    pub fn from_table(table: &LinearMapTable) -> Self {
        Self::Table { n: table.dim(), images: table.images().iter().map(MatrixDocument::from).collect() }
    }

    /// Builds the map. Generators are not checked against any `m`; that is
    /// the hypothesis test's job.
    pub fn to_map(&self) -> Result<BlackBoxMap> {
        match self {
            Self::Generator { lambda, transform, transposed, unitary } => {
                let t = transform.to_matrix()?;
                let lambda: C64 = c64(lambda[0], lambda[1]);
                if !(lambda.re.is_finite() && lambda.im.is_finite()) {
                    return Err(Error::Schema { path: "lambda".into(), message: "not finite".into() });
                }
                let model = PreserverModel {
                    lambda,
                    transform: t,
                    transposed: *transposed,
                    unitary: *unitary,
                    m: 0,
                    residual: 0.0,
                };
                BlackBoxMap::from_model(&model).map_err(|_| Error::Schema {
                    path: "transform".into(),
                    message: "transform is singular".into(),
                })
            }
            Self::Table { n, images } => {
                let images = images
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        d.to_matrix().map_err(|e| match e {
                            Error::Schema { path, message } => {
                                Error::Schema { path: format!("images[{k}].{path}"), message }
                            }
                            other => other,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BlackBoxMap::from_table(LinearMapTable::new(*n, images)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, rng_for};

    #[test]
    fn table_reproduces_linear_map() {
        let mut rng = rng_for(1, 0);
        let t = gaussian_matrix(&mut rng, 3);
        let t_inv = t.inverse().unwrap();
        let map = BlackBoxMap::new(3, move |x| &(&t * &x.transpose()) * &t_inv);
        let table = LinearMapTable::probe(&map).unwrap();
        assert_eq!(map.calls(), 9);
        let x = gaussian_matrix(&mut rng, 3);
        let direct = map.apply(&x).unwrap();
        assert!((&table.apply(&x) - &direct).frobenius_norm() <= 1e-12 * direct.frobenius_norm());
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let map = BlackBoxMap::new(2, |_| ComplexMatrix::identity(3));
        assert!(matches!(map.apply(&ComplexMatrix::identity(3)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(map.apply(&ComplexMatrix::identity(2)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn documents_round_trip() {
        let mut rng = rng_for(2, 0);
        let table = LinearMapTable::new(2, (0..4).map(|_| gaussian_matrix(&mut rng, 2)).collect()).unwrap();
        let doc = MapDocument::from_table(&table);
        let text = serde_json::to_string(&doc).unwrap();
        let back: MapDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        let map = back.to_map().unwrap();
        let x = gaussian_matrix(&mut rng, 2);
        assert!((&map.apply(&x).unwrap() - &table.apply(&x)).frobenius_norm() < 1e-12);

        let bad = r#"{"kind":"table","n":2,"images":[{"n":2,"data":[[[1,0],[0,0]],[[0,0],[1,0]]]}]}"#;
        let doc: MapDocument = serde_json::from_str(bad).unwrap();
        assert!(matches!(doc.to_map(), Err(Error::Schema { .. })));
    }
}
