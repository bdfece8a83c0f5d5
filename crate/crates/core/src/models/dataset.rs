//! Synthetic datasets and their CSV form.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// `classes` isotropic Gaussian clusters with centers in `[-3, 3]^dim`.
    Blobs {
        n: usize,
        dim: usize,
        classes: usize,
        spread: f64,
        val_frac: f64,
    },
    /// Two interleaved half-circles in the plane.
    Arcs { n: usize, noise: f64, val_frac: f64 },
    /// Binary k-hot rows with `round(density * dim)` active features and a
    /// realizable linear regression target.
    KHot {
        n: usize,
        dim: usize,
        density: f64,
        val_frac: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub dim: usize,
    /// Row-major `n × dim`.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    /// Number of classes for classification data, `None` for regression.
    pub classes: Option<usize>,
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Dataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        classes: Option<usize>,
        val_frac: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let n = labels.len();
        if dim == 0 || features.len() != n * dim {
            return Err(ModelError::Shape {
                expected: n * dim,
                got: features.len(),
            });
        }
        let (train, val) = split(n, val_frac, seed)?;
        Ok(Self {
            n,
            dim,
            features,
            labels,
            classes,
            seed,
            train,
            val,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// One row per example, label in the last column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        let header: Vec<String> = (0..self.dim)
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut line: Vec<String> = self.row(i).iter().map(|x| format!("{x:?}")).collect();
            line.push(format!("{:?}", self.labels[i]));
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads the layout written by [`Dataset::write_csv`]. Labels that are all
    /// nonnegative integers are treated as class indices.
    pub fn read_csv<R: Read>(r: R, val_frac: f64, seed: u64) -> Result<Self, ModelError> {
        let mut reader = csv::Reader::from_reader(r);
        let cols = reader.headers()?.len();
        if cols < 2 {
            return Err(ModelError::Parse {
                row: 0,
                msg: "need at least one feature column and a label column".into(),
            });
        }
        let dim = cols - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let x: f64 = field.trim().parse().map_err(|e| ModelError::Parse {
                    row: row + 1,
                    msg: format!("column {j}: {e}"),
                })?;
                if j < dim {
                    features.push(x);
                } else {
                    labels.push(x);
                }
            }
        }
        let integral = labels.iter().all(|y| *y >= 0.0 && y.fract() == 0.0);
        let classes = integral
            .then(|| labels.iter().fold(0.0f64, |a, y| a.max(*y)) as usize + 1)
            .filter(|&k| k >= 2);
        Self::new(dim, features, labels, classes, val_frac, seed)
    }
}

fn split(n: usize, val_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
    if !(0.0..1.0).contains(&val_frac) {
        return Err(ModelError::Config(format!(
            "val_frac must lie in [0, 1), got {val_frac}"
        )));
    }
    let n_val = (val_frac * n as f64).round() as usize;
    if n == 0 || n_val >= n {
        return Err(ModelError::Config(format!(
            "{n} examples leave no training data at val_frac {val_frac}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng(rng::derive(seed, 0x5b17)));
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

pub fn synth_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset, ModelError> {
    let mut r = rng::rng(seed);
    match *spec {
        DatasetSpec::Blobs {
            n,
            dim,
            classes,
            spread,
            val_frac,
        } => {
            if classes < 2 || dim == 0 || n < classes || !(spread > 0.0) {
                return Err(ModelError::Config(format!(
                    "blobs need classes >= 2, dim >= 1, n >= classes, spread > 0 (got {classes}, {dim}, {n}, {spread})"
                )));
            }
            let centers: Vec<f64> = (0..classes * dim)
                .map(|_| r.random_range(-3.0..3.0))
                .collect();
            let mut features = Vec::with_capacity(n * dim);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let c = i % classes;
                for j in 0..dim {
                    let z: f64 = r.sample(StandardNormal);
                    features.push(centers[c * dim + j] + spread * z);
                }
                labels.push(c as f64);
            }
            Dataset::new(dim, features, labels, Some(classes), val_frac, seed)
        }
        DatasetSpec::Arcs { n, noise, val_frac } => {
            if n < 2 || !(noise >= 0.0) {
                return Err(ModelError::Config(format!(
                    "arcs need n >= 2 and noise >= 0 (got {n}, {noise})"
                )));
            }
            let mut features = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let t = r.random_range(0.0..std::f64::consts::PI);
                let (x, y) = if i % 2 == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                let zx: f64 = r.sample(StandardNormal);
                let zy: f64 = r.sample(StandardNormal);
                features.push(x + noise * zx);
                features.push(y + noise * zy);
                labels.push((i % 2) as f64);
            }
            Dataset::new(2, features, labels, Some(2), val_frac, seed)
        }
        DatasetSpec::KHot {
            n,
            dim,
            density,
            val_frac,
        } => {
            let k = active_features(dim, density)?;
            if n < dim {
                return Err(ModelError::Config(format!(
                    "k-hot data needs n >= dim so every feature is active somewhere (got n = {n}, dim = {dim})"
                )));
            }
            let weights: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
            let mut features = vec![0.0; n * dim];
            let mut labels = Vec::with_capacity(n);
            let mut pool: Vec<usize> = (0..dim).collect();
            for i in 0..n {
                let anchor = i % dim;
                pool.swap(0, anchor);
                let (_, rest) = pool.split_at_mut(1);
                let (picked, _) = rest.partial_shuffle(&mut r, k - 1);
                let mut active = vec![anchor];
                active.extend_from_slice(picked);
                let mut y = 0.0;
                for &j in &active {
                    features[i * dim + j] = 1.0;
                    y += weights[j];
                }
                labels.push(y);
                pool.sort_unstable();
            }
            Dataset::new(dim, features, labels, None, val_frac, seed)
        }
    }
}

pub(crate) fn active_features(dim: usize, density: f64) -> Result<usize, ModelError> {
    if !(density > 0.0 && density < 1.0) {
        return Err(ModelError::Config(format!(
            "density must lie in (0, 1), got {density}"
        )));
    }
    let k = (density * dim as f64).round() as usize;
    if k == 0 {
        return Err(ModelError::Config(format!(
            "density {density} over {dim} features leaves no active feature"
        )));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> DatasetSpec {
        DatasetSpec::Blobs {
            n: 60,
            dim: 3,
            classes: 3,
            spread: 0.5,
            val_frac: 0.25,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for spec in [
            blobs(),
            DatasetSpec::Arcs {
                n: 40,
                noise: 0.1,
                val_frac: 0.2,
            },
            DatasetSpec::KHot {
                n: 120,
                dim: 40,
                density: 0.1,
                val_frac: 0.2,
            },
        ] {
            let a = synth_dataset(&spec, 17).unwrap();
            let b = synth_dataset(&spec, 17).unwrap();
            assert_eq!(a, b);
            let bits = |d: &Dataset| d.features.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b));
            assert_ne!(a.features, synth_dataset(&spec, 18).unwrap().features);
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let d = synth_dataset(&blobs(), 3).unwrap();
        assert_eq!(d.val.len(), 15);
        let mut all: Vec<usize> = d.train.iter().chain(&d.val).copied().collect();
        all.sort();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn khot_rows_have_fixed_support() {
        let d = synth_dataset(
            &DatasetSpec::KHot {
                n: 100,
                dim: 100,
                density: 0.05,
                val_frac: 0.0,
            },
            1,
        )
        .unwrap();
        for i in 0..d.n {
            let active = d.row(i).iter().filter(|x| **x != 0.0).count();
            assert_eq!(active, 5);
            assert_eq!(d.row(i)[i % 100], 1.0);
        }
    }

    #[test]
    fn khot_rejects_empty_support() {
        let spec = DatasetSpec::KHot {
            n: 20,
            dim: 10,
            density: 0.01,
            val_frac: 0.0,
        };
        assert!(matches!(
            synth_dataset(&spec, 0),
            Err(ModelError::Config(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = synth_dataset(&blobs(), 9).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,x2,label\n"));
        let back = Dataset::read_csv(buf.as_slice(), 0.25, 9).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_parse_error_names_row() {
        let bad = "x0,label\n1.0,0\nfoo,1\n";
        match Dataset::read_csv(bad.as_bytes(), 0.0, 0) {
            Err(ModelError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
