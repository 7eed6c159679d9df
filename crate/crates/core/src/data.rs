//! Labeled sets: synthetic samplers, MNIST IDX ingestion, CSV exchange,
//! seeded batching and stratified subsets.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::oracles::SyntheticDist;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Inputs `[n, features]` with one class index per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
    domain: Option<(f64, f64)>,
}

impl LabeledSet {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize, domain: Option<(f64, f64)>) -> Result<Self> {
        if inputs.shape().len() != 2 || inputs.rows() != labels.len() {
            return Err(Error::Shape {
                op: "labeled set",
                left: inputs.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Index {
                index: bad,
                len: classes,
            });
        }
        if let Some((lo, hi)) = domain {
            if inputs.data().iter().any(|&v| v < lo || v > hi) {
                return Err(Error::Input(format!("features outside domain [{lo}, {hi}]")));
            }
        }
        Ok(LabeledSet {
            inputs,
            labels,
            classes,
            domain,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.row_len()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            domain: self.domain,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Rows as 2-D points. Fails for any other feature count.
    pub fn points(&self) -> Result<Vec<[f64; 2]>> {
        if self.features() != 2 {
            return Err(Error::Unsupported(format!(
                "expected 2-D features, found {}",
                self.features()
            )));
        }
        Ok((0..self.len())
            .map(|i| [self.inputs.row(i)[0], self.inputs.row(i)[1]])
            .collect())
    }

    /// Writes `x1,x2,y` rows; `y` is the class index.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let pts = self.points()?;
        let csv_err = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x1", "x2", "y"]).map_err(csv_err)?;
        for (p, y) in pts.iter().zip(&self.labels) {
            w.write_record([p[0].to_string(), p[1].to_string(), y.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<LabeledSet> {
        let csv_err = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::Format {
                    path: path.to_path_buf(),
                    expected: "3 columns x1,x2,y".into(),
                    actual: format!("{} columns", rec.len()),
                })
            };
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Format {
                    path: path.to_path_buf(),
                    expected: "real number".into(),
                    actual: s.to_string(),
                })
            };
            data.push(num(field(0)?)?);
            data.push(num(field(1)?)?);
            let y = field(2)?;
            labels.push(y.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                expected: "class index".into(),
                actual: y.to_string(),
            })?);
        }
        let classes = labels.iter().max().map_or(2, |&m: &usize| (m + 1).max(2));
        let n = labels.len();
        LabeledSet::new(Tensor::new(vec![n, 2], data)?, labels, classes, None)
    }
}

/// `n` i.i.d. draws from a synthetic distribution.
pub fn sample(dist: &SyntheticDist, n: usize, seed: u64) -> Result<LabeledSet> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::Input("sample size must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = dist.draw(&mut rng);
        data.extend_from_slice(&x);
        labels.push(y);
    }
    LabeledSet::new(Tensor::new(vec![n, 2], data)?, labels, 2, dist.domain())
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses an IDX3 image file into `[n, rows·cols]` pixels scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(Tensor, usize, usize)> {
    if bytes.len() < 16 {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: 16,
            actual: bytes.len(),
        });
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            expected: format!("magic {IDX_IMAGES_MAGIC:#010x}"),
            actual: format!("{magic:#010x}"),
        });
    }
    let n = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    let need = 16 + n * rows * cols;
    if bytes.len() != need {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: need,
            actual: bytes.len(),
        });
    }
    let data = bytes[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((Tensor::new(vec![n, rows * cols], data)?, rows, cols))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    if bytes.len() < 8 {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: 8,
            actual: bytes.len(),
        });
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            expected: format!("magic {IDX_LABELS_MAGIC:#010x}"),
            actual: format!("{magic:#010x}"),
        });
    }
    let n = be_u32(bytes, 4) as usize;
    if bytes.len() != 8 + n {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: 8 + n,
            actual: bytes.len(),
        });
    }
    Ok(bytes[8..].iter().map(|&b| usize::from(b)).collect())
}

/// Loads an MNIST image/label file pair. Pixels are in `[0, 1]`.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<LabeledSet> {
    let (inputs, _, _) = parse_idx_images(&read_file(images_path)?, images_path)?;
    let labels = parse_idx_labels(&read_file(labels_path)?, labels_path)?;
    if labels.len() != inputs.rows() {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            expected: format!("{} labels", inputs.rows()),
            actual: format!("{} labels", labels.len()),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            expected: "digit labels 0..=9".into(),
            actual: format!("label {bad}"),
        });
    }
    LabeledSet::new(inputs, labels, 10, Some((0.0, 1.0)))
}

/// Seeded mini-batch schedule. Epoch `e` is a permutation drawn from its own
/// random stream, so any epoch can be regenerated independently.
#[derive(Clone, Debug)]
pub struct BatchIter {
    n: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
}

impl BatchIter {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Index batches of epoch `epoch`; the final batch may be partial.
    pub fn epoch_batches(&self, epoch: u64) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        idx.shuffle(&mut rng);
        idx.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

impl Iterator for BatchIter {
    type Item = Vec<Vec<usize>>;

    /// Yields the batches of the next epoch.
    fn next(&mut self) -> Option<Self::Item> {
        let out = self.epoch_batches(self.epoch);
        self.epoch += 1;
        Some(out)
    }
}

pub fn batches(set: &LabeledSet, batch_size: usize, shuffle_seed: u64) -> Result<BatchIter> {
    if batch_size == 0 {
        return Err(Error::Input("batch size must be ≥ 1".into()));
    }
    Ok(BatchIter {
        n: set.len(),
        batch_size,
        seed: shuffle_seed,
        epoch: 0,
    })
}

/// Class-stratified sample of `n` rows without replacement, in shuffled
/// order. Every class gets `⌊n/K⌋` or `⌊n/K⌋+1` rows when it has enough; a
/// shortfall is filled from the remaining classes.
pub fn subset(set: &LabeledSet, n: usize, seed: u64) -> Result<LabeledSet> {
    if n > set.len() {
        return Err(Error::Input(format!(
            "subset of {n} requested from a set of {}",
            set.len()
        )));
    }
    let k = set.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in set.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    for c in &mut by_class {
        c.shuffle(&mut rng);
    }
    let mut extra: Vec<usize> = (0..k).collect();
    extra.shuffle(&mut rng);
    let mut quota = vec![n / k; k];
    for &c in extra.iter().take(n % k) {
        quota[c] += 1;
    }
    let mut taken = vec![0; k];
    let mut chosen = Vec::with_capacity(n);
    for c in 0..k {
        taken[c] = quota[c].min(by_class[c].len());
        chosen.extend_from_slice(&by_class[c][..taken[c]]);
    }
    let mut c = 0;
    while chosen.len() < n {
        if taken[c] < by_class[c].len() {
            chosen.push(by_class[c][taken[c]]);
            taken[c] += 1;
        }
        c = (c + 1) % k;
    }
    chosen.shuffle(&mut rng);
    Ok(set.select(&chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn toy(n: usize, classes: usize) -> LabeledSet {
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let inputs = Tensor::new(vec![n, 1], (0..n).map(|i| i as f64).collect()).unwrap();
        LabeledSet::new(inputs, labels, classes, None).unwrap()
    }

    #[test]
    fn batch_sizes_and_coverage() {
        let set = toy(10, 2);
        let mut it = batches(&set, 3, 1).unwrap();
        let e0 = it.next().unwrap();
        assert_eq!(e0.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3, 1]);
        let mut all: Vec<usize> = e0.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(batches(&set, 3, 1).unwrap().epoch_batches(0), e0);
        assert_ne!(it.next().unwrap(), e0);
    }

    #[test]
    fn subset_is_stratified() {
        let set = toy(1000, 10);
        let s = subset(&set, 95, 3).unwrap();
        assert!(s.class_counts().iter().all(|&c| c == 9 || c == 10));
        let full = subset(&set, 1000, 3).unwrap();
        let mut v: Vec<f64> = full.inputs().data().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, (0..1000).map(|i| i as f64).collect::<Vec<_>>());
        assert!(subset(&set, 1001, 0).is_err());
        assert_ne!(subset(&set, 50, 1).unwrap(), subset(&set, 50, 2).unwrap());
    }

    #[test]
    fn idx_errors() {
        let p = PathBuf::from("x.idx");
        let mut bad = vec![0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 7];
        assert!(matches!(parse_idx_images(&bad, &p), Err(Error::Format { .. })));
        bad[3] = 3;
        let (t, r, c) = parse_idx_images(&bad, &p).unwrap();
        assert_eq!((t.shape(), r, c), (&[1usize, 1][..], 1, 1));
        bad.pop();
        assert!(matches!(parse_idx_images(&bad, &p), Err(Error::Length { .. })));
        let labels = [0, 0, 8, 1, 0, 0, 0, 2, 3];
        assert!(matches!(parse_idx_labels(&labels, &p), Err(Error::Length { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let set = sample(&SyntheticDist::UniformHalves { p: 0.75 }, 20, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        set.write_csv(&path).unwrap();
        let back = LabeledSet::read_csv(&path).unwrap();
        assert_eq!(back.inputs(), set.inputs());
        assert_eq!(back.labels(), set.labels());
    }
}
