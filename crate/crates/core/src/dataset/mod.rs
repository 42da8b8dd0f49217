//! Labeled glyph datasets: ingestion from class directories, stratified
//! splits and the GLY1 binary container.

mod gly;
mod pgm;
mod split;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use gly::{read_gly, read_gly_file, write_gly, write_gly_file, GLY_MAGIC, GLY_VERSION};
pub use pgm::{load_pgm, resize_bilinear, GrayImage};
pub use split::{split_stratified, SplitSpec};

/// Uniform-shape grayscale images in [0, 1] with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Tensor,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// `images` must have shape `[n, h, w]`; `class_names` must be sorted by
    /// code point and free of duplicates.
    pub fn new(images: Tensor, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let &[n, h, w] = images.shape() else {
            return Err(Error::Dimension(format!(
                "dataset images must be [n, h, w], got {:?}",
                images.shape()
            )));
        };
        if h == 0 || w == 0 {
            return Err(Error::Dimension(format!("image extent {h}x{w} must be positive")));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!("{n} images but {} labels", labels.len())));
        }
        if class_names.is_empty() {
            return Err(Error::Argument("class table is empty".into()));
        }
        if class_names.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Argument(
                "class names must be strictly ascending by code point".into(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Argument(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(LabeledDataset {
            images,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.images.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn image(&self, i: usize) -> &[f64] {
        self.images.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Images flattened to `[n, h*w]`.
    pub fn flat_features(&self) -> Tensor {
        let n = self.len();
        Tensor::from_vec(&[n, self.height() * self.width()], self.images.data().to_vec())
            .expect("shape is consistent")
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Records at `indices`, in the order given; the class table is kept.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let row = self.height() * self.width();
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        LabeledDataset {
            images: Tensor::from_vec(&[indices.len(), self.height(), self.width()], data)
                .expect("shape is consistent"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Keep only the named classes, relabeled against the reduced (sorted) table.
    pub fn select_classes<S: AsRef<str>>(&self, names: &[S]) -> Result<LabeledDataset> {
        let mut wanted: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        wanted.sort();
        wanted.dedup();
        if wanted.is_empty() {
            return Err(Error::Argument("no classes selected".into()));
        }
        let mut remap = vec![None; self.n_classes()];
        for (new, name) in wanted.iter().enumerate() {
            let old = self
                .class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Argument(format!("unknown class {name:?}")))?;
            remap[old] = Some(new);
        }
        let indices: Vec<usize> = (0..self.len())
            .filter(|&i| remap[self.labels[i]].is_some())
            .collect();
        let mut sub = self.subset(&indices);
        for l in &mut sub.labels {
            *l = remap[*l].expect("filtered above");
        }
        sub.class_names = wanted;
        Ok(sub)
    }
}

/// Read `root/<class>/<file>.pgm`, resize every glyph to `side`×`side` and
/// scale intensities to [0, 1].
///
/// Class order is the code-point order of the directory names and files are
/// visited in filename order, so the result does not depend on how the
/// filesystem enumerates entries.
pub fn ingest_dir(root: &Path, side: usize) -> Result<LabeledDataset> {
    if side == 0 {
        return Err(Error::Argument("side must be positive".into()));
    }
    let mut classes: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let Ok(name) = entry.file_name().into_string() else {
            return Err(Error::Argument(format!(
                "class directory name is not UTF-8: {}",
                entry.path().display()
            )));
        };
        if name.starts_with('.') {
            continue;
        }
        classes.push((name, entry.path()));
    }
    if classes.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no class subdirectories",
            root.display()
        )));
    }
    classes.sort();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (label, (_, dir)) in classes.iter().enumerate() {
        let mut files: Vec<std::path::PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
            })
            .collect();
        files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
        for path in files {
            let bytes = fs::read(&path)?;
            let img = load_pgm(&bytes).map_err(|e| e.with_path(&path))?;
            let img = if img.width() == side && img.height() == side {
                img
            } else {
                resize_bilinear(&img, side, side)?
            };
            data.extend(img.pixels().iter().map(|&p| p as f64 / 255.0));
            labels.push(label);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} contains no .pgm files",
            root.display()
        )));
    }
    let images = Tensor::from_vec(&[labels.len(), side, side], data)?;
    LabeledDataset::new(images, labels, classes.into_iter().map(|(n, _)| n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pgm(path: &Path, w: usize, h: usize, fill: u8) {
        let img = GrayImage::new(w, h, vec![fill; w * h]).unwrap();
        fs::write(path, img.to_pgm()).unwrap();
    }

    fn temp_root(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("glyphlab-ds-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn ingest_enumerates_sorted() {
        let root = temp_root("enum");
        for (class, files) in [("H", 3), ("A", 2)] {
            fs::create_dir(root.join(class)).unwrap();
            for k in 0..files {
                write_pgm(&root.join(class).join(format!("g{k}.pgm")), 4, 4, 255);
            }
        }
        let ds = ingest_dir(&root, 8).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.class_names(), &["A".to_string(), "H".to_string()]);
        assert_eq!(ds.labels(), &[0, 0, 1, 1, 1]);
        assert_eq!((ds.height(), ds.width()), (8, 8));
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn ingest_normalizes_endpoints() {
        let root = temp_root("norm");
        fs::create_dir(root.join("x")).unwrap();
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        fs::write(root.join("x/a.pgm"), img.to_pgm()).unwrap();
        let ds = ingest_dir(&root, 0).map(|_| ()).unwrap_err();
        assert!(matches!(ds, Error::Argument(_)));
        // keep native size by asking for a matching square
        let img = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        fs::write(root.join("x/a.pgm"), img.to_pgm()).unwrap();
        let ds = ingest_dir(&root, 2).unwrap();
        assert_eq!(ds.image(0), &[0.0, 1.0, 1.0, 0.0]);
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn ingest_34_classes() {
        let root = temp_root("34");
        for k in 0..34 {
            let dir = root.join(format!("letter_{k:02}"));
            fs::create_dir(&dir).unwrap();
            write_pgm(&dir.join("0.pgm"), 3, 3, k as u8);
        }
        let ds = ingest_dir(&root, 4).unwrap();
        assert_eq!(ds.n_classes(), 34);
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn ingest_empty_root() {
        let root = temp_root("empty");
        assert!(matches!(ingest_dir(&root, 4), Err(Error::EmptyDataset(_))));
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn ingest_corrupt_file_names_path() {
        let root = temp_root("corrupt");
        fs::create_dir(root.join("A")).unwrap();
        fs::write(root.join("A/bad.pgm"), b"P5 4 4 255\n\x00\x01").unwrap();
        let err = ingest_dir(&root, 4).unwrap_err();
        match &err {
            Error::Corrupt { path: Some(p), .. } => assert!(p.ends_with("A/bad.pgm")),
            other => panic!("unexpected {other}"),
        }
        fs::remove_dir_all(root).unwrap();
    }

    #[test]
    fn new_validates_invariants() {
        let imgs = Tensor::zeros(&[2, 2, 2]);
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(LabeledDataset::new(imgs.clone(), vec![0, 2], names(&["a", "b"])).is_err());
        assert!(LabeledDataset::new(imgs.clone(), vec![0, 1], names(&["b", "a"])).is_err());
        assert!(LabeledDataset::new(imgs.clone(), vec![0, 0], names(&["a", "a"])).is_err());
        assert!(LabeledDataset::new(imgs.clone(), vec![0], names(&["a"])).is_err());
        assert!(LabeledDataset::new(imgs, vec![0, 1], names(&["a", "b"])).is_ok());
    }

    #[test]
    fn select_classes_relabels() {
        let mut data = Vec::new();
        for v in 0..6 {
            data.extend([v as f64 / 10.0; 4]);
        }
        let names: Vec<String> = ["A", "B", "H"].iter().map(|s| s.to_string()).collect();
        let ds = LabeledDataset::new(
            Tensor::from_vec(&[6, 2, 2], data).unwrap(),
            vec![0, 1, 2, 0, 1, 2],
            names,
        )
        .unwrap();
        let sub = ds.select_classes(&["H", "A"]).unwrap();
        assert_eq!(sub.class_names(), &["A".to_string(), "H".to_string()]);
        assert_eq!(sub.labels(), &[0, 1, 0, 1]);
        assert_eq!(sub.image(1)[0], 0.2);
        assert!(ds.select_classes(&["Z"]).is_err());
    }
}
