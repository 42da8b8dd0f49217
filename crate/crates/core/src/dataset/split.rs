use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Fractions for a stratified train/validation/test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Argument(format!("split fractions must be positive: {fracs:?}")));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("split fractions must sum to 1: {fracs:?}")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

// Guards against products such as 10 * 0.7 landing a hair below an integer.
fn floor_count(n: usize, frac: f64) -> usize {
    ((n as f64 * frac) + 1e-9).floor() as usize
}

/// Split each class independently: shuffle its indices with a seeded
/// generator, then cut at ⌊n_c·train⌋ and ⌊n_c·(train+val)⌋.
///
/// Records inside each part keep their original relative order.
pub fn split_stratified(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        per_class[l].push(i);
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut idx) in per_class.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 3 {
            return Err(Error::Stratification {
                class: ds.class_names()[class].clone(),
                count: idx.len(),
            });
        }
        let mut rng = Rng::derive(spec.seed, &[class as u64]);
        rng.shuffle(&mut idx);
        let n = idx.len();
        let cut1 = floor_count(n, spec.train_frac);
        let cut2 = floor_count(n, spec.train_frac + spec.val_frac).max(cut1);
        train.extend_from_slice(&idx[..cut1]);
        val.extend_from_slice(&idx[cut1..cut2]);
        test.extend_from_slice(&idx[cut2..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok((ds.subset(&train), ds.subset(&val), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn dataset(per_class: &[usize]) -> LabeledDataset {
        let n: usize = per_class.iter().sum();
        let data = (0..n).flat_map(|i| [i as f64 / n as f64; 4]).collect();
        let labels = per_class
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat(c).take(k))
            .collect();
        let names = (0..per_class.len()).map(|c| format!("c{c:02}")).collect();
        LabeledDataset::new(Tensor::from_vec(&[n, 2, 2], data).unwrap(), labels, names).unwrap()
    }

    #[test]
    fn floor_rule_counts() {
        let ds = dataset(&[10, 10, 10]);
        let (tr, va, te) = split_stratified(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(tr.class_counts(), vec![7, 7, 7]);
        assert_eq!(va.class_counts(), vec![1, 1, 1]);
        assert_eq!(te.class_counts(), vec![2, 2, 2]);
    }

    #[test]
    fn deterministic_and_partitioning() {
        let ds = dataset(&[13, 7, 29]);
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 99).unwrap();
        let a = split_stratified(&ds, &spec).unwrap();
        let b = split_stratified(&ds, &spec).unwrap();
        assert_eq!(a, b);

        // every record lands in exactly one part
        let mut firsts: Vec<u64> = [&a.0, &a.1, &a.2]
            .iter()
            .flat_map(|d| (0..d.len()).map(|i| d.image(i)[0].to_bits()))
            .collect();
        firsts.sort_unstable();
        let mut orig: Vec<u64> = (0..ds.len()).map(|i| ds.image(i)[0].to_bits()).collect();
        orig.sort_unstable();
        assert_eq!(firsts, orig);
    }

    #[test]
    fn counts_within_one_of_target() {
        let sizes = [3, 4, 5, 11, 17, 23, 50];
        let ds = dataset(&sizes);
        let spec = SplitSpec::new(0.5, 0.3, 0.2, 1).unwrap();
        let (tr, va, te) = split_stratified(&ds, &spec).unwrap();
        for (c, &n) in sizes.iter().enumerate() {
            for (part, frac) in [(&tr, 0.5), (&va, 0.3), (&te, 0.2)] {
                let got = part.class_counts()[c] as f64;
                assert!((got - n as f64 * frac).abs() < 1.0 + 1e-9, "class {c}");
            }
        }
    }

    #[test]
    fn small_class_errors() {
        let ds = dataset(&[5, 2]);
        match split_stratified(&ds, &SplitSpec::default()) {
            Err(Error::Stratification { class, count }) => {
                assert_eq!(class, "c01");
                assert_eq!(count, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitSpec::new(0.5, 0.5, 0.0, 0).is_err());
        assert!(SplitSpec::new(0.5, 0.3, 0.3, 0).is_err());
    }
}
