use rand::seq::SliceRandom;

use super::image::{add_gaussian_noise, NoiseSpec, Sample};
use crate::error::Result;
use crate::seed::{derive_seed, rng_from, STREAM_SHUFFLE};

/// One mini-batch: positions into the source slice plus the (possibly augmented) samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub samples: Vec<Sample>,
}

/// Shuffled mini-batches over a sample slice. The last batch may be short.
pub struct Batches<'a> {
    samples: &'a [Sample],
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    augment: Option<NoiseSpec>,
}

/// Batches for one epoch. `seed` fixes the order; when `augment` is given each
/// sample gets noise seeded from the augment seed, `seed`, and its position.
pub fn batches(
    samples: &[Sample],
    batch_size: usize,
    seed: u64,
    augment: Option<NoiseSpec>,
) -> Batches<'_> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng_from(seed, &[STREAM_SHUFFLE]));
    let augment = augment.map(|spec| NoiseSpec { seed: derive_seed(spec.seed, &[seed]), ..spec });
    Batches { samples, order, batch_size, cursor: 0, augment }
}

impl Iterator for Batches<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let indices = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        let samples = indices
            .iter()
            .map(|&i| {
                let s = &self.samples[i];
                match self.augment {
                    Some(spec) => {
                        let spec = NoiseSpec { seed: derive_seed(spec.seed, &[i as u64]), ..spec };
                        Ok(Sample { image: add_gaussian_noise(&s.image, &spec)?, ..s.clone() })
                    }
                    None => Ok(s.clone()),
                }
            })
            .collect::<Result<Vec<_>>>();
        Some(samples.map(|samples| Batch { indices, samples }))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let remaining = (self.order.len() - self.cursor).div_ceil(self.batch_size);
        (remaining, Some(remaining))
    }
}

impl ExactSizeIterator for Batches<'_> {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;
    use crate::tensor::Tensor;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample {
                id: format!("s{i}"),
                image: Tensor::full(&[1, 4, 4], 0.5),
                label: if i % 2 == 0 { Label::Male } else { Label::Female },
            })
            .collect()
    }

    #[test]
    fn sizes_with_short_tail() {
        let s = samples(7);
        let sizes: Vec<usize> = batches(&s, 3, 1, None).map(|b| b.unwrap().samples.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert_eq!(batches(&s, 3, 1, None).len(), 3);
    }

    #[test]
    fn seeded_order_and_exact_cover() {
        let s = samples(23);
        let order = |seed| -> Vec<usize> {
            batches(&s, 5, seed, None).flat_map(|b| b.unwrap().indices).collect()
        };
        assert_eq!(order(4), order(4));
        assert_ne!(order(4), order(5));
        let mut all = order(4);
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn augmentation_is_per_sample_and_deterministic() {
        let s = samples(4);
        let spec = NoiseSpec::new(0.1, 8).unwrap();
        let run = || -> Vec<Sample> {
            batches(&s, 4, 2, Some(spec)).flat_map(|b| b.unwrap().samples).collect()
        };
        let a = run();
        assert_eq!(a, run());
        assert_ne!(a[0].image, a[1].image);
        assert_ne!(a[0].image, s[0].image);
    }
}
