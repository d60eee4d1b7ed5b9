//! Classical oversamplers: random duplication, SMOTE, Borderline-SMOTE and ADASYN.
//!
//! All of them return the original rows unchanged, followed by the synthetic
//! rows grouped by class.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregators::interpolate;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neighbors::{nearest_any_class, NeighborIndex};

/// Target row count per class and the generation seed.
#[derive(Debug, Clone, PartialEq)]
pub struct OversamplePlan {
    pub targets: Vec<usize>,
    pub seed: u64,
}

impl OversamplePlan {
    /// Raises every class to the majority count.
    pub fn balanced(d: &Dataset, seed: u64) -> Self {
        Self {
            targets: vec![d.majority_count(); d.n_classes()],
            seed,
        }
    }

    fn deficits(&self, d: &Dataset) -> Result<Vec<usize>> {
        if self.targets.len() != d.n_classes() {
            return Err(Error::InvalidPlan(format!(
                "{} targets for {} classes",
                self.targets.len(),
                d.n_classes()
            )));
        }
        self.targets
            .iter()
            .zip(&d.class_counts)
            .enumerate()
            .map(|(c, (&t, &n))| {
                if t < n {
                    Err(Error::InvalidPlan(format!("class {c} target {t} below its count {n}")))
                } else if n == 0 && t > 0 {
                    Err(Error::EmptyClass(c))
                } else {
                    Ok(t - n)
                }
            })
            .collect()
    }
}

/// Where a synthetic row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOrigin {
    pub class: usize,
    pub seed_row: usize,
    /// Interpolation partner; `None` for plain duplication.
    pub partner_row: Option<usize>,
    pub lambda: f64,
}

/// Output of a traced oversampler.
#[derive(Debug, Clone)]
pub struct Resampled {
    pub data: Dataset,
    pub origins: Vec<SyntheticOrigin>,
}

fn assemble(d: &Dataset, rows: Vec<Vec<f64>>, origins: Vec<SyntheticOrigin>) -> Result<Resampled> {
    let labels: Vec<usize> = origins.iter().map(|o| o.class).collect();
    Ok(Resampled {
        data: d.extend(&rows, &labels)?,
        origins,
    })
}

/// Duplicates uniformly drawn rows of each deficient class.
pub fn random_oversample(d: &Dataset, plan: &OversamplePlan) -> Result<Dataset> {
    let deficits = plan.deficits(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (c, &need) in deficits.iter().enumerate() {
        let members = d.class_rows(c);
        for _ in 0..need {
            let r = members[rng.random_range(0..members.len())];
            rows.push(d.row(r).to_vec());
            origins.push(SyntheticOrigin {
                class: c,
                seed_row: r,
                partner_row: None,
                lambda: 1.0,
            });
        }
    }
    Ok(assemble(d, rows, origins)?.data)
}

/// Interpolates from each seed toward a random same-class neighbor.
fn interpolate_from(
    d: &Dataset,
    class: usize,
    seeds: &[usize],
    need: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
    rows: &mut Vec<Vec<f64>>,
    origins: &mut Vec<SyntheticOrigin>,
) -> Result<()> {
    if need == 0 {
        return Ok(());
    }
    let index = NeighborIndex::build(d, class, k)?;
    for i in 0..need {
        let seed = seeds[i % seeds.len()];
        emit(d, &index, class, seed, k, rng, rows, origins)?;
    }
    Ok(())
}

fn emit(
    d: &Dataset,
    index: &NeighborIndex,
    class: usize,
    seed: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
    rows: &mut Vec<Vec<f64>>,
    origins: &mut Vec<SyntheticOrigin>,
) -> Result<()> {
    let nb = index.neighbors_of(seed, k)?;
    let partner = nb.rows[rng.random_range(0..nb.rows.len())];
    let lambda: f64 = rng.random();
    rows.push(interpolate(d.row(seed), d.row(partner), lambda)?);
    origins.push(SyntheticOrigin {
        class,
        seed_row: seed,
        partner_row: Some(partner),
        lambda,
    });
    Ok(())
}

/// SMOTE with round-robin seeds over each deficient class.
pub fn smote(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Dataset> {
    Ok(smote_traced(d, plan, k)?.data)
}

pub fn smote_traced(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Resampled> {
    let deficits = plan.deficits(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (c, &need) in deficits.iter().enumerate() {
        let members = d.class_rows(c);
        interpolate_from(d, c, &members, need, k, &mut rng, &mut rows, &mut origins)?;
    }
    assemble(d, rows, origins)
}

/// How a minority row sits relative to other classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Borderline {
    /// Fewer than half of its neighbors belong to other classes.
    Safe,
    /// At least half, but not all, neighbors belong to other classes.
    Danger,
    /// Every neighbor belongs to another class.
    Noise,
}

/// Classifies each row of `class` by its `k` nearest rows over all classes.
pub fn borderline_categories(d: &Dataset, class: usize, k: usize) -> Vec<(usize, Borderline)> {
    d.class_rows(class)
        .into_iter()
        .map(|r| {
            let nn = nearest_any_class(d, r, k);
            let foreign = nn.iter().filter(|&&s| d.labels[s] != class).count();
            let frac = foreign as f64 / nn.len().max(1) as f64;
            let cat = if frac >= 1.0 {
                Borderline::Noise
            } else if frac >= 0.5 {
                Borderline::Danger
            } else {
                Borderline::Safe
            };
            (r, cat)
        })
        .collect()
}

/// Borderline-SMOTE (borderline-1): only danger rows seed, partners are same-class.
pub fn borderline_smote(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Dataset> {
    Ok(borderline_smote_traced(d, plan, k)?.data)
}

pub fn borderline_smote_traced(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Resampled> {
    let deficits = plan.deficits(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (c, &need) in deficits.iter().enumerate() {
        if need == 0 {
            continue;
        }
        let danger: Vec<usize> = borderline_categories(d, c, k)
            .into_iter()
            .filter(|(_, cat)| *cat == Borderline::Danger)
            .map(|(r, _)| r)
            .collect();
        let seeds = if danger.is_empty() {
            warn!("borderline-smote: class {c} has no danger rows, falling back to smote");
            d.class_rows(c)
        } else {
            danger
        };
        interpolate_from(d, c, &seeds, need, k, &mut rng, &mut rows, &mut origins)?;
    }
    assemble(d, rows, origins)
}

/// Splits `total` proportionally to `weights`, handing leftover units to the
/// largest fractional parts (ties to the lower index).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        alloc[i] += 1;
    }
    alloc
}

/// Per-row synthetic counts ADASYN assigns to `class`.
pub fn adasyn_allocation(d: &Dataset, class: usize, need: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    let members = d.class_rows(class);
    if members.len() < k + 1 {
        return Err(Error::ClassTooSmall {
            class,
            count: members.len(),
            needed: k + 1,
        });
    }
    let mut ratios: Vec<f64> = members
        .iter()
        .map(|&r| {
            let nn = nearest_any_class(d, r, k);
            nn.iter().filter(|&&s| d.labels[s] != class).count() as f64 / k as f64
        })
        .collect();
    if ratios.iter().all(|&r| r == 0.0) {
        warn!("adasyn: class {class} has no foreign neighbors, allocating uniformly");
        ratios.iter_mut().for_each(|r| *r = 1.0);
    }
    let alloc = largest_remainder(need, &ratios);
    Ok(members.into_iter().zip(alloc).collect())
}

/// ADASYN: rows with more foreign neighbors receive more synthetic rows.
pub fn adasyn(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Dataset> {
    Ok(adasyn_traced(d, plan, k)?.data)
}

pub fn adasyn_traced(d: &Dataset, plan: &OversamplePlan, k: usize) -> Result<Resampled> {
    let deficits = plan.deficits(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (c, &need) in deficits.iter().enumerate() {
        if need == 0 {
            continue;
        }
        let alloc = adasyn_allocation(d, c, need, k)?;
        let index = NeighborIndex::build(d, c, k)?;
        for (seed, count) in alloc {
            for _ in 0..count {
                emit(d, &index, c, seed, k, &mut rng, &mut rows, &mut origins)?;
            }
        }
    }
    assemble(d, rows, origins)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn blobs(counts: &[usize], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                rows.push(vec![rng.random::<f64>() * 0.5 + c as f64 * 0.3, rng.random::<f64>()]);
                labels.push(c);
            }
        }
        Dataset::from_rows(&rows, labels, counts.len()).unwrap()
    }

    fn assert_prefix_unchanged(original: &Dataset, out: &Dataset) {
        assert_eq!(&out.features.data()[..original.features.len()], original.features.data());
        assert_eq!(&out.labels[..original.len()], &original.labels[..]);
    }

    #[test]
    fn random_oversample_counts_and_membership() {
        let d = blobs(&[100, 20], 1);
        let out = random_oversample(&d, &OversamplePlan::balanced(&d, 3)).unwrap();
        assert_eq!(out.class_counts, vec![100, 100]);
        assert_prefix_unchanged(&d, &out);
        for r in d.len()..out.len() {
            assert!((0..d.len()).any(|s| d.row(s) == out.row(r) && d.labels[s] == out.labels[r]));
        }
        let balanced = blobs(&[10, 10], 2);
        assert_eq!(random_oversample(&balanced, &OversamplePlan::balanced(&balanced, 0)).unwrap(), balanced);
    }

    #[test]
    fn plan_validation() {
        let d = blobs(&[10, 5], 1);
        let bad = OversamplePlan { targets: vec![5, 5], seed: 0 };
        assert!(matches!(smote(&d, &bad, 3), Err(Error::InvalidPlan(_))));
        let short = OversamplePlan { targets: vec![10], seed: 0 };
        assert!(smote(&d, &short, 3).is_err());
    }

    #[test]
    fn smote_two_point_class_stays_on_segment() {
        let d = Dataset::from_rows(
            &[[5.0, 5.0], [6.0, 5.0], [5.0, 6.0], [6.0, 6.0], [0.0, 0.0], [1.0, 1.0]],
            vec![0, 0, 0, 0, 1, 1],
            2,
        )
        .unwrap();
        let out = smote(&d, &OversamplePlan::balanced(&d, 9), 5).unwrap();
        assert_eq!(out.class_counts, vec![4, 4]);
        for r in d.len()..out.len() {
            let p = out.row(r);
            assert!((p[0] - p[1]).abs() < 1e-12 && (0.0..=1.0).contains(&p[0]));
        }
    }

    #[test]
    fn smote_rejects_singleton_minority() {
        let d = blobs(&[10, 1], 4);
        assert!(matches!(
            smote(&d, &OversamplePlan::balanced(&d, 0), 3),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn smote_balances_and_stays_in_class_box() {
        let d = blobs(&[100, 20, 35], 5);
        let res = smote_traced(&d, &OversamplePlan::balanced(&d, 1), 5).unwrap();
        assert_eq!(res.data.class_counts, vec![100, 100, 100]);
        assert_prefix_unchanged(&d, &res.data);
        for (i, o) in res.origins.iter().enumerate() {
            let p = res.data.row(d.len() + i);
            for j in 0..2 {
                let vals: Vec<f64> = d.class_rows(o.class).iter().map(|&r| d.row(r)[j]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(p[j] >= lo - 1e-12 && p[j] <= hi + 1e-12);
            }
        }
        // round-robin covers every minority row
        let seeds: std::collections::HashSet<usize> =
            res.origins.iter().filter(|o| o.class == 1).map(|o| o.seed_row).collect();
        assert_eq!(seeds.len(), 20);
    }

    #[test]
    fn samplers_are_deterministic() {
        let d = blobs(&[60, 15], 6);
        let plan = OversamplePlan::balanced(&d, 17);
        assert_eq!(smote(&d, &plan, 3).unwrap(), smote(&d, &plan, 3).unwrap());
        assert_eq!(adasyn(&d, &plan, 3).unwrap(), adasyn(&d, &plan, 3).unwrap());
        assert_eq!(
            borderline_smote(&d, &plan, 3).unwrap(),
            borderline_smote(&d, &plan, 3).unwrap()
        );
    }

    /// Class 1 sits at 0.0 and 0.1 (safe), at 10.0 inside class 0 (noise) and
    /// at 5.05 and 5.15 between two class-0 rows (danger).
    fn boundary_fixture() -> Dataset {
        let pts: [(f64, usize); 12] = [
            (0.0, 1),
            (0.1, 1),
            (10.0, 1),
            (5.05, 1),
            (5.15, 1),
            (4.0, 0),
            (6.0, 0),
            (9.0, 0),
            (9.5, 0),
            (10.5, 0),
            (11.0, 0),
            (20.0, 0),
        ];
        let rows: Vec<[f64; 1]> = pts.iter().map(|p| [p.0]).collect();
        Dataset::from_rows(&rows, pts.iter().map(|p| p.1).collect(), 2).unwrap()
    }

    #[test]
    fn borderline_categories_on_fixture() {
        let d = boundary_fixture();
        let cats = borderline_categories(&d, 1, 3);
        let get = |r: usize| cats.iter().find(|(row, _)| *row == r).unwrap().1;
        // 0.0: {0.1, 4.0, 5.05} -> 1/3 foreign
        assert_eq!(get(0), Borderline::Safe);
        assert_eq!(get(1), Borderline::Safe);
        // 10.0: {9.5, 10.5, 9.0}
        assert_eq!(get(2), Borderline::Noise);
        // 5.05: {5.15, 6.0, 4.0} -> 2/3 foreign
        assert_eq!(get(3), Borderline::Danger);
        assert_eq!(get(4), Borderline::Danger);
    }

    #[test]
    fn borderline_seeds_only_danger_rows() {
        let d = boundary_fixture();
        let res = borderline_smote_traced(&d, &OversamplePlan::balanced(&d, 2), 3).unwrap();
        assert_eq!(res.data.class_counts, vec![7, 7]);
        let seeds: std::collections::BTreeSet<usize> = res.origins.iter().map(|o| o.seed_row).collect();
        assert_eq!(seeds.into_iter().collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn borderline_falls_back_without_danger() {
        let d = Dataset::from_rows(
            &[[0.0], [0.1], [0.2], [5.0], [5.1], [5.2], [5.3]],
            vec![1, 1, 1, 0, 0, 0, 0],
            2,
        )
        .unwrap();
        let out = borderline_smote(&d, &OversamplePlan::balanced(&d, 0), 2).unwrap();
        assert_eq!(out.class_counts, vec![4, 4]);
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(5, &[0.0, 1.0, 0.0]), vec![0, 5, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let n = rng.random_range(1..20);
            let total = rng.random_range(0..200);
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let alloc = largest_remainder(total, &w);
            assert_eq!(alloc.iter().sum::<usize>(), total);
            let sum: f64 = w.iter().sum();
            for (a, wi) in alloc.iter().zip(&w) {
                let q = total as f64 * wi / sum;
                assert!((*a as f64 - q).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn adasyn_focuses_on_hard_rows() {
        let d = boundary_fixture();
        // ratios 1/3, 1/3, 1, 2/3, 2/3 -> quotas 3.33, 3.33, 10, 6.67, 6.67 of 30
        let alloc = adasyn_allocation(&d, 1, 30, 3).unwrap();
        assert_eq!(alloc, vec![(0, 3), (1, 3), (2, 10), (3, 7), (4, 7)]);

        let out = adasyn(&d, &OversamplePlan::balanced(&d, 1), 3).unwrap();
        assert_eq!(out.class_counts, vec![7, 7]);
    }

    #[test]
    fn adasyn_single_hard_row_takes_everything() {
        let d = Dataset::from_rows(
            &[[0.0], [0.1], [0.2], [0.3], [9.0], [8.9], [9.1], [9.2], [9.3], [9.4]],
            vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0],
            2,
        )
        .unwrap();
        // only 9.0 sees foreign rows among its 2 nearest
        let alloc = adasyn_allocation(&d, 1, 6, 2).unwrap();
        assert_eq!(alloc.iter().map(|a| a.1).collect::<Vec<_>>(), vec![0, 0, 0, 0, 6]);
    }

    #[test]
    fn adasyn_uniform_without_foreign_neighbors() {
        let d = Dataset::from_rows(
            &[[0.0], [0.1], [0.2], [0.3], [9.0], [9.1], [9.2], [9.3], [9.4], [9.5], [9.6], [9.7]],
            vec![1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
            2,
        )
        .unwrap();
        let alloc = adasyn_allocation(&d, 1, 4, 3).unwrap();
        assert!(alloc.iter().all(|a| a.1 == 1));
    }

    #[test]
    fn adasyn_reports_small_classes() {
        let d = blobs(&[20, 3], 2);
        assert!(matches!(
            adasyn(&d, &OversamplePlan::balanced(&d, 0), 5),
            Err(Error::ClassTooSmall { needed: 6, .. })
        ));
    }
}
