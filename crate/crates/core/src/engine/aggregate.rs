use std::ops::Range;

use crate::numcore::{ParamVector, SegmentGroup};
use crate::{Error, Result};

/// Sample-weighted mean `Σ (n_i / Σn) · p_i` over the segments of `filter`
/// (all segments when `None`); every other coordinate is copied from `base`.
///
/// Computed as `p_0 + Σ w_i (p_i − p_0)` so a consensus is returned exactly.
pub fn weighted_average(
    updates: &[(&ParamVector, usize)],
    filter: Option<SegmentGroup>,
    base: &ParamVector,
) -> Result<ParamVector> {
    let (first, _) = updates
        .first()
        .ok_or_else(|| Error::Config("cannot aggregate an empty update list".into()))?;
    for (p, _) in updates {
        base.check_layout(p)?;
    }
    let total: usize = updates.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Config("aggregation weights sum to zero".into()));
    }
    let weights: Vec<f64> = updates.iter().map(|(_, n)| *n as f64 / total as f64).collect();

    let mut out = base.clone();
    let ranges: Vec<Range<usize>> = match filter {
        None => std::iter::once(0..base.len()).collect(),
        Some(g) => base.layout().group_ranges(g).collect(),
    };
    let anchor = first.as_slice();
    let dst = out.as_mut_slice();
    for r in ranges {
        for j in r {
            let a = anchor[j];
            let mut acc = 0.0;
            for ((p, _), w) in updates.iter().zip(&weights) {
                acc += w * (p.as_slice()[j] - a);
            }
            dst[j] = a + acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Layout;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn layout() -> Arc<Layout> {
        Arc::new(Layout::new([("b", 2, SegmentGroup::Body), ("h", 1, SegmentGroup::Head)]).unwrap())
    }

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(layout(), v.to_vec()).unwrap()
    }

    #[test]
    fn weighted_mean_example() {
        let l = Arc::new(Layout::new([("x", 1, SegmentGroup::Head)]).unwrap());
        let a = ParamVector::from_vec(Arc::clone(&l), vec![0.0]).unwrap();
        let b = ParamVector::from_vec(Arc::clone(&l), vec![4.0]).unwrap();
        let out = weighted_average(&[(&a, 1), (&b, 3)], None, &a).unwrap();
        assert_eq!(out.as_slice(), &[3.0]);
        let eq = weighted_average(&[(&a, 2), (&b, 2)], None, &a).unwrap();
        assert_eq!(eq.as_slice(), &[2.0]);
    }

    #[test]
    fn filter_leaves_other_group() {
        let base = pv(&[9.0, 9.0, 9.0]);
        let a = pv(&[1.0, 2.0, 3.0]);
        let b = pv(&[3.0, 4.0, 5.0]);
        let out = weighted_average(&[(&a, 1), (&b, 1)], Some(SegmentGroup::Body), &base).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 3.0, 9.0]);
        let out = weighted_average(&[(&a, 1), (&b, 1)], Some(SegmentGroup::Head), &base).unwrap();
        assert_eq!(out.as_slice(), &[9.0, 9.0, 4.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(weighted_average(&[], None, &pv(&[0.0; 3])).is_err());
    }

    proptest! {
        #[test]
        fn output_in_coordinatewise_hull(
            vals in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..6),
            ns in proptest::collection::vec(1usize..100, 6),
        ) {
            let ps: Vec<ParamVector> = vals.iter().map(|v| pv(v)).collect();
            let ups: Vec<(&ParamVector, usize)> = ps.iter().zip(&ns).map(|(p, &n)| (p, n)).collect();
            let out = weighted_average(&ups, None, &ps[0]).unwrap();
            for j in 0..3 {
                let lo = vals.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
                let hi = vals.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-12 * (hi.abs().max(lo.abs()).max(1.0));
                prop_assert!(out.as_slice()[j] >= lo - tol && out.as_slice()[j] <= hi + tol);
            }
        }

        #[test]
        fn consensus_is_returned_exactly(v in proptest::collection::vec(-1e3f64..1e3, 3), k in 1usize..8) {
            let p = pv(&v);
            let ups: Vec<(&ParamVector, usize)> = (0..k).map(|i| (&p, i + 1)).collect();
            prop_assert_eq!(weighted_average(&ups, None, &p).unwrap(), p.clone());
        }
    }
}
