//! Forward ε-auction for the asymmetric assignment problem.

/// Arcs out of one person: `(object, value)`, sorted by object.
pub(crate) type Arcs = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BidLimit;

/// Gauss-Seidel auction: the lowest-numbered unassigned person bids next,
/// raising the price of its best object by `best - second + eps`.
///
/// Every person with at least one arc must be matchable, otherwise the
/// auction does not terminate before `max_bids`. Prices are updated in
/// place so callers can carry them over. Returns the object held by each
/// person.
pub(crate) fn auction_assign(
    arcs: &[Arcs],
    n_objects: usize,
    prices: &mut [f64],
    eps: f64,
    max_bids: u64,
    bids: &mut u64,
) -> Result<Vec<Option<usize>>, BidLimit> {
    debug_assert_eq!(prices.len(), n_objects);
    let spread = {
        let vals = arcs.iter().flatten().map(|&(_, v)| v);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo.is_finite() { hi - lo + 1.0 } else { 1.0 }
    };
    let mut owner: Vec<Option<usize>> = vec![None; n_objects];
    let mut held: Vec<Option<usize>> = vec![None; arcs.len()];
    let mut cursor = 0;
    loop {
        while cursor < arcs.len() && (held[cursor].is_some() || arcs[cursor].is_empty()) {
            cursor += 1;
        }
        let Some(person) = (cursor < arcs.len()).then_some(cursor) else { break };

        let mut best: Option<(usize, f64)> = None;
        let mut second = f64::NEG_INFINITY;
        for &(obj, value) in &arcs[person] {
            let net = value - prices[obj];
            match best {
                Some((_, b)) if net <= b => second = second.max(net),
                Some((_, b)) => {
                    second = second.max(b);
                    best = Some((obj, net));
                }
                None => best = Some((obj, net)),
            }
        }
        let (obj, best_net) = best.expect("person has arcs");
        if !second.is_finite() {
            second = best_net - spread;
        }
        *bids += 1;
        if *bids > max_bids {
            return Err(BidLimit);
        }
        prices[obj] += best_net - second + eps;
        if let Some(prev) = owner[obj].replace(person) {
            held[prev] = None;
            cursor = cursor.min(prev);
        }
        held[person] = Some(obj);
    }
    Ok(held)
}

/// Whether every person can be matched to a distinct object (Kuhn's
/// augmenting paths).
pub(crate) fn has_perfect_matching(arcs: &[Arcs], n_objects: usize) -> bool {
    fn augment(p: usize, arcs: &[Arcs], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &(o, _) in &arcs[p] {
            if seen[o] {
                continue;
            }
            seen[o] = true;
            if owner[o].is_none_or(|q| augment(q, arcs, seen, owner)) {
                owner[o] = Some(p);
                return true;
            }
        }
        false
    }
    if arcs.len() > n_objects {
        return false;
    }
    let mut owner = vec![None; n_objects];
    (0..arcs.len()).all(|p| {
        let mut seen = vec![false; n_objects];
        augment(p, arcs, &mut seen, &mut owner)
    })
}

/// Minimum total cost over perfect matchings of a square cost matrix,
/// `None` entries being forbidden. Exhaustive; meant for small `n`.
pub(crate) fn brute_force_min_cost(cost: &[Vec<Option<f64>>]) -> Option<f64> {
    fn go(row: usize, cost: &[Vec<Option<f64>>], used: &mut [bool], acc: f64, best: &mut Option<f64>) {
        if row == cost.len() {
            if best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for col in 0..used.len() {
            if let (false, Some(c)) = (used[col], cost[row][col]) {
                used[col] = true;
                go(row + 1, cost, used, acc + c, best);
                used[col] = false;
            }
        }
    }
    let mut best = None;
    let mut used = vec![false; cost.first().map_or(0, Vec::len)];
    go(0, cost, &mut used, 0.0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(values: &[&[f64]]) -> Vec<Arcs> {
        values.iter().map(|row| row.iter().copied().enumerate().collect()).collect()
    }

    #[test]
    fn diagonal_preference_is_found() {
        let arcs = square(&[&[-1.0, -2.0], &[-2.0, -1.0]]);
        let mut prices = vec![0.0; 2];
        let mut bids = 0;
        let held = auction_assign(&arcs, 2, &mut prices, 0.01, 1000, &mut bids).unwrap();
        assert_eq!(held, vec![Some(0), Some(1)]);
    }

    #[test]
    fn equal_values_go_to_the_first_bidder() {
        let arcs = square(&[&[-1.0, -1.0], &[-1.0, -1.0]]);
        let mut prices = vec![0.0; 2];
        let mut bids = 0;
        let held = auction_assign(&arcs, 2, &mut prices, 0.01, 1000, &mut bids).unwrap();
        assert_eq!(held, vec![Some(0), Some(1)]);
    }

    #[test]
    fn bid_cap_is_enforced() {
        let arcs = square(&[&[-1.0, -1.5], &[-1.0, -1.5]]);
        let mut prices = vec![0.0; 2];
        let mut bids = 0;
        assert_eq!(auction_assign(&arcs, 2, &mut prices, 1e-9, 1, &mut bids), Err(BidLimit));
    }

    #[test]
    fn perfect_matching_detection() {
        let ok: Vec<Arcs> = vec![vec![(0, 0.0), (1, 0.0)], vec![(0, 0.0)]];
        assert!(has_perfect_matching(&ok, 2));
        let blocked: Vec<Arcs> = vec![vec![(0, 0.0)], vec![(0, 0.0)]];
        assert!(!has_perfect_matching(&blocked, 2));
    }

    #[test]
    fn brute_force_on_two_by_two() {
        let c = vec![vec![Some(1.0), Some(2.0)], vec![Some(2.0), Some(1.0)]];
        assert_eq!(brute_force_min_cost(&c), Some(2.0));
        let forbidden = vec![vec![Some(1.0), None], vec![Some(2.0), None]];
        assert_eq!(brute_force_min_cost(&forbidden), None);
    }
}
