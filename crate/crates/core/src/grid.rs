//! Integer boxes `{z : 0 <= z <= b}` and their mixed-radix enumeration.

/// Number of points in the box, saturating at `u128::MAX`.
pub fn box_size(bounds: &[u64]) -> u128 {
    bounds
        .iter()
        .try_fold(1u128, |acc, &b| acc.checked_mul(b as u128 + 1))
        .unwrap_or(u128::MAX)
}

/// Mixed-radix rank of `z`, first coordinate most significant.
pub fn rank(bounds: &[u64], z: &[u64]) -> usize {
    z.iter()
        .zip(bounds)
        .fold(0usize, |acc, (&v, &b)| acc * (b as usize + 1) + v as usize)
}

/// All points of the box in lexicographic order.
pub fn points(bounds: &[u64]) -> BoxPoints<'_> {
    BoxPoints {
        bounds,
        next: Some(vec![0; bounds.len()]),
    }
}

pub struct BoxPoints<'a> {
    bounds: &'a [u64],
    next: Option<Vec<u64>>,
}

impl Iterator for BoxPoints<'_> {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            if succ[i] < self.bounds[i] {
                succ[i] += 1;
                self.next = Some(succ);
                return Some(current);
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

pub fn dominates(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_in_rank_order() {
        let bounds = [1, 2];
        let all: Vec<_> = points(&bounds).collect();
        assert_eq!(all.len() as u128, box_size(&bounds));
        for (i, z) in all.iter().enumerate() {
            assert_eq!(rank(&bounds, z), i);
        }
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(points(&[]).count(), 1);
    }
}
