//! Small permutation helpers shared by the combinatorial modules.

/// All permutations of `0..n` in lexicographic order, each with its sign.
pub fn all_perms(n: usize) -> Vec<(Vec<u8>, i8)> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..n as u8).collect();
    loop {
        let sg = sign(&cur);
        out.push((cur.clone(), sg));
        if !next_permutation(&mut cur) {
            break;
        }
    }
    out
}

/// Advances to the next permutation in lexicographic order; false after the last one.
pub fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Sign of a permutation of `0..n` given in one-line notation.
pub fn sign(p: &[u8]) -> i8 {
    let mut seen = vec![false; p.len()];
    let mut parity = 0usize;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = p[k] as usize;
            len += 1;
        }
        parity += len - 1;
    }
    if parity.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn inverse(p: &[u8]) -> Vec<u8> {
    let mut inv = vec![0u8; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x as usize] = i as u8;
    }
    inv
}

/// `(a ∘ b)(i) = a(b(i))`.
pub fn compose(a: &[u8], b: &[u8]) -> Vec<u8> {
    b.iter().map(|&x| a[x as usize]).collect()
}

/// Cycle lengths of `p`, largest first.
pub fn cycle_type(p: &[u8]) -> Vec<u32> {
    let mut seen = vec![false; p.len()];
    let mut lens = Vec::new();
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = p[k] as usize;
            len += 1;
        }
        lens.push(len);
    }
    lens.sort_unstable_by(|a, b| b.cmp(a));
    lens
}

/// Sign of the permutation taking `from` to `to`, two arrangements of the same
/// distinct values, or `None` if they are not rearrangements of each other.
pub fn arrangement_sign(from: &[u8], to: &[u8]) -> Option<i8> {
    if from.len() != to.len() {
        return None;
    }
    let mut idx = Vec::with_capacity(from.len());
    for x in to {
        idx.push(from.iter().position(|y| y == x)? as u8);
    }
    let mut seen = vec![false; idx.len()];
    for &i in &idx {
        if std::mem::replace(&mut seen[i as usize], true) {
            return None;
        }
    }
    Some(sign(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_signs() {
        let ps = all_perms(4);
        assert_eq!(ps.len(), 24);
        assert_eq!(ps.iter().map(|(_, s)| *s as i32).sum::<i32>(), 0);
        assert_eq!(sign(&[1, 0, 2]), -1);
        assert_eq!(sign(&[1, 2, 0]), 1);
        assert_eq!(all_perms(0).len(), 1);
    }

    #[test]
    fn compose_inverse() {
        for (p, _) in all_perms(4) {
            let id: Vec<u8> = (0..4).collect();
            assert_eq!(compose(&p, &inverse(&p)), id);
        }
        assert_eq!(cycle_type(&[1, 2, 0, 4, 3, 5]), vec![3, 2, 1]);
    }

    #[test]
    fn arrangements() {
        assert_eq!(arrangement_sign(&[3, 5, 7], &[5, 3, 7]), Some(-1));
        assert_eq!(arrangement_sign(&[3, 5, 7], &[5, 7, 3]), Some(1));
        assert_eq!(arrangement_sign(&[3, 5, 7], &[5, 7, 4]), None);
    }
}
