//! Levenshtein distance over characters, with the relative-similarity
//! decision rule shared by the crawler's state detection and the output
//! comparator.

/// Edit distance between two strings, counted in Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let mut a: Vec<char> = a.chars().collect();
    let mut b: Vec<char> = b.chars().collect();

    // Shared prefix and suffix contribute nothing.
    let prefix = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
    a.drain(..prefix);
    b.drain(..prefix);
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    a.truncate(a.len() - suffix);
    b.truncate(b.len() - suffix);

    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }

    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// True when the distance between `a` and `b` stays within
/// `threshold * max(len(a), len(b))`, lengths in characters.
pub fn within_threshold(a: &str, b: &str, threshold: f64) -> bool {
    let la = a.chars().count();
    let lb = b.chars().count();
    let budget = threshold * la.max(lb) as f64;
    // A length gap already exceeding the budget needs no DP pass.
    if (la.abs_diff(lb)) as f64 > budget {
        return false;
    }
    levenshtein(a, b) as f64 <= budget
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_distances() {
        let cases = [
            ("", "", 0),
            ("a", "", 1),
            ("", "abc", 3),
            ("abc", "abc", 0),
            ("abc", "axc", 1),
            ("ac", "abc", 1),
            ("kitten", "sitting", 3),
            ("abcdefg", "xabxcdxxefxgx", 6),
            ("ác", "áóc", 1),
        ];
        for (a, b, d) in cases {
            assert_eq!(levenshtein(a, b), d, "{a:?} vs {b:?}");
            assert_eq!(levenshtein(b, a), d, "{b:?} vs {a:?}");
        }
    }

    #[test]
    fn one_edit_in_hundred_chars_is_within_five_percent() {
        let a = "x".repeat(100);
        let mut b = a.clone();
        b.replace_range(10..11, "y");
        assert!(within_threshold(&a, &b, 0.05));
    }

    #[test]
    fn disjoint_short_bodies_exceed_five_percent() {
        assert!(!within_threshold("abc", "xyz", 0.05));
    }

    #[test]
    fn boundary_is_inclusive() {
        // Distance 5 against length 100 sits exactly on the 5% budget.
        let a = "x".repeat(100);
        let b = format!("{}yyyyy", "x".repeat(95));
        assert_eq!(levenshtein(&a, &b), 5);
        assert!(within_threshold(&a, &b, 0.05));
    }
}
