/// Outcome of the generic-uniqueness check for a rank-`F` CPD of a
/// `(2K+1)³` characteristic tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identifiability {
    Ok { bound: usize },
    Warn { bound: usize },
}

impl Identifiability {
    pub fn is_ok(&self) -> bool {
        matches!(self, Identifiability::Ok { .. })
    }

    pub fn bound(&self) -> usize {
        match *self {
            Identifiability::Ok { bound } | Identifiability::Warn { bound } => bound,
        }
    }
}

impl std::fmt::Display for Identifiability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Identifiability::Ok { bound } => write!(f, "ok (rank bound {bound})"),
            Identifiability::Warn { bound } => write!(
                f,
                "warn: rank exceeds the generic uniqueness bound {bound}; factors may not be identifiable"
            ),
        }
    }
}

/// Generic uniqueness holds almost surely when `F ≤ 2^(α+β-2)`, with `α`, `β`
/// the largest integers such that `2^α` and `2^β` do not exceed the two
/// smallest tensor dimensions (here all equal to `2K+1`). Advisory only.
pub fn check_generic_identifiability(k_max: usize, rank: usize) -> Identifiability {
    let dim = 2 * k_max + 1;
    let alpha = dim.ilog2();
    let exponent = 2 * alpha;
    let bound = if exponent >= 2 { 1usize << (exponent - 2) } else { 0 };
    if rank <= 1 || rank <= bound {
        Identifiability::Ok { bound }
    } else {
        Identifiability::Warn { bound }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_seven() {
        assert_eq!(check_generic_identifiability(3, 4), Identifiability::Ok { bound: 4 });
        assert_eq!(check_generic_identifiability(3, 5), Identifiability::Warn { bound: 4 });
    }

    #[test]
    fn dimension_fifteen() {
        assert_eq!(check_generic_identifiability(7, 16).bound(), 16);
        assert!(!check_generic_identifiability(7, 17).is_ok());
    }

    #[test]
    fn rank_one_always_ok() {
        for k in 0..10 {
            assert!(check_generic_identifiability(k, 1).is_ok());
        }
    }
}
