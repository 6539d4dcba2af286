use std::fmt;

/// A set of agents encoded as a bitmask over agent indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn grand(num_agents: usize) -> Self {
        debug_assert!(num_agents <= 31);
        Coalition(((1u64 << num_agents) - 1) as u32)
    }

    pub fn singleton(agent: usize) -> Self {
        Coalition(1 << agent)
    }

    pub fn from_members(members: &[usize]) -> Self {
        Coalition(members.iter().fold(0, |m, &a| m | (1 << a)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, agent: usize) -> bool {
        agent < 32 && self.0 >> agent & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, agent: usize) -> Self {
        Coalition(self.0 | 1 << agent)
    }

    pub fn without(self, agent: usize) -> Self {
        Coalition(self.0 & !(1 << agent))
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & other.0 == self.0
    }

    /// Members in ascending index order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |&a| bits >> a & 1 == 1)
    }

    /// All subsets of `self` (including empty and `self`), ascending by bitmask.
    pub fn subsets(self) -> impl Iterator<Item = Coalition> {
        let full = self.0;
        // Enumerate submasks descending then reverse for ascending order.
        let mut v = Vec::with_capacity(1 << self.len());
        let mut s = full;
        loop {
            v.push(Coalition(s));
            if s == 0 {
                break;
            }
            s = (s - 1) & full;
        }
        v.into_iter().rev()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.members().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_and_display() {
        let c = Coalition::from_members(&[0, 2, 5]);
        assert_eq!(c.bits(), 0b100101);
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(c.to_string(), "{0,2,5}");
        assert_eq!(Coalition::EMPTY.to_string(), "{}");
        assert_eq!(Coalition::grand(3).bits(), 7);
    }

    #[test]
    fn subsets_ascending() {
        let c = Coalition(0b1010);
        let subs: Vec<u32> = c.subsets().map(|s| s.0).collect();
        assert_eq!(subs, vec![0, 0b10, 0b1000, 0b1010]);
    }
}
