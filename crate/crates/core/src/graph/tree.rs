use crate::error::{Error, Result};

/// A growing preferential attachment tree. Nodes are labelled by arrival
/// time, starting at 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttachmentTree {
    /// `parent[v − 1]`; 0 marks node 1, which has no parent.
    parent: Vec<u32>,
    degree: Vec<u32>,
}

impl Default for AttachmentTree {
    fn default() -> Self {
        Self::new()
    }
}

impl AttachmentTree {
    /// `G₁`: nodes {1, 2} joined by one edge, both of degree 1.
    pub fn new() -> Self {
        AttachmentTree {
            parent: vec![0, 1],
            degree: vec![1, 1],
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut parent = Vec::with_capacity(n);
        let mut degree = Vec::with_capacity(n);
        parent.extend([0, 1]);
        degree.extend([1, 1]);
        AttachmentTree { parent, degree }
    }

    /// Builds a tree from a parent list (`parents[v − 1]`, 0 for node 1).
    pub fn from_parents(parents: &[u32]) -> Result<Self> {
        if parents.len() < 2 || parents[0] != 0 || parents[1] != 1 {
            return Err(Error::config("parents", "must start with [0, 1]"));
        }
        let mut tree = AttachmentTree::with_capacity(parents.len());
        for (i, &p) in parents.iter().enumerate().skip(2) {
            let v = i + 1;
            if p == 0 || p as usize >= v {
                return Err(Error::config("parents", format!("node {v} has invalid parent {p}")));
            }
            tree.attach(p as usize);
        }
        Ok(tree)
    }

    /// Current number of nodes.
    pub fn t(&self) -> usize {
        self.degree.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    pub fn degree(&self, v: usize) -> Result<u32> {
        self.check(v)?;
        Ok(self.degree[v - 1])
    }

    pub fn parent(&self, v: usize) -> Result<Option<usize>> {
        self.check(v)?;
        Ok(match self.parent[v - 1] {
            0 => None,
            p => Some(p as usize),
        })
    }

    fn check(&self, v: usize) -> Result<()> {
        if v == 0 || v > self.t() {
            Err(Error::UnknownNode { node: v, t: self.t() })
        } else {
            Ok(())
        }
    }

    /// Adds node `t + 1` as a child of `target`.
    pub fn attach(&mut self, target: usize) -> usize {
        debug_assert!(target >= 1 && target <= self.t());
        self.degree[target - 1] += 1;
        self.parent.push(target as u32);
        self.degree.push(1);
        self.t()
    }

    pub fn degree_sum(&self) -> u64 {
        self.degree.iter().map(|&d| d as u64).sum()
    }

    /// Degree-sum law, parent ordering and degree/child-count consistency.
    pub fn check_invariants(&self) -> Result<()> {
        let t = self.t();
        let fail = |message: String| Err(Error::InvariantViolation { t, message });
        if self.degree_sum() != 2 * (t as u64 - 1) {
            return fail(format!("degree sum {} != 2(t−1)", self.degree_sum()));
        }
        let mut children = vec![0u32; t];
        for (i, &p) in self.parent.iter().enumerate() {
            let v = i + 1;
            if v == 1 {
                if p != 0 {
                    return fail("node 1 has a parent".into());
                }
                continue;
            }
            if p == 0 || p as usize >= v {
                return fail(format!("parent({v}) = {p} is not an earlier node"));
            }
            children[p as usize - 1] += 1;
        }
        // node 2's edge to node 1 is the initial edge, so node 1 has no extra unit
        for v in 1..=t {
            let expected = children[v - 1] + u32::from(v != 1);
            if self.degree[v - 1] != expected {
                return fail(format!("degree({v}) = {} but expected {expected}", self.degree[v - 1]));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_graph() {
        let g = AttachmentTree::new();
        assert_eq!(g.t(), 2);
        assert_eq!(g.degrees(), &[1, 1]);
        assert_eq!(g.parent(2).unwrap(), Some(1));
        assert_eq!(g.parent(1).unwrap(), None);
        assert_eq!(g.degree_sum(), 2);
        g.check_invariants().unwrap();
    }

    #[test]
    fn star() {
        let g = AttachmentTree::from_parents(&[0, 1, 1, 1, 1]).unwrap();
        assert_eq!(g.degrees(), &[4, 1, 1, 1, 1]);
        g.check_invariants().unwrap();
    }

    #[test]
    fn bad_parent_lists() {
        assert!(AttachmentTree::from_parents(&[0, 1, 3]).is_err());
        assert!(AttachmentTree::from_parents(&[1, 1]).is_err());
        assert!(AttachmentTree::from_parents(&[0, 1, 0]).is_err());
    }

    #[test]
    fn corrupted_degree_is_caught() {
        let mut g = AttachmentTree::from_parents(&[0, 1, 2, 2]).unwrap();
        g.check_invariants().unwrap();
        g.degree[3] += 1;
        assert!(g.check_invariants().is_err());
    }
}
