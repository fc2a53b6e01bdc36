use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Point3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeKind {
    Root,
    Junction,
    Internal,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineNode {
    pub position: Point3,
    pub kind: NodeKind,
    pub parent: Option<usize>,
}

/// Rooted bronchial centerline tree. The root is the pulmonary hilum and
/// every parent-child link is a straight polyline segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineTree {
    nodes: Vec<CenterlineNode>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl CenterlineTree {
    pub fn new(nodes: Vec<CenterlineNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::invariant("single root", "tree has no nodes"));
        }
        let mut children = vec![Vec::new(); nodes.len()];
        let mut root = None;
        for (i, n) in nodes.iter().enumerate() {
            if !n.position.iter().all(|c| c.is_finite()) {
                return Err(Error::invariant("finite coordinates", format!("node {i} is not finite")));
            }
            match n.parent {
                None if root.is_some() => {
                    return Err(Error::invariant(
                        "single root",
                        format!("nodes {} and {i} have no parent", root.unwrap()),
                    ))
                }
                None => root = Some(i),
                Some(p) if p >= nodes.len() || p == i => {
                    return Err(Error::invariant("tree links", format!("node {i} has invalid parent {p}")))
                }
                Some(p) => children[p].push(i),
            }
        }
        let root = root.ok_or_else(|| Error::invariant("single root", "every node has a parent"))?;
        // reachability from the root rules out cycles
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        let mut count = 0;
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::invariant("tree links", format!("node {i} reached twice")));
            }
            seen[i] = true;
            count += 1;
            stack.extend(children[i].iter().copied());
        }
        if count != nodes.len() {
            let i = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(Error::invariant("tree links", format!("node {i} is not reachable from the root")));
        }
        for (i, n) in nodes.iter().enumerate() {
            let nc = children[i].len();
            let ok = match n.kind {
                NodeKind::Root => i == root,
                NodeKind::Terminal => nc == 0 && i != root,
                NodeKind::Junction => nc >= 2 && i != root,
                NodeKind::Internal => nc == 1 && i != root,
            };
            if !ok {
                return Err(Error::invariant(
                    "node kinds",
                    format!("node {i} is marked {:?} but has {nc} children", n.kind),
                ));
            }
        }
        Ok(Self { nodes, children, root })
    }

    /// Builds a tree from positions and parent links, deriving node kinds from
    /// the child counts.
    pub fn from_parents(positions: &[Point3], parents: &[Option<usize>]) -> Result<Self> {
        if positions.len() != parents.len() {
            return Err(Error::InvalidArgument("positions and parents differ in length".into()));
        }
        let mut nc = vec![0usize; positions.len()];
        for p in parents.iter().flatten() {
            if *p < nc.len() {
                nc[*p] += 1;
            }
        }
        let nodes = positions
            .iter()
            .zip(parents)
            .enumerate()
            .map(|(i, (&position, &parent))| CenterlineNode {
                position,
                parent,
                kind: match (parent, nc[i]) {
                    (None, _) => NodeKind::Root,
                    (_, 0) => NodeKind::Terminal,
                    (_, 1) => NodeKind::Internal,
                    _ => NodeKind::Junction,
                },
            })
            .collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[CenterlineNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn hilum(&self) -> Point3 {
        self.nodes[self.root].position
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.nodes.iter().map(|n| n.parent).collect()
    }

    /// Same topology and kinds with new positions.
    pub fn with_positions(&self, positions: &[Point3]) -> Result<Self> {
        if positions.len() != self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} node positions, got {}",
                self.nodes.len(),
                positions.len()
            )));
        }
        let mut out = self.clone();
        for (n, p) in out.nodes.iter_mut().zip(positions) {
            n.position = *p;
        }
        Ok(out)
    }

    /// Polyline segments as `(parent, child)` node pairs, in child order.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.parent.map(|p| (p, i))).collect()
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    pub fn terminals(&self) -> Vec<usize> {
        self.nodes_of_kind(NodeKind::Terminal)
    }

    pub fn junctions(&self) -> Vec<usize> {
        self.nodes_of_kind(NodeKind::Junction)
    }

    /// Node indices from the root to `node`, inclusive.
    pub fn path_from_root(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Number of edges between the root and `node`.
    pub fn depth(&self, node: usize) -> usize {
        self.path_from_root(node).len() - 1
    }

    /// Keeps the nodes flagged in `keep` (which must be closed under taking
    /// parents) and returns the new tree plus the new→old index map.
    pub fn retain(&self, keep: &[bool]) -> Result<(Self, Vec<usize>)> {
        if !keep[self.root] {
            return Err(Error::InvalidArgument("cannot remove the root".into()));
        }
        let mut new_index = vec![usize::MAX; self.nodes.len()];
        let mut old_of_new = Vec::new();
        for i in 0..self.nodes.len() {
            if keep[i] {
                new_index[i] = old_of_new.len();
                old_of_new.push(i);
            }
        }
        let positions: Vec<Point3> = old_of_new.iter().map(|&i| self.nodes[i].position).collect();
        let parents: Vec<Option<usize>> = old_of_new
            .iter()
            .map(|&i| match self.nodes[i].parent {
                Some(p) if keep[p] => Ok(Some(new_index[p])),
                Some(p) => Err(Error::InvalidArgument(format!("node {i} kept without its parent {p}"))),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        Ok((Self::from_parents(&positions, &parents)?, old_of_new))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y_tree() -> CenterlineTree {
        let pos =
            [Point3::zeros(), Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 2.0), Point3::new(-1.0, 0.0, 2.0)];
        CenterlineTree::from_parents(&pos, &[None, Some(0), Some(1), Some(1)]).unwrap()
    }

    #[test]
    fn kinds_are_derived() {
        let t = y_tree();
        assert_eq!(t.nodes()[0].kind, NodeKind::Root);
        assert_eq!(t.nodes()[1].kind, NodeKind::Junction);
        assert_eq!(t.terminals(), vec![2, 3]);
        assert_eq!(t.path_from_root(3), vec![0, 1, 3]);
        assert_eq!(t.segments().len(), 3);
    }

    #[test]
    fn two_roots_rejected() {
        let pos = [Point3::zeros(), Point3::zeros()];
        let err = CenterlineTree::from_parents(&pos, &[None, None]).unwrap_err();
        assert!(matches!(err, Error::Invariant { name: "single root", .. }));
    }

    #[test]
    fn cycle_rejected() {
        let pos = [Point3::zeros(), Point3::zeros(), Point3::zeros()];
        let err = CenterlineTree::from_parents(&pos, &[None, Some(2), Some(1)]).unwrap_err();
        assert!(matches!(err, Error::Invariant { name: "tree links", .. }));
    }

    #[test]
    fn wrong_kind_rejected() {
        let mut nodes = y_tree().nodes().to_vec();
        nodes[1].kind = NodeKind::Terminal;
        assert!(CenterlineTree::new(nodes).is_err());
    }

    #[test]
    fn retain_reindexes_and_rederives_kinds() {
        let t = y_tree();
        let (pruned, map) = t.retain(&[true, true, true, false]).unwrap();
        assert_eq!(map, vec![0, 1, 2]);
        assert_eq!(pruned.nodes()[1].kind, NodeKind::Internal);
        assert_eq!(pruned.terminals(), vec![2]);
    }
}
