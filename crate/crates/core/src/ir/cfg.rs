//! Control-flow analysis over block indices: predecessors, reverse
//! postorder, dominators and natural loops.

use std::collections::{BTreeSet, HashMap};

use super::Function;

#[derive(Debug, Clone)]
pub struct Cfg {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
    /// Blocks reachable from the entry, in reverse postorder.
    pub rpo: Vec<usize>,
    /// Immediate dominator of each reachable block (`idom[entry] == entry`).
    pub idom: Vec<Option<usize>>,
}

impl Cfg {
    pub fn new(f: &Function) -> Cfg {
        let index: HashMap<&str, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
        let n = f.blocks.len();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for (i, b) in f.blocks.iter().enumerate() {
            for s in b.successors() {
                if let Some(&j) = index.get(s) {
                    if !succs[i].contains(&j) {
                        succs[i].push(j);
                        preds[j].push(i);
                    }
                }
            }
        }
        let rpo = reverse_postorder(&succs, n);
        let idom = dominators(&preds, &rpo, n);
        Cfg { succs, preds, rpo, idom }
    }

    pub fn reachable(&self, b: usize) -> bool {
        self.idom.get(b).is_some_and(Option::is_some)
    }

    /// Whether block `a` dominates block `b`.
    pub fn dominates(&self, a: usize, mut b: usize) -> bool {
        if !self.reachable(b) {
            return true;
        }
        loop {
            if a == b {
                return true;
            }
            match self.idom[b] {
                Some(d) if d != b => b = d,
                _ => return false,
            }
        }
    }

    /// Natural loops, one per header (back edges to the same header merged).
    pub fn loops(&self) -> Vec<NaturalLoop> {
        let mut by_header: HashMap<usize, (Vec<usize>, BTreeSet<usize>)> = HashMap::new();
        for &b in &self.rpo {
            for &s in &self.succs[b] {
                if self.dominates(s, b) {
                    let entry = by_header.entry(s).or_default();
                    entry.0.push(b);
                    let mut stack = vec![b];
                    entry.1.insert(s);
                    while let Some(x) = stack.pop() {
                        if entry.1.insert(x) {
                            stack.extend(self.preds[x].iter().copied().filter(|p| self.reachable(*p)));
                        }
                    }
                }
            }
        }
        let mut out: Vec<NaturalLoop> = by_header
            .into_iter()
            .map(|(header, (latches, body))| NaturalLoop { header, latches, blocks: body })
            .collect();
        out.sort_by_key(|l| (l.blocks.len(), l.header));
        out
    }

    /// Whether any reachable edge is a back edge.
    pub fn has_back_edges(&self) -> bool {
        self.rpo.iter().any(|&b| self.succs[b].iter().any(|&s| self.dominates(s, b)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalLoop {
    pub header: usize,
    pub latches: Vec<usize>,
    pub blocks: BTreeSet<usize>,
}

fn reverse_postorder(succs: &[Vec<usize>], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    visited[0] = true;
    while let Some((b, i)) = stack.pop() {
        if i < succs[b].len() {
            stack.push((b, i + 1));
            let s = succs[b][i];
            if !visited[s] {
                visited[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(b);
        }
    }
    post.reverse();
    post
}

fn dominators(preds: &[Vec<usize>], rpo: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut idom: Vec<Option<usize>> = vec![None; n];
    if rpo.is_empty() {
        return idom;
    }
    let mut order = vec![usize::MAX; n];
    for (i, &b) in rpo.iter().enumerate() {
        order[b] = i;
    }
    let entry = rpo[0];
    idom[entry] = Some(entry);
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while order[a] > order[b] {
                a = idom[a].expect("processed");
            }
            while order[b] > order[a] {
                b = idom[b].expect("processed");
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new.is_some() && idom[b] != new {
                idom[b] = new;
                changed = true;
            }
        }
    }
    idom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    const LOOP: &str = "define void @main() {
entry:
  br label %h
h:
  %i = phi i64 [ 0, %entry ], [ %n, %b ]
  %c = icmp slt i64 %i, 4
  br i1 %c, label %b, label %x
b:
  %n = add i64 %i, 1
  br label %h
x:
  ret void
}
";

    #[test]
    fn finds_single_natural_loop() {
        let m = parse_module(LOOP).unwrap().module;
        let cfg = Cfg::new(&m.functions[0]);
        let loops = cfg.loops();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].header, 1);
        assert_eq!(loops[0].latches, vec![2]);
        assert_eq!(loops[0].blocks.iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert!(cfg.dominates(1, 3));
        assert!(!cfg.dominates(2, 3));
        assert!(cfg.has_back_edges());
    }
}
