use crate::error::{Error, Result};
use crate::table::{parse_markup_rows, TdSpec};

/// Ordered labelled tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeNode<L> {
    pub label: L,
    pub children: Vec<TreeNode<L>>,
}

impl<L> TreeNode<L> {
    pub fn leaf(label: L) -> Self {
        Self { label, children: Vec::new() }
    }

    pub fn new(label: L, children: Vec<TreeNode<L>>) -> Self {
        Self { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }
}

/// Postorder view used by the edit-distance recurrence.
struct Flat<'a, L> {
    labels: Vec<&'a L>,
    /// Postorder index of each node's leftmost leaf.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a, L> Flat<'a, L> {
    fn new(root: &'a TreeNode<L>) -> Self {
        fn walk<'a, L>(n: &'a TreeNode<L>, labels: &mut Vec<&'a L>, leftmost: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &n.children {
                let lm = walk(c, labels, leftmost);
                first.get_or_insert(lm);
            }
            let me = labels.len();
            labels.push(&n.label);
            let lm = first.unwrap_or(me);
            leftmost.push(lm);
            lm
        }
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        walk(root, &mut labels, &mut leftmost);
        let n = labels.len();
        // A keyroot is the highest node for each distinct leftmost leaf.
        let mut keyroots: Vec<usize> = (0..n).filter(|&i| (i + 1..n).all(|j| leftmost[j] != leftmost[i])).collect();
        keyroots.sort_unstable();
        Self { labels, leftmost, keyroots }
    }
}

/// Zhang-Shasha tree edit distance with unit insert and delete costs and the
/// given relabelling cost.
pub fn tree_edit_distance<L>(a: &TreeNode<L>, b: &TreeNode<L>, rename: impl Fn(&L, &L) -> f64) -> f64 {
    let (fa, fb) = (Flat::new(a), Flat::new(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut td = vec![vec![0.0; m]; n];
    let mut fd = vec![vec![0.0; m + 1]; n + 1];
    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let (li, lj) = (fa.leftmost[i], fb.leftmost[j]);
            // fd[x][y] is the forest distance for postorder ranges
            // li..li+x and lj..lj+y.
            let (ni, nj) = (i - li + 1, j - lj + 1);
            fd[0][0] = 0.0;
            for x in 1..=ni {
                fd[x][0] = fd[x - 1][0] + 1.0;
            }
            for y in 1..=nj {
                fd[0][y] = fd[0][y - 1] + 1.0;
            }
            for x in 1..=ni {
                let ia = li + x - 1;
                for y in 1..=nj {
                    let jb = lj + y - 1;
                    let del = fd[x - 1][y] + 1.0;
                    let ins = fd[x][y - 1] + 1.0;
                    if fa.leftmost[ia] == li && fb.leftmost[jb] == lj {
                        let sub = fd[x - 1][y - 1] + rename(fa.labels[ia], fb.labels[jb]);
                        fd[x][y] = del.min(ins).min(sub);
                        td[ia][jb] = fd[x][y];
                    } else {
                        let px = fa.leftmost[ia] - li;
                        let py = fb.leftmost[jb] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[ia][jb]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Node label of a markup tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MarkupNode {
    Root,
    Tr,
    Td { rowspan: usize, colspan: usize, text: String },
}

pub fn markup_tree(rows: &[Vec<TdSpec>]) -> TreeNode<MarkupNode> {
    TreeNode::new(
        MarkupNode::Root,
        rows.iter()
            .map(|row| {
                TreeNode::new(
                    MarkupNode::Tr,
                    row.iter()
                        .map(|td| {
                            TreeNode::leaf(MarkupNode::Td {
                                rowspan: td.rowspan,
                                colspan: td.colspan,
                                text: td.text.clone(),
                            })
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Levenshtein distance over chars divided by the longer length.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + (ca != cb) as usize).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()] as f64 / longest as f64
}

/// Relabelling cost between markup nodes.
pub fn markup_rename_cost(a: &MarkupNode, b: &MarkupNode, use_text: bool) -> f64 {
    match (a, b) {
        (MarkupNode::Td { rowspan: r1, colspan: c1, text: t1 }, MarkupNode::Td { rowspan: r2, colspan: c2, text: t2 }) => {
            if r1 != r2 || c1 != c2 {
                1.0
            } else if use_text {
                normalized_levenshtein(t1, t2)
            } else {
                0.0
            }
        }
        (a, b) if std::mem::discriminant(a) == std::mem::discriminant(b) => 0.0,
        _ => 1.0,
    }
}

/// Tree-edit-distance similarity between two markup strings, in `[0, 1]`.
pub fn teds(pred_markup: &str, gt_markup: &str, use_text: bool) -> Result<f64> {
    let pred = parse_markup_rows(pred_markup).map_err(|source| Error::MarkupInput { which: "predicted", source })?;
    let gt = parse_markup_rows(gt_markup).map_err(|source| Error::MarkupInput { which: "ground-truth", source })?;
    Ok(teds_trees(&markup_tree(&pred), &markup_tree(&gt), use_text))
}

pub fn teds_trees(pred: &TreeNode<MarkupNode>, gt: &TreeNode<MarkupNode>, use_text: bool) -> f64 {
    let d = tree_edit_distance(pred, gt, |a, b| markup_rename_cost(a, b, use_text));
    let n = pred.size().max(gt.size()) as f64;
    (1.0 - d / n).clamp(0.0, 1.0)
}
