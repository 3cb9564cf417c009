use crate::error::{Error, Result};
use crate::state::{LabelIndex, StateMap, StateValue, TreeArrays, TREE_LEAF, TREE_UNDEFINED_FEATURE};
use crate::tensor::Tensor;

use super::{argmax, input_matrix, require_finite, Dataset, Fields};

pub(super) const FIELDS: &[&str] = &["criterion", "max_depth", "n_features_in_", "classes_", "tree_"];

pub const GINI: &str = "gini";

/// CART classifier with Gini impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct feature
/// values. The split with the largest impurity decrease wins; ties go to the
/// lowest feature index, then the lowest threshold. A node becomes a leaf
/// when it is pure, at `max_depth`, or when every feature is constant on it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeClassifier {
    pub max_depth: usize,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    n_features: usize,
    classes: LabelIndex,
    tree: TreeArrays,
}

/// A scored split, as considered during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

impl Default for DecisionTreeClassifier {
    fn default() -> Self {
        DecisionTreeClassifier::new(8)
    }
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [f64],
    p: usize,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    left: Vec<i64>,
    right: Vec<i64>,
    feature: Vec<i64>,
    threshold: Vec<f64>,
    value: Vec<f64>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1.0;
        }
        c
    }

    fn best_split(&self, idx: &[usize]) -> Option<SplitCandidate> {
        best_split(self.x, self.p, self.y, self.n_classes, idx)
    }

    /// Grows the subtree for `idx` in preorder and returns its root index.
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let node = self.left.len();
        let counts = self.counts(idx);
        self.left.push(TREE_LEAF);
        self.right.push(TREE_LEAF);
        self.feature.push(TREE_UNDEFINED_FEATURE);
        self.threshold.push(-2.0);
        self.value.extend_from_slice(&counts);

        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || depth >= self.max_depth {
            return node;
        }
        let Some(split) = self.best_split(idx) else {
            return node;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i * self.p + split.feature] <= split.threshold);
        self.feature[node] = split.feature as i64;
        self.threshold[node] = split.threshold;
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.left[node] = left as i64;
        self.right[node] = right as i64;
        node
    }
}

/// Exhaustive search over every feature and midpoint for the samples `idx`.
fn best_split(x: &[f64], p: usize, y: &[usize], n_classes: usize, idx: &[usize]) -> Option<SplitCandidate> {
    let n = idx.len() as f64;
    let mut parent = vec![0.0; n_classes];
    for &i in idx {
        parent[y[i]] += 1.0;
    }
    let parent_gini = gini(&parent, n);
    let mut best: Option<SplitCandidate> = None;
    let mut order = idx.to_vec();
    for f in 0..p {
        order.sort_by(|&a, &b| x[a * p + f].total_cmp(&x[b * p + f]).then(a.cmp(&b)));
        let mut left = vec![0.0; n_classes];
        for k in 0..order.len() - 1 {
            left[y[order[k]]] += 1.0;
            let lo = x[order[k] * p + f];
            let hi = x[order[k + 1] * p + f];
            if lo == hi {
                continue;
            }
            let mut threshold = lo / 2.0 + hi / 2.0;
            if threshold >= hi || threshold < lo || !threshold.is_finite() {
                threshold = lo;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let right: Vec<f64> = parent.iter().zip(&left).map(|(a, b)| a - b).collect();
            let decrease = parent_gini - (nl / n) * gini(&left, nl) - (nr / n) * gini(&right, nr);
            if best.is_none_or(|b| decrease > b.impurity_decrease) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    impurity_decrease: decrease,
                });
            }
        }
    }
    best
}

impl DecisionTreeClassifier {
    pub fn new(max_depth: usize) -> Self {
        DecisionTreeClassifier {
            max_depth,
            fitted: None,
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or(Error::NotFitted)
    }

    pub fn n_features_in(&self) -> Result<usize> {
        Ok(self.fitted()?.n_features)
    }

    pub fn classes(&self) -> Result<&[i64]> {
        Ok(self.fitted()?.classes.classes())
    }

    pub fn tree(&self) -> Result<&TreeArrays> {
        Ok(&self.fitted()?.tree)
    }

    pub fn fit(&mut self, ds: &Dataset) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::invariant("max_depth", "must be at least 1"));
        }
        let labels = ds.labels()?;
        let classes = LabelIndex::from_labels(&labels);
        let y: Vec<usize> = labels
            .iter()
            .map(|&l| classes.index_of(l).expect("label from this dataset"))
            .collect();
        let x = ds.features();
        require_finite("X", &x)?;
        let p = ds.n_features();
        let mut b = Builder {
            x: &x,
            p,
            y: &y,
            n_classes: classes.len(),
            max_depth: self.max_depth,
            left: Vec::new(),
            right: Vec::new(),
            feature: Vec::new(),
            threshold: Vec::new(),
            value: Vec::new(),
        };
        let all: Vec<usize> = (0..ds.n_samples()).collect();
        b.grow(&all, 0);
        let node_count = b.left.len();
        let tree = TreeArrays {
            children_left: b.left,
            children_right: b.right,
            feature: b.feature,
            threshold: b.threshold,
            value: Tensor::from_f64(b.value, vec![node_count, classes.len()])?,
        };
        self.fitted = Some(Fitted {
            n_features: p,
            classes,
            tree,
        });
        Ok(())
    }

    /// The split the trainer would choose at the root of `ds`.
    pub fn root_split(ds: &Dataset) -> Result<Option<SplitCandidate>> {
        let labels = ds.labels()?;
        let classes = LabelIndex::from_labels(&labels);
        let y: Vec<usize> = labels.iter().map(|&l| classes.index_of(l).unwrap()).collect();
        let all: Vec<usize> = (0..ds.n_samples()).collect();
        Ok(best_split(&ds.features(), ds.n_features(), &y, classes.len(), &all))
    }

    fn leaf_of(&self, f: &Fitted, row: &[f64]) -> usize {
        let t = &f.tree;
        let mut node = 0;
        while !t.is_leaf(node) {
            node = if row[t.feature[node] as usize] <= t.threshold[node] {
                t.children_left[node] as usize
            } else {
                t.children_right[node] as usize
            };
        }
        node
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.fitted()?;
        let (m, values) = input_matrix(x, f.n_features)?;
        let counts = f.tree.value.as_f64().expect("validated float64 counts");
        let c = f.classes.len();
        let labels = (0..m)
            .map(|i| {
                let leaf = self.leaf_of(f, &values[i * f.n_features..(i + 1) * f.n_features]);
                f.classes.label(argmax(&counts[leaf * c..(leaf + 1) * c]))
            })
            .collect();
        Ok(Tensor::vector_i64(labels))
    }

    /// Leaf class-fraction margin `p(upper) - p(lower)`, binary trees only.
    pub fn decision_margin(&self, x: &Tensor) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        if f.classes.len() != 2 {
            return Err(Error::NotBinary(f.classes.len()));
        }
        let (m, values) = input_matrix(x, f.n_features)?;
        let counts = f.tree.value.as_f64().expect("validated float64 counts");
        Ok((0..m)
            .map(|i| {
                let leaf = self.leaf_of(f, &values[i * f.n_features..(i + 1) * f.n_features]);
                let (a, b) = (counts[2 * leaf], counts[2 * leaf + 1]);
                let total = a + b;
                if total > 0.0 {
                    (b - a) / total
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn extract_state(&self) -> Result<StateMap> {
        let f = self.fitted()?;
        let mut s = StateMap::new();
        s.insert("criterion".into(), StateValue::Str(GINI.into()));
        s.insert("max_depth".into(), StateValue::Int(self.max_depth as i64));
        s.insert("n_features_in_".into(), StateValue::Int(f.n_features as i64));
        s.insert("classes_".into(), StateValue::Labels(f.classes.clone()));
        s.insert("tree_".into(), StateValue::Tree(f.tree.clone()));
        Ok(s)
    }

    pub fn restore_state(state: &StateMap) -> Result<Self> {
        let f = Fields(state);
        let criterion = f.str("criterion")?;
        if criterion != GINI {
            return Err(Error::invariant("criterion", format!("unsupported criterion `{criterion}`")));
        }
        let max_depth = f.positive_count("max_depth")?;
        let n_features = f.positive_count("n_features_in_")?;
        let classes = f.labels("classes_")?.clone();
        if classes.is_empty() {
            return Err(Error::invariant("classes_", "no classes"));
        }
        let tree = f.tree("tree_")?.clone();
        tree.validate(n_features, classes.len())?;
        Ok(DecisionTreeClassifier {
            max_depth,
            fitted: Some(Fitted {
                n_features,
                classes,
                tree,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[i64]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        Dataset::with_labels(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn splits_the_line_at_one_and_a_half() {
        let ds = one_d(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let mut m = DecisionTreeClassifier::new(2);
        m.fit(&ds).unwrap();
        let t = m.tree().unwrap();
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.feature[0], 0);
        assert_eq!(t.threshold[0], 1.5);
        assert!(t.is_leaf(1) && t.is_leaf(2));
        assert_eq!(t.value.as_f64().unwrap(), [2.0, 2.0, 2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn pure_root_is_a_single_leaf() {
        let ds = one_d(&[0.0, 5.0, 9.0], &[4, 4, 4]);
        let mut m = DecisionTreeClassifier::new(3);
        m.fit(&ds).unwrap();
        let t = m.tree().unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.feature[0], TREE_UNDEFINED_FEATURE);
        assert_eq!(m.predict(ds.x()).unwrap().as_i64().unwrap(), [4, 4, 4]);
    }

    #[test]
    fn xor_needs_a_zero_gain_first_split() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let ds = Dataset::with_labels(&rows, vec![0, 1, 1, 0]).unwrap();
        let mut m = DecisionTreeClassifier::new(2);
        m.fit(&ds).unwrap();
        assert_eq!(m.predict(ds.x()).unwrap().as_i64().unwrap(), [0, 1, 1, 0]);
        // equal gains everywhere: the lowest feature index wins
        assert_eq!(m.tree().unwrap().feature[0], 0);
    }

    #[test]
    fn depth_limit_is_respected() {
        let ds = one_d(&[0.0, 1.0, 2.0, 3.0], &[0, 1, 0, 1]);
        let mut m = DecisionTreeClassifier::new(1);
        m.fit(&ds).unwrap();
        assert_eq!(m.tree().unwrap().node_count(), 3);
    }

    #[test]
    fn preorder_children_follow_parents() {
        let ds = one_d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0, 1, 0, 1, 0, 1]);
        let mut m = DecisionTreeClassifier::new(10);
        m.fit(&ds).unwrap();
        let t = m.tree().unwrap();
        t.validate(1, 2).unwrap();
        assert_eq!(m.predict(ds.x()).unwrap().as_i64().unwrap(), [0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn restore_rejects_a_cycle() {
        let ds = one_d(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let mut m = DecisionTreeClassifier::new(2);
        m.fit(&ds).unwrap();
        let mut s = m.extract_state().unwrap();
        if let Some(StateValue::Tree(t)) = s.get_mut("tree_") {
            t.children_left[0] = 0;
        }
        assert!(matches!(
            DecisionTreeClassifier::restore_state(&s),
            Err(Error::InvariantViolation { field, .. }) if field == "tree_"
        ));
    }

    #[test]
    fn state_round_trip() {
        let ds = one_d(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let mut m = DecisionTreeClassifier::new(2);
        m.fit(&ds).unwrap();
        let s = m.extract_state().unwrap();
        assert_eq!(s.keys().map(String::as_str).collect::<Vec<_>>(), FIELDS);
        assert_eq!(DecisionTreeClassifier::restore_state(&s).unwrap(), m);
    }
}
