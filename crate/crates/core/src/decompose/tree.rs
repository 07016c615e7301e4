use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DecomposeError, QuestionType};

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#(\d+)").unwrap());

/// Every `#j` token in `text`, in order of appearance. Indices too large for
/// `usize` come back as `usize::MAX`.
pub fn placeholder_refs(text: &str) -> Vec<usize> {
    PLACEHOLDER
        .captures_iter(text)
        .map(|c| c[1].parse().unwrap_or(usize::MAX))
        .collect()
}

pub(crate) fn placeholder_regex() -> &'static Regex {
    &PLACEHOLDER
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionNode {
    pub idx: usize,
    pub question_text: String,
    #[serde(default)]
    pub sons: Vec<usize>,
    #[serde(default)]
    pub fa: Option<usize>,
    pub qlabel: QuestionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
}

impl DecompositionNode {
    pub fn is_leaf(&self) -> bool {
        self.sons.is_empty()
    }
}

/// Nodes are stored in post-order, so `nodes[i].idx == i` and every child
/// precedes its parent. The root is the last node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTree {
    pub nodes: Vec<DecompositionNode>,
    pub root_idx: usize,
}

/// A parsed `{question: [sub-question | {sub-question: [...]}, ...]}` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionStruct {
    pub question: String,
    pub children: Vec<DecompositionStruct>,
}

impl DecompositionStruct {
    pub fn leaf(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            children: Vec::new(),
        }
    }

    fn from_entry(key: &str, value: &Value) -> Result<Self, String> {
        let question = key.trim();
        if question.is_empty() {
            return Err("empty question key".into());
        }
        let items = match value {
            Value::Array(items) => items,
            Value::Null => return Ok(Self::leaf(question)),
            other => return Err(format!("value for {question:?} must be a list, got {other}")),
        };
        let mut children = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::String(s) if !s.trim().is_empty() => children.push(Self::leaf(s.trim())),
                Value::Object(map) if map.len() == 1 => {
                    let (k, v) = map.iter().next().expect("one entry");
                    children.push(Self::from_entry(k, v)?);
                }
                other => return Err(format!("unsupported sub-question entry {other}")),
            }
        }
        Ok(Self {
            question: question.to_string(),
            children,
        })
    }

    /// Parses an LLM response. Code fences and chatter around the outermost
    /// `{...}` block are ignored; the object must have exactly one key.
    pub fn parse(response: &str) -> Result<Self, String> {
        let start = response.find('{').ok_or("no JSON object in response")?;
        let end = response.rfind('}').ok_or("no JSON object in response")?;
        if end < start {
            return Err("no JSON object in response".into());
        }
        let value: Value = serde_json::from_str(&response[start..=end]).map_err(|e| e.to_string())?;
        let map = value.as_object().ok_or("top level is not an object")?;
        if map.len() != 1 {
            return Err(format!("expected exactly one top-level key, found {}", map.len()));
        }
        let (k, v) = map.iter().next().expect("one entry");
        Self::from_entry(k, v)
    }

    fn depth(&self) -> usize {
        self.children.iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }
}

impl QueryTree {
    pub fn leaf_only(question: &str, qlabel: QuestionType) -> Self {
        Self::from_struct(&DecompositionStruct::leaf(question), qlabel, usize::MAX)
            .expect("a single node is always valid")
    }

    /// Numbers nodes in post-order and checks depth and placeholder rules.
    pub fn from_struct(
        s: &DecompositionStruct,
        qlabel: QuestionType,
        max_depth: usize,
    ) -> Result<Self, DecomposeError> {
        let depth = s.depth();
        if depth > max_depth {
            return Err(DecomposeError::DepthExceeded { depth, max: max_depth });
        }
        let mut nodes = Vec::new();
        let root_idx = Self::push(&mut nodes, s, qlabel);
        let tree = Self { nodes, root_idx };
        tree.validate()?;
        Ok(tree)
    }

    fn push(nodes: &mut Vec<DecompositionNode>, s: &DecompositionStruct, qlabel: QuestionType) -> usize {
        let sons: Vec<usize> = s.children.iter().map(|c| Self::push(nodes, c, qlabel)).collect();
        let idx = nodes.len();
        for &c in &sons {
            nodes[c].fa = Some(idx);
        }
        nodes.push(DecompositionNode {
            idx,
            question_text: s.question.clone(),
            sons,
            fa: None,
            qlabel,
            gold_answer: None,
        });
        idx
    }

    pub fn with_gold(mut self, gold: Option<String>) -> Self {
        let root = self.root_idx;
        self.nodes[root].gold_answer = gold;
        self
    }

    pub fn root(&self) -> &DecompositionNode {
        &self.nodes[self.root_idx]
    }

    pub fn node(&self, idx: usize) -> &DecompositionNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &QueryTree, i: usize) -> usize {
            t.nodes[i].sons.iter().map(|&c| 1 + go(t, c)).max().unwrap_or(0)
        }
        go(self, self.root_idx)
    }

    /// Mean child count over non-leaf nodes; 0 for a single-node tree.
    pub fn branch(&self) -> f64 {
        let inner: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.sons.len())
            .collect();
        if inner.is_empty() {
            0.0
        } else {
            inner.iter().sum::<usize>() as f64 / inner.len() as f64
        }
    }

    /// Structural invariants plus sibling-local placeholder discipline.
    pub fn validate(&self) -> Result<(), DecomposeError> {
        let invalid = |m: String| Err(DecomposeError::InvalidTree(m));
        if self.nodes.is_empty() || self.root_idx >= self.nodes.len() {
            return invalid("missing root".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.idx != i {
                return invalid(format!("node at position {i} has idx {}", n.idx));
            }
            if n.question_text.trim().is_empty() {
                return invalid(format!("node {i} has empty question text"));
            }
            for &c in &n.sons {
                if c >= self.nodes.len() || self.nodes[c].fa != Some(i) {
                    return invalid(format!("node {i} lists son {c} whose parent differs"));
                }
            }
            match n.fa {
                None if i != self.root_idx => return invalid(format!("node {i} has no parent")),
                Some(_) if i == self.root_idx => return invalid("root has a parent".into()),
                Some(p) if p >= self.nodes.len() || !self.nodes[p].sons.contains(&i) => {
                    return invalid(format!("node {i} is not listed by its parent {p}"))
                }
                _ => {}
            }
        }
        // every node reachable from the root exactly once
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root_idx];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return invalid(format!("node {i} reached twice"));
            }
            stack.extend(&self.nodes[i].sons);
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return invalid(format!("node {i} is unreachable from the root"));
        }
        for n in &self.nodes {
            for (pos, &c) in n.sons.iter().enumerate() {
                let position = pos + 1;
                let text = &self.nodes[c].question_text;
                for j in placeholder_refs(text) {
                    if j == 0 || j >= position {
                        return Err(DecomposeError::PlaceholderViolation {
                            question: text.clone(),
                            position,
                            reference: j,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::Category;

    fn qt() -> QuestionType {
        QuestionType::new(Category::BeforeLast)
    }

    const PAPANDREOU: &str = r##"{"Before Georgios Papandreou, who was the last to visit China?": ["When did Georgios Papandreou visit China?", "Who visited China before #1?", "Who was the last one among them?"]}"##;

    #[test]
    fn post_order_numbering() {
        let s = DecompositionStruct::parse(PAPANDREOU).unwrap();
        let t = QueryTree::from_struct(&s, qt(), 4).unwrap();
        assert_eq!(t.root_idx, 3);
        assert_eq!(t.root().sons, vec![0, 1, 2]);
        assert_eq!(t.node(1).question_text, "Who visited China before #1?");
        assert!(t.nodes[..3].iter().all(|n| n.fa == Some(3)));
        assert_eq!((t.depth(), t.branch()), (1, 3.0));
    }

    #[test]
    fn fences_and_chatter_are_ignored() {
        let text = format!("Sure!\n```json\n{PAPANDREOU}\n```");
        assert_eq!(DecompositionStruct::parse(&text).unwrap().children.len(), 3);
    }

    #[test]
    fn empty_list_is_a_leaf() {
        let s = DecompositionStruct::parse(r#"{"Who negotiated with Colombia before 2010-12-22?": []}"#).unwrap();
        let t = QueryTree::from_struct(&s, qt(), 4).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t.depth(), t.branch()), (0, 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DecompositionStruct::parse("no json here").is_err());
        assert!(DecompositionStruct::parse(r#"{"a": [], "b": []}"#).is_err());
        assert!(DecompositionStruct::parse(r#"{"a": "b"}"#).is_err());
        assert!(DecompositionStruct::parse(r#"{"a": [3]}"#).is_err());
        assert!(DecompositionStruct::parse(r#"{"a": [""]}"#).is_err());
    }

    #[test]
    fn forward_reference_is_a_violation() {
        let s = DecompositionStruct::parse(r##"{"q": ["uses #2 before #1 defined", "second"]}"##).unwrap();
        match QueryTree::from_struct(&s, qt(), 4) {
            Err(DecomposeError::PlaceholderViolation {
                reference, position, ..
            }) => {
                assert_eq!((reference, position), (2, 1))
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = DecompositionStruct::parse(r##"{"q": ["a", "self #2"]}"##).unwrap();
        assert!(matches!(
            QueryTree::from_struct(&s, qt(), 4),
            Err(DecomposeError::PlaceholderViolation { .. })
        ));
        let s = DecompositionStruct::parse(r##"{"q": ["a", "zero #0"]}"##).unwrap();
        assert!(QueryTree::from_struct(&s, qt(), 4).is_err());
    }

    #[test]
    fn nested_objects_and_depth_cap() {
        let s = DecompositionStruct::parse(r##"{"r": [{"a": ["a1", "a2 #1"]}, "b #1"]}"##).unwrap();
        let t = QueryTree::from_struct(&s, qt(), 4).unwrap();
        // a1, a2, a, b, r
        assert_eq!(t.len(), 5);
        assert_eq!(t.node(2).sons, vec![0, 1]);
        assert_eq!(t.root().sons, vec![2, 3]);
        assert_eq!(t.depth(), 2);
        assert!((t.branch() - 2.0).abs() < 1e-12);
        assert!(matches!(
            QueryTree::from_struct(&s, qt(), 1),
            Err(DecomposeError::DepthExceeded { depth: 2, max: 1 })
        ));
    }

    #[test]
    fn validate_catches_corruption() {
        let s = DecompositionStruct::parse(PAPANDREOU).unwrap();
        let mut t = QueryTree::from_struct(&s, qt(), 4).unwrap();
        t.nodes[0].fa = None;
        assert!(t.validate().is_err());
        let mut t = QueryTree::from_struct(&s, qt(), 4).unwrap();
        t.nodes[3].sons.push(0);
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_round_trip_keeps_schema_fields() {
        let s = DecompositionStruct::parse(PAPANDREOU).unwrap();
        let t = QueryTree::from_struct(&s, qt(), 4)
            .unwrap()
            .with_gold(Some("Wen Jiabao".into()));
        let v = serde_json::to_value(&t).unwrap();
        let root = &v["nodes"][3];
        assert_eq!(root["gold_answer"], "Wen Jiabao");
        assert_eq!(root["qlabel"], "before_last");
        assert!(v["nodes"][0].get("gold_answer").is_none());
        let back: QueryTree = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
