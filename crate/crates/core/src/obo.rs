//! Minimal OBO reader: `[Term]` stanzas with `id:` and `is_a:` lines.
//!
//! Obsolete terms are dropped, other stanza types and relations ignored.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

#[derive(Default)]
struct Term {
    id: Option<String>,
    parents: Vec<String>,
    obsolete: bool,
}

pub fn parse_obo_lite(text: &str) -> Result<Hierarchy> {
    let mut terms: Vec<Term> = Vec::new();
    let mut current: Option<Term> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') {
            terms.extend(current.take());
            if line == "[Term]" {
                current = Some(Term::default());
            }
            continue;
        }
        let Some(term) = current.as_mut() else { continue };
        let Some((tag, value)) = line.split_once(':') else {
            return Err(Error::parse("obo", i + 1, format!("expected `tag: value`, got `{line}`")));
        };
        let value = value.split(" !").next().unwrap_or("").trim();
        match tag.trim() {
            "id" => term.id = Some(value.to_string()),
            "is_a" => term.parents.push(value.to_string()),
            "is_obsolete" => term.obsolete = value == "true",
            _ => {}
        }
    }
    terms.extend(current);

    let mut ids = BTreeSet::new();
    for (k, t) in terms.iter().enumerate() {
        match &t.id {
            Some(id) if !t.obsolete => {
                ids.insert(id.clone());
            }
            Some(_) => {}
            None => return Err(Error::parse("obo", 0, format!("term stanza {} has no id", k + 1))),
        }
    }
    if ids.is_empty() {
        return Err(Error::Empty("no terms in ontology".into()));
    }
    let mut edges = Vec::new();
    let mut dangling = BTreeSet::new();
    for t in terms.iter().filter(|t| !t.obsolete) {
        let id = t.id.clone().unwrap_or_default();
        for p in &t.parents {
            if ids.contains(p) {
                edges.push((p.clone(), id.clone()));
            } else {
                dangling.insert(format!("{id} -> {p}"));
            }
        }
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingReferences(dangling.into_iter().collect()));
    }
    let extra: Vec<String> = ids.into_iter().collect();
    Hierarchy::from_edges(&edges, &extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GO: &str = "format-version: 1.2\n\n[Term]\nid: GO:1\nname: root\n\n[Term]\nid: GO:2\nis_a: GO:1 ! root\n\n[Term]\nid: GO:3\nis_a: GO:1\nis_a: GO:2 ! second\nrelationship: part_of GO:9\n\n[Term]\nid: GO:4\nis_obsolete: true\nis_a: GO:1\n\n[Typedef]\nid: part_of\n";

    #[test]
    fn reads_terms_and_is_a() {
        let h = parse_obo_lite(GO).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(h.edge_count(), 3);
        assert!(h.id("GO:4").is_none());
        let three = h.id("GO:3").unwrap();
        assert_eq!(h.parents(three).len(), 2);
    }

    #[test]
    fn dangling_reference() {
        let err = parse_obo_lite("[Term]\nid: A\nis_a: B\n").unwrap_err();
        assert!(matches!(err, Error::DanglingReferences(v) if v == ["A -> B"]));
    }

    #[test]
    fn cycle() {
        let err = parse_obo_lite("[Term]\nid: A\nis_a: B\n[Term]\nid: B\nis_a: A\n").unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }
}
