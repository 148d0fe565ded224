use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalize_title, Article};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionRef {
    pub article_id: u64,
    pub anchor_ordinal: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlinkEntry {
    /// Distinct mention articles linking to the target.
    pub inbound_count: usize,
    /// Every anchor occurrence, sorted.
    pub mention_refs: Vec<MentionRef>,
}

/// Inbound links per canonical target title.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InlinkIndex {
    entries: BTreeMap<String, InlinkEntry>,
}

/// Maps alternate titles (redirects) to their canonical title. Empty by default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasTable(HashMap<String, String>);

impl AliasTable {
    pub fn new(map: HashMap<String, String>) -> Self {
        Self(map.into_iter().map(|(k, v)| (normalize_title(&k), normalize_title(&v))).collect())
    }

    pub fn resolve<'a>(&'a self, title: &'a str) -> &'a str {
        self.0.get(title).map_or(title, String::as_str)
    }
}

impl InlinkIndex {
    pub fn get(&self, title: &str) -> Option<&InlinkEntry> {
        self.entries.get(title)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &InlinkEntry)> {
        self.entries.iter()
    }

    /// Targets linked from at least `threshold` distinct articles, in title order.
    pub fn eligible(&self, threshold: usize) -> impl Iterator<Item = (&String, &InlinkEntry)> {
        self.entries.iter().filter(move |(_, e)| e.inbound_count >= threshold)
    }

    fn add_article(&mut self, article: &Article, aliases: &AliasTable) {
        let own = aliases.resolve(&article.title).to_string();
        for (ordinal, anchor) in article.anchors.iter().enumerate() {
            let target = aliases.resolve(&anchor.target_title);
            if target == own {
                continue;
            }
            self.entries
                .entry(target.to_string())
                .or_default()
                .mention_refs
                .push(MentionRef { article_id: article.id, anchor_ordinal: ordinal });
        }
    }

    pub fn merge(mut self, other: InlinkIndex) -> InlinkIndex {
        for (title, entry) in other.entries {
            self.entries.entry(title).or_default().mention_refs.extend(entry.mention_refs);
        }
        self
    }

    /// Sorts mention refs and recomputes distinct-article counts.
    fn finalize(mut self) -> Self {
        for entry in self.entries.values_mut() {
            entry.mention_refs.sort_unstable();
            entry.mention_refs.dedup();
            let mut distinct = 0;
            let mut last = None;
            for r in &entry.mention_refs {
                if last != Some(r.article_id) {
                    distinct += 1;
                    last = Some(r.article_id);
                }
            }
            entry.inbound_count = distinct;
        }
        self
    }
}

pub fn build_inlink_index<'a, I>(articles: I, aliases: &AliasTable) -> InlinkIndex
where
    I: IntoIterator<Item = &'a Article>,
{
    let mut index = InlinkIndex::default();
    for article in articles {
        index.add_article(article, aliases);
    }
    index.finalize()
}

/// Same result as [`build_inlink_index`], built from per-worker partial maps.
pub fn build_inlink_index_par(articles: &[Article], aliases: &AliasTable) -> InlinkIndex {
    articles
        .par_iter()
        .fold(InlinkIndex::default, |mut acc, a| {
            acc.add_article(a, aliases);
            acc
        })
        .reduce(InlinkIndex::default, InlinkIndex::merge)
        .finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Anchor;

    fn article(id: u64, title: &str, targets: &[&str]) -> Article {
        let anchors = targets
            .iter()
            .enumerate()
            .map(|(k, t)| Anchor {
                target_title: t.to_string(),
                surface: "x".into(),
                char_start: 2 * k,
                char_end: 2 * k + 1,
            })
            .collect();
        Article { id, title: title.into(), text: String::new(), anchors, sentences: vec![] }
    }

    #[test]
    fn empty_input_gives_empty_index() {
        assert!(build_inlink_index(&[], &AliasTable::default()).is_empty());
    }

    #[test]
    fn counts_distinct_articles() {
        let mut arts: Vec<_> = (0..12).map(|k| article(k, &format!("A{k}"), &["X"])).collect();
        arts.push(article(100, "B", &["Y", "Y", "Y"]));
        let idx = build_inlink_index(&arts, &AliasTable::default());
        let x = idx.get("X").unwrap();
        assert_eq!(x.inbound_count, 12);
        assert_eq!(idx.eligible(10).map(|(t, _)| t.as_str()).collect::<Vec<_>>(), ["X"]);
        let y = idx.get("Y").unwrap();
        assert_eq!(y.inbound_count, 1);
        assert_eq!(y.mention_refs.len(), 3);
    }

    #[test]
    fn self_links_and_aliases() {
        let aliases = AliasTable::new(HashMap::from([("Usa".to_string(), "United States".to_string())]));
        let arts = [article(1, "United States", &["United States", "Usa"]), article(2, "Canada", &["Usa", "Canada"])];
        let idx = build_inlink_index(&arts, &aliases);
        assert_eq!(idx.get("United States").unwrap().inbound_count, 1);
        assert!(idx.get("Canada").is_none());
        assert!(idx.get("Usa").is_none());
    }

    #[test]
    fn order_independent_and_parallel_equivalent() {
        let arts: Vec<_> = (0..40u64)
            .map(|k| article(k, &format!("T{k}"), &[&format!("T{}", (k * 7) % 13), "Z", &format!("T{}", k % 5)]))
            .collect();
        let a = build_inlink_index(&arts, &AliasTable::default());
        let mut rev = arts.clone();
        rev.reverse();
        let b = build_inlink_index(&rev, &AliasTable::default());
        let c = build_inlink_index_par(&arts, &AliasTable::default());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
