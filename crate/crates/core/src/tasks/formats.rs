//! Task input readers: CoNLL columns for NER, SQuAD JSON or MRQA JSON lines
//! for extractive QA, JSON lines for the classification kinds.

use std::io::{BufRead, Read};

use serde_json::Value;

use super::{
    Entity, EqaAnswer, EqaInstance, McqaInstance, NerInstance, PairClsInstance, SentClsInstance, TaskInstance, TaskKind,
};
use crate::error::{Error, Result};

/// Token per line, tag in the last column (BIO, IOB1 or BIOES), sentences
/// separated by blank lines. `-DOCSTART-` lines are skipped.
pub fn read_conll<R: BufRead>(input: R) -> Result<Vec<NerInstance>> {
    let mut out = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>, out: &mut Vec<NerInstance>| {
        if !tokens.is_empty() {
            let id = format!("conll-{}", out.len());
            out.push(NerInstance { id, entities: entities_from_tags(tags), tokens: std::mem::take(tokens) });
            tags.clear();
        }
    };
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut tags, &mut out);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        if cols.len() < 2 {
            return Err(Error::MalformedRecord {
                record: n + 1,
                reason: format!("expected token and tag, got {line:?}"),
            });
        }
        let tag = cols[cols.len() - 1];
        if tag != "O" && !tag.contains('-') {
            return Err(Error::MalformedRecord { record: n + 1, reason: format!("bad tag {tag:?}") });
        }
        tokens.push(cols[0].to_string());
        tags.push(tag.to_string());
    }
    flush(&mut tokens, &mut tags, &mut out);
    Ok(out)
}

fn entities_from_tags(tags: &[String]) -> Vec<Entity> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (k, tag) in tags.iter().enumerate() {
        let (prefix, label) = tag.split_once('-').unwrap_or(("O", ""));
        let continues = matches!(prefix, "I" | "E") && open.is_some_and(|(_, l)| l == label);
        if !continues {
            if let Some((s, l)) = open.take() {
                out.push(Entity { start: s, end: k - 1, label: l.to_string() });
            }
            if prefix != "O" {
                open = Some((k, label));
            }
        }
        if matches!(prefix, "E" | "S") {
            if let Some((s, l)) = open.take() {
                out.push(Entity { start: s, end: k, label: l.to_string() });
            }
        }
    }
    if let Some((s, l)) = open {
        out.push(Entity { start: s, end: tags.len() - 1, label: l.to_string() });
    }
    out
}

fn field<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::InvalidInput(format!("{what}: missing field {key:?}")))
}

fn string(v: &Value, key: &str, what: &str) -> Result<String> {
    field(v, key, what)?
        .as_str()
        .map(String::from)
        .ok_or_else(|| Error::InvalidInput(format!("{what}: field {key:?} is not a string")))
}

fn array<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Vec<Value>> {
    field(v, key, what)?.as_array().ok_or_else(|| Error::InvalidInput(format!("{what}: field {key:?} is not an array")))
}

fn index(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::InvalidInput(format!("{what}: expected a non-negative integer")))
}

/// SQuAD (v1 or v2) JSON, or MRQA JSON lines with an optional header line.
pub fn read_eqa<R: Read>(mut input: R) -> Result<Vec<EqaInstance>> {
    let mut s = String::new();
    input.read_to_string(&mut s)?;
    if let Ok(doc) = serde_json::from_str::<Value>(&s) {
        if doc.get("data").is_some() {
            return read_squad(&doc);
        }
    }
    let mut out = Vec::new();
    for (n, line) in s.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord { record: n + 1, reason: e.to_string() })?;
        if v.get("header").is_some() {
            continue;
        }
        read_mrqa_record(&v, &mut out)?;
    }
    Ok(out)
}

fn read_squad(doc: &Value) -> Result<Vec<EqaInstance>> {
    let mut out = Vec::new();
    for article in array(doc, "data", "squad")? {
        for para in array(article, "paragraphs", "squad article")? {
            let context = string(para, "context", "squad paragraph")?;
            for qa in array(para, "qas", "squad paragraph")? {
                let id = string(qa, "id", "squad question")?;
                let impossible = qa.get("is_impossible").and_then(Value::as_bool).unwrap_or(false);
                let mut answers = Vec::new();
                if !impossible {
                    for a in array(qa, "answers", &id)? {
                        answers.push(EqaAnswer {
                            text: string(a, "text", &id)?,
                            start: index(field(a, "answer_start", &id)?, &id)?,
                        });
                    }
                }
                out.push(EqaInstance {
                    id,
                    question: string(qa, "question", "squad question")?,
                    context: context.clone(),
                    answers,
                });
            }
        }
    }
    Ok(out)
}

fn read_mrqa_record(v: &Value, out: &mut Vec<EqaInstance>) -> Result<()> {
    let context = string(v, "context", "mrqa record")?;
    let chars: Vec<char> = context.chars().collect();
    for qa in array(v, "qas", "mrqa record")? {
        let id = string(qa, "qid", "mrqa question")?;
        let mut answers = Vec::new();
        if let Some(detected) = qa.get("detected_answers").and_then(Value::as_array) {
            for a in detected {
                for span in array(a, "char_spans", &id)? {
                    let pair = span
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| Error::InvalidInput(format!("{id}: char span must be a [start, end] pair")))?;
                    let (s, e) = (index(&pair[0], &id)?, index(&pair[1], &id)?);
                    if s > e || e >= chars.len() {
                        return Err(Error::Alignment(format!("{id}: char span [{s}, {e}] outside context")));
                    }
                    answers.push(EqaAnswer { text: chars[s..=e].iter().collect(), start: s });
                }
            }
        }
        out.push(EqaInstance {
            id,
            question: string(qa, "question", "mrqa question")?,
            context: context.clone(),
            answers,
        });
    }
    Ok(())
}

fn choice_index(v: &Value, choices: usize, what: &str) -> Result<usize> {
    let k = match v {
        Value::Number(_) => index(v, what)?,
        Value::String(s) if s.len() == 1 && s.as_bytes()[0].is_ascii_uppercase() => (s.as_bytes()[0] - b'A') as usize,
        _ => return Err(Error::InvalidInput(format!("{what}: label must be an index or a letter"))),
    };
    if k >= choices {
        return Err(Error::InvalidInput(format!("{what}: label {k} out of {choices} choices")));
    }
    Ok(k)
}

/// One JSON object per line:
/// mcqa `{"id","question","context","choices":[…],"label":index or letter}`,
/// paircls `{"id","hypothesis","premise","label"}`, sentcls `{"id","text","label"}`.
pub fn read_cls_jsonl<R: BufRead>(input: R, kind: TaskKind) -> Result<Vec<TaskInstance>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord { record: n + 1, reason: e.to_string() })?;
        let what = format!("line {}", n + 1);
        let id = v.get("id").and_then(Value::as_str).map_or_else(|| format!("{}-{}", kind.name(), n), String::from);
        let inst = match kind {
            TaskKind::Mcqa => {
                let choices: Vec<String> = array(&v, "choices", &what)?
                    .iter()
                    .map(|c| {
                        c.as_str()
                            .map(String::from)
                            .ok_or_else(|| Error::InvalidInput(format!("{what}: choice is not a string")))
                    })
                    .collect::<Result<_>>()?;
                let label = choice_index(field(&v, "label", &what)?, choices.len(), &what)?;
                TaskInstance::Mcqa(McqaInstance {
                    id,
                    question: string(&v, "question", &what)?,
                    context: string(&v, "context", &what)?,
                    choices,
                    label,
                })
            }
            TaskKind::PairCls => TaskInstance::PairCls(PairClsInstance {
                id,
                hypothesis: string(&v, "hypothesis", &what)?,
                premise: string(&v, "premise", &what)?,
                label: string(&v, "label", &what)?,
            }),
            TaskKind::SentCls => TaskInstance::SentCls(SentClsInstance {
                id,
                text: string(&v, "text", &what)?,
                label: string(&v, "label", &what)?,
            }),
            other => return Err(Error::InvalidInput(format!("{} is not a classification kind", other.name()))),
        };
        out.push(inst);
    }
    Ok(out)
}

/// Reads any task kind in its native format.
pub fn read_tasks<R: BufRead>(input: R, kind: TaskKind) -> Result<Vec<TaskInstance>> {
    Ok(match kind {
        TaskKind::Ner => read_conll(input)?.into_iter().map(TaskInstance::Ner).collect(),
        TaskKind::Eqa => read_eqa(input)?.into_iter().map(TaskInstance::Eqa).collect(),
        _ => read_cls_jsonl(input, kind)?,
    })
}
