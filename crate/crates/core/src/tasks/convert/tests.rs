use super::*;
use crate::head::DecodeMode;
use crate::head::{decode_spans, Matrix};
use crate::tasks::{render_gold, render_input, Entity, EqaAnswer};

const CONLL: &str =
    "Two goals in the last six minutes gave holders Japan an uninspiring 2-1 Asian Cup victory over Syria on Friday .";
const SQUAD_Q: &str = "Which NFL team represented the NFC at Super Bowl 50?";
const SQUAD_C: &str = "Super Bowl 50 was an American football game to determine the champion of the National Football League (NFL) for the 2015 season. The American Football Conference (AFC) champion Denver Broncos defeated the National Football Conference (NFC) champion Carolina Panthers to earn their third Super Bowl title.";

fn conll_instance() -> NerInstance {
    let tokens = words(CONLL);
    let e = |s, t, l: &str| Entity { start: s, end: t, label: l.into() };
    NerInstance { id: "c1".into(), tokens, entities: vec![e(9, 9, "LOC"), e(13, 14, "MISC"), e(17, 17, "LOC")] }
}

#[test]
fn conll_rows() {
    let g = ner_to_mrc(&conll_instance(), &LabelSchema::conll()).unwrap();
    let rows: Vec<(String, String)> =
        g.branches.iter().map(|b| (render_input(&b.example), render_gold(&b.example))).collect();
    let ctx = format!("[SEP] [SEP] {CONLL} [SEP]");
    assert_eq!(rows[0].0, format!("[CLS] \"ORG\" . Organization entities are limited to named corporate, governmental, or other organizational entities. {ctx}"));
    assert_eq!(rows[0].1, "\u{2205}");
    assert_eq!(rows[1].0, format!("[CLS] \"PER\" . Person entities are named persons or family . {ctx}"));
    assert_eq!(rows[1].1, "\u{2205}");
    assert_eq!(rows[2].0, format!("[CLS] \"LOC\" . Location entities are the name of politically or geographically defined locations such as cities , countries . {ctx}"));
    assert_eq!(rows[2].1, "(32,32) - \"Japan\"; (40,40) - \"Syria\"");
    assert_eq!(rows[3].0, format!("[CLS] \"MISC\" . Examples of miscellaneous entities include events , nationalities , products and works of art . {ctx}"));
    assert_eq!(rows[3].1, "(34,35) - \"Asian Cup\"");
}

#[test]
fn squad_row() {
    let start = SQUAD_C.find("Carolina").unwrap();
    let inst = EqaInstance {
        id: "s1".into(),
        question: SQUAD_Q.into(),
        context: SQUAD_C.into(),
        answers: vec![EqaAnswer { text: "Carolina Panthers".into(), start }],
    };
    let ex = eqa_to_mrc(&inst).unwrap();
    assert_eq!(
        render_input(&ex),
        "[CLS] Which NFL team represented the NFC at Super Bowl 50 ? [SEP] [SEP] Super Bowl 50 was an American football game to determine the champion of the National Football League (NFL) for the 2015 season . The American Football Conference (AFC) champion Denver Broncos defeated the National Football Conference (NFC) champion Carolina Panthers to earn their third Super Bowl title . [SEP]"
    );
    assert_eq!(render_gold(&ex), "(53,54) - \"Carolina Panthers\"");
}

#[test]
fn eqa_alignment() {
    let mk = |context: &str, text: &str, start| EqaInstance {
        id: "e".into(),
        question: "q?".into(),
        context: context.into(),
        answers: vec![EqaAnswer { text: text.into(), start }],
    };
    let ex = eqa_to_mrc(&mk("Paris is big.", "Paris", 0)).unwrap();
    assert_eq!((ex.answers[0].start, ex.answers[0].end), (0, 0));
    // only the offset-matched occurrence
    let ex = eqa_to_mrc(&mk("cat and cat and cat", "cat", 8)).unwrap();
    assert_eq!(ex.answers.len(), 1);
    assert_eq!(ex.answers[0].start, 2);
    // answer text with trailing period, token split off
    let ex = eqa_to_mrc(&mk("He met Smith.", "Smith.", 7)).unwrap();
    assert_eq!(ex.answers[0].text, "Smith .");
    // noisy offset: nearest normalized match
    let ex = eqa_to_mrc(&mk("a Rome b Rome c", "Rome", 10)).unwrap();
    assert_eq!(ex.answers[0].start, 3);
    assert!(eqa_to_mrc(&mk("nothing here", "Rome", 0)).is_err());
    let mut none = mk("text", "x", 0);
    none.answers.clear();
    assert!(!eqa_to_mrc(&none).unwrap().answerable);
}

#[test]
fn obqa_rows() {
    let inst = TaskInstance::Mcqa(McqaInstance {
        id: "o".into(),
        question: "A positive effect of burning biofuel is:".into(),
        context: "Biofuel is used to produce electricity by burning.".into(),
        choices: vec![
            "shortage of crops for the food supply.".into(),
            "an increase in air pollution".into(),
            "powering the lights in a home.".into(),
            "deforestation in the amazon to make room for crops.".into(),
        ],
        label: 2,
    });
    let g = cls_to_mrc(&inst, None).unwrap();
    let ctx = "[SEP] [SEP] Biofuel is used to produce electricity by burning . [SEP]";
    let want = [
        ("A positive effect of burning biofuel is shortage of crops for the food supply .", "\u{2205}"),
        ("A positive effect of burning biofuel is an increase in air pollution .", "\u{2205}"),
        ("A positive effect of burning biofuel is powering the lights in a home .", "(0,0) - \"[CLS]\""),
        ("A positive effect of burning biofuel is deforestation in the amazon to make room for crops .", "\u{2205}"),
    ];
    assert_eq!(g.branches.len(), 4);
    assert_eq!(g.gold_count(), 1);
    for (b, (q, gold)) in g.branches.iter().zip(want) {
        assert_eq!(render_input(&b.example), format!("[CLS] {q} {ctx}"));
        assert_eq!(render_gold(&b.example), gold);
    }
}

#[test]
fn sst2_and_mnli_rows() {
    let inst = TaskInstance::SentCls(SentClsInstance {
        id: "s".into(),
        text: "This is one of Polanski's best films.".into(),
        label: "Positive".into(),
    });
    let g = cls_to_mrc(&inst, Some(&LabelSchema::sst2())).unwrap();
    let ctx = "[SEP] [SEP] This is one of Polanski 's best films . [SEP]";
    assert_eq!(render_input(&g.branches[0].example), format!("[CLS] Negative , feeling not good . {ctx}"));
    assert_eq!(render_gold(&g.branches[0].example), "\u{2205}");
    assert_eq!(render_input(&g.branches[1].example), format!("[CLS] Positive , having a good feeling . {ctx}"));
    assert_eq!(render_gold(&g.branches[1].example), "(0,0) - \"[CLS]\"");

    let inst = TaskInstance::PairCls(PairClsInstance {
        id: "m".into(),
        hypothesis: "You and your friends are not welcome here, said Severn.".into(),
        premise: "Severn said the people were not welcome there.".into(),
        label: "Entailment".into(),
    });
    let g = cls_to_mrc(&inst, Some(&LabelSchema::mnli())).unwrap();
    let ctx = "[SEP] [SEP] Hypothesis : You and your friends are not welcome here, said Severn . Premise : Severn said the people were not welcome there . [SEP]";
    let want = [
        ("Neutral. The hypothesis is a sentence with mostly the same lexical items as the premise but a different meaning .", "\u{2205}"),
        ("Entailment . The hypothesis is a sentence with a similar meaning as the premise .", "(0,0) - \"[CLS]\""),
        ("Contradiction . The hypothesis is a sentence with a contradictory meaning to the premise .", "\u{2205}"),
    ];
    for (b, (q, gold)) in g.branches.iter().zip(want) {
        assert_eq!(render_input(&b.example), format!("[CLS] {q} {ctx}"));
        assert_eq!(render_gold(&b.example), gold);
    }
}

#[test]
fn classification_errors() {
    let one = TaskInstance::Mcqa(McqaInstance {
        id: "x".into(),
        question: "q".into(),
        context: "c".into(),
        choices: vec!["a".into()],
        label: 0,
    });
    assert!(cls_to_mrc(&one, None).is_err());
    let unknown = TaskInstance::SentCls(SentClsInstance { id: "x".into(), text: "t".into(), label: "Meh".into() });
    assert!(cls_to_mrc(&unknown, Some(&LabelSchema::sst2())).is_err());
}

#[test]
fn ner_round_trip_and_resolution() {
    let inst = conll_instance();
    let g = ner_to_mrc(&inst, &LabelSchema::conll()).unwrap();
    let decoded: Vec<Vec<DecodedSpan>> = g
        .branches
        .iter()
        .map(|b| b.example.answers.iter().map(|a| DecodedSpan { start: a.start, end: a.end, score: 0.9 }).collect())
        .collect();
    for mode in [Overlap::Flat, Overlap::Nested] {
        let mut got: Vec<Entity> = mrc_to_ner(&g, &decoded, mode)
            .unwrap()
            .into_iter()
            .map(|p| Entity { start: p.start, end: p.end, label: p.label })
            .collect();
        got.sort();
        let mut want = inst.entities.clone();
        want.sort();
        assert_eq!(got, want);
    }
    let empty: Vec<Vec<DecodedSpan>> = vec![Vec::new(); 4];
    assert!(mrc_to_ner(&g, &empty, Overlap::Flat).unwrap().is_empty());

    let mut clash = empty.clone();
    clash[0].push(DecodedSpan { start: 13, end: 14, score: 0.7 });
    clash[3].push(DecodedSpan { start: 14, end: 15, score: 0.8 });
    let flat = mrc_to_ner(&g, &clash, Overlap::Flat).unwrap();
    assert_eq!(flat.len(), 1);
    assert_eq!(flat[0].label, "MISC");
    assert_eq!(mrc_to_ner(&g, &clash, Overlap::Nested).unwrap().len(), 2);
}

#[test]
fn cls_decision_rule() {
    assert_eq!(argmax_branch(&[0.2, 0.9, 0.4]), Some(1));
    assert_eq!(argmax_branch(&[0.5, 0.5, 0.5]), Some(0));
    assert_eq!(argmax_branch(&[]), None);
    let s = [0.1, 0.7, 0.3, 0.69];
    let squashed: Vec<f64> = s.iter().map(|x: &f64| (x * 3.0).exp() - 7.0).collect();
    assert_eq!(argmax_branch(&s), argmax_branch(&squashed));

    let inst =
        TaskInstance::SentCls(SentClsInstance { id: "s".into(), text: "good film".into(), label: "Positive".into() });
    let g = cls_to_mrc(&inst, Some(&LabelSchema::sst2())).unwrap();
    let mats: Vec<ScoreMatrix> = g
        .branches
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let (enc, _) = encode_input(&b.example).unwrap();
            let m = enc.len();
            let mut p = Matrix::filled(m, m, 0.1);
            p[(0, 0)] = if k == 1 { 0.8 } else { 0.3 };
            p[(m - 2, m - 2)] = 0.6;
            ScoreMatrix::from_probs(&p).unwrap()
        })
        .collect();
    let pred = mrc_to_cls(&g, &mats).unwrap();
    assert_eq!((pred.branch, pred.tag.as_str()), (1, "Positive"));
    let r = pred.rationale.unwrap();
    assert_eq!((r.start, r.end), (1, 1));
    let (enc, _) = encode_input(&g.branches[1].example).unwrap();
    assert!(decode_spans(&mats[1], &enc.region(), DecodeMode::Single).len() == 1);
}

#[test]
fn schema_json() {
    let s = LabelSchema::from_json(r#"{"Z":"last letter","A":"first letter"}"#).unwrap();
    assert_eq!(s.entries()[0].0, "Z");
    assert_eq!(LabelSchema::from_json(&s.to_json()).unwrap(), s);
    assert!(LabelSchema::from_json(r#"{"A":"  "}"#).is_err());
    assert!(LabelSchema::from_json(r#"{"A":1}"#).is_err());
    assert!(LabelSchema::new([("A", "x"), ("A", "y")]).is_err());
}
