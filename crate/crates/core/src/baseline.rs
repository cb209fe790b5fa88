//! Heuristic comparators: segment the meeting by phrases or by the GenAI
//! section table, then label public speakers with a role heuristic.

use std::collections::BTreeMap;

use crate::corpus::{Arity, Category, Meeting};
use crate::featurize::{CompiledLocale, Predicate, PredicateTable};

/// Phrase-driven sections. A comment transition opens PC, a hearing
/// transition opens PH, an end phrase closes whatever is open. The meeting
/// starts in Other.
///
/// End phrases are checked first and the closing utterance itself is Other,
/// so "that concludes public comment" closes a period instead of opening one.
/// A repeated transition of the open kind keeps the period going.
pub fn segment_by_phrases(meeting: &Meeting, locale: &CompiledLocale) -> Vec<Category> {
    let mut state = Category::Other;
    meeting
        .utterances
        .iter()
        .map(|u| {
            if locale.is_section_end(&u.text) {
                state = Category::Other;
            } else if locale.is_comment_transition(&u.text) {
                state = Category::Pc;
            } else if locale.is_hearing_transition(&u.text) {
                state = Category::Ph;
            }
            state
        })
        .collect()
}

/// Sections from SectionGenAI atoms: per utterance the highest-valued
/// category, Other on ties or when no atom exists.
pub fn segment_by_genai(meeting: &Meeting, table: &PredicateTable) -> Vec<Category> {
    let mut best: BTreeMap<&str, BTreeMap<Category, f64>> = BTreeMap::new();
    for a in table.atoms.iter().filter(|a| a.predicate == Predicate::SectionGenAi) {
        let (Some(u), Some(c)) = (a.args.get(1), a.args.get(2).and_then(|c| Category::parse(c))) else {
            continue;
        };
        let v = best.entry(u.as_str()).or_default().entry(c).or_insert(a.value);
        *v = v.max(a.value);
    }
    meeting
        .utterances
        .iter()
        .map(|u| match best.get(u.utterance_id.as_str()) {
            Some(vals) => argmax_or_other(vals.iter().map(|(c, v)| (*c, *v))),
            None => Category::Other,
        })
        .collect()
}

/// Highest-valued category; Other when the maximum is shared.
pub(crate) fn argmax_or_other(values: impl IntoIterator<Item = (Category, f64)>) -> Category {
    let mut best = Category::Other;
    let mut best_v = f64::NEG_INFINITY;
    let mut tied = false;
    for (c, v) in values {
        if v > best_v {
            best = c;
            best_v = v;
            tied = false;
        } else if v == best_v {
            tied = true;
        }
    }
    if tied {
        Category::Other
    } else {
        best
    }
}

/// Role heuristic over given sections.
///
/// A speaker counts as public when most of their utterances fall in PC or PH
/// sections, they speak at most `k_often` times, and either half their
/// utterances are long (`delta_words` or more) or one of them introduces the
/// speaker. Public utterances inside PC are PC, inside PH are PH at arity 3
/// and Other at arity 2. Everything else is Other.
pub fn assign_remark_types(meeting: &Meeting, sections: &[Category], locale: &CompiledLocale, arity: Arity) -> Vec<Category> {
    assert_eq!(sections.len(), meeting.utterances.len(), "one section label per utterance");
    let cfg = &locale.config;

    #[derive(Default)]
    struct Tally {
        n: usize,
        inside: usize,
        long: usize,
        intro: bool,
    }
    let mut tally: BTreeMap<&str, Tally> = BTreeMap::new();
    for (u, s) in meeting.utterances.iter().zip(sections) {
        let t = tally.entry(u.speaker_id.as_str()).or_default();
        t.n += 1;
        t.inside += usize::from(*s != Category::Other);
        t.long += usize::from(u.word_count >= cfg.delta_words);
        t.intro |= locale.is_introduction(&u.text);
    }
    let public = |speaker: &str| {
        let t = &tally[speaker];
        2 * t.inside > t.n && t.n <= cfg.k_often && (2 * t.long >= t.n || t.intro)
    };
    meeting
        .utterances
        .iter()
        .zip(sections)
        .map(|(u, s)| match s {
            Category::Pc if public(&u.speaker_id) => Category::Pc,
            Category::Ph if public(&u.speaker_id) && arity == Arity::Three => Category::Ph,
            _ => Category::Other,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_datetime, Utterance};
    use crate::featurize::LocaleConfig;

    fn locale() -> CompiledLocale {
        let mut l = LocaleConfig::new("c");
        l.comment_transition_patterns = vec!["public comment".into()];
        l.hearing_transition_patterns = vec!["open the public hearing".into()];
        l.compile().unwrap()
    }

    fn meeting(lines: &[(&str, &str)]) -> Meeting {
        let utts = lines
            .iter()
            .enumerate()
            .map(|(i, (s, t))| Utterance::new("m", format!("u{i}"), i, *s, *t))
            .collect();
        Meeting::new("m", "c", parse_datetime("2024-01-01").unwrap(), utts).unwrap()
    }

    fn long_text(words: usize) -> String {
        vec!["word"; words].join(" ")
    }

    #[test]
    fn phrase_scan_semantics() {
        let mut lines = vec![("a", "hello"); 12];
        lines[3] = ("a", "now public comment");
        lines[8] = ("a", "we open the public hearing");
        let m = meeting(&lines);
        let s = segment_by_phrases(&m, &locale());
        assert!(s[..3].iter().all(|c| *c == Category::Other));
        assert!(s[3..8].iter().all(|c| *c == Category::Pc));
        assert!(s[8..].iter().all(|c| *c == Category::Ph));

        let m = meeting(&[("a", "x"), ("b", "y")]);
        assert_eq!(segment_by_phrases(&m, &locale()), vec![Category::Other; 2]);
    }

    #[test]
    fn repeated_and_closing_phrases() {
        // Enumerate short sequences over {transition, end, filler} and compare
        // with a direct restatement of the scan policy.
        let tokens = [("public comment", 'T'), ("that concludes public comment", 'E'), ("filler", 'F')];
        for code in 0..3usize.pow(5) {
            let mut c = code;
            let mut kinds = Vec::new();
            let mut lines = Vec::new();
            for _ in 0..5 {
                let (text, k) = tokens[c % 3];
                c /= 3;
                kinds.push(k);
                lines.push(("s", text));
            }
            let got = segment_by_phrases(&meeting(&lines), &locale());
            let mut open = false;
            for (i, k) in kinds.iter().enumerate() {
                match k {
                    'T' => open = true,
                    'E' => open = false,
                    _ => {}
                }
                let want = if open { Category::Pc } else { Category::Other };
                assert_eq!(got[i], want, "{kinds:?}");
            }
        }
    }

    #[test]
    fn genai_segments() {
        let m = meeting(&[("a", "x"); 12]);
        let mut t = PredicateTable::new("m");
        for i in 5..=9 {
            t.push(Predicate::SectionGenAi, &["m", &format!("u{i}"), "PC"], 1.0);
        }
        let s = segment_by_genai(&m, &t);
        assert!(s[5..=9].iter().all(|c| *c == Category::Pc));
        assert_eq!(s.iter().filter(|c| **c == Category::Pc).count(), 5);
        assert!(segment_by_genai(&m, &PredicateTable::new("m")).iter().all(|c| *c == Category::Other));

        let mut t = PredicateTable::new("m");
        t.push(Predicate::SectionGenAi, &["m", "u0", "PC"], 0.4);
        t.push(Predicate::SectionGenAi, &["m", "u0", "PH"], 0.7);
        t.push(Predicate::SectionGenAi, &["m", "u0", "PC"], 0.9);
        t.push(Predicate::SectionGenAi, &["m", "u1", "PC"], 0.5);
        t.push(Predicate::SectionGenAi, &["m", "u1", "PH"], 0.5);
        let s = segment_by_genai(&m, &t);
        assert_eq!(s[0], Category::Pc);
        assert_eq!(s[1], Category::Other);
    }

    #[test]
    fn role_heuristic() {
        let intro = format!("my name is Sam {}", long_text(10));
        let mut lines: Vec<(&str, String)> = vec![("chair", "public comment".into())];
        lines.push(("sam", intro));
        for _ in 0..39 {
            lines.push(("chair", "thanks".into()));
            lines.push(("clerk", "noted".into()));
        }
        let refs: Vec<(&str, &str)> = lines.iter().map(|(s, t)| (*s, t.as_str())).collect();
        let m = meeting(&refs);
        let sections = vec![Category::Pc; m.utterances.len()];
        let r = assign_remark_types(&m, &sections, &locale(), Arity::Three);
        assert_eq!(r[1], Category::Pc);
        // The chair speaks 40 times, far above k_often.
        assert_eq!(r[0], Category::Other);

        let ph = vec![Category::Ph; m.utterances.len()];
        assert_eq!(assign_remark_types(&m, &ph, &locale(), Arity::Two)[1], Category::Other);
        assert_eq!(assign_remark_types(&m, &ph, &locale(), Arity::Three)[1], Category::Ph);
    }

    #[test]
    fn long_speech_without_introduction_counts() {
        let text = long_text(80);
        let m = meeting(&[("chair", "public comment"), ("p", &text), ("chair", "thanks")]);
        let sections = vec![Category::Pc; 3];
        assert_eq!(assign_remark_types(&m, &sections, &locale(), Arity::Two)[1], Category::Pc);
        let m = meeting(&[("chair", "public comment"), ("p", "short"), ("chair", "thanks")]);
        assert_eq!(assign_remark_types(&m, &sections, &locale(), Arity::Two)[1], Category::Other);
    }
}
