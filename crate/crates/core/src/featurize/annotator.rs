//! Optional client that asks a chat-completions endpoint to mark comment and
//! hearing periods in a transcript, producing `SectionGenAI` atoms.
//!
//! Offline use never touches this module: the same atoms can be loaded from a
//! predicate-table file.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Predicate, PredicateTable};
use crate::corpus::{Category, Meeting};
use crate::error::{Error, Result};

pub const DEFAULT_PROMPT: &str = "\
You will read part of a local government meeting transcript. Each line is \
`[index] speaker: text`. Find the periods where members of the public are \
invited to speak. \"Public Comments\" usually let the public talk about items \
that are not on the agenda; \"Public Hearings\" are for comments on one \
specific agenda item. A meeting may have none of these periods, or several. \
A period usually starts when someone calls for comments and usually ends with \
wording such as \"end\" or \"conclude\". Answer with JSON only: a list of \
objects {\"start_index\": int, \"end_index\": int, \"section\": \"PC\" | \"PH\"} \
using the line indices shown, or [] if there are none.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
    pub timeout_s: u64,
    /// Utterances per request.
    pub window: usize,
    pub retries: u32,
    pub backoff_ms: u64,
    /// Fail hard on transport or reply errors instead of returning an empty table.
    pub strict: bool,
    pub prompt_template: String,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            endpoint: String::new(),
            model: "gpt-4".into(),
            token_env: Some("PUBLICSPEAK_ANNOTATOR_TOKEN".into()),
            timeout_s: 60,
            window: 200,
            retries: 2,
            backoff_ms: 500,
            strict: false,
            prompt_template: DEFAULT_PROMPT.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSpan {
    pub start_index: usize,
    pub end_index: usize,
    pub section: Category,
}

/// Chat messages for the utterances `range` of `meeting`.
pub fn build_messages(meeting: &Meeting, range: std::ops::Range<usize>, template: &str) -> Value {
    let mut transcript = String::new();
    for u in &meeting.utterances[range] {
        transcript.push_str(&format!("[{}] {}: {}\n", u.index, u.speaker_id, u.text));
    }
    json!([
        {"role": "system", "content": template},
        {"role": "user", "content": transcript},
    ])
}

/// Parses the assistant's content into spans. Accepts a bare list, an object
/// with a `spans` list, and replies wrapped in a markdown code fence.
pub fn parse_span_reply(content: &str) -> Result<Vec<SectionSpan>> {
    let mut body = content.trim();
    if let Some(rest) = body.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        body = rest.trim_end().trim_end_matches("```").trim();
    }
    let value: Value =
        serde_json::from_str(body).map_err(|e| Error::Annotator(format!("unparseable reply: {e}")))?;
    let list = match value {
        Value::Array(_) => value,
        Value::Object(mut o) => o
            .remove("spans")
            .ok_or_else(|| Error::Annotator("reply object has no `spans` list".into()))?,
        _ => return Err(Error::Annotator("reply is not a list of spans".into())),
    };
    let raw: Vec<Value> =
        serde_json::from_value(list).map_err(|e| Error::Annotator(format!("malformed spans: {e}")))?;
    let mut spans = Vec::new();
    for v in raw {
        let span: SectionSpan =
            serde_json::from_value(v).map_err(|e| Error::Annotator(format!("malformed span: {e}")))?;
        if span.section == Category::Other {
            log::warn!("annotator returned an `Other` span; ignoring it");
            continue;
        }
        spans.push(span);
    }
    Ok(spans)
}

/// Turns spans into one `SectionGenAI` atom per utterance: the covering
/// span's section, or `Other`. Where spans overlap the later one wins.
pub fn expand_spans(meeting: &Meeting, spans: &[SectionSpan]) -> PredicateTable {
    let n = meeting.utterances.len();
    let mut section = vec![Category::Other; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (k, span) in spans.iter().enumerate() {
        if span.start_index > span.end_index || span.start_index >= n {
            log::warn!("meeting {}: ignoring out-of-range span {span:?}", meeting.meeting_id);
            continue;
        }
        for i in span.start_index..=span.end_index.min(n - 1) {
            if let Some(prev) = owner[i] {
                if spans[prev].section != span.section {
                    log::warn!(
                        "meeting {}: spans {prev} and {k} overlap at utterance {i}; keeping the later one",
                        meeting.meeting_id
                    );
                }
            }
            owner[i] = Some(k);
            section[i] = span.section;
        }
    }
    let mut table = PredicateTable::new(&meeting.meeting_id);
    for (u, s) in meeting.utterances.iter().zip(section) {
        table.push(Predicate::SectionGenAi, &[&meeting.meeting_id, &u.utterance_id, s.as_str()], 1.0);
    }
    table
}

fn reply_content(body: &Value) -> Result<&str> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Annotator("response has no choices[0].message.content".into()))
}

fn request_chunk(agent: &ureq::Agent, cfg: &AnnotatorConfig, token: Option<&str>, messages: Value) -> Result<Vec<SectionSpan>> {
    let payload = json!({ "model": cfg.model, "messages": messages });
    let mut last_err = None;
    for attempt in 0..=cfg.retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(cfg.backoff_ms << (attempt - 1)));
        }
        let mut req = agent.post(&cfg.endpoint);
        if let Some(t) = token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let outcome = req
            .send_json(&payload)
            .map_err(|e| Error::Annotator(format!("request to {} failed: {e}", cfg.endpoint)))
            .and_then(|mut resp| {
                resp.body_mut()
                    .read_json::<Value>()
                    .map_err(|e| Error::Annotator(format!("response is not JSON: {e}")))
            });
        match outcome {
            Ok(body) => return parse_span_reply(reply_content(&body)?),
            Err(e) => {
                log::warn!("annotator attempt {} failed: {e}", attempt + 1);
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Annotator("no attempts made".into())))
}

/// Queries the endpoint window by window and expands the returned spans.
///
/// `network_enabled` must be set explicitly by the caller; without it this
/// returns a configuration error. In lenient mode a failed request yields an
/// empty table and a warning.
pub fn fetch_genai_sections(meeting: &Meeting, cfg: &AnnotatorConfig, network_enabled: bool) -> Result<PredicateTable> {
    if !network_enabled {
        return Err(Error::Config("annotator network mode is disabled".into()));
    }
    if cfg.endpoint.is_empty() {
        return Err(Error::Config("annotator endpoint is not configured".into()));
    }
    let token = cfg.token_env.as_deref().and_then(|v| std::env::var(v).ok());
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_s)))
        .http_status_as_error(true)
        .build()
        .into();

    let window = cfg.window.max(1);
    let n = meeting.utterances.len();
    let mut spans = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let messages = build_messages(meeting, start..end, &cfg.prompt_template);
        match request_chunk(&agent, cfg, token.as_deref(), messages) {
            Ok(s) => spans.extend(s),
            Err(e) if cfg.strict => return Err(e),
            Err(e) => {
                log::warn!("meeting {}: annotator failed, returning an empty table: {e}", meeting.meeting_id);
                return Ok(PredicateTable::new(&meeting.meeting_id));
            }
        }
        start = end;
    }
    Ok(expand_spans(meeting, &spans))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_datetime, Utterance};
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn meeting(n: usize) -> Meeting {
        let utts = (0..n).map(|i| Utterance::new("m", format!("u{i}"), i, "s", "words")).collect();
        Meeting::new("m", "c", parse_datetime("2024-01-01").unwrap(), utts).unwrap()
    }

    fn sections(t: &PredicateTable) -> Vec<&str> {
        t.atoms.iter().map(|a| a.args[2].as_str()).collect()
    }

    #[test]
    fn span_expansion() {
        let m = meeting(12);
        let spans = parse_span_reply(r#"[{"start_index":5,"end_index":9,"section":"PC"}]"#).unwrap();
        let t = expand_spans(&m, &spans);
        let s = sections(&t);
        assert_eq!(s.iter().filter(|x| **x == "PC").count(), 5);
        assert_eq!(s.iter().filter(|x| **x == "Other").count(), 7);
        assert!(s[5..=9].iter().all(|x| *x == "PC"));

        let t = expand_spans(&m, &parse_span_reply("[]").unwrap());
        assert!(sections(&t).iter().all(|x| *x == "Other"));
        assert_eq!(t.atoms.len(), 12);
    }

    #[test]
    fn overlapping_spans_later_wins() {
        let m = meeting(10);
        let spans = parse_span_reply(
            r#"{"spans":[{"start_index":1,"end_index":6,"section":"PC"},{"start_index":4,"end_index":8,"section":"PH"}]}"#,
        )
        .unwrap();
        let t = expand_spans(&m, &spans);
        let s = sections(&t);
        assert_eq!(s, ["Other", "PC", "PC", "PC", "PH", "PH", "PH", "PH", "PH", "Other"]);

        // Reversed order flips the winner on the overlap.
        let rev: Vec<_> = spans.iter().rev().copied().collect();
        let t = expand_spans(&m, &rev);
        let s = sections(&t);
        assert_eq!(s, ["Other", "PC", "PC", "PC", "PC", "PC", "PC", "PH", "PH", "Other"]);
    }

    #[test]
    fn fenced_and_bad_replies() {
        let fenced = "```json\n[{\"start_index\":0,\"end_index\":1,\"section\":\"PH\"}]\n```";
        assert_eq!(parse_span_reply(fenced).unwrap().len(), 1);
        assert!(parse_span_reply("I could not find any").is_err());
        assert!(parse_span_reply(r#"[{"start":0}]"#).is_err());
    }

    #[test]
    fn messages_carry_template_and_indices() {
        let m = meeting(5);
        let msgs = build_messages(&m, 2..4, DEFAULT_PROMPT);
        assert_eq!(msgs[0]["content"], DEFAULT_PROMPT);
        let user = msgs[1]["content"].as_str().unwrap();
        assert!(user.starts_with("[2] s: words\n[3] s: words"));
    }

    #[test]
    fn offline_by_default() {
        let cfg = AnnotatorConfig {
            endpoint: "http://127.0.0.1:9".into(),
            ..AnnotatorConfig::default()
        };
        assert!(matches!(fetch_genai_sections(&meeting(3), &cfg, false), Err(Error::Config(_))));
    }

    /// Serves `replies.len()` HTTP requests with canned chat-completion bodies.
    fn serve(replies: Vec<String>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for reply in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                // Read headers, then the declared body length.
                loop {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                        let head = String::from_utf8_lossy(&buf[..pos]).to_lowercase();
                        let len = head
                            .lines()
                            .find_map(|l| l.strip_prefix("content-length:"))
                            .map(|v| v.trim().parse::<usize>().unwrap())
                            .unwrap_or(0);
                        while buf.len() < pos + 4 + len {
                            let n = stream.read(&mut chunk).unwrap();
                            buf.extend_from_slice(&chunk[..n]);
                        }
                        break;
                    }
                }
                let body = json!({"choices":[{"message":{"role":"assistant","content": reply}}]}).to_string();
                let resp = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    #[test]
    fn fetches_over_http_in_windows() {
        let endpoint = serve(vec![
            r#"[{"start_index":2,"end_index":3,"section":"PC"}]"#.into(),
            r#"[{"start_index":4,"end_index":4,"section":"PH"}]"#.into(),
        ]);
        let cfg = AnnotatorConfig {
            endpoint,
            window: 4,
            token_env: None,
            ..AnnotatorConfig::default()
        };
        let t = fetch_genai_sections(&meeting(6), &cfg, true).unwrap();
        assert_eq!(sections(&t), ["Other", "Other", "PC", "PC", "PH", "Other"]);
    }

    #[test]
    fn unparseable_reply_policy() {
        let lenient = AnnotatorConfig {
            endpoint: serve(vec!["nonsense".into()]),
            retries: 0,
            token_env: None,
            ..AnnotatorConfig::default()
        };
        let t = fetch_genai_sections(&meeting(3), &lenient, true).unwrap();
        assert!(t.atoms.is_empty());

        let strict = AnnotatorConfig {
            endpoint: serve(vec!["nonsense".into()]),
            retries: 0,
            strict: true,
            token_env: None,
            ..AnnotatorConfig::default()
        };
        assert!(matches!(fetch_genai_sections(&meeting(3), &strict, true), Err(Error::Annotator(_))));
    }

    #[test]
    fn network_failure_policy() {
        // Nothing listens on a port we bound and dropped.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut cfg = AnnotatorConfig {
            endpoint: format!("http://127.0.0.1:{port}/"),
            retries: 0,
            timeout_s: 2,
            token_env: None,
            ..AnnotatorConfig::default()
        };
        assert!(fetch_genai_sections(&meeting(3), &cfg, true).unwrap().atoms.is_empty());
        cfg.strict = true;
        assert!(fetch_genai_sections(&meeting(3), &cfg, true).is_err());
    }
}
