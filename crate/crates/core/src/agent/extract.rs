//! Mention detection, command extraction and result summarization.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::llm::LlmProvider;
use crate::meta;
use crate::robot::ExecutionResult;

pub const EXTRACTION_HEADER: &str = "You are a command extraction expert.";

pub const DEFAULT_SUMMARY_PROMPT: &str = "You write execution reports for a robotics forum. \
Given a robot command and its raw execution result, write a concise report covering the executed command, \
the key steps, the outcome, and any errors. Use short markdown. Do not invent steps that are not in the result.";

pub fn extraction_prompt(mention: &str, description: &str) -> String {
    format!(
        "{EXTRACTION_HEADER}\n\
         Extract commands issued to {mention}\n\
         ({description}) from forum posts.\n\
         \n\
         Input:  post content in markdown format\n\
         Output: extracted commands, concise and\n        accurate (bulleted; numbered if\n        sequential)\n\
         \n\
         If the post contains no commands for\n{mention}, return an empty string."
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionSource {
    Llm,
    RuleBased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub command: Option<String>,
    pub source: ExtractionSource,
    pub raw_response: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Byte ranges of `pattern` occurring as a standalone token,
/// case-insensitively.
fn token_matches(text: &str, pattern: &str) -> Vec<(usize, usize)> {
    if pattern.is_empty() {
        return Vec::new();
    }
    let re = Regex::new(&format!("(?i){}", regex::escape(pattern))).expect("escaped pattern");
    re.find_iter(text)
        .filter(|m| {
            let before = text[..m.start()].chars().next_back();
            let mut after = text[m.end()..].chars();
            let next = after.next();
            let ok_before = before.is_none_or(|c| !is_word_char(c) && c != '@' && c != '.');
            let ok_after = match next {
                None => true,
                Some('.') => after.next().is_none_or(|c| !is_word_char(c)),
                Some(c) => !is_word_char(c) && c != '@',
            };
            ok_before && ok_after
        })
        .map(|m| (m.start(), m.end()))
        .collect()
}

pub fn mentions_me(title: &str, first_post: &str, pattern: &str, is_agent_post: bool) -> bool {
    if is_agent_post {
        return false;
    }
    !token_matches(title, pattern).is_empty() || !token_matches(first_post, pattern).is_empty()
}

static NEXT_MENTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)@[A-Za-z0-9_-]+").unwrap());

/// Text after the first mention: to the end of its line, or to the end
/// of the post when the mention ends its line. Stops at another mention.
pub fn extract_fallback(content: &str, pattern: &str) -> ExtractionResult {
    let body = meta::parse(content)
        .map(|(_, rest)| rest)
        .unwrap_or(content);
    let command = token_matches(body, pattern).first().and_then(|&(_, end)| {
        let rest = &body[end..];
        let line_end = rest.find('\n').unwrap_or(rest.len());
        let region = if rest[..line_end].trim().is_empty() {
            rest
        } else {
            &rest[..line_end]
        };
        let region = match NEXT_MENTION.find(region) {
            Some(m) => &region[..m.start()],
            None => region,
        };
        let cmd = region.split_whitespace().collect::<Vec<_>>().join(" ");
        let cmd = cmd.trim_start_matches([',', ':']).trim();
        (!cmd.is_empty()).then(|| cmd.to_string())
    });
    ExtractionResult {
        command,
        source: ExtractionSource::RuleBased,
        raw_response: String::new(),
    }
}

static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s*").unwrap());

/// Flattens a bulleted or numbered reply into one "a then b" command.
pub fn normalize_extraction(raw: &str) -> Option<String> {
    let steps: Vec<String> = raw
        .lines()
        .map(|l| {
            BULLET
                .replace(l, "")
                .trim()
                .trim_matches(['"', '`', '\''])
                .trim()
                .to_string()
        })
        .filter(|l| !l.is_empty())
        .collect();
    let joined = steps.join(" then ");
    let lowered = joined.to_lowercase();
    if joined.is_empty() || matches!(lowered.as_str(), "none" | "n/a" | "empty" | "no commands") {
        None
    } else {
        Some(joined)
    }
}

pub async fn extract_command(
    provider: &dyn LlmProvider,
    content: &str,
    mention: &str,
    description: &str,
) -> ExtractionResult {
    if !provider.available() {
        return extract_fallback(content, mention);
    }
    let body = meta::parse(content)
        .map(|(_, rest)| rest)
        .unwrap_or(content);
    match provider
        .chat(&extraction_prompt(mention, description), body)
        .await
    {
        Ok(raw) => ExtractionResult {
            command: normalize_extraction(&raw),
            source: ExtractionSource::Llm,
            raw_response: raw,
        },
        Err(e) => {
            tracing::warn!(error = %e, "extraction provider failed, using rule-based fallback");
            extract_fallback(content, mention)
        }
    }
}

/// Provider summary, or the raw transcript when the provider fails.
pub async fn summarize_result(
    provider: &dyn LlmProvider,
    prompt: &str,
    command: &str,
    result: &ExecutionResult,
) -> String {
    if !provider.available() {
        return result.output.clone();
    }
    let user = format!("{}\n\ncommand: {command}", result.raw_report());
    match provider.chat(prompt, &user).await {
        Ok(s) if !s.trim().is_empty() => s.trim().to_string(),
        Ok(_) => result.output.clone(),
        Err(e) => {
            tracing::warn!(error = %e, "summary provider failed, replying with raw result");
            result.output.clone()
        }
    }
}
