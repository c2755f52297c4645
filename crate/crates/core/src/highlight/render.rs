use std::fmt::Write;
use std::str::FromStr;

use serde::Serialize;

use super::{HighlightReport, HighlightSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Ansi,
    Html,
    Spans,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ansi" => Ok(Format::Ansi),
            "html" => Ok(Format::Html),
            "spans" => Ok(Format::Spans),
            other => Err(format!("unknown format {other:?} (expected ansi, html or spans)")),
        }
    }
}

impl Format {
    pub fn render(self, report: &HighlightReport, scale: IntensityScale) -> String {
        match self {
            Format::Ansi => render_ansi(report, scale),
            Format::Html => render_html(report, scale),
            Format::Spans => render_spans(report),
        }
    }
}

/// Margin thresholds, in nats, separating the three highlight strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensityScale {
    pub low: f64,
    pub high: f64,
}

impl Default for IntensityScale {
    fn default() -> Self {
        Self { low: 0.5, high: 2.0 }
    }
}

/// 0 for unhighlighted spans, otherwise 1..=3 by margin.
pub fn intensity(span: &HighlightSpan, scale: IntensityScale) -> u8 {
    match span.margin {
        Some(m) if span.highlighted => {
            if m <= scale.low {
                1
            } else if m <= scale.high {
                2
            } else {
                3
            }
        }
        _ => 0,
    }
}

#[derive(Serialize)]
struct SpanLine<'a> {
    char_start: usize,
    char_end: usize,
    highlighted: bool,
    alternative: Option<&'a str>,
    #[serde(with = "crate::serde_ext::option_float")]
    margin: Option<f64>,
}

/// One JSON object per span, one span per line.
pub fn render_spans(report: &HighlightReport) -> String {
    let mut out = String::new();
    for span in &report.spans {
        let line = SpanLine {
            char_start: span.char_start,
            char_end: span.char_end,
            highlighted: span.highlighted,
            alternative: span.alternative_text.as_deref(),
            margin: span.margin,
        };
        out.push_str(&serde_json::to_string(&line).expect("span lines always serialize"));
        out.push('\n');
    }
    out
}

/// Walks the document, yielding the gap before each span and the span itself.
fn segments(report: &HighlightReport) -> impl Iterator<Item = (&str, Option<&HighlightSpan>)> {
    let doc = report.document.as_str();
    let mut cursor = 0;
    let mut spans = report.spans.iter();
    std::iter::from_fn(move || match spans.next() {
        Some(span) => {
            let gap = &doc[cursor..span.char_start];
            cursor = span.char_end;
            Some((gap, Some(span)))
        }
        None if cursor < doc.len() => {
            let rest = &doc[cursor..];
            cursor = doc.len();
            Some((rest, None))
        }
        None => None,
    })
}

pub fn render_ansi(report: &HighlightReport, scale: IntensityScale) -> String {
    const COLORS: [&str; 3] = ["\x1b[4;33m", "\x1b[4;38;5;208m", "\x1b[1;4;31m"];
    let mut out = String::new();
    for (gap, span) in segments(report) {
        out.push_str(gap);
        let Some(span) = span else { continue };
        let level = intensity(span, scale);
        if level == 0 {
            out.push_str(&span.original_token_text);
            continue;
        }
        out.push_str(COLORS[usize::from(level) - 1]);
        out.push_str(&span.original_token_text);
        out.push_str("\x1b[0m");
        if let Some(alt) = &span.alternative_text {
            let _ = write!(out, "\x1b[2m[{alt}]\x1b[0m");
        }
    }
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Standalone page: highlighted spans carry an intensity class, and every
/// span with an alternative shows it as a hover title.
pub fn render_html(report: &HighlightReport, scale: IntensityScale) -> String {
    let mut body = String::new();
    for (gap, span) in segments(report) {
        body.push_str(&escape(gap));
        let Some(span) = span else { continue };
        let text = escape(&span.original_token_text);
        match &span.alternative_text {
            None => body.push_str(&text),
            Some(alt) => {
                let level = intensity(span, scale);
                let class = if level == 0 {
                    "tok".to_string()
                } else {
                    format!("tok hl hl-{level}")
                };
                let _ = write!(body, "<span class=\"{class}\" title=\"{}\">{text}</span>", escape(alt));
            }
        }
    }
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Edit opportunities</title>\n<style>\n\
         .doc {{ white-space: pre-wrap; font-family: Georgia, serif; line-height: 1.6; }}\n\
         .tok {{ cursor: help; }}\n\
         .hl {{ text-decoration-line: underline; text-decoration-color: #d97706; }}\n\
         .hl-1 {{ text-decoration-thickness: 1px; }}\n\
         .hl-2 {{ text-decoration-thickness: 2px; }}\n\
         .hl-3 {{ text-decoration-thickness: 4px; }}\n\
         </style>\n</head>\n<body>\n<p class=\"prompt\">{}</p>\n\
         <div class=\"doc\" data-model=\"{}\" data-revision=\"{}\">{}</div>\n</body>\n</html>\n",
        escape(&report.prompt),
        escape(&report.model_id),
        report.revision,
        body
    )
}
