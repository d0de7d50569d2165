//! Text normalization and tokenization for discharge notes.
//!
//! Rules, applied to the lowercased text:
//!
//! * a maximal digit run, optionally with internal `.`-separated digit
//!   groups (`98.6`, `1.2.3`), becomes the marker `<num>`;
//! * a run of `a-z` is a word;
//! * an apostrophe followed by letters starts a contraction suffix
//!   (`patient's` → `patient 's`); a bare apostrophe stands alone;
//! * `.` `,` `/` `-` stand alone;
//! * every other character is a separator;
//! * the literal `<num>` is recognized on input so normalization is
//!   idempotent.
//!
//! Line structure survives as `\n` between tokens; it feeds sentence
//! splitting.

pub const NUM_MARKER: &str = "<num>";

/// One token plus whether a line break preceded it.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Piece {
    text: String,
    newline_before: bool,
}

fn scan(text: &str) -> Vec<Piece> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut pieces = Vec::new();
    let mut newline = false;
    let mut i = 0;
    let emit = |pieces: &mut Vec<Piece>, s: String, newline: &mut bool| {
        let newline_before = *newline && !pieces.is_empty();
        pieces.push(Piece {
            text: s,
            newline_before,
        });
        *newline = false;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            while j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            emit(&mut pieces, NUM_MARKER.to_string(), &mut newline);
            i = j;
        } else if c.is_ascii_lowercase() {
            let j = run_end(&chars, i, |c| c.is_ascii_lowercase());
            emit(&mut pieces, chars[i..j].iter().collect(), &mut newline);
            i = j;
        } else if c == '\'' {
            let j = run_end(&chars, i + 1, |c| c.is_ascii_lowercase());
            emit(&mut pieces, chars[i..j].iter().collect(), &mut newline);
            i = j;
        } else if matches!(c, '.' | ',' | '/' | '-') {
            emit(&mut pieces, c.to_string(), &mut newline);
            i += 1;
        } else if c == '<' && chars[i..].starts_with(&['<', 'n', 'u', 'm', '>']) {
            emit(&mut pieces, NUM_MARKER.to_string(), &mut newline);
            i += NUM_MARKER.len();
        } else {
            if c == '\n' {
                newline = true;
            }
            i += 1;
        }
    }
    pieces
}

fn run_end(chars: &[char], start: usize, pred: impl Fn(char) -> bool) -> usize {
    let mut j = start;
    while j < chars.len() && pred(chars[j]) {
        j += 1;
    }
    j
}

/// Normalizes raw note text. Tokens are joined by a single space, or by
/// `\n` where the source had a line break between them.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, p) in scan(text).into_iter().enumerate() {
        if i > 0 {
            out.push(if p.newline_before { '\n' } else { ' ' });
        }
        out.push_str(&p.text);
    }
    out
}

/// Splits normalized text on whitespace.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// Tokens plus the indices of tokens that start a new line.
pub fn tokenize_with_breaks(normalized: &str) -> (Vec<String>, Vec<usize>) {
    let mut tokens = Vec::new();
    let mut breaks = Vec::new();
    for (li, line) in normalized.split('\n').enumerate() {
        let before = tokens.len();
        tokens.extend(line.split_whitespace().map(str::to_owned));
        if li > 0 && tokens.len() > before && before > 0 {
            breaks.push(before);
        }
    }
    (tokens, breaks)
}

/// Sentence spans over `tokens`: a sentence ends after every `.` token and
/// before every line break in `breaks`; spans longer than `max_len` are cut
/// greedily. The result partitions `[0, tokens.len())`.
pub fn split_sentences(tokens: &[String], breaks: &[usize], max_len: usize) -> Vec<(usize, usize)> {
    let max_len = max_len.max(1);
    let mut spans = Vec::new();
    let mut start = 0;
    let mut breaks = breaks.iter().copied().peekable();
    let close = |spans: &mut Vec<(usize, usize)>, start: usize, end: usize| {
        let mut s = start;
        while s < end {
            let e = (s + max_len).min(end);
            spans.push((s, e));
            s = e;
        }
    };
    for (i, tok) in tokens.iter().enumerate() {
        while breaks.peek().is_some_and(|&b| b <= i) {
            let b = breaks.next().unwrap();
            if b == i && i > start {
                close(&mut spans, start, i);
                start = i;
            }
        }
        if tok == "." {
            close(&mut spans, start, i + 1);
            start = i + 1;
        }
    }
    close(&mut spans, start, tokens.len());
    spans
}
