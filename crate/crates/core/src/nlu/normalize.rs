//! Utterance normalization: lowercase, punctuation-free tokens with money and
//! number literals fused into single tokens.

/// Splits `text` into normalized tokens.
///
/// Letters and digits are kept and lowercased. Apostrophes are dropped without
/// splitting ("what's" becomes "whats"). A `.` survives only between two digits,
/// so "21.4" stays one token while "on." becomes "on". A `$` directly followed
/// by a number (optionally after whitespace) is fused into a money literal such
/// as `$15`; any other `$` is discarded like the rest of the punctuation.
pub fn normalize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut raw: Vec<String> = Vec::new();
    let mut current = String::new();

    let flush = |current: &mut String, raw: &mut Vec<String>| {
        if !current.is_empty() {
            raw.push(std::mem::take(current));
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if c == '\'' || c == '\u{2019}' {
            // joined, not split
        } else if c == '.' {
            let prev_digit = current.chars().last().is_some_and(|p| p.is_ascii_digit());
            let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if prev_digit && next_digit && !current.contains('.') {
                current.push('.');
            } else {
                flush(&mut current, &mut raw);
            }
        } else if c == '$' {
            flush(&mut current, &mut raw);
            raw.push("$".to_string());
        } else {
            flush(&mut current, &mut raw);
        }
    }
    flush(&mut current, &mut raw);

    let mut tokens = Vec::with_capacity(raw.len());
    let mut iter = raw.into_iter().peekable();
    while let Some(tok) = iter.next() {
        if tok == "$" {
            if iter.peek().is_some_and(|next| is_number(next)) {
                let number = iter.next().unwrap_or_default();
                tokens.push(format!("${number}"));
            }
            continue;
        }
        tokens.push(tok);
    }
    tokens
}

/// True for plain decimal literals: digits with at most one inner `.`.
pub fn is_number(token: &str) -> bool {
    let mut parts = token.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

/// True for plain integer literals.
pub fn is_integer(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit())
}

/// Returns the integer amount of a `$N` money literal.
pub fn money_amount(token: &str) -> Option<&str> {
    token.strip_prefix('$').filter(|rest| is_integer(rest))
}
