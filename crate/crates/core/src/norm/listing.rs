//! Parser for the `key = {value, ...}` listing format used to write norms and
//! normative information.
//!
//! ```text
//! norm type   = {Prohibition},
//! subject     = {Infected_Agent},
//! object      = {Healthy_Agent},
//! antecedent  = {obs_health=[MILD, CRITICAL]},
//! consequent  = {loc=[PARK, CAFE, CLINIC]}
//! ```
//!
//! Keys are case-insensitive and may span several words; whitespace between
//! tokens is insignificant. Conditions inside a set are separated by `,` or
//! `;` and take either a single value or a bracketed list. Values are
//! exact-case.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{
    Attribute, Condition, ConditionSet, InfoConsequent, InfoType, Norm, NormType, NormativeInfo,
    Party, Role, Value,
};

pub(crate) const DEFAULT_PROHIBITION: &str = "\
norm type   = {Prohibition},
subject     = {Infected_Agent},
object      = {Healthy_Agent},
antecedent  = {obs_health=[MILD, CRITICAL]},
consequent  = {loc=[PARK, CAFE, CLINIC]}
";

pub(crate) const DEFAULT_COMMITMENT: &str = "\
norm type   = {Commitment},
subject     = {Infected_Agent},
object      = {Healthy_Agent},
antecedent  = {actual_health=[MILD, CRITICAL]},
consequent  = {loc=[HOME]}
";

/// Every variant carries the byte offset of the offending token.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ListingError {
    #[error("syntax error at byte {offset}: {message} (found `{found}`)")]
    Syntax {
        message: String,
        found: String,
        offset: usize,
    },
    #[error("missing key `{key}` (listing ends at byte {offset})")]
    MissingKey { key: String, offset: usize },
    #[error("duplicate key `{key}` at byte {offset}")]
    DuplicateKey { key: String, offset: usize },
    #[error("unknown attribute `{token}` at byte {offset}")]
    UnknownAttribute { token: String, offset: usize },
    #[error("unknown value `{token}` at byte {offset}")]
    UnknownValue { token: String, offset: usize },
}

impl ListingError {
    pub fn offset(&self) -> usize {
        match self {
            ListingError::Syntax { offset, .. }
            | ListingError::MissingKey { offset, .. }
            | ListingError::DuplicateKey { offset, .. }
            | ListingError::UnknownAttribute { offset, .. }
            | ListingError::UnknownValue { offset, .. } => *offset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Word,
    Eq,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
}

#[derive(Clone, Copy, Debug)]
struct Tok<'a> {
    kind: Kind,
    text: &'a str,
    offset: usize,
}

fn syntax(message: impl Into<String>, found: impl Into<String>, offset: usize) -> ListingError {
    ListingError::Syntax {
        message: message.into(),
        found: found.into(),
        offset,
    }
}

fn lex(src: &str, base: usize) -> Result<Vec<Tok<'_>>, ListingError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let kind = match c {
            b'=' => Some(Kind::Eq),
            b'{' => Some(Kind::LBrace),
            b'}' => Some(Kind::RBrace),
            b'[' => Some(Kind::LBracket),
            b']' => Some(Kind::RBracket),
            b',' => Some(Kind::Comma),
            b';' => Some(Kind::Semi),
            _ => None,
        };
        if let Some(kind) = kind {
            toks.push(Tok {
                kind,
                text: &src[i..i + 1],
                offset: base + i,
            });
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphanumeric() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Tok {
                kind: Kind::Word,
                text: &src[start..i],
                offset: base + start,
            });
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(syntax("unexpected character", ch.to_string(), base + i));
        }
    }
    Ok(toks)
}

struct Entry<'t, 'a> {
    key: String,
    offset: usize,
    body: &'t [Tok<'a>],
    /// Offset of the closing brace, used for errors about empty bodies.
    close: usize,
}

fn found(tok: Option<&Tok<'_>>) -> String {
    tok.map_or_else(|| "end of input".to_string(), |t| t.text.to_string())
}

fn split_entries<'t, 'a>(
    toks: &'t [Tok<'a>],
    end: usize,
) -> Result<Vec<Entry<'t, 'a>>, ListingError> {
    let at = |i: usize| toks.get(i).map_or(end, |t| t.offset);
    let mut entries = Vec::new();
    let mut i = 0;
    loop {
        let key_start = i;
        while toks.get(i).is_some_and(|t| t.kind == Kind::Word) {
            i += 1;
        }
        if i == key_start {
            return Err(syntax("expected a key", found(toks.get(i)), at(i)));
        }
        let key = toks[key_start..i]
            .iter()
            .map(|t| t.text.to_ascii_lowercase())
            .collect::<Vec<_>>()
            .join(" ");
        let offset = toks[key_start].offset;
        for expected in [Kind::Eq, Kind::LBrace] {
            if toks.get(i).map(|t| t.kind) != Some(expected) {
                let what = if expected == Kind::Eq { "'='" } else { "'{'" };
                return Err(syntax(
                    format!("expected {what}"),
                    found(toks.get(i)),
                    at(i),
                ));
            }
            i += 1;
        }
        let body_start = i;
        loop {
            match toks.get(i).map(|t| t.kind) {
                Some(Kind::RBrace) => break,
                Some(Kind::LBrace) => return Err(syntax("nested '{'", "{", at(i))),
                None => return Err(syntax("unclosed '{'", "end of input", end)),
                _ => i += 1,
            }
        }
        entries.push(Entry {
            key,
            offset,
            body: &toks[body_start..i],
            close: toks[i].offset,
        });
        i += 1;
        match toks.get(i).map(|t| t.kind) {
            None => break,
            Some(Kind::Comma) => {
                i += 1;
                if i == toks.len() {
                    break;
                }
            }
            Some(_) => {
                return Err(syntax(
                    "expected ',' between entries",
                    found(toks.get(i)),
                    at(i),
                ))
            }
        }
    }
    Ok(entries)
}

/// Collects the entries for a fixed key list, rejecting unknown and repeated
/// keys.
fn collect_keys<'e, 't, 'a>(
    entries: &'e [Entry<'t, 'a>],
    keys: &[&str],
    end: usize,
) -> Result<Vec<&'e Entry<'t, 'a>>, ListingError> {
    let mut slots: Vec<Option<&Entry>> = vec![None; keys.len()];
    for e in entries {
        let Some(idx) = keys.iter().position(|k| *k == e.key) else {
            return Err(syntax("unknown key", e.key.clone(), e.offset));
        };
        if slots[idx].is_some() {
            return Err(ListingError::DuplicateKey {
                key: e.key.clone(),
                offset: e.offset,
            });
        }
        slots[idx] = Some(e);
    }
    slots
        .into_iter()
        .zip(keys)
        .map(|(slot, key)| {
            slot.ok_or_else(|| ListingError::MissingKey {
                key: key.to_string(),
                offset: end,
            })
        })
        .collect()
}

fn single_word<'a>(entry: &Entry<'_, 'a>) -> Result<Tok<'a>, ListingError> {
    match entry.body {
        [tok] if tok.kind == Kind::Word => Ok(*tok),
        [] => Err(syntax("expected a value", "}", entry.close)),
        [tok] => Err(syntax("expected a value", tok.text, tok.offset)),
        [_, extra, ..] => Err(syntax("expected '}'", extra.text, extra.offset)),
    }
}

fn condition_set(entry: &Entry<'_, '_>) -> Result<ConditionSet, ListingError> {
    let toks = entry.body;
    let at = |i: usize| toks.get(i).map_or(entry.close, |t| t.offset);
    let found_at = |i: usize| {
        toks.get(i)
            .map_or_else(|| "}".to_string(), |t| t.text.to_string())
    };
    if toks.is_empty() {
        return Err(syntax("empty condition set", "}", entry.close));
    }
    let mut conditions = Vec::new();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    loop {
        let attr_tok = match toks.get(i) {
            Some(t) if t.kind == Kind::Word => *t,
            _ => return Err(syntax("expected an attribute", found_at(i), at(i))),
        };
        let attribute =
            Attribute::from_name(attr_tok.text).ok_or_else(|| ListingError::UnknownAttribute {
                token: attr_tok.text.to_string(),
                offset: attr_tok.offset,
            })?;
        if !seen.insert(attribute) {
            return Err(ListingError::DuplicateKey {
                key: attribute.name().to_string(),
                offset: attr_tok.offset,
            });
        }
        i += 1;
        if toks.get(i).map(|t| t.kind) != Some(Kind::Eq) {
            return Err(syntax("expected '='", found_at(i), at(i)));
        }
        i += 1;

        let mut value_toks = Vec::new();
        match toks.get(i).map(|t| t.kind) {
            Some(Kind::Word) => {
                value_toks.push(toks[i]);
                i += 1;
            }
            Some(Kind::LBracket) => {
                i += 1;
                loop {
                    match toks.get(i) {
                        Some(t) if t.kind == Kind::Word => value_toks.push(*t),
                        _ => return Err(syntax("expected a value", found_at(i), at(i))),
                    }
                    i += 1;
                    match toks.get(i).map(|t| t.kind) {
                        Some(Kind::Comma) => i += 1,
                        Some(Kind::RBracket) => {
                            i += 1;
                            break;
                        }
                        _ => return Err(syntax("expected ',' or ']'", found_at(i), at(i))),
                    }
                }
            }
            _ => return Err(syntax("expected a value", found_at(i), at(i))),
        }

        let mut values = Vec::with_capacity(value_toks.len());
        for t in value_toks {
            match Value::from_name(t.text) {
                Some(v) if attribute.domain().contains(&v) => values.push(v),
                _ => {
                    return Err(ListingError::UnknownValue {
                        token: t.text.to_string(),
                        offset: t.offset,
                    })
                }
            }
        }
        conditions.push(Condition::new(attribute, values).expect("validated above"));

        match toks.get(i).map(|t| t.kind) {
            None => break,
            Some(Kind::Comma) | Some(Kind::Semi) => i += 1,
            Some(_) => {
                return Err(syntax(
                    "expected ',' or ';' between conditions",
                    found_at(i),
                    at(i),
                ))
            }
        }
    }
    Ok(ConditionSet::new(conditions).expect("validated above"))
}

fn unknown_value(tok: Tok<'_>) -> ListingError {
    ListingError::UnknownValue {
        token: tok.text.to_string(),
        offset: tok.offset,
    }
}

fn parse_norm_at(text: &str, base: usize) -> Result<Norm, ListingError> {
    let end = base + text.len();
    let toks = lex(text, base)?;
    let entries = split_entries(&toks, end)?;
    let e = collect_keys(
        &entries,
        &["norm type", "subject", "object", "antecedent", "consequent"],
        end,
    )?;
    let type_tok = single_word(e[0])?;
    let norm_type = match type_tok.text {
        "Commitment" => NormType::Commitment,
        "Prohibition" => NormType::Prohibition,
        _ => return Err(unknown_value(type_tok)),
    };
    Ok(Norm {
        norm_type,
        subject: Role::new(single_word(e[1])?.text),
        object: Role::new(single_word(e[2])?.text),
        antecedent: condition_set(e[3])?,
        consequent: condition_set(e[4])?,
    })
}

/// Parse a single norm listing.
pub fn parse_norm(text: &str) -> Result<Norm, ListingError> {
    parse_norm_at(text, 0)
}

/// Parse a file of norm listings separated by blank lines. Offsets in errors
/// are relative to the start of the file.
pub fn parse_norm_file(text: &str) -> Result<Vec<Norm>, ListingError> {
    let mut norms = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(start) = block_start.take() {
                norms.push(parse_norm_at(&text[start..pos], start)?);
            }
        } else if block_start.is_none() {
            block_start = Some(pos);
        }
        pos += line.len();
    }
    if let Some(start) = block_start {
        norms.push(parse_norm_at(&text[start..], start)?);
    }
    Ok(norms)
}

fn party(tok: Tok<'_>) -> Party {
    match tok.text.parse::<u32>() {
        Ok(id) => Party::Agent(id),
        Err(_) => Party::Label(tok.text.to_string()),
    }
}

/// Parse a normative-information listing.
pub fn parse_normative_info(text: &str) -> Result<NormativeInfo, ListingError> {
    let end = text.len();
    let toks = lex(text, 0)?;
    let entries = split_entries(&toks, end)?;
    let e = collect_keys(
        &entries,
        &[
            "sender",
            "receiver",
            "info type",
            "antecedent",
            "consequent",
        ],
        end,
    )?;
    let sender = party(single_word(e[0])?);
    let receiver_tok = single_word(e[1])?;
    let receiver = party(receiver_tok);
    if sender == receiver {
        return Err(syntax(
            "sender and receiver must differ",
            receiver_tok.text,
            receiver_tok.offset,
        ));
    }
    let type_tok = single_word(e[2])?;
    let info_type = match type_tok.text {
        "MESSAGE" => InfoType::Message,
        "HINT" => InfoType::Hint,
        _ => return Err(unknown_value(type_tok)),
    };
    let cons_tok = single_word(e[4])?;
    let consequent = match cons_tok.text {
        "PUNISHMENT" => InfoConsequent::Punishment,
        "REWARD" => InfoConsequent::Reward,
        _ => return Err(unknown_value(cons_tok)),
    };
    Ok(NormativeInfo {
        sender,
        receiver,
        info_type,
        antecedent: condition_set(e[3])?,
        consequent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MESSAGE: &str = "\
sender     = {Observer_Agent},
receiver   = {Actor_Agent},
info type  = {MESSAGE},
antecedent = {obs_health=CRITICAL,loc=CAFE},
consequent = {PUNISHMENT}
";

    const VACCINATION: &str = "\
norm type   = {Commitment},
subject     = {Alive_Agent},
object      = {Other_Agent},
antecedent  = {vaccinated=FALSE;
               actual_health=[HEALTHY,
               ASYMPTOMATIC, MILD, CRITICAL]},
consequent  = {loc=[CLINIC]}
";

    fn set(conds: &[(Attribute, &[Value])]) -> ConditionSet {
        ConditionSet::new(
            conds
                .iter()
                .map(|(a, vs)| Condition::new(*a, vs.iter().copied()).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn parses_default_prohibition() {
        let norm = parse_norm(DEFAULT_PROHIBITION).unwrap();
        assert_eq!(norm.norm_type, NormType::Prohibition);
        assert_eq!(norm.subject.as_str(), "Infected_Agent");
        assert_eq!(norm.object.as_str(), "Healthy_Agent");
        assert_eq!(
            norm.antecedent,
            set(&[(Attribute::ObsHealth, &[Value::Mild, Value::Critical])])
        );
        assert_eq!(
            norm.consequent,
            set(&[(Attribute::Loc, &[Value::Park, Value::Cafe, Value::Clinic])])
        );
    }

    #[test]
    fn parses_commitment() {
        let norm = parse_norm(DEFAULT_COMMITMENT).unwrap();
        assert_eq!(norm.norm_type, NormType::Commitment);
        assert_eq!(
            norm.antecedent,
            set(&[(Attribute::ActualHealth, &[Value::Mild, Value::Critical])])
        );
        assert_eq!(norm.consequent, set(&[(Attribute::Loc, &[Value::Home])]));
    }

    #[test]
    fn semicolon_separates_conditions() {
        let norm = parse_norm(VACCINATION).unwrap();
        assert_eq!(
            norm.antecedent,
            set(&[
                (Attribute::Vaccinated, &[Value::False]),
                (
                    Attribute::ActualHealth,
                    &[
                        Value::Healthy,
                        Value::Asymptomatic,
                        Value::Mild,
                        Value::Critical
                    ]
                ),
            ])
        );
    }

    #[test]
    fn keys_are_case_insensitive_and_whitespace_free() {
        let text = "NORM   TYPE={Prohibition},Subject={A},object={B},\
                    antecedent={obs_health=MILD},consequent={loc=CAFE}";
        assert_eq!(parse_norm(text).unwrap().norm_type, NormType::Prohibition);
    }

    #[test]
    fn empty_input_is_syntax_error_at_zero() {
        let err = parse_norm("").unwrap_err();
        assert!(
            matches!(err, ListingError::Syntax { offset: 0, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn missing_and_duplicate_keys() {
        let missing = DEFAULT_PROHIBITION.replace("object      = {Healthy_Agent},\n", "");
        assert_eq!(
            parse_norm(&missing).unwrap_err(),
            ListingError::MissingKey {
                key: "object".into(),
                offset: missing.len()
            }
        );
        let dup = format!("subject = {{X}},\n{DEFAULT_PROHIBITION}");
        let err = parse_norm(&dup).unwrap_err();
        assert_eq!(
            err,
            ListingError::DuplicateKey {
                key: "subject".into(),
                offset: dup.rfind("subject").unwrap()
            }
        );
    }

    #[test]
    fn unknown_attribute_and_value_carry_offsets() {
        let text = DEFAULT_PROHIBITION.replace("obs_health", "mood");
        assert_eq!(
            parse_norm(&text).unwrap_err(),
            ListingError::UnknownAttribute {
                token: "mood".into(),
                offset: text.find("mood").unwrap()
            }
        );
        // Values are exact-case.
        let text = DEFAULT_PROHIBITION.replace("CAFE", "Cafe");
        assert_eq!(
            parse_norm(&text).unwrap_err(),
            ListingError::UnknownValue {
                token: "Cafe".into(),
                offset: text.find("Cafe").unwrap()
            }
        );
        // In the value set of another attribute but not this one.
        let text = DEFAULT_PROHIBITION.replace("MILD", "ASYMPTOMATIC");
        assert!(matches!(
            parse_norm(&text).unwrap_err(),
            ListingError::UnknownValue { .. }
        ));
    }

    #[test]
    fn duplicate_attribute_in_set() {
        let text =
            DEFAULT_PROHIBITION.replace("{loc=[PARK, CAFE, CLINIC]}", "{loc=PARK; loc=CAFE}");
        assert!(matches!(
            parse_norm(&text).unwrap_err(),
            ListingError::DuplicateKey { ref key, .. } if key == "loc"
        ));
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "norm type = Prohibition",
            "norm type = {Prohibition",
            "norm type = {Prohibition} subject = {A}",
            "= {Prohibition}",
            "norm type = {Prohibition} #",
            &DEFAULT_PROHIBITION.replace("{Infected_Agent}", "{}"),
        ] {
            assert!(
                matches!(parse_norm(bad), Err(ListingError::Syntax { .. })),
                "{bad}"
            );
        }
        let err = parse_norm("norm type = {Prohibition} #").unwrap_err();
        assert_eq!(err.offset(), 26);
    }

    #[test]
    fn parses_message() {
        let info = parse_normative_info(MESSAGE).unwrap();
        assert_eq!(info.sender, Party::Label("Observer_Agent".into()));
        assert_eq!(info.receiver, Party::Label("Actor_Agent".into()));
        assert_eq!(info.info_type, InfoType::Message);
        assert_eq!(
            info.antecedent,
            set(&[
                (Attribute::ObsHealth, &[Value::Critical]),
                (Attribute::Loc, &[Value::Cafe])
            ])
        );
        assert_eq!(info.consequent, InfoConsequent::Punishment);
    }

    #[test]
    fn parses_hint_variant() {
        let info = parse_normative_info(&MESSAGE.replace("MESSAGE", "HINT")).unwrap();
        assert_eq!(info.info_type, InfoType::Hint);
    }

    #[test]
    fn message_without_receiver() {
        let text = MESSAGE.replace("receiver   = {Actor_Agent},\n", "");
        assert!(matches!(
            parse_normative_info(&text).unwrap_err(),
            ListingError::MissingKey { ref key, .. } if key == "receiver"
        ));
    }

    #[test]
    fn message_sender_must_differ_from_receiver() {
        let text = MESSAGE.replace("Actor_Agent", "Observer_Agent");
        assert!(matches!(
            parse_normative_info(&text),
            Err(ListingError::Syntax { .. })
        ));
        let text = MESSAGE
            .replace("Observer_Agent", "7")
            .replace("Actor_Agent", "8");
        let info = parse_normative_info(&text).unwrap();
        assert_eq!(info.sender, Party::Agent(7));
    }

    #[test]
    fn canonical_form_round_trips() {
        for text in [DEFAULT_PROHIBITION, DEFAULT_COMMITMENT, VACCINATION] {
            let norm = parse_norm(text).unwrap();
            assert_eq!(parse_norm(&norm.to_string()).unwrap(), norm);
        }
        let info = parse_normative_info(MESSAGE).unwrap();
        assert_eq!(parse_normative_info(&info.to_string()).unwrap(), info);
    }

    #[test]
    fn file_of_blocks() {
        let file = format!("{DEFAULT_PROHIBITION}\n\n   \n{VACCINATION}\n");
        let norms = parse_norm_file(&file).unwrap();
        assert_eq!(norms.len(), 2);
        assert_eq!(norms[1].subject.as_str(), "Alive_Agent");

        let bad = format!(
            "{DEFAULT_PROHIBITION}\n{}",
            VACCINATION.replace("CLINIC", "MOON")
        );
        let err = parse_norm_file(&bad).unwrap_err();
        assert_eq!(err.offset(), bad.find("MOON").unwrap());
    }
}
