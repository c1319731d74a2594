//! Rule-based sentiment for short, possibly bilingual messages.
//!
//! The flow: fold diacritics and tokenize keeping emoticons intact, guess the
//! language from lexicon hits, send anything unrecognized through the
//! translation hook, then score tokens against the language lexicon plus the
//! shared emoticon table. Negations flip and damp a term, boosters add a fixed
//! increment, a contrastive conjunction shifts weight to the clause after it,
//! and the sum is squashed to `[-1, 1]`.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::simworld::{Language, Sentiment, Valence};

/// Compound score threshold for the positive/negative classes.
pub const CLASS_THRESHOLD: f64 = 0.05;

const NORMALIZATION_ALPHA: f64 = 15.0;
const NEGATION_SCALAR: f64 = -0.74;
const BOOSTER_INCREMENT: f64 = 0.293;
const EXCLAMATION_INCREMENT: f64 = 0.292;

const EN_LEXICON: &str = include_str!("lexicon/en.txt");
const PT_LEXICON: &str = include_str!("lexicon/pt.txt");
const EMOTICONS: &str = include_str!("lexicon/emoticons.txt");

const EN_FUNCTION_WORDS: &[&str] = &[
    "i", "you", "he", "she", "we", "they", "it", "me", "my", "your", "our", "the", "a", "an",
    "this", "that", "is", "are", "was", "were", "be", "am", "and", "or", "but", "of", "to", "in",
    "on", "at", "for", "with", "so", "very", "really", "what", "day", "today", "now", "again",
    "all", "at", "home", "way", "not", "no", "ever", "time", "then", "back", "need", "buy",
    "call", "later", "going", "leaves", "news", "reading", "meeting", "office", "lunch",
];
const PT_FUNCTION_WORDS: &[&str] = &[
    "eu", "tu", "ele", "ela", "nos", "eles", "o", "a", "os", "as", "um", "uma", "este", "esta",
    "isto", "esse", "e", "ou", "mas", "de", "do", "da", "dos", "das", "em", "no", "na", "com",
    "para", "por", "que", "muito", "estou", "esta", "sao", "hoje", "dia", "agora", "outra",
    "vez", "sempre", "nada", "tudo", "vou", "casa", "trabalho", "reuniao", "depois", "almoco",
    "preciso", "comprar", "mais", "logo", "caminho", "comboio", "autocarro", "noticias",
    "noticia", "pelo", "desta", "fim", "semana", "sinto-me", "noite", "as", "tres", "seis",
    "chegou", "escritorio", "volto", "pao", "liga-me", "ler", "sai", "jantar", "passeio",
    "praia", "musica", "finalmente", "nao", "sem",
];
const NEGATORS: &[&str] = &[
    "not", "no", "never", "nothing", "don't", "dont", "isn't", "isnt", "wasn't", "can't",
    "cannot", "won't", "nao", "nunca", "nem", "jamais", "nenhum",
];
const BOOSTERS: &[&str] = &[
    "very", "so", "really", "extremely", "totally", "super", "muito", "tao", "bastante",
    "imenso", "demasiado", "mesmo",
];
const CONTRASTIVE: &[&str] = &["but", "mas", "porem", "contudo"];

struct Lexicons {
    en: HashMap<String, f64>,
    pt: HashMap<String, f64>,
    emoticons: HashMap<String, f64>,
    en_words: HashSet<&'static str>,
    pt_words: HashSet<&'static str>,
}

fn parse_table(text: &str, fold: bool) -> HashMap<String, f64> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let (word, value) = l.split_once('\t')?;
            let key = if fold { fold_diacritics(&word.to_lowercase()) } else { word.to_owned() };
            Some((key, value.trim().parse().ok()?))
        })
        .collect()
}

fn lexicons() -> &'static Lexicons {
    static LEX: OnceLock<Lexicons> = OnceLock::new();
    LEX.get_or_init(|| Lexicons {
        en: parse_table(EN_LEXICON, true),
        pt: parse_table(PT_LEXICON, true),
        emoticons: parse_table(EMOTICONS, false),
        en_words: EN_FUNCTION_WORDS.iter().copied().collect(),
        pt_words: PT_FUNCTION_WORDS.iter().copied().collect(),
    })
}

/// Number of entries in the bundled (English, Portuguese, emoticon) tables.
pub fn lexicon_sizes() -> (usize, usize, usize) {
    let lex = lexicons();
    (lex.en.len(), lex.pt.len(), lex.emoticons.len())
}

/// Replace Latin diacritics with their base letter.
pub fn fold_diacritics(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            'á' | 'à' | 'â' | 'ã' | 'ä' => 'a',
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'í' | 'ì' | 'î' | 'ï' => 'i',
            'ó' | 'ò' | 'ô' | 'õ' | 'ö' => 'o',
            'ú' | 'ù' | 'û' | 'ü' => 'u',
            'ç' => 'c',
            'ñ' => 'n',
            other => other,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Emoticon(f64),
}

fn tokenize(text: &str) -> (Vec<Token>, usize) {
    let lex = lexicons();
    let mut tokens = Vec::new();
    let mut exclamations = 0;
    for raw in text.split_whitespace() {
        exclamations += raw.matches('!').count();
        if let Some(v) = lex.emoticons.get(raw) {
            tokens.push(Token::Emoticon(*v));
            continue;
        }
        let word: String = fold_diacritics(&raw.to_lowercase())
            .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
            .to_owned();
        if let Some(v) = lex.emoticons.get(word.as_str()) {
            tokens.push(Token::Emoticon(*v));
        } else if !word.is_empty() {
            tokens.push(Token::Word(word));
        }
    }
    (tokens, exclamations)
}

/// Pick a language by lexicon-hit count; no hits at all means unknown.
fn detect_language(tokens: &[Token]) -> Language {
    let lex = lexicons();
    let (mut en, mut pt) = (0usize, 0usize);
    for t in tokens {
        if let Token::Word(w) = t {
            if lex.en.contains_key(w) || lex.en_words.contains(w.as_str()) {
                en += 1;
            }
            if lex.pt.contains_key(w) || lex.pt_words.contains(w.as_str()) {
                pt += 1;
            }
        }
    }
    match (en, pt) {
        (0, 0) => Language::Unknown,
        (e, p) if p > e => Language::Pt,
        _ => Language::En,
    }
}

/// Stand-in for an external translation service; returns its input.
pub fn translate_stub(text: &str, _from: Language, _to: Language) -> String {
    text.to_owned()
}

/// Score `text` and classify it with [`CLASS_THRESHOLD`].
///
/// Empty or whitespace-only text yields `(Unknown, 0.0, Neutral)`.
pub fn analyze_sentiment(text: &str) -> Sentiment {
    let neutral = Sentiment {
        language: Language::Unknown,
        score: 0.0,
        class: Valence::Neutral,
    };
    if text.trim().is_empty() {
        return neutral;
    }
    let (tokens, exclamations) = tokenize(text);
    let language = detect_language(&tokens);
    let (tokens, exclamations) = if language == Language::Unknown {
        tokenize(&translate_stub(text, Language::Unknown, Language::En))
    } else {
        (tokens, exclamations)
    };

    let lex = lexicons();
    let lookup = |w: &str| -> Option<f64> {
        match language {
            Language::En => lex.en.get(w).copied(),
            Language::Pt => lex.pt.get(w).copied(),
            Language::Unknown => lex.en.get(w).or_else(|| lex.pt.get(w)).copied(),
        }
    };

    let mut scores: Vec<f64> = Vec::with_capacity(tokens.len());
    let mut contrast_at: Option<usize> = None;
    for (i, token) in tokens.iter().enumerate() {
        let value = match token {
            Token::Emoticon(v) => *v,
            Token::Word(w) => {
                if CONTRASTIVE.contains(&w.as_str()) {
                    contrast_at = Some(scores.len());
                }
                let Some(mut v) = lookup(w) else {
                    scores.push(0.0);
                    continue;
                };
                if i > 0 {
                    if let Token::Word(prev) = &tokens[i - 1] {
                        if BOOSTERS.contains(&prev.as_str()) {
                            v += BOOSTER_INCREMENT * v.signum();
                        }
                    }
                }
                let negated = tokens[i.saturating_sub(3)..i]
                    .iter()
                    .any(|t| matches!(t, Token::Word(p) if NEGATORS.contains(&p.as_str())));
                if negated {
                    v *= NEGATION_SCALAR;
                }
                v
            }
        };
        scores.push(value);
    }
    if let Some(split) = contrast_at {
        for (i, s) in scores.iter_mut().enumerate() {
            *s *= if i < split { 0.5 } else { 1.5 };
        }
    }
    let mut sum: f64 = scores.iter().sum();
    if sum != 0.0 {
        sum += (exclamations.min(4) as f64) * EXCLAMATION_INCREMENT * sum.signum();
    }
    let score = if sum == 0.0 {
        0.0
    } else {
        (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
    };
    let class = if score >= CLASS_THRESHOLD {
        Valence::Positive
    } else if score <= -CLASS_THRESHOLD {
        Valence::Negative
    } else {
        Valence::Neutral
    };
    Sentiment {
        language,
        score,
        class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::phrases;

    /// Independent scorer: raw lexicon sum with no modifiers, squashed.
    fn naive_score(text: &str, table: &str) -> f64 {
        let lex = parse_table(table, true);
        let emo = parse_table(EMOTICONS, false);
        let sum: f64 = text
            .split_whitespace()
            .map(|raw| {
                emo.get(raw).copied().unwrap_or_else(|| {
                    let w = fold_diacritics(&raw.to_lowercase());
                    let w = w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-');
                    lex.get(w).copied().unwrap_or(0.0)
                })
            })
            .sum();
        sum / (sum * sum + 15.0).sqrt()
    }

    #[test]
    fn english_with_emoticon() {
        let s = analyze_sentiment("I love this :)");
        assert_eq!(s.language, Language::En);
        assert_eq!(s.class, Valence::Positive);
        // no negation, booster or contrast, so the naive oracle agrees exactly
        assert!((s.score - naive_score("I love this :)", EN_LEXICON)).abs() < 1e-12);
        assert!(s.score > 0.0);
    }

    #[test]
    fn portuguese_positive() {
        let s = analyze_sentiment("adoro este dia");
        assert_eq!(s.language, Language::Pt);
        assert!((s.score - naive_score("adoro este dia", PT_LEXICON)).abs() < 1e-12);
        assert_eq!(s.class, Valence::Positive);
    }

    #[test]
    fn empty_is_neutral() {
        let s = analyze_sentiment("");
        assert_eq!(s.language, Language::Unknown);
        assert_eq!(s.score, 0.0);
        assert_eq!(s.class, Valence::Neutral);
        assert_eq!(analyze_sentiment("   ").class, Valence::Neutral);
    }

    #[test]
    fn negation_flips_polarity() {
        assert_eq!(analyze_sentiment("happy").class, Valence::Positive);
        assert_eq!(analyze_sentiment("not happy").class, Valence::Negative);
        assert_eq!(analyze_sentiment("não estou contente").class, Valence::Negative);
    }

    #[test]
    fn contrast_weights_second_clause() {
        let s = analyze_sentiment("the food was good but the service was terrible");
        assert_eq!(s.class, Valence::Negative);
    }

    #[test]
    fn unknown_language_goes_through_translation_hook() {
        let s = analyze_sentiment("zzz qqq");
        assert_eq!(s.language, Language::Unknown);
        assert_eq!(s.class, Valence::Neutral);
        let s = analyze_sentiment(":D :D");
        assert_eq!(s.class, Valence::Positive);
    }

    #[test]
    fn lexicons_are_desk_sized() {
        let (en, pt, emo) = lexicon_sizes();
        assert!(en >= 190 && pt >= 190, "en={en} pt={pt}");
        assert!(emo >= 20);
    }

    #[test]
    fn phrase_bank_is_classified_as_written() {
        let mut agree = 0;
        let mut total = 0;
        for lang in [Language::En, Language::Pt] {
            for v in Valence::ALL {
                for p in phrases(lang, v) {
                    let s = analyze_sentiment(p);
                    total += 1;
                    if s.class == v {
                        agree += 1;
                    }
                    assert_eq!(s.language, lang, "{p}");
                }
            }
        }
        assert!(agree as f64 / total as f64 > 0.9, "{agree}/{total}");
    }
}
