//! Short message templates the synthetic humans write, per language and valence.

use super::types::{Language, Valence};

const EN_POSITIVE: &[&str] = &[
    "I love this day :)",
    "feeling great today",
    "what a wonderful morning",
    "so happy with the team :D",
    "nice walk in the park, really good",
    "best coffee ever <3",
    "had a lovely dinner with friends",
    "excited about the weekend!",
    "thank you all, awesome support",
    "good news at last :)",
    "enjoying the sun, amazing",
    "proud of what we did today",
];
const EN_NEUTRAL: &[&str] = &[
    "on my way home",
    "meeting at three",
    "bus is on time",
    "reading the news",
    "lunch then back to the office",
    "need to buy milk",
    "the report is in the folder",
    "call me later",
    "going to the store",
    "train leaves at six",
];
const EN_NEGATIVE: &[&str] = &[
    "I hate this traffic :(",
    "feeling sad and tired",
    "worst day ever",
    "so angry right now",
    "this is terrible, nothing works",
    "bad news again :(",
    "stressed and exhausted",
    "the meeting was awful",
    "not happy with this at all",
    "lonely night, miss you",
    "sick and bored",
    "annoying problem, so frustrating",
];
const PT_POSITIVE: &[&str] = &[
    "adoro este dia",
    "estou muito feliz hoje :)",
    "que dia lindo",
    "jantar maravilhoso com amigos",
    "obrigado pelo apoio, excelente",
    "adorei o passeio na praia",
    "boa notícia finalmente :D",
    "gosto muito desta música",
    "fim de semana fantástico",
    "estou contente com o trabalho",
    "um abraço forte, amo-vos <3",
    "tudo bem, dia perfeito",
];
const PT_NEUTRAL: &[&str] = &[
    "vou para casa",
    "reunião às três",
    "o autocarro chegou",
    "estou no escritório",
    "depois do almoço volto",
    "preciso de comprar pão",
    "liga-me mais logo",
    "o comboio sai às seis",
    "a caminho do trabalho",
    "ler as notícias",
];
const PT_NEGATIVE: &[&str] = &[
    "odeio este transito :(",
    "estou triste e cansado",
    "pior dia de sempre",
    "que raiva hoje",
    "isto é horrível, nada funciona",
    "péssimas notícias outra vez",
    "muito stress, estou exausto",
    "a reunião foi péssima",
    "não estou nada contente",
    "sinto-me sozinho esta noite",
    "doente e aborrecido",
    "problema chato, que frustrante",
];

pub fn phrases(language: Language, valence: Valence) -> &'static [&'static str] {
    match (language, valence) {
        (Language::Pt, Valence::Positive) => PT_POSITIVE,
        (Language::Pt, Valence::Neutral) => PT_NEUTRAL,
        (Language::Pt, Valence::Negative) => PT_NEGATIVE,
        (_, Valence::Positive) => EN_POSITIVE,
        (_, Valence::Neutral) => EN_NEUTRAL,
        (_, Valence::Negative) => EN_NEGATIVE,
    }
}
