//! Intent actions, their template verbalization, the closed vocabulary, and the follower-side
//! parser that maps utterances back to intents.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Area, Board, Color, Coord, PieceId, PieceSymbol, Shape};
use crate::error::{Error, Result};
use crate::refexp::{incremental_algorithm, PreferenceOrder, PropertySet};

/// Maximum number of vocabulary tokens in one utterance.
pub const MAX_UTTERANCE_LEN: usize = 12;

pub const SPECIAL_WORDS: [&str; 4] = ["<s>", "<e>", "<pad>", "<unk>"];
pub const TEMPLATE_WORDS: [&str; 12] =
    ["take", "the", "piece", "at", "yes", "no", "this", "way", "go", "a", "bit", "more"];
pub const POSITION_WORDS: [&str; 6] = ["left", "right", "top", "bottom", "up", "down"];

pub const UNK: &str = "<unk>";

/// All 37 vocabulary entries in index order: specials, template words, shapes, colors,
/// position words.
pub fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = Vec::with_capacity(37);
    v.extend(SPECIAL_WORDS);
    v.extend(TEMPLATE_WORDS);
    v.extend(Shape::ALL.iter().map(|s| s.label()));
    v.extend(Color::ALL.iter().map(|c| c.label()));
    v.extend(POSITION_WORDS);
    v
}

/// Token to index map, serialized in index order.
pub fn vocabulary_index() -> serde_json::Map<String, serde_json::Value> {
    vocabulary().into_iter().enumerate().map(|(i, w)| (w.to_string(), serde_json::Value::from(i))).collect()
}

pub fn in_vocabulary(word: &str) -> bool {
    vocabulary().contains(&word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directive {
    Left,
    Right,
    Up,
    Down,
    Take,
}

impl Directive {
    pub const ALL: [Directive; 5] =
        [Directive::Left, Directive::Right, Directive::Up, Directive::Down, Directive::Take];

    pub fn word(self) -> &'static str {
        match self {
            Directive::Left => "left",
            Directive::Right => "right",
            Directive::Up => "up",
            Directive::Down => "down",
            Directive::Take => "take",
        }
    }
}

/// The five intent categories. Letters follow the usual table abbreviations: silence (S),
/// confirm (C), decline (D), directive (O), reference (R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentKind {
    Silence,
    Confirm,
    Decline,
    Directive,
    Reference,
}

impl IntentKind {
    pub const ALL: [IntentKind; 5] =
        [IntentKind::Silence, IntentKind::Confirm, IntentKind::Decline, IntentKind::Directive, IntentKind::Reference];

    pub fn letter(self) -> char {
        match self {
            IntentKind::Silence => 'S',
            IntentKind::Confirm => 'C',
            IntentKind::Decline => 'D',
            IntentKind::Directive => 'O',
            IntentKind::Reference => 'R',
        }
    }
}

/// One of the guide's 14 discrete actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "intent", content = "arg")]
pub enum IntentAction {
    Silence,
    Confirm,
    Decline,
    Directive(Directive),
    Reference(PreferenceOrder),
}

impl IntentAction {
    pub const COUNT: usize = 14;

    /// Stable action-space encoding: 0 silence, 1 confirm, 2 decline, 3..=7 directives
    /// (left, right, up, down, take), 8..=13 references (PCS, PSC, SPC, CPS, SCP, CSP).
    pub fn id(self) -> usize {
        match self {
            IntentAction::Silence => 0,
            IntentAction::Confirm => 1,
            IntentAction::Decline => 2,
            IntentAction::Directive(d) => 3 + Directive::ALL.iter().position(|x| *x == d).unwrap(),
            IntentAction::Reference(o) => 8 + PreferenceOrder::ALL.iter().position(|x| *x == o).unwrap(),
        }
    }

    pub fn from_id(id: usize) -> Result<IntentAction> {
        Ok(match id {
            0 => IntentAction::Silence,
            1 => IntentAction::Confirm,
            2 => IntentAction::Decline,
            3..=7 => IntentAction::Directive(Directive::ALL[id - 3]),
            8..=13 => IntentAction::Reference(PreferenceOrder::ALL[id - 8]),
            _ => return Err(Error::UnknownAction(id)),
        })
    }

    pub fn all() -> impl Iterator<Item = IntentAction> {
        (0..Self::COUNT).map(|i| Self::from_id(i).expect("id in range"))
    }

    pub fn kind(self) -> IntentKind {
        match self {
            IntentAction::Silence => IntentKind::Silence,
            IntentAction::Confirm => IntentKind::Confirm,
            IntentAction::Decline => IntentKind::Decline,
            IntentAction::Directive(_) => IntentKind::Directive,
            IntentAction::Reference(_) => IntentKind::Reference,
        }
    }
}

impl fmt::Display for IntentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntentAction::Silence => f.write_str("silence"),
            IntentAction::Confirm => f.write_str("confirm"),
            IntentAction::Decline => f.write_str("decline"),
            IntentAction::Directive(d) => write!(f, "directive:{}", d.word()),
            IntentAction::Reference(o) => write!(f, "reference:{o}"),
        }
    }
}

impl FromStr for IntentAction {
    type Err = Error;

    /// Accepts `silence`, `confirm`, `decline`, `directive:<dir>`, `reference:<PO>` (bare
    /// `reference` means CSP) or a numeric action id.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(id) = s.parse::<usize>() {
            return IntentAction::from_id(id);
        }
        let lower = s.to_ascii_lowercase();
        let (head, arg) = lower.split_once(':').map_or((lower.as_str(), None), |(h, a)| (h, Some(a)));
        match (head, arg) {
            ("silence", None) => Ok(IntentAction::Silence),
            ("confirm", None) => Ok(IntentAction::Confirm),
            ("decline", None) => Ok(IntentAction::Decline),
            ("directive", Some(a)) => Directive::ALL
                .into_iter()
                .find(|d| d.word() == a)
                .map(IntentAction::Directive)
                .ok_or_else(|| Error::Parse(format!("unknown directive '{a}'"))),
            ("reference", Some(a)) => a.parse().map(IntentAction::Reference),
            ("reference", None) => Ok(IntentAction::Reference(PreferenceOrder::CSP)),
            _ => Err(Error::Parse(format!("unknown intent '{s}'"))),
        }
    }
}

/// A verbalized intent: vocabulary tokens plus the surface string.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub surface: String,
}

impl Utterance {
    pub fn from_surface(surface: impl Into<String>) -> Utterance {
        let surface = surface.into();
        let tokens = vocabulary_words(&surface);
        Utterance { tokens, surface }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// What the verbalizer needs to know about the current episode state.
#[derive(Debug, Clone, Copy)]
pub struct VerbalContext<'a> {
    pub board: &'a Board,
    pub gripper: Coord,
    pub target_id: PieceId,
}

fn piece_phrase(ctx: &VerbalContext<'_>) -> Option<String> {
    ctx.board.piece_at(ctx.gripper).map(|p| format!("{} {}", p.symbol.color, p.symbol.shape))
}

/// Surface form of a referring expression for the selected property values.
pub fn realize_reference(props: &PropertySet) -> String {
    let at = |a: Area| a.words().join(" ");
    match (props.color, props.shape, props.area) {
        (Some(c), None, None) => format!("Take the {c} piece"),
        (None, Some(s), None) => format!("Take the {s}"),
        (None, None, Some(a)) => format!("Take the piece at {}", at(a)),
        (Some(c), Some(s), None) => format!("Take the {c} {s}"),
        (Some(c), None, Some(a)) => format!("Take the {c} piece at {}", at(a)),
        (None, Some(s), Some(a)) => format!("Take the {s} at {}", at(a)),
        (Some(c), Some(s), Some(a)) => format!("Take the {c} {s} at {}", at(a)),
        (None, None, None) => "Take the piece".to_string(),
    }
}

/// Properties the referring expression for `target_id` mentions under `order`.
pub fn reference_properties(board: &Board, target_id: PieceId, order: PreferenceOrder) -> Result<PropertySet> {
    let target = board.piece(target_id)?;
    let distractors: Vec<PieceSymbol> = board.pieces().iter().filter(|p| p.id != target_id).map(|p| p.symbol).collect();
    let mut props = incremental_algorithm(&target.symbol, &distractors, order);
    if props.is_empty() {
        // only identical distractors remain; fall back to the first preferred property
        props = incremental_algorithm(&target.symbol, &[], order);
    }
    Ok(props)
}

/// Template verbalization of an intent in the given context.
pub fn verbalize(intent: IntentAction, ctx: &VerbalContext<'_>) -> Result<Utterance> {
    let surface = match intent {
        IntentAction::Silence => String::new(),
        IntentAction::Confirm => format!("Yes this {}", piece_phrase(ctx).unwrap_or_else(|| "way".into())),
        IntentAction::Decline => format!("Not this {}", piece_phrase(ctx).unwrap_or_else(|| "way".into())),
        IntentAction::Directive(Directive::Take) => {
            format!("Take {}", piece_phrase(ctx).unwrap_or_else(|| "piece".into()))
        }
        IntentAction::Directive(d) => format!("Go {}", d.word()),
        IntentAction::Reference(order) => realize_reference(&reference_properties(ctx.board, ctx.target_id, order)?),
    };
    Ok(Utterance::from_surface(surface))
}

/// Token after tokenization. Two-word positions such as "top left" are merged into one
/// [`Token::Position`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Word(&'static str),
    Shape(Shape),
    Color(Color),
    Position(Area),
    Unknown,
}

fn lookup(raw: &str) -> Option<&'static str> {
    let lower = raw.to_ascii_lowercase();
    let lower = if lower == "not" { "no".to_string() } else { lower };
    vocabulary().into_iter().find(|w| {
        if w.len() == 1 && w.chars().all(|c| c.is_ascii_uppercase()) {
            w.eq_ignore_ascii_case(&lower)
        } else {
            *w == lower
        }
    })
}

/// Splits on whitespace and maps each word onto the vocabulary ("not" is read as "no",
/// unknown words become `<unk>`).
pub fn vocabulary_words(surface: &str) -> Vec<String> {
    surface.split_whitespace().map(|w| lookup(w).unwrap_or(UNK).to_string()).collect()
}

fn single_area(word: &str) -> Option<Area> {
    match word {
        "left" => Some(Area::Left),
        "right" => Some(Area::Right),
        "top" => Some(Area::Top),
        "bottom" => Some(Area::Bottom),
        _ => None,
    }
}

fn merged_area(first: &str, second: &str) -> Option<Area> {
    match (first, second) {
        ("top", "left") => Some(Area::TopLeft),
        ("top", "right") => Some(Area::TopRight),
        ("bottom", "left") => Some(Area::BottomLeft),
        ("bottom", "right") => Some(Area::BottomRight),
        _ => None,
    }
}

pub fn tokenize(surface: &str) -> Vec<Token> {
    let words: Vec<Option<&'static str>> = surface.split_whitespace().map(lookup).collect();
    let mut out = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let Some(w) = words[i] else {
            out.push(Token::Unknown);
            i += 1;
            continue;
        };
        if let Some(area) = words.get(i + 1).copied().flatten().and_then(|next| merged_area(w, next)) {
            out.push(Token::Position(area));
            i += 2;
            continue;
        }
        let tok = if let Some(a) = single_area(w) {
            Token::Position(a)
        } else if let Some(&s) = Shape::ALL.iter().find(|s| s.label() == w) {
            Token::Shape(s)
        } else if let Some(&c) = Color::ALL.iter().find(|c| c.label() == w) {
            Token::Color(c)
        } else if w == UNK {
            Token::Unknown
        } else {
            Token::Word(w)
        };
        out.push(tok);
        i += 1;
    }
    out
}

/// Intent recovered by the follower from an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ParsedIntent {
    /// Empty utterance, or one that could not be understood (`malformed`).
    Silence {
        malformed: bool,
    },
    Confirm,
    Decline,
    Directive {
        directive: Directive,
    },
    Reference {
        descriptor: PropertySet,
    },
}

impl ParsedIntent {
    pub fn kind(&self) -> IntentKind {
        match self {
            ParsedIntent::Silence { .. } => IntentKind::Silence,
            ParsedIntent::Confirm => IntentKind::Confirm,
            ParsedIntent::Decline => IntentKind::Decline,
            ParsedIntent::Directive { .. } => IntentKind::Directive,
            ParsedIntent::Reference { .. } => IntentKind::Reference,
        }
    }
}

fn descriptor_from(tokens: &[Token]) -> PropertySet {
    let mut d = PropertySet::default();
    for t in tokens {
        match *t {
            Token::Color(c) => d.color = Some(c),
            Token::Shape(s) => d.shape = Some(s),
            Token::Position(a) => d.area = Some(a),
            _ => {}
        }
    }
    d
}

pub fn parse(utterance: &Utterance) -> ParsedIntent {
    parse_surface(&utterance.surface)
}

pub fn parse_surface(surface: &str) -> ParsedIntent {
    let tokens = tokenize(surface);
    let malformed = ParsedIntent::Silence { malformed: true };
    match tokens.as_slice() {
        [] => ParsedIntent::Silence { malformed: false },
        [Token::Word("yes"), ..] => ParsedIntent::Confirm,
        [Token::Word("no"), ..] => ParsedIntent::Decline,
        [Token::Word("go"), rest @ ..] => {
            let directive = match rest.first() {
                Some(Token::Position(Area::Left)) => Directive::Left,
                Some(Token::Position(Area::Right)) => Directive::Right,
                Some(Token::Word("up")) => Directive::Up,
                Some(Token::Word("down")) => Directive::Down,
                _ => return malformed,
            };
            ParsedIntent::Directive { directive }
        }
        [Token::Word("take"), Token::Word("the"), rest @ ..] => {
            ParsedIntent::Reference { descriptor: descriptor_from(rest) }
        }
        [Token::Word("take"), ..] => ParsedIntent::Directive { directive: Directive::Take },
        _ => malformed,
    }
}
