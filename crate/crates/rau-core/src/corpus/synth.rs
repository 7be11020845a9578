//! Template-grammar generator for desk-scale training corpora.
//!
//! Every generated triple differs from its incomplete utterance by one
//! Substitute span (a pronoun standing in for a context name) and/or one
//! Insert span (a context item phrase omitted from the utterance), with the
//! span text present verbatim and exactly once in the context. Each
//! candidate is checked through the labeler and editor before being emitted,
//! so the corpus round-trips by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DialogueExample;
use crate::editor;
use crate::labeler;

const FIRST_NAMES: &[&str] = &[
    "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy", "kevin",
    "laura",
];
const LAST_NAMES: &[&str] = &["stone", "rivers", "woods", "banks"];
const PRONOUNS: &[&str] = &["she", "he", "they"];
const VERBS: &[&str] = &["likes", "collects", "draws", "paints", "repairs", "studies"];
const ADJECTIVES: &[&str] = &[
    "red", "old", "tiny", "spicy", "wooden", "broken", "shiny", "quiet",
];
const NOUNS: &[&str] = &[
    "kites", "maps", "drums", "roses", "comics", "puzzles", "lanterns", "posters", "marbles",
    "stamps", "kettles", "banjos",
];
const TIMES: &[&str] = &["yesterday", "recently", "today", "often"];
const FILLER_TURNS: &[&str] = &[
    "nice to hear",
    "how curious indeed",
    "quite impressive really",
    "sounds lovely",
];

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn name<R: Rng>(rng: &mut R) -> Vec<String> {
    let mut tokens = vec![pick(rng, FIRST_NAMES).to_string()];
    if rng.random_range(0..3) == 0 {
        tokens.push(pick(rng, LAST_NAMES).to_string());
    }
    tokens
}

fn item<R: Rng>(rng: &mut R) -> Vec<String> {
    let mut tokens = Vec::new();
    if rng.random_range(0..2) == 0 {
        tokens.push(pick(rng, ADJECTIVES).to_string());
    }
    tokens.push(pick(rng, NOUNS).to_string());
    tokens
}

fn disjoint(a: &[String], b: &[String]) -> bool {
    a.iter().all(|t| !b.contains(t))
}

/// Incomplete-utterance skeleton with the pronoun slot position.
fn pronoun_skeleton<R: Rng>(
    rng: &mut R,
    pronoun: &str,
    verb: &str,
    item_tokens: &[String],
) -> (Vec<String>, usize) {
    let mut x: Vec<String>;
    let pron_pos;
    match rng.random_range(0..3) {
        0 => {
            x = vec!["why".into(), "does".into(), pronoun.into(), verb.into()];
            pron_pos = 2;
            x.extend(item_tokens.iter().cloned());
        }
        1 => {
            x = vec!["so".into(), pronoun.into(), verb.into()];
            pron_pos = 1;
            x.extend(item_tokens.iter().cloned());
            x.push("again".into());
        }
        _ => {
            x = vec![pronoun.into(), verb.into()];
            pron_pos = 0;
            x.extend(item_tokens.iter().cloned());
            x.push("now".into());
        }
    }
    (x, pron_pos)
}

fn insert_skeleton<R: Rng>(rng: &mut R) -> Vec<String> {
    let options: &[&[&str]] = &[
        &["why", "buy", "them", "again"],
        &["should", "we", "try", "once", "more"],
        &["when", "did", "you", "see", "them"],
        &["can", "we", "swap", "ours"],
    ];
    options[rng.random_range(0..options.len())]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn build_context<R: Rng>(rng: &mut R, main_turn: Vec<String>) -> Vec<Vec<String>> {
    let filler: Vec<String> = pick(rng, FILLER_TURNS)
        .split_whitespace()
        .map(str::to_string)
        .collect();
    match rng.random_range(0..4) {
        0 => vec![main_turn],
        1 => vec![filler, main_turn],
        _ => vec![main_turn, filler],
    }
}

fn candidate<R: Rng>(rng: &mut R) -> DialogueExample {
    let name_tokens = name(rng);
    let verb = pick(rng, VERBS).to_string();
    let item1 = item(rng);

    let mut main_turn = Vec::new();
    if rng.random_range(0..3) == 0 {
        main_turn.push(pick(rng, TIMES).to_string());
    }
    main_turn.extend(name_tokens.iter().cloned());
    main_turn.push(verb.clone());
    main_turn.extend(item1.iter().cloned());

    match rng.random_range(0..3) {
        // Substitute only: pronoun stands in for the name.
        0 => {
            let pronoun = pick(rng, PRONOUNS);
            let (x, pron_pos) = pronoun_skeleton(rng, pronoun, &verb, &item1);
            let mut reference = x.clone();
            reference.splice(pron_pos..pron_pos + 1, name_tokens.iter().cloned());
            DialogueExample {
                context_turns: build_context(rng, main_turn),
                incomplete: x,
                reference: Some(reference),
            }
        }
        // Insert only: the item phrase is omitted from the utterance.
        1 => {
            let x = insert_skeleton(rng);
            let anchor = rng.random_range(0..x.len());
            let mut reference = x.clone();
            reference.splice(anchor..anchor, item1.iter().cloned());
            DialogueExample {
                context_turns: build_context(rng, main_turn),
                incomplete: x,
                reference: Some(reference),
            }
        }
        // Both: pronoun substitution plus an omitted second item.
        _ => {
            let mut item2 = item(rng);
            while !disjoint(&item2, &item1) {
                item2 = item(rng);
            }
            let pronoun = pick(rng, PRONOUNS);
            let (x, pron_pos) = pronoun_skeleton(rng, pronoun, &verb, &item1);
            let anchors: Vec<usize> = (0..x.len())
                .filter(|&k| k != pron_pos && k != pron_pos + 1)
                .collect();
            let anchor = anchors[rng.random_range(0..anchors.len())];
            let mut reference = x.clone();
            // Apply right-to-left so indices stay valid.
            if anchor > pron_pos {
                reference.splice(anchor..anchor, item2.iter().cloned());
                reference.splice(pron_pos..pron_pos + 1, name_tokens.iter().cloned());
            } else {
                reference.splice(pron_pos..pron_pos + 1, name_tokens.iter().cloned());
                reference.splice(anchor..anchor, item2.iter().cloned());
            }

            let mut second_turn = vec!["and".to_string(), "also".to_string()];
            second_turn.extend(item2.iter().cloned());
            let mut turns = build_context(rng, main_turn);
            turns.push(second_turn);
            DialogueExample {
                context_turns: turns,
                incomplete: x,
                reference: Some(reference),
            }
        }
    }
}

fn round_trips(ex: &DialogueExample) -> bool {
    let context = ex.context_tokens();
    let reference = ex.reference.as_ref().expect("synthetic triples carry references");
    let (em, stats) = labeler::label(&context, &ex.incomplete, reference);
    if stats.dropped_spans != 0 || stats.conflicts != 0 {
        return false;
    }
    match editor::apply(&context, &ex.incomplete, &em) {
        Ok(out) => out.skipped_groups == 0 && &out.tokens == reference,
        Err(_) => false,
    }
}

/// Generate `n` triples, deterministically for a given seed. Every triple is
/// guaranteed to round-trip through the labeler and editor.
pub fn synth_generate(seed: u64, n: usize) -> Vec<DialogueExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut rejected = 0;
    while out.len() < n {
        let ex = candidate(&mut rng);
        if round_trips(&ex) {
            out.push(ex);
        } else {
            rejected += 1;
            assert!(
                rejected < 100 + 10 * n,
                "template grammar produced too many non-round-tripping triples"
            );
        }
    }
    out
}
