//! Reference conversation used across tests and docs.

use alloc::vec;

use crate::corpus::{Conversation, Speaker, Turn};

/// The six-turn book conversation, pre-segmented. Unit ids are `t{turn}.{k}`.
pub fn book_chat() -> Conversation {
    use Speaker::*;
    Conversation {
        id: "book_chat".into(),
        turns: vec![
            Turn::from_units("t0", Machine, "what do you want to talk about", &["what do you want to talk about"]),
            Turn::from_units(
                "t1",
                Human,
                "what can you tell me what the top books are right now",
                &["what can you tell me what the top books are right now"],
            ),
            Turn::from_units(
                "t2",
                Machine,
                "i am so excited to talk to you about books. i'm actually a pretty big bookworm, and i love to read when i'm not chatting",
                &[
                    "i am so excited to talk to you about books",
                    "i'm actually a pretty big bookworm and i love to read when i'm not chatting",
                ],
            ),
            Turn::from_units(
                "t3",
                Human,
                "oh [SEG] what are some titles of the books you've read",
                &["oh", "what are some titles of the books you've read"],
            ),
            Turn::from_units(
                "t4",
                Machine,
                "recently, i'm reading the great gastby. it's really thought provoking, and i can see why some people call it the great american novel. how about you? what book do you like?",
                &[
                    "recently i'm reading the great gastby",
                    "it's really thought provoking and i can see why some people call it the great american novel",
                    "how about you",
                    "what book do you like",
                ],
            ),
            Turn::from_units(
                "t5",
                Human,
                "i haven't read a book in a while [SEG] do you have recommendations in the sci fi",
                &["i haven't read a book in a while", "do you have recommendations in the sci fi"],
            ),
        ],
    }
}

const FILLERS: [&str; 24] = [
    "i", "think", "the", "movie", "was", "really", "long", "my", "dog", "likes", "to", "run", "we", "went", "there",
    "last", "week", "it", "rained", "a", "lot", "she", "reads", "books",
];

/// Punctuated two-sentence texts whose second sentence always opens with the
/// cue word `anyway`, which appears nowhere else.
pub fn cue_corpus(n: usize, seed: u64) -> alloc::vec::Vec<alloc::string::String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sentence = |rng: &mut rand_chacha::ChaCha8Rng, lo: usize, hi: usize| {
        let len = rng.random_range(lo..=hi);
        (0..len).map(|_| FILLERS[rng.random_range(0..FILLERS.len())]).collect::<alloc::vec::Vec<_>>().join(" ")
    };
    (0..n)
        .map(|_| {
            let first = sentence(&mut rng, 2, 6);
            let second = sentence(&mut rng, 1, 5);
            alloc::format!("{first}. anyway {second}")
        })
        .collect()
}

/// Cue word and the label set it determines in [`toy_examples`].
pub const TOY_CUES: [(&str, &[&str]); 8] = [
    ("hello", &["opening"]),
    ("goodbye", &["closing"]),
    ("thankyou", &["thanks"]),
    ("sorry", &["apology"]),
    ("yeah", &["positive_answer", "statement_non_opinion"]),
    ("nope", &["negative_answer"]),
    ("awesome", &["appreciation"]),
    ("whyso", &["opinion_question"]),
];

/// Rendered classifier inputs whose labels depend only on a cue word placed
/// among random fillers. The cues cycle so every label set is represented.
pub fn toy_examples(n: usize, seed: u64) -> alloc::vec::Vec<(alloc::string::String, &'static [&'static str])> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (cue, tags) = TOY_CUES[i % TOY_CUES.len()];
            let mut words: alloc::vec::Vec<&str> =
                (0..rng.random_range(2..=6)).map(|_| FILLERS[rng.random_range(0..FILLERS.len())]).collect();
            let at = rng.random_range(0..=words.len());
            words.insert(at, cue);
            let prev = FILLERS[rng.random_range(0..FILLERS.len())];
            (alloc::format!("<empty> <u_p> {prev} <u_c> {}", words.join(" ")), tags)
        })
        .collect()
}
