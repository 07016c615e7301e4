//! Seeded generator for ICEWS-style corpora and questions with known
//! supporting facts. Used by the retrieval and recall checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::store::{FactId, FactTime, StoreBuilder, TkgStore};
use crate::time::TimeStamp;

const ACTORS: &[&str] = &[
    "China",
    "Japan",
    "France",
    "Iran",
    "Kuwait",
    "Qatar",
    "Colombia",
    "Bolivia",
    "Burundi",
    "Timor-Leste",
    "South Korea",
    "North Korea",
    "Vietnam",
    "Laos",
    "Brazil",
    "Germany",
    "India",
    "Sri Lanka",
    "Guatemala",
    "Uruguay",
    "Barack Obama",
    "Wen Jiabao",
    "Xi Jinping",
    "Angela Merkel",
    "Shinzo Abe",
    "Nicolas Sarkozy",
    "Hugo Chávez",
    "Kim Jong-Il",
    "Ban Ki-moon",
    "Vladimir Putin",
    "Lula da Silva",
    "Manmohan Singh",
    "Mahmoud Abbas",
    "Recep Tayyip Erdoğan",
    "Ministry (Japan)",
    "Police (India)",
    "Citizen (Iran)",
    "Government (Kuwait)",
    "Military (Colombia)",
    "Media Personnel (Somalia)",
];

const PREDICATES: &[&str] = &[
    "Make a visit",
    "Host a visit",
    "Express intent to meet or negotiate",
    "Make statement",
    "Consult",
    "Sign formal agreement",
    "Criticize or denounce",
    "Praise or endorse",
    "Engage in negotiation",
    "Provide economic aid",
    "Reject",
    "Accuse",
    "Threaten",
    "Demand",
    "Make an appeal or request",
    "Discuss by telephone",
    "Meet at a third location",
    "Cooperate economically",
];

/// A corpus of exactly `n` distinct day-granularity point facts.
pub fn corpus(n: usize, seed: u64) -> TkgStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = StoreBuilder::new();
    let mut added = 0;
    while added < n {
        let s = ACTORS.choose(&mut rng).unwrap();
        let mut o = ACTORS.choose(&mut rng).unwrap();
        while o == s {
            o = ACTORS.choose(&mut rng).unwrap();
        }
        let p = PREDICATES.choose(&mut rng).unwrap();
        let time = random_day(&mut rng);
        if builder
            .push(s, p, o, FactTime::Point { time })
            .expect("synthetic fact is valid")
        {
            added += 1;
        }
    }
    builder.build()
}

fn random_day(rng: &mut impl Rng) -> TimeStamp {
    let year = rng.gen_range(2005..=2015);
    let month = rng.gen_range(1..=12);
    let day = rng.gen_range(1..=28);
    TimeStamp::ymd(year, month, day).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticQuestion {
    pub question_id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub answer_type: String,
    pub gold_fact_ids: Vec<FactId>,
}

/// Questions about randomly chosen facts. Gold facts are every fact that
/// supports the question's answer.
pub fn questions(store: &TkgStore, n: usize, seed: u64) -> Vec<SyntheticQuestion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let facts = store.facts();
    assert!(!facts.is_empty(), "cannot ask about an empty corpus");
    (0..n)
        .map(|i| {
            let f = &facts[rng.gen_range(0..facts.len())];
            if rng.gen_bool(0.5) {
                let gold: Vec<FactId> = facts
                    .iter()
                    .filter(|g| g.subject == f.subject && g.predicate == f.predicate && g.object == f.object)
                    .map(|g| g.fact_id)
                    .collect();
                SyntheticQuestion {
                    question_id: format!("syn-{i:04}"),
                    question: format!("When did {} {} {}?", f.subject, f.predicate.to_lowercase(), f.object),
                    answers: gold
                        .iter()
                        .map(|id| store.fact(*id).unwrap().time.anchor().to_string())
                        .collect(),
                    answer_type: "time".into(),
                    gold_fact_ids: gold,
                }
            } else {
                let gold: Vec<FactId> = facts
                    .iter()
                    .filter(|g| g.predicate == f.predicate && g.object == f.object && g.time == f.time)
                    .map(|g| g.fact_id)
                    .collect();
                SyntheticQuestion {
                    question_id: format!("syn-{i:04}"),
                    question: format!(
                        "Who did {} {} in {}?",
                        f.predicate.to_lowercase(),
                        f.object,
                        f.time.anchor()
                    ),
                    answers: gold.iter().map(|id| store.fact(*id).unwrap().subject.clone()).collect(),
                    answer_type: "entity".into(),
                    gold_fact_ids: gold,
                }
            }
        })
        .collect()
}
