//! Level-1 quiz content.
//!
//! The bundled items are derived from the view table and short per-view
//! descriptions; they are not an official question set.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{check_answer, view_spec, QuizItem, SessionError, Variant, View, VIEW_TABLE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuizBankError {
    #[error("view {0} has fewer than two items")]
    TooFewItems(View),
    #[error("item {id}: {reason}")]
    BadItem { id: String, reason: String },
    #[error("duplicate item id {0}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizBank {
    pub items: Vec<QuizItem>,
    /// Reference text per view; every answer is quoted in its view's card.
    pub fact_cards: BTreeMap<View, String>,
}

fn clock_answer(hour: u8) -> String {
    format!("{hour} o'clock")
}

fn tilt_answer(lo: f64, hi: f64) -> String {
    format!("{lo} to {hi}")
}

fn anatomy(view: View) -> (&'static str, &'static str) {
    match view {
        View::Apical => (
            "Which structures is the apical window mainly used to evaluate?",
            "ventricles, atria and valves",
        ),
        View::Plax => (
            "Besides the left atrium and ventricle, which valves does the parasternal long-axis view show?",
            "mitral and aortic valves",
        ),
        View::Psax => (
            "Alongside left ventricular function, what does the parasternal short-axis view let you judge?",
            "septal motion",
        ),
        View::Subcostal => (
            "In neonates the subcostal window images the heart through which organ's acoustic path?",
            "through the liver",
        ),
        View::Suprasternal => (
            "Which vascular structure is the suprasternal view chiefly used for?",
            "aortic arch",
        ),
    }
}

fn card(view: View) -> String {
    let (_, clock, lo, hi) = VIEW_TABLE[view as usize];
    let detail = match view {
        View::Apical => "The apical window covers the ventricles, atria and valves; tilting it opens up the left ventricular outflow tract.",
        View::Plax => "The long-axis parasternal plane lays out the left atrium, left ventricle, mitral and aortic valves, and the outflow tract.",
        View::Psax => "The short-axis parasternal plane is used for left ventricular function, morphology and septal motion; the tilt adds outflow tract perspectives.",
        View::Subcostal => "In neonates the subcostal window looks through the liver at the atrial septum and vena cava; the tilt helps find shunts.",
        View::Suprasternal => "The suprasternal window targets the aortic arch and great vessels rather than the chambers.",
    };
    format!(
        "{}: notch toward {}; tilt view at {} degrees. {}",
        view.label(),
        clock_answer(clock),
        tilt_answer(lo, hi),
        detail
    )
}

fn options_with(answer: &str, pool: impl IntoIterator<Item = String>) -> (Vec<String>, usize) {
    let mut opts: Vec<String> = pool.into_iter().collect();
    opts.sort();
    opts.dedup();
    opts.retain(|o| o != answer);
    opts.truncate(3);
    // Rotate the correct answer through positions so it is not always first.
    let idx = answer.len() % (opts.len() + 1);
    opts.insert(idx, answer.to_string());
    (opts, idx)
}

/// The built-in bank: notch direction, tilt range and one anatomy item per view.
pub fn default_bank() -> QuizBank {
    let mut items = Vec::new();
    let mut fact_cards = BTreeMap::new();
    let clocks = || VIEW_TABLE.iter().map(|r| clock_answer(r.1)).chain([clock_answer(12)]);
    let tilts = || VIEW_TABLE.iter().map(|r| tilt_answer(r.2, r.3)).chain([tilt_answer(0.0, 5.0)]);

    for view in View::ALL {
        let spec = view_spec(view, Variant::Tilt);
        fact_cards.insert(view, card(view));

        let answer = clock_answer(spec.notch_clock);
        let (options, answer_index) = options_with(&answer, clocks());
        items.push(QuizItem {
            id: format!("{}-notch", view.key()),
            prompt: format!("Which clock direction should the probe notch face for the {} view?", view.label()),
            options,
            answer_index,
            explanation: format!("For {}, the notch points to {}.", view.label(), answer),
            view: Some(view),
        });

        let answer = tilt_answer(spec.tilt_lo_deg, spec.tilt_hi_deg);
        let (options, answer_index) = options_with(&answer, tilts());
        items.push(QuizItem {
            id: format!("{}-tilt", view.key()),
            prompt: format!("How many degrees of tilt give the {} tilt view?", view.label()),
            options,
            answer_index,
            explanation: format!("The {} tilt view sits at {} degrees.", view.label(), answer),
            view: Some(view),
        });

        let (prompt, answer) = anatomy(view);
        let (options, answer_index) = options_with(answer, View::ALL.iter().map(|&v| anatomy(v).1.to_string()));
        items.push(QuizItem {
            id: format!("{}-anatomy", view.key()),
            prompt: prompt.to_string(),
            options,
            answer_index,
            explanation: card(view),
            view: Some(view),
        });
    }
    QuizBank { items, fact_cards }
}

impl QuizBank {
    pub fn get(&self, id: &str) -> Option<&QuizItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn check(&self, id: &str, choice: usize) -> Option<Result<(bool, &str), SessionError>> {
        self.get(id).map(|item| check_answer(item, choice))
    }

    pub fn validate(&self) -> Result<(), QuizBankError> {
        let mut ids: Vec<&str> = self.items.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(QuizBankError::DuplicateId(w[0].to_string()));
        }
        for view in View::ALL {
            if self.items.iter().filter(|i| i.view == Some(view)).count() < 2 {
                return Err(QuizBankError::TooFewItems(view));
            }
        }
        for item in &self.items {
            let bad = |reason: &str| QuizBankError::BadItem { id: item.id.clone(), reason: reason.to_string() };
            if item.options.len() < 2 {
                return Err(bad("needs at least two options"));
            }
            let answer = item.answer().ok_or_else(|| bad("answer index out of range"))?;
            let traced = match item.view {
                Some(v) => self.fact_cards.get(&v).is_some_and(|c| c.contains(answer)),
                None => self.fact_cards.values().any(|c| c.contains(answer)),
            };
            if !traced {
                return Err(bad("answer not found in fact cards"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_is_valid_and_stable() {
        let bank = default_bank();
        bank.validate().unwrap();
        assert_eq!(bank, default_bank());
        assert_eq!(bank.items.len(), 15);
    }

    #[test]
    fn known_answers() {
        let bank = default_bank();
        assert_eq!(bank.get("plax-notch").unwrap().answer(), Some("11 o'clock"));
        assert_eq!(bank.get("subcostal-tilt").unwrap().answer(), Some("40 to 45"));
        assert_eq!(bank.get("suprasternal-anatomy").unwrap().answer(), Some("aortic arch"));
    }

    #[test]
    fn options_are_distinct() {
        for item in default_bank().items {
            let mut o = item.options.clone();
            o.sort();
            o.dedup();
            assert_eq!(o.len(), item.options.len(), "{}", item.id);
            assert!(o.len() >= 3);
        }
    }

    #[test]
    fn validation_catches_untraceable_answers() {
        let mut bank = default_bank();
        let i = bank.items[0].answer_index;
        bank.items[0].options[i] = "7 o'clock".into();
        assert!(matches!(bank.validate(), Err(QuizBankError::BadItem { .. })));
        let mut bank = default_bank();
        bank.items.retain(|i| i.view != Some(View::Psax) || i.id == "psax-notch");
        assert_eq!(bank.validate(), Err(QuizBankError::TooFewItems(View::Psax)));
    }
}
