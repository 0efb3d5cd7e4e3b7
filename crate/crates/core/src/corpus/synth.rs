//! Synthetic corpus generator with planted latents.
//!
//! Signal is planted in three channels (session answers, counselor strategy
//! usage, help-seeker wording). Each channel's visibility in the transcript is
//! controlled separately, so an input row only sees the channels it is meant
//! to see.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryOutcome, Conversation, Outcome, Source, Speaker, Turn};
use crate::encoding::{render_plain, Tokenizer};
use crate::session::{question_schema, schema_for, Answer, Provenance, QuestionId, SessionFeatures};
use crate::utterance::{FeatureGroup, StrategyId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Help seeker reports negative attitudes or denies the suggestion.
    Session,
    /// No counselor turn uses an Emotional Attending strategy.
    Strategy,
    /// Latent distress flag, visible only through help-seeker wording.
    Lexical,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Session, Channel::Strategy, Channel::Lexical];
}

/// Channel activations of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelFlags {
    pub session: bool,
    pub strategy: bool,
    pub lexical: bool,
}

impl ChannelFlags {
    pub fn get(&self, channel: Channel) -> bool {
        match channel {
            Channel::Session => self.session,
            Channel::Strategy => self.strategy,
            Channel::Lexical => self.lexical,
        }
    }

    fn set(&mut self, channel: Channel, value: bool) {
        match channel {
            Channel::Session => self.session = value,
            Channel::Strategy => self.strategy = value,
            Channel::Lexical => self.lexical = value,
        }
    }
}

/// The outcome is negative when at least `min_active` of `channels` fire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRule {
    pub channels: Vec<Channel>,
    pub min_active: usize,
}

impl OutcomeRule {
    pub fn only(channel: Channel) -> Self {
        OutcomeRule { channels: vec![channel], min_active: 1 }
    }

    pub fn any(channels: &[Channel]) -> Self {
        OutcomeRule { channels: channels.to_vec(), min_active: 1 }
    }

    pub fn at_least(min_active: usize, channels: &[Channel]) -> Self {
        OutcomeRule { channels: channels.to_vec(), min_active }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Validation("outcome rule needs at least one channel".into()));
        }
        let mut seen = self.channels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.channels.len() {
            return Err(Error::Validation("outcome rule lists a channel twice".into()));
        }
        if self.min_active == 0 || self.min_active > self.channels.len() {
            return Err(Error::Validation(format!(
                "min_active {} must be between 1 and {}",
                self.min_active,
                self.channels.len()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, flags: &ChannelFlags) -> BinaryOutcome {
        let active = self.channels.iter().filter(|c| flags.get(**c)).count();
        BinaryOutcome::from_negative(active >= self.min_active)
    }

    /// Re-derive the outcome from the underlying latents rather than the
    /// stored flags.
    pub fn evaluate(&self, latents: &SessionLatents) -> BinaryOutcome {
        let flags = ChannelFlags {
            session: session_flag(&latents.session),
            strategy: strategy_flag(&latents.fine_labels, &latents.speakers),
            lexical: latents.flags.lexical,
        };
        self.apply(&flags)
    }
}

/// Probability that each kind of planted signal shows up in the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Leakage {
    /// Counselor turns use wording specific to their strategy.
    pub strategy_text: f64,
    /// Help-seeker turns mention a session answer.
    pub session_text: f64,
    /// Help-seeker turns of flagged sessions carry a distress cue.
    pub lexical: f64,
    /// Counselor turns borrow the wording of a sibling strategy in the same
    /// group, blurring fine labels while keeping groups separable.
    pub fine_confusion: f64,
}

impl Default for Leakage {
    fn default() -> Self {
        Leakage { strategy_text: 1.0, session_text: 0.0, lexical: 0.0, fine_confusion: 0.0 }
    }
}

/// Summary quality loss for long sessions: past `min_tokens`, the stance
/// latent that drives the mock's stance summary is flipped at `flip_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Degradation {
    pub min_tokens: usize,
    pub flip_rate: f64,
}

impl Default for Degradation {
    fn default() -> Self {
        Degradation { min_tokens: 3000, flip_rate: 0.5 }
    }
}

/// Prior activation rate of each channel before conditioning on the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelRates {
    pub session: f64,
    pub strategy: f64,
    pub lexical: f64,
}

impl Default for ChannelRates {
    fn default() -> Self {
        ChannelRates { session: 0.4, strategy: 0.4, lexical: 0.4 }
    }
}

impl ChannelRates {
    fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Session => self.session,
            Channel::Strategy => self.strategy,
            Channel::Lexical => self.lexical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_sessions: usize,
    pub seed: u64,
    /// Target share of negative outcomes.
    pub negative_rate: f64,
    pub rule: OutcomeRule,
    pub channel_rates: ChannelRates,
    /// Probability that an outcome is replaced by an independent draw.
    pub noise_rate: f64,
    pub leakage: Leakage,
    pub degradation: Option<Degradation>,
    /// Inclusive range of turns per session.
    pub turns: (usize, usize),
    /// Inclusive range of words per turn.
    pub words: (usize, usize),
    /// Share of sessions whose counselor turns carry group labels in the corpus.
    pub annotated_rate: f64,
    /// Chance that a counselor turn gets a second strategy.
    pub second_label_rate: f64,
    /// Chance that a counselor turn has no strategy at all.
    pub unlabeled_turn_rate: f64,
    /// Per-turn chance of Emotional Attending in sessions where the strategy
    /// channel is off.
    pub emotional_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_sessions: 200,
            seed: 0,
            negative_rate: 0.3,
            rule: OutcomeRule::any(&[Channel::Session]),
            channel_rates: ChannelRates::default(),
            noise_rate: 0.0,
            leakage: Leakage::default(),
            degradation: None,
            turns: (8, 16),
            words: (6, 20),
            annotated_rate: 1.0,
            second_label_rate: 0.2,
            unlabeled_turn_rate: 0.1,
            emotional_rate: 0.35,
        }
    }
}

impl SynthSpec {
    /// Sessions long enough for a sizeable share to pass 3K tokens.
    pub fn long_profile(mut self) -> Self {
        self.turns = (20, 160);
        self.words = (10, 50);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        let probs = [
            ("negative_rate", self.negative_rate),
            ("noise_rate", self.noise_rate),
            ("leakage.strategy_text", self.leakage.strategy_text),
            ("leakage.session_text", self.leakage.session_text),
            ("leakage.lexical", self.leakage.lexical),
            ("leakage.fine_confusion", self.leakage.fine_confusion),
            ("channel_rates.session", self.channel_rates.session),
            ("channel_rates.strategy", self.channel_rates.strategy),
            ("channel_rates.lexical", self.channel_rates.lexical),
            ("annotated_rate", self.annotated_rate),
            ("second_label_rate", self.second_label_rate),
            ("unlabeled_turn_rate", self.unlabeled_turn_rate),
            ("emotional_rate", self.emotional_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} = {p} is not a probability")));
            }
        }
        if let Some(d) = self.degradation {
            if !(0.0..=1.0).contains(&d.flip_rate) {
                return Err(Error::Validation("degradation.flip_rate is not a probability".into()));
            }
        }
        if self.turns.0 < 2 || self.turns.0 > self.turns.1 {
            return Err(Error::Validation(format!(
                "turn range {:?} must be ordered and start at 2 or more",
                self.turns
            )));
        }
        if self.words.0 < 1 || self.words.0 > self.words.1 {
            return Err(Error::Validation(format!("word range {:?} is invalid", self.words)));
        }
        let n_neg = self.negative_count();
        if self.n_sessions > 0 && self.negative_rate > 0.0 && self.negative_rate < 1.0
            && (n_neg == 0 || n_neg == self.n_sessions)
        {
            return Err(Error::Validation(format!(
                "negative_rate {} cannot give both classes with {} sessions",
                self.negative_rate, self.n_sessions
            )));
        }
        for negative in [true, false] {
            let needed = if negative { n_neg } else { self.n_sessions - n_neg };
            if needed > 0 && self.flag_table(negative).iter().all(|(_, w)| *w == 0.0) {
                return Err(Error::Validation(format!(
                    "channel rates make a {} outcome impossible under the rule",
                    BinaryOutcome::from_negative(negative).as_str()
                )));
            }
        }
        Ok(())
    }

    fn negative_count(&self) -> usize {
        (self.negative_rate * self.n_sessions as f64).round() as usize
    }

    /// Flag combinations consistent with an outcome, weighted by the priors.
    fn flag_table(&self, negative: bool) -> Vec<(ChannelFlags, f64)> {
        let mut out = Vec::new();
        for bits in 0..8u8 {
            let mut flags = ChannelFlags::default();
            let mut weight = 1.0;
            for (i, c) in Channel::ALL.iter().enumerate() {
                let on = bits & (1 << i) != 0;
                flags.set(*c, on);
                let p = self.channel_rates.get(*c);
                weight *= if on { p } else { 1.0 - p };
            }
            if self.rule.apply(&flags).is_negative() == negative {
                out.push((flags, weight));
            }
        }
        out
    }
}

/// Hidden record for one synthetic session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLatents {
    pub session_id: String,
    pub session: SessionFeatures,
    pub speakers: Vec<Speaker>,
    /// Fine strategy labels per turn, empty for help-seeker turns.
    pub fine_labels: Vec<Vec<StrategyId>>,
    pub flags: ChannelFlags,
    pub outcome: BinaryOutcome,
    pub noise_applied: bool,
    /// Whether the stance summary should read as negative.
    pub stance_negative: bool,
    pub token_count: usize,
}

pub(crate) fn session_flag(features: &SessionFeatures) -> bool {
    features.first(QuestionId::HelpSeekerNegativeAttitudes) == Some("Yes")
        || features.first(QuestionId::HelpSeekerReaction) == Some("Denying")
}

pub(crate) fn strategy_flag(fine_labels: &[Vec<StrategyId>], speakers: &[Speaker]) -> bool {
    !fine_labels
        .iter()
        .zip(speakers)
        .filter(|(_, s)| **s == Speaker::Counselor)
        .any(|(labels, _)| labels.iter().any(|l| l.group() == FeatureGroup::EmotionalAttending))
}

/// Generate `spec.n_sessions` conversations and their latents.
pub fn synth_generate(spec: &SynthSpec) -> Result<(Vec<Conversation>, Vec<SessionLatents>)> {
    spec.validate()?;
    let n = spec.n_sessions;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_neg = spec.negative_count();
    let mut planned: Vec<bool> = (0..n).map(|i| i < n_neg).collect();
    planned.shuffle(&mut rng);

    let tables = [spec.flag_table(false), spec.flag_table(true)];
    let tokenizer = Tokenizer::default();
    let mut conversations = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    for (i, negative) in planned.into_iter().enumerate() {
        let mut srng = ChaCha8Rng::seed_from_u64(spec.seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let table = &tables[usize::from(negative)];
        let flags = weighted_pick(table, &mut srng);
        let (conv, lat) = generate_session(spec, i, flags, &mut srng, &tokenizer)?;
        debug_assert_eq!(spec.rule.evaluate(&lat).is_negative(), negative);
        conversations.push(conv);
        latents.push(lat);
    }
    Ok((conversations, latents))
}

fn weighted_pick(table: &[(ChannelFlags, f64)], rng: &mut ChaCha8Rng) -> ChannelFlags {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (flags, w) in table {
        if *w > 0.0 {
            if x < *w {
                return *flags;
            }
            x -= w;
        }
    }
    table.iter().rev().find(|(_, w)| *w > 0.0).map(|(f, _)| *f).unwrap_or_default()
}

fn generate_session(
    spec: &SynthSpec,
    index: usize,
    flags: ChannelFlags,
    rng: &mut ChaCha8Rng,
    tokenizer: &Tokenizer,
) -> Result<(Conversation, SessionLatents)> {
    let session = plant_session_features(flags.session, rng);
    let n_turns = rng.gen_range(spec.turns.0..=spec.turns.1);
    let speakers: Vec<Speaker> = (0..n_turns)
        .map(|t| if t % 2 == 0 { Speaker::HelpSeeker } else { Speaker::Counselor })
        .collect();
    let fine_labels = plant_strategies(spec, &speakers, flags.strategy, rng);
    let annotated = rng.gen::<f64>() < spec.annotated_rate;

    let mut turns = Vec::with_capacity(n_turns);
    for (t, speaker) in speakers.iter().enumerate() {
        let words = rng.gen_range(spec.words.0..=spec.words.1);
        let turn = match speaker {
            Speaker::HelpSeeker => {
                Turn::help_seeker(help_seeker_text(spec, t == 0, &session, flags.lexical, words, rng))
            }
            Speaker::Counselor => {
                let text = counselor_text(spec, &fine_labels[t], words, rng);
                let turn = Turn::counselor(text);
                if annotated {
                    turn.with_features(fine_labels[t].iter().map(|l| l.group()))
                } else {
                    turn
                }
            }
        };
        turns.push(turn);
    }
    let token_count = tokenizer.count(&render_plain(&turns)?);

    let planned_negative = spec.rule.apply(&flags).is_negative();
    let noise_applied = spec.noise_rate > 0.0 && rng.gen::<f64>() < spec.noise_rate;
    let negative = if noise_applied {
        rng.gen::<f64>() < spec.negative_rate
    } else {
        planned_negative
    };
    let outcome = BinaryOutcome::from_negative(negative);
    let stance_negative = match spec.degradation {
        Some(d) if token_count >= d.min_tokens && rng.gen::<f64>() < d.flip_rate => !negative,
        _ => negative,
    };
    let three_class = if negative {
        Outcome::Negative
    } else if rng.gen::<f64>() < 0.3 {
        Outcome::Neutral
    } else {
        Outcome::Positive
    };

    let session_id = format!("syn{index:05}");
    let conversation = Conversation {
        session_id: session_id.clone(),
        source: Source::Synthetic,
        outcome: Some(three_class),
        turns,
    };
    conversation.validate()?;
    let latents = SessionLatents {
        session_id,
        session,
        speakers,
        fine_labels,
        flags,
        outcome,
        noise_applied,
        stance_negative,
        token_count,
    };
    Ok((conversation, latents))
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn plant_session_features(flagged: bool, rng: &mut ChaCha8Rng) -> SessionFeatures {
    use QuestionId as Q;
    let mut f = SessionFeatures::new(Provenance::Planted);
    for schema in question_schema() {
        let q = schema.question_id;
        let choices: Vec<&str> = schema
            .choices
            .iter()
            .map(String::as_str)
            .filter(|c| *c != "Not clear")
            .collect();
        let answer = if schema.multi_select {
            let exclusive = "None";
            let pool: Vec<&str> = choices.iter().copied().filter(|c| *c != exclusive).collect();
            if choices.contains(&exclusive) && rng.gen::<f64>() < 0.2 {
                vec![exclusive.to_string()]
            } else {
                let k = if rng.gen::<f64>() < 0.6 { 1 } else { 2 };
                let mut chosen: Vec<&str> = pool.choose_multiple(rng, k).copied().collect();
                chosen.sort_by_key(|c| schema.choice_index(c));
                chosen.into_iter().map(String::from).collect()
            }
        } else if q == Q::CounselorNegativeAttitudes && rng.gen::<f64>() < 0.5 {
            vec!["None".to_string()]
        } else {
            vec![pick(rng, &choices).to_string()]
        };
        f.set(q, Answer::Chosen(answer));
    }
    let non_denying: Vec<&str> = schema_for(Q::HelpSeekerReaction)
        .choices
        .iter()
        .map(String::as_str)
        .filter(|c| *c != "Denying")
        .collect();
    let (hs_negative, reaction) = if flagged {
        match rng.gen_range(0..3) {
            0 => ("Yes", "Denying"),
            1 => ("Yes", pick(rng, &non_denying)),
            _ => ("No", "Denying"),
        }
    } else {
        ("No", pick(rng, &non_denying))
    };
    f.set(Q::HelpSeekerNegativeAttitudes, Answer::single(hs_negative));
    f.set(Q::HelpSeekerReaction, Answer::single(reaction));
    f
}

fn plant_strategies(
    spec: &SynthSpec,
    speakers: &[Speaker],
    flagged: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<StrategyId>> {
    let other_groups = [FeatureGroup::FactRelated, FeatureGroup::ProblemSolving, FeatureGroup::Resources];
    let mut labels: Vec<Vec<StrategyId>> = speakers
        .iter()
        .map(|s| {
            if *s == Speaker::HelpSeeker || rng.gen::<f64>() < spec.unlabeled_turn_rate {
                return Vec::new();
            }
            let n = if rng.gen::<f64>() < spec.second_label_rate { 2 } else { 1 };
            let mut out: Vec<StrategyId> = Vec::new();
            for _ in 0..n {
                let group = if !flagged && rng.gen::<f64>() < spec.emotional_rate {
                    FeatureGroup::EmotionalAttending
                } else {
                    *other_groups.choose(rng).expect("non-empty")
                };
                let members = group.members();
                let id = *members.choose(rng).expect("groups are non-empty");
                if !out.contains(&id) {
                    out.push(id);
                }
            }
            out.sort();
            out
        })
        .collect();
    if !flagged && strategy_flag(&labels, speakers) {
        // guarantee at least one Emotional Attending turn
        let counselor_turns: Vec<usize> = (0..speakers.len()).filter(|t| speakers[*t] == Speaker::Counselor).collect();
        if let Some(&t) = counselor_turns.choose(rng) {
            let members = FeatureGroup::EmotionalAttending.members();
            labels[t] = vec![*members.choose(rng).expect("non-empty")];
        }
    }
    labels
}

const FILLER: &[&str] = &[
    "um", "so", "like", "today", "yesterday", "really", "just", "maybe", "kind", "of", "the", "a",
    "thing", "things", "stuff", "time", "day", "week", "morning", "night", "there", "here", "then",
    "now", "well", "okay", "yeah", "still", "again", "also", "about", "around", "with", "and",
    "but", "when", "where", "what", "that", "this", "it", "is", "was", "be", "going", "know",
    "think", "mean", "guess", "sort", "some", "lot", "bit", "little", "more", "less", "very",
    "pretty", "honestly", "anyway", "actually", "basically", "probably", "sometimes", "usually",
];

fn with_filler(core: String, words: usize, rng: &mut ChaCha8Rng) -> String {
    let mut out = core;
    let have = out.split_whitespace().count();
    if have < words {
        let extra: Vec<&str> = (0..words - have).map(|_| pick(rng, FILLER)).collect();
        out.push(' ');
        out.push_str(&extra.join(" "));
    }
    out
}

const HS_OPENERS: &[&str] = &[
    "hi i need to talk to someone",
    "hello is anyone there",
    "hey i don't really know how to start",
    "hi i was told i could message here",
];

const HS_GENERIC: &[&str] = &[
    "i don't know what to do",
    "it has been going on for a while",
    "i guess that makes sense",
    "yeah that is what happened",
    "i am not sure",
    "it happened again last week",
    "i told you most of it already",
    "can i ask you something",
];

const HS_DISTRESS: &[&str] = &[
    "nothing ever helps me",
    "i feel worse than before",
    "what is even the point",
    "nobody can fix this",
    "this is hopeless honestly",
];

fn session_phrase(q: QuestionId, choice: &str) -> String {
    let c = choice.to_lowercase();
    match q {
        QuestionId::HelpSeekerIdentity => format!("i am the {c} here"),
        QuestionId::PerpetratorIdentity => format!("it is my {c}"),
        QuestionId::AbuseType => format!("it is {c} stuff"),
        QuestionId::AbuseSeverity => format!("it feels like {c}"),
        QuestionId::HelpSeekerNeeds => format!("i am here for {c}"),
        QuestionId::CounselorResponse => format!("you are {c}"),
        QuestionId::CounselorStrategies => format!("you keep {c}"),
        QuestionId::WhatsBeenTried => format!("i tried {c}"),
        QuestionId::CounselorAdvice => format!("you want me to try {c}"),
        QuestionId::HelpSeekerReaction => format!("my answer is {c}"),
        QuestionId::CounselorNegativeAttitudes => format!("you seem {c}"),
        QuestionId::HelpSeekerNegativeAttitudes => {
            if choice == "Yes" {
                "i do not like this chat".to_string()
            } else {
                "this chat is fine".to_string()
            }
        }
    }
}

fn help_seeker_text(
    spec: &SynthSpec,
    opener: bool,
    session: &SessionFeatures,
    distress: bool,
    words: usize,
    rng: &mut ChaCha8Rng,
) -> String {
    let mut parts = vec![pick(rng, if opener { HS_OPENERS } else { HS_GENERIC }).to_string()];
    if spec.leakage.session_text > 0.0 && rng.gen::<f64>() < spec.leakage.session_text {
        let q = *QuestionId::ALL.choose(rng).expect("non-empty");
        if let Some(choice) = session.answer(q).choices().choose(rng) {
            parts.push(session_phrase(q, choice));
        }
    }
    if distress && spec.leakage.lexical > 0.0 && rng.gen::<f64>() < spec.leakage.lexical {
        parts.push(pick(rng, HS_DISTRESS).to_string());
    }
    with_filler(parts.join(" "), words, rng)
}

/// Two phrasings per codebook entry, in codebook order.
const STRATEGY_TEMPLATES: [[&str; 2]; 18] = [
    ["so what you are saying is", "it sounds like you mean"],
    ["it seems the bigger picture here is", "maybe the pattern is that"],
    ["you sound really hurt and scared", "that must feel so lonely and sad"],
    ["your feelings are completely valid", "it makes sense you feel that way"],
    ["you deserve care no matter what", "none of this is your fault at all"],
    ["can you tell me more about how it feels", "how has all of this been for you"],
    ["you were so brave to reach out", "i am proud of you for speaking up"],
    ["i am sorry the chat lagged", "i am so sorry you are going through this"],
    ["how old are you right now", "where are you staying at the moment"],
    ["by law adults have to keep kids safe", "the hotline is open every hour of the day"],
    ["what have you tried so far", "have you done anything to deal with it"],
    ["is there an adult you trust to ask", "who else do you have for support"],
    ["one idea might be to write it down", "you could try taking a short walk"],
    ["like i said you really should call them", "again i think you need to tell someone"],
    ["child protective services can investigate", "you can file a report with cps"],
    ["a school counselor could help you", "talking to a therapist may really help"],
    ["if you are in danger call the police", "you can call nine one one right away"],
    ["there is a text line you can use", "there is a website with more support"],
];

const COUNSELOR_GENERIC: &[&str] = &[
    "okay i hear you",
    "thanks for telling me",
    "mhm go on",
    "i see",
    "alright",
    "got it",
];

fn counselor_text(spec: &SynthSpec, labels: &[StrategyId], words: usize, rng: &mut ChaCha8Rng) -> String {
    let mut parts = Vec::new();
    for label in labels {
        if rng.gen::<f64>() >= spec.leakage.strategy_text {
            continue;
        }
        let mut source = *label;
        if spec.leakage.fine_confusion > 0.0 && rng.gen::<f64>() < spec.leakage.fine_confusion {
            let siblings = label.group().members();
            source = *siblings.choose(rng).expect("non-empty");
        }
        parts.push(pick(rng, &STRATEGY_TEMPLATES[source.index()]).to_string());
    }
    if parts.is_empty() {
        parts.push(pick(rng, COUNSELOR_GENERIC).to_string());
    }
    with_filler(parts.join(" and "), words, rng)
}

/// Number of sessions per outcome, for quick summaries.
pub fn class_counts(latents: &[SessionLatents]) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for l in latents {
        *out.entry(l.outcome.as_str()).or_insert(0) += 1;
    }
    out
}
